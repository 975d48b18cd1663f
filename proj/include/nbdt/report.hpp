#pragma once

// JSON and CSV forms of specs, outcomes and reports. Exports are
// byte-stable: identical inputs give identical documents.

#include "nbdt/experiments.hpp"

#include <json.hpp>

#include <charconv>
#include <limits>
#include <sstream>
#include <string>
#include <variant>

namespace nbdt
{
    using Json = nlohmann::json;

    /// Reads an unsigned integer given as a JSON number or a decimal string.
    inline std::uint64_t json_u64(const Json &j, const char *field)
    {
        if (j.is_number_unsigned())
        {
            return j.get<std::uint64_t>();
        }
        if (j.is_number_integer() && j.get<std::int64_t>() >= 0)
        {
            return static_cast<std::uint64_t>(j.get<std::int64_t>());
        }
        if (j.is_string())
        {
            const std::string &s = j.get_ref<const std::string &>();
            std::uint64_t v = 0;
            const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec == std::errc{} && p == s.data() + s.size() && !s.empty())
            {
                return v;
            }
        }
        throw std::invalid_argument(std::string("field '") + field + "' must be a non-negative integer");
    }

    inline double json_double(const Json &j, const char *field)
    {
        if (j.is_number())
        {
            return j.get<double>();
        }
        if (j.is_string())
        {
            try
            {
                std::size_t used = 0;
                const std::string &s = j.get_ref<const std::string &>();
                const double v = std::stod(s, &used);
                if (used == s.size())
                {
                    return v;
                }
            }
            catch (const std::exception &)
            {
            }
        }
        throw std::invalid_argument(std::string("field '") + field + "' must be a number");
    }

    /// Shortest decimal text that reads back to the same double.
    inline std::string decimal(double v)
    {
        char buf[64];
        const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
        return std::string(buf, p);
    }

    inline MessageType parse_op(const std::string &s)
    {
        if (s == "search" || s == "SEARCH")
        {
            return MessageType::Search;
        }
        if (s == "insert" || s == "INSERT")
        {
            return MessageType::Insert;
        }
        if (s == "delete" || s == "DELETE")
        {
            return MessageType::Delete;
        }
        throw std::invalid_argument("op must be search, insert or delete, not '" + s + "'");
    }

    inline std::string op_name(MessageType t)
    {
        std::string s(log_op_word(t));
        s[0] = static_cast<char>(s[0] - 'A' + 'a');
        return s;
    }

    inline DistributionKind parse_kind(const std::string &s)
    {
        if (const auto k = parse_distribution_kind(s))
        {
            return *k;
        }
        throw std::invalid_argument("unknown distribution '" + s + "'");
    }

    // Distribution specs: numbers as decimal strings, only the fields the
    // kind uses.

    /// Unset (NaN) fields are left out.
    inline Json params_to_json(DistributionKind kind, const DistributionParams &p)
    {
        Json j = Json::object();
        auto put = [&](const char *name, double v) {
            if (!std::isnan(v))
            {
                j[name] = decimal(v);
            }
        };
        switch (kind)
        {
        case DistributionKind::Uniform:
            break;
        case DistributionKind::Normal:
            put("mean", p.mean);
            put("stddev", p.stddev);
            break;
        case DistributionKind::Beta:
            put("alpha", p.alpha);
            put("beta", p.beta);
            break;
        case DistributionKind::PowLaw:
            put("exponent", p.exponent);
            put("scale", p.scale);
            break;
        }
        return j;
    }

    /// Missing fields keep their values from `base`.
    inline DistributionParams params_from_json(const Json &j, DistributionParams base)
    {
        if (!j.is_object())
        {
            throw std::invalid_argument("params must be an object");
        }
        auto read = [&](const char *name, double &field) {
            if (j.contains(name))
            {
                field = json_double(j.at(name), name);
            }
        };
        read("mean", base.mean);
        read("stddev", base.stddev);
        read("alpha", base.alpha);
        read("beta", base.beta);
        read("exponent", base.exponent);
        read("scale", base.scale);
        return base;
    }

    inline Json to_json(const DistributionSpec &s)
    {
        return {{"kind", std::string(to_string(s.kind))},
                {"params", params_to_json(s.kind, s.params)},
                {"seed", std::to_string(s.seed)},
                {"range", Json::array({std::to_string(s.range.lo), std::to_string(s.range.hi)})}};
    }

    inline DistributionSpec distribution_spec_from_json(const Json &j)
    {
        if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string() || !j.contains("range"))
        {
            throw std::invalid_argument("distribution spec needs kind and range");
        }
        DistributionSpec s;
        s.kind = parse_kind(j.at("kind").get<std::string>());
        const Json &r = j.at("range");
        if (!r.is_array() || r.size() != 2)
        {
            throw std::invalid_argument("range must be [lo, hi]");
        }
        s.range = {json_u64(r[0], "range"), json_u64(r[1], "range")};
        s.params = distribution_params_default(s.kind, s.range);
        if (j.contains("params"))
        {
            s.params = params_from_json(j.at("params"), s.params);
        }
        s.seed = j.contains("seed") ? json_u64(j.at("seed"), "seed") : 0;
        validate(s);
        return s;
    }

    /// "dist" as a bare kind name or as {kind, params}.
    inline void read_dist(const Json &j, DistributionKind &kind, std::optional<DistributionParams> &params)
    {
        if (j.is_string())
        {
            kind = parse_kind(j.get<std::string>());
            params.reset();
            return;
        }
        if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string())
        {
            throw std::invalid_argument("dist must be a kind name or an object with a kind");
        }
        kind = parse_kind(j.at("kind").get<std::string>());
        params.reset();
        if (j.contains("params"))
        {
            // Defaults depend on the key range, known only at run time; NaN
            // marks the fields resolve_params fills in then.
            const double unset = std::numeric_limits<double>::quiet_NaN();
            params = params_from_json(j.at("params"), {unset, unset, unset, unset, unset, unset});
        }
    }

    inline void reject_unknown(const Json &j, std::initializer_list<const char *> known)
    {
        if (!j.is_object())
        {
            throw std::invalid_argument("request body must be a JSON object");
        }
        for (const auto &[k, v] : j.items())
        {
            if (std::find_if(known.begin(), known.end(), [&](const char *n) { return k == n; }) == known.end())
            {
                throw std::invalid_argument("unknown field '" + k + "'");
            }
        }
    }

    /// {nodes, dist, keys, seed}; the body of POST /network and of init --config.
    inline InitConfig init_config_from_json(const Json &j)
    {
        reject_unknown(j, {"nodes", "dist", "keys", "seed"});
        if (!j.contains("nodes"))
        {
            throw std::invalid_argument("field 'nodes' is required");
        }
        InitConfig c;
        c.nodes = json_u64(j.at("nodes"), "nodes");
        if (j.contains("dist"))
        {
            read_dist(j.at("dist"), c.dist, c.params);
        }
        if (j.contains("keys"))
        {
            c.keys = json_u64(j.at("keys"), "keys");
        }
        if (j.contains("seed"))
        {
            c.seed = json_u64(j.at("seed"), "seed");
        }
        return c;
    }

    inline Json to_json(const InitConfig &c)
    {
        Json dist = {{"kind", std::string(to_string(c.dist))}};
        if (c.params)
        {
            dist["params"] = params_to_json(c.dist, *c.params);
        }
        return {{"nodes", c.nodes}, {"dist", dist}, {"keys", c.key_count()}, {"seed", std::to_string(c.seed)}};
    }

    /// {op, trials, dist, seed, origin}; origin is "random" or a node id.
    inline ExperimentConfig experiment_config_from_json(const Json &j)
    {
        reject_unknown(j, {"op", "trials", "dist", "seed", "origin"});
        ExperimentConfig c;
        if (j.contains("op"))
        {
            if (!j.at("op").is_string())
            {
                throw std::invalid_argument("field 'op' must be a string");
            }
            c.op = parse_op(j.at("op").get<std::string>());
        }
        if (j.contains("trials"))
        {
            c.trials = json_u64(j.at("trials"), "trials");
        }
        if (c.trials == 0)
        {
            throw std::invalid_argument("trials must be at least 1");
        }
        if (j.contains("dist"))
        {
            read_dist(j.at("dist"), c.dist, c.params);
        }
        if (j.contains("seed"))
        {
            c.seed = json_u64(j.at("seed"), "seed");
        }
        if (j.contains("origin"))
        {
            const Json &o = j.at("origin");
            if (o.is_string() && o.get<std::string>() == "random")
            {
                c.origin = OriginPolicy::RandomNode;
            }
            else
            {
                c.origin = OriginPolicy::Fixed;
                c.fixed_origin = json_u64(o, "origin");
            }
        }
        return c;
    }

    inline Json to_json(const ExperimentConfig &c)
    {
        Json dist = {{"kind", std::string(to_string(c.dist))}};
        if (c.params)
        {
            dist["params"] = params_to_json(c.dist, *c.params);
        }
        Json j = {{"op", op_name(c.op)}, {"trials", c.trials}, {"dist", dist}};
        j["origin"] = c.origin == OriginPolicy::Fixed ? Json(c.fixed_origin) : Json("random");
        if (c.seed)
        {
            j["seed"] = std::to_string(*c.seed);
        }
        return j;
    }

    inline Json to_json(const SystemStatus &s)
    {
        Json j = {{"node_count", s.node_count},
                  {"key_count", s.key_count},
                  {"marked_count", s.marked_count},
                  {"message_counter", s.message_counter}};
        j["key_range"] = s.key_range ? Json::array({s.key_range->lo, s.key_range->hi}) : Json(nullptr);
        return j;
    }

    inline Json to_json(const OpOutcome &o)
    {
        return {{"op", op_name(o.op)},
                {"key", o.key},
                {"origin", o.origin},
                {"outcome", std::string(to_string(o.outcome))},
                {"holder", o.holder},
                {"hops", o.hops},
                {"path", o.path},
                {"log_lines", o.log_lines}};
    }

    inline OpStatus parse_status(const std::string &s)
    {
        for (std::size_t i = 0; i < op_status_names.size(); ++i)
        {
            if (op_status_names[i] == s)
            {
                return static_cast<OpStatus>(i);
            }
        }
        throw std::invalid_argument("unknown outcome '" + s + "'");
    }

    inline Json to_json(const TrialRow &r)
    {
        return {{"trial", r.trial},   {"op", op_name(r.op)}, {"key", r.key},
                {"origin", r.origin}, {"holder", r.holder},  {"hops", r.hops},
                {"outcome", std::string(to_string(r.outcome))}};
    }

    /// Wall time is measured, not simulated; exports leave it out so that
    /// identical runs give identical bytes.
    inline Json to_json(const ExperimentResult &r, bool with_wall_time = false)
    {
        Json trials = Json::array();
        for (const TrialRow &t : r.trials)
        {
            trials.push_back(to_json(t));
        }
        Json messages = Json::object();
        for (std::size_t i = 0; i < message_type_count; ++i)
        {
            messages[std::string(message_type_names[i])] = r.messages[i];
        }
        Json j = {{"op", op_name(r.op)},
                  {"dist", std::string(to_string(r.dist))},
                  {"trials", trials},
                  {"mean_hops", r.mean_hops},
                  {"max_hops", r.max_hops},
                  {"p50_hops", r.p50_hops},
                  {"p90_hops", r.p90_hops},
                  {"p99_hops", r.p99_hops},
                  {"messages", messages},
                  {"histogram", r.histogram}};
        if (with_wall_time)
        {
            j["wall_time_ms"] = r.wall_time_ms;
        }
        return j;
    }

    inline ExperimentResult experiment_result_from_json(const Json &j)
    {
        ExperimentResult r;
        r.op = parse_op(j.at("op").get<std::string>());
        r.dist = parse_kind(j.at("dist").get<std::string>());
        for (const Json &t : j.at("trials"))
        {
            r.trials.push_back({t.at("trial").get<std::uint64_t>(), parse_op(t.at("op").get<std::string>()),
                                t.at("key").get<Key>(), t.at("origin").get<NodeId>(), t.at("holder").get<NodeId>(),
                                t.at("hops").get<std::uint32_t>(), parse_status(t.at("outcome").get<std::string>())});
        }
        r.mean_hops = j.at("mean_hops").get<double>();
        r.max_hops = j.at("max_hops").get<std::uint32_t>();
        r.p50_hops = j.at("p50_hops").get<std::uint32_t>();
        r.p90_hops = j.at("p90_hops").get<std::uint32_t>();
        r.p99_hops = j.at("p99_hops").get<std::uint32_t>();
        for (std::size_t i = 0; i < message_type_count; ++i)
        {
            r.messages[i] = j.at("messages").at(std::string(message_type_names[i])).get<std::uint64_t>();
        }
        r.histogram = j.at("histogram").get<std::vector<std::uint64_t>>();
        if (j.contains("wall_time_ms"))
        {
            r.wall_time_ms = j.at("wall_time_ms").get<double>();
        }
        return r;
    }

    inline Json to_json(const LoadReport &r)
    {
        Json rows = Json::array();
        for (const LoadRow &row : r.rows)
        {
            rows.push_back({{"node_id", row.node_id}, {"level", row.level}, {"load", row.load}, {"marked", row.marked}});
        }
        return {{"rows", rows}, {"min", r.min}, {"max", r.max}, {"mean", r.mean}, {"stddev", r.stddev}};
    }

    /// Same signature as the experiment overload; load reports carry no timing.
    inline Json to_json(const LoadReport &r, bool) { return to_json(r); }

    inline LoadReport load_report_from_json(const Json &j)
    {
        LoadReport r;
        for (const Json &row : j.at("rows"))
        {
            r.rows.push_back({row.at("node_id").get<NodeId>(), row.at("level").get<Level>(), row.at("load").get<std::uint64_t>(),
                              row.at("marked").get<bool>()});
        }
        r.min = j.at("min").get<std::uint64_t>();
        r.max = j.at("max").get<std::uint64_t>();
        r.mean = j.at("mean").get<double>();
        r.stddev = j.at("stddev").get<double>();
        return r;
    }

    inline Json to_json(const SystemEvent &e)
    {
        Json j = {{"kind", std::string(to_string(e.kind))}, {"text", e.text}};
        if (e.kind == SystemEvent::Kind::Progress || e.kind == SystemEvent::Kind::Reorg)
        {
            j["done"] = e.done;
            j["total"] = e.total;
        }
        return j;
    }

    inline constexpr const char *experiment_csv_header = "trial,op,key,origin,holder,hops,outcome";
    inline constexpr const char *load_csv_header = "node_id,level,load,marked";

    inline std::string to_csv(const ExperimentResult &r)
    {
        std::ostringstream out;
        out << experiment_csv_header << '\n';
        for (const TrialRow &t : r.trials)
        {
            out << t.trial << ',' << op_name(t.op) << ',' << t.key << ',' << t.origin << ',' << t.holder << ',' << t.hops
                << ',' << to_string(t.outcome) << '\n';
        }
        return out.str();
    }

    inline std::string to_csv(const LoadReport &r)
    {
        std::ostringstream out;
        out << load_csv_header << '\n';
        for (const LoadRow &row : r.rows)
        {
            out << row.node_id << ',' << row.level << ',' << row.load << ',' << (row.marked ? 1 : 0) << '\n';
        }
        return out.str();
    }

    using Report = std::variant<ExperimentResult, LoadReport>;

    /// "csv" or "json". JSON ends with a newline like the CSV does.
    inline std::string export_report(const Report &report, const std::string &format)
    {
        if (format == "csv")
        {
            return std::visit([](const auto &r) { return to_csv(r); }, report);
        }
        if (format == "json")
        {
            return std::visit([](const auto &r) { return to_json(r).dump(2); }, report) + "\n";
        }
        throw std::invalid_argument("unknown export format '" + format + "' (use csv or json)");
    }
} // namespace nbdt
