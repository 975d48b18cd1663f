#pragma once

// The system driver: bootstrap, sequential joins, key loading, single
// operations, batched experiments and churn runs over one simulated overlay.

#include "nbdt/kernel.hpp"
#include "nbdt/keyspace.hpp"
#include "nbdt/network.hpp"
#include "nbdt/protocol.hpp"
#include "nbdt/random.hpp"
#include "nbdt/workloads.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace nbdt
{
    struct SystemConfig
    {
        unsigned key_bits = 20;
        RangePolicy range_policy;
        double reorg_threshold = 0.05;
        NodeId introducer = 1;
        FaultModel faults;
        /// Mirror of the operation log; empty for none.
        std::string log_path;
        /// Delivery budget of one kernel run.
        std::uint64_t run_budget = 1'000'000;
    };

    struct SystemEvent
    {
        enum class Kind : std::uint8_t
        {
            Progress,
            Log,
            Reorg,
            Error,
        };

        Kind kind = Kind::Progress;
        std::string text;
        std::uint64_t done = 0;
        std::uint64_t total = 0;
    };

    inline std::string_view to_string(SystemEvent::Kind k) noexcept
    {
        switch (k)
        {
        case SystemEvent::Kind::Progress:
            return "progress";
        case SystemEvent::Kind::Log:
            return "log";
        case SystemEvent::Kind::Reorg:
            return "reorg";
        case SystemEvent::Kind::Error:
            return "error";
        }
        return "?";
    }

    struct InitConfig
    {
        NodeId nodes = 3;
        DistributionKind dist = DistributionKind::Uniform;
        std::optional<DistributionParams> params;
        /// Keys loaded after the joins; defaults to ceil(5.7 * nodes).
        std::optional<std::uint64_t> keys;
        std::uint64_t seed = 0;

        std::uint64_t key_count() const
        {
            return keys ? *keys : static_cast<std::uint64_t>(std::ceil(5.7 * static_cast<double>(nodes)));
        }
    };

    struct SystemStatus
    {
        NodeId node_count = 0;
        std::uint64_t key_count = 0;
        /// Absent while the overlay is empty.
        std::optional<KeyRange> key_range;
        NodeId marked_count = 0;
        std::uint64_t message_counter = 0;
    };

    struct OpOutcome
    {
        MessageType op = MessageType::Search;
        Key key = 0;
        NodeId origin = 0;
        OpStatus outcome = OpStatus::NotFound;
        NodeId holder = 0;
        std::uint32_t hops = 0;
        std::vector<NodeId> path;
        std::vector<std::string> log_lines;
    };

    struct JoinStats
    {
        NodeId id = 0;
        /// Messages sent for this join, the client's request included.
        std::uint64_t messages = 0;
        std::array<std::uint64_t, message_type_count> per_type{};
    };

    /// Raised when auto-extension would pass the node cap. The overlay keeps
    /// the peers added before the refusal.
    class ExtensionRefused : public std::runtime_error
    {
    public:
        ExtensionRefused(Key key, NodeId added, NodeId max_nodes)
            : std::runtime_error("key " + std::to_string(key) + " needs more than max_nodes=" + std::to_string(max_nodes) +
                                 " peers; added " + std::to_string(added) + " before refusing"),
              added_(added)
        {
        }

        NodeId added() const noexcept { return added_; }

    private:
        NodeId added_;
    };

    enum class OriginPolicy : std::uint8_t
    {
        RandomNode,
        Fixed,
    };

    struct ExperimentConfig
    {
        MessageType op = MessageType::Search;
        std::uint64_t trials = 500;
        DistributionKind dist = DistributionKind::Uniform;
        std::optional<DistributionParams> params;
        /// Key stream seed; derived from the system seed when absent.
        std::optional<std::uint64_t> seed;
        OriginPolicy origin = OriginPolicy::RandomNode;
        NodeId fixed_origin = 1;
    };

    struct TrialRow
    {
        std::uint64_t trial = 0;
        MessageType op = MessageType::Search;
        Key key = 0;
        NodeId origin = 0;
        NodeId holder = 0;
        std::uint32_t hops = 0;
        OpStatus outcome = OpStatus::NotFound;

        friend bool operator==(const TrialRow &, const TrialRow &) = default;
    };

    struct ExperimentResult
    {
        MessageType op = MessageType::Search;
        DistributionKind dist = DistributionKind::Uniform;
        std::vector<TrialRow> trials;
        double mean_hops = 0.0;
        std::uint32_t max_hops = 0;
        std::uint32_t p50_hops = 0;
        std::uint32_t p90_hops = 0;
        std::uint32_t p99_hops = 0;
        std::array<std::uint64_t, message_type_count> messages{};
        /// histogram[h] = trials that took h hops.
        std::vector<std::uint64_t> histogram;
        double wall_time_ms = 0.0;
    };

    struct LoadRow
    {
        NodeId node_id = 0;
        Level level = 0;
        std::uint64_t load = 0;
        bool marked = false;

        friend bool operator==(const LoadRow &, const LoadRow &) = default;
    };

    struct LoadReport
    {
        std::vector<LoadRow> rows;
        std::uint64_t min = 0;
        std::uint64_t max = 0;
        double mean = 0.0;
        double stddev = 0.0;

        std::uint64_t total() const noexcept
        {
            std::uint64_t s = 0;
            for (const LoadRow &r : rows)
            {
                s += r.load;
            }
            return s;
        }

        std::uint64_t zero_load_nodes() const noexcept
        {
            return static_cast<std::uint64_t>(std::count_if(rows.begin(), rows.end(), [](const LoadRow &r) { return r.load == 0; }));
        }
    };

    /// Nearest-rank percentile of a sorted sample.
    inline std::uint32_t percentile(const std::vector<std::uint32_t> &sorted, double p)
    {
        if (sorted.empty())
        {
            return 0;
        }
        const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(sorted.size())));
        return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
    }

    inline LoadReport summarize_load(std::vector<LoadRow> rows)
    {
        LoadReport r;
        r.rows = std::move(rows);
        if (r.rows.empty())
        {
            return r;
        }
        r.min = UINT64_MAX;
        double sum = 0.0;
        for (const LoadRow &row : r.rows)
        {
            r.min = std::min(r.min, row.load);
            r.max = std::max(r.max, row.load);
            sum += static_cast<double>(row.load);
        }
        const double n = static_cast<double>(r.rows.size());
        r.mean = sum / n;
        double sq = 0.0;
        for (const LoadRow &row : r.rows)
        {
            const double d = static_cast<double>(row.load) - r.mean;
            sq += d * d;
        }
        r.stddev = std::sqrt(sq / n);
        return r;
    }

    /// One simulated overlay with its kernel. Single owner: callers must not
    /// use one System from two threads at once.
    class System
    {
    public:
        using EventSink = std::function<void(const SystemEvent &)>;

        explicit System(SystemConfig cfg = {}) : cfg_(std::move(cfg)), net_(cfg_.faults)
        {
            if (!(cfg_.reorg_threshold > 0.0 && cfg_.reorg_threshold <= 1.0))
            {
                throw std::invalid_argument("reorg threshold must be in (0, 1]");
            }
            bucket_ = bucket_width_for_bits(cfg_.key_bits);
            if (!cfg_.log_path.empty())
            {
                net_.set_log_file(cfg_.log_path);
            }
            net_.set_log_sink([this](const std::string &line) { emit({SystemEvent::Kind::Log, line, 0, 0}); });
        }

        System(const System &) = delete;
        System &operator=(const System &) = delete;

        void set_event_sink(EventSink sink) { sink_ = std::move(sink); }

        const SystemConfig &config() const noexcept { return cfg_; }
        Key bucket() const noexcept { return bucket_; }
        NodeId node_count() const noexcept { return static_cast<NodeId>(nodes_.size()); }
        KeySpace keyspace() const noexcept { return {cfg_.key_bits, bucket_, node_count()}; }
        const Network &network() const noexcept { return net_; }
        const std::vector<std::string> &log() const noexcept { return net_.log(); }
        std::uint64_t trace_hash() const noexcept { return trace_.value(); }
        std::uint64_t seed() const noexcept { return seed_; }
        const std::vector<std::string> &errors() const noexcept { return errors_; }

        const NodeState &node(NodeId id) const
        {
            if (id < 1 || id > node_count())
            {
                throw std::out_of_range("unknown node " + std::to_string(id));
            }
            return nodes_[id - 1];
        }

        /// Clears nodes, kernel buffer, counters and log; keeps the config.
        void reset()
        {
            nodes_.clear();
            net_.reset();
            trace_ = TraceHash{};
            per_type_ = {};
            per_type_sent_ = {};
            completed_.clear();
            errors_.clear();
            rng_ = Rng(0);
            seed_ = 0;
            op_token_ = 0;
            experiments_run_ = 0;
            reorg_flagged_ = false;
        }

        /// Three introducers, sequential joins up to cfg.nodes, then the
        /// initial keys inserted from seeded random origins.
        void init(const InitConfig &init)
        {
            if (init.nodes < introducer_count)
            {
                throw std::invalid_argument("an overlay needs at least " + std::to_string(introducer_count) + " nodes");
            }
            if (init.nodes > cfg_.range_policy.max_nodes)
            {
                throw std::invalid_argument("nodes exceeds max_nodes=" + std::to_string(cfg_.range_policy.max_nodes));
            }
            const std::uint64_t keys = init.key_count();
            const KeySpace ks{cfg_.key_bits, bucket_, init.nodes};
            if (keys > ks.capacity())
            {
                throw std::invalid_argument(std::to_string(keys) + " keys exceed the capacity of " +
                                            std::to_string(ks.capacity()) + " for " + std::to_string(init.nodes) + " nodes");
            }
            DistributionSpec spec{init.dist, resolve_params(init.dist, init.params, ks.key_range()),
                                  derive_seed(init.seed, 1), ks.key_range()};
            validate(spec);

            reset();
            seed_ = init.seed;
            rng_ = Rng(derive_seed(init.seed, 0));
            for (NodeId id = 1; id <= introducer_count; ++id)
            {
                nodes_.push_back(make_live_node(id, introducer_count, bucket_));
            }
            const NodeId joins = init.nodes - introducer_count;
            const NodeId step = std::max<NodeId>(1, init.nodes / 100);
            for (NodeId j = 1; j <= joins; ++j)
            {
                join_one();
                if (j % step == 0 || j == joins)
                {
                    emit({SystemEvent::Kind::Progress, "join", j, joins});
                }
            }

            const std::vector<Key> loaded = gen_keys(spec, keys);
            const std::uint64_t kstep = std::max<std::uint64_t>(1, keys / 100);
            for (std::size_t i = 0; i < loaded.size(); ++i)
            {
                do_op(MessageType::Insert, loaded[i], random_origin());
                if ((i + 1) % kstep == 0 || i + 1 == loaded.size())
                {
                    emit({SystemEvent::Kind::Progress, "load", i + 1, keys});
                }
            }
        }

        /// Admits one peer: the client asks the introducer, the request is
        /// relayed to the last node, and the new peer is live once its
        /// JOIN_REPLY is delivered. The next join is not admitted before that.
        JoinStats join_one()
        {
            if (nodes_.size() < introducer_count)
            {
                throw std::logic_error("join before the introducers exist");
            }
            if (node_count() >= cfg_.range_policy.max_nodes)
            {
                throw std::invalid_argument("max_nodes=" + std::to_string(cfg_.range_policy.max_nodes) + " reached");
            }
            const NodeId n = node_count();
            const NodeId joiner = n + 1;
            NodeState fresh;
            fresh.id = joiner;
            nodes_.push_back(std::move(fresh));

            const std::uint64_t before = net_.counter();
            const auto types_before = per_type_sent_;
            send({client_id, cfg_.introducer, MessageType::Join, JoinRequest{JoinRequest::Stage::AtIntroducer, cfg_.introducer, n}});
            run();
            if (!nodes_.back().live())
            {
                nodes_.pop_back();
                throw std::runtime_error("join of node " + std::to_string(joiner) + " did not complete");
            }
            JoinStats stats{joiner, net_.counter() - before, {}};
            for (std::size_t i = 0; i < message_type_count; ++i)
            {
                stats.per_type[i] = per_type_sent_[i] - types_before[i];
            }
            return stats;
        }

        /// Injects one client operation at `origin` and runs to quiescence.
        OpOutcome do_op(MessageType op, Key key, NodeId origin)
        {
            if (!is_key_op(op))
            {
                throw std::invalid_argument("do_op needs SEARCH, INSERT or DELETE");
            }
            if (origin < 1 || origin > node_count() || !nodes_[origin - 1].live())
            {
                throw std::invalid_argument("unknown origin node " + std::to_string(origin));
            }
            const RangeDecision d = out_of_range_policy(key, keyspace(), cfg_.range_policy);
            if (d.action == RangeAction::Extend || d.action == RangeAction::Refuse)
            {
                for (NodeId i = 0; i < d.joins_allowed; ++i)
                {
                    join_one();
                }
                if (d.action == RangeAction::Refuse)
                {
                    throw ExtensionRefused(key, d.joins_allowed, cfg_.range_policy.max_nodes);
                }
            }

            const std::uint64_t token = ++op_token_;
            const std::size_t mark = net_.log().size();
            send({client_id, origin, op, KeyPayload{key, origin, token, {}, 0, node_count()}});
            run();

            OpOutcome out;
            out.op = op;
            out.key = key;
            out.origin = origin;
            out.log_lines.assign(net_.log().begin() + static_cast<std::ptrdiff_t>(mark), net_.log().end());
            out.path.push_back(origin);
            for (std::size_t i = 1; i < out.log_lines.size(); ++i)
            {
                if (const auto rec = parse_log_record(out.log_lines[i]))
                {
                    out.path.push_back(rec->dst);
                }
            }
            const auto done = completed_.find(token);
            if (done == completed_.end())
            {
                throw std::runtime_error("operation on key " + std::to_string(key) + " produced no reply" +
                                         (errors_.empty() ? std::string() : ": " + errors_.back()));
            }
            out.outcome = done->second.status;
            out.holder = done->second.holder;
            out.hops = done->second.hops;
            completed_.erase(done);
            check_reorg();
            return out;
        }

        /// Sends a raw message and runs to quiescence. Diagnostic entry point
        /// for scripted scenarios; the message need not come from a client.
        RunReport inject(Message msg)
        {
            send(std::move(msg));
            return run();
        }

        ExperimentResult run_experiment(const ExperimentConfig &cfg)
        {
            if (cfg.trials == 0)
            {
                throw std::invalid_argument("trials must be at least 1");
            }
            if (!is_key_op(cfg.op))
            {
                throw std::invalid_argument("experiment op must be search, insert or delete");
            }
            if (nodes_.empty())
            {
                throw std::logic_error("experiment on an uninitialized system");
            }
            if (cfg.origin == OriginPolicy::Fixed && (cfg.fixed_origin < 1 || cfg.fixed_origin > node_count()))
            {
                throw std::invalid_argument("unknown origin node " + std::to_string(cfg.fixed_origin));
            }
            const auto started = std::chrono::steady_clock::now();
            const KeyRange range = keyspace().key_range();
            const std::uint64_t stream = 100 + experiments_run_++;
            KeySampler sampler({cfg.dist, resolve_params(cfg.dist, cfg.params, range),
                                cfg.seed.value_or(derive_seed(seed_, stream)), range});
            Rng key_rng(sampler.spec().seed);
            const auto types_before = per_type_sent_;

            ExperimentResult res;
            res.op = cfg.op;
            res.dist = cfg.dist;
            std::vector<std::uint32_t> hops;
            for (std::uint64_t t = 0; t < cfg.trials; ++t)
            {
                const Key key = sampler.draw(key_rng);
                const NodeId origin = cfg.origin == OriginPolicy::Fixed ? cfg.fixed_origin : random_origin();
                const OpOutcome o = do_op(cfg.op, key, origin);
                res.trials.push_back({t + 1, cfg.op, key, origin, o.holder, o.hops, o.outcome});
                hops.push_back(o.hops);
            }
            for (std::size_t i = 0; i < message_type_count; ++i)
            {
                res.messages[i] = per_type_sent_[i] - types_before[i];
            }
            std::sort(hops.begin(), hops.end());
            double sum = 0.0;
            for (std::uint32_t h : hops)
            {
                sum += h;
            }
            res.mean_hops = sum / static_cast<double>(hops.size());
            res.max_hops = hops.back();
            res.p50_hops = percentile(hops, 50);
            res.p90_hops = percentile(hops, 90);
            res.p99_hops = percentile(hops, 99);
            res.histogram.assign(res.max_hops + 1, 0);
            for (std::uint32_t h : hops)
            {
                ++res.histogram[h];
            }
            res.wall_time_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
            return res;
        }

        /// `updates` presence-tested updates: a drawn key is deleted when
        /// stored and inserted otherwise. Keys are drawn with replacement.
        LoadReport churn_run(std::uint64_t updates, DistributionKind dist,
                             std::optional<DistributionParams> params = std::nullopt,
                             std::optional<std::uint64_t> seed = std::nullopt)
        {
            if (nodes_.empty())
            {
                throw std::logic_error("churn on an uninitialized system");
            }
            if (updates == 0)
            {
                return load_report();
            }
            const KeyRange range = keyspace().key_range();
            const std::uint64_t stream = 100 + experiments_run_++;
            KeySampler sampler({dist, resolve_params(dist, params, range),
                                seed.value_or(derive_seed(seed_, stream)), range});
            Rng key_rng(sampler.spec().seed);
            std::vector<Key> keys;
            keys.reserve(updates);
            for (std::uint64_t i = 0; i < updates; ++i)
            {
                keys.push_back(sampler.draw(key_rng));
            }
            return churn_keys(keys);
        }

        /// Churn over a given key sequence.
        LoadReport churn_keys(const std::vector<Key> &keys)
        {
            for (Key k : keys)
            {
                const NodeId holder = responsible_node(k, bucket_);
                const bool present = holder <= node_count() && nodes_[holder - 1].store.contains(k);
                do_op(present ? MessageType::Delete : MessageType::Insert, k, random_origin());
            }
            return load_report();
        }

        SystemStatus status() const
        {
            SystemStatus s;
            s.node_count = node_count();
            for (const NodeState &n : nodes_)
            {
                s.key_count += n.store.size();
                s.marked_count += n.marked_deleted ? 1 : 0;
            }
            if (!nodes_.empty())
            {
                s.key_range = keyspace().key_range();
            }
            s.message_counter = net_.counter();
            return s;
        }

        LoadReport load_report() const
        {
            std::vector<LoadRow> rows;
            rows.reserve(nodes_.size());
            for (const NodeState &n : nodes_)
            {
                rows.push_back({n.id, level_of(n.id), n.store.size(), n.marked_deleted});
            }
            return summarize_load(std::move(rows));
        }

        /// Cumulative per-type send counts since the last reset.
        const std::array<std::uint64_t, message_type_count> &messages_sent() const noexcept { return per_type_sent_; }

    private:
        void emit(SystemEvent e)
        {
            if (sink_)
            {
                sink_(e);
            }
        }

        void send(Message m)
        {
            ++per_type_sent_[static_cast<std::size_t>(m.type)];
            net_.send_message(std::move(m));
        }

        NodeId random_origin() { return 1 + rng_.below(node_count()); }

        RunReport run()
        {
            const ProtocolConfig pcfg{bucket_};
            RunReport rep = run_until_quiescent(
                net_,
                [&](const Message &m) {
                    trace_.add_record(m);
                    std::vector<Message> out;
                    if (m.dst < 1 || m.dst > node_count())
                    {
                        error("message for unknown node " + std::to_string(m.dst));
                        return out;
                    }
                    HandleResult r = handle(nodes_[m.dst - 1], m, pcfg);
                    for (std::string &e : r.errors)
                    {
                        error(std::move(e));
                    }
                    if (r.completed)
                    {
                        completed_[r.completed->op_token] = *r.completed;
                    }
                    for (const Message &o : r.out)
                    {
                        ++per_type_sent_[static_cast<std::size_t>(o.type)];
                    }
                    return std::move(r.out);
                },
                cfg_.run_budget);
            for (std::size_t i = 0; i < message_type_count; ++i)
            {
                per_type_[i] += rep.per_type[i];
            }
            net_.flush_log();
            if (rep.livelock)
            {
                error("run budget exhausted; oldest undelivered: " + canonical_text(*rep.livelock));
            }
            return rep;
        }

        void error(std::string text)
        {
            emit({SystemEvent::Kind::Error, text, 0, 0});
            errors_.push_back(std::move(text));
        }

        void check_reorg()
        {
            const auto adv = reorg_watch(nodes_, cfg_.reorg_threshold);
            if (adv && !reorg_flagged_)
            {
                emit({SystemEvent::Kind::Reorg,
                      std::to_string(adv->marked) + " of " + std::to_string(adv->nodes) +
                          " peers are marked deleted; re-organization advised",
                      adv->marked, adv->nodes});
            }
            reorg_flagged_ = adv.has_value();
        }

        SystemConfig cfg_;
        Key bucket_ = 14;
        Network net_;
        std::vector<NodeState> nodes_;
        Rng rng_{0};
        std::uint64_t seed_ = 0;
        TraceHash trace_;
        std::array<std::uint64_t, message_type_count> per_type_{};
        std::array<std::uint64_t, message_type_count> per_type_sent_{};
        std::map<std::uint64_t, OpReply> completed_;
        std::vector<std::string> errors_;
        EventSink sink_;
        std::uint64_t op_token_ = 0;
        std::uint64_t experiments_run_ = 0;
        bool reorg_flagged_ = false;
    };
} // namespace nbdt
