// nbdt: scripted runs of the overlay simulator and the control service.
//
// Each invocation builds its system from scratch. With --session FILE the
// init arguments and every later command are kept in FILE and replayed
// before the new command; replay is deterministic, so chained invocations
// behave like one long-lived system. Without a session the system is the
// three-introducer bootstrap with no keys.

#include "nbdt/report.hpp"
#include "nbdt/service.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

using namespace nbdt;

namespace
{
    struct UserError : std::runtime_error
    {
        using std::runtime_error::runtime_error;
    };

    Json read_json_file(const std::string &path)
    {
        std::ifstream in(path);
        if (!in)
        {
            throw UserError("cannot read " + path);
        }
        try
        {
            return Json::parse(in);
        }
        catch (const Json::parse_error &e)
        {
            throw UserError(path + ": " + e.what());
        }
    }

    void write_file(const std::string &path, const std::string &text)
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out || !(out << text))
        {
            throw UserError("cannot write " + path);
        }
    }

    struct Session
    {
        std::string path;
        Json init;
        Json history = Json::array();
        std::optional<Report> last;

        static Session load(const std::string &path)
        {
            Session s;
            s.path = path;
            if (path.empty())
            {
                return s;
            }
            std::ifstream probe(path);
            if (!probe)
            {
                return s;
            }
            const Json j = read_json_file(path);
            if (j.contains("init"))
            {
                s.init = j.at("init");
            }
            if (j.contains("history"))
            {
                s.history = j.at("history");
            }
            return s;
        }

        void save() const
        {
            if (path.empty())
            {
                return;
            }
            Json j = {{"history", history}};
            if (!init.is_null())
            {
                j["init"] = init;
            }
            write_file(path, j.dump(2) + "\n");
        }
    };

    Json op_command(MessageType op, Key key, NodeId origin)
    {
        return {{"cmd", "op"}, {"op", op_name(op)}, {"key", key}, {"origin", origin}};
    }

    Json churn_command(std::uint64_t updates, const std::string &dist, std::optional<std::uint64_t> seed)
    {
        Json j = {{"cmd", "churn"}, {"updates", updates}, {"dist", dist}};
        if (seed)
        {
            j["seed"] = std::to_string(*seed);
        }
        return j;
    }

    /// Applies one recorded command; returns the report it produced, if any.
    std::optional<Report> apply(System &sys, const Json &cmd)
    {
        const std::string name = cmd.at("cmd").get<std::string>();
        if (name == "op")
        {
            sys.do_op(parse_op(cmd.at("op").get<std::string>()), json_u64(cmd.at("key"), "key"), json_u64(cmd.at("origin"), "origin"));
            return std::nullopt;
        }
        if (name == "experiment")
        {
            return sys.run_experiment(experiment_config_from_json(cmd.at("config")));
        }
        if (name == "churn")
        {
            std::optional<std::uint64_t> seed;
            if (cmd.contains("seed"))
            {
                seed = json_u64(cmd.at("seed"), "seed");
            }
            return sys.churn_run(json_u64(cmd.at("updates"), "updates"), parse_kind(cmd.at("dist").get<std::string>()),
                                 std::nullopt, seed);
        }
        throw std::runtime_error("session holds unknown command '" + name + "'");
    }

    void rebuild(System &sys, Session &s)
    {
        if (s.init.is_null())
        {
            InitConfig minimal;
            minimal.keys = 0;
            sys.init(minimal);
        }
        else
        {
            sys.init(init_config_from_json(s.init));
        }
        for (const Json &cmd : s.history)
        {
            if (auto r = apply(sys, cmd))
            {
                s.last = std::move(r);
            }
        }
    }

    std::string status_line(const SystemStatus &st)
    {
        std::string range = st.key_range ? "[" + std::to_string(st.key_range->lo) + ", " + std::to_string(st.key_range->hi) + "]" : "[]";
        return std::to_string(st.node_count) + " nodes, " + std::to_string(st.key_count) + " keys, key range " + range + ", " +
               std::to_string(st.marked_count) + " marked, " + std::to_string(st.message_counter) + " messages";
    }

    int run(int argc, char **argv)
    {
        CLI::App app{"NBDT overlay simulator"};
        app.require_subcommand(1);
        std::string session_path;
        if (const char *env = std::getenv("NBDT_SESSION"))
        {
            session_path = env;
        }
        std::string log_path;
        app.add_option("--session", session_path, "session file to replay and extend (or NBDT_SESSION)");
        app.add_option("--log", log_path, "mirror the operation log to this file");

        auto *init = app.add_subcommand("init", "bootstrap and load an overlay");
        std::optional<NodeId> nodes;
        std::optional<std::string> init_dist;
        std::optional<std::uint64_t> keys;
        std::optional<std::uint64_t> seed;
        std::string config_path;
        init->add_option("--nodes", nodes, "number of peers (>= 3)");
        init->add_option("--dist", init_dist, "key distribution: uniform, normal, beta, powlaw");
        init->add_option("--keys", keys, "keys to load (default ceil(5.7 * nodes))");
        init->add_option("--seed", seed, "seed");
        init->add_option("--config", config_path, "JSON file with {nodes, dist, keys, seed}");

        auto *op = app.add_subcommand("op", "one search, insert or delete");
        std::string op_kind;
        Key key = 0;
        NodeId origin = 1;
        op->add_option("kind", op_kind, "search | insert | delete")->required()->check(CLI::IsMember({"search", "insert", "delete"}));
        op->add_option("--key", key, "key")->required();
        op->add_option("--origin", origin, "node the operation starts from");

        auto *exp = app.add_subcommand("experiment", "a batch of operations; prints per-trial CSV");
        std::string exp_op = "search";
        std::uint64_t trials = 500;
        std::string exp_dist = "uniform";
        std::optional<std::uint64_t> exp_seed;
        std::optional<NodeId> exp_origin;
        std::string exp_format = "csv";
        exp->add_option("--op", exp_op, "search | insert | delete")->check(CLI::IsMember({"search", "insert", "delete"}));
        exp->add_option("--trials", trials, "operations to run")->check(CLI::PositiveNumber);
        exp->add_option("--dist", exp_dist, "key distribution");
        exp->add_option("--seed", exp_seed, "key stream seed");
        exp->add_option("--origin", exp_origin, "fixed origin node (default: random)");
        exp->add_option("--format", exp_format, "csv | json")->check(CLI::IsMember({"csv", "json"}));

        auto *churn = app.add_subcommand("churn", "insert-or-delete updates; prints the load CSV");
        std::uint64_t updates = 2500;
        std::string churn_dist = "uniform";
        std::optional<std::uint64_t> churn_seed;
        churn->add_option("--updates", updates, "updates to run");
        churn->add_option("--dist", churn_dist, "key distribution");
        churn->add_option("--seed", churn_seed, "key stream seed");

        auto *status = app.add_subcommand("status", "print the status line");

        auto *exp_out = app.add_subcommand("export", "write the last report");
        std::string format = "csv";
        std::string out_path;
        std::string which = "last";
        exp_out->add_option("--format", format, "csv | json")->required();
        exp_out->add_option("--out", out_path, "output file (default stdout)");
        exp_out->add_option("--report", which, "last | load")->check(CLI::IsMember({"last", "load"}));

        auto *serve = app.add_subcommand("serve", "run the HTTP control service");
        int port = port_from_env();
        std::string host = "127.0.0.1";
        serve->add_option("--port", port, "port (default NBDT_PORT or 8080)");
        serve->add_option("--host", host, "bind address");

        try
        {
            app.parse(argc, argv);
        }
        catch (const CLI::CallForHelp &e)
        {
            return app.exit(e);
        }
        catch (const CLI::ParseError &e)
        {
            app.exit(e);
            std::cerr << app.help();
            return 1;
        }

        SystemConfig cfg;
        cfg.log_path = log_path;

        if (*serve)
        {
            Service service(cfg);
            std::cerr << "listening on http://" << host << ":" << port << "\n";
            if (!service.listen(host, port))
            {
                throw UserError("cannot listen on " + host + ":" + std::to_string(port));
            }
            return 0;
        }

        Session session = Session::load(session_path);
        System sys(cfg);

        if (*init)
        {
            Json j = config_path.empty() ? Json::object() : read_json_file(config_path);
            if (!j.is_object())
            {
                throw UserError("config must be a JSON object");
            }
            if (nodes)
            {
                j["nodes"] = *nodes;
            }
            if (init_dist)
            {
                j["dist"] = *init_dist;
            }
            if (keys)
            {
                j["keys"] = *keys;
            }
            if (seed)
            {
                j["seed"] = std::to_string(*seed);
            }
            if (!j.contains("nodes"))
            {
                throw UserError("init needs --nodes or a config with nodes");
            }
            const InitConfig ic = init_config_from_json(j);
            sys.init(ic);
            session.init = to_json(ic);
            session.history = Json::array();
            session.save();
            std::cout << status_line(sys.status()) << "\n";
            return 0;
        }

        rebuild(sys, session);

        if (*status)
        {
            std::cout << status_line(sys.status()) << "\n";
            return 0;
        }
        if (*op)
        {
            const MessageType t = parse_op(op_kind);
            const OpOutcome o = sys.do_op(t, key, origin);
            for (const std::string &line : o.log_lines)
            {
                std::cout << line << "\n";
            }
            std::cout << op_kind << " key " << key << " from node " << origin << ": " << to_string(o.outcome) << " at node "
                      << o.holder << ", " << o.hops << " hops\n";
            session.history.push_back(op_command(t, key, origin));
            session.save();
            return 0;
        }
        if (*exp)
        {
            Json c = {{"op", exp_op}, {"trials", trials}, {"dist", exp_dist}};
            if (exp_seed)
            {
                c["seed"] = std::to_string(*exp_seed);
            }
            if (exp_origin)
            {
                c["origin"] = *exp_origin;
            }
            const ExperimentResult r = sys.run_experiment(experiment_config_from_json(c));
            std::cout << export_report(r, exp_format);
            session.history.push_back({{"cmd", "experiment"}, {"config", c}});
            session.save();
            return 0;
        }
        if (*churn)
        {
            parse_kind(churn_dist);
            const LoadReport r = sys.churn_run(updates, parse_kind(churn_dist), std::nullopt, churn_seed);
            std::cout << export_report(r, "csv");
            session.history.push_back(churn_command(updates, churn_dist, churn_seed));
            session.save();
            return 0;
        }
        if (*exp_out)
        {
            const Report r = (which == "last" && session.last) ? *session.last : Report(sys.load_report());
            const std::string doc = export_report(r, format);
            if (out_path.empty())
            {
                std::cout << doc;
            }
            else
            {
                write_file(out_path, doc);
            }
            return 0;
        }
        return 0;
    }
} // namespace

int main(int argc, char **argv)
{
    try
    {
        return run(argc, argv);
    }
    catch (const UserError &e)
    {
        std::cerr << "nbdt: " << e.what() << "\n";
        return 1;
    }
    catch (const std::invalid_argument &e)
    {
        std::cerr << "nbdt: " << e.what() << "\n";
        return 1;
    }
    catch (const ExtensionRefused &e)
    {
        std::cerr << "nbdt: " << e.what() << "\n";
        return 1;
    }
    catch (const std::exception &e)
    {
        std::cerr << "nbdt: internal error: " << e.what() << "\n";
        return 2;
    }
}
