#pragma once

// HTTP control service over one System: asynchronous init/experiment/churn
// jobs, synchronous operations, exports, and an event stream (SSE and
// polling) carrying progress events and operation log lines.

#include "nbdt/experiments.hpp"
#include "nbdt/report.hpp"

#include <httplib.h>

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <thread>

namespace nbdt
{
    inline constexpr int default_port = 8080;

    /// NBDT_PORT when set and valid, else 8080.
    inline int port_from_env()
    {
        if (const char *p = std::getenv("NBDT_PORT"))
        {
            try
            {
                const int v = std::stoi(p);
                if (v > 0 && v < 65536)
                {
                    return v;
                }
            }
            catch (const std::exception &)
            {
            }
        }
        return default_port;
    }

    /// Ordered event log with blocking reads for stream subscribers. Keeps
    /// the newest `capacity` events; sequence numbers never repeat.
    class EventHub
    {
    public:
        explicit EventHub(std::size_t capacity = 200000) : capacity_(capacity) {}

        void publish(const SystemEvent &e)
        {
            {
                std::lock_guard lock(mu_);
                events_.push_back(to_json(e).dump());
                if (events_.size() > capacity_)
                {
                    events_.pop_front();
                    ++first_seq_;
                }
            }
            cv_.notify_all();
        }

        /// Events with sequence >= since, at most `limit`; returns the next sequence.
        std::uint64_t read(std::uint64_t since, std::size_t limit, std::vector<std::pair<std::uint64_t, std::string>> &out)
        {
            std::lock_guard lock(mu_);
            return read_locked(since, limit, out);
        }

        /// As read, but waits up to `wait` for something new.
        std::uint64_t wait_read(std::uint64_t since, std::size_t limit, std::chrono::milliseconds wait,
                                std::vector<std::pair<std::uint64_t, std::string>> &out)
        {
            std::unique_lock lock(mu_);
            cv_.wait_for(lock, wait, [&] { return closed_ || next_locked() > since; });
            return read_locked(since, limit, out);
        }

        std::uint64_t next() const
        {
            std::lock_guard lock(mu_);
            return next_locked();
        }

        void close()
        {
            {
                std::lock_guard lock(mu_);
                closed_ = true;
            }
            cv_.notify_all();
        }

        bool closed() const
        {
            std::lock_guard lock(mu_);
            return closed_;
        }

    private:
        std::uint64_t next_locked() const { return first_seq_ + events_.size(); }

        std::uint64_t read_locked(std::uint64_t since, std::size_t limit, std::vector<std::pair<std::uint64_t, std::string>> &out)
        {
            std::uint64_t s = std::max(since, first_seq_);
            for (; s < next_locked() && out.size() < limit; ++s)
            {
                out.emplace_back(s, events_[s - first_seq_]);
            }
            return s;
        }

        mutable std::mutex mu_;
        std::condition_variable cv_;
        std::deque<std::string> events_;
        std::uint64_t first_seq_ = 0;
        std::size_t capacity_;
        bool closed_ = false;
    };

    struct Job
    {
        enum class State : std::uint8_t
        {
            Running,
            Done,
            Failed,
        };

        std::uint64_t id = 0;
        std::string kind;
        State state = State::Running;
        std::uint64_t done = 0;
        std::uint64_t total = 0;
        std::string error;
        std::optional<Report> result;
    };

    inline std::string_view to_string(Job::State s) noexcept
    {
        switch (s)
        {
        case Job::State::Running:
            return "running";
        case Job::State::Done:
            return "done";
        case Job::State::Failed:
            return "failed";
        }
        return "?";
    }

    /// One session: one System, one job at a time. While a job runs only
    /// status, job and event reads are answered; the rest get 409.
    class Service
    {
    public:
        explicit Service(SystemConfig cfg = {}) : system_(std::move(cfg))
        {
            system_.set_event_sink([this](const SystemEvent &e) {
                if (e.kind == SystemEvent::Kind::Progress)
                {
                    std::lock_guard lock(jobs_mu_);
                    if (current_)
                    {
                        current_->done = e.done;
                        current_->total = e.total;
                    }
                }
                hub_.publish(e);
            });
            status_ = system_.status();
            mount();
        }

        Service(const Service &) = delete;
        Service &operator=(const Service &) = delete;

        ~Service()
        {
            stop();
            if (worker_.joinable())
            {
                worker_.join();
            }
        }

        httplib::Server &server() noexcept { return server_; }
        EventHub &events() noexcept { return hub_; }

        /// Blocks serving until stop().
        bool listen(const std::string &host, int port) { return server_.listen(host, port); }

        /// Binds an ephemeral port; returns it, or -1.
        int bind_any(const std::string &host) { return server_.bind_to_any_port(host); }
        bool listen_after_bind() { return server_.listen_after_bind(); }

        void stop()
        {
            hub_.close();
            server_.stop();
        }

        /// Waits for the running job, if any.
        void wait_idle()
        {
            std::unique_lock lock(jobs_mu_);
            idle_cv_.wait(lock, [&] { return !busy_; });
        }

    private:
        using Req = httplib::Request;
        using Res = httplib::Response;

        static void send_json(Res &res, int status, const Json &j)
        {
            res.status = status;
            res.set_content(j.dump(), "application/json");
        }

        void set_status(const SystemStatus &s)
        {
            std::lock_guard lock(status_mu_);
            status_ = s;
        }

        static void send_error(Res &res, int status, const std::string &msg) { send_json(res, status, {{"error", msg}}); }

        static Json parse_body(const Req &req)
        {
            if (req.body.empty())
            {
                return Json::object();
            }
            try
            {
                return Json::parse(req.body);
            }
            catch (const Json::parse_error &e)
            {
                throw std::invalid_argument(std::string("invalid JSON: ") + e.what());
            }
        }

        /// Runs `fn` under the system lock, mapping failures to status codes.
        /// Refused with 409 while a job owns the system.
        template <class Fn>
        void guarded(Res &res, Fn &&fn)
        {
            try
            {
                {
                    // Reads would only wait for the job; status is the
                    // endpoint that answers during one.
                    std::lock_guard lock(jobs_mu_);
                    if (busy_)
                    {
                        send_error(res, 409, "a " + current_->kind + " job is running");
                        return;
                    }
                }
                std::lock_guard sys(system_mu_);
                fn();
                set_status(system_.status());
            }
            catch (const ExtensionRefused &e)
            {
                std::lock_guard sys(system_mu_);
                set_status(system_.status());
                send_error(res, 400, e.what());
            }
            catch (const std::invalid_argument &e)
            {
                send_error(res, 400, e.what());
            }
            catch (const Json::exception &e)
            {
                send_error(res, 400, e.what());
            }
            catch (const std::exception &e)
            {
                send_error(res, 500, e.what());
            }
        }

        /// Starts `fn` as the single background job and answers 202.
        template <class Fn>
        void start_job(Res &res, const std::string &kind, Fn fn)
        {
            std::shared_ptr<Job> job;
            {
                std::lock_guard lock(jobs_mu_);
                if (busy_)
                {
                    send_error(res, 409, "a " + current_->kind + " job is running");
                    return;
                }
                job = std::make_shared<Job>();
                job->id = ++last_job_id_;
                job->kind = kind;
                jobs_[job->id] = job;
                current_ = job;
                busy_ = true;
            }
            if (worker_.joinable())
            {
                worker_.join();
            }
            worker_ = std::thread([this, job, fn = std::move(fn)]() mutable {
                try
                {
                    std::lock_guard sys(system_mu_);
                    job->result = fn();
                    set_status(system_.status());
                    std::lock_guard lock(jobs_mu_);
                    job->state = Job::State::Done;
                }
                catch (const std::exception &e)
                {
                    std::lock_guard lock(jobs_mu_);
                    job->state = Job::State::Failed;
                    job->error = e.what();
                }
                {
                    std::lock_guard lock(jobs_mu_);
                    busy_ = false;
                    current_.reset();
                }
                idle_cv_.notify_all();
            });
            send_json(res, 202, {{"job", job->id}, {"kind", kind}, {"events", "/events/stream"}});
        }

        Json job_json(const Job &j) const
        {
            Json out = {{"id", j.id}, {"kind", j.kind}, {"state", std::string(to_string(j.state))}, {"done", j.done}, {"total", j.total}};
            if (!j.error.empty())
            {
                out["error"] = j.error;
            }
            return out;
        }

        std::shared_ptr<Job> find_job(const std::string &id_text)
        {
            std::lock_guard lock(jobs_mu_);
            try
            {
                const auto it = jobs_.find(std::stoull(id_text));
                return it == jobs_.end() ? nullptr : it->second;
            }
            catch (const std::exception &)
            {
                return nullptr;
            }
        }

        void mount()
        {
            server_.Post("/network", [this](const Req &req, Res &res) {
                InitConfig cfg;
                try
                {
                    cfg = init_config_from_json(parse_body(req));
                    // Surface argument errors now rather than as a failed job.
                    const KeySpace ks{system_.config().key_bits, system_.bucket(), std::max<NodeId>(cfg.nodes, 1)};
                    if (cfg.nodes < introducer_count)
                    {
                        throw std::invalid_argument("an overlay needs at least 3 nodes");
                    }
                    if (cfg.key_count() > ks.capacity())
                    {
                        throw std::invalid_argument("keys exceed the capacity of " + std::to_string(ks.capacity()));
                    }
                    validate({cfg.dist, resolve_params(cfg.dist, cfg.params, ks.key_range()), 0, ks.key_range()});
                }
                catch (const std::exception &e)
                {
                    send_error(res, 400, e.what());
                    return;
                }
                start_job(res, "init", [this, cfg]() -> std::optional<Report> {
                    system_.init(cfg);
                    return std::nullopt;
                });
            });

            server_.Get("/network/status", [this](const Req &, Res &res) {
                // Snapshot as of the last completed request or job; never
                // waits for a running job.
                std::lock_guard lock(status_mu_);
                send_json(res, 200, to_json(status_));
            });

            server_.Post("/network/reset", [this](const Req &, Res &res) {
                guarded(res, [&] {
                    system_.reset();
                    send_json(res, 200, to_json(system_.status()));
                });
            });

            server_.Post("/ops", [this](const Req &req, Res &res) {
                guarded(res, [&] {
                    const Json body = parse_body(req);
                    reject_unknown(body, {"op", "key", "origin"});
                    if (!body.contains("op") || !body.at("op").is_string() || !body.contains("key"))
                    {
                        throw std::invalid_argument("body needs op and key");
                    }
                    const MessageType op = parse_op(body.at("op").get<std::string>());
                    const Key key = json_u64(body.at("key"), "key");
                    const NodeId origin = body.contains("origin") ? json_u64(body.at("origin"), "origin") : system_.config().introducer;
                    send_json(res, 200, to_json(system_.do_op(op, key, origin)));
                });
            });

            server_.Post("/experiments", [this](const Req &req, Res &res) {
                ExperimentConfig cfg;
                try
                {
                    cfg = experiment_config_from_json(parse_body(req));
                }
                catch (const std::exception &e)
                {
                    send_error(res, 400, e.what());
                    return;
                }
                start_job(res, "experiment", [this, cfg]() -> std::optional<Report> { return system_.run_experiment(cfg); });
            });

            server_.Get(R"(/experiments/(\d+))", [this](const Req &req, Res &res) { get_result(req.matches[1], res, "experiment", false); });
            server_.Get(R"(/experiments/(\d+)/export)", [this](const Req &req, Res &res) { get_result(req.matches[1], res, "experiment", true, req); });

            server_.Post("/churn", [this](const Req &req, Res &res) {
                std::uint64_t updates = 2500;
                DistributionKind kind = DistributionKind::Uniform;
                std::optional<DistributionParams> params;
                std::optional<std::uint64_t> seed;
                try
                {
                    const Json body = parse_body(req);
                    reject_unknown(body, {"updates", "dist", "seed"});
                    if (body.contains("updates"))
                    {
                        updates = json_u64(body.at("updates"), "updates");
                    }
                    if (body.contains("dist"))
                    {
                        read_dist(body.at("dist"), kind, params);
                    }
                    if (body.contains("seed"))
                    {
                        seed = json_u64(body.at("seed"), "seed");
                    }
                }
                catch (const std::exception &e)
                {
                    send_error(res, 400, e.what());
                    return;
                }
                start_job(res, "churn", [this, updates, kind, params, seed]() -> std::optional<Report> {
                    return system_.churn_run(updates, kind, params, seed);
                });
            });

            server_.Get(R"(/churn/(\d+))", [this](const Req &req, Res &res) { get_result(req.matches[1], res, "churn", false); });

            server_.Get(R"(/jobs/(\d+))", [this](const Req &req, Res &res) {
                const auto job = find_job(req.matches[1]);
                if (!job)
                {
                    send_error(res, 404, "unknown job");
                    return;
                }
                std::lock_guard lock(jobs_mu_);
                send_json(res, 200, job_json(*job));
            });

            server_.Get("/load", [this](const Req &, Res &res) {
                guarded(res, [&] { send_json(res, 200, to_json(system_.load_report())); });
            });

            server_.Get("/load/export", [this](const Req &req, Res &res) {
                guarded(res, [&] { send_export(res, system_.load_report(), req); });
            });

            server_.Get("/log", [this](const Req &, Res &res) {
                guarded(res, [&] {
                    std::string text;
                    for (const std::string &line : system_.log())
                    {
                        text += line;
                        text += '\n';
                    }
                    res.set_content(text, "text/plain");
                });
            });

            // Diagnostic: put one raw message in the kernel and run it out.
            server_.Post("/kernel/send", [this](const Req &req, Res &res) {
                guarded(res, [&] {
                    const Json body = parse_body(req);
                    reject_unknown(body, {"src", "dst", "op", "key"});
                    if (!body.contains("src") || !body.contains("dst") || !body.contains("key"))
                    {
                        throw std::invalid_argument("body needs src, dst and key");
                    }
                    const MessageType op = parse_op(body.value("op", std::string("search")));
                    const NodeId src = json_u64(body.at("src"), "src");
                    const NodeId dst = json_u64(body.at("dst"), "dst");
                    if (src > system_.node_count() || dst < 1 || dst > system_.node_count() || src < 1)
                    {
                        throw std::invalid_argument("src and dst must be existing nodes");
                    }
                    const std::size_t mark = system_.log().size();
                    const RunReport r = system_.inject(
                        {src, dst, op, KeyPayload{json_u64(body.at("key"), "key"), src, 0, {}, 0, system_.node_count()}});
                    send_json(res, 200,
                              {{"deliveries", r.deliveries},
                               {"trace_hash", std::to_string(system_.trace_hash())},
                               {"log_lines", std::vector<std::string>(system_.log().begin() + static_cast<std::ptrdiff_t>(mark),
                                                                      system_.log().end())}});
                });
            });

            server_.Get("/trace", [this](const Req &, Res &res) {
                guarded(res, [&] {
                    send_json(res, 200, {{"trace_hash", std::to_string(system_.trace_hash())}, {"log_lines", system_.log().size()}});
                });
            });

            server_.Get("/events", [this](const Req &req, Res &res) {
                std::uint64_t since = 0;
                try
                {
                    since = req.has_param("since") ? std::stoull(req.get_param_value("since")) : 0;
                }
                catch (const std::exception &)
                {
                    send_error(res, 400, "since must be a number");
                    return;
                }
                std::vector<std::pair<std::uint64_t, std::string>> batch;
                const std::uint64_t next = hub_.read(since, 5000, batch);
                std::string body = "{\"events\":[";
                for (std::size_t i = 0; i < batch.size(); ++i)
                {
                    body += (i ? "," : "");
                    body += batch[i].second;
                }
                body += "],\"next\":" + std::to_string(next) + "}";
                res.set_content(body, "application/json");
            });

            // Server-sent events; `since` (or Last-Event-ID) resumes.
            server_.Get("/events/stream", [this](const Req &req, Res &res) {
                std::uint64_t since = hub_.next();
                try
                {
                    if (req.has_param("since"))
                    {
                        since = std::stoull(req.get_param_value("since"));
                    }
                    else if (req.has_header("Last-Event-ID"))
                    {
                        since = std::stoull(req.get_header_value("Last-Event-ID")) + 1;
                    }
                }
                catch (const std::exception &)
                {
                    send_error(res, 400, "since must be a number");
                    return;
                }
                auto cursor = std::make_shared<std::uint64_t>(since);
                res.set_header("Cache-Control", "no-cache");
                res.set_chunked_content_provider("text/event-stream", [this, cursor](std::size_t, httplib::DataSink &sink) {
                    std::vector<std::pair<std::uint64_t, std::string>> batch;
                    *cursor = hub_.wait_read(*cursor, 1000, std::chrono::milliseconds(500), batch);
                    std::string chunk;
                    for (const auto &[seq, data] : batch)
                    {
                        chunk += "id: " + std::to_string(seq) + "\ndata: " + data + "\n\n";
                    }
                    if (chunk.empty())
                    {
                        chunk = ": keep-alive\n\n";
                    }
                    if (!sink.write(chunk.data(), chunk.size()))
                    {
                        return false;
                    }
                    if (hub_.closed())
                    {
                        sink.done();
                    }
                    return true;
                });
            });
        }

        void send_export(Res &res, const Report &r, const Req &req)
        {
            const std::string format = req.has_param("format") ? req.get_param_value("format") : "csv";
            const std::string doc = export_report(r, format);
            res.set_content(doc, format == "csv" ? "text/csv" : "application/json");
        }

        void get_result(const std::string &id, Res &res, const std::string &kind, bool as_export, const Req &req = {})
        {
            const auto job = find_job(id);
            if (!job || job->kind != kind)
            {
                send_error(res, 404, "unknown " + kind + " id");
                return;
            }
            std::unique_lock lock(jobs_mu_);
            if (job->state == Job::State::Running)
            {
                send_json(res, 202, job_json(*job));
                return;
            }
            if (job->state == Job::State::Failed)
            {
                send_json(res, 500, job_json(*job));
                return;
            }
            const Report report = *job->result;
            lock.unlock();
            try
            {
                if (as_export)
                {
                    send_export(res, report, req);
                }
                else
                {
                    send_json(res, 200, std::visit([](const auto &r) { return to_json(r, true); }, report));
                }
            }
            catch (const std::invalid_argument &e)
            {
                send_error(res, 400, e.what());
            }
        }

        System system_;
        std::mutex system_mu_;
        std::mutex status_mu_;
        SystemStatus status_;
        EventHub hub_;
        httplib::Server server_;

        std::mutex jobs_mu_;
        std::condition_variable idle_cv_;
        std::map<std::uint64_t, std::shared_ptr<Job>> jobs_;
        std::shared_ptr<Job> current_;
        std::uint64_t last_job_id_ = 0;
        bool busy_ = false;
        std::thread worker_;
    };
} // namespace nbdt
