#pragma once

#include "nbdt/message.hpp"
#include "nbdt/random.hpp"

#include <charconv>
#include <cstdint>
#include <deque>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace nbdt
{
    /// One line of the operation log.
    struct LogRecord
    {
        MessageType op = MessageType::Search;
        NodeId src = 0;
        NodeId dst = 0;

        friend bool operator==(const LogRecord &, const LogRecord &) = default;
    };

    inline std::string_view log_op_word(MessageType t)
    {
        switch (t)
        {
        case MessageType::Search:
            return "Search";
        case MessageType::Insert:
            return "Insert";
        case MessageType::Delete:
            return "Delete";
        default:
            throw std::invalid_argument("only SEARCH/INSERT/DELETE messages are logged");
        }
    }

    /// "Search message for node 3 to node 45."
    inline std::string format_log_record(const LogRecord &r)
    {
        return std::string(log_op_word(r.op)) + " message for node " + std::to_string(r.src) + " to node " +
               std::to_string(r.dst) + ".";
    }

    inline std::optional<LogRecord> parse_log_record(std::string_view line)
    {
        LogRecord r;
        constexpr std::string_view middle = " message for node ";
        constexpr std::string_view to = " to node ";
        const auto sp = line.find(' ');
        if (sp == std::string_view::npos)
        {
            return std::nullopt;
        }
        const std::string_view word = line.substr(0, sp);
        if (word == "Search")
        {
            r.op = MessageType::Search;
        }
        else if (word == "Insert")
        {
            r.op = MessageType::Insert;
        }
        else if (word == "Delete")
        {
            r.op = MessageType::Delete;
        }
        else
        {
            return std::nullopt;
        }
        line.remove_prefix(sp);
        if (!line.starts_with(middle))
        {
            return std::nullopt;
        }
        line.remove_prefix(middle.size());
        auto [p1, e1] = std::from_chars(line.data(), line.data() + line.size(), r.src);
        if (e1 != std::errc{})
        {
            return std::nullopt;
        }
        line.remove_prefix(static_cast<std::size_t>(p1 - line.data()));
        if (!line.starts_with(to))
        {
            return std::nullopt;
        }
        line.remove_prefix(to.size());
        auto [p2, e2] = std::from_chars(line.data(), line.data() + line.size(), r.dst);
        if (e2 != std::errc{})
        {
            return std::nullopt;
        }
        line.remove_prefix(static_cast<std::size_t>(p2 - line.data()));
        if (line != ".")
        {
            return std::nullopt;
        }
        return r;
    }

    /// Optional loss and latency. Disabled by default; the baseline network
    /// neither drops nor delays.
    struct FaultModel
    {
        bool enabled = false;
        double drop_probability = 0.0;
        /// Extra delivery steps a message may wait, uniform in [0, max_delay].
        std::uint32_t max_delay = 0;
        std::uint64_t seed = 0;
    };

    /// The shared message buffer, its send counter and the operation log.
    ///
    /// Global delivery order equals send order unless the fault model
    /// delays messages; even then messages of one (src, dst) pair are never
    /// reordered.
    class Network
    {
    public:
        explicit Network(FaultModel faults = {}) : faults_(faults), fault_rng_(faults.seed) {}

        Network(const Network &) = delete;
        Network &operator=(const Network &) = delete;

        /// Non-blocking: buffers msg and bumps the counter by one.
        void send_message(Message msg)
        {
            if (!payload_matches(msg.type, msg.payload))
            {
                throw std::invalid_argument("payload does not match message type " + std::string(to_string(msg.type)));
            }
            if (msg.dst == client_id)
            {
                throw std::invalid_argument("messages must be addressed to a node (dst >= 1)");
            }
            ++counter_;
            if (is_key_op(msg.type))
            {
                append_log(format_log_record({msg.type, msg.src, msg.dst}));
            }
            std::uint64_t ready = tick_;
            if (faults_.enabled)
            {
                if (faults_.drop_probability > 0.0 && fault_rng_.chance(faults_.drop_probability))
                {
                    ++dropped_;
                    return;
                }
                if (faults_.max_delay > 0)
                {
                    ready += fault_rng_.below(std::uint64_t{faults_.max_delay} + 1);
                }
                auto &last = pair_ready_[{msg.src, msg.dst}];
                ready = std::max(ready, last);
                last = ready;
            }
            buffer_.push_back({std::move(msg), ready, next_seq_++});
        }

        /// Sends one copy of `tmpl` to every id in `range`.
        void broadcast(const Message &tmpl, IdRange range)
        {
            for (NodeId id = range.first; !range.empty() && id <= range.last; ++id)
            {
                Message m = tmpl;
                m.dst = id;
                send_message(std::move(m));
            }
        }

        /// Buffer position of the oldest deliverable message for id.
        std::optional<std::size_t> msg_for_node(NodeId id) const
        {
            for (std::size_t i = 0; i < buffer_.size(); ++i)
            {
                if (buffer_[i].msg.dst == id && buffer_[i].ready_at <= tick_)
                {
                    return i;
                }
            }
            return std::nullopt;
        }

        /// Removes and returns the message msg_for_node(id) points at.
        Message recv_message(NodeId id)
        {
            const auto pos = msg_for_node(id);
            if (!pos)
            {
                throw std::logic_error("recv_message: no pending message for node " + std::to_string(id));
            }
            return take(*pos);
        }

        /// Position of the oldest deliverable message of any destination.
        /// When everything left is delayed, idles the clock forward first.
        std::optional<std::size_t> oldest_deliverable()
        {
            if (buffer_.empty())
            {
                return std::nullopt;
            }
            std::uint64_t earliest = UINT64_MAX;
            for (std::size_t i = 0; i < buffer_.size(); ++i)
            {
                if (buffer_[i].ready_at <= tick_)
                {
                    return i;
                }
                earliest = std::min(earliest, buffer_[i].ready_at);
            }
            tick_ = earliest;
            return oldest_deliverable();
        }

        Message take(std::size_t pos)
        {
            Message m = std::move(buffer_.at(pos).msg);
            buffer_.erase(buffer_.begin() + static_cast<std::ptrdiff_t>(pos));
            ++delivered_;
            ++tick_;
            return m;
        }

        const Message &peek(std::size_t pos) const { return buffer_.at(pos).msg; }

        std::uint64_t counter() const noexcept { return counter_; }
        std::uint64_t delivered() const noexcept { return delivered_; }
        std::uint64_t dropped() const noexcept { return dropped_; }
        std::size_t buffered() const noexcept { return buffer_.size(); }
        bool empty() const noexcept { return buffer_.empty(); }
        const std::vector<std::string> &log() const noexcept { return log_; }
        const FaultModel &faults() const noexcept { return faults_; }

        /// Called with every new log line, in order.
        void set_log_sink(std::function<void(const std::string &)> sink) { log_sink_ = std::move(sink); }

        /// Mirrors the log to a plain-text file, one record per line.
        void set_log_file(const std::string &path)
        {
            log_file_.close();
            log_file_.open(path, std::ios::out | std::ios::trunc);
            if (!log_file_)
            {
                throw std::runtime_error("cannot open log file " + path);
            }
        }

        void flush_log()
        {
            if (log_file_.is_open())
            {
                log_file_.flush();
            }
        }

        /// Empties buffer, counters and log. Configuration and sinks stay.
        void reset()
        {
            buffer_.clear();
            pair_ready_.clear();
            log_.clear();
            counter_ = delivered_ = dropped_ = tick_ = next_seq_ = 0;
            fault_rng_ = Rng(faults_.seed);
            if (log_file_.is_open())
            {
                log_file_.flush();
            }
        }

    private:
        struct Envelope
        {
            Message msg;
            std::uint64_t ready_at;
            std::uint64_t seq;
        };

        void append_log(std::string line)
        {
            if (log_file_.is_open())
            {
                log_file_ << line << '\n';
            }
            if (log_sink_)
            {
                log_sink_(line);
            }
            log_.push_back(std::move(line));
        }

        FaultModel faults_;
        Rng fault_rng_;
        std::deque<Envelope> buffer_;
        std::map<std::pair<NodeId, NodeId>, std::uint64_t> pair_ready_;
        std::vector<std::string> log_;
        std::function<void(const std::string &)> log_sink_;
        std::ofstream log_file_;
        std::uint64_t counter_ = 0;
        std::uint64_t delivered_ = 0;
        std::uint64_t dropped_ = 0;
        std::uint64_t tick_ = 0;
        std::uint64_t next_seq_ = 0;
    };
} // namespace nbdt
