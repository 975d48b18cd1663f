#pragma once

#include "nbdt/message.hpp"
#include "nbdt/network.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

namespace nbdt
{
    /// 64-bit FNV-1a over the canonical text of each delivered message, each
    /// record terminated by '\n'. Stable across releases.
    class TraceHash
    {
    public:
        static constexpr std::uint64_t offset_basis = 0xcbf29ce484222325ULL;
        static constexpr std::uint64_t prime = 0x100000001b3ULL;

        void add(std::string_view bytes) noexcept
        {
            for (unsigned char c : bytes)
            {
                h_ ^= c;
                h_ *= prime;
            }
        }

        void add_record(const Message &m)
        {
            add(canonical_text(m));
            add("\n");
        }

        std::uint64_t value() const noexcept { return h_; }

    private:
        std::uint64_t h_ = offset_basis;
    };

    struct RunReport
    {
        std::uint64_t deliveries = 0;
        std::array<std::uint64_t, message_type_count> per_type{};
        std::uint64_t trace_hash = TraceHash::offset_basis;
        /// Oldest undelivered message when the budget ran out.
        std::optional<Message> livelock;
    };

    /// Delivers messages oldest-first to `deliver`, sending whatever it
    /// returns, until the buffer drains or `budget` deliveries were made.
    ///
    /// `deliver` is any callable `std::vector<Message>(const Message&)`. It
    /// runs one message at a time; handlers never see two deliveries at once.
    template <class Deliver>
    RunReport run_until_quiescent(Network &net, Deliver &&deliver, std::uint64_t budget)
    {
        if (budget == 0)
        {
            throw std::invalid_argument("run budget must be at least 1");
        }
        RunReport report;
        TraceHash hash;
        while (report.deliveries < budget)
        {
            const auto pos = net.oldest_deliverable();
            if (!pos)
            {
                break;
            }
            Message m = net.take(*pos);
            hash.add_record(m);
            ++report.deliveries;
            ++report.per_type[static_cast<std::size_t>(m.type)];
            for (Message &out : deliver(static_cast<const Message &>(m)))
            {
                net.send_message(std::move(out));
            }
        }
        report.trace_hash = hash.value();
        if (!net.empty())
        {
            if (const auto pos = net.oldest_deliverable())
            {
                report.livelock = net.peek(*pos);
            }
        }
        return report;
    }
} // namespace nbdt
