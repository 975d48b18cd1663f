#pragma once

#include "nbdt/geometry.hpp"
#include "nbdt/keyspace.hpp"
#include "nbdt/routing.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace nbdt
{
    enum class MessageType : std::uint8_t
    {
        Join = 0,
        Search = 1,
        Insert = 2,
        Delete = 3,
        JoinReply = 4,
        OpReply = 5,
    };

    inline constexpr std::size_t message_type_count = 6;

    inline constexpr std::array<std::string_view, message_type_count> message_type_names{
        "JOIN", "SEARCH", "INSERT", "DELETE", "JOIN_REPLY", "OP_REPLY"};

    constexpr std::string_view to_string(MessageType t) noexcept { return message_type_names[static_cast<std::size_t>(t)]; }

    inline std::optional<MessageType> parse_message_type(std::string_view s)
    {
        for (std::size_t i = 0; i < message_type_count; ++i)
        {
            if (message_type_names[i] == s)
            {
                return static_cast<MessageType>(i);
            }
        }
        return std::nullopt;
    }

    constexpr bool is_key_op(MessageType t) noexcept
    {
        return t == MessageType::Search || t == MessageType::Insert || t == MessageType::Delete;
    }

    constexpr bool is_terminal(MessageType t) noexcept { return t == MessageType::JoinReply || t == MessageType::OpReply; }

    /// Join request relayed introducer -> deepest spine -> last node.
    struct JoinRequest
    {
        enum class Stage : std::uint8_t
        {
            AtIntroducer,
            AtSpine,
            AtLast,
        };

        Stage stage = Stage::AtIntroducer;
        NodeId introducer = 1;
        /// Largest network size known to the sender.
        NodeId size_hint = 0;

        friend bool operator==(const JoinRequest &, const JoinRequest &) = default;
    };

    /// Sent by the last node to the joiner (and, as a notice, to the deepest
    /// spine node) once the new id is assigned.
    struct JoinPayload
    {
        std::vector<NodeId> lsi;
        std::vector<NodeId> ci;
        NodeId parent = 0;
        std::optional<NodeId> sibling;
        NodeId total_nodes = 1;

        friend bool operator==(const JoinPayload &, const JoinPayload &) = default;
    };

    struct KeyPayload
    {
        Key key = 0;
        /// Node that receives the OP_REPLY.
        NodeId origin = 0;
        std::uint64_t op_token = 0;
        RoutePhase phase;
        std::uint32_t hops = 0;
        NodeId size_hint = 0;

        friend bool operator==(const KeyPayload &, const KeyPayload &) = default;
    };

    enum class OpStatus : std::uint8_t
    {
        Found,
        NotFound,
        Inserted,
        Duplicate,
        Deleted,
        OutOfRange,
    };

    inline constexpr std::array<std::string_view, 6> op_status_names{"found", "not-found", "inserted",
                                                                     "duplicate", "deleted", "out-of-range"};

    constexpr std::string_view to_string(OpStatus s) noexcept { return op_status_names[static_cast<std::size_t>(s)]; }

    struct OpReply
    {
        std::uint64_t op_token = 0;
        MessageType op = MessageType::Search;
        Key key = 0;
        OpStatus status = OpStatus::NotFound;
        NodeId holder = 0;
        std::uint32_t hops = 0;
        NodeId size_hint = 0;

        friend bool operator==(const OpReply &, const OpReply &) = default;
    };

    using Payload = std::variant<JoinRequest, JoinPayload, KeyPayload, OpReply>;

    struct Message
    {
        NodeId src = 0;
        NodeId dst = 1;
        MessageType type = MessageType::Search;
        Payload payload;

        friend bool operator==(const Message &, const Message &) = default;
    };

    constexpr bool payload_matches(MessageType t, const Payload &p) noexcept
    {
        switch (t)
        {
        case MessageType::Join:
            return std::holds_alternative<JoinRequest>(p);
        case MessageType::Search:
        case MessageType::Insert:
        case MessageType::Delete:
            return std::holds_alternative<KeyPayload>(p);
        case MessageType::JoinReply:
            return std::holds_alternative<JoinPayload>(p);
        case MessageType::OpReply:
            return std::holds_alternative<OpReply>(p);
        }
        return false;
    }

    namespace detail
    {
        inline void append_ids(std::string &out, const std::vector<NodeId> &v)
        {
            out += '[';
            for (std::size_t i = 0; i < v.size(); ++i)
            {
                if (i)
                {
                    out += ',';
                }
                out += std::to_string(v[i]);
            }
            out += ']';
        }
    } // namespace detail

    /// Canonical one-line text of a message. This is the record the trace
    /// hash digests, so its layout is part of the stable format.
    inline std::string canonical_text(const Message &m)
    {
        std::string out = std::to_string(m.src) + ' ' + std::to_string(m.dst) + ' ' + std::string(to_string(m.type));
        std::visit(
            [&out](const auto &p) {
                using P = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<P, JoinRequest>)
                {
                    out += " stage=" + std::to_string(static_cast<int>(p.stage)) + " intro=" + std::to_string(p.introducer) +
                           " hint=" + std::to_string(p.size_hint);
                }
                else if constexpr (std::is_same_v<P, JoinPayload>)
                {
                    out += " lsi=";
                    detail::append_ids(out, p.lsi);
                    out += " ci=";
                    detail::append_ids(out, p.ci);
                    out += " parent=" + std::to_string(p.parent) +
                           " sibling=" + (p.sibling ? std::to_string(*p.sibling) : std::string("-")) +
                           " total=" + std::to_string(p.total_nodes);
                }
                else if constexpr (std::is_same_v<P, KeyPayload>)
                {
                    out += " key=" + std::to_string(p.key) + " origin=" + std::to_string(p.origin) +
                           " token=" + std::to_string(p.op_token) +
                           " phase=" + std::to_string(static_cast<int>(p.phase.stage)) + '/' + std::to_string(p.phase.depth) +
                           " hops=" + std::to_string(p.hops) + " hint=" + std::to_string(p.size_hint);
                }
                else
                {
                    out += " token=" + std::to_string(p.op_token) + " op=" + std::string(to_string(p.op)) +
                           " key=" + std::to_string(p.key) + " status=" + std::string(to_string(p.status)) +
                           " holder=" + std::to_string(p.holder) + " hops=" + std::to_string(p.hops) +
                           " hint=" + std::to_string(p.size_hint);
                }
            },
            m.payload);
        return out;
    }
} // namespace nbdt
