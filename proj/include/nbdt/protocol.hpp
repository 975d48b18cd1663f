#pragma once

// Peer behaviour as a message-driven state machine: join relay, routed
// search/insert/delete, and the mark-on-empty lifecycle.

#include "nbdt/keyspace.hpp"
#include "nbdt/message.hpp"
#include "nbdt/routing.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nbdt
{
    inline constexpr NodeId introducer_count = 3;

    constexpr bool is_introducer(NodeId id) noexcept { return id >= 1 && id <= introducer_count; }

    struct NodeState
    {
        enum class Status : std::uint8_t
        {
            Joining,
            Live,
        };

        NodeId id = 0;
        Status status = Status::Joining;
        std::set<Key> store;
        RoutingTables tables;
        bool marked_deleted = false;
        KeyRange range;
        std::optional<NodeId> prev_sibling;
        std::optional<NodeId> next_sibling;

        bool live() const noexcept { return status == Status::Live; }
    };

    struct ProtocolConfig
    {
        Key bucket = 14;
    };

    /// A live node with tables for a network of n peers; used for the
    /// bootstrap introducers, which exist before any join runs.
    inline NodeState make_live_node(NodeId id, NodeId n, Key bucket)
    {
        NodeState node;
        node.id = id;
        node.status = NodeState::Status::Live;
        node.tables = build_tables(id, n);
        node.range = {(id - 1) * bucket, id * bucket - 1};
        const IdRange c = id > 1 ? collection_of(id, n) : IdRange{1, 1};
        if (id > c.first)
        {
            node.prev_sibling = id - 1;
        }
        if (id < c.last)
        {
            node.next_sibling = id + 1;
        }
        return node;
    }

    /// Adopts a larger network size learned from a message. Tables are a pure
    /// function of (id, size), so the node rebuilds them locally.
    inline void observe_size(NodeState &node, NodeId hint)
    {
        if (node.live() && hint > node.tables.known_size)
        {
            node.tables = build_tables(node.id, hint);
        }
    }

    struct HandleResult
    {
        std::vector<Message> out;
        /// Set when an OP_REPLY reached its origin.
        std::optional<OpReply> completed;
        /// Set when a joining node became live.
        bool joined = false;
        std::vector<std::string> errors;
    };

    /// Applies one operation to the node's own store.
    inline OpStatus local_op(NodeState &node, MessageType op, Key key)
    {
        if (!node.range.contains(key))
        {
            throw std::logic_error("key " + std::to_string(key) + " routed to node " + std::to_string(node.id) +
                                   " outside its range");
        }
        switch (op)
        {
        case MessageType::Search:
            return node.store.contains(key) ? OpStatus::Found : OpStatus::NotFound;
        case MessageType::Insert:
            if (!node.store.insert(key).second)
            {
                return OpStatus::Duplicate;
            }
            node.marked_deleted = false;
            return OpStatus::Inserted;
        case MessageType::Delete:
            if (node.store.erase(key) == 0)
            {
                return OpStatus::NotFound;
            }
            if (node.store.empty() && !is_introducer(node.id))
            {
                node.marked_deleted = true;
            }
            return OpStatus::Deleted;
        default:
            throw std::invalid_argument("local_op on non-key message type");
        }
    }

    namespace detail
    {
        inline JoinPayload join_payload_for(NodeId joiner)
        {
            const RoutingTables t = build_tables(joiner, joiner);
            JoinPayload p;
            p.lsi = t.lsi();
            p.ci = t.ci();
            p.parent = t.parent.value_or(0);
            if (joiner > 1 && collection_of(joiner, joiner).first < joiner)
            {
                p.sibling = joiner - 1;
            }
            p.total_nodes = joiner;
            return p;
        }
    } // namespace detail

    /// Relays a join towards the last node, which appends the joiner.
    inline void forward_join(NodeState &node, const Message &msg, HandleResult &res)
    {
        using Stage = JoinRequest::Stage;
        const auto &req = std::get<JoinRequest>(msg.payload);
        observe_size(node, req.size_hint);
        const NodeId n = node.tables.known_size;
        Stage stage = req.stage;

        if (stage == Stage::AtIntroducer)
        {
            const NodeId spine = node.tables.lsi().back();
            if (spine != node.id)
            {
                res.out.push_back({node.id, spine, MessageType::Join, JoinRequest{Stage::AtSpine, req.introducer, n}});
                return;
            }
            stage = Stage::AtSpine;
        }
        if (stage == Stage::AtSpine)
        {
            if (!node.tables.last_node)
            {
                res.errors.push_back("join reached node " + std::to_string(node.id) + ", which is not the deepest spine node");
                return;
            }
            const NodeId last = *node.tables.last_node;
            if (last != node.id)
            {
                res.out.push_back({node.id, last, MessageType::Join, JoinRequest{Stage::AtLast, req.introducer, n}});
                return;
            }
        }
        if (node.id != n)
        {
            res.errors.push_back("join reached node " + std::to_string(node.id) + ", which is not the last node of " +
                                 std::to_string(n));
            return;
        }

        const NodeId joiner = n + 1;
        JoinPayload payload = detail::join_payload_for(joiner);
        if (payload.sibling == node.id)
        {
            node.next_sibling = joiner;
        }
        observe_size(node, joiner);
        res.out.push_back({node.id, joiner, MessageType::JoinReply, payload});
        // The spine that relayed the request keeps the last-node pointer.
        if (req.stage == Stage::AtLast && msg.src != node.id)
        {
            res.out.push_back({node.id, msg.src, MessageType::JoinReply, std::move(payload)});
        }
    }

    /// Routes a SEARCH/INSERT/DELETE one hop, or resolves it locally.
    inline void forward_op(NodeState &node, const Message &msg, const ProtocolConfig &cfg, HandleResult &res)
    {
        const auto &kp = std::get<KeyPayload>(msg.payload);
        observe_size(node, kp.size_hint);
        const NodeId n = node.tables.known_size;
        const NodeId holder = responsible_node(kp.key, cfg.bucket);

        auto reply = [&](OpStatus status) {
            res.out.push_back({node.id, kp.origin, MessageType::OpReply,
                               OpReply{kp.op_token, msg.type, kp.key, status, node.id, kp.hops, n}});
        };

        if (holder > n)
        {
            reply(OpStatus::OutOfRange);
            return;
        }
        if (holder == node.id)
        {
            reply(local_op(node, msg.type, kp.key));
            return;
        }
        try
        {
            const Hop hop = next_hop(node.tables, holder, kp.phase);
            KeyPayload fwd = kp;
            fwd.phase = hop.phase;
            fwd.hops = kp.hops + 1;
            fwd.size_hint = n;
            res.out.push_back({node.id, hop.next, msg.type, fwd});
        }
        catch (const RoutingFault &e)
        {
            res.errors.push_back(std::string("routing fault: ") + e.what());
        }
    }

    /// Dispatches one delivered message. `msg.dst` must be `node.id`.
    inline HandleResult handle(NodeState &node, const Message &msg, const ProtocolConfig &cfg)
    {
        HandleResult res;
        if (msg.dst != node.id)
        {
            res.errors.push_back("message for node " + std::to_string(msg.dst) + " delivered to " + std::to_string(node.id));
            return res;
        }
        if (!payload_matches(msg.type, msg.payload))
        {
            res.errors.push_back("malformed " + std::string(to_string(msg.type)) + " message at node " + std::to_string(node.id));
            return res;
        }
        if (!node.live() && msg.type != MessageType::JoinReply)
        {
            res.errors.push_back("node " + std::to_string(node.id) + " received " + std::string(to_string(msg.type)) +
                                 " before joining");
            return res;
        }

        switch (msg.type)
        {
        case MessageType::Join:
            forward_join(node, msg, res);
            break;
        case MessageType::Search:
        case MessageType::Insert:
        case MessageType::Delete:
            forward_op(node, msg, cfg, res);
            break;
        case MessageType::JoinReply: {
            const auto &p = std::get<JoinPayload>(msg.payload);
            if (node.live())
            {
                // Last-node notice for the spine that relayed the join.
                observe_size(node, p.total_nodes);
                break;
            }
            if (p.total_nodes != node.id)
            {
                res.errors.push_back("join reply assigns size " + std::to_string(p.total_nodes) + " to node " +
                                     std::to_string(node.id));
                break;
            }
            node.tables = build_tables(node.id, p.total_nodes);
            if (node.tables.lsi() != p.lsi || node.tables.ci() != p.ci || node.tables.parent.value_or(0) != p.parent)
            {
                res.errors.push_back("join reply tables disagree with geometry at node " + std::to_string(node.id));
            }
            node.range = {(node.id - 1) * cfg.bucket, node.id * cfg.bucket - 1};
            node.prev_sibling = p.sibling;
            node.status = NodeState::Status::Live;
            res.joined = true;
            break;
        }
        case MessageType::OpReply: {
            const auto &r = std::get<OpReply>(msg.payload);
            observe_size(node, r.size_hint);
            res.completed = r;
            break;
        }
        }
        return res;
    }

    struct RangePolicy
    {
        bool auto_extend = true;
        NodeId max_nodes = NodeId{1} << 20;
    };

    enum class RangeAction : std::uint8_t
    {
        /// Key already has a holder.
        Route,
        /// Join `joins_needed` peers, then route.
        Extend,
        /// Answer "key out of range".
        Reject,
        /// Join `joins_allowed` peers, then fail: max_nodes would be exceeded.
        Refuse,
    };

    struct RangeDecision
    {
        RangeAction action = RangeAction::Route;
        NodeId joins_needed = 0;
        NodeId joins_allowed = 0;
    };

    inline RangeDecision out_of_range_policy(Key key, const KeySpace &ks, const RangePolicy &policy)
    {
        const NodeId holder = responsible_node(key, ks);
        if (holder <= ks.nodes)
        {
            return {RangeAction::Route, 0, 0};
        }
        const NodeId needed = holder - ks.nodes;
        if (!policy.auto_extend)
        {
            return {RangeAction::Reject, needed, 0};
        }
        if (holder > policy.max_nodes)
        {
            const NodeId allowed = policy.max_nodes > ks.nodes ? policy.max_nodes - ks.nodes : 0;
            return {RangeAction::Refuse, needed, allowed};
        }
        return {RangeAction::Extend, needed, needed};
    }

    struct ReorgAdvisory
    {
        NodeId marked = 0;
        NodeId nodes = 0;
        double threshold = 0.0;
    };

    /// Flags when the share of mark-deleted peers exceeds `threshold` (or
    /// every peer is marked). Only advises; no rebuild happens.
    inline std::optional<ReorgAdvisory> reorg_watch(std::span<const NodeState> nodes, double threshold)
    {
        if (!(threshold > 0.0 && threshold <= 1.0))
        {
            throw std::invalid_argument("reorg threshold must be in (0, 1]");
        }
        NodeId marked = 0;
        for (const NodeState &n : nodes)
        {
            marked += n.marked_deleted ? 1 : 0;
        }
        const auto total = static_cast<NodeId>(nodes.size());
        if (marked == 0 || total == 0)
        {
            return std::nullopt;
        }
        if (static_cast<double>(marked) / static_cast<double>(total) > threshold || marked == total)
        {
            return ReorgAdvisory{marked, total, threshold};
        }
        return std::nullopt;
    }
} // namespace nbdt
