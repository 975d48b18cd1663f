#pragma once

#include "nbdt/geometry.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nbdt
{
    class RoutingFault : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    /// Pointers a node keeps for one group it belongs to. Depth 0 is the
    /// outer tree; deeper entries are the nested collections containing the
    /// node.
    struct ScopeTables
    {
        IdRange scope;
        /// First member of every populated level of the scope.
        std::vector<NodeId> lsi;
        /// First member of every collection on this node's level; only
        /// filled when the node heads its level in the scope.
        std::vector<NodeId> ci;
        /// Both children of the scope root (innermost binary fan-out); only
        /// filled when the node is the scope root.
        std::vector<NodeId> fanout;

        friend bool operator==(const ScopeTables &, const ScopeTables &) = default;
    };

    struct RoutingTables
    {
        NodeId self = 0;
        /// Network size these tables were built for.
        NodeId known_size = 0;
        std::vector<ScopeTables> scopes;
        std::optional<NodeId> parent;
        /// Held by the deepest left-spine node only.
        std::optional<NodeId> last_node;

        const std::vector<NodeId> &lsi() const { return scopes.front().lsi; }
        const std::vector<NodeId> &ci() const { return scopes.front().ci; }
        std::span<const ScopeTables> nested() const { return std::span(scopes).subspan(1); }

        friend bool operator==(const RoutingTables &, const RoutingTables &) = default;
    };

    /// Deepest left-spine node of a network of n peers; it tracks the last node.
    constexpr NodeId deepest_spine(NodeId n) noexcept { return level_start(level_of(n)); }

    inline RoutingTables build_tables(NodeId id, NodeId n)
    {
        if (id < 1 || id > n)
        {
            throw std::invalid_argument("build_tables: id " + std::to_string(id) + " outside [1, " + std::to_string(n) + "]");
        }
        RoutingTables t;
        t.self = id;
        t.known_size = n;
        t.parent = parent_of(id);
        for (const IdRange &g : scope_chain(id, n))
        {
            ScopeTables s{g, {}, {}, {}};
            for (Level l = 0;; ++l)
            {
                const auto spine = spine_in(g, l);
                if (!spine)
                {
                    break;
                }
                s.lsi.push_back(*spine);
            }
            const Level mine = level_in(g, id);
            if (s.lsi[mine] == id)
            {
                for (const IdRange &c : collections_on_level(g, mine))
                {
                    s.ci.push_back(c.first);
                }
            }
            if (id == g.first)
            {
                for (NodeId c = id + 1; c <= id + 2 && c <= g.last; ++c)
                {
                    s.fanout.push_back(c);
                }
            }
            t.scopes.push_back(std::move(s));
        }
        if (id == deepest_spine(n))
        {
            t.last_node = n;
        }
        return t;
    }

    /// Every node this one can address directly when routing. The parent and
    /// last-node fields are join bookkeeping and are not routing pointers.
    inline std::vector<NodeId> routing_pointers(const RoutingTables &t)
    {
        std::vector<NodeId> out;
        for (const ScopeTables &s : t.scopes)
        {
            out.insert(out.end(), s.lsi.begin(), s.lsi.end());
            out.insert(out.end(), s.ci.begin(), s.ci.end());
            out.insert(out.end(), s.fanout.begin(), s.fanout.end());
        }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        std::erase(out, t.self);
        return out;
    }

    inline bool has_pointer(const RoutingTables &t, NodeId id)
    {
        for (const ScopeTables &s : t.scopes)
        {
            if (std::find(s.lsi.begin(), s.lsi.end(), id) != s.lsi.end() ||
                std::find(s.ci.begin(), s.ci.end(), id) != s.ci.end() ||
                std::find(s.fanout.begin(), s.fanout.end(), id) != s.fanout.end())
            {
                return id != t.self;
            }
        }
        return false;
    }

    /// Progress marker carried by a routed message: which nesting depth the
    /// route is working in and whether it still heads for that depth's
    /// left-spine node or already for the collection representative.
    struct RoutePhase
    {
        enum class Stage : std::uint8_t
        {
            Origin = 0,
            ToSpine = 1,
            ToRepresentative = 2,
        };

        Stage stage = Stage::Origin;
        std::uint32_t depth = 0;

        friend bool operator==(const RoutePhase &, const RoutePhase &) = default;
    };

    struct Hop
    {
        NodeId next = 0;
        RoutePhase phase;
    };

    namespace detail
    {
        inline const ScopeTables &scope_at(const RoutingTables &t, std::uint32_t depth, IdRange expected)
        {
            if (depth >= t.scopes.size() || t.scopes[depth].scope != expected)
            {
                throw RoutingFault("node " + std::to_string(t.self) + " has no tables for group [" +
                                   std::to_string(expected.first) + ", " + std::to_string(expected.last) + "]");
            }
            return t.scopes[depth];
        }

        inline NodeId require(const std::vector<NodeId> &table, NodeId id, NodeId self, const char *name)
        {
            if (std::find(table.begin(), table.end(), id) == table.end())
            {
                throw RoutingFault("node " + std::to_string(self) + " " + name + " lacks pointer to " + std::to_string(id));
            }
            return id;
        }
    } // namespace detail

    /// One routing step from the node owning `t` towards `target`.
    ///
    /// Within the current group: go to the left-spine node of the target's
    /// level, then to the representative (first member) of the target's
    /// collection, then descend into that collection and repeat. A target
    /// already in the node's tables is reached directly.
    inline Hop next_hop(const RoutingTables &t, NodeId target, RoutePhase phase)
    {
        using Stage = RoutePhase::Stage;
        if (target == 0 || target > t.known_size)
        {
            throw RoutingFault("target " + std::to_string(target) + " outside network of " + std::to_string(t.known_size));
        }
        if (target == t.self)
        {
            throw RoutingFault("next_hop called at the target itself");
        }
        if (has_pointer(t, target))
        {
            return {target, phase};
        }

        const std::vector<IdRange> chain = scope_chain(target, t.known_size);
        if (phase.stage == Stage::Origin)
        {
            std::uint32_t d = 0;
            while (d + 1 < chain.size() && d + 1 < t.scopes.size() && chain[d + 1] == t.scopes[d + 1].scope)
            {
                ++d;
            }
            phase = {Stage::ToSpine, d};
        }

        for (;;)
        {
            if (phase.depth >= chain.size())
            {
                throw RoutingFault("route depth " + std::to_string(phase.depth) + " exceeds nesting of target " +
                                   std::to_string(target));
            }
            const IdRange g = chain[phase.depth];
            const ScopeTables &mine = detail::scope_at(t, phase.depth, g);
            if (target == g.first)
            {
                // Scope roots head level 0 and are always in the scope's lsi.
                return {detail::require(mine.lsi, target, t.self, "lsi"), phase};
            }
            const Level l = level_in(g, target);
            const NodeId spine = *spine_in(g, l);
            const NodeId rep = collection_in(g, target).first;

            if (t.self == rep)
            {
                phase = {Stage::ToSpine, phase.depth + 1};
                continue;
            }
            if (t.self == spine)
            {
                return {detail::require(mine.ci, rep, t.self, "ci"), {Stage::ToSpine, phase.depth}};
            }
            if (phase.stage == Stage::ToSpine)
            {
                return {detail::require(mine.lsi, spine, t.self, "lsi"), {Stage::ToRepresentative, phase.depth}};
            }
            throw RoutingFault("node " + std::to_string(t.self) + " is off the route to " + std::to_string(target));
        }
    }

    /// Full path from `from` to `to` using freshly built tables of size n.
    /// Used by tools and tests; the protocol routes one hop at a time.
    inline std::vector<NodeId> route_path(NodeId from, NodeId to, NodeId n)
    {
        std::vector<NodeId> path{from};
        RoutePhase phase;
        NodeId at = from;
        while (at != to)
        {
            const Hop h = next_hop(build_tables(at, n), to, phase);
            at = h.next;
            phase = h.phase;
            path.push_back(at);
            if (path.size() > 64)
            {
                throw RoutingFault("route from " + std::to_string(from) + " to " + std::to_string(to) + " does not terminate");
            }
        }
        return path;
    }
} // namespace nbdt
