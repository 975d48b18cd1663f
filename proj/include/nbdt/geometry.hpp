#pragma once

// Arithmetic of the nested balanced tree.
//
// Peers are labelled 1..N in join order. The outer tree places them on levels
// whose widths square at every step (1, 2, 4, 16, 256, ...), so the height is
// O(log log N). Nodes sharing a parent form a collection, and every
// collection is itself laid out with the same geometry by rank, recursively.
// All functions here are pure.

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

namespace nbdt
{
    /// Peer label. 0 is reserved for the external client.
    using NodeId = std::uint64_t;
    using Level = std::uint32_t;

    inline constexpr NodeId client_id = 0;

    /// Closed interval of consecutive node ids. Every collection and every
    /// nested group is contiguous, so this is the only set representation
    /// the geometry needs.
    struct IdRange
    {
        NodeId first = 1;
        NodeId last = 0;

        constexpr bool empty() const noexcept { return last < first; }
        constexpr std::uint64_t size() const noexcept { return empty() ? 0 : last - first + 1; }
        constexpr bool contains(NodeId id) const noexcept { return id >= first && id <= last; }

        friend constexpr bool operator==(const IdRange &, const IdRange &) = default;
    };

    inline std::vector<NodeId> ids(IdRange r)
    {
        std::vector<NodeId> out;
        out.reserve(r.size());
        for (NodeId id = r.first; !r.empty() && id <= r.last; ++id)
        {
            out.push_back(id);
        }
        return out;
    }

    namespace detail
    {
        inline constexpr std::uint64_t saturated = std::numeric_limits<std::uint64_t>::max();

        constexpr std::uint64_t sat_add(std::uint64_t a, std::uint64_t b) noexcept
        {
            return (a > saturated - b) ? saturated : a + b;
        }
    } // namespace detail

    /// Number of slots on level l: 1, 2, 4, 16, 256, ... Saturates past 2^63.
    constexpr std::uint64_t level_width(Level l) noexcept
    {
        if (l == 0)
        {
            return 1;
        }
        std::uint64_t w = 2;
        for (Level i = 1; i < l; ++i)
        {
            if (w > std::numeric_limits<std::uint32_t>::max())
            {
                return detail::saturated;
            }
            w *= w;
        }
        return w;
    }

    /// Rank (0-based) of the first slot of level l.
    constexpr std::uint64_t level_start_rank(Level l) noexcept
    {
        std::uint64_t s = 0;
        for (Level j = 0; j < l; ++j)
        {
            s = detail::sat_add(s, level_width(j));
        }
        return s;
    }

    constexpr Level level_of_rank(std::uint64_t rank) noexcept
    {
        Level l = 0;
        while (level_start_rank(l + 1) <= rank)
        {
            ++l;
        }
        return l;
    }

    /// Rank of the parent of a non-root rank. Each node on level l-1 fathers
    /// width(l-1) consecutive children on level l; the root fathers level 1.
    constexpr std::uint64_t parent_rank(std::uint64_t rank)
    {
        if (rank == 0)
        {
            throw std::invalid_argument("root rank has no parent");
        }
        const Level l = level_of_rank(rank);
        if (l == 1)
        {
            return 0;
        }
        const std::uint64_t k = rank - level_start_rank(l);
        return level_start_rank(l - 1) + k / level_width(l - 1);
    }

    /// Unclipped rank interval of the collection holding a non-root rank.
    constexpr IdRange collection_ranks(std::uint64_t rank)
    {
        if (rank == 0)
        {
            throw std::invalid_argument("root rank has no collection");
        }
        const Level l = level_of_rank(rank);
        if (l == 1)
        {
            return {1, 2};
        }
        const std::uint64_t fanout = level_width(l - 1);
        const std::uint64_t pk = parent_rank(rank) - level_start_rank(l - 1);
        const std::uint64_t first = level_start_rank(l) + pk * fanout;
        return {first, first + fanout - 1};
    }

    // Geometry inside an arbitrary contiguous group, by rank relative to
    // group.first. The outer tree is the group [1, N].

    constexpr Level level_in(IdRange group, NodeId id) noexcept { return level_of_rank(id - group.first); }

    /// First member of level l inside the group, if that level is populated.
    constexpr std::optional<NodeId> spine_in(IdRange group, Level l) noexcept
    {
        const std::uint64_t r = level_start_rank(l);
        if (r >= group.size())
        {
            return std::nullopt;
        }
        return group.first + r;
    }

    constexpr IdRange level_members_in(IdRange group, Level l) noexcept
    {
        const std::uint64_t a = level_start_rank(l);
        if (a >= group.size())
        {
            return {group.first, group.first - 1};
        }
        const std::uint64_t b = level_start_rank(l + 1);
        const NodeId last = (b > group.size()) ? group.last : group.first + b - 1;
        return {group.first + a, last};
    }

    constexpr std::optional<NodeId> parent_in(IdRange group, NodeId id)
    {
        if (id == group.first)
        {
            return std::nullopt;
        }
        return group.first + parent_rank(id - group.first);
    }

    /// Members sharing the parent of id inside the group, clipped to the group.
    constexpr IdRange collection_in(IdRange group, NodeId id)
    {
        const IdRange r = collection_ranks(id - group.first);
        const NodeId first = group.first + r.first;
        const NodeId last = group.first + r.last;
        return {first, last < group.last ? last : group.last};
    }

    /// Collections whose members sit on level l of the group, in id order.
    inline std::vector<IdRange> collections_on_level(IdRange group, Level l)
    {
        std::vector<IdRange> out;
        if (l == 0)
        {
            if (!group.empty())
            {
                out.push_back({group.first, group.first});
            }
            return out;
        }
        const IdRange members = level_members_in(group, l);
        for (NodeId id = members.first; !members.empty() && id <= members.last;)
        {
            const IdRange c = collection_in(group, id);
            out.push_back(c);
            id = c.last + 1;
        }
        return out;
    }

    // Outer tree over ids 1..N.

    constexpr NodeId level_start(Level l) noexcept { return detail::sat_add(1, level_start_rank(l)); }

    constexpr Level level_of(NodeId id) noexcept { return level_of_rank(id - 1); }

    /// Parent of id in the outer tree. The root (id 1) has none.
    constexpr std::optional<NodeId> parent_of(NodeId id)
    {
        if (id < 2)
        {
            return std::nullopt;
        }
        return 1 + parent_rank(id - 1);
    }

    constexpr IdRange outer_group(NodeId n) noexcept { return {1, n}; }

    /// Existing members of the outer collection holding id (id >= 2).
    constexpr IdRange collection_of(NodeId id, NodeId n) { return collection_in(outer_group(n), id); }

    /// Number of populated outer levels in a network of n peers.
    constexpr Level level_count(NodeId n) noexcept { return n == 0 ? 0 : level_of(n) + 1; }

    /// Chain of nested groups containing id: the outer group, then the
    /// collection of id inside it, then the collection inside that, until id
    /// is the root (first member) of the innermost group.
    inline std::vector<IdRange> scope_chain(NodeId id, NodeId n)
    {
        std::vector<IdRange> chain{outer_group(n)};
        while (chain.back().first != id)
        {
            chain.push_back(collection_in(chain.back(), id));
        }
        return chain;
    }

    /// The outer geometry re-applied to a member list by rank. Collections
    /// with more than two members are nested again; smaller ones are the
    /// leaves of the innermost binary fan-out.
    struct NestedGeometry
    {
        IdRange members;
        std::vector<IdRange> levels;
        std::vector<IdRange> collections;
        std::vector<NestedGeometry> nested;
    };

    inline NestedGeometry nested_geometry(IdRange members)
    {
        if (members.empty())
        {
            throw std::invalid_argument("nested_geometry needs at least one member");
        }
        NestedGeometry g{members, {}, {}, {}};
        for (Level l = 0; spine_in(members, l); ++l)
        {
            g.levels.push_back(level_members_in(members, l));
            if (l == 0)
            {
                continue;
            }
            for (const IdRange &c : collections_on_level(members, l))
            {
                g.collections.push_back(c);
                if (c.size() > 2)
                {
                    g.nested.push_back(nested_geometry(c));
                }
            }
        }
        return g;
    }
} // namespace nbdt
