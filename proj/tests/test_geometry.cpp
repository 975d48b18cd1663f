#include "nbdt/geometry.hpp"

#include <gtest/gtest.h>

#include <map>
#include <vector>

using namespace nbdt;

namespace
{
    // Builds the outer tree node by node: every node of level l-1 receives
    // width(l-1) children in order, the root receives two.
    struct Enumerated
    {
        std::vector<Level> level;    // by id
        std::vector<NodeId> parent;  // by id, 0 for the root
        std::vector<NodeId> starts;  // first id of each level
    };

    Enumerated enumerate(NodeId n)
    {
        Enumerated e;
        e.level.assign(n + 1, 0);
        e.parent.assign(n + 1, 0);
        e.starts.push_back(1);
        std::vector<NodeId> prev{1};
        std::uint64_t cap = 1;
        NodeId next = 2;
        for (Level l = 1; next <= n; ++l)
        {
            const std::uint64_t per_parent = (l == 1) ? 2 : cap;
            cap = (l == 1) ? 2 : cap * cap;
            e.starts.push_back(next);
            std::vector<NodeId> cur;
            for (NodeId p : prev)
            {
                for (std::uint64_t c = 0; c < per_parent && next <= n; ++c)
                {
                    e.level[next] = l;
                    e.parent[next] = p;
                    cur.push_back(next++);
                }
            }
            prev = cur;
        }
        return e;
    }

    std::vector<NodeId> oracle_collection(const Enumerated &e, NodeId id, NodeId n)
    {
        std::vector<NodeId> out;
        for (NodeId j = 2; j <= n; ++j)
        {
            if (e.parent[j] == e.parent[id])
            {
                out.push_back(j);
            }
        }
        return out;
    }
} // namespace

TEST(Geometry, LevelWidths)
{
    EXPECT_EQ(level_width(0), 1u);
    EXPECT_EQ(level_width(1), 2u);
    EXPECT_EQ(level_width(2), 4u);
    EXPECT_EQ(level_width(3), 16u);
    EXPECT_EQ(level_width(4), 256u);
    EXPECT_EQ(level_width(5), 65536u);
    std::uint64_t w = 2;
    for (Level l = 2; l <= 6; ++l)
    {
        w *= w;
        EXPECT_EQ(level_width(l), w) << l;
    }
}

TEST(Geometry, LevelStarts)
{
    EXPECT_EQ(level_start(0), 1u);
    EXPECT_EQ(level_start(1), 2u);
    EXPECT_EQ(level_start(2), 4u);
    EXPECT_EQ(level_start(3), 8u);
    EXPECT_EQ(level_start(4), 24u);
    EXPECT_EQ(level_start(5), 280u);
    NodeId s = 1;
    for (Level l = 0; l < 6; ++l)
    {
        EXPECT_EQ(level_start(l), s);
        s += level_width(l);
    }
}

TEST(Geometry, LevelOf)
{
    EXPECT_EQ(level_of(1), 0u);
    EXPECT_EQ(level_of(5), 2u);
    EXPECT_EQ(level_of(23), 3u);
    EXPECT_EQ(level_of(24), 4u);
}

TEST(Geometry, ParentOf)
{
    EXPECT_FALSE(parent_of(1));
    EXPECT_EQ(parent_of(2), 1u);
    EXPECT_EQ(parent_of(3), 1u);
    EXPECT_EQ(parent_of(9), 4u);
    EXPECT_EQ(parent_of(14), 5u);
}

TEST(Geometry, CollectionOf)
{
    EXPECT_EQ(ids(collection_of(10, 23)), (std::vector<NodeId>{8, 9, 10, 11}));
    EXPECT_EQ(ids(collection_of(3, 7)), (std::vector<NodeId>{2, 3}));
    EXPECT_EQ(ids(collection_of(13, 13)), (std::vector<NodeId>{12, 13}));
    // id above n: the members that exist
    EXPECT_EQ(ids(collection_of(14, 13)), (std::vector<NodeId>{12, 13}));
}

TEST(Geometry, MatchesEnumerationUpTo10k)
{
    constexpr NodeId limit = 10000;
    const Enumerated e = enumerate(limit);
    for (std::size_t l = 0; l < e.starts.size(); ++l)
    {
        EXPECT_EQ(level_start(static_cast<Level>(l)), e.starts[l]);
    }
    std::map<NodeId, std::vector<NodeId>> children;
    for (NodeId id = 1; id <= limit; ++id)
    {
        ASSERT_EQ(level_of(id), e.level[id]) << id;
        const Level l = level_of(id);
        ASSERT_LE(level_start(l), id);
        ASSERT_LT(id, level_start(l + 1));
        if (id > 1)
        {
            ASSERT_EQ(parent_of(id), e.parent[id]) << id;
            children[e.parent[id]].push_back(id);
        }
    }
    // Collections are the child blocks of the enumeration.
    for (const auto &[p, kids] : children)
    {
        for (NodeId k : kids)
        {
            ASSERT_EQ(ids(collection_of(k, limit)), kids) << k;
        }
    }
    // Truncated networks: the newest node's collection and the level count.
    for (NodeId n = 2; n <= limit; ++n)
    {
        ASSERT_EQ(ids(collection_of(n, n)), oracle_collection(e, n, n)) << n;
        ASSERT_EQ(level_count(n), e.level[n] + 1) << n;
    }
}

TEST(Geometry, PartitionUpTo100k)
{
    for (NodeId id = 1; id <= 100000; ++id)
    {
        const Level l = level_of(id);
        ASSERT_LE(level_start(l), id);
        ASSERT_LT(id, level_start(l + 1));
    }
}

TEST(Geometry, ScopeChain)
{
    const auto chain = scope_chain(14, 23);
    ASSERT_EQ(chain.size(), 4u);
    EXPECT_EQ(chain[0], (IdRange{1, 23}));
    EXPECT_EQ(chain[1], (IdRange{12, 15}));
    EXPECT_EQ(chain[2], (IdRange{13, 14}));
    EXPECT_EQ(chain[3], (IdRange{14, 14}));
    EXPECT_EQ(scope_chain(1, 23).size(), 1u);
}

TEST(Geometry, NestedFour)
{
    const NestedGeometry g = nested_geometry({12, 15});
    ASSERT_EQ(g.levels.size(), 3u);
    EXPECT_EQ(g.levels[0], (IdRange{12, 12}));
    EXPECT_EQ(g.levels[1], (IdRange{13, 14}));
    EXPECT_EQ(g.levels[2], (IdRange{15, 15}));
    EXPECT_TRUE(g.nested.empty());
}

TEST(Geometry, NestedPair)
{
    const NestedGeometry g = nested_geometry({2, 3});
    ASSERT_EQ(g.levels.size(), 2u);
    EXPECT_EQ(g.levels[0], (IdRange{2, 2}));
    EXPECT_EQ(g.levels[1], (IdRange{3, 3}));
}

TEST(Geometry, NestedSixteen)
{
    const NestedGeometry g = nested_geometry({8, 23});
    std::vector<std::uint64_t> sizes;
    for (const IdRange &l : g.levels)
    {
        sizes.push_back(l.size());
    }
    EXPECT_EQ(sizes, (std::vector<std::uint64_t>{1, 2, 4, 9}));
}

TEST(Geometry, NestingEndsInPairs)
{
    std::function<void(const NestedGeometry &)> check = [&](const NestedGeometry &g) {
        for (const IdRange &c : g.collections)
        {
            EXPECT_TRUE(c.size() <= 2 || std::any_of(g.nested.begin(), g.nested.end(),
                                                     [&](const NestedGeometry &n) { return n.members == c; }));
        }
        for (const NestedGeometry &n : g.nested)
        {
            check(n);
        }
    };
    check(nested_geometry({1, 1000}));
}

TEST(Geometry, NestedRejectsEmpty)
{
    EXPECT_THROW(nested_geometry({5, 4}), std::invalid_argument);
}
