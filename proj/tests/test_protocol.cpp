#include "nbdt/kernel.hpp"
#include "nbdt/protocol.hpp"

#include <gtest/gtest.h>

using namespace nbdt;

namespace
{
    constexpr Key b = 14;

    std::vector<NodeState> network(NodeId n)
    {
        std::vector<NodeState> nodes;
        for (NodeId id = 1; id <= n; ++id)
        {
            nodes.push_back(make_live_node(id, n, b));
        }
        return nodes;
    }

    Message op(MessageType t, NodeId at, Key key, NodeId n)
    {
        return {client_id, at, t, KeyPayload{key, at, 7, {}, 0, n}};
    }

    struct Drive
    {
        std::vector<OpReply> replies;
        std::vector<std::string> errors;
        RunReport report;
    };

    Drive drive(std::vector<NodeState> &nodes, Network &net)
    {
        Drive r;
        r.report = run_until_quiescent(net, [&](const Message &m) {
            HandleResult h = handle(nodes.at(m.dst - 1), m, {b});
            if (h.completed)
            {
                r.replies.push_back(*h.completed);
            }
            r.errors.insert(r.errors.end(), h.errors.begin(), h.errors.end());
            return std::move(h.out);
        }, 10000);
        return r;
    }
} // namespace

TEST(Protocol, LocalSearchAnswersOrigin)
{
    auto nodes = network(23);
    nodes[4].store.insert(4 * b + 3);
    const HandleResult h = handle(nodes[4], op(MessageType::Search, 5, 4 * b + 3, 23), {b});
    ASSERT_EQ(h.out.size(), 1u);
    EXPECT_EQ(h.out[0].type, MessageType::OpReply);
    EXPECT_EQ(h.out[0].dst, 5u);
    EXPECT_EQ(std::get<OpReply>(h.out[0].payload).status, OpStatus::Found);
}

TEST(Protocol, WalkToFourteen)
{
    auto nodes = network(23);
    Network net;
    net.send_message(op(MessageType::Search, 5, 13 * b, 23));
    const Drive r = drive(nodes, net);
    ASSERT_EQ(r.replies.size(), 1u);
    EXPECT_EQ(r.replies[0].holder, 14u);
    EXPECT_EQ(r.replies[0].hops, 3u);
    EXPECT_EQ(net.log(), (std::vector<std::string>{
                             "Search message for node 0 to node 5.",
                             "Search message for node 5 to node 8.",
                             "Search message for node 8 to node 12.",
                             "Search message for node 12 to node 14.",
                         }));
    // injection, 3 forwards, reply
    EXPECT_EQ(r.report.deliveries, 5u);
}

TEST(Protocol, InsertDuplicateDelete)
{
    auto nodes = network(10);
    Network net;
    auto once = [&](MessageType t, Key k) {
        net.send_message(op(t, 2, k, 10));
        const Drive r = drive(nodes, net);
        EXPECT_TRUE(r.errors.empty());
        return r.replies.at(0).status;
    };
    EXPECT_EQ(once(MessageType::Insert, 100), OpStatus::Inserted);
    EXPECT_EQ(once(MessageType::Insert, 100), OpStatus::Duplicate);
    EXPECT_EQ(nodes[7].store.size(), 1u);
    EXPECT_EQ(once(MessageType::Search, 100), OpStatus::Found);
    EXPECT_EQ(once(MessageType::Delete, 100), OpStatus::Deleted);
    EXPECT_TRUE(nodes[7].marked_deleted);
    EXPECT_EQ(once(MessageType::Search, 100), OpStatus::NotFound);
    EXPECT_EQ(once(MessageType::Delete, 100), OpStatus::NotFound);
    EXPECT_EQ(once(MessageType::Insert, 101), OpStatus::Inserted);
    EXPECT_FALSE(nodes[7].marked_deleted);
    EXPECT_EQ(once(MessageType::Search, 10 * b), OpStatus::OutOfRange);
}

TEST(Protocol, IntroducersAreNeverMarked)
{
    NodeState n = make_live_node(2, 10, b);
    n.store.insert(b);
    EXPECT_EQ(local_op(n, MessageType::Delete, b), OpStatus::Deleted);
    EXPECT_FALSE(n.marked_deleted);
}

TEST(Protocol, LocalOpOutsideRangeIsABug)
{
    NodeState n = make_live_node(4, 10, b);
    EXPECT_THROW(local_op(n, MessageType::Search, 0), std::logic_error);
}

TEST(Protocol, NotLiveRejectsOps)
{
    NodeState n;
    n.id = 9;
    const HandleResult h = handle(n, op(MessageType::Search, 9, 0, 9), {b});
    EXPECT_TRUE(h.out.empty());
    EXPECT_EQ(h.errors.size(), 1u);
}

TEST(Protocol, WrongDestinationIsAnError)
{
    NodeState n = make_live_node(4, 10, b);
    EXPECT_EQ(handle(n, op(MessageType::Search, 5, 60, 10), {b}).errors.size(), 1u);
}

TEST(Protocol, JoinIntoSeven)
{
    auto nodes = network(7);
    nodes.push_back(NodeState{});
    nodes.back().id = 8;
    Network net;
    net.send_message({client_id, 1, MessageType::Join, JoinRequest{JoinRequest::Stage::AtIntroducer, 1, 7}});
    const Drive r = drive(nodes, net);
    EXPECT_TRUE(r.errors.empty());
    EXPECT_TRUE(nodes[7].live());
    EXPECT_EQ(nodes[7].tables, build_tables(8, 8));
    EXPECT_EQ(nodes[7].tables.last_node, 8u);
    EXPECT_FALSE(nodes[7].prev_sibling);
    EXPECT_LE(net.counter(), 5u);
}

TEST(Protocol, JoinIntoIntroducers)
{
    auto nodes = network(3);
    nodes.push_back(NodeState{});
    nodes.back().id = 4;
    Network net;
    net.send_message({client_id, 1, MessageType::Join, JoinRequest{JoinRequest::Stage::AtIntroducer, 1, 3}});
    const Drive r = drive(nodes, net);
    EXPECT_TRUE(r.errors.empty());
    EXPECT_TRUE(nodes[3].live());
    EXPECT_EQ(nodes[3].range, (KeyRange{3 * b, 4 * b - 1}));
}

TEST(Protocol, JoinPayloadSibling)
{
    EXPECT_EQ(detail::join_payload_for(10).sibling, 9u);
    EXPECT_FALSE(detail::join_payload_for(12).sibling);
    EXPECT_EQ(detail::join_payload_for(10).parent, 4u);
    EXPECT_EQ(detail::join_payload_for(10).lsi, (std::vector<NodeId>{1, 2, 4, 8}));
}

TEST(Protocol, SequentialJoinsKeepTablesFresh)
{
    auto nodes = network(3);
    Network net;
    for (NodeId id = 4; id <= 300; ++id)
    {
        nodes.push_back(NodeState{});
        nodes.back().id = id;
        const std::uint64_t before = net.counter();
        net.send_message({client_id, 1, MessageType::Join, JoinRequest{JoinRequest::Stage::AtIntroducer, 1, id - 1}});
        const Drive r = drive(nodes, net);
        ASSERT_TRUE(r.errors.empty()) << r.errors.front();
        ASSERT_TRUE(nodes.back().live());
        ASSERT_LE(net.counter() - before, 5u) << id;
        const NodeId spine = deepest_spine(id);
        ASSERT_EQ(nodes[spine - 1].tables.last_node, id);
    }
    // Every key still reaches its holder from every origin.
    for (NodeId origin = 1; origin <= 300; origin += 17)
    {
        for (NodeId holder = 1; holder <= 300; holder += 5)
        {
            net.send_message(op(MessageType::Search, origin, (holder - 1) * b, 300));
            const Drive r = drive(nodes, net);
            ASSERT_EQ(r.replies.size(), 1u);
            ASSERT_EQ(r.replies[0].holder, holder);
        }
    }
}

TEST(RangePolicy, Decisions)
{
    const KeySpace ks{20, b, 10};
    EXPECT_EQ(out_of_range_policy(9 * b, ks, {}).action, RangeAction::Route);
    const RangeDecision one = out_of_range_policy(10 * b, ks, {});
    EXPECT_EQ(one.action, RangeAction::Extend);
    EXPECT_EQ(one.joins_needed, 1u);
    EXPECT_EQ(out_of_range_policy(10 * b, ks, {false, 100}).action, RangeAction::Reject);
    const RangeDecision capped = out_of_range_policy(12 * b, ks, {true, 11});
    EXPECT_EQ(capped.action, RangeAction::Refuse);
    EXPECT_EQ(capped.joins_needed, 3u);
    EXPECT_EQ(capped.joins_allowed, 1u);
}

TEST(Reorg, Watch)
{
    std::vector<NodeState> nodes(1000);
    EXPECT_FALSE(reorg_watch(nodes, 0.05));
    for (int i = 0; i < 50; ++i)
    {
        nodes[i].marked_deleted = true;
    }
    EXPECT_FALSE(reorg_watch(nodes, 0.05));
    nodes[50].marked_deleted = true;
    const auto adv = reorg_watch(nodes, 0.05);
    ASSERT_TRUE(adv);
    EXPECT_EQ(adv->marked, 51u);
    EXPECT_FALSE(reorg_watch(nodes, 1.0));
    for (auto &n : nodes)
    {
        n.marked_deleted = true;
    }
    EXPECT_TRUE(reorg_watch(nodes, 1.0));
    EXPECT_THROW(reorg_watch(nodes, 0.0), std::invalid_argument);
    EXPECT_THROW(reorg_watch(nodes, 1.5), std::invalid_argument);
}
