#include "nbdt/experiments.hpp"

#include <gtest/gtest.h>

using namespace nbdt;

namespace
{
    InitConfig small(NodeId n, std::uint64_t keys, std::uint64_t seed = 1)
    {
        InitConfig c;
        c.nodes = n;
        c.keys = keys;
        c.seed = seed;
        return c;
    }

    std::uint64_t stored_keys(const System &s)
    {
        std::uint64_t k = 0;
        for (NodeId id = 1; id <= s.node_count(); ++id)
        {
            k += s.node(id).store.size();
        }
        return k;
    }
} // namespace

TEST(System, BootstrapStatus)
{
    System s;
    s.init(small(3, 0));
    const SystemStatus st = s.status();
    EXPECT_EQ(st.node_count, 3u);
    EXPECT_EQ(st.key_count, 0u);
    ASSERT_TRUE(st.key_range);
    EXPECT_EQ(st.key_range->lo, 0u);
    EXPECT_EQ(st.key_range->hi, 41u);
    EXPECT_EQ(st.marked_count, 0u);
    EXPECT_EQ(st.message_counter, 0u);
}

TEST(System, InitLoadsDefaultKeyCount)
{
    System s;
    InitConfig c;
    c.nodes = 1000;
    c.seed = 3;
    s.init(c);
    const SystemStatus st = s.status();
    EXPECT_EQ(st.node_count, 1000u);
    EXPECT_EQ(st.key_count, 5700u);
    EXPECT_EQ(st.key_range->hi, 13999u);
    EXPECT_TRUE(s.errors().empty());
}

TEST(System, InitValidation)
{
    System s;
    EXPECT_THROW(s.init(small(2, 0)), std::invalid_argument);
    EXPECT_THROW(s.init(small(3, 43)), std::invalid_argument);
    InitConfig bad = small(10, 10);
    bad.dist = DistributionKind::Normal;
    bad.params = DistributionParams{};
    bad.params->stddev = -1;
    EXPECT_THROW(s.init(bad), std::invalid_argument);
    EXPECT_THROW(System(SystemConfig{.reorg_threshold = 0}), std::invalid_argument);
}

TEST(System, ResetIsIdempotent)
{
    System s;
    s.init(small(50, 100));
    s.reset();
    s.reset();
    const SystemStatus st = s.status();
    EXPECT_EQ(st.node_count, 0u);
    EXPECT_EQ(st.key_count, 0u);
    EXPECT_FALSE(st.key_range);
    EXPECT_EQ(st.message_counter, 0u);
    EXPECT_TRUE(s.log().empty());
    EXPECT_EQ(s.trace_hash(), TraceHash{}.value());
}

TEST(System, SameSeedSameTrace)
{
    System a, b, c;
    a.init(small(200, 1000, 9));
    b.init(small(200, 1000, 9));
    c.init(small(200, 1000, 10));
    EXPECT_EQ(a.trace_hash(), b.trace_hash());
    EXPECT_EQ(a.log(), b.log());
    EXPECT_NE(a.trace_hash(), c.trace_hash());

    ExperimentConfig e;
    e.trials = 100;
    const ExperimentResult ra = a.run_experiment(e);
    const ExperimentResult rb = b.run_experiment(e);
    EXPECT_EQ(ra.trials, rb.trials);
    EXPECT_EQ(a.trace_hash(), b.trace_hash());
}

TEST(System, ReinitReproduces)
{
    System s;
    s.init(small(100, 300, 4));
    const auto h = s.trace_hash();
    s.run_experiment({});
    s.init(small(100, 300, 4));
    EXPECT_EQ(s.trace_hash(), h);
}

TEST(System, SearchWalkAndLog)
{
    System s;
    s.init(small(16, 0));
    const Key key = 13 * 14 + 2; // held by node 14
    s.do_op(MessageType::Insert, key, 14);
    const OpOutcome o = s.do_op(MessageType::Search, key, 5);
    EXPECT_EQ(o.outcome, OpStatus::Found);
    EXPECT_EQ(o.holder, 14u);
    EXPECT_EQ(o.path, (std::vector<NodeId>{5, 8, 12, 14}));
    EXPECT_EQ(o.hops, 3u);
    ASSERT_EQ(o.log_lines.size(), 4u);
    EXPECT_EQ(o.log_lines[0], "Search message for node 0 to node 5.");
    EXPECT_EQ(o.log_lines[1], "Search message for node 5 to node 8.");
    EXPECT_EQ(o.log_lines[3], "Search message for node 12 to node 14.");
}

TEST(System, InsertDuplicateDelete)
{
    System s;
    s.init(small(20, 0));
    EXPECT_EQ(s.do_op(MessageType::Insert, 100, 1).outcome, OpStatus::Inserted);
    EXPECT_EQ(s.do_op(MessageType::Insert, 100, 17).outcome, OpStatus::Duplicate);
    EXPECT_EQ(s.do_op(MessageType::Search, 100, 3).outcome, OpStatus::Found);
    EXPECT_EQ(s.do_op(MessageType::Delete, 100, 9).outcome, OpStatus::Deleted);
    EXPECT_EQ(s.do_op(MessageType::Delete, 100, 9).outcome, OpStatus::NotFound);
    EXPECT_THROW(s.do_op(MessageType::Search, 1, 21), std::invalid_argument);
    EXPECT_THROW(s.do_op(MessageType::Join, 1, 1), std::invalid_argument);
}

TEST(System, OutOfRangeExtends)
{
    System s;
    s.init(small(3, 0));
    const OpOutcome o = s.do_op(MessageType::Insert, 100, 2);
    EXPECT_EQ(o.outcome, OpStatus::Inserted);
    EXPECT_EQ(o.holder, 8u);
    EXPECT_EQ(s.node_count(), 8u);
    EXPECT_EQ(s.status().key_range->hi, 8u * 14 - 1);
}

TEST(System, OutOfRangeRejects)
{
    SystemConfig cfg;
    cfg.range_policy.auto_extend = false;
    System s(cfg);
    s.init(small(3, 0));
    const OpOutcome o = s.do_op(MessageType::Insert, 100, 2);
    EXPECT_EQ(o.outcome, OpStatus::OutOfRange);
    EXPECT_EQ(s.node_count(), 3u);
    EXPECT_EQ(s.status().key_count, 0u);
}

TEST(System, OutOfRangeRefusesPastCap)
{
    SystemConfig cfg;
    cfg.range_policy.max_nodes = 6;
    System s(cfg);
    s.init(small(3, 0));
    try
    {
        s.do_op(MessageType::Insert, 100, 2);
        FAIL() << "expected refusal";
    }
    catch (const ExtensionRefused &e)
    {
        EXPECT_EQ(e.added(), 3u);
    }
    EXPECT_EQ(s.node_count(), 6u);
    EXPECT_EQ(s.status().key_count, 0u);
}

TEST(System, JoinCost)
{
    System s;
    s.init(small(3, 0));
    for (int i = 0; i < 300; ++i)
    {
        const JoinStats j = s.join_one();
        EXPECT_LE(j.messages, 5u) << "node " << j.id;
        EXPECT_GE(j.per_type[static_cast<std::size_t>(MessageType::JoinReply)], 1u);
    }
}

// Scripted churn on a ten-node overlay, checked against a hand-kept model.
TEST(System, ChurnMicroTrace)
{
    System s;
    s.init(small(10, 0));
    // key -> holder: 30 -> 3, 58 -> 5, 59 -> 5, 139 -> 10
    const LoadReport r = s.churn_keys({30, 58, 59, 58, 139, 30, 59});
    std::vector<std::uint64_t> load;
    for (const LoadRow &row : r.rows)
    {
        load.push_back(row.load);
    }
    EXPECT_EQ(load, (std::vector<std::uint64_t>{0, 0, 0, 0, 0, 0, 0, 0, 0, 1}));
    EXPECT_TRUE(r.rows[4].marked);  // node 5 emptied by a delete
    EXPECT_FALSE(r.rows[2].marked); // introducers stay unmarked
    EXPECT_EQ(r.total(), 1u);
    EXPECT_EQ(r.min, 0u);
    EXPECT_EQ(r.max, 1u);
    EXPECT_DOUBLE_EQ(r.mean, 0.1);
    EXPECT_NEAR(r.stddev, 0.3, 1e-12);
}

TEST(System, KeyConservation)
{
    System s;
    s.init(small(300, 1500, 2));
    std::set<Key> model;
    for (NodeId id = 1; id <= s.node_count(); ++id)
    {
        model.insert(s.node(id).store.begin(), s.node(id).store.end());
    }
    Rng rng(77);
    for (int i = 0; i < 2000; ++i)
    {
        const Key k = rng.below(300 * 14);
        const auto op = static_cast<MessageType>(1 + rng.below(3));
        const OpOutcome o = s.do_op(op, k, 1 + static_cast<NodeId>(rng.below(300)));
        EXPECT_EQ(o.holder, k / 14 + 1);
        if (op == MessageType::Insert)
        {
            EXPECT_EQ(o.outcome, model.insert(k).second ? OpStatus::Inserted : OpStatus::Duplicate);
        }
        else if (op == MessageType::Delete)
        {
            EXPECT_EQ(o.outcome, model.erase(k) ? OpStatus::Deleted : OpStatus::NotFound);
        }
        else
        {
            EXPECT_EQ(o.outcome, model.contains(k) ? OpStatus::Found : OpStatus::NotFound);
        }
    }
    EXPECT_EQ(stored_keys(s), model.size());
    EXPECT_EQ(s.network().buffered(), 0u);
    EXPECT_TRUE(s.errors().empty());
}

TEST(System, ExperimentSummary)
{
    System s;
    s.init(small(500, 2000, 5));
    ExperimentConfig e;
    e.trials = 200;
    e.origin = OriginPolicy::Fixed;
    e.fixed_origin = 7;
    const ExperimentResult r = s.run_experiment(e);
    ASSERT_EQ(r.trials.size(), 200u);
    std::uint64_t hist_total = 0;
    double sum = 0;
    for (std::uint64_t c : r.histogram)
    {
        hist_total += c;
    }
    for (const TrialRow &t : r.trials)
    {
        EXPECT_EQ(t.origin, 7u);
        sum += t.hops;
    }
    EXPECT_EQ(hist_total, 200u);
    EXPECT_DOUBLE_EQ(r.mean_hops, sum / 200);
    EXPECT_LE(r.p50_hops, r.p90_hops);
    EXPECT_LE(r.p99_hops, r.max_hops);
    EXPECT_EQ(r.histogram.size(), r.max_hops + 1u);
    EXPECT_EQ(r.messages[static_cast<std::size_t>(MessageType::Search)], 200 + static_cast<std::uint64_t>(sum));
    EXPECT_EQ(r.messages[static_cast<std::size_t>(MessageType::OpReply)], 200u);
}

TEST(System, Percentile)
{
    const std::vector<std::uint32_t> v{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    EXPECT_EQ(percentile(v, 50), 5u);
    EXPECT_EQ(percentile(v, 90), 9u);
    EXPECT_EQ(percentile(v, 99), 10u);
    EXPECT_EQ(percentile({}, 50), 0u);
}

TEST(System, ReorgAdvisoryFiresOnce)
{
    System s;
    std::vector<SystemEvent> reorgs;
    s.set_event_sink([&](const SystemEvent &e) {
        if (e.kind == SystemEvent::Kind::Reorg)
        {
            reorgs.push_back(e);
        }
    });
    s.init(small(10, 0));
    s.do_op(MessageType::Insert, 60, 1);
    EXPECT_TRUE(reorgs.empty());
    s.do_op(MessageType::Delete, 60, 1);
    ASSERT_EQ(reorgs.size(), 1u);
    EXPECT_EQ(reorgs[0].done, 1u);
    EXPECT_EQ(reorgs[0].total, 10u);
    s.do_op(MessageType::Search, 60, 2);
    EXPECT_EQ(reorgs.size(), 1u);
    s.do_op(MessageType::Insert, 60, 1);
    s.do_op(MessageType::Delete, 60, 1);
    EXPECT_EQ(reorgs.size(), 2u);
}

TEST(System, ProgressEvents)
{
    System s;
    std::vector<SystemEvent> prog;
    s.set_event_sink([&](const SystemEvent &e) {
        if (e.kind == SystemEvent::Kind::Progress)
        {
            prog.push_back(e);
        }
    });
    s.init(small(203, 57));
    ASSERT_FALSE(prog.empty());
    EXPECT_EQ(prog.front().text, "join");
    EXPECT_EQ(prog.back().text, "load");
    EXPECT_EQ(prog.back().done, 57u);
    std::uint64_t last_join = 0;
    for (const SystemEvent &e : prog)
    {
        if (e.text == "join")
        {
            EXPECT_GT(e.done, last_join);
            last_join = e.done;
        }
    }
    EXPECT_EQ(last_join, 200u);
}
