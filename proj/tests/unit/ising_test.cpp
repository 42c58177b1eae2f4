#include "acme/simnet/cluster.hpp"
#include "acme/simnet/experiments.hpp"

#include "chain.hpp"
#include "oracle.hpp"

#include <gtest/gtest.h>

using namespace acme;
using ising::AggregateOp;

namespace {

const simnet::SimTopology& topology() {
    static const auto topo = simnet::generate_topology(11);
    return topo;
}

ising::SensorQuery value_query(AggregateOp op) {
    ising::SensorQuery q;
    q.port = simnet::kValuePort;
    q.sensor = simnet::kValueSensor;
    q.op = op;
    return q;
}

}  // namespace

TEST(IsingOracle, RandomCasesMatchCentral) {
    std::mt19937_64 rng(77);
    for (auto op : {AggregateOp::kMin, AggregateOp::kMax, AggregateOp::kAvg, AggregateOp::kMedian, AggregateOp::kSum,
                    AggregateOp::kCount, AggregateOp::kValue}) {
        for (int i = 0; i < 4; ++i) {
            auto c = check::random_case(topology(), rng, op, 40);
            auto r = check::check_case(topology(), c);
            EXPECT_TRUE(r.match) << r.detail;
        }
    }
}

TEST(IsingOracle, SingleNodeAndStar) {
    for (auto kind : {qtree::TopologyKind::kDtree, qtree::TopologyKind::kTtree}) {
        check::OracleCase c;
        c.kind = kind;
        c.op = AggregateOp::kMedian;
        c.hosts = {topology().stub_hosts()[3]};
        c.values = {42.5};
        EXPECT_TRUE(check::check_case(topology(), c).match);
    }
}

TEST(Ising, SingleNodeLatencyIsLocalOnly) {
    simnet::SimDeployment d(topology(), {topology().stub_hosts()[0]}, {});
    simnet::install_values(d.cluster, {5});
    auto out = simnet::run_snapshot(d.cluster, value_query(AggregateOp::kMin));
    ASSERT_TRUE(out.completed);
    EXPECT_LT(out.latency_ms, 1.0);
    EXPECT_EQ(d.cluster.up_bytes(), 0u);
}

TEST(Ising, DirectHostQueryTouchesOneNode) {
    auto hosts = simnet::first_hosts(topology(), 1, 20);
    simnet::SimDeployment d(topology(), hosts, {});
    simnet::install_values(d.cluster, simnet::node_values(20, 1));
    auto q = value_query(AggregateOp::kValue);
    q.host = d.cluster.node(7).name();
    auto out = simnet::run_snapshot(d.cluster, q);
    ASSERT_TRUE(out.completed);
    ASSERT_EQ(out.result.tuples.size(), 1u);
    EXPECT_EQ(out.result.tuples[0].source, d.cluster.node(7).name() + ":9000");
    EXPECT_EQ(d.cluster.down_bytes(), 0u);
}

TEST(Ising, PredicateGatesContributors) {
    auto hosts = simnet::first_hosts(topology(), 2, 30);
    simnet::SimDeployment d(topology(), hosts, {});
    std::vector<double> values(30);
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = static_cast<double>(i);
    simnet::install_values(d.cluster, values);
    auto q = value_query(AggregateOp::kCount);
    q.predicate = ising::parse_predicate("9000:value >= 10");
    auto out = simnet::run_snapshot(d.cluster, q);
    ASSERT_TRUE(out.completed);
    ASSERT_EQ(out.result.tuples.size(), 1u);
    EXPECT_EQ(out.result.tuples[0].data, "20");
}

TEST(Ising, SelectionOverMultiRowSensor) {
    auto hosts = simnet::first_hosts(topology(), 3, 10);
    simnet::SimDeployment d(topology(), hosts, {});
    for (std::size_t i = 0; i < d.cluster.size(); ++i) {
        d.cluster.node(i).server(9300).add("procs", [](const sensact::SensorRequest&) {
            return std::string("httpd,2\nsshd,1\nhttpd,3\n");
        });
    }
    ising::SensorQuery q;
    q.port = 9300;
    q.sensor = "procs";
    q.op = AggregateOp::kSum;
    q.selection = ising::Selection{1, "httpd", 2};
    auto out = simnet::run_snapshot(d.cluster, q);
    ASSERT_TRUE(out.completed);
    EXPECT_EQ(out.result.tuples.at(0).data, "50");
}

TEST(Ising, ContinuousQueryEmitsEveryEpoch) {
    check::ChainFixture f;
    auto results = f.run_count(0.0, 3);
    ASSERT_EQ(results.size(), 3u);
    for (std::size_t i = 0; i < results.size(); ++i) {
        EXPECT_EQ(results[i].epoch, i);
        EXPECT_EQ(results[i].tuples.at(0).data, "7");
        EXPECT_EQ(results[i].contributors, 7u);
    }
}

TEST(Ising, LateSubtreeIsDroppedNotDoubleCounted) {
    check::ChainFixture f;
    auto results = f.run_count(3000.0, 3);
    ASSERT_EQ(results.size(), 3u);
    EXPECT_EQ(results[0].contributors, 7u - check::ChainFixture::kDelayedSubtree);
    EXPECT_EQ(results[0].tuples.at(0).data, "5");
    EXPECT_EQ(results[1].contributors, 7u);
    EXPECT_EQ(results[1].tuples.at(0).data, "7");
    EXPECT_EQ(results[2].tuples.at(0).data, "7");
    EXPECT_GE(f.cluster.node(1).ising().counters().late_discarded, 1u);
}

TEST(Ising, DelayWithinDeadlineIsTolerated) {
    check::ChainFixture f;
    auto results = f.run_count(300.0, 2);
    ASSERT_EQ(results.size(), 2u);
    EXPECT_EQ(results[0].contributors, 7u);
}

TEST(Ising, CancelStopsEpochs) {
    check::ChainFixture f;
    auto results = f.run_count(0.0, 1);
    EXPECT_EQ(results.size(), 1u);
    for (std::size_t i = 0; i < f.cluster.size(); ++i) EXPECT_TRUE(f.cluster.node(i).ising().registered().empty());
}

TEST(Ising, RootRespondFormatsLines) {
    EXPECT_EQ(ising::root_respond({{"a:1", 5, "x"}, {"b:1", 6, "y"}}), "a:1,5,x\nb:1,6,y\n");
}
