#include "acme/simnet/experiments.hpp"
#include "acme/simnet/network.hpp"
#include "acme/simnet/simulator.hpp"
#include "acme/simnet/topology.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace acme;
using namespace acme::simnet;

TEST(Simulator, OrdersByTimeThenInsertion) {
    Simulator sim;
    std::vector<int> order;
    sim.at(5, [&] { order.push_back(1); });
    sim.at(1, [&] { order.push_back(2); });
    sim.at(5, [&] { order.push_back(3); });
    auto id = sim.at(3, [&] { order.push_back(4); });
    sim.at(1, [&] {
        order.push_back(5);
        sim.after(0, [&] { order.push_back(6); });
    });
    sim.cancel(id);
    sim.run();
    EXPECT_EQ(order, (std::vector<int>{2, 5, 6, 1, 3}));
    EXPECT_EQ(sim.now(), 5);
}

TEST(Simulator, RunUntilAdvancesClock) {
    Simulator sim;
    int ran = 0;
    sim.at(10, [&] { ++ran; });
    sim.at(20, [&] { ++ran; });
    sim.run_until(15);
    EXPECT_EQ(ran, 1);
    EXPECT_EQ(sim.now(), 15);
    EXPECT_EQ(sim.pending(), 1u);
    EXPECT_TRUE(sim.run_while_not([&] { return ran == 2; }, 100));
}

namespace {

SimTopology two_transit(double latency_ms) {
    std::vector<TopoNode> nodes{{true, 0, -1}, {true, 0, -1}};
    std::vector<Link> links{{0, 1, LinkClass::kTransitTransit, latency_ms, bandwidth_bps(LinkClass::kTransitTransit)}};
    return SimTopology(nodes, links);
}

}  // namespace

TEST(Network, SingleLinkArithmetic) {
    auto topo = two_transit(10.0);
    Simulator sim;
    SimNetwork net(sim, topo);
    double arrived = -1;
    net.send(0, 1, 450, [&] { arrived = sim.now(); });
    sim.run();
    EXPECT_NEAR(arrived, 10.08, 1e-9);
    EXPECT_EQ(net.wire_bytes(), 450u);
}

TEST(Network, BackToBackMessagesQueue) {
    std::vector<TopoNode> nodes{{true, 0, -1}, {false, 0, 0}};
    std::vector<Link> links{{0, 1, LinkClass::kStubTransit, 5.0, bandwidth_bps(LinkClass::kStubTransit)}};
    SimTopology topo(nodes, links);
    Simulator sim;
    SimNetwork net(sim, topo);
    std::vector<double> at;
    net.send(1, 0, 1000, [&] { at.push_back(sim.now()); });
    net.send(1, 0, 1000, [&] { at.push_back(sim.now()); });
    sim.run();
    const double service = 1000 * 8 / 1.5e6 * 1000.0;
    ASSERT_EQ(at.size(), 2u);
    EXPECT_NEAR(at[0], service + 5.0, 1e-9);
    EXPECT_NEAR(at[1] - at[0], service, 1e-9);
}

TEST(Network, ConvergingResponsesDrainThroughRootUplink) {
    constexpr int kSenders = 511;
    std::vector<TopoNode> nodes{{true, 0, -1}, {false, 0, 0}};
    std::vector<Link> links{{0, 1, LinkClass::kStubTransit, 20.0, bandwidth_bps(LinkClass::kStubTransit)}};
    for (int i = 0; i < kSenders; ++i) {
        nodes.push_back({false, 0, i + 1});
        links.push_back({0, i + 2, LinkClass::kStubTransit, 30.0, bandwidth_bps(LinkClass::kStubTransit)});
    }
    SimTopology topo(nodes, links);
    Simulator sim;
    SimNetwork net(sim, topo);
    double last = 0;
    for (int i = 0; i < kSenders; ++i) net.send(i + 2, 1, 100, [&] { last = sim.now(); });
    sim.run();
    const double service = 100 * 8 / 1.5e6 * 1000.0;
    const double oracle = service + 30.0 + kSenders * service + 20.0;
    EXPECT_NEAR(last, oracle, 1e-6);
    EXPECT_EQ(net.wire_bytes(), 2u * 100u * kSenders);
}

TEST(Network, BytesConservedOverPaths) {
    auto topo = generate_topology(3);
    Simulator sim;
    SimNetwork net(sim, topo);
    std::mt19937_64 rng(9);
    const auto& hosts = topo.stub_hosts();
    std::uint64_t expected = 0;
    for (int i = 0; i < 200; ++i) {
        int a = hosts[rng() % hosts.size()], b = hosts[rng() % hosts.size()];
        std::uint32_t size = 50 + rng() % 500;
        expected += static_cast<std::uint64_t>(size) * topo.path_links(a, b).size();
        net.send(a, b, size, [] {});
    }
    sim.run();
    EXPECT_EQ(net.wire_bytes(), expected);
}

TEST(Topology, DeterministicForSeed) {
    auto a = generate_topology(8);
    auto b = generate_topology(8);
    ASSERT_EQ(a.links().size(), b.links().size());
    for (std::size_t i = 0; i < a.links().size(); ++i) {
        EXPECT_EQ(a.links()[i].a, b.links()[i].a);
        EXPECT_EQ(a.links()[i].latency_ms, b.links()[i].latency_ms);
    }
    auto c = generate_topology(9);
    bool differs = c.links().size() != a.links().size();
    for (std::size_t i = 0; !differs && i < a.links().size(); ++i) differs = c.links()[i].latency_ms != a.links()[i].latency_ms;
    EXPECT_TRUE(differs);
}

TEST(Topology, MatchesTransitStubShape) {
    for (std::uint64_t seed : {1, 2, 3}) {
        auto t = generate_topology(seed);
        EXPECT_TRUE(t.connected());
        EXPECT_GE(t.transit_count(), 15u);
        EXPECT_LE(t.transit_count(), 21u);
        EXPECT_GE(t.stub_hosts().size(), 512u);
        std::set<double> bandwidths;
        for (const auto& l : t.links()) {
            EXPECT_EQ(l.bandwidth_bps, bandwidth_bps(l.cls));
            bandwidths.insert(l.bandwidth_bps);
        }
        EXPECT_EQ(bandwidths, (std::set<double>{100e6, 1.5e6, 45e6}));
        const double median = t.stub_rtt_median();
        EXPECT_GT(median, 35.0);
        EXPECT_LT(median, 140.0);
    }
}

TEST(Experiments, BytesForOneNodeIsOneMessage) {
    ExperimentSetup setup;
    GridParams grid;
    grid.sizes = {1};
    auto rows = run_bytes_experiment(setup, grid);
    ASSERT_EQ(rows.size(), 4u);
    for (const auto& r : rows) EXPECT_EQ(r.bytes, setup.cluster.message_size);
}

TEST(Experiments, NoLossMeansFullCounts) {
    ExperimentSetup setup;
    LossParams p;
    p.n = 64;
    p.p_list = {0.0};
    p.queries = 20;
    auto r = run_loss_experiment(setup, p);
    ASSERT_EQ(r.rows.size(), 1u);
    EXPECT_EQ(r.rows[0].lossy, 0);
    for (const auto& raw : r.raw) EXPECT_EQ(raw.count, 64u);
}

TEST(Experiments, LossyFractionRisesWithP) {
    ExperimentSetup setup;
    LossParams p;
    p.n = 128;
    p.p_list = {0.001, 0.01};
    p.queries = 100;
    auto r = run_loss_experiment(setup, p);
    EXPECT_LT(r.rows[0].lossy_fraction, r.rows[1].lossy_fraction);
    EXPECT_NEAR(r.rows[1].expected_fraction, 1 - std::pow(0.99, 128), 1e-12);
}

TEST(Experiments, LatencyGridIsDeterministic) {
    ExperimentSetup setup;
    setup.seed = 5;
    GridParams grid;
    grid.sizes = {16, 32};
    grid.repetitions = 2;
    auto a = format_latency_csv(run_latency_experiment(setup, grid));
    auto b = format_latency_csv(run_latency_experiment(setup, grid));
    EXPECT_EQ(a, b);
    setup.seed = 6;
    EXPECT_NE(a, format_latency_csv(run_latency_experiment(setup, grid)));
}

TEST(Experiments, SameRootAcrossSizes) {
    auto topo = generate_topology(1);
    EXPECT_EQ(first_hosts(topo, 1, 64)[0], first_hosts(topo, 1, 512)[0]);
    EXPECT_THROW(first_hosts(topo, 1, 0), std::invalid_argument);
}
