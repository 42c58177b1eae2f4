#include "chain.hpp"

#include "acme/simnet/experiments.hpp"

namespace acme::check {

namespace {

simnet::ClusterParams chain_params() {
    simnet::ClusterParams p;
    p.ising.max_depth = 4;
    p.ising.compute_max_ms = 100;
    p.ising.latency_max_ms = 400;
    return p;
}

std::vector<int> seven_hosts(const simnet::SimTopology& topo) {
    const auto& h = topo.stub_hosts();
    return {h[0], h[5], h[40], h[80], h[120], h[200], h[300]};
}

}  // namespace

ChainFixture::ChainFixture(std::uint64_t seed)
    : topo(simnet::generate_topology(seed)), network(sim, topo), cluster(network, seven_hosts(topo), chain_params()) {
    auto id = [&](std::size_t i) { return cluster.node(i).id(); };
    cluster.shared_membership()->install(qtree::TreeStructure::from_parents(
        id(0), qtree::TopologyKind::kTtree,
        {{id(1), id(0)}, {id(2), id(1)}, {id(3), id(2)}, {id(4), id(1)}, {id(5), id(0)}, {id(6), id(5)}}));
    cluster.node(0).ising().start_root();
    sim.run();
    simnet::install_values(cluster, std::vector<double>(cluster.size(), 1.0));
}

std::vector<ising::EpochResult> ChainFixture::run_count(double delay_ms, int epochs, std::int64_t epoch_ms) {
    ising::SensorQuery q;
    q.port = simnet::kValuePort;
    q.sensor = simnet::kValueSensor;
    q.op = ising::AggregateOp::kCount;
    q.epoch_ms = epoch_ms;
    std::vector<ising::EpochResult> results;
    auto& delayed = cluster.node(kDelayed);
    delayed.fetch_delay_ms = delay_ms;
    auto& root = cluster.node(0).ising();
    const auto id = root.submit(q, [&](const ising::EpochResult& r) {
        results.push_back(r);
        delayed.fetch_delay_ms = 0.0;
    });
    sim.run_while_not([&] { return results.size() >= static_cast<std::size_t>(epochs); },
                      sim.now() + epoch_ms * (epochs + 2.0));
    root.cancel(id);
    sim.run_until(sim.now() + 3.0 * epoch_ms);
    return results;
}

}  // namespace acme::check
