#pragma once

#include "acme/ising/ising_node.hpp"
#include "acme/simnet/cluster.hpp"
#include "acme/simnet/network.hpp"
#include "acme/simnet/simulator.hpp"
#include "acme/simnet/topology.hpp"

#include <memory>
#include <vector>

namespace acme::check {

/// Seven nodes with an installed tree four levels deep:
///
///   0 - 1 - 2 - 3        (2 and 3 are the delayed subtree)
///   |   `-4
///   `-5 - 6
///
/// Deadlines use max_depth 4, compute 100 ms, latency 400 ms.
struct ChainFixture {
    simnet::SimTopology topo;
    simnet::Simulator sim;
    simnet::SimNetwork network;
    simnet::SimCluster cluster;

    explicit ChainFixture(std::uint64_t seed = 1);

    /// Runs a continuous COUNT for `epochs` epochs of `epoch_ms`; node 2's
    /// sensor is delayed by `delay_ms` during the first epoch only.
    std::vector<ising::EpochResult> run_count(double delay_ms, int epochs = 3, std::int64_t epoch_ms = 5000);

    static constexpr std::size_t kDelayed = 2;
    static constexpr std::size_t kDelayedSubtree = 2;
};

}  // namespace acme::check
