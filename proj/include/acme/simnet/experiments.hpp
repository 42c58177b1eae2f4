#pragma once

#include "acme/ising/aggregate.hpp"
#include "acme/qtree/tree.hpp"
#include "acme/simnet/cluster.hpp"
#include "acme/simnet/network.hpp"
#include "acme/simnet/simulator.hpp"
#include "acme/simnet/topology.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace acme::simnet {

inline constexpr std::uint16_t kValuePort = 9000;
inline constexpr const char* kValueSensor = "value";

struct ExperimentSetup {
    std::uint64_t seed = 1;
    TopologyParams topology;
    ClusterParams cluster;
};

/// Stub hosts in a seeded order; experiments take a prefix so the root
/// (the first host) is the same for every size.
std::vector<int> host_order(const SimTopology& topo, std::uint64_t seed);

/// The first n hosts of host_order.
std::vector<int> first_hosts(const SimTopology& topo, std::uint64_t seed, std::size_t n);

/// Simulator, network and cluster with node 0's ISING tree announced and
/// traffic counters cleared.
struct SimDeployment {
    Simulator sim;
    SimNetwork network;
    SimCluster cluster;

    SimDeployment(const SimTopology& topo, const std::vector<int>& hosts, ClusterParams params);
};

/// Registers the internal `value` sensor on every node: node i reports values[i].
void install_values(SimCluster& cluster, const std::vector<double>& values);

/// Deterministic per-node values for a seed.
std::vector<double> node_values(std::size_t n, std::uint64_t seed);

struct GridParams {
    std::vector<std::size_t> sizes{64, 128, 256, 384, 512};
    std::vector<qtree::TopologyKind> kinds{qtree::TopologyKind::kDtree, qtree::TopologyKind::kTtree};
    std::vector<ising::AggregateOp> ops{ising::AggregateOp::kMin, ising::AggregateOp::kMedian};
    int repetitions = 11;
};

struct LatencyRow {
    std::size_t n = 0;
    qtree::TopologyKind kind = qtree::TopologyKind::kTtree;
    ising::AggregateOp op = ising::AggregateOp::kMin;
    int repetition = 0;
    double latency_ms = 0.0;
    std::uint64_t bytes = 0;       ///< up traffic plus the root's response
    std::uint64_t wire_bytes = 0;  ///< every physical link traversal, both directions
    std::uint32_t contributors = 0;
    double avg_depth = 0.0;
    std::string result;
};

std::vector<LatencyRow> run_latency_experiment(const ExperimentSetup& setup, const GridParams& grid);

struct BytesRow {
    std::size_t n = 0;
    qtree::TopologyKind kind = qtree::TopologyKind::kTtree;
    ising::AggregateOp op = ising::AggregateOp::kMin;
    std::uint64_t bytes = 0;
    std::uint64_t wire_bytes = 0;
    double avg_depth = 0.0;
};

/// One query per cell; byte counts do not vary across repetitions.
std::vector<BytesRow> run_bytes_experiment(const ExperimentSetup& setup, GridParams grid);

struct LossParams {
    std::size_t n = 512;
    std::vector<double> p_list{0.0001, 0.0005, 0.0010, 0.0015};
    int queries = 1000;
    qtree::TopologyKind kind = qtree::TopologyKind::kTtree;
};

struct LossRow {
    double p = 0.0;
    int queries = 0;
    int lossy = 0;
    double lossy_fraction = 0.0;
    double expected_fraction = 0.0;  ///< 1 - (1-p)^(n-1)
    double mean_nodes_lost = 0.0;    ///< over lossy responses
    double avg_depth = 0.0;
};

struct LossRaw {
    double p = 0.0;
    int query = 0;
    std::uint64_t count = 0;
};

struct LossResult {
    std::vector<LossRow> rows;
    std::vector<LossRaw> raw;
};

/// COUNT queries under per-node upward loss. Each node's loss stream is
/// seeded identically for every p, so the drop sets nest as p grows.
LossResult run_loss_experiment(const ExperimentSetup& setup, const LossParams& params);

struct TreeRow {
    std::uint64_t seed = 0;
    std::size_t n = 0;
    double avg_depth = 0.0;
    std::size_t max_depth = 0;
    std::size_t root_children = 0;
};

/// TTREE shape over the first n hosts for each seed.
std::vector<TreeRow> run_tree_experiment(const TopologyParams& topo, std::size_t n, std::size_t digits,
                                         const std::vector<std::uint64_t>& seeds);

std::string format_latency_csv(const std::vector<LatencyRow>& rows);
std::string format_bytes_csv(const std::vector<BytesRow>& rows);
std::string format_loss_csv(const std::vector<LossRow>& rows);
std::string format_loss_raw_csv(const std::vector<LossRaw>& rows);
std::string format_tree_csv(const std::vector<TreeRow>& rows);

}  // namespace acme::simnet
