#include "acme/simnet/experiments.hpp"

#include "acme/common/rng.hpp"
#include "acme/ising/query.hpp"
#include "acme/simnet/network.hpp"
#include "acme/simnet/simulator.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <random>
#include <stdexcept>

namespace acme::simnet {

namespace {

ising::SensorQuery value_query(ising::AggregateOp op) {
    ising::SensorQuery q;
    q.port = kValuePort;
    q.sensor = kValueSensor;
    q.op = op;
    return q;
}

double avg_depth_of(SimCluster& c, qtree::TopologyKind kind) {
    const auto& tree = c.membership().tree(c.node(0).id(), kind);
    return qtree::tree_stats(tree).avg_depth;
}

}  // namespace

SimDeployment::SimDeployment(const SimTopology& topo, const std::vector<int>& hosts, ClusterParams params)
    : network(sim, topo), cluster(network, hosts, params) {
    cluster.node(0).ising().start_root();
    sim.run();
    cluster.reset_counters();
}

std::vector<int> first_hosts(const SimTopology& topo, std::uint64_t seed, std::size_t n) {
    auto order = host_order(topo, seed);
    if (n == 0 || n > order.size()) {
        throw std::invalid_argument(fmt::format("cluster size {} outside 1..{}", n, order.size()));
    }
    order.resize(n);
    return order;
}

std::vector<int> host_order(const SimTopology& topo, std::uint64_t seed) {
    auto hosts = topo.stub_hosts();
    std::mt19937_64 rng(derive_seed(seed, 0x686f737473ULL));
    std::shuffle(hosts.begin(), hosts.end(), rng);
    return hosts;
}

void install_values(SimCluster& cluster, const std::vector<double>& values) {
    if (values.size() < cluster.size()) throw std::invalid_argument("fewer values than nodes");
    for (std::size_t i = 0; i < cluster.size(); ++i) {
        auto& node = cluster.node(i);
        const auto text = ising::format_number(values[i]);
        auto& server = node.server(kValuePort);
        server.replace(kValueSensor, [text](const sensact::SensorRequest&) { return text + "\n"; });
    }
}

std::vector<double> node_values(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(derive_seed(seed, 0x76616c756573ULL));
    std::uniform_int_distribution<int> d(0, 99999);
    std::vector<double> out(n);
    for (auto& v : out) v = d(rng) / 100.0;
    return out;
}

std::vector<LatencyRow> run_latency_experiment(const ExperimentSetup& setup, const GridParams& grid) {
    const auto topo = generate_topology(setup.seed, setup.topology);
    std::vector<LatencyRow> rows;
    for (auto n : grid.sizes) {
        const auto hosts = first_hosts(topo, setup.seed, n);
        for (auto kind : grid.kinds) {
            auto params = setup.cluster;
            params.ising.kind = kind;
            SimDeployment d(topo, hosts, params);
            const double depth = avg_depth_of(d.cluster, kind);
            for (auto op : grid.ops) {
                for (int rep = 0; rep < grid.repetitions; ++rep) {
                    install_values(d.cluster, node_values(n, derive_seed(setup.seed, static_cast<std::uint64_t>(rep))));
                    d.cluster.reset_counters();
                    const auto out = run_snapshot(d.cluster, value_query(op));
                    if (!out.completed) {
                        throw std::runtime_error(fmt::format("query did not complete (n={}, {}, {})", n,
                                                             qtree::to_string(kind), ising::to_string(op)));
                    }
                    LatencyRow row;
                    row.n = n;
                    row.kind = kind;
                    row.op = op;
                    row.repetition = rep;
                    row.latency_ms = out.latency_ms;
                    row.bytes = d.cluster.up_bytes() +
                                out.result.tuples.size() * static_cast<std::uint64_t>(params.message_size);
                    row.wire_bytes = d.network.wire_bytes();
                    row.contributors = out.result.contributors;
                    row.avg_depth = depth;
                    row.result = out.result.tuples.empty() ? std::string() : out.result.tuples.front().data;
                    rows.push_back(std::move(row));
                }
            }
        }
    }
    return rows;
}

std::vector<BytesRow> run_bytes_experiment(const ExperimentSetup& setup, GridParams grid) {
    grid.repetitions = 1;
    std::vector<BytesRow> out;
    for (const auto& r : run_latency_experiment(setup, grid)) {
        out.push_back(BytesRow{r.n, r.kind, r.op, r.bytes, r.wire_bytes, r.avg_depth});
    }
    return out;
}

LossResult run_loss_experiment(const ExperimentSetup& setup, const LossParams& params) {
    const auto topo = generate_topology(setup.seed, setup.topology);
    const auto hosts = first_hosts(topo, setup.seed, params.n);
    LossResult result;
    for (auto p : params.p_list) {
        auto cp = setup.cluster;
        cp.ising.kind = params.kind;
        SimDeployment d(topo, hosts, cp);
        install_values(d.cluster, node_values(params.n, setup.seed));
        for (std::size_t i = 0; i < d.cluster.size(); ++i) {
            d.cluster.node(i).qtree().set_up_loss(p, derive_seed(setup.seed, 0x6c6f7373ULL + i));
        }
        LossRow row;
        row.p = p;
        row.queries = params.queries;
        row.expected_fraction = 1.0 - std::pow(1.0 - p, static_cast<double>(params.n));
        row.avg_depth = avg_depth_of(d.cluster, params.kind);
        double lost_total = 0.0;
        for (int q = 0; q < params.queries; ++q) {
            const auto out = run_snapshot(d.cluster, value_query(ising::AggregateOp::kCount));
            std::uint64_t count = 0;
            if (out.completed && !out.result.tuples.empty()) {
                count = static_cast<std::uint64_t>(ising::parse_number(out.result.tuples.front().data).value_or(0));
            }
            result.raw.push_back(LossRaw{p, q, count});
            if (count < params.n) {
                ++row.lossy;
                lost_total += static_cast<double>(params.n - count);
            }
        }
        row.lossy_fraction = static_cast<double>(row.lossy) / params.queries;
        row.mean_nodes_lost = row.lossy ? lost_total / row.lossy : 0.0;
        result.rows.push_back(row);
    }
    return result;
}

std::vector<TreeRow> run_tree_experiment(const TopologyParams& topo_params, std::size_t n, std::size_t digits,
                                         const std::vector<std::uint64_t>& seeds) {
    std::vector<TreeRow> rows;
    for (auto seed : seeds) {
        const auto topo = generate_topology(seed, topo_params);
        const auto hosts = first_hosts(topo, seed, n);
        std::vector<qtree::NodeId> ids;
        std::map<qtree::NodeId, int> where;
        for (auto h : hosts) {
            auto id = qtree::node_id_from_name("h" + std::to_string(h), digits);
            where.emplace(id, h);
            ids.push_back(std::move(id));
        }
        auto latency = [&](const qtree::NodeId& a, const qtree::NodeId& b) {
            return topo.path_latency(where.at(a), where.at(b));
        };
        const auto tree = qtree::build_tree(ids, ids.front(), qtree::TopologyKind::kTtree, latency);
        const auto stats = qtree::tree_stats(tree);
        rows.push_back(TreeRow{seed, n, stats.avg_depth, stats.max_depth, tree.children(tree.root()).size()});
    }
    return rows;
}

std::string format_latency_csv(const std::vector<LatencyRow>& rows) {
    std::string out = "n,topology,op,rep,latency_ms,bytes,wire_bytes,contributors,avg_depth,result\n";
    for (const auto& r : rows) {
        out += fmt::format("{},{},{},{},{:.3f},{},{},{},{:.4f},{}\n", r.n, qtree::to_string(r.kind),
                           ising::to_string(r.op), r.repetition, r.latency_ms, r.bytes, r.wire_bytes,
                           r.contributors, r.avg_depth, r.result);
    }
    return out;
}

std::string format_bytes_csv(const std::vector<BytesRow>& rows) {
    std::string out = "n,topology,op,bytes,wire_bytes,avg_depth\n";
    for (const auto& r : rows) {
        out += fmt::format("{},{},{},{},{},{:.4f}\n", r.n, qtree::to_string(r.kind), ising::to_string(r.op),
                           r.bytes, r.wire_bytes, r.avg_depth);
    }
    return out;
}

std::string format_loss_csv(const std::vector<LossRow>& rows) {
    std::string out = "p,queries,lossy,lossy_fraction,expected_fraction,mean_nodes_lost,avg_depth\n";
    for (const auto& r : rows) {
        out += fmt::format("{},{},{},{:.4f},{:.4f},{:.4f},{:.4f}\n", ising::format_number(r.p), r.queries,
                           r.lossy, r.lossy_fraction, r.expected_fraction, r.mean_nodes_lost, r.avg_depth);
    }
    return out;
}

std::string format_loss_raw_csv(const std::vector<LossRaw>& rows) {
    std::string out = "p,query,count\n";
    for (const auto& r : rows) out += fmt::format("{},{},{}\n", ising::format_number(r.p), r.query, r.count);
    return out;
}

std::string format_tree_csv(const std::vector<TreeRow>& rows) {
    std::string out = "seed,n,avg_depth,max_depth,root_children\n";
    for (const auto& r : rows) {
        out += fmt::format("{},{},{:.4f},{},{}\n", r.seed, r.n, r.avg_depth, r.max_depth, r.root_children);
    }
    return out;
}

}  // namespace acme::simnet
