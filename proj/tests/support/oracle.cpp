#include "oracle.hpp"

#include "acme/simnet/cluster.hpp"
#include "acme/simnet/experiments.hpp"

#include <fmt/core.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace acme::check {

using ising::AggregateOp;

std::string central_scalar(AggregateOp op, const std::vector<double>& values) {
    switch (op) {
        case AggregateOp::kMin: return ising::format_number(*std::min_element(values.begin(), values.end()));
        case AggregateOp::kMax: return ising::format_number(*std::max_element(values.begin(), values.end()));
        case AggregateOp::kSum: return ising::format_number(std::accumulate(values.begin(), values.end(), 0.0));
        case AggregateOp::kCount: return std::to_string(values.size());
        case AggregateOp::kAvg:
            return ising::format_number(std::accumulate(values.begin(), values.end(), 0.0) /
                                        static_cast<double>(values.size()));
        case AggregateOp::kMedian: {
            auto v = values;
            std::sort(v.begin(), v.end());
            return ising::format_number(v[(v.size() - 1) / 2]);
        }
        case AggregateOp::kValue: break;
    }
    throw std::invalid_argument("VALUE has no scalar");
}

OracleCase random_case(const simnet::SimTopology& topo, std::mt19937_64& rng, AggregateOp op, std::size_t max_n) {
    OracleCase c;
    c.op = op;
    c.kind = std::bernoulli_distribution(0.5)(rng) ? qtree::TopologyKind::kTtree : qtree::TopologyKind::kDtree;
    const auto n = std::uniform_int_distribution<std::size_t>(1, max_n)(rng);
    auto hosts = topo.stub_hosts();
    std::shuffle(hosts.begin(), hosts.end(), rng);
    c.hosts.assign(hosts.begin(), hosts.begin() + static_cast<std::ptrdiff_t>(n));
    std::uniform_int_distribution<int> whole(-100000, 100000);
    std::uniform_int_distribution<int> frac(0, 63);
    for (std::size_t i = 0; i < n; ++i) c.values.push_back(whole(rng) + frac(rng) / 64.0);
    return c;
}

OracleOutcome check_case(const simnet::SimTopology& topo, const OracleCase& c) {
    simnet::ClusterParams params;
    params.ising.kind = c.kind;
    simnet::SimDeployment d(topo, c.hosts, params);
    simnet::install_values(d.cluster, c.values);

    ising::SensorQuery q;
    q.port = simnet::kValuePort;
    q.sensor = simnet::kValueSensor;
    q.op = c.op;
    auto out = simnet::run_snapshot(d.cluster, q);
    const auto label = fmt::format("n={} {} {}", c.hosts.size(), qtree::to_string(c.kind), ising::to_string(c.op));
    if (!out.completed) return {false, label + ": no result"};
    if (out.result.contributors != c.hosts.size()) {
        return {false, fmt::format("{}: contributors {} != {}", label, out.result.contributors, c.hosts.size())};
    }

    if (c.op == AggregateOp::kValue) {
        std::vector<std::pair<std::string, std::string>> got, want;
        for (const auto& t : out.result.tuples) got.emplace_back(t.source, t.data);
        for (std::size_t i = 0; i < c.hosts.size(); ++i) {
            want.emplace_back(d.cluster.node(i).name() + ":" + std::to_string(simnet::kValuePort),
                              ising::format_number(c.values[i]));
        }
        std::sort(got.begin(), got.end());
        std::sort(want.begin(), want.end());
        if (got != want) return {false, fmt::format("{}: {} tuples, want {}", label, got.size(), want.size())};
        return {true, label};
    }

    if (out.result.tuples.size() != 1) return {false, fmt::format("{}: {} tuples", label, out.result.tuples.size())};
    const auto& got = out.result.tuples.front().data;
    const auto want = central_scalar(c.op, c.values);
    if (c.op == AggregateOp::kAvg) {
        const double g = std::stod(got), w = std::stod(want);
        const double rel = w == 0.0 ? std::abs(g) : std::abs(g - w) / std::abs(w);
        if (rel > 1e-9) return {false, fmt::format("{}: {} vs {} (rel {:.3g})", label, got, want, rel)};
        return {true, label};
    }
    if (got != want) return {false, fmt::format("{}: {} vs {}", label, got, want)};
    return {true, label};
}

}  // namespace acme::check
