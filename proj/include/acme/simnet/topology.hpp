#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace acme::simnet {

enum class LinkClass : std::uint8_t { kStubStub, kStubTransit, kTransitTransit };

std::string_view to_string(LinkClass c);
/// 100 Mb/s, 1.5 Mb/s and 45 Mb/s.
double bandwidth_bps(LinkClass c);

struct TopologyParams {
    int transit_domains = 3;
    int transit_per_domain = 6;
    int transit_jitter = 1;  ///< domain size drawn from per_domain +- jitter
    int hosts_per_stub = 4;
    int min_stub_hosts = 512;
    double rtt_median_ms = 70.0;  ///< calibration target for stub-to-stub round trips
    double extra_edge_prob = 0.3;
};

struct TopoNode {
    bool transit = false;
    int domain = -1;  ///< transit domain, or the stub's transit domain
    int stub = -1;    ///< stub domain index, -1 for transit nodes
};

struct Link {
    int a = 0;
    int b = 0;
    LinkClass cls = LinkClass::kStubStub;
    double latency_ms = 0.0;
    double bandwidth_bps = 0.0;
};

/// Transit-stub graph with shortest-latency routing tables.
class SimTopology {
public:
    SimTopology(std::vector<TopoNode> nodes, std::vector<Link> links);

    const std::vector<TopoNode>& nodes() const { return nodes_; }
    const std::vector<Link>& links() const { return links_; }
    std::size_t transit_count() const;
    /// Stub hosts in generation order.
    const std::vector<int>& stub_hosts() const { return stub_hosts_; }

    /// Link index and direction (0: a->b, 1: b->a) of the first hop from src toward dst.
    struct Hop {
        int link = -1;
        int next = -1;
        int direction = 0;
    };
    Hop next_hop(int src, int dst) const;
    /// One-way propagation latency along the routed path.
    double path_latency(int src, int dst) const { return dist_[index(src, dst)]; }
    std::vector<int> path_links(int src, int dst) const;

    /// Scales every link latency and recomputes routes.
    void scale_latency(double factor);
    bool connected() const;

    /// Median round trip over all ordered stub-host pairs.
    double stub_rtt_median() const;

private:
    std::size_t index(int a, int b) const { return static_cast<std::size_t>(a) * nodes_.size() + b; }
    void compute_routes();

    std::vector<TopoNode> nodes_;
    std::vector<Link> links_;
    std::vector<std::vector<std::pair<int, int>>> adj_;  ///< (neighbor, link)
    std::vector<int> stub_hosts_;
    std::vector<double> dist_;
    std::vector<std::int32_t> first_link_;
};

/// Deterministic for a seed. Latencies are scaled so the median stub RTT
/// matches params.rtt_median_ms.
SimTopology generate_topology(std::uint64_t seed, const TopologyParams& params = {});

}  // namespace acme::simnet
