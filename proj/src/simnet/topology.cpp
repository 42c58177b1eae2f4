#include "acme/simnet/topology.hpp"

#include <algorithm>
#include <limits>
#include <queue>
#include <random>
#include <stdexcept>

namespace acme::simnet {

std::string_view to_string(LinkClass c) {
    switch (c) {
        case LinkClass::kStubStub: return "stub-stub";
        case LinkClass::kStubTransit: return "stub-transit";
        case LinkClass::kTransitTransit: return "transit-transit";
    }
    return "?";
}

double bandwidth_bps(LinkClass c) {
    switch (c) {
        case LinkClass::kStubStub: return 100e6;
        case LinkClass::kStubTransit: return 1.5e6;
        case LinkClass::kTransitTransit: return 45e6;
    }
    return 0.0;
}

SimTopology::SimTopology(std::vector<TopoNode> nodes, std::vector<Link> links)
    : nodes_(std::move(nodes)), links_(std::move(links)), adj_(nodes_.size()) {
    for (std::size_t i = 0; i < links_.size(); ++i) {
        const auto& l = links_[i];
        if (l.a < 0 || l.b < 0 || l.a >= static_cast<int>(nodes_.size()) || l.b >= static_cast<int>(nodes_.size()) ||
            l.a == l.b) {
            throw std::invalid_argument("link endpoint out of range");
        }
        adj_[l.a].emplace_back(l.b, static_cast<int>(i));
        adj_[l.b].emplace_back(l.a, static_cast<int>(i));
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (!nodes_[i].transit) stub_hosts_.push_back(static_cast<int>(i));
    }
    compute_routes();
}

std::size_t SimTopology::transit_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes_.begin(), nodes_.end(), [](const TopoNode& n) { return n.transit; }));
}

void SimTopology::compute_routes() {
    const auto n = nodes_.size();
    dist_.assign(n * n, std::numeric_limits<double>::infinity());
    first_link_.assign(n * n, -1);
    using Item = std::pair<double, int>;
    for (std::size_t s = 0; s < n; ++s) {
        std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
        double* dist = &dist_[s * n];
        std::int32_t* first = &first_link_[s * n];
        dist[s] = 0.0;
        pq.emplace(0.0, static_cast<int>(s));
        while (!pq.empty()) {
            const auto [d, u] = pq.top();
            pq.pop();
            if (d > dist[u]) continue;
            for (const auto& [v, l] : adj_[u]) {
                const double nd = d + links_[l].latency_ms;
                if (nd < dist[v]) {
                    dist[v] = nd;
                    first[v] = (static_cast<std::size_t>(u) == s) ? l : first[u];
                    pq.emplace(nd, v);
                }
            }
        }
    }
}

SimTopology::Hop SimTopology::next_hop(int src, int dst) const {
    Hop h;
    h.link = first_link_[index(src, dst)];
    if (h.link < 0) return h;
    const auto& l = links_[h.link];
    h.direction = l.a == src ? 0 : 1;
    h.next = l.a == src ? l.b : l.a;
    return h;
}

std::vector<int> SimTopology::path_links(int src, int dst) const {
    std::vector<int> out;
    int u = src;
    while (u != dst) {
        const auto h = next_hop(u, dst);
        if (h.link < 0) throw std::runtime_error("no route");
        out.push_back(h.link);
        u = h.next;
    }
    return out;
}

void SimTopology::scale_latency(double factor) {
    for (auto& l : links_) l.latency_ms *= factor;
    compute_routes();
}

bool SimTopology::connected() const {
    for (std::size_t v = 0; v < nodes_.size(); ++v) {
        if (dist_[v] == std::numeric_limits<double>::infinity()) return false;
    }
    return true;
}

double SimTopology::stub_rtt_median() const {
    std::vector<double> rtts;
    rtts.reserve(stub_hosts_.size() * stub_hosts_.size());
    for (int a : stub_hosts_) {
        for (int b : stub_hosts_) {
            if (a != b) rtts.push_back(2.0 * dist_[index(a, b)]);
        }
    }
    if (rtts.empty()) return 0.0;
    auto mid = rtts.begin() + static_cast<std::ptrdiff_t>(rtts.size() / 2);
    std::nth_element(rtts.begin(), mid, rtts.end());
    return *mid;
}

SimTopology generate_topology(std::uint64_t seed, const TopologyParams& p) {
    if (p.transit_domains < 1 || p.transit_per_domain < 1 || p.hosts_per_stub < 1) {
        throw std::invalid_argument("topology parameters must be positive");
    }
    std::mt19937_64 rng(seed);
    auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

    std::vector<TopoNode> nodes;
    std::vector<Link> links;
    auto add_link = [&](int a, int b, LinkClass cls, double latency) {
        links.push_back(Link{a, b, cls, latency, bandwidth_bps(cls)});
    };

    std::vector<std::vector<int>> domains(p.transit_domains);
    for (int d = 0; d < p.transit_domains; ++d) {
        const int size = std::max(1, p.transit_per_domain + pick(-p.transit_jitter, p.transit_jitter));
        for (int i = 0; i < size; ++i) {
            domains[d].push_back(static_cast<int>(nodes.size()));
            nodes.push_back(TopoNode{true, d, -1});
        }
        const auto& dn = domains[d];
        for (int i = 1; i < size; ++i) add_link(dn[i - 1], dn[i], LinkClass::kTransitTransit, uniform(2.0, 8.0));
        if (size > 2) add_link(dn[size - 1], dn[0], LinkClass::kTransitTransit, uniform(2.0, 8.0));
        for (int i = 0; i < size; ++i) {
            for (int j = i + 2; j < size; ++j) {
                if (!(i == 0 && j == size - 1) && uniform(0.0, 1.0) < p.extra_edge_prob) {
                    add_link(dn[i], dn[j], LinkClass::kTransitTransit, uniform(2.0, 8.0));
                }
            }
        }
    }
    for (int a = 0; a < p.transit_domains; ++a) {
        for (int b = a + 1; b < p.transit_domains; ++b) {
            const int x = domains[a][pick(0, static_cast<int>(domains[a].size()) - 1)];
            const int y = domains[b][pick(0, static_cast<int>(domains[b].size()) - 1)];
            add_link(x, y, LinkClass::kTransitTransit, uniform(10.0, 30.0));
        }
    }

    std::vector<int> transit;
    for (const auto& d : domains) transit.insert(transit.end(), d.begin(), d.end());
    const int stubs = (p.min_stub_hosts + p.hosts_per_stub - 1) / p.hosts_per_stub;
    std::vector<int> order = transit;
    std::shuffle(order.begin(), order.end(), rng);
    for (int s = 0; s < stubs; ++s) {
        const int attach = order[static_cast<std::size_t>(s) % order.size()];
        const int domain = nodes[attach].domain;
        const int gateway = static_cast<int>(nodes.size());
        for (int h = 0; h < p.hosts_per_stub; ++h) nodes.push_back(TopoNode{false, domain, s});
        add_link(gateway, attach, LinkClass::kStubTransit, uniform(3.0, 10.0));
        for (int h = 1; h < p.hosts_per_stub; ++h) {
            add_link(gateway, gateway + h, LinkClass::kStubStub, uniform(0.5, 2.0));
        }
    }

    SimTopology topo(std::move(nodes), std::move(links));
    if (!topo.connected()) throw std::logic_error("generated topology is not connected");
    const double median = topo.stub_rtt_median();
    if (median > 0.0 && p.rtt_median_ms > 0.0) topo.scale_latency(p.rtt_median_ms / median);
    return topo;
}

}  // namespace acme::simnet
