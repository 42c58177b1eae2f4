#include "acme/simnet/network.hpp"

#include <algorithm>
#include <memory>
#include <stdexcept>

namespace acme::simnet {

SimNetwork::SimNetwork(Simulator& sim, const SimTopology& topo)
    : sim_(sim), topo_(topo), busy_until_(topo.links().size() * 2, 0.0) {}

void SimNetwork::reset_counters() {
    wire_bytes_ = 0;
    messages_ = 0;
}

void SimNetwork::send(int src, int dst, std::uint32_t bytes, std::function<void()> on_arrival) {
    ++messages_;
    auto m = std::make_shared<Message>(Message{dst, bytes, std::move(on_arrival)});
    if (src == dst) {
        sim_.after(0.0, [m] { m->on_arrival(); });
        return;
    }
    hop(src, m);
}

void SimNetwork::hop(int at, const std::shared_ptr<Message>& m) {
    if (at == m->dst) {
        m->on_arrival();
        return;
    }
    const auto h = topo_.next_hop(at, m->dst);
    if (h.link < 0) throw std::runtime_error("no route between simulated hosts");
    const auto& link = topo_.links()[h.link];
    auto& busy = busy_until_[static_cast<std::size_t>(h.link) * 2 + h.direction];
    const double start = std::max(sim_.now(), busy);
    const double service = static_cast<double>(m->bytes) * 8.0 / link.bandwidth_bps * 1000.0;
    busy = start + service;
    wire_bytes_ += m->bytes;
    const int next = h.next;
    sim_.at(start + service + link.latency_ms, [this, next, m] { hop(next, m); });
}

}  // namespace acme::simnet
