#pragma once

#include <cstddef>

namespace acme::ising {

/// How long a node at `node_depth` waits after local collection before
/// sending its partial upward: one (compute + latency) budget per level
/// below it. Depths beyond max_depth get no wait.
constexpr double node_timeout(std::size_t node_depth, std::size_t max_depth, double compute_max_ms,
                              double latency_max_ms) {
    if (node_depth >= max_depth) return 0.0;
    return static_cast<double>(max_depth - node_depth) * (compute_max_ms + latency_max_ms);
}

}  // namespace acme::ising
