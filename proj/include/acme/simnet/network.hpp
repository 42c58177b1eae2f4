#pragma once

#include "acme/simnet/simulator.hpp"
#include "acme/simnet/topology.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

namespace acme::simnet {

/// Store-and-forward delivery over the routed path. Each directed link is a
/// FIFO: a message waits for the link, occupies it for size*8/bandwidth,
/// then propagates for the link latency.
class SimNetwork {
public:
    SimNetwork(Simulator& sim, const SimTopology& topo);

    /// on_arrival runs at dst after the last hop.
    void send(int src, int dst, std::uint32_t bytes, std::function<void()> on_arrival);

    /// Bytes summed over every link traversal.
    std::uint64_t wire_bytes() const { return wire_bytes_; }
    std::uint64_t messages() const { return messages_; }
    void reset_counters();

    const SimTopology& topology() const { return topo_; }
    Simulator& sim() { return sim_; }

private:
    struct Message {
        int dst;
        std::uint32_t bytes;
        std::function<void()> on_arrival;
    };

    void hop(int at, const std::shared_ptr<Message>& m);

    Simulator& sim_;
    const SimTopology& topo_;
    std::vector<double> busy_until_;  ///< per link and direction
    std::uint64_t wire_bytes_ = 0;
    std::uint64_t messages_ = 0;
};

}  // namespace acme::simnet
