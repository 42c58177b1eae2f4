#pragma once

#include "acme/ising/ising_node.hpp"
#include "acme/qtree/qtree_node.hpp"
#include "acme/sensact/sensor_server.hpp"
#include "acme/simnet/network.hpp"
#include "acme/simnet/simulator.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace acme::simnet {

struct ClusterParams {
    ising::IsingConfig ising;
    std::uint32_t message_size = 100;  ///< bytes per value unit
    std::size_t digits = qtree::NodeId::kDefaultDigits;
    double sensor_latency_ms = 0.0;  ///< local sensor service time
    std::uint16_t ising_port = 8000;
};

class SimCluster;

/// One simulated host running QTree, ISING and sensor servers.
class SimNode : private qtree::FrameTransport, private ising::IsingEnv {
public:
    SimNode(SimCluster& cluster, std::size_t index, std::string name, int host, qtree::NodeId id);

    std::size_t index() const { return index_; }
    const std::string& name() const { return name_; }
    int topo_host() const { return host_; }
    const qtree::NodeId& id() const { return id_; }
    bool alive() const { return alive_; }

    SimLoop& sim_loop() { return loop_; }
    qtree::QTreeNode& qtree() { return *qtree_; }
    ising::IsingNode& ising() { return *ising_; }

    /// Sensor server on `port`, created on first use.
    sensact::SensorServer& server(std::uint16_t port);

    /// Extra delay before this node's sensors answer.
    double fetch_delay_ms = 0.0;

    void set_alive(bool alive) { alive_ = alive; }

private:
    friend class SimCluster;

    void send(const qtree::NodeId& to, qtree::Frame frame) override;
    EventLoop& loop() override { return loop_; }
    void fetch(const std::optional<std::string>& host, std::uint16_t port, const std::string& sensor,
               const std::string& args, FetchDone done) override;
    void compute(double cost_ms, std::function<void()> fn) override;
    std::string host() const override { return name_; }
    std::string root_source() const override;

    void attach(std::shared_ptr<const qtree::Membership> membership, const ising::IsingConfig& config);

    SimCluster& cluster_;
    std::size_t index_;
    std::string name_;
    int host_;
    qtree::NodeId id_;
    SimLoop loop_;
    bool alive_ = true;
    double cpu_busy_until_ = 0.0;
    std::map<std::uint16_t, std::unique_ptr<sensact::SensorServer>> servers_;
    std::unique_ptr<qtree::QTreeNode> qtree_;
    std::unique_ptr<ising::IsingNode> ising_;
};

/// The nodes of one simulated deployment. Node 0 is the conventional root.
class SimCluster {
public:
    /// `hosts` are topology stub-host indices, one node each, named `h<host>`.
    SimCluster(SimNetwork& network, const std::vector<int>& hosts, ClusterParams params);

    std::size_t size() const { return nodes_.size(); }
    SimNode& node(std::size_t i) { return *nodes_.at(i); }
    SimNode* find(const qtree::NodeId& id);
    SimNode* find(const std::string& name);

    const qtree::Membership& membership() const { return *membership_; }
    std::shared_ptr<qtree::Membership> shared_membership() { return membership_; }
    const ClusterParams& params() const { return params_; }
    Simulator& sim() { return network_.sim(); }
    SimNetwork& network() { return network_; }

    /// Bytes of QTree up traffic: value units times message size, per overlay hop.
    std::uint64_t up_bytes() const { return up_bytes_; }
    std::uint64_t down_bytes() const { return down_bytes_; }
    void reset_counters();

private:
    friend class SimNode;

    SimNetwork& network_;
    ClusterParams params_;
    std::vector<std::unique_ptr<SimNode>> nodes_;
    std::unordered_map<qtree::NodeId, std::size_t, qtree::NodeIdHash> by_id_;
    std::map<std::string, std::size_t> by_name_;
    std::shared_ptr<qtree::Membership> membership_;
    std::uint64_t up_bytes_ = 0;
    std::uint64_t down_bytes_ = 0;
};

struct SnapshotOutcome {
    bool completed = false;
    double latency_ms = 0.0;
    ising::EpochResult result;
};

/// Submits a query at node 0 and runs the simulator until the root answers
/// (or limit_ms of virtual time passes), then drains remaining events.
SnapshotOutcome run_snapshot(SimCluster& cluster, const ising::SensorQuery& query, double limit_ms = 3.6e6);

}  // namespace acme::simnet
