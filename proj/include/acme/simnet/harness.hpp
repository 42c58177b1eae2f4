#pragma once

#include "acme/entrie/engine.hpp"
#include "acme/sensact/sensor_server.hpp"
#include "acme/simnet/cluster.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace acme::simnet {

/// ENTRIE's connection to a simulated deployment. ENTRIE sits on the host
/// of cluster node `home`; requests and replies each pay the one-way path
/// latency. Roots are "name:port" and must have started an ISING tree.
class SimTriggerIo : public entrie::TriggerIo {
public:
    SimTriggerIo(SimCluster& cluster, std::size_t home, double attempt_timeout_ms = 5000.0);
    ~SimTriggerIo() override;

    EventLoop& loop() override { return loop_; }
    void query(const std::vector<std::string>& roots, const ising::SensorQuery& query, QueryDone done) override;
    void invoke(const std::string& host, const std::string& port, const std::string& actuator,
                const std::string& args, InvokeDone done) override;

    /// Actuators addressed without a host, e.g. the application's process control.
    void set_default_endpoint(sensact::SensorServer* server, std::size_t node);

    /// Root attempts abandoned because the root was down or silent.
    std::uint64_t failovers() const { return failovers_; }

private:
    struct Attempt;

    void try_root(const std::shared_ptr<Attempt>& a);
    void direct(const ising::SensorQuery& query, QueryDone done);
    double one_way(const SimNode& to) const;

    SimCluster& cluster_;
    std::size_t home_;
    double timeout_ms_;
    SimLoop loop_;
    sensact::SensorServer* default_server_ = nullptr;
    std::size_t default_node_ = 0;
    std::uint64_t failovers_ = 0;
    std::shared_ptr<bool> alive_ = std::make_shared<bool>(true);
};

/// "name:port" -> name.
std::string root_host(const std::string& root);

}  // namespace acme::simnet
