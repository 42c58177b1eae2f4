#pragma once

#include "acme/qtree/node_id.hpp"
#include "acme/sensact/actuators.hpp"
#include "acme/simnet/network.hpp"
#include "acme/simnet/simulator.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace acme::simnet {

struct AppParams {
    double workload_period_ms = 10000.0;  ///< one lookup per instance per period
    double timeout_ms = 10000.0;
    double service_ms = 50.0;  ///< per message, FIFO at each instance
    std::size_t key_space = 64;
    std::uint32_t message_size = 100;
    std::size_t digits = qtree::NodeId::kDefaultDigits;
};

struct LookupRecord {
    double issued_ms = 0.0;
    std::string origin;
    qtree::NodeId key;
    bool completed = false;
    double latency_ms = 0.0;
    std::string owner;  ///< instance that answered
};

struct AppMinute {
    std::int64_t minute = 0;
    std::size_t issued = 0;
    std::size_t completed = 0;
    std::size_t successful = 0;
    double completion_rate = 0.0;
    double success_rate = 0.0;  ///< over completed lookups
    double mean_latency_ms = 0.0;
    std::size_t live = 0;  ///< instances alive at the end of the minute
};

/// Synthetic lookup service. Instances route find_owner lookups hop by
/// hop with prefix routing over the live instance set; the instance where
/// routing stops answers the origin directly. Under set_loss each instance
/// discards that fraction of the requests it handles.
class SimApp : public sensact::AppControl {
public:
    SimApp(SimNetwork& network, std::vector<int> hosts, AppParams params, std::uint64_t seed);
    ~SimApp() override;

    /// Starts and kills instances; ids are "app-N".
    sensact::VirtualProcessManager& processes() { return processes_; }

    void set_loss(double fraction) override;
    void set_workload_period(double period_ms) override;
    double loss() const { return loss_; }
    double workload_period_ms() const { return params_.workload_period_ms; }

    /// Issues one lookup from a live instance.
    void lookup(const std::string& origin, const qtree::NodeId& key);

    std::size_t live() const { return instances_.size(); }
    const std::vector<LookupRecord>& lookups() const { return lookups_; }

    /// Per-minute metrics from `start_ms`; only lookups whose outcome is
    /// decided (answered or timed out) count.
    std::vector<AppMinute> metrics(double start_ms, double window_ms = 60000.0) const;

    /// Live-instance count sampled whenever it changes.
    const std::vector<std::pair<double, std::size_t>>& census_log() const { return census_; }

private:
    struct Instance {
        std::string name;
        qtree::NodeId id;
        int host = 0;
        double busy_until = 0.0;
        TimerId workload_timer = 0;
        std::mt19937_64 rng;
        std::uint64_t serial = 0;
    };
    struct Message {
        std::size_t lookup = 0;
        qtree::NodeId key;
    };

    void on_start(const std::string& name);
    void on_kill(const std::string& name);
    void schedule_workload(Instance& inst, double delay);
    void send(Instance& from, const std::string& to, std::function<void(Instance&)> on_arrival);
    void handle(Instance& at, Message m);
    double latency(const qtree::NodeId& a, const qtree::NodeId& b) const;

    SimNetwork& network_;
    std::vector<int> hosts_;
    AppParams params_;
    std::uint64_t seed_;
    double loss_ = 0.0;
    std::uint64_t started_ = 0;
    sensact::VirtualProcessManager processes_;
    std::map<std::string, std::unique_ptr<Instance>> instances_;
    std::map<qtree::NodeId, std::string> by_id_;
    std::vector<qtree::NodeId> keys_;
    std::vector<LookupRecord> lookups_;
    std::vector<bool> decided_;
    std::vector<TimerId> timeouts_;
    std::vector<std::pair<double, std::size_t>> census_;
    std::shared_ptr<bool> alive_ = std::make_shared<bool>(true);
};

std::string format_app_metrics_csv(const std::vector<AppMinute>& rows);

}  // namespace acme::simnet
