#pragma once

#include "acme/sensact/sensor_server.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace acme::sensact {

struct ActuatorResult {
    bool ok = true;
    std::string detail;

    static ActuatorResult success(std::string detail = {}) { return {true, std::move(detail)}; }
    static ActuatorResult error(std::string detail) { return {false, std::move(detail)}; }

    bool operator==(const ActuatorResult&) const = default;
};

/// One CSV row: `OK,detail` or `ERROR,detail`.
std::string format_result(const ActuatorResult& r);
ActuatorResult parse_result(std::string_view row);

/// Application instances on one host.
class ProcessManager {
public:
    virtual ~ProcessManager() = default;

    /// Starts one instance and returns its id.
    virtual std::optional<std::string> start() = 0;
    virtual bool kill(const std::string& id) = 0;
    /// Restarts every live instance; false if nothing was running.
    virtual bool reboot() = 0;
    virtual std::vector<std::string> census() const = 0;
};

/// Instances that exist only as bookkeeping. Hooks let a simulated
/// application follow starts and kills.
class VirtualProcessManager : public ProcessManager {
public:
    explicit VirtualProcessManager(std::string prefix = "app") : prefix_(std::move(prefix)) {}

    std::function<void(const std::string&)> on_start;
    std::function<void(const std::string&)> on_kill;

    std::optional<std::string> start() override;
    bool kill(const std::string& id) override;
    bool reboot() override;
    std::vector<std::string> census() const override;

    std::uint64_t reboots() const { return reboots_; }

private:
    std::string prefix_;
    std::uint64_t next_ = 0;
    std::uint64_t reboots_ = 0;
    std::set<std::string> live_;
};

/// Child processes running `argv`, started with posix_spawn and stopped with SIGTERM.
class LocalProcessManager : public ProcessManager {
public:
    explicit LocalProcessManager(std::vector<std::string> argv);
    ~LocalProcessManager() override;

    std::optional<std::string> start() override;
    bool kill(const std::string& id) override;
    bool reboot() override;
    std::vector<std::string> census() const override;

private:
    void reap();

    std::vector<std::string> argv_;
    mutable std::mutex mutex_;
    std::map<std::string, int> live_;  ///< id -> pid
};

/// Live knobs of the local application.
class AppControl {
public:
    virtual ~AppControl() = default;
    virtual void set_loss(double fraction) = 0;
    virtual void set_workload_period(double period_ms) = 0;
};

/// Append-only `timestamp_ms,actuator,args,status,detail` file.
class ActuatorLedger {
public:
    explicit ActuatorLedger(std::filesystem::path path);

    void append(std::int64_t timestamp_ms, const std::string& actuator, const std::string& args,
                const ActuatorResult& result);
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::mutex mutex_;
    std::ofstream out_;
};

struct LedgerRow {
    std::int64_t timestamp_ms = 0;
    std::string actuator;
    std::string args;
    ActuatorResult result;
};

std::vector<LedgerRow> read_ledger(const std::filesystem::path& path);

/// Replays acknowledged startNode/killNode/reboot rows into the live id set.
std::set<std::string> replay_census(const std::vector<LedgerRow>& rows);

struct ActuatorDeps {
    ProcessManager* processes = nullptr;
    AppControl* app = nullptr;
    ActuatorLedger* ledger = nullptr;
    std::function<std::int64_t()> clock;
};

/// Registers startNode, killNode, reboot, setLoss and setWorkloadRate.
///
///   startNode?count=N          OK,<id;id;...>
///   killNode?target=<id>       OK,<id>
///   reboot                     OK,<n restarted>
///   setLoss?fraction=F         0 <= F <= 1
///   setWorkloadRate?period=MS  MS > 0
void add_actuators(SensorServer& server, ActuatorDeps deps);

}  // namespace acme::sensact
