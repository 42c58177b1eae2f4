#pragma once

#include "acme/ising/aggregate.hpp"
#include "acme/ising/query.hpp"
#include "acme/sensact/sensor_server.hpp"

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace acme::sensact {

SensorHandler hostname_sensor(std::string host);

/// `source` yields the 1-minute load average; negative readings are clamped to 0.
SensorHandler load_sensor(std::function<double()> source);

/// 1-minute load average from /proc/loadavg, or nullopt if unavailable.
std::optional<double> system_load();

/// Named monotone counters. Sensor form: `counter?name=x`.
class CounterSet {
public:
    void add(const std::string& name, std::uint64_t delta = 1);
    std::uint64_t get(const std::string& name) const;
    SensorHandler sensor() const;

private:
    mutable std::mutex mutex_;
    std::map<std::string, std::uint64_t> counters_;
};

/// Returns lines appended to a file since the caller's last read. Cursors
/// are kept per client; partial trailing lines wait for their newline.
class LogReader {
public:
    explicit LogReader(std::filesystem::path path) : path_(std::move(path)) {}

    std::vector<std::string> read_new(const std::string& client);
    SensorHandler sensor();

private:
    std::filesystem::path path_;
    std::mutex mutex_;
    std::map<std::string, std::uint64_t> cursors_;
};

/// Raw CSV of sensor `sensor` on a local instance listening on `port`.
using InstanceFetch = std::function<std::optional<std::string>(std::uint16_t port, const std::string& sensor,
                                                               const std::string& args)>;

/// Per-host fan-in: reads the sensor on every local instance and answers as
/// one sensor. VALUE passes selected rows through; other ops produce one row
/// holding the aggregate, or nothing when no instance gave a valid value.
std::string fanin_local(const std::vector<std::uint16_t>& ports, const std::string& sensor,
                        const std::string& args, const std::optional<ising::Selection>& selection,
                        ising::AggregateOp op, const InstanceFetch& fetch);

SensorHandler fanin_sensor(std::vector<std::uint16_t> ports, std::string sensor, ising::AggregateOp op,
                           InstanceFetch fetch);

}  // namespace acme::sensact
