#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace acme::sensact {

struct SensorRequest {
    std::string name;
    std::map<std::string, std::string> args;
    std::string client;  ///< identifies the caller; keys per-client cursors
};

struct SensorResponse {
    int status = 200;
    std::string body;
};

/// A handler throws SensorError (or any std::exception) to answer 500.
class SensorError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using SensorHandler = std::function<std::string(const SensorRequest&)>;

/// Registry of sensors and actuators behind one port. Path = name, query
/// string = arguments, response = CSV rows.
class SensorServer {
public:
    explicit SensorServer(std::uint16_t port = 0) : port_(port) {}

    std::uint16_t port() const { return port_; }

    /// Throws std::invalid_argument if the name is taken or empty.
    void add(const std::string& name, SensorHandler handler);
    /// Adds or overwrites.
    void replace(const std::string& name, SensorHandler handler);
    bool has(const std::string& name) const;
    std::vector<std::string> names() const;

    /// `url` is `/name?args`. Unknown name: 404. Handler failure: 500 with the reason.
    SensorResponse serve(std::string_view url, const std::string& client = {}) const;
    SensorResponse serve(const SensorRequest& request) const;

private:
    std::uint16_t port_;
    mutable std::mutex mutex_;
    std::map<std::string, SensorHandler> handlers_;
};

/// Splits `/name?a=1&b=2` into a request.
SensorRequest parse_sensor_url(std::string_view url);

/// Builds `/name?args` where args is an already-encoded query string.
std::string sensor_url(const std::string& name, const std::string& args);

}  // namespace acme::sensact
