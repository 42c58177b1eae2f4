#include "acme/sensact/sensor_server.hpp"

#include "acme/ising/query.hpp"

namespace acme::sensact {

SensorRequest parse_sensor_url(std::string_view url) {
    SensorRequest req;
    const auto qmark = url.find('?');
    auto path = url.substr(0, qmark);
    while (!path.empty() && path.front() == '/') path.remove_prefix(1);
    req.name = ising::url_decode(path);
    if (qmark != std::string_view::npos) req.args = ising::parse_query_string(url.substr(qmark + 1));
    return req;
}

std::string sensor_url(const std::string& name, const std::string& args) {
    return "/" + ising::url_encode(name) + (args.empty() ? "" : "?" + args);
}

void SensorServer::add(const std::string& name, SensorHandler handler) {
    if (name.empty()) throw std::invalid_argument("sensor name is empty");
    std::lock_guard lock(mutex_);
    if (!handlers_.emplace(name, std::move(handler)).second) {
        throw std::invalid_argument("sensor '" + name + "' already registered");
    }
}

void SensorServer::replace(const std::string& name, SensorHandler handler) {
    if (name.empty()) throw std::invalid_argument("sensor name is empty");
    std::lock_guard lock(mutex_);
    handlers_[name] = std::move(handler);
}

bool SensorServer::has(const std::string& name) const {
    std::lock_guard lock(mutex_);
    return handlers_.count(name) != 0;
}

std::vector<std::string> SensorServer::names() const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [name, h] : handlers_) out.push_back(name);
    return out;
}

SensorResponse SensorServer::serve(std::string_view url, const std::string& client) const {
    auto req = parse_sensor_url(url);
    req.client = client;
    return serve(req);
}

SensorResponse SensorServer::serve(const SensorRequest& request) const {
    SensorHandler handler;
    {
        std::lock_guard lock(mutex_);
        auto it = handlers_.find(request.name);
        if (it == handlers_.end()) return {404, "no sensor named '" + request.name + "'\n"};
        handler = it->second;
    }
    try {
        auto body = handler(request);
        if (!body.empty() && body.back() != '\n') body.push_back('\n');
        return {200, std::move(body)};
    } catch (const std::exception& e) {
        return {500, std::string(e.what()) + "\n"};
    }
}

}  // namespace acme::sensact
