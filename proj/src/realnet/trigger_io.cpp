#include "acme/realnet/trigger_io.hpp"

#include "acme/ising/query.hpp"
#include "acme/sensact/sensor_server.hpp"

#include <boost/asio/post.hpp>

#include <thread>

namespace acme::realnet {

HttpTriggerIo::HttpTriggerIo(AsioLoop& loop, std::optional<ClusterConfig> cluster, std::string default_endpoint,
                             double timeout_ms)
    : loop_(loop), cluster_(std::move(cluster)), default_endpoint_(std::move(default_endpoint)),
      timeout_ms_(timeout_ms) {}

HttpTriggerIo::~HttpTriggerIo() { *alive_ = false; }

std::pair<std::string, int> HttpTriggerIo::resolve(const std::string& host, int logical_port) const {
    if (cluster_) {
        if (const auto* p = cluster_->find(host)) return {p->host, p->port(logical_port)};
    }
    return {host, logical_port};
}

void HttpTriggerIo::deliver(std::function<void()> fn) {
    auto alive = alive_;
    boost::asio::post(loop_.io(), [alive, fn = std::move(fn)] {
        if (*alive) fn();
    });
}

void HttpTriggerIo::query(const std::vector<std::string>& roots, const ising::SensorQuery& query, QueryDone done) {
    std::vector<std::pair<std::string, int>> targets;
    std::string path;
    if (roots.empty()) {
        if (!query.host) {
            loop_.post([done = std::move(done)] { done(std::nullopt); });
            return;
        }
        targets.push_back(resolve(*query.host, query.port));
        path = sensact::sensor_url(query.sensor, query.args);
    } else {
        for (const auto& r : roots) {
            try {
                auto [h, p] = split_host_port(r);
                targets.push_back(resolve(h, p));
            } catch (const std::invalid_argument&) {
                targets.emplace_back(std::string(), 0);
            }
        }
        path = ising::format_query(query);
    }
    const bool direct = roots.empty();
    auto alive = alive_;
    auto failovers = failovers_;
    auto io = loop_.io_ptr();
    const double timeout = timeout_ms_;
    std::thread([alive, failovers, io, targets, path, direct, query, timeout, done = std::move(done)]() mutable {
        std::optional<std::vector<ResultTuple>> result;
        for (const auto& [host, port] : targets) {
            if (!*alive) return;
            if (host.empty()) {
                ++*failovers;
                continue;
            }
            auto body = http_get(host, port, path, timeout);
            if (!body) {
                ++*failovers;
                continue;
            }
            try {
                if (direct) {
                    std::vector<ResultTuple> tuples;
                    const auto now = std::chrono::duration_cast<std::chrono::milliseconds>(
                                         std::chrono::system_clock::now().time_since_epoch())
                                         .count();
                    const auto source = *query.host + ":" + std::to_string(query.port);
                    for (auto& row : ising::apply_selection(*body, query.selection)) {
                        tuples.push_back({source, now, std::move(row)});
                    }
                    result = std::move(tuples);
                } else {
                    result = parse_tuples(*body);
                }
                break;
            } catch (const std::invalid_argument&) {
                ++*failovers;
            }
        }
        if (!*alive) return;
        boost::asio::post(*io, [alive, result = std::move(result), done = std::move(done)] {
            if (*alive) done(result);
        });
    }).detach();
}

void HttpTriggerIo::invoke(const std::string& host, const std::string& port, const std::string& actuator,
                           const std::string& args, InvokeDone done) {
    std::pair<std::string, int> target;
    try {
        if (host.empty()) {
            target = split_host_port(default_endpoint_);
        } else {
            target = resolve(host, std::stoi(port));
        }
    } catch (const std::exception&) {
        loop_.post([done = std::move(done)] { done(std::nullopt); });
        return;
    }
    auto alive = alive_;
    auto io = loop_.io_ptr();
    const double timeout = timeout_ms_;
    const auto path = sensact::sensor_url(actuator, args);
    std::thread([alive, io, target, path, timeout, done = std::move(done)]() mutable {
        auto body = http_get(target.first, target.second, path, timeout);
        if (!*alive) return;
        boost::asio::post(*io, [alive, body = std::move(body), done = std::move(done)] {
            if (*alive) done(body);
        });
    }).detach();
}

}  // namespace acme::realnet
