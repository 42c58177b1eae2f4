#pragma once

#include "acme/entrie/engine.hpp"
#include "acme/realnet/asio_loop.hpp"
#include "acme/realnet/node.hpp"

#include <atomic>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace acme::realnet {

/// ENTRIE over HTTP. Roots are tried in order, each with its own timeout.
/// Host names found in the cluster config resolve to that node's address
/// and port offset; other names are used as given.
class HttpTriggerIo : public entrie::TriggerIo {
public:
    HttpTriggerIo(AsioLoop& loop, std::optional<ClusterConfig> cluster, std::string default_endpoint,
                  double timeout_ms = 5000.0);
    ~HttpTriggerIo() override;

    EventLoop& loop() override { return loop_; }
    void query(const std::vector<std::string>& roots, const ising::SensorQuery& query, QueryDone done) override;
    void invoke(const std::string& host, const std::string& port, const std::string& actuator,
                const std::string& args, InvokeDone done) override;

    std::uint64_t failovers() const { return *failovers_; }

private:
    std::pair<std::string, int> resolve(const std::string& host, int logical_port) const;
    void deliver(std::function<void()> fn);

    AsioLoop& loop_;
    std::optional<ClusterConfig> cluster_;
    std::string default_endpoint_;
    double timeout_ms_;
    std::shared_ptr<std::atomic<bool>> alive_ = std::make_shared<std::atomic<bool>>(true);
    std::shared_ptr<std::atomic<std::uint64_t>> failovers_ = std::make_shared<std::atomic<std::uint64_t>>(0);
};

}  // namespace acme::realnet
