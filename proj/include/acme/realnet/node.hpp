#pragma once

#include "acme/ising/ising_node.hpp"
#include "acme/qtree/qtree_node.hpp"
#include "acme/realnet/asio_loop.hpp"
#include "acme/sensact/sensor_server.hpp"

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace acme::realnet {

/// Where one node listens. Every logical port p is served at p + port_offset,
/// so several nodes can share one address.
struct PeerAddress {
    std::string name;
    std::string host = "127.0.0.1";
    int port_offset = 0;

    int port(int logical) const { return logical + port_offset; }
};

/// Static deployment description shared by every node.
///
///   {"qtree_port": 7000, "ising_port": 8000, "topology": "TTREE",
///    "roots": ["n0"], "nodes": [{"name": "n0", "host": "127.0.0.1", "port_offset": 0}, ...]}
struct ClusterConfig {
    std::vector<PeerAddress> nodes;
    std::uint16_t qtree_port = 7000;
    std::uint16_t ising_port = 8000;
    std::vector<std::string> roots;  ///< nodes that start an ISING tree
    ising::IsingConfig ising;
    std::size_t digits = qtree::NodeId::kDefaultDigits;

    const PeerAddress* find(const std::string& name) const;
};

/// Throws std::invalid_argument naming the offending field.
ClusterConfig parse_cluster_config(const std::string& json_text);
ClusterConfig load_cluster_config(const std::filesystem::path& path);
std::string format_cluster_config(const ClusterConfig& config);

/// A loopback cluster of n nodes with consecutive offsets of `stride`.
ClusterConfig loopback_cluster(std::size_t n, int stride = 10, std::uint16_t qtree_port = 7000,
                               std::uint16_t ising_port = 8000);

/// One live node: QTree over TCP, ISING with an HTTP query endpoint, and
/// HTTP sensor servers. Sensors must be registered before start().
class RealNode : private qtree::FrameTransport, private ising::IsingEnv {
public:
    RealNode(ClusterConfig config, const std::string& name);
    ~RealNode() override;

    RealNode(const RealNode&) = delete;
    RealNode& operator=(const RealNode&) = delete;

    const PeerAddress& address() const { return self_; }
    sensact::SensorServer& server(std::uint16_t port);

    /// Binds every listener and starts the loop; roots announce their tree.
    void start();
    void stop();

    /// Runs fn on the node loop and waits for it.
    void run_sync(std::function<void()> fn);

    AsioLoop& node_loop() { return loop_; }

private:
    class Links;
    class Http;

    void send(const qtree::NodeId& to, qtree::Frame frame) override;
    EventLoop& loop() override { return loop_; }
    void fetch(const std::optional<std::string>& host, std::uint16_t port, const std::string& sensor,
               const std::string& args, FetchDone done) override;
    std::string host() const override { return self_.name; }
    std::string root_source() const override;

    std::string handle_query(const std::string& target, std::string& content_type, int& status);

    ClusterConfig config_;
    PeerAddress self_;
    qtree::NodeId id_;
    std::map<qtree::NodeId, PeerAddress> peers_;
    AsioLoop loop_;
    std::shared_ptr<qtree::Membership> membership_;
    std::unique_ptr<qtree::QTreeNode> qtree_;
    std::unique_ptr<ising::IsingNode> ising_;
    std::map<std::uint16_t, std::unique_ptr<sensact::SensorServer>> servers_;
    std::unique_ptr<Links> links_;
    std::unique_ptr<Http> http_;
    std::shared_ptr<std::atomic<bool>> alive_ = std::make_shared<std::atomic<bool>>(true);
    bool started_ = false;
    bool is_root_ = false;
};

/// HTTP GET returning the body of a 200 response; nullopt on any failure.
std::optional<std::string> http_get(const std::string& host, int port, const std::string& path_and_query,
                                    double timeout_ms);

/// "host:port" split; throws std::invalid_argument.
std::pair<std::string, int> split_host_port(const std::string& text);

}  // namespace acme::realnet
