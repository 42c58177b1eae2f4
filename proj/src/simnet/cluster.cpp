#include "acme/simnet/cluster.hpp"

#include <stdexcept>

namespace acme::simnet {

SimNode::SimNode(SimCluster& cluster, std::size_t index, std::string name, int host, qtree::NodeId id)
    : cluster_(cluster), index_(index), name_(std::move(name)), host_(host), id_(std::move(id)),
      loop_(cluster.sim()) {}

void SimNode::attach(std::shared_ptr<const qtree::Membership> membership, const ising::IsingConfig& config) {
    qtree_ = std::make_unique<qtree::QTreeNode>(id_, std::move(membership), static_cast<qtree::FrameTransport&>(*this));
    ising_ = std::make_unique<ising::IsingNode>(*qtree_, static_cast<ising::IsingEnv&>(*this), config);
}

sensact::SensorServer& SimNode::server(std::uint16_t port) {
    auto& s = servers_[port];
    if (!s) s = std::make_unique<sensact::SensorServer>(port);
    return *s;
}

std::string SimNode::root_source() const { return name_ + ":" + std::to_string(cluster_.params_.ising_port); }

void SimNode::send(const qtree::NodeId& to, qtree::Frame frame) {
    if (!alive_) return;
    auto* dst = cluster_.find(to);
    if (!dst) return;
    const auto bytes = frame.value_units * cluster_.params_.message_size;
    if (frame.direction == qtree::Direction::kUp) {
        cluster_.up_bytes_ += bytes;
    } else {
        cluster_.down_bytes_ += bytes;
    }
    const auto from = id_;
    cluster_.network_.send(host_, dst->host_, bytes, [dst, from, f = std::move(frame)] {
        if (dst->alive_) dst->qtree_->on_frame(from, f);
    });
}

void SimNode::fetch(const std::optional<std::string>& host, std::uint16_t port, const std::string& sensor,
                    const std::string& args, FetchDone done) {
    SimNode* target = host ? cluster_.find(*host) : this;
    if (!target || !target->alive_) {
        loop_.post([done = std::move(done)] { done(std::nullopt); });
        return;
    }
    double delay = cluster_.params_.sensor_latency_ms + target->fetch_delay_ms;
    if (target != this) delay += 2.0 * cluster_.network_.topology().path_latency(host_, target->host_);
    auto url = sensact::sensor_url(sensor, args);
    loop_.schedule(delay, [this, target, port, url = std::move(url), done = std::move(done)] {
        if (!target->alive_) {
            done(std::nullopt);
            return;
        }
        auto it = target->servers_.find(port);
        if (it == target->servers_.end()) {
            done(std::nullopt);
            return;
        }
        auto resp = it->second->serve(url, name_);
        if (resp.status != 200) {
            done(std::nullopt);
            return;
        }
        done(std::move(resp.body));
    });
}

void SimNode::compute(double cost_ms, std::function<void()> fn) {
    const double start = std::max(loop_.now_ms(), cpu_busy_until_);
    cpu_busy_until_ = start + cost_ms;
    loop_.schedule(cpu_busy_until_ - loop_.now_ms(), std::move(fn));
}

SimCluster::SimCluster(SimNetwork& network, const std::vector<int>& hosts, ClusterParams params)
    : network_(network), params_(params) {
    if (hosts.empty()) throw std::invalid_argument("cluster needs at least one host");
    std::vector<qtree::NodeId> ids;
    for (std::size_t i = 0; i < hosts.size(); ++i) {
        auto name = "h" + std::to_string(hosts[i]);
        auto id = qtree::node_id_from_name(name, params_.digits);
        if (!by_id_.emplace(id, i).second) throw std::runtime_error("NodeId collision for " + name);
        if (!by_name_.emplace(name, i).second) throw std::invalid_argument("duplicate host " + name);
        ids.push_back(id);
        nodes_.push_back(std::make_unique<SimNode>(*this, i, std::move(name), hosts[i], std::move(id)));
    }
    auto latency = [this](const qtree::NodeId& a, const qtree::NodeId& b) {
        const auto& na = *nodes_[by_id_.at(a)];
        const auto& nb = *nodes_[by_id_.at(b)];
        return network_.topology().path_latency(na.host_, nb.host_);
    };
    membership_ = std::make_shared<qtree::Membership>(std::move(ids), latency);
    for (auto& n : nodes_) n->attach(membership_, params_.ising);
}

SimNode* SimCluster::find(const qtree::NodeId& id) {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : nodes_[it->second].get();
}

SimNode* SimCluster::find(const std::string& name) {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : nodes_[it->second].get();
}

void SimCluster::reset_counters() {
    up_bytes_ = 0;
    down_bytes_ = 0;
    network_.reset_counters();
}

SnapshotOutcome run_snapshot(SimCluster& cluster, const ising::SensorQuery& query, double limit_ms) {
    auto& sim = cluster.sim();
    SnapshotOutcome out;
    const double t0 = sim.now();
    cluster.node(0).ising().submit(query, [&](const ising::EpochResult& r) {
        out.completed = true;
        out.latency_ms = sim.now() - t0;
        out.result = r;
    });
    sim.run_while_not([&] { return out.completed; }, t0 + limit_ms);
    sim.run();
    return out;
}

}  // namespace acme::simnet
