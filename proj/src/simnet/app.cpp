#include "acme/simnet/app.hpp"

#include "acme/common/rng.hpp"
#include "acme/qtree/tree.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace acme::simnet {

SimApp::SimApp(SimNetwork& network, std::vector<int> hosts, AppParams params, std::uint64_t seed)
    : network_(network), hosts_(std::move(hosts)), params_(params), seed_(seed) {
    if (hosts_.empty()) throw std::invalid_argument("application needs at least one host");
    if (params_.key_space == 0) throw std::invalid_argument("key space is empty");
    for (std::size_t k = 0; k < params_.key_space; ++k) {
        keys_.push_back(qtree::node_id_from_name("key-" + std::to_string(k), params_.digits));
    }
    processes_.on_start = [this](const std::string& name) { on_start(name); };
    processes_.on_kill = [this](const std::string& name) { on_kill(name); };
}

SimApp::~SimApp() {
    *alive_ = false;
    auto& sim = network_.sim();
    for (auto& [name, inst] : instances_) sim.cancel(inst->workload_timer);
    for (auto t : timeouts_) sim.cancel(t);
}

void SimApp::set_loss(double fraction) {
    if (fraction < 0.0 || fraction > 1.0) throw std::invalid_argument("loss fraction must be in [0,1]");
    loss_ = fraction;
}

void SimApp::set_workload_period(double period_ms) {
    if (!(period_ms > 0.0)) throw std::invalid_argument("workload period must be positive");
    params_.workload_period_ms = period_ms;
}

double SimApp::latency(const qtree::NodeId& a, const qtree::NodeId& b) const {
    const auto& ia = *instances_.at(by_id_.at(a));
    const auto& ib = *instances_.at(by_id_.at(b));
    return network_.topology().path_latency(ia.host, ib.host);
}

void SimApp::on_start(const std::string& name) {
    auto inst = std::make_unique<Instance>();
    inst->name = name;
    inst->id = qtree::node_id_from_name(name, params_.digits);
    if (by_id_.count(inst->id)) throw std::runtime_error("NodeId collision for " + name);
    inst->serial = started_++;
    inst->host = hosts_[inst->serial % hosts_.size()];
    inst->rng.seed(derive_seed(seed_, inst->serial));
    auto& ref = *inst;
    by_id_.emplace(ref.id, name);
    instances_.emplace(name, std::move(inst));
    std::uniform_real_distribution<double> phase(0.0, params_.workload_period_ms);
    schedule_workload(ref, phase(ref.rng));
    census_.emplace_back(network_.sim().now(), instances_.size());
}

void SimApp::on_kill(const std::string& name) {
    auto it = instances_.find(name);
    if (it == instances_.end()) return;
    network_.sim().cancel(it->second->workload_timer);
    by_id_.erase(it->second->id);
    instances_.erase(it);
    census_.emplace_back(network_.sim().now(), instances_.size());
}

void SimApp::schedule_workload(Instance& inst, double delay) {
    const auto name = inst.name;
    const auto serial = inst.serial;
    inst.workload_timer = network_.sim().after(delay, [this, name, serial] {
        auto it = instances_.find(name);
        if (it == instances_.end() || it->second->serial != serial) return;
        auto& self = *it->second;
        std::uniform_int_distribution<std::size_t> pick(0, keys_.size() - 1);
        lookup(name, keys_[pick(self.rng)]);
        schedule_workload(self, params_.workload_period_ms);
    });
}

void SimApp::lookup(const std::string& origin, const qtree::NodeId& key) {
    auto it = instances_.find(origin);
    if (it == instances_.end()) throw std::invalid_argument("no live instance " + origin);
    const std::size_t index = lookups_.size();
    lookups_.push_back(LookupRecord{network_.sim().now(), origin, key, false, 0.0, {}});
    decided_.push_back(false);
    auto alive = alive_;
    timeouts_.push_back(network_.sim().after(params_.timeout_ms, [this, alive, index] {
        if (*alive) decided_[index] = true;
    }));
    handle(*it->second, Message{index, key});
}

void SimApp::send(Instance& from, const std::string& to, std::function<void(Instance&)> on_arrival) {
    auto target = instances_.find(to);
    if (target == instances_.end()) return;
    auto alive = alive_;
    network_.send(from.host, target->second->host, params_.message_size,
                  [this, alive, to, fn = std::move(on_arrival)] {
                      if (!*alive) return;
                      auto it = instances_.find(to);
                      if (it != instances_.end()) fn(*it->second);
                  });
}

void SimApp::handle(Instance& at, Message m) {
    if (loss_ > 0.0) {
        std::bernoulli_distribution drop(loss_);
        if (drop(at.rng)) return;
    }
    auto& sim = network_.sim();
    const double start = std::max(sim.now(), at.busy_until);
    at.busy_until = start + params_.service_ms;
    auto alive = alive_;
    const auto name = at.name;
    const auto serial = at.serial;
    sim.at(at.busy_until, [this, alive, name, serial, m = std::move(m)] {
        if (!*alive) return;
        auto it = instances_.find(name);
        if (it == instances_.end() || it->second->serial != serial) return;
        auto& self = *it->second;
        std::vector<qtree::NodeId> members;
        members.reserve(by_id_.size());
        for (const auto& [id, n] : by_id_) members.push_back(id);
        auto lat = [this](const qtree::NodeId& a, const qtree::NodeId& b) { return latency(a, b); };
        const auto next = qtree::route_toward_key(self.id, m.key, members, lat);
        if (next) {
            send(self, by_id_.at(*next), [this, m](Instance& n) { handle(n, m); });
            return;
        }
        const auto origin = lookups_[m.lookup].origin;
        const auto index = m.lookup;
        auto reply = [this, index, owner = self.name](Instance&) {
            if (decided_[index]) return;
            decided_[index] = true;
            auto& rec = lookups_[index];
            rec.completed = true;
            rec.latency_ms = network_.sim().now() - rec.issued_ms;
            rec.owner = owner;
        };
        if (origin == self.name) {
            reply(self);
        } else {
            send(self, origin, reply);
        }
    });
}

std::vector<AppMinute> SimApp::metrics(double start_ms, double window_ms) const {
    if (!(window_ms > 0.0)) throw std::invalid_argument("window must be positive");
    std::map<std::int64_t, std::vector<std::size_t>> by_minute;
    for (std::size_t i = 0; i < lookups_.size(); ++i) {
        if (!decided_[i] || lookups_[i].issued_ms < start_ms) continue;
        by_minute[static_cast<std::int64_t>(std::floor((lookups_[i].issued_ms - start_ms) / window_ms))].push_back(i);
    }
    std::vector<AppMinute> out;
    for (const auto& [minute, idx] : by_minute) {
        AppMinute m;
        m.minute = minute;
        m.issued = idx.size();
        std::map<qtree::NodeId, std::map<std::string, std::size_t>> votes;
        double latency_sum = 0.0;
        for (auto i : idx) {
            const auto& r = lookups_[i];
            if (!r.completed) continue;
            ++m.completed;
            latency_sum += r.latency_ms;
            ++votes[r.key][r.owner];
        }
        for (auto i : idx) {
            const auto& r = lookups_[i];
            if (!r.completed) continue;
            const auto& v = votes.at(r.key);
            const auto majority = std::max_element(v.begin(), v.end(), [](const auto& a, const auto& b) {
                return a.second < b.second;
            });
            if (majority->first == r.owner) ++m.successful;
        }
        m.completion_rate = m.issued ? static_cast<double>(m.completed) / m.issued : 0.0;
        m.success_rate = m.completed ? static_cast<double>(m.successful) / m.completed : 0.0;
        m.mean_latency_ms = m.completed ? latency_sum / m.completed : 0.0;
        const double end = start_ms + (minute + 1) * window_ms;
        for (const auto& [t, live] : census_) {
            if (t >= end) break;
            m.live = live;
        }
        out.push_back(m);
    }
    return out;
}

std::string format_app_metrics_csv(const std::vector<AppMinute>& rows) {
    std::string out = "minute,issued,completed,successful,completion_rate,success_rate,mean_latency_ms,live\n";
    for (const auto& r : rows) {
        out += fmt::format("{},{},{},{},{:.4f},{:.4f},{:.3f},{}\n", r.minute, r.issued, r.completed, r.successful,
                           r.completion_rate, r.success_rate, r.mean_latency_ms, r.live);
    }
    return out;
}

}  // namespace acme::simnet
