#include "acme/simnet/harness.hpp"

#include "acme/ising/query.hpp"

#include <stdexcept>

namespace acme::simnet {

struct SimTriggerIo::Attempt {
    std::vector<std::string> roots;
    ising::SensorQuery query;
    QueryDone done;
    std::size_t next = 0;
    std::uint64_t round = 0;  ///< bumps on each attempt so stale replies are ignored
    bool finished = false;
};

std::string root_host(const std::string& root) {
    const auto colon = root.rfind(':');
    return colon == std::string::npos ? root : root.substr(0, colon);
}

SimTriggerIo::SimTriggerIo(SimCluster& cluster, std::size_t home, double attempt_timeout_ms)
    : cluster_(cluster), home_(home), timeout_ms_(attempt_timeout_ms), loop_(cluster.sim()) {
    if (home >= cluster.size()) throw std::out_of_range("home node outside the cluster");
}

SimTriggerIo::~SimTriggerIo() { *alive_ = false; }

void SimTriggerIo::set_default_endpoint(sensact::SensorServer* server, std::size_t node) {
    default_server_ = server;
    default_node_ = node;
}

double SimTriggerIo::one_way(const SimNode& to) const {
    return cluster_.network().topology().path_latency(cluster_.node(home_).topo_host(), to.topo_host());
}

void SimTriggerIo::query(const std::vector<std::string>& roots, const ising::SensorQuery& query, QueryDone done) {
    if (roots.empty()) {
        direct(query, std::move(done));
        return;
    }
    auto a = std::make_shared<Attempt>();
    a->roots = roots;
    a->query = query;
    a->done = std::move(done);
    try_root(a);
}

void SimTriggerIo::try_root(const std::shared_ptr<Attempt>& a) {
    if (a->next >= a->roots.size()) {
        a->finished = true;
        loop_.post([a] { a->done(std::nullopt); });
        return;
    }
    const auto round = ++a->round;
    SimNode* node = cluster_.find(root_host(a->roots[a->next++]));
    auto alive = alive_;
    loop_.schedule(timeout_ms_, [this, alive, a, round] {
        if (!*alive || a->finished || a->round != round) return;
        ++failovers_;
        try_root(a);
    });
    if (!node) return;
    const double d = one_way(*node);
    loop_.schedule(d, [this, alive, a, round, node, d] {
        if (!*alive || a->finished || a->round != round || !node->alive()) return;
        try {
            node->ising().submit(a->query, [this, alive, a, round, node, d](const ising::EpochResult& r) {
                if (!r.last) return;
                auto tuples = r.tuples;
                loop_.schedule(d, [alive, a, round, node, tuples = std::move(tuples)] {
                    if (!*alive || a->finished || a->round != round || !node->alive()) return;
                    a->finished = true;
                    a->done(tuples);
                });
            });
        } catch (const std::logic_error&) {
            // not a root; the attempt times out
        }
    });
}

void SimTriggerIo::direct(const ising::SensorQuery& query, QueryDone done) {
    SimNode* node = query.host ? cluster_.find(*query.host) : nullptr;
    auto alive = alive_;
    if (!node) {
        loop_.post([done = std::move(done)] { done(std::nullopt); });
        return;
    }
    const double rtt = 2.0 * one_way(*node);
    loop_.schedule(rtt, [this, alive, node, query, done = std::move(done)] {
        if (!*alive) return;
        if (!node->alive()) {
            done(std::nullopt);
            return;
        }
        auto resp = node->server(query.port).serve(sensact::sensor_url(query.sensor, query.args), "entrie");
        if (resp.status != 200) {
            done(std::nullopt);
            return;
        }
        std::vector<ResultTuple> tuples;
        const auto source = node->name() + ":" + std::to_string(query.port);
        for (auto& row : ising::apply_selection(resp.body, query.selection)) {
            tuples.push_back({source, loop_.wall_clock_ms(), std::move(row)});
        }
        done(std::move(tuples));
    });
}

void SimTriggerIo::invoke(const std::string& host, const std::string& port, const std::string& actuator,
                          const std::string& args, InvokeDone done) {
    sensact::SensorServer* server = nullptr;
    SimNode* node = nullptr;
    if (host.empty()) {
        server = default_server_;
        node = &cluster_.node(default_node_);
    } else {
        node = cluster_.find(host);
        if (node) {
            try {
                server = &node->server(static_cast<std::uint16_t>(std::stoul(port)));
            } catch (const std::exception&) {
                server = nullptr;
            }
        }
    }
    if (!server || !node) {
        loop_.post([done = std::move(done)] { done(std::nullopt); });
        return;
    }
    const double d = one_way(*node);
    auto alive = alive_;
    auto url = sensact::sensor_url(actuator, args);
    loop_.schedule(d, [this, alive, server, node, d, url = std::move(url), done = std::move(done)]() mutable {
        if (!*alive) return;
        if (!node->alive()) {
            loop_.schedule(timeout_ms_, [alive, done = std::move(done)] {
                if (*alive) done(std::nullopt);
            });
            return;
        }
        auto resp = server->serve(url, "entrie");
        std::optional<std::string> body;
        if (resp.status == 200) body = std::move(resp.body);
        loop_.schedule(d, [alive, body = std::move(body), done = std::move(done)] {
            if (*alive) done(body);
        });
    });
}

}  // namespace acme::simnet
