#include "acme/simnet/scenario.hpp"

#include "acme/common/rng.hpp"
#include "acme/entrie/config.hpp"
#include "acme/ising/query.hpp"
#include "acme/sensact/actuators.hpp"
#include "acme/simnet/harness.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace acme::simnet {

namespace pt = boost::property_tree;

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

// ---- INI access ----

class Section {
public:
    Section(const pt::ptree& root, std::string name, std::set<std::string> allowed)
        : name_(std::move(name)) {
        auto it = root.find(name_);
        if (it == root.not_found()) return;
        tree_ = &it->second;
        for (const auto& [key, value] : *tree_) {
            if (!allowed.count(key)) throw ScenarioError(name_ + "." + key, "unknown key");
        }
    }

    bool present() const { return tree_ != nullptr; }

    std::optional<std::string> text(const std::string& key) const {
        if (!tree_) return std::nullopt;
        auto v = tree_->get_optional<std::string>(key);
        if (!v) return std::nullopt;
        auto s = *v;
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    }

    template <typename T>
    void number(const std::string& key, T& out) const {
        auto v = text(key);
        if (!v) return;
        const auto d = ising::parse_number(*v);
        if (!d) throw ScenarioError(field(key), "not a number: '" + *v + "'");
        if constexpr (std::is_integral_v<T>) {
            if (*d != std::floor(*d)) throw ScenarioError(field(key), "expected an integer");
            if (std::is_unsigned_v<T> && *d < 0) throw ScenarioError(field(key), "must not be negative");
        }
        out = static_cast<T>(*d);
    }

    std::vector<std::string> list(const std::string& key) const {
        std::vector<std::string> out;
        auto v = text(key);
        if (!v) return out;
        std::stringstream ss(*v);
        std::string item;
        while (std::getline(ss, item, ',')) {
            const auto b = item.find_first_not_of(" \t");
            const auto e = item.find_last_not_of(" \t");
            if (b == std::string::npos) throw ScenarioError(field(key), "empty list element");
            out.push_back(item.substr(b, e - b + 1));
        }
        return out;
    }

    template <typename T>
    void numbers(const std::string& key, std::vector<T>& out) const {
        if (!text(key)) return;
        out.clear();
        for (const auto& item : list(key)) {
            const auto d = ising::parse_number(item);
            if (!d) throw ScenarioError(field(key), "not a number: '" + item + "'");
            out.push_back(static_cast<T>(*d));
        }
    }

    std::string field(const std::string& key) const { return name_ + "." + key; }
    const pt::ptree* tree() const { return tree_; }

private:
    std::string name_;
    const pt::ptree* tree_ = nullptr;
};

ScenarioKind kind_from_string(const std::string& s) {
    if (s == "latency") return ScenarioKind::kLatency;
    if (s == "bytes") return ScenarioKind::kBytes;
    if (s == "loss") return ScenarioKind::kLoss;
    if (s == "tree") return ScenarioKind::kTree;
    if (s == "trigger") return ScenarioKind::kTrigger;
    if (s == "self_repair") return ScenarioKind::kSelfRepair;
    throw ScenarioError("scenario.kind", "unknown kind '" + s + "'");
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

std::vector<entrie::TriggerSpec> load_specs(const std::filesystem::path& path,
                                            const std::map<std::string, std::string>& bindings) {
    return entrie::bind(entrie::load_config(path.string()), bindings);
}

}  // namespace

std::string_view to_string(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::kLatency: return "latency";
        case ScenarioKind::kBytes: return "bytes";
        case ScenarioKind::kLoss: return "loss";
        case ScenarioKind::kTree: return "tree";
        case ScenarioKind::kTrigger: return "trigger";
        case ScenarioKind::kSelfRepair: return "self_repair";
    }
    return "?";
}

// ---- ENTRIE + application ----

TriggerRunResult run_trigger_experiment(const ExperimentSetup& setup, const std::vector<entrie::TriggerSpec>& specs,
                                        const TriggerRunParams& params) {
    const auto topo = generate_topology(setup.seed, setup.topology);
    SimDeployment d(topo, first_hosts(topo, setup.seed, params.nodes), setup.cluster);
    std::vector<int> app_hosts;
    for (std::size_t i = 0; i < d.cluster.size(); ++i) app_hosts.push_back(d.cluster.node(i).topo_host());
    SimApp app(d.network, app_hosts, params.app, derive_seed(setup.seed, 0x617070));

    std::unique_ptr<sensact::ActuatorLedger> ledger;
    if (!params.ledger.empty()) ledger = std::make_unique<sensact::ActuatorLedger>(params.ledger);
    const double t0 = d.sim.now();
    sensact::SensorServer control(0);
    sensact::add_actuators(control, {&app.processes(), &app, ledger.get(),
                                     [&d, t0] { return static_cast<std::int64_t>(std::llround(d.sim.now() - t0)); }});

    SimTriggerIo io(d.cluster, params.home);
    io.set_default_endpoint(&control, params.home);
    entrie::Entrie engine(specs, io, derive_seed(setup.seed, 0x656e74726965));
    engine.start();
    d.sim.run_until(t0 + params.duration_ms);
    engine.stop();

    TriggerRunResult out;
    out.transcript = engine.transcript();
    out.metrics = app.metrics(t0);
    for (const auto& [t, n] : app.census_log()) out.census.emplace_back(t - t0, n);
    out.final_live = app.live();
    return out;
}

// ---- self-repair ----

std::vector<std::vector<double>> load_script(const SelfRepairParams& params, std::uint64_t seed) {
    if (params.minutes <= 0) throw std::invalid_argument("minutes must be positive");
    if (!(params.base_min >= 0.0) || params.base_max < params.base_min) {
        throw std::invalid_argument("base load range is empty");
    }
    std::mt19937_64 rng(derive_seed(seed, 0x6c6f6164));
    std::uniform_real_distribution<double> base(params.base_min, params.base_max);
    std::vector<std::vector<double>> loads(static_cast<std::size_t>(params.minutes),
                                           std::vector<double>(params.nodes));
    for (auto& minute : loads) {
        for (auto& v : minute) v = std::round(base(rng) * 100.0) / 100.0;
    }
    for (const auto& s : params.spikes) {
        if (s.minute < 0 || s.minute >= params.minutes || s.node >= params.nodes) {
            throw std::invalid_argument(fmt::format("spike {}:{} outside the script", s.minute, s.node));
        }
        loads[static_cast<std::size_t>(s.minute)][s.node] = s.load;
    }
    return loads;
}

std::vector<RebootEvent> self_repair_oracle(const std::vector<std::vector<double>>& loads,
                                            const std::vector<std::string>& hosts, double scale,
                                            std::size_t window) {
    std::vector<double> avg;
    std::vector<RebootEvent> out;
    bool prev = false;
    for (std::size_t k = 0; k < loads.size(); ++k) {
        const auto& row = loads[k];
        double sum = 0.0;
        std::size_t arg = 0;
        for (std::size_t i = 0; i < row.size(); ++i) {
            sum += row[i];
            if (row[i] > row[arg]) arg = i;
        }
        avg.push_back(sum / static_cast<double>(row.size()));
        const std::size_t from = avg.size() > window ? avg.size() - window : 0;
        const double hist = *std::max_element(avg.begin() + static_cast<std::ptrdiff_t>(from), avg.end());
        const bool cur = row[arg] > scale * hist;
        if (cur && !prev) out.push_back(RebootEvent{static_cast<int>(k), hosts.at(arg)});
        prev = cur;
    }
    return out;
}

SelfRepairResult run_self_repair(const ExperimentSetup& setup, const std::vector<entrie::TriggerSpec>& specs,
                                 const SelfRepairParams& params) {
    const auto topo = generate_topology(setup.seed, setup.topology);
    SimDeployment d(topo, first_hosts(topo, setup.seed, params.nodes), setup.cluster);
    SelfRepairResult out;
    out.loads = load_script(params, setup.seed);
    for (std::size_t i = 0; i < d.cluster.size(); ++i) out.hosts.push_back(d.cluster.node(i).name());

    const double t0 = d.sim.now();
    auto* sim = &d.sim;
    const auto* loads = &out.loads;
    std::vector<std::unique_ptr<sensact::VirtualProcessManager>> managers;
    for (std::size_t i = 0; i < d.cluster.size(); ++i) {
        auto& node = d.cluster.node(i);
        node.server(params.load_port).add("load", [sim, loads, t0, i](const sensact::SensorRequest&) {
            const auto k = static_cast<long>(std::floor((sim->now() - t0 + 30000.0) / 60000.0));
            const auto last = static_cast<long>(loads->size()) - 1;
            return ising::format_number((*loads)[static_cast<std::size_t>(std::clamp(k, 0L, last))][i]) + "\n";
        });
        managers.push_back(std::make_unique<sensact::VirtualProcessManager>());
        managers.back()->start();
        sensact::add_actuators(node.server(params.reboot_port), {managers.back().get(), nullptr, nullptr, {}});
    }

    SimTriggerIo io(d.cluster, 0);
    entrie::Entrie engine(specs, io, derive_seed(setup.seed, 0x656e74726965));
    engine.start();
    d.sim.run_until(t0 + (params.minutes - 1) * 60000.0 + 30000.0);
    engine.stop();

    out.transcript = engine.transcript();
    for (const auto& row : out.transcript) {
        if (row.action != "reboot" || row.status.rfind("OK", 0) != 0) continue;
        out.fired.push_back(RebootEvent{static_cast<int>(std::llround(row.timestamp_ms / 60000.0)), row.target});
    }
    out.expected = self_repair_oracle(out.loads, out.hosts);
    return out;
}

// ---- scenario files ----

Scenario parse_scenario(const std::string& text, const std::filesystem::path& base_dir) {
    pt::ptree root;
    try {
        std::istringstream in(text);
        pt::read_ini(in, root);
    } catch (const pt::ini_parser_error& e) {
        throw ScenarioError(fmt::format("line {}", e.line()), e.message());
    }
    static const std::set<std::string> sections{"scenario", "topology", "ising",   "grid",        "loss",
                                                "tree",     "trigger",  "bindings", "app", "self_repair"};
    for (const auto& [name, sub] : root) {
        if (!sections.count(name)) throw ScenarioError(name, "unknown section");
    }

    Scenario s;
    Section meta(root, "scenario", {"name", "kind", "seed", "description"});
    if (!meta.present()) throw ScenarioError("scenario", "missing section");
    s.name = meta.text("name").value_or("");
    s.description = meta.text("description").value_or("");
    const auto kind = meta.text("kind");
    if (!kind) throw ScenarioError("scenario.kind", "missing");
    s.kind = kind_from_string(*kind);
    if (!meta.text("seed")) throw ScenarioError("scenario.seed", "missing");
    meta.number("seed", s.setup.seed);

    Section topo(root, "topology", {"transit_domains", "transit_per_domain", "transit_jitter", "hosts_per_stub",
                                    "min_stub_hosts", "rtt_median_ms", "extra_edge_prob"});
    auto& tp = s.setup.topology;
    topo.number("transit_domains", tp.transit_domains);
    topo.number("transit_per_domain", tp.transit_per_domain);
    topo.number("transit_jitter", tp.transit_jitter);
    topo.number("hosts_per_stub", tp.hosts_per_stub);
    topo.number("min_stub_hosts", tp.min_stub_hosts);
    topo.number("rtt_median_ms", tp.rtt_median_ms);
    topo.number("extra_edge_prob", tp.extra_edge_prob);

    Section is(root, "ising", {"compute_max_ms", "latency_max_ms", "max_depth", "compute_per_value_ms",
                               "message_size", "digits", "sensor_latency_ms"});
    auto& cp = s.setup.cluster;
    is.number("compute_max_ms", cp.ising.compute_max_ms);
    is.number("latency_max_ms", cp.ising.latency_max_ms);
    is.number("max_depth", cp.ising.max_depth);
    is.number("compute_per_value_ms", cp.ising.compute_per_value_ms);
    is.number("message_size", cp.message_size);
    is.number("digits", cp.digits);
    is.number("sensor_latency_ms", cp.sensor_latency_ms);

    Section grid(root, "grid", {"sizes", "topologies", "ops", "repetitions"});
    grid.numbers("sizes", s.grid.sizes);
    if (grid.text("topologies")) {
        s.grid.kinds.clear();
        for (const auto& k : grid.list("topologies")) {
            try {
                s.grid.kinds.push_back(qtree::topology_from_string(k));
            } catch (const std::invalid_argument& e) {
                throw ScenarioError(grid.field("topologies"), e.what());
            }
        }
    }
    if (grid.text("ops")) {
        s.grid.ops.clear();
        for (const auto& o : grid.list("ops")) {
            try {
                s.grid.ops.push_back(ising::aggregate_from_string(o));
            } catch (const std::invalid_argument& e) {
                throw ScenarioError(grid.field("ops"), e.what());
            }
        }
    }
    grid.number("repetitions", s.grid.repetitions);
    if (s.grid.repetitions <= 0) throw ScenarioError("grid.repetitions", "must be positive");

    Section loss(root, "loss", {"n", "p_list", "queries", "topology"});
    loss.number("n", s.loss.n);
    loss.numbers("p_list", s.loss.p_list);
    for (auto p : s.loss.p_list) {
        if (p < 0.0 || p > 1.0) throw ScenarioError("loss.p_list", "probabilities must be in [0,1]");
    }
    loss.number("queries", s.loss.queries);
    if (auto k = loss.text("topology")) {
        try {
            s.loss.kind = qtree::topology_from_string(*k);
        } catch (const std::invalid_argument& e) {
            throw ScenarioError("loss.topology", e.what());
        }
    }

    Section tree(root, "tree", {"n", "seeds"});
    tree.number("n", s.tree_n);
    tree.numbers("seeds", s.tree_seeds);
    if (s.tree_seeds.empty()) s.tree_seeds = {s.setup.seed};

    Section trig(root, "trigger", {"config", "nodes", "duration_ms", "home"});
    if (auto c = trig.text("config")) s.trigger.config = resolve(base_dir, *c);
    trig.number("nodes", s.trigger.nodes);
    trig.number("duration_ms", s.trigger.duration_ms);
    trig.number("home", s.trigger.home);
    if (auto it = root.find("bindings"); it != root.not_found()) {
        for (const auto& [k, v] : it->second) s.trigger.bindings[k] = v.data();
    }

    Section app(root, "app", {"workload_period_ms", "timeout_ms", "service_ms", "key_space", "message_size"});
    app.number("workload_period_ms", s.trigger.app.workload_period_ms);
    app.number("timeout_ms", s.trigger.app.timeout_ms);
    app.number("service_ms", s.trigger.app.service_ms);
    app.number("key_space", s.trigger.app.key_space);
    app.number("message_size", s.trigger.app.message_size);

    Section rep(root, "self_repair",
                {"config", "nodes", "minutes", "base_min", "base_max", "spikes", "load_port", "reboot_port"});
    if (auto c = rep.text("config")) s.repair.config = resolve(base_dir, *c);
    rep.number("nodes", s.repair.nodes);
    rep.number("minutes", s.repair.minutes);
    rep.number("base_min", s.repair.base_min);
    rep.number("base_max", s.repair.base_max);
    rep.number("load_port", s.repair.load_port);
    rep.number("reboot_port", s.repair.reboot_port);
    for (const auto& item : rep.list("spikes")) {
        int minute = 0;
        std::size_t node = 0;
        double load = 0.0;
        char c1 = 0, c2 = 0;
        std::istringstream in(item);
        if (!(in >> minute >> c1 >> node >> c2 >> load) || c1 != ':' || c2 != ':' || !in.eof()) {
            throw ScenarioError("self_repair.spikes", "expected minute:node:load, got '" + item + "'");
        }
        s.repair.spikes.push_back({minute, node, load});
    }

    if (s.kind == ScenarioKind::kTrigger && s.trigger.config.empty()) {
        throw ScenarioError("trigger.config", "missing");
    }
    if (s.kind == ScenarioKind::kSelfRepair && s.repair.config.empty()) {
        throw ScenarioError("self_repair.config", "missing");
    }
    return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ScenarioError("scenario", "cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str(), path.parent_path());
}

std::vector<std::filesystem::path> run_scenario(const Scenario& s, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::vector<std::filesystem::path> files;
    auto emit = [&](const std::string& name, const std::string& text) {
        const auto path = out_dir / name;
        write_file(path, text);
        files.push_back(path);
    };
    switch (s.kind) {
        case ScenarioKind::kLatency:
            emit("latency.csv", format_latency_csv(run_latency_experiment(s.setup, s.grid)));
            break;
        case ScenarioKind::kBytes:
            emit("bytes.csv", format_bytes_csv(run_bytes_experiment(s.setup, s.grid)));
            break;
        case ScenarioKind::kLoss: {
            const auto r = run_loss_experiment(s.setup, s.loss);
            emit("loss.csv", format_loss_csv(r.rows));
            emit("loss_raw.csv", format_loss_raw_csv(r.raw));
            break;
        }
        case ScenarioKind::kTree:
            emit("tree.csv", format_tree_csv(run_tree_experiment(s.setup.topology, s.tree_n, s.setup.cluster.digits,
                                                                 s.tree_seeds)));
            break;
        case ScenarioKind::kTrigger: {
            auto params = s.trigger;
            params.ledger = out_dir / "actuators.csv";
            const auto r = run_trigger_experiment(s.setup, load_specs(params.config, params.bindings), params);
            files.push_back(params.ledger);
            emit("transcript.csv", entrie::format_transcript(r.transcript));
            emit("census.csv", format_census_csv(r.census));
            emit("app_metrics.csv", format_app_metrics_csv(r.metrics));
            break;
        }
        case ScenarioKind::kSelfRepair: {
            const auto topo = generate_topology(s.setup.seed, s.setup.topology);
            const auto root = "h" + std::to_string(first_hosts(topo, s.setup.seed, 1).front());
            auto bindings = s.trigger.bindings;
            bindings.emplace("ISING_host", root);
            bindings.emplace("ISING_port", std::to_string(s.setup.cluster.ising_port));
            bindings.emplace("load_sensor_server_port", std::to_string(s.repair.load_port));
            bindings.emplace("reboot_actuator_servr_port", std::to_string(s.repair.reboot_port));
            const auto r = run_self_repair(s.setup, load_specs(s.repair.config, bindings), s.repair);
            emit("transcript.csv", entrie::format_transcript(r.transcript));
            emit("loads.csv", format_loads_csv(r.loads, r.hosts));
            emit("reboots.csv", format_reboots_csv(r.fired, r.expected));
            break;
        }
    }
    return files;
}

std::string format_census_csv(const std::vector<std::pair<double, std::size_t>>& census) {
    std::string out = "timestamp_ms,live\n";
    for (const auto& [t, n] : census) out += fmt::format("{},{}\n", std::llround(t), n);
    return out;
}

std::string format_reboots_csv(const std::vector<RebootEvent>& fired, const std::vector<RebootEvent>& expected) {
    std::string out = "source,minute,host\n";
    for (const auto& e : fired) out += fmt::format("fired,{},{}\n", e.minute, e.host);
    for (const auto& e : expected) out += fmt::format("oracle,{},{}\n", e.minute, e.host);
    return out;
}

std::string format_loads_csv(const std::vector<std::vector<double>>& loads, const std::vector<std::string>& hosts) {
    std::string out = "minute,host,load\n";
    for (std::size_t k = 0; k < loads.size(); ++k) {
        for (std::size_t i = 0; i < loads[k].size(); ++i) {
            out += fmt::format("{},{},{}\n", k, hosts.at(i), ising::format_number(loads[k][i]));
        }
    }
    return out;
}

}  // namespace acme::simnet
