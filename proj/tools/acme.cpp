#include "acme/common/csv.hpp"
#include "acme/common/log.hpp"
#include "acme/entrie/config.hpp"
#include "acme/entrie/engine.hpp"
#include "acme/ising/query.hpp"
#include "acme/realnet/asio_loop.hpp"
#include "acme/realnet/node.hpp"
#include "acme/realnet/trigger_io.hpp"
#include "acme/sensact/actuators.hpp"
#include "acme/sensact/sensors.hpp"
#include "acme/simnet/report.hpp"
#include "acme/simnet/scenario.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <chrono>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>

namespace {

using namespace acme;

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;

/// Config problems map to exit code 1.
struct ConfigProblem : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream s(text);
    std::string item;
    while (std::getline(s, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::int64_t wall_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

void block_signals(sigset_t& set) {
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
}

std::optional<realnet::ClusterConfig> maybe_cluster(const std::string& path) {
    if (path.empty()) return std::nullopt;
    try {
        return realnet::load_cluster_config(path);
    } catch (const std::invalid_argument& e) {
        throw ConfigProblem(path + ": " + e.what());
    }
}

// ---- sim ----

struct SimOptions {
    std::string scenario;
    std::optional<std::uint64_t> seed;
    std::string out = "results";
};

int cmd_sim(const SimOptions& o) {
    simnet::Scenario s;
    try {
        s = simnet::load_scenario(o.scenario);
    } catch (const simnet::ScenarioError& e) {
        throw ConfigProblem(o.scenario + ": " + e.what());
    }
    if (o.seed) s.setup.seed = *o.seed;
    log::write(log::Level::kInfo, "running {} ({}) seed {}", s.name, simnet::to_string(s.kind), s.setup.seed);
    const auto t0 = std::chrono::steady_clock::now();
    for (const auto& p : simnet::run_scenario(s, o.out)) std::cout << p.string() << "\n";
    log::write(log::Level::kInfo, "done in {:.1f} s",
               std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    return kOk;
}

// ---- serve ----

/// Records the knobs; the served application reads them from here.
class RecordedControl : public sensact::AppControl {
public:
    void set_loss(double fraction) override {
        loss_ = fraction;
        log::write(log::Level::kInfo, "loss set to {}", fraction);
    }
    void set_workload_period(double period_ms) override {
        period_ = period_ms;
        log::write(log::Level::kInfo, "workload period set to {} ms", period_ms);
    }

private:
    std::atomic<double> loss_{0.0};
    std::atomic<double> period_{10000.0};
};

struct ServeOptions {
    std::string config;
    std::string listen;
    std::uint16_t sensor_port = 9100;
    std::uint16_t actuator_port = 9200;
    std::string load_file;
    std::string ledger;
    std::string app_cmd;
    std::uint32_t instances = 0;
};

std::optional<double> read_number(const std::string& path) {
    std::ifstream in(path);
    double v = 0.0;
    if (in >> v) return v;
    return std::nullopt;
}

int cmd_serve(const ServeOptions& o) {
    auto cluster = *maybe_cluster(o.config);
    if (!cluster.find(o.listen)) throw ConfigProblem("--listen: node '" + o.listen + "' is not in " + o.config);

    std::unique_ptr<sensact::ProcessManager> processes;
    if (o.app_cmd.empty()) {
        processes = std::make_unique<sensact::VirtualProcessManager>(o.listen + "-app");
    } else {
        std::vector<std::string> argv;
        std::stringstream s(o.app_cmd);
        for (std::string w; s >> w;) argv.push_back(w);
        processes = std::make_unique<sensact::LocalProcessManager>(std::move(argv));
    }
    for (std::uint32_t i = 0; i < o.instances; ++i) processes->start();

    RecordedControl control;
    std::unique_ptr<sensact::ActuatorLedger> ledger;
    if (!o.ledger.empty()) ledger = std::make_unique<sensact::ActuatorLedger>(o.ledger);
    sensact::CounterSet counters;

    sigset_t signals;
    block_signals(signals);

    realnet::RealNode node(cluster, o.listen);
    auto& sensors = node.server(o.sensor_port);
    sensors.add("hostname", sensact::hostname_sensor(o.listen));
    const auto load_file = o.load_file;
    sensors.add("load", sensact::load_sensor([load_file] {
        if (!load_file.empty()) {
            if (auto v = read_number(load_file)) return *v;
        }
        return sensact::system_load().value_or(0.0);
    }));
    sensors.add("counter", counters.sensor());

    auto& actuators = node.server(o.actuator_port);
    sensact::add_actuators(actuators, {processes.get(), &control, ledger.get(), &wall_ms});

    node.start();
    log::write(log::Level::kInfo, "{} serving (sensors {}, actuators {})", o.listen, o.sensor_port, o.actuator_port);
    int sig = 0;
    sigwait(&signals, &sig);
    log::write(log::Level::kInfo, "{} stopping on signal {}", o.listen, sig);
    node.stop();
    return kOk;
}

// ---- query ----

struct QueryOptions {
    std::string roots;
    std::string cluster;
    std::string url;
    double timeout_ms = 5000.0;
};

int cmd_query(const QueryOptions& o) {
    ising::SensorQuery q;
    try {
        auto text = o.url;
        const auto mark = text.find('?');
        if (mark == std::string::npos) text = "/ising?" + text;
        q = ising::parse_query(text);
    } catch (const std::invalid_argument& e) {
        throw ConfigProblem(std::string("query: ") + e.what());
    }
    if (!q.is_snapshot()) throw ConfigProblem("query: epoch: only snapshot queries are supported here");
    const auto roots = split_list(o.roots);
    if (roots.empty() && !q.host) throw ConfigProblem("--roots: required for host=ALL");

    realnet::AsioLoop loop;
    loop.start();
    std::optional<std::vector<ResultTuple>> result;
    {
        realnet::HttpTriggerIo io(loop, maybe_cluster(o.cluster), "", o.timeout_ms);
        std::promise<std::optional<std::vector<ResultTuple>>> done;
        auto f = done.get_future();
        loop.run_in_loop([&] { io.query(roots, q, [&](auto r) { done.set_value(std::move(r)); }); });
        result = f.get();
    }
    loop.stop();
    if (!result) {
        std::cerr << "acme: connection failed: no root answered (" << (roots.empty() ? *q.host : o.roots) << ")\n";
        return kRuntimeError;
    }
    for (const auto& t : *result) std::cout << format_tuple(t) << "\n";
    return kOk;
}

// ---- trigger ----

struct TriggerOptions {
    std::string config;
    std::string roots;
    std::string cluster;
    std::string actuator;
    std::string out;
    std::vector<std::string> bindings;
    double duration_ms = 0.0;
    std::uint64_t seed = 1;
    double timeout_ms = 5000.0;
};

int cmd_trigger(const TriggerOptions& o) {
    std::vector<entrie::TriggerSpec> specs;
    try {
        specs = entrie::load_config(o.config);
        std::map<std::string, std::string> values;
        for (const auto& b : o.bindings) {
            const auto eq = b.find('=');
            if (eq == std::string::npos) throw ConfigProblem("--bind: expected name=value, got '" + b + "'");
            values[b.substr(0, eq)] = b.substr(eq + 1);
        }
        specs = entrie::bind(std::move(specs), values);
        const auto roots = split_list(o.roots);
        if (!roots.empty()) specs = entrie::with_roots(std::move(specs), roots);
    } catch (const std::invalid_argument& e) {
        throw ConfigProblem(o.config + ": " + e.what());
    }
    auto cluster = maybe_cluster(o.cluster);

    std::ofstream transcript;
    if (!o.out.empty()) {
        std::filesystem::create_directories(o.out);
        transcript.open(std::filesystem::path(o.out) / "transcript.csv", std::ios::binary);
        transcript << "timestamp_ms,trigger_id,action,target,status\n" << std::flush;
    }

    sigset_t signals;
    block_signals(signals);

    realnet::AsioLoop loop;
    loop.start();
    std::promise<void> finished;
    auto finished_f = finished.get_future();
    std::unique_ptr<realnet::HttpTriggerIo> io;
    std::unique_ptr<entrie::Entrie> engine;
    std::mutex out_mutex;
    auto finish = [&] {
        try {
            finished.set_value();
        } catch (const std::future_error&) {
        }
    };
    loop.run_in_loop([&] {
        io = std::make_unique<realnet::HttpTriggerIo>(loop, cluster, o.actuator, o.timeout_ms);
        engine = std::make_unique<entrie::Entrie>(specs, *io, o.seed);
        engine->on_transcript = [&](const entrie::TranscriptRow& r) {
            const auto line =
                join_csv_row({std::to_string(r.timestamp_ms), r.trigger_id, r.action, r.target, r.status});
            std::lock_guard lock(out_mutex);
            std::cout << line << std::endl;
            if (transcript.is_open()) transcript << line << "\n" << std::flush;
        };
        engine->start();
        auto limit = o.duration_ms > 0 ? std::optional<double>(o.duration_ms) : engine->horizon_ms();
        if (limit) loop.schedule(*limit, finish);
    });

    std::thread waiter([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        loop.run_in_loop(finish);
    });
    finished_f.wait();
    std::promise<void> stopped;
    loop.run_in_loop([&] {
        engine->stop();
        engine.reset();
        io.reset();
        stopped.set_value();
    });
    stopped.get_future().wait();
    loop.stop();
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    return kOk;
}

// ---- report ----

struct ReportOptions {
    std::string results;
    std::string out;
};

int cmd_report(const ReportOptions& o) {
    std::vector<std::filesystem::path> written;
    try {
        written = simnet::write_report(o.results, o.out.empty() ? o.results : o.out);
    } catch (const std::invalid_argument& e) {
        throw ConfigProblem(e.what());
    }
    for (const auto& p : written) std::cout << p.string() << "\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ACME monitoring and control: simulation, live nodes, queries and triggers"};
    app.require_subcommand(1);

    SimOptions sim;
    auto* sim_cmd = app.add_subcommand("sim", "Run a scenario on the simulator and write its CSVs");
    sim_cmd->add_option("--scenario", sim.scenario, "Scenario file")->required()->check(CLI::ExistingFile);
    sim_cmd->add_option("--seed", sim.seed, "Override the scenario seed");
    sim_cmd->add_option("--out", sim.out, "Output directory")->capture_default_str();

    ServeOptions serve;
    auto* serve_cmd = app.add_subcommand("serve", "Run one live node");
    serve_cmd->add_option("--config", serve.config, "Cluster JSON")->required()->check(CLI::ExistingFile);
    serve_cmd->add_option("--listen", serve.listen, "This node's name in the cluster config")->required();
    serve_cmd->add_option("--sensor-port", serve.sensor_port, "Logical port of hostname/load/counter")
        ->capture_default_str();
    serve_cmd->add_option("--actuator-port", serve.actuator_port, "Logical port of the actuators")
        ->capture_default_str();
    serve_cmd->add_option("--load-file", serve.load_file, "Read the load sensor from this file");
    serve_cmd->add_option("--ledger", serve.ledger, "Actuator ledger file");
    serve_cmd->add_option("--app-cmd", serve.app_cmd, "Command line of the managed application");
    serve_cmd->add_option("--instances", serve.instances, "Instances to start at boot");

    QueryOptions query;
    auto* query_cmd = app.add_subcommand("query", "Snapshot query; prints result tuples as CSV");
    query_cmd->add_option("--roots", query.roots, "ISING roots host:port, in failover order");
    query_cmd->add_option("--cluster", query.cluster, "Cluster JSON for resolving node names");
    query_cmd->add_option("--timeout-ms", query.timeout_ms, "Per-root timeout")->capture_default_str();
    query_cmd->add_option("url", query.url, "Query, e.g. port=9100&sensor=load&host=ALL&op=AVG")
        ->required();

    TriggerOptions trigger;
    auto* trigger_cmd = app.add_subcommand("trigger", "Run the trigger engine against live nodes");
    trigger_cmd->add_option("--config", trigger.config, "Trigger XML")->required()->check(CLI::ExistingFile);
    trigger_cmd->add_option("--roots", trigger.roots, "ISING roots host:port replacing those in the config");
    trigger_cmd->add_option("--cluster", trigger.cluster, "Cluster JSON for resolving node names");
    trigger_cmd->add_option("--actuator", trigger.actuator, "Default actuator endpoint host:port");
    trigger_cmd->add_option("--bind", trigger.bindings, "Placeholder value name=value");
    trigger_cmd->add_option("--out", trigger.out, "Directory for transcript.csv");
    trigger_cmd->add_option("--duration-ms", trigger.duration_ms, "Stop after this long (default: config horizon)");
    trigger_cmd->add_option("--seed", trigger.seed, "Seed for randomized periods")->capture_default_str();
    trigger_cmd->add_option("--timeout-ms", trigger.timeout_ms, "Per-request timeout")->capture_default_str();

    ReportOptions report;
    auto* report_cmd = app.add_subcommand("report", "Aggregate result CSVs into figure and table shapes");
    report_cmd->add_option("results", report.results, "Results directory")->required()->check(CLI::ExistingDirectory);
    report_cmd->add_option("--out", report.out, "Output directory (default: the results directory)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (*sim_cmd) return cmd_sim(sim);
        if (*serve_cmd) return cmd_serve(serve);
        if (*query_cmd) return cmd_query(query);
        if (*trigger_cmd) return cmd_trigger(trigger);
        if (*report_cmd) return cmd_report(report);
    } catch (const ConfigProblem& e) {
        std::cerr << "acme: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "acme: " << e.what() << "\n";
        return kRuntimeError;
    }
    return kConfigError;
}
