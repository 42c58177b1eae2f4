// Acceptance run: one PASS/FAIL line per criterion.
//
//   acme_acceptance [--criterion N] --cli path/to/acme --scenarios dir --work dir

#include "acme/common/csv.hpp"
#include "acme/realnet/node.hpp"
#include "acme/sensact/actuators.hpp"
#include "acme/simnet/experiments.hpp"
#include "acme/simnet/scenario.hpp"

#include "chain.hpp"
#include "oracle.hpp"

#include <fmt/core.h>

#include <fcntl.h>
#include <spawn.h>
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

extern char** environ;

namespace {

using namespace acme;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Options {
    int only = 0;
    fs::path cli;
    fs::path scenarios;
    fs::path work = "acceptance_work";
};

struct Verdict {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

/// Rows of a CSV file with a header, keyed by column name.
std::vector<std::map<std::string, std::string>> read_csv(const fs::path& p) {
    auto lines = split_lines(slurp(p));
    std::vector<std::map<std::string, std::string>> rows;
    if (lines.empty()) return rows;
    auto header = split_csv_row(lines[0]);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        auto f = split_csv_row(lines[i]);
        std::map<std::string, std::string> row;
        for (std::size_t c = 0; c < header.size() && c < f.size(); ++c) row[header[c]] = f[c];
        rows.push_back(std::move(row));
    }
    return rows;
}

// 1. In-network aggregation equals central computation.
Verdict criterion_1(const Options&) {
    const auto t0 = Clock::now();
    const auto topo = simnet::generate_topology(1);
    std::mt19937_64 rng(2024);
    const ising::AggregateOp ops[] = {ising::AggregateOp::kMin,    ising::AggregateOp::kMax, ising::AggregateOp::kSum,
                                      ising::AggregateOp::kCount,  ising::AggregateOp::kAvg,
                                      ising::AggregateOp::kMedian, ising::AggregateOp::kValue};
    int ok = 0;
    std::string first_failure;
    for (int i = 0; i < 200; ++i) {
        auto c = check::random_case(topo, rng, ops[i % 7], 64);
        auto r = check::check_case(topo, c);
        if (r.match) {
            ++ok;
        } else if (first_failure.empty()) {
            first_failure = r.detail;
        }
    }
    const double secs = seconds_since(t0);
    return {ok == 200 && secs < 60.0, fmt::format("{}/200 cases match, {:.1f} s{}", ok, secs,
                                                  first_failure.empty() ? "" : "; first failure " + first_failure)};
}

// 2. Loss table.
Verdict criterion_2(const Options&) {
    const auto t0 = Clock::now();
    simnet::ExperimentSetup setup;
    simnet::LossParams params;
    auto result = simnet::run_loss_experiment(setup, params);
    const double secs = seconds_since(t0);
    bool pass = secs < 300.0;
    std::string detail;
    double prev_lost = 0.0;
    for (const auto& r : result.rows) {
        const bool frac_ok = std::abs(r.lossy_fraction - r.expected_fraction) <= 0.05;
        const bool lost_ok = r.mean_nodes_lost >= 4.0 && r.mean_nodes_lost <= 10.0 && r.mean_nodes_lost >= prev_lost;
        pass = pass && frac_ok && lost_ok;
        prev_lost = r.mean_nodes_lost;
        detail += fmt::format("p={} lossy {:.3f} (expect {:.3f}{}) lost {:.2f}{}; ", ising::format_number(r.p),
                              r.lossy_fraction, r.expected_fraction, frac_ok ? "" : " OUT", r.mean_nodes_lost,
                              lost_ok ? "" : " OUT");
    }
    detail += fmt::format("avg depth {:.2f}, {:.1f} s", result.rows.empty() ? 0.0 : result.rows[0].avg_depth, secs);
    return {pass, detail};
}

double fitted_slope(const std::vector<std::pair<double, double>>& xy) {
    double mx = 0, my = 0;
    for (auto [x, y] : xy) mx += x, my += y;
    mx /= static_cast<double>(xy.size());
    my /= static_cast<double>(xy.size());
    double num = 0, den = 0;
    for (auto [x, y] : xy) num += (x - mx) * (y - my), den += (x - mx) * (x - mx);
    return num / den;
}

// 3. Bytes scaling.
Verdict criterion_3(const Options&) {
    simnet::ExperimentSetup setup;
    auto rows = simnet::run_bytes_experiment(setup, {});
    bool exact = true;
    std::vector<std::pair<double, double>> tmed, dmed;
    double depth = 0.0;
    std::size_t depth_n = 0;
    for (const auto& r : rows) {
        const bool ttree = r.kind == qtree::TopologyKind::kTtree;
        const bool median = r.op == ising::AggregateOp::kMedian;
        if (!(ttree && median)) exact = exact && r.bytes == r.n * setup.cluster.message_size;
        if (ttree && median) tmed.emplace_back(static_cast<double>(r.n), static_cast<double>(r.bytes));
        if (!ttree && median) dmed.emplace_back(static_cast<double>(r.n), static_cast<double>(r.bytes));
        if (ttree && median && r.n > depth_n) depth = r.avg_depth, depth_n = r.n;
    }
    const double ratio = fitted_slope(tmed) / fitted_slope(dmed);
    const bool ratio_ok = std::abs(ratio - depth) <= 0.25 * depth;
    return {exact && ratio_ok, fmt::format("lower curves equal n*{} {}; slope ratio {:.2f} vs avg depth {:.2f} at n={}",
                                           setup.cluster.message_size, exact ? "yes" : "NO", ratio, depth, depth_n)};
}

// 4. Latency trends.
Verdict criterion_4(const Options&) {
    simnet::ExperimentSetup setup;
    simnet::GridParams grid;
    grid.sizes = {64, 512};
    auto rows = simnet::run_latency_experiment(setup, grid);
    std::map<std::tuple<std::size_t, qtree::TopologyKind, ising::AggregateOp>, std::vector<double>> cells;
    for (const auto& r : rows) cells[{r.n, r.kind, r.op}].push_back(r.latency_ms);
    auto med = [&](std::size_t n, qtree::TopologyKind k, ising::AggregateOp op) {
        auto v = cells.at({n, k, op});
        std::sort(v.begin(), v.end());
        return v[v.size() / 2];
    };
    using K = qtree::TopologyKind;
    using O = ising::AggregateOp;
    const double tmed = med(512, K::kTtree, O::kMedian), dmed = med(512, K::kDtree, O::kMedian);
    const double dmin = med(512, K::kDtree, O::kMin), tmin = med(512, K::kTtree, O::kMin);
    const double tmin64 = med(64, K::kTtree, O::kMin);
    const bool order = tmed > dmed && dmed >= dmin && dmin > tmin;
    const double below_dmin = 1.0 - tmin / dmin, below_tmed = 1.0 - tmin / tmed;
    const double flat = tmin / tmin64;
    const bool pass = order && below_dmin >= 0.40 && below_tmed >= 0.60 && flat <= 1.3;
    return {pass, fmt::format("n=512 T-MED {:.0f} D-MED {:.0f} D-MIN {:.0f} T-MIN {:.0f} ms (order {}); T-MIN {:.0f}% "
                              "below D-MIN, {:.0f}% below T-MED; T-MIN 512/64 = {:.2f}{}",
                              tmed, dmed, dmin, tmin, order ? "ok" : "BROKEN", 100 * below_dmin, 100 * below_tmed,
                              flat, flat <= 1.3 ? "" : " (> 1.3)")};
}

// 5. Tree shape.
Verdict criterion_5(const Options&) {
    std::vector<std::uint64_t> seeds(10);
    std::iota(seeds.begin(), seeds.end(), 1);
    auto rows = simnet::run_tree_experiment({}, 512, qtree::NodeId::kDefaultDigits, seeds);
    bool pass = true;
    std::string depths;
    const double log4 = std::log(512.0) / std::log(4.0);
    for (const auto& r : rows) {
        pass = pass && r.avg_depth >= 4.5 && r.avg_depth <= 8.5 && static_cast<double>(r.max_depth) > log4;
        depths += fmt::format("{}{:.2f}/{}", depths.empty() ? "" : " ", r.avg_depth, r.max_depth);
    }
    return {pass, "avg/max depth per seed: " + depths};
}

// 6. Timeout partials.
Verdict criterion_6(const Options&) {
    check::ChainFixture f;
    auto results = f.run_count(3000.0, 2);
    if (results.size() < 2) return {false, fmt::format("only {} epochs answered", results.size())};
    const auto n = static_cast<std::uint32_t>(f.cluster.size());
    const auto expect_partial = n - static_cast<std::uint32_t>(check::ChainFixture::kDelayedSubtree);
    const bool partial = results[0].contributors == expect_partial && results[0].tuples.at(0).data ==
                                                                          std::to_string(expect_partial);
    const bool clean = results[1].contributors == n && results[1].tuples.at(0).data == std::to_string(n);
    const auto late = f.cluster.node(1).ising().counters().late_discarded;
    return {partial && clean && late >= 1,
            fmt::format("epoch 0 count {} (expect {}), epoch 1 count {} (expect {}), late partials discarded {}",
                        results[0].tuples.at(0).data, expect_partial, results[1].tuples.at(0).data, n, late)};
}

// 7. ENTRIE configs on the simulator.
Verdict criterion_7(const Options& o) {
    const auto bench_dir = o.work / "c7_benchmark";
    const auto s = simnet::load_scenario(o.scenarios / "trigger_benchmark.ini");
    simnet::run_scenario(s, bench_dir);
    const auto transcript = read_csv(bench_dir / "transcript.csv");
    std::size_t initial = 0, churn_starts = 0, outside = 0;
    for (const auto& r : transcript) {
        const double t = std::stod(r.at("timestamp_ms"));
        if (r.at("trigger_id") == "1" && r.at("action") == "startNode") {
            std::size_t ids = 1;
            for (char c : r.at("target")) ids += c == ';';
            if (r.at("status").rfind("OK", 0) == 0 && t < 1000) initial += ids;
            continue;
        }
        if (r.at("trigger_id") == "2" && r.at("action") == "startNode") ++churn_starts;
        if (r.at("action") == "startNode" && (t < 900000 || t > 2700000)) ++outside;
    }
    std::size_t changes_before = 0;
    for (const auto& r : read_csv(bench_dir / "census.csv")) {
        const double t = std::stod(r.at("timestamp_ms"));
        if (t > 1000 && t < 900000) ++changes_before;
    }
    const double sigma = std::sqrt(180.0);
    const bool bench_ok = initial == 150 && outside == 0 && changes_before == 0 &&
                          std::abs(static_cast<double>(churn_starts) - 180.0) <= 3 * sigma;

    const auto repair_dir = o.work / "c7_self_repair";
    simnet::run_scenario(simnet::load_scenario(o.scenarios / "self_repair.ini"), repair_dir);
    std::vector<std::string> fired, oracle;
    for (const auto& r : read_csv(repair_dir / "reboots.csv")) {
        (r.at("source") == "fired" ? fired : oracle).push_back(r.at("minute") + "@" + r.at("host"));
    }
    const bool repair_ok = fired == oracle && !oracle.empty();
    auto join = [](const std::vector<std::string>& v) {
        std::string s;
        for (const auto& x : v) s += (s.empty() ? "" : " ") + x;
        return s;
    };
    return {bench_ok && repair_ok,
            fmt::format("benchmark: {} started at t=0, {} churn starts (180 +- {:.0f}), {} starts outside window, "
                        "{} census changes before 900 s; self-repair fired [{}] oracle [{}]",
                        initial, churn_starts, 3 * sigma, outside, changes_before, join(fired), join(oracle))};
}

// 8. Real-mode end-to-end latency.
class Child {
public:
    Child(const std::vector<std::string>& argv, const fs::path& log) {
        std::vector<char*> args;
        for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
        args.push_back(nullptr);
        posix_spawn_file_actions_t fa;
        posix_spawn_file_actions_init(&fa);
        posix_spawn_file_actions_addopen(&fa, 1, log.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
        posix_spawn_file_actions_adddup2(&fa, 1, 2);
        if (posix_spawn(&pid_, args[0], &fa, nullptr, args.data(), environ) != 0) pid_ = -1;
        posix_spawn_file_actions_destroy(&fa);
        if (pid_ < 0) throw std::runtime_error("cannot start " + argv[0]);
    }
    ~Child() {
        if (pid_ > 0) {
            ::kill(pid_, SIGTERM);
            ::waitpid(pid_, nullptr, 0);
        }
    }
    Child(const Child&) = delete;
    Child& operator=(const Child&) = delete;

private:
    pid_t pid_ = -1;
};

std::int64_t wall_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

void write_file(const fs::path& p, const std::string& text) {
    const auto tmp = p.string() + ".tmp";
    std::ofstream(tmp, std::ios::binary) << text;
    fs::rename(tmp, p);
}

Verdict criterion_8(const Options& o) {
    constexpr std::size_t kNodes = 16;
    constexpr int kTrials = 10;
    const auto dir = o.work / "c8_loopback";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto cluster = realnet::loopback_cluster(kNodes, 10, 31000, 32000);
    write_file(dir / "cluster.json", realnet::format_cluster_config(cluster));

    std::vector<std::unique_ptr<Child>> nodes;
    for (std::size_t i = 0; i < kNodes; ++i) {
        const auto name = cluster.nodes[i].name;
        write_file(dir / (name + ".load"), "0.5\n");
        nodes.push_back(std::make_unique<Child>(
            std::vector<std::string>{o.cli.string(), "serve", "--config", (dir / "cluster.json").string(), "--listen",
                                     name, "--sensor-port", "33100", "--actuator-port", "33200", "--load-file",
                                     (dir / (name + ".load")).string(), "--ledger",
                                     (dir / (name + ".ledger")).string()},
            dir / (name + ".log")));
    }
    const auto ready_by = Clock::now() + std::chrono::seconds(20);
    bool ready = false;
    while (!ready && Clock::now() < ready_by) {
        std::this_thread::sleep_for(std::chrono::milliseconds(200));
        auto body = realnet::http_get("127.0.0.1", 32000, "/ising?port=33100&sensor=hostname&op=VALUE", 2000);
        ready = body && parse_tuples(*body).size() == kNodes;
    }
    if (!ready) return {false, "loopback cluster did not come up"};

    const auto config = o.scenarios.parent_path() / "tests" / "data" / "e2e_trigger.xml";
    Child trigger({o.cli.string(), "trigger", "--config", config.string(), "--bind", "ISING_host=127.0.0.1", "--bind",
                   "ISING_port=32000", "--bind", "sensor_port=33100", "--bind", "actuator_port=33200", "--duration-ms",
                   "600000", "--out", (dir / "trigger").string()},
                  dir / "trigger.log");
    std::this_thread::sleep_for(std::chrono::milliseconds(1500));

    auto ledger_rows = [&](std::size_t i) {
        const auto p = dir / (cluster.nodes[i].name + ".ledger");
        return fs::exists(p) ? sensact::read_ledger(p) : std::vector<sensact::LedgerRow>{};
    };
    std::vector<double> delays;
    for (int trial = 0; trial < kTrials; ++trial) {
        const std::size_t hot = static_cast<std::size_t>(trial * 5) % kNodes;
        std::vector<std::size_t> before(kNodes);
        for (std::size_t i = 0; i < kNodes; ++i) before[i] = ledger_rows(i).size();
        const auto event_ms = wall_ms();
        write_file(dir / (cluster.nodes[hot].name + ".load"), "9\n");
        const auto deadline = Clock::now() + std::chrono::seconds(15);
        std::int64_t last = -1;
        while (Clock::now() < deadline) {
            std::this_thread::sleep_for(std::chrono::milliseconds(50));
            std::int64_t latest = 0;
            bool all = true;
            for (std::size_t i = 0; i < kNodes && all; ++i) {
                auto rows = ledger_rows(i);
                if (rows.size() <= before[i]) {
                    all = false;
                } else {
                    latest = std::max(latest, rows[before[i]].timestamp_ms);
                }
            }
            if (all) {
                last = latest;
                break;
            }
        }
        write_file(dir / (cluster.nodes[hot].name + ".load"), "0.5\n");
        delays.push_back(last < 0 ? 1e9 : static_cast<double>(last - event_ms));
        std::this_thread::sleep_for(std::chrono::milliseconds(2500));
    }
    const double worst = *std::max_element(delays.begin(), delays.end());
    std::string list;
    for (double d : delays) list += (list.empty() ? "" : " ") + (d >= 1e9 ? std::string("timeout") : fmt::format("{:.0f}", d));
    return {worst < 4000.0, fmt::format("{} nodes, sensor event to all-node actuation ms: {} (worst {:.0f})", kNodes,
                                        list, worst >= 1e9 ? -1.0 : worst)};
}

// 9. Determinism through the CLI.
Verdict criterion_9(const Options& o) {
    std::vector<fs::path> scenarios;
    for (const auto& e : fs::directory_iterator(o.scenarios)) {
        if (e.path().extension() == ".ini") scenarios.push_back(e.path());
    }
    std::sort(scenarios.begin(), scenarios.end());
    std::size_t files = 0;
    std::vector<std::string> differing;
    for (const auto& s : scenarios) {
        const auto name = s.stem().string();
        for (const char* run : {"a", "b"}) {
            const auto out = o.work / "c9" / run / name;
            fs::remove_all(out);
            const auto cmd = fmt::format("'{}' sim --scenario '{}' --out '{}' > /dev/null", o.cli.string(), s.string(),
                                         out.string());
            if (std::system(cmd.c_str()) != 0) return {false, "sim failed for " + name};
        }
        for (const auto& e : fs::directory_iterator(o.work / "c9" / "a" / name)) {
            ++files;
            const auto other = o.work / "c9" / "b" / name / e.path().filename();
            if (slurp(e.path()) != slurp(other)) differing.push_back(name + "/" + e.path().filename().string());
        }
    }
    std::string diff;
    for (const auto& d : differing) diff += " " + d;
    return {differing.empty() && files > 0,
            fmt::format("{} scenarios, {} CSVs compared, {} differ{}", scenarios.size(), files, differing.size(), diff)};
}

}  // namespace

int main(int argc, char** argv) {
    Options o;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        auto next = [&]() -> std::string {
            if (i + 1 >= argc) {
                fmt::print(stderr, "{} needs a value\n", a);
                std::exit(2);
            }
            return argv[++i];
        };
        if (a == "--criterion") {
            o.only = std::stoi(next());
        } else if (a == "--cli") {
            o.cli = next();
        } else if (a == "--scenarios") {
            o.scenarios = next();
        } else if (a == "--work") {
            o.work = next();
        } else {
            fmt::print(stderr, "unknown argument {}\n", a);
            return 2;
        }
    }
    fs::create_directories(o.work);

    using Fn = Verdict (*)(const Options&);
    const std::pair<const char*, Fn> criteria[] = {
        {"aggregation oracle", criterion_1}, {"loss table", criterion_2},       {"bytes scaling", criterion_3},
        {"latency trends", criterion_4},     {"tree shape", criterion_5},       {"timeout partials", criterion_6},
        {"trigger configs", criterion_7},    {"real-mode latency", criterion_8}, {"determinism", criterion_9},
    };
    int failed = 0;
    for (int n = 1; n <= 9; ++n) {
        if (o.only && o.only != n) continue;
        const auto t0 = Clock::now();
        Verdict v;
        try {
            v = criteria[n - 1].second(o);
        } catch (const std::exception& e) {
            v = {false, std::string("error: ") + e.what()};
        }
        fmt::print("CRITERION {} {}: {} ({}) [{:.1f} s]\n", n, v.pass ? "PASS" : "FAIL", criteria[n - 1].first,
                   v.detail, seconds_since(t0));
        std::fflush(stdout);
        failed += !v.pass;
    }
    return failed ? 1 : 0;
}
