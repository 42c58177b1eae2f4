#pragma once

#include "acme/entrie/engine.hpp"
#include "acme/simnet/app.hpp"
#include "acme/simnet/experiments.hpp"

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace acme::simnet {

/// Bad scenario file; the message starts with `section.key`.
class ScenarioError : public std::invalid_argument {
public:
    ScenarioError(const std::string& field, const std::string& what)
        : std::invalid_argument(field + ": " + what), field_(field) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

enum class ScenarioKind { kLatency, kBytes, kLoss, kTree, kTrigger, kSelfRepair };

std::string_view to_string(ScenarioKind kind);

/// ENTRIE driving the synthetic application on a simulated cluster.
struct TriggerRunParams {
    std::filesystem::path config;
    std::map<std::string, std::string> bindings;
    std::size_t nodes = 16;
    double duration_ms = 2'820'000.0;
    std::size_t home = 0;  ///< cluster node hosting ENTRIE and the app control endpoint
    AppParams app;
    std::filesystem::path ledger;  ///< actuator ledger file; empty for none
};

struct TriggerRunResult {
    std::vector<entrie::TranscriptRow> transcript;
    std::vector<AppMinute> metrics;
    std::vector<std::pair<double, std::size_t>> census;  ///< (run-relative ms, live instances)
    std::size_t final_live = 0;
};

TriggerRunResult run_trigger_experiment(const ExperimentSetup& setup, const std::vector<entrie::TriggerSpec>& specs,
                                        const TriggerRunParams& params);

struct LoadSpike {
    int minute = 0;
    std::size_t node = 0;
    double load = 0.0;
};

/// Scripted per-node loads, constant within each minute.
struct SelfRepairParams {
    std::filesystem::path config;
    std::size_t nodes = 32;
    int minutes = 60;
    double base_min = 0.2;
    double base_max = 1.0;
    std::vector<LoadSpike> spikes;
    std::uint16_t load_port = 9100;
    std::uint16_t reboot_port = 9200;
};

/// loads[minute][node].
std::vector<std::vector<double>> load_script(const SelfRepairParams& params, std::uint64_t seed);

struct RebootEvent {
    int minute = 0;
    std::string host;
    bool operator==(const RebootEvent&) const = default;
};

/// Direct evaluation of the policy on the script: at minute k the most
/// loaded node is rebooted when its load exceeds scale times the maximum
/// system average over minutes k-9..k, on each false-to-true transition.
std::vector<RebootEvent> self_repair_oracle(const std::vector<std::vector<double>>& loads,
                                            const std::vector<std::string>& hosts, double scale = 5.0,
                                            std::size_t window = 10);

struct SelfRepairResult {
    std::vector<std::vector<double>> loads;
    std::vector<std::string> hosts;
    std::vector<entrie::TranscriptRow> transcript;
    std::vector<RebootEvent> fired;     ///< acknowledged reboots, by minute
    std::vector<RebootEvent> expected;  ///< oracle
};

SelfRepairResult run_self_repair(const ExperimentSetup& setup, const std::vector<entrie::TriggerSpec>& specs,
                                 const SelfRepairParams& params);

struct Scenario {
    std::string name;
    std::string description;
    ScenarioKind kind = ScenarioKind::kLatency;
    ExperimentSetup setup;
    GridParams grid;
    LossParams loss;
    std::size_t tree_n = 512;
    std::vector<std::uint64_t> tree_seeds;
    TriggerRunParams trigger;
    SelfRepairParams repair;
};

/// INI text; relative config paths resolve against base_dir. Throws ScenarioError.
Scenario parse_scenario(const std::string& text, const std::filesystem::path& base_dir = {});
Scenario load_scenario(const std::filesystem::path& path);

/// Runs the scenario and writes its CSVs into out_dir. Returns the files written.
std::vector<std::filesystem::path> run_scenario(const Scenario& scenario, const std::filesystem::path& out_dir);

std::string format_census_csv(const std::vector<std::pair<double, std::size_t>>& census);
std::string format_reboots_csv(const std::vector<RebootEvent>& fired, const std::vector<RebootEvent>& expected);
std::string format_loads_csv(const std::vector<std::vector<double>>& loads, const std::vector<std::string>& hosts);

}  // namespace acme::simnet
