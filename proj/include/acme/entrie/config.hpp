#pragma once

#include "acme/ising/aggregate.hpp"
#include "acme/ising/query.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace acme::entrie {

/// Parse failure; the message starts with the element path, e.g. `action[2]/repeat`.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(const std::string& path, const std::string& what)
        : std::invalid_argument(path + ": " + what), path_(path) {}
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

/// Fixed value or exponential with the given mean, in milliseconds.
struct Duration {
    bool exponential = false;
    double ms = 0.0;

    bool operator==(const Duration&) const = default;
};

/// Active while not_before <= now < not_after (run-relative ms).
struct TimerCondition {
    double not_before_ms = 0.0;
    std::optional<double> not_after_ms;

    bool operator==(const TimerCondition&) const = default;
};

struct CompletionCondition {
    std::vector<std::string> action_ids;

    bool operator==(const CompletionCondition&) const = default;
};

/// `hosts`/`node` are kept as written so bracketed placeholders survive
/// parsing; bind() resolves them.
struct SensorCondition {
    std::string id;
    std::vector<std::string> roots;  ///< ISING roots in failover order
    std::string node_host;           ///< "ALL" or a host
    std::string node_port;
    std::string sensor;
    double period_ms = 60000.0;
    ising::AggregateOp sensor_agg = ising::AggregateOp::kAvg;
    std::size_t hist_size = 1;
    std::optional<ising::AggregateOp> hist_agg;  ///< nullopt = latest reading
    std::optional<ising::Comparator> cmp;
    std::optional<std::string> rhs_value;
    std::optional<std::string> secondary_id;
    double scaling_factor = 1.0;
    bool is_secondary = false;

    bool all_nodes() const { return node_host == "ALL"; }
    bool operator==(const SensorCondition&) const = default;
};

using ConditionSpec = std::variant<TimerCondition, CompletionCondition, SensorCondition>;

enum class RepeatMode { kFirstTransition, kEveryTransition, kPeriodicFirstTrue, kPeriodicEveryTrue };

std::string_view to_string(RepeatMode mode);

struct RepeatPolicy {
    RepeatMode mode = RepeatMode::kEveryTransition;
    std::optional<Duration> period;

    bool operator==(const RepeatPolicy&) const = default;
};

enum class ActionKind { kStartNode, kKillNode, kActuator };

struct ActionSpec {
    ActionKind kind = ActionKind::kActuator;
    std::string actuator;  ///< startNode, killNode or the EXECUTE target name
    std::vector<std::string> roots;
    std::string node_host;  ///< empty = default endpoint, "ALL", a host, or VARIABLE_host
    std::string node_port;
    std::string args;
    std::uint32_t num_to_start = 1;
    std::optional<Duration> lifetime;

    bool variable_host() const { return node_host == "VARIABLE_host"; }
    bool operator==(const ActionSpec&) const = default;
};

struct TriggerSpec {
    std::string id;
    std::string timer_name;
    ActionSpec action;
    std::vector<ConditionSpec> conditions;
    RepeatPolicy repeat;

    bool operator==(const TriggerSpec&) const = default;
};

/// Parses one or more `<action>` elements (a bare sequence, as in the
/// examples, or wrapped in any single root element).
std::vector<TriggerSpec> parse_config(const std::string& xml);
std::vector<TriggerSpec> load_config(const std::string& path);

/// Replaces `[name]` placeholders in hosts/node fields. Unbound
/// placeholders are left in place.
std::vector<TriggerSpec> bind(std::vector<TriggerSpec> specs, const std::map<std::string, std::string>& values);

/// Replaces every sensor condition's and ALL-scope action's root list.
std::vector<TriggerSpec> with_roots(std::vector<TriggerSpec> specs, const std::vector<std::string>& roots);

}  // namespace acme::entrie
