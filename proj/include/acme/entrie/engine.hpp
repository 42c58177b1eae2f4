#pragma once

#include "acme/common/csv.hpp"
#include "acme/common/event_loop.hpp"
#include "acme/entrie/config.hpp"

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace acme::entrie {

struct Reading {
    double at_ms = 0.0;
    double value = 0.0;
    std::optional<std::string> host;  ///< node that produced an extremum
};

/// The last `capacity` readings of one sensor condition, oldest first.
class ConditionHistory {
public:
    explicit ConditionHistory(std::size_t capacity = 1);

    void push(Reading r);
    const std::deque<Reading>& readings() const { return readings_; }
    std::size_t capacity() const { return capacity_; }
    bool empty() const { return readings_.empty(); }

private:
    std::size_t capacity_;
    std::deque<Reading> readings_;
};

/// hist_agg over the history. MIN/MAX keep the host of the chosen reading;
/// no hist_agg (or VALUE) means the latest reading.
std::optional<Reading> history_value(const SensorCondition& cond, const ConditionHistory& history);

/// One value per ISING/direct result. MAX/MIN over ALL arrive as VALUE
/// tuples and are reduced here so the extremal host is known.
std::optional<Reading> reading_from_result(const SensorCondition& cond, const std::vector<ResultTuple>& tuples,
                                           double now_ms);

/// The query a sensor condition issues each period.
ising::SensorQuery condition_query(const SensorCondition& cond);

struct ConditionResult {
    bool value = false;
    std::optional<std::string> fired_node;
};

struct EvalInputs {
    double now_ms = 0.0;  ///< run-relative
    const ConditionHistory* history = nullptr;               ///< for sensor conditions
    const std::map<std::string, std::optional<double>>* secondaries = nullptr;  ///< current secondary values
    const std::set<std::string>* completed = nullptr;        ///< completed action IDs
};

/// Secondary sensor conditions are always true here; they never gate.
ConditionResult eval_condition(const ConditionSpec& cond, const EvalInputs& in);

struct RepeatState {
    bool prev = false;
    bool fired_ever = false;
    std::size_t true_intervals = 0;
    bool periodic_active = false;
    double next_due_ms = 0.0;
};

struct RepeatDecision {
    bool fire = false;
    std::optional<double> next_check_ms;  ///< absolute time of the next periodic firing
};

/// Advances the repeat state machine with the current conjunction value.
/// Periodic modes fire on the rising edge and then every period while the
/// interval lasts; exponential periods are redrawn after each firing.
RepeatDecision repeat_decision(const RepeatPolicy& policy, RepeatState& state, bool cur, double now_ms,
                               std::mt19937_64& rng);

double sample(const Duration& d, std::mt19937_64& rng);

struct TranscriptRow {
    std::int64_t timestamp_ms = 0;
    std::string trigger_id;
    std::string action;
    std::string target;
    std::string status;

    bool operator==(const TranscriptRow&) const = default;
};

std::string format_transcript(const std::vector<TranscriptRow>& rows);

/// ENTRIE's view of the outside world.
class TriggerIo {
public:
    using QueryDone = std::function<void(std::optional<std::vector<ResultTuple>>)>;
    using InvokeDone = std::function<void(std::optional<std::string>)>;

    virtual ~TriggerIo() = default;
    virtual EventLoop& loop() = 0;

    /// Snapshot query via the first reachable root, in order. With no roots
    /// the query goes straight to query.host. nullopt when every attempt failed.
    virtual void query(const std::vector<std::string>& roots, const ising::SensorQuery& query, QueryDone done) = 0;

    /// Direct actuator call. Empty host means the default actuator endpoint.
    virtual void invoke(const std::string& host, const std::string& port, const std::string& actuator,
                        const std::string& args, InvokeDone done) = 0;
};

/// Evaluation tick: gcd of condition periods, timer edges and fixed repeat
/// periods, never below 100 ms.
double evaluation_tick_ms(const std::vector<TriggerSpec>& specs);

/// The trigger loop. Owned by one event loop.
class Entrie {
public:
    Entrie(std::vector<TriggerSpec> specs, TriggerIo& io, std::uint64_t seed);
    ~Entrie();
    Entrie(const Entrie&) = delete;
    Entrie& operator=(const Entrie&) = delete;

    void start();
    void stop();
    /// Crash and re-read: histories, repeat state and completions are lost;
    /// timers restart from now.
    void restart();

    bool running() const { return running_; }
    /// Latest not_after over all triggers, when every trigger has one.
    std::optional<double> horizon_ms() const;
    double tick_ms() const { return tick_ms_; }

    const std::vector<TranscriptRow>& transcript() const { return transcript_; }
    std::function<void(const TranscriptRow&)> on_transcript;

    const std::set<std::string>& completed() const { return completed_; }
    const ConditionHistory* history(std::size_t trigger, std::size_t condition) const;

private:
    struct CondRuntime {
        ConditionHistory history;
        bool failed = false;
        TimerId poll_timer = 0;
        bool in_flight = false;
    };
    struct TriggerRuntime {
        RepeatState repeat;
        std::map<std::size_t, CondRuntime> sensors;  ///< by condition index
        TimerId periodic_timer = 0;
    };

    double now() const;
    void reset_state();
    void schedule_tick();
    void poll(std::size_t t, std::size_t c);
    void evaluate_all();
    void evaluate(std::size_t t);
    ConditionResult conjunction(std::size_t t);
    void dispatch(std::size_t t, const std::optional<std::string>& fired_node);
    void record(const std::string& trigger, const std::string& action, const std::string& target,
                const std::string& status);
    std::map<std::string, std::optional<double>> secondary_values() const;

    std::vector<TriggerSpec> specs_;
    TriggerIo& io_;
    std::uint64_t seed_;
    std::mt19937_64 rng_;
    double tick_ms_;
    double start_ms_ = 0.0;
    bool running_ = false;
    TimerId tick_timer_ = 0;
    std::vector<TriggerRuntime> runtime_;
    std::set<std::string> completed_;
    std::vector<TranscriptRow> transcript_;
    std::shared_ptr<std::uint64_t> generation_ = std::make_shared<std::uint64_t>(0);
};

}  // namespace acme::entrie
