#include "acme/entrie/engine.hpp"

#include "acme/sensact/actuators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace acme::entrie {

ConditionHistory::ConditionHistory(std::size_t capacity) : capacity_(std::max<std::size_t>(1, capacity)) {}

void ConditionHistory::push(Reading r) {
    readings_.push_back(std::move(r));
    while (readings_.size() > capacity_) readings_.pop_front();
}

std::optional<Reading> history_value(const SensorCondition& cond, const ConditionHistory& history) {
    if (history.empty()) return std::nullopt;
    const auto& rs = history.readings();
    if (!cond.hist_agg || *cond.hist_agg == ising::AggregateOp::kValue) return rs.back();
    switch (*cond.hist_agg) {
        case ising::AggregateOp::kMax:
            return *std::max_element(rs.begin(), rs.end(),
                                     [](const Reading& a, const Reading& b) { return a.value < b.value; });
        case ising::AggregateOp::kMin:
            return *std::min_element(rs.begin(), rs.end(),
                                     [](const Reading& a, const Reading& b) { return a.value < b.value; });
        default: break;
    }
    ising::PartialAggregate p(*cond.hist_agg);
    for (const auto& r : rs) p.add_local({{"", 0, ising::format_number(r.value)}});
    const auto tuples = ising::finalize_partial(p, "", 0);
    if (tuples.empty()) return std::nullopt;
    auto v = ising::parse_number(tuples.front().data);
    if (!v) return std::nullopt;
    return Reading{rs.back().at_ms, *v, std::nullopt};
}

namespace {

bool reduces_locally(const SensorCondition& cond) {
    return cond.all_nodes() &&
           (cond.sensor_agg == ising::AggregateOp::kMax || cond.sensor_agg == ising::AggregateOp::kMin);
}

std::string host_of(const std::string& source) {
    const auto colon = source.rfind(':');
    return colon == std::string::npos ? source : source.substr(0, colon);
}

std::uint16_t port_number(const std::string& text) {
    const auto v = ising::parse_number(text);
    if (!v || *v < 1 || *v > 65535 || *v != std::floor(*v)) {
        throw std::invalid_argument("unbound or invalid port '" + text + "'");
    }
    return static_cast<std::uint16_t>(*v);
}

}  // namespace

ising::SensorQuery condition_query(const SensorCondition& cond) {
    ising::SensorQuery q;
    q.port = port_number(cond.node_port);
    q.sensor = cond.sensor;
    if (!cond.all_nodes()) q.host = cond.node_host;
    q.op = reduces_locally(cond) ? ising::AggregateOp::kValue : cond.sensor_agg;
    q.epoch_ms = 0;
    return q;
}

std::optional<Reading> reading_from_result(const SensorCondition& cond, const std::vector<ResultTuple>& tuples,
                                           double now_ms) {
    if (reduces_locally(cond)) {
        std::optional<Reading> best;
        for (const auto& t : tuples) {
            const auto v = ising::parse_number(t.data);
            if (!v) continue;
            const bool better = !best || (cond.sensor_agg == ising::AggregateOp::kMax ? *v > best->value
                                                                                     : *v < best->value);
            if (better) best = Reading{now_ms, *v, host_of(t.source)};
        }
        return best;
    }
    if (tuples.empty()) return std::nullopt;
    if (cond.all_nodes()) {
        const auto v = ising::parse_number(tuples.front().data);
        if (!v) return std::nullopt;
        return Reading{now_ms, *v, std::nullopt};
    }
    // a single host answers with raw rows; fold them with sensorAgg
    ising::PartialAggregate p(cond.sensor_agg);
    std::vector<ising::SensorValue> values;
    for (const auto& t : tuples) values.push_back({t.source, t.timestamp_ms, t.data});
    p.add_local(values);
    const auto fin = ising::finalize_partial(p, "", 0);
    if (fin.empty()) return std::nullopt;
    const auto v = ising::parse_number(fin.front().data);
    if (!v) return std::nullopt;
    return Reading{now_ms, *v, cond.node_host};
}

ConditionResult eval_condition(const ConditionSpec& cond, const EvalInputs& in) {
    if (const auto* t = std::get_if<TimerCondition>(&cond)) {
        const bool after = in.now_ms >= t->not_before_ms;
        const bool before = !t->not_after_ms || in.now_ms < *t->not_after_ms;
        return {after && before, std::nullopt};
    }
    if (const auto* c = std::get_if<CompletionCondition>(&cond)) {
        if (!in.completed) return {false, std::nullopt};
        for (const auto& id : c->action_ids) {
            if (in.completed->count(id) == 0) return {false, std::nullopt};
        }
        return {true, std::nullopt};
    }
    const auto& s = std::get<SensorCondition>(cond);
    if (s.is_secondary) return {true, std::nullopt};
    if (!in.history) return {false, std::nullopt};
    const auto lhs = history_value(s, *in.history);
    if (!lhs) return {false, std::nullopt};
    double rhs = 0.0;
    if (s.secondary_id) {
        if (!in.secondaries) return {false, std::nullopt};
        auto it = in.secondaries->find(*s.secondary_id);
        if (it == in.secondaries->end() || !it->second) return {false, std::nullopt};
        rhs = *it->second;
    } else {
        const auto v = ising::parse_number(*s.rhs_value);
        if (!v) {
            const bool ok = ising::compare_values(ising::format_number(lhs->value), *s.cmp, *s.rhs_value);
            return {ok, ok ? lhs->host : std::nullopt};
        }
        rhs = *v;
    }
    rhs *= s.scaling_factor;
    bool ok = false;
    switch (*s.cmp) {
        case ising::Comparator::kEq: ok = lhs->value == rhs; break;
        case ising::Comparator::kNe: ok = lhs->value != rhs; break;
        case ising::Comparator::kGt: ok = lhs->value > rhs; break;
        case ising::Comparator::kLt: ok = lhs->value < rhs; break;
        case ising::Comparator::kGe: ok = lhs->value >= rhs; break;
        case ising::Comparator::kLe: ok = lhs->value <= rhs; break;
    }
    return {ok, ok ? lhs->host : std::nullopt};
}

double sample(const Duration& d, std::mt19937_64& rng) {
    if (!d.exponential) return d.ms;
    return std::exponential_distribution<double>(1.0 / d.ms)(rng);
}

RepeatDecision repeat_decision(const RepeatPolicy& policy, RepeatState& state, bool cur, double now_ms,
                               std::mt19937_64& rng) {
    RepeatDecision d;
    const bool rising = cur && !state.prev;
    state.prev = cur;
    if (rising) ++state.true_intervals;
    switch (policy.mode) {
        case RepeatMode::kFirstTransition:
            if (rising && !state.fired_ever) d.fire = true;
            break;
        case RepeatMode::kEveryTransition:
            d.fire = rising;
            break;
        case RepeatMode::kPeriodicFirstTrue:
        case RepeatMode::kPeriodicEveryTrue: {
            if (!cur) {
                state.periodic_active = false;
                break;
            }
            const bool eligible =
                policy.mode == RepeatMode::kPeriodicEveryTrue || state.true_intervals == 1;
            if (rising && eligible) {
                state.periodic_active = true;
                d.fire = true;
            } else if (state.periodic_active && now_ms + 1e-9 >= state.next_due_ms) {
                d.fire = true;
            }
            if (d.fire) state.next_due_ms = now_ms + sample(*policy.period, rng);
            if (state.periodic_active) d.next_check_ms = state.next_due_ms;
            break;
        }
    }
    if (d.fire) state.fired_ever = true;
    return d;
}

std::string format_transcript(const std::vector<TranscriptRow>& rows) {
    std::string out = "timestamp_ms,trigger_id,action,target,status\n";
    for (const auto& r : rows) {
        out += join_csv_row({std::to_string(r.timestamp_ms), r.trigger_id, r.action, r.target, r.status}) + "\n";
    }
    return out;
}

double evaluation_tick_ms(const std::vector<TriggerSpec>& specs) {
    std::int64_t g = 0;
    auto add = [&](double ms) {
        const auto v = static_cast<std::int64_t>(std::llround(ms));
        if (v > 0) g = std::gcd(g, v);
    };
    for (const auto& t : specs) {
        for (const auto& c : t.conditions) {
            if (const auto* s = std::get_if<SensorCondition>(&c)) add(s->period_ms);
            if (const auto* tc = std::get_if<TimerCondition>(&c)) {
                add(tc->not_before_ms);
                if (tc->not_after_ms) add(*tc->not_after_ms);
            }
        }
        if (t.repeat.period && !t.repeat.period->exponential) add(t.repeat.period->ms);
    }
    if (g == 0) return 100.0;
    return std::max<double>(100.0, static_cast<double>(g));
}

Entrie::Entrie(std::vector<TriggerSpec> specs, TriggerIo& io, std::uint64_t seed)
    : specs_(std::move(specs)), io_(io), seed_(seed), rng_(seed), tick_ms_(evaluation_tick_ms(specs_)) {
    reset_state();
}

Entrie::~Entrie() {
    stop();
    ++*generation_;
}

void Entrie::reset_state() {
    runtime_.clear();
    runtime_.resize(specs_.size());
    for (std::size_t t = 0; t < specs_.size(); ++t) {
        for (std::size_t c = 0; c < specs_[t].conditions.size(); ++c) {
            if (const auto* s = std::get_if<SensorCondition>(&specs_[t].conditions[c])) {
                runtime_[t].sensors.emplace(c, CondRuntime{ConditionHistory(s->hist_size)});
            }
        }
    }
    completed_.clear();
}

double Entrie::now() const { return io_.loop().now_ms() - start_ms_; }

std::optional<double> Entrie::horizon_ms() const {
    double h = 0.0;
    for (const auto& t : specs_) {
        std::optional<double> end;
        for (const auto& c : t.conditions) {
            if (const auto* tc = std::get_if<TimerCondition>(&c); tc && tc->not_after_ms) {
                end = std::min(end.value_or(*tc->not_after_ms), *tc->not_after_ms);
            }
        }
        if (!end) return std::nullopt;
        h = std::max(h, *end);
    }
    return h;
}

void Entrie::start() {
    if (running_) return;
    running_ = true;
    start_ms_ = io_.loop().now_ms();
    for (std::size_t t = 0; t < specs_.size(); ++t) {
        for (auto& [c, rt] : runtime_[t].sensors) poll(t, c);
    }
    evaluate_all();
    schedule_tick();
}

void Entrie::stop() {
    if (!running_) return;
    running_ = false;
    io_.loop().cancel(tick_timer_);
    for (auto& rt : runtime_) {
        io_.loop().cancel(rt.periodic_timer);
        for (auto& [c, s] : rt.sensors) io_.loop().cancel(s.poll_timer);
    }
}

void Entrie::restart() {
    stop();
    ++*generation_;
    reset_state();
    start();
}

const ConditionHistory* Entrie::history(std::size_t trigger, std::size_t condition) const {
    if (trigger >= runtime_.size()) return nullptr;
    auto it = runtime_[trigger].sensors.find(condition);
    return it == runtime_[trigger].sensors.end() ? nullptr : &it->second.history;
}

void Entrie::schedule_tick() {
    const auto gen = *generation_;
    auto g = generation_;
    const double elapsed = now();
    const double next = (std::floor(elapsed / tick_ms_ + 1e-9) + 1.0) * tick_ms_;
    tick_timer_ = io_.loop().schedule(next - elapsed, [this, g, gen] {
        if (*g != gen || !running_) return;
        evaluate_all();
        if (auto h = horizon_ms(); h && now() >= *h) {
            stop();
            return;
        }
        schedule_tick();
    });
}

void Entrie::poll(std::size_t t, std::size_t c) {
    auto& rt = runtime_[t].sensors.at(c);
    const auto& cond = std::get<SensorCondition>(specs_[t].conditions[c]);
    const auto gen = *generation_;
    auto g = generation_;
    rt.poll_timer = io_.loop().schedule(cond.period_ms, [this, g, gen, t, c] {
        if (*g == gen && running_) poll(t, c);
    });
    if (rt.in_flight) return;
    ising::SensorQuery q;
    try {
        q = condition_query(cond);
    } catch (const std::invalid_argument&) {
        rt.failed = true;
        return;
    }
    rt.in_flight = true;
    io_.query(cond.roots, q, [this, g, gen, t, c](std::optional<std::vector<ResultTuple>> tuples) {
        if (*g != gen) return;
        auto& st = runtime_[t].sensors.at(c);
        st.in_flight = false;
        const auto& sc = std::get<SensorCondition>(specs_[t].conditions[c]);
        std::optional<Reading> r;
        if (tuples) r = reading_from_result(sc, *tuples, now());
        st.failed = !r.has_value();
        if (r) st.history.push(*r);
        if (running_) evaluate_all();
    });
}

std::map<std::string, std::optional<double>> Entrie::secondary_values() const {
    std::map<std::string, std::optional<double>> out;
    for (std::size_t t = 0; t < specs_.size(); ++t) {
        for (const auto& [c, rt] : runtime_[t].sensors) {
            const auto& s = std::get<SensorCondition>(specs_[t].conditions[c]);
            if (!s.is_secondary) continue;
            auto v = history_value(s, rt.history);
            out[s.id] = v ? std::optional<double>(v->value) : std::nullopt;
        }
    }
    return out;
}

ConditionResult Entrie::conjunction(std::size_t t) {
    const auto secondaries = secondary_values();
    ConditionResult all{true, std::nullopt};
    for (std::size_t c = 0; c < specs_[t].conditions.size(); ++c) {
        EvalInputs in;
        in.now_ms = now();
        in.secondaries = &secondaries;
        in.completed = &completed_;
        auto it = runtime_[t].sensors.find(c);
        if (it != runtime_[t].sensors.end() && !it->second.failed) in.history = &it->second.history;
        const auto r = eval_condition(specs_[t].conditions[c], in);
        if (!r.value) return {false, std::nullopt};
        if (r.fired_node) all.fired_node = r.fired_node;
    }
    return all;
}

void Entrie::evaluate_all() {
    for (std::size_t t = 0; t < specs_.size(); ++t) evaluate(t);
}

void Entrie::evaluate(std::size_t t) {
    const auto res = conjunction(t);
    auto& rt = runtime_[t];
    const auto d = repeat_decision(specs_[t].repeat, rt.repeat, res.value, now(), rng_);
    if (d.fire) dispatch(t, res.fired_node);
    io_.loop().cancel(rt.periodic_timer);
    rt.periodic_timer = 0;
    if (d.next_check_ms && running_) {
        const auto gen = *generation_;
        auto g = generation_;
        rt.periodic_timer = io_.loop().schedule(std::max(0.0, *d.next_check_ms - now()), [this, g, gen, t] {
            if (*g == gen && running_) evaluate(t);
        });
    }
}

void Entrie::record(const std::string& trigger, const std::string& action, const std::string& target,
                    const std::string& status) {
    TranscriptRow row{static_cast<std::int64_t>(std::llround(now())), trigger, action, target, status};
    transcript_.push_back(row);
    if (on_transcript) on_transcript(row);
}

void Entrie::dispatch(std::size_t t, const std::optional<std::string>& fired_node) {
    const auto& spec = specs_[t];
    const auto& a = spec.action;
    const auto gen = *generation_;
    auto g = generation_;
    const std::string id = spec.id;

    auto ack_status = [](const std::optional<std::string>& body) -> std::pair<bool, std::string> {
        if (!body) return {false, "ERROR: unreachable"};
        try {
            const auto r = sensact::parse_result(split_lines(*body).empty() ? "" : split_lines(*body).front());
            return {r.ok, r.ok ? "OK" : "ERROR: " + r.detail};
        } catch (const std::invalid_argument&) {
            return {false, "ERROR: bad acknowledgement"};
        }
    };

    if (a.node_host == "ALL") {
        ising::SensorQuery q;
        try {
            q.port = port_number(a.node_port);
        } catch (const std::invalid_argument& e) {
            record(id, a.actuator, "ALL", std::string("ERROR: ") + e.what());
            return;
        }
        q.sensor = a.actuator;
        q.op = ising::AggregateOp::kValue;
        q.args = a.args;
        io_.query(a.roots, q, [this, g, gen, id, actuator = a.actuator](std::optional<std::vector<ResultTuple>> r) {
            if (*g != gen) return;
            if (!r) {
                record(id, actuator, "ALL", "ERROR: no ISING root reachable");
                return;
            }
            std::size_t failed = 0;
            for (const auto& tuple : *r) {
                try {
                    if (!sensact::parse_result(tuple.data).ok) ++failed;
                } catch (const std::invalid_argument&) {
                    ++failed;
                }
            }
            const auto status = failed == 0 ? std::string("OK")
                                            : "ERROR: " + std::to_string(failed) + " of " +
                                                  std::to_string(r->size()) + " failed";
            if (failed == 0) completed_.insert(id);
            record(id, actuator, "ALL", status + " acks=" + std::to_string(r->size()));
        });
        return;
    }

    std::string host = a.node_host;
    if (a.variable_host()) {
        if (!fired_node) {
            record(id, a.actuator, "VARIABLE_host", "ERROR: no bound host");
            return;
        }
        host = *fired_node;
    }
    std::string args = a.args;
    if (a.kind == ActionKind::kStartNode) args = "count=" + std::to_string(a.num_to_start);
    const auto target = host.empty() ? std::string("default") : host;

    io_.invoke(host, a.node_port, a.actuator, args,
               [this, g, gen, t, id, host, target, ack_status](std::optional<std::string> body) {
                   if (*g != gen) return;
                   const auto& action = specs_[t].action;
                   const auto [ok, status] = ack_status(body);
                   if (!ok) {
                       record(id, action.actuator, target, status);
                       return;
                   }
                   completed_.insert(id);
                   if (action.kind != ActionKind::kStartNode) {
                       record(id, action.actuator, target, status);
                       return;
                   }
                   const auto detail = sensact::parse_result(split_lines(*body).front()).detail;
                   record(id, action.actuator, detail, status);
                   if (!action.lifetime) return;
                   std::size_t start = 0;
                   while (start < detail.size()) {
                       auto end = detail.find(';', start);
                       if (end == std::string::npos) end = detail.size();
                       const auto instance = detail.substr(start, end - start);
                       start = end + 1;
                       const double life = sample(*action.lifetime, rng_);
                       io_.loop().schedule(life, [this, g, gen, t, id, host, instance] {
                           if (*g != gen) return;
                           const auto& act = specs_[t].action;
                           io_.invoke(host, act.node_port, "killNode", "target=" + ising::url_encode(instance),
                                      [this, g, gen, id, instance](std::optional<std::string> b) {
                                          if (*g != gen) return;
                                          std::string st = "ERROR: unreachable";
                                          if (b && !split_lines(*b).empty()) {
                                              try {
                                                  const auto r = sensact::parse_result(split_lines(*b).front());
                                                  st = r.ok ? "OK" : "ERROR: " + r.detail;
                                              } catch (const std::invalid_argument&) {
                                                  st = "ERROR: bad acknowledgement";
                                              }
                                          }
                                          record(id, "killNode", instance, st);
                                      });
                       });
                   }
               });
}

}  // namespace acme::entrie
