#include "acme/entrie/config.hpp"

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace acme::entrie {

namespace pt = boost::property_tree;

namespace {

using Attrs = std::map<std::string, std::string>;

Attrs attributes(const pt::ptree& node, const std::string& path, const std::set<std::string>& allowed) {
    Attrs out;
    if (auto a = node.get_child_optional("<xmlattr>")) {
        for (const auto& [key, value] : *a) {
            if (allowed.count(key) == 0) throw ConfigError(path, "unknown attribute '" + key + "'");
            out[key] = value.data();
        }
    }
    return out;
}

std::optional<std::string> opt(const Attrs& a, const std::string& key) {
    auto it = a.find(key);
    if (it == a.end()) return std::nullopt;
    return it->second;
}

std::string required(const Attrs& a, const std::string& key, const std::string& path) {
    auto v = opt(a, key);
    if (!v) throw ConfigError(path, "missing attribute '" + key + "'");
    return *v;
}

double number(const std::string& text, const std::string& key, const std::string& path) {
    auto v = ising::parse_number(text);
    if (!v) throw ConfigError(path, "attribute '" + key + "' is not a number: '" + text + "'");
    return *v;
}

double non_negative(const std::string& text, const std::string& key, const std::string& path) {
    const auto v = number(text, key, path);
    if (v < 0) throw ConfigError(path, "attribute '" + key + "' must be >= 0");
    return v;
}

bool boolean(const std::string& text, const std::string& key, const std::string& path) {
    if (text == "true") return true;
    if (text == "false") return false;
    throw ConfigError(path, "attribute '" + key + "' must be true or false");
}

ising::AggregateOp op(const std::string& text, const std::string& key, const std::string& path) {
    try {
        return ising::aggregate_from_string(text);
    } catch (const std::invalid_argument&) {
        throw ConfigError(path, "attribute '" + key + "' names unknown aggregate '" + text + "'");
    }
}

ising::Comparator comparator(const std::string& text, const std::string& path) {
    static const std::map<std::string, ising::Comparator> kOps{
        {"=", ising::Comparator::kEq},  {"==", ising::Comparator::kEq}, {"!=", ising::Comparator::kNe},
        {">", ising::Comparator::kGt},  {"<", ising::Comparator::kLt},  {">=", ising::Comparator::kGe},
        {"<=", ising::Comparator::kLe},
    };
    auto it = kOps.find(text);
    if (it == kOps.end()) throw ConfigError(path, "unknown operator '" + text + "'");
    return it->second;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item.erase(0, item.find_first_not_of(" \t\n"));
        item.erase(item.find_last_not_of(" \t\n") + 1);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::pair<std::string, std::string> split_node(const std::string& text, const std::string& path) {
    const auto colon = text.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == text.size()) {
        throw ConfigError(path, "node must be host:port or ALL:port, got '" + text + "'");
    }
    return {text.substr(0, colon), text.substr(colon + 1)};
}

Duration duration(const std::optional<std::string>& distribution, const std::optional<std::string>& randomized,
                  const std::optional<std::string>& mean, const std::optional<std::string>& fixed,
                  const std::string& what, const std::string& path) {
    Duration d;
    const bool rand = randomized && boolean(*randomized, "rand" + what, path);
    if (distribution && *distribution != "exponential" && *distribution != "fixed") {
        throw ConfigError(path, "unknown distribution '" + *distribution + "'");
    }
    d.exponential = rand || (distribution && *distribution == "exponential" && !fixed);
    const auto& text = mean ? mean : fixed;
    if (!text) throw ConfigError(path, "missing mean" + what + " or " + what);
    d.ms = number(*text, mean ? "mean" + what : what, path);
    if (d.ms <= 0) throw ConfigError(path, what + " must be > 0");
    return d;
}

RepeatPolicy parse_repeat(const pt::ptree& node, const std::string& path) {
    const auto a = attributes(node, path, {"type", "distribution", "randPeriod", "meanPeriod", "period"});
    RepeatPolicy r;
    const bool has_period = a.count("meanPeriod") || a.count("period");
    if (auto type = opt(a, "type")) {
        static const std::map<std::string, RepeatMode> kModes{
            {"firstTransition", RepeatMode::kFirstTransition},
            {"everyTransition", RepeatMode::kEveryTransition},
            {"periodicFirstTrue", RepeatMode::kPeriodicFirstTrue},
            {"periodicEveryTrue", RepeatMode::kPeriodicEveryTrue},
        };
        auto it = kModes.find(*type);
        if (it == kModes.end()) throw ConfigError(path, "unknown repeat type '" + *type + "'");
        r.mode = it->second;
    } else {
        r.mode = has_period ? RepeatMode::kPeriodicEveryTrue : RepeatMode::kEveryTransition;
    }
    const bool periodic = r.mode == RepeatMode::kPeriodicFirstTrue || r.mode == RepeatMode::kPeriodicEveryTrue;
    if (periodic) {
        if (!has_period) throw ConfigError(path, "periodic repeat needs period or meanPeriod");
        r.period = duration(opt(a, "distribution"), opt(a, "randPeriod"), opt(a, "meanPeriod"), opt(a, "period"),
                            "Period", path);
    } else if (has_period) {
        throw ConfigError(path, "period given for a transition repeat");
    }
    return r;
}

ActionSpec parse_params(const std::string& name, const pt::ptree* params, const std::string& path) {
    ActionSpec a;
    const std::string ppath = path + "/params";
    Attrs attrs;
    if (name == "startNode") {
        a.kind = ActionKind::kStartNode;
        if (params) {
            attrs = attributes(*params, ppath, {"numToStart", "distribution", "randLifetime", "meanLifetime",
                                                "lifetime", "hosts", "node"});
        }
        if (auto n = opt(attrs, "numToStart")) {
            const auto v = number(*n, "numToStart", ppath);
            if (v < 1 || v != static_cast<double>(static_cast<std::uint32_t>(v))) {
                throw ConfigError(ppath, "numToStart must be a positive integer");
            }
            a.num_to_start = static_cast<std::uint32_t>(v);
        }
        const bool rand = opt(attrs, "randLifetime") && boolean(*opt(attrs, "randLifetime"), "randLifetime", ppath);
        if (rand || attrs.count("meanLifetime") || attrs.count("lifetime")) {
            a.lifetime = duration(opt(attrs, "distribution"), opt(attrs, "randLifetime"), opt(attrs, "meanLifetime"),
                                  opt(attrs, "lifetime"), "Lifetime", ppath);
        }
        a.actuator = "startNode";
    } else if (name == "killNode") {
        a.kind = ActionKind::kKillNode;
        if (params) attrs = attributes(*params, ppath, {"target", "hosts", "node"});
        a.actuator = "killNode";
        a.args = "target=" + ising::url_encode(required(attrs, "target", ppath));
    } else {
        a.kind = ActionKind::kActuator;
        if (params) attrs = attributes(*params, ppath, {"commandType", "name", "hosts", "node", "args"});
        if (name == "EXECUTE") {
            const auto type = required(attrs, "commandType", ppath);
            if (type != "actuator") throw ConfigError(ppath, "unsupported commandType '" + type + "'");
            a.actuator = required(attrs, "name", ppath);
        } else {
            if (attrs.count("commandType") || attrs.count("name")) {
                throw ConfigError(ppath, "commandType/name only apply to EXECUTE");
            }
            a.actuator = name;
        }
        if (auto args = opt(attrs, "args")) a.args = *args;
    }
    if (auto hosts = opt(attrs, "hosts")) a.roots = split_list(*hosts);
    if (auto node = opt(attrs, "node")) std::tie(a.node_host, a.node_port) = split_node(*node, ppath);
    if (a.node_host == "ALL" && a.roots.empty()) throw ConfigError(ppath, "ALL-scope action needs hosts");
    return a;
}

ConditionSpec parse_condition(const pt::ptree& node, const std::string& path) {
    const auto a = attributes(node, path,
                              {"type", "value", "ID", "name", "hosts", "node", "period", "sensorAgg", "histSize",
                               "histAgg", "isSecondary", "secondaryID", "scalingFactor", "operator", "timerName"});
    const auto type = required(a, "type", path);
    if (type == "timer") {
        return TimerCondition{non_negative(required(a, "value", path), "value", path), std::nullopt};
    }
    if (type == "endDelay") {
        // resolved against the action's timers once all conditions are read
        return TimerCondition{-1.0, non_negative(required(a, "value", path), "value", path)};
    }
    if (type == "completion") {
        CompletionCondition c{split_list(required(a, "value", path))};
        if (c.action_ids.empty()) throw ConfigError(path, "completion condition names no actions");
        return c;
    }
    if (type != "sensor") throw ConfigError(path, "unknown condition type '" + type + "'");

    SensorCondition s;
    s.id = opt(a, "ID").value_or("");
    s.sensor = required(a, "name", path);
    if (auto hosts = opt(a, "hosts")) s.roots = split_list(*hosts);
    std::tie(s.node_host, s.node_port) = split_node(required(a, "node", path), path);
    if (s.all_nodes() && s.roots.empty()) throw ConfigError(path, "ALL-scope sensor condition needs hosts");
    if (auto p = opt(a, "period")) s.period_ms = number(*p, "period", path);
    if (s.period_ms <= 0) throw ConfigError(path, "period must be > 0");
    if (auto agg = opt(a, "sensorAgg")) s.sensor_agg = op(*agg, "sensorAgg", path);
    if (auto h = opt(a, "histSize")) {
        const auto v = number(*h, "histSize", path);
        if (v < 1 || v != static_cast<double>(static_cast<std::size_t>(v))) {
            throw ConfigError(path, "histSize must be a positive integer");
        }
        s.hist_size = static_cast<std::size_t>(v);
    }
    if (auto agg = opt(a, "histAgg")) s.hist_agg = op(*agg, "histAgg", path);
    if (auto sec = opt(a, "isSecondary")) s.is_secondary = boolean(*sec, "isSecondary", path);
    if (auto cmp = opt(a, "operator")) s.cmp = comparator(*cmp, path);
    s.rhs_value = opt(a, "value");
    s.secondary_id = opt(a, "secondaryID");
    if (auto f = opt(a, "scalingFactor")) s.scaling_factor = number(*f, "scalingFactor", path);
    if (s.is_secondary) {
        if (s.id.empty()) throw ConfigError(path, "secondary condition needs an ID");
    } else {
        if (!s.cmp) throw ConfigError(path, "sensor condition needs an operator");
        if (s.rhs_value.has_value() == s.secondary_id.has_value()) {
            throw ConfigError(path, "sensor condition needs exactly one of value and secondaryID");
        }
    }
    return s;
}

TriggerSpec parse_action(const pt::ptree& node, const std::string& path) {
    const auto a = attributes(node, path, {"ID", "name", "timerName"});
    TriggerSpec t;
    t.id = required(a, "ID", path);
    t.timer_name = opt(a, "timerName").value_or("");
    const auto name = required(a, "name", path);

    const pt::ptree* params = nullptr;
    const pt::ptree* conditions = nullptr;
    bool has_repeat = false;
    for (const auto& [key, child] : node) {
        if (key == "<xmlattr>" || key == "<xmlcomment>") continue;
        if (key == "params" && !params) {
            params = &child;
        } else if (key == "repeat" && !has_repeat) {
            t.repeat = parse_repeat(child, path + "/repeat");
            has_repeat = true;
        } else if (key == "conditions" && !conditions) {
            conditions = &child;
        } else {
            throw ConfigError(path, "unexpected element <" + key + ">");
        }
    }
    t.action = parse_params(name, params, path);
    if (!conditions) throw ConfigError(path, "missing <conditions>");

    std::size_t index = 0;
    for (const auto& [key, child] : *conditions) {
        if (key == "<xmlattr>") throw ConfigError(path + "/conditions", "takes no attributes");
        if (key == "<xmlcomment>") continue;
        const auto cpath = path + "/conditions/condition[" + std::to_string(++index) + "]";
        if (key != "condition") throw ConfigError(path + "/conditions", "unexpected element <" + key + ">");
        t.conditions.push_back(parse_condition(child, cpath));
    }
    if (t.conditions.empty()) throw ConfigError(path + "/conditions", "a trigger needs at least one condition");

    double anchor = 0.0;
    for (const auto& c : t.conditions) {
        if (const auto* tc = std::get_if<TimerCondition>(&c); tc && tc->not_before_ms >= 0) {
            anchor = std::max(anchor, tc->not_before_ms);
        }
    }
    for (auto& c : t.conditions) {
        if (auto* tc = std::get_if<TimerCondition>(&c); tc && tc->not_before_ms < 0) {
            tc->not_before_ms = 0.0;
            tc->not_after_ms = anchor + *tc->not_after_ms;
        }
    }

    bool binds_extremum = false;
    for (const auto& c : t.conditions) {
        const auto* s = std::get_if<SensorCondition>(&c);
        if (s && !s->is_secondary && s->all_nodes() &&
            (s->sensor_agg == ising::AggregateOp::kMax || s->sensor_agg == ising::AggregateOp::kMin)) {
            binds_extremum = true;
        }
    }
    if (t.action.variable_host() && !binds_extremum) {
        throw ConfigError(path, "VARIABLE_host needs a gating MAX or MIN sensor condition over ALL nodes");
    }
    return t;
}

std::string strip_declaration(const std::string& xml) {
    const auto start = xml.find("<?xml");
    if (start == std::string::npos) return xml;
    const auto end = xml.find("?>", start);
    if (end == std::string::npos) return xml;
    return xml.substr(0, start) + xml.substr(end + 2);
}

}  // namespace

std::string_view to_string(RepeatMode mode) {
    switch (mode) {
        case RepeatMode::kFirstTransition: return "firstTransition";
        case RepeatMode::kEveryTransition: return "everyTransition";
        case RepeatMode::kPeriodicFirstTrue: return "periodicFirstTrue";
        case RepeatMode::kPeriodicEveryTrue: return "periodicEveryTrue";
    }
    return "?";
}

std::vector<TriggerSpec> parse_config(const std::string& xml) {
    pt::ptree tree;
    std::istringstream in("<entrie-config>" + strip_declaration(xml) + "</entrie-config>");
    try {
        pt::read_xml(in, tree, pt::xml_parser::trim_whitespace);
    } catch (const pt::xml_parser_error& e) {
        throw ConfigError("config", std::string("malformed XML: ") + e.message() + " at line " +
                                        std::to_string(e.line()));
    }
    const pt::ptree* top = &tree.get_child("entrie-config");
    std::vector<std::pair<std::string, const pt::ptree*>> elements;
    for (const auto& [key, child] : *top) {
        if (key != "<xmlcomment>") elements.emplace_back(key, &child);
    }
    if (elements.size() == 1 && elements.front().first != "action") {
        top = elements.front().second;
        elements.clear();
        for (const auto& [key, child] : *top) {
            if (key != "<xmlcomment>" && key != "<xmlattr>") elements.emplace_back(key, &child);
        }
    }

    std::vector<TriggerSpec> specs;
    std::set<std::string> ids;
    std::set<std::string> secondary_ids;
    for (const auto& [key, child] : elements) {
        const auto path = "action[" + std::to_string(specs.size() + 1) + "]";
        if (key != "action") throw ConfigError(path, "unexpected element <" + key + ">");
        specs.push_back(parse_action(*child, path));
        if (!ids.insert(specs.back().id).second) throw ConfigError(path, "duplicate action ID " + specs.back().id);
        for (const auto& c : specs.back().conditions) {
            if (const auto* s = std::get_if<SensorCondition>(&c); s && s->is_secondary) secondary_ids.insert(s->id);
        }
    }
    for (std::size_t i = 0; i < specs.size(); ++i) {
        for (std::size_t j = 0; j < specs[i].conditions.size(); ++j) {
            const auto path = "action[" + std::to_string(i + 1) + "]/conditions/condition[" + std::to_string(j + 1) + "]";
            const auto& c = specs[i].conditions[j];
            if (const auto* s = std::get_if<SensorCondition>(&c); s && s->secondary_id &&
                                                                   secondary_ids.count(*s->secondary_id) == 0) {
                throw ConfigError(path, "secondaryID '" + *s->secondary_id + "' names no secondary condition");
            }
            if (const auto* cc = std::get_if<CompletionCondition>(&c)) {
                for (const auto& id : cc->action_ids) {
                    if (ids.count(id) == 0) throw ConfigError(path, "completion names unknown action " + id);
                }
            }
        }
    }
    return specs;
}

std::vector<TriggerSpec> load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, "cannot read config file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

namespace {

std::string substitute(std::string text, const std::map<std::string, std::string>& values) {
    for (const auto& [key, value] : values) {
        const auto token = "[" + key + "]";
        for (auto pos = text.find(token); pos != std::string::npos; pos = text.find(token, pos + value.size())) {
            text.replace(pos, token.size(), value);
        }
    }
    return text;
}

}  // namespace

std::vector<TriggerSpec> bind(std::vector<TriggerSpec> specs, const std::map<std::string, std::string>& values) {
    for (auto& t : specs) {
        for (auto& r : t.action.roots) r = substitute(r, values);
        t.action.node_host = substitute(t.action.node_host, values);
        t.action.node_port = substitute(t.action.node_port, values);
        for (auto& c : t.conditions) {
            if (auto* s = std::get_if<SensorCondition>(&c)) {
                for (auto& r : s->roots) r = substitute(r, values);
                s->node_host = substitute(s->node_host, values);
                s->node_port = substitute(s->node_port, values);
            }
        }
    }
    return specs;
}

std::vector<TriggerSpec> with_roots(std::vector<TriggerSpec> specs, const std::vector<std::string>& roots) {
    for (auto& t : specs) {
        if (!t.action.roots.empty() || t.action.node_host == "ALL") t.action.roots = roots;
        for (auto& c : t.conditions) {
            if (auto* s = std::get_if<SensorCondition>(&c); s && (!s->roots.empty() || s->all_nodes())) {
                s->roots = roots;
            }
        }
    }
    return specs;
}

}  // namespace acme::entrie
