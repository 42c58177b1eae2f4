#include "acme/ising/query.hpp"

#include "acme/common/csv.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <regex>
#include <set>

namespace acme::ising {

namespace {

template <typename Int>
std::optional<Int> parse_int(std::string_view text) {
    Int v{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) return std::nullopt;
    return v;
}

std::vector<std::string> split(std::string_view text, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = text.find(sep, start);
        out.emplace_back(text.substr(start, pos == std::string_view::npos ? text.npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::size_t parse_column(const std::string& field, std::string_view text) {
    auto v = parse_int<long long>(text);
    if (!v || *v < 1) throw QueryParseError(field, "column index must be an integer >= 1");
    return static_cast<std::size_t>(*v);
}

void check_regex(const std::string& field, const std::string& pattern) {
    try {
        std::regex re(pattern);
    } catch (const std::regex_error& e) {
        throw QueryParseError(field, "malformed regular expression '" + pattern + "': " + e.what());
    }
}

std::uint16_t parse_port(const std::string& field, std::string_view text) {
    auto v = parse_int<long>(text);
    if (!v || *v < 1 || *v > 65535) throw QueryParseError(field, "port must be in 1..65535");
    return static_cast<std::uint16_t>(*v);
}

constexpr std::array<std::pair<std::string_view, Comparator>, 6> kComparators{{
    {">=", Comparator::kGe},
    {"<=", Comparator::kLe},
    {"!=", Comparator::kNe},
    {"=", Comparator::kEq},
    {">", Comparator::kGt},
    {"<", Comparator::kLt},
}};

bool looks_like_ref(std::string_view text) {
    const auto colon = text.find(':');
    if (colon == std::string_view::npos || colon == 0) return false;
    return parse_int<long>(text.substr(0, colon)).has_value();
}

SensorRef parse_ref(std::string_view text) {
    const auto parts = split(text, ':');
    if (parts.size() < 2 || parts[1].empty()) {
        throw QueryParseError("pred", "sensor reference '" + std::string(text) + "' needs port:sensor");
    }
    SensorRef ref;
    ref.port = parse_port("pred", parts[0]);
    ref.sensor = parts[1];
    if (parts.size() == 2) return ref;
    if (parts.size() == 3) {
        throw QueryParseError("pred", "sensor reference '" + std::string(text) + "' has a row column but no regex");
    }
    Selection sel;
    if (!parts[2].empty()) sel.row_column = parse_column("pred", parts[2]);
    auto last = parts.size();
    if (parts.size() >= 5 && parse_int<long long>(parts.back())) {
        sel.value_column = parse_column("pred", parts.back());
        --last;
    }
    std::string regex;
    for (std::size_t i = 3; i < last; ++i) {
        if (i != 3) regex.push_back(':');
        regex += parts[i];
    }
    sel.row_regex = regex;
    if (sel.row_column) check_regex("pred", sel.row_regex);
    ref.selection = sel;
    return ref;
}

std::string format_ref(const SensorRef& ref) {
    std::string out = std::to_string(ref.port) + ":" + ref.sensor;
    if (!ref.selection) return out;
    const auto& sel = *ref.selection;
    out += ":" + (sel.row_column ? std::to_string(*sel.row_column) : std::string{}) + ":" + sel.row_regex;
    if (sel.value_column) out += ":" + std::to_string(*sel.value_column);
    return out;
}

PredicateClause parse_clause(std::string_view text) {
    std::size_t best = std::string_view::npos;
    std::size_t best_len = 0;
    Comparator cmp = Comparator::kEq;
    for (const auto& [token, c] : kComparators) {
        const std::string spaced = " " + std::string(token) + " ";
        const auto pos = text.find(spaced);
        if (pos != std::string_view::npos && (pos < best || (pos == best && spaced.size() > best_len))) {
            best = pos;
            best_len = spaced.size();
            cmp = c;
        }
    }
    if (best == std::string_view::npos) {
        throw QueryParseError("pred", "clause '" + std::string(text) +
                                          "' needs ' CMP ' with one of = != > < >= <=");
    }
    PredicateClause clause;
    clause.lhs = parse_ref(text.substr(0, best));
    clause.cmp = cmp;
    const auto rhs = text.substr(best + best_len);
    if (rhs.empty()) throw QueryParseError("pred", "clause '" + std::string(text) + "' has no right-hand side");
    if (looks_like_ref(rhs)) {
        clause.rhs = parse_ref(rhs);
    } else {
        clause.rhs = std::string(rhs);
    }
    return clause;
}

std::vector<std::string> selected_values(std::string_view csv, const std::optional<Selection>& selection,
                                         const std::regex* compiled) {
    std::vector<std::string> out;
    for (const auto& line : split_lines(csv)) {
        if (!selection) {
            out.push_back(line);
            continue;
        }
        const auto fields = split_csv_row(line);
        if (selection->row_column) {
            const auto col = *selection->row_column;
            if (col > fields.size() || !std::regex_search(fields[col - 1], *compiled)) continue;
        }
        if (selection->value_column) {
            const auto col = *selection->value_column;
            if (col > fields.size()) continue;
            out.push_back(fields[col - 1]);
        } else {
            out.push_back(line);
        }
    }
    return out;
}

}  // namespace

std::string_view to_string(Comparator cmp) {
    for (const auto& [token, c] : kComparators) {
        if (c == cmp) return token;
    }
    return "?";
}

std::string url_decode(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c == '+') {
            out.push_back(' ');
        } else if (c == '%' && i + 2 < text.size()) {
            unsigned v = 0;
            auto [ptr, ec] = std::from_chars(text.data() + i + 1, text.data() + i + 3, v, 16);
            if (ec == std::errc{} && ptr == text.data() + i + 3) {
                out.push_back(static_cast<char>(v));
                i += 2;
            } else {
                out.push_back(c);
            }
        } else {
            out.push_back(c);
        }
    }
    return out;
}

std::string url_encode(std::string_view text) {
    static constexpr char kHex[] = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : text) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
            out.push_back(static_cast<char>(c));
        } else {
            out.push_back('%');
            out.push_back(kHex[c >> 4]);
            out.push_back(kHex[c & 0xf]);
        }
    }
    return out;
}

std::map<std::string, std::string> parse_query_string(std::string_view query) {
    std::map<std::string, std::string> out;
    if (query.empty()) return out;
    for (const auto& pair : split(query, '&')) {
        if (pair.empty()) continue;
        const auto eq = pair.find('=');
        if (eq == std::string::npos) {
            out[url_decode(pair)] = "";
        } else {
            out[url_decode(pair.substr(0, eq))] = url_decode(pair.substr(eq + 1));
        }
    }
    return out;
}

PredicateExpr parse_predicate(std::string_view text) {
    PredicateExpr expr;
    const auto tokens = split(text, ';');
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i % 2 == 1) {
            if (tokens[i] == "AND") {
                expr.joins.push_back(Connective::kAnd);
            } else if (tokens[i] == "OR") {
                expr.joins.push_back(Connective::kOr);
            } else {
                throw QueryParseError("pred", "expected AND or OR, got '" + tokens[i] + "'");
            }
        } else {
            expr.clauses.push_back(parse_clause(tokens[i]));
        }
    }
    if (expr.clauses.size() != expr.joins.size() + 1) {
        throw QueryParseError("pred", "predicate ends with a connective");
    }
    return expr;
}

std::string format_predicate(const PredicateExpr& predicate) {
    std::string out;
    for (std::size_t i = 0; i < predicate.clauses.size(); ++i) {
        if (i != 0) out += predicate.joins[i - 1] == Connective::kAnd ? ";AND;" : ";OR;";
        const auto& c = predicate.clauses[i];
        out += format_ref(c.lhs) + " " + std::string(to_string(c.cmp)) + " ";
        if (const auto* ref = std::get_if<SensorRef>(&c.rhs)) {
            out += format_ref(*ref);
        } else {
            out += std::get<std::string>(c.rhs);
        }
    }
    return out;
}

SensorQuery parse_query(std::string_view url) {
    const auto qmark = url.find('?');
    const auto params = parse_query_string(qmark == std::string_view::npos ? url : url.substr(qmark + 1));
    static const std::set<std::string> kKnown{"port", "sensor", "host", "op", "epoch", "rowcol",
                                              "rowregex", "valcol", "pred", "args"};
    for (const auto& [key, value] : params) {
        if (kKnown.count(key) == 0) throw QueryParseError(key, "unknown query field");
    }
    auto require = [&](const std::string& key) -> const std::string& {
        auto it = params.find(key);
        if (it == params.end() || it->second.empty()) throw QueryParseError(key, "missing required field");
        return it->second;
    };

    SensorQuery q;
    q.port = parse_port("port", require("port"));
    q.sensor = require("sensor");
    if (auto it = params.find("host"); it != params.end() && !it->second.empty() && it->second != "ALL") {
        q.host = it->second;
    }
    try {
        q.op = aggregate_from_string(require("op"));
    } catch (const QueryParseError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw QueryParseError("op", e.what());
    }
    if (auto it = params.find("epoch"); it != params.end()) {
        auto v = parse_int<std::int64_t>(it->second);
        if (!v) throw QueryParseError("epoch", "epoch must be an integer number of milliseconds");
        if (*v < 0) throw QueryParseError("epoch", "epoch must be non-negative");
        q.epoch_ms = *v;
    }
    const bool has_rowcol = params.count("rowcol") != 0;
    const bool has_regex = params.count("rowregex") != 0;
    const bool has_valcol = params.count("valcol") != 0;
    if (has_rowcol != has_regex) {
        throw QueryParseError(has_rowcol ? "rowregex" : "rowcol", "rowcol and rowregex must be given together");
    }
    if (has_rowcol || has_valcol) {
        Selection sel;
        if (has_rowcol) {
            sel.row_column = parse_column("rowcol", params.at("rowcol"));
            sel.row_regex = params.at("rowregex");
            check_regex("rowregex", sel.row_regex);
        }
        if (has_valcol) sel.value_column = parse_column("valcol", params.at("valcol"));
        q.selection = sel;
    }
    if (auto it = params.find("pred"); it != params.end() && !it->second.empty()) {
        q.predicate = parse_predicate(it->second);
    }
    if (auto it = params.find("args"); it != params.end()) q.args = it->second;
    return q;
}

std::string format_query(const SensorQuery& q) {
    std::string out = "/ising?port=" + std::to_string(q.port) + "&sensor=" + url_encode(q.sensor) +
                      "&host=" + (q.host ? url_encode(*q.host) : std::string("ALL")) +
                      "&op=" + std::string(to_string(q.op)) + "&epoch=" + std::to_string(q.epoch_ms);
    if (q.selection) {
        if (q.selection->row_column) {
            out += "&rowcol=" + std::to_string(*q.selection->row_column) +
                   "&rowregex=" + url_encode(q.selection->row_regex);
        }
        if (q.selection->value_column) out += "&valcol=" + std::to_string(*q.selection->value_column);
    }
    if (q.predicate) out += "&pred=" + url_encode(format_predicate(*q.predicate));
    if (!q.args.empty()) out += "&args=" + url_encode(q.args);
    return out;
}

std::vector<std::string> apply_selection(std::string_view raw_csv, const std::optional<Selection>& selection) {
    if (selection && selection->row_column) {
        const std::regex re(selection->row_regex);
        return selected_values(raw_csv, selection, &re);
    }
    return selected_values(raw_csv, selection, nullptr);
}

bool compare_values(std::string_view lhs, Comparator cmp, std::string_view rhs) {
    const auto a = parse_number(lhs);
    const auto b = parse_number(rhs);
    int order = 0;
    if (a && b) {
        order = *a < *b ? -1 : (*a > *b ? 1 : 0);
    } else {
        const auto c = lhs.compare(rhs);
        order = c < 0 ? -1 : (c > 0 ? 1 : 0);
    }
    switch (cmp) {
        case Comparator::kEq: return order == 0;
        case Comparator::kNe: return order != 0;
        case Comparator::kGt: return order > 0;
        case Comparator::kLt: return order < 0;
        case Comparator::kGe: return order >= 0;
        case Comparator::kLe: return order <= 0;
    }
    return false;
}

std::vector<SensorRef> referenced_sensors(const PredicateExpr& predicate) {
    std::vector<SensorRef> out;
    auto add = [&](const SensorRef& ref) {
        SensorRef key{ref.port, ref.sensor, std::nullopt};
        if (std::find(out.begin(), out.end(), key) == out.end()) out.push_back(key);
    };
    for (const auto& c : predicate.clauses) {
        add(c.lhs);
        if (const auto* ref = std::get_if<SensorRef>(&c.rhs)) add(*ref);
    }
    return out;
}

bool eval_predicate(const LocalFetch& fetch, const PredicateExpr& predicate) {
    auto value_of = [&](const SensorRef& ref) -> std::optional<std::string> {
        const auto raw = fetch(ref);
        if (!raw) return std::nullopt;
        auto values = apply_selection(*raw, ref.selection);
        if (values.empty()) return std::nullopt;
        return values.front();
    };
    std::optional<bool> acc;
    for (std::size_t i = 0; i < predicate.clauses.size(); ++i) {
        const auto& c = predicate.clauses[i];
        const auto lhs = value_of(c.lhs);
        if (!lhs) return false;
        std::optional<std::string> rhs;
        if (const auto* ref = std::get_if<SensorRef>(&c.rhs)) {
            rhs = value_of(*ref);
            if (!rhs) return false;
        } else {
            rhs = std::get<std::string>(c.rhs);
        }
        const bool v = compare_values(*lhs, c.cmp, *rhs);
        if (!acc) {
            acc = v;
        } else if (predicate.joins[i - 1] == Connective::kAnd) {
            acc = *acc && v;
        } else {
            acc = *acc || v;
        }
    }
    return acc.value_or(false);
}

}  // namespace acme::ising
