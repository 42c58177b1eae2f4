#pragma once

#include "acme/ising/aggregate.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace acme::ising {

/// Row filter and column projection over a sensor's CSV output. Columns are 1-based.
struct Selection {
    std::optional<std::size_t> row_column;
    std::string row_regex;
    std::optional<std::size_t> value_column;

    bool operator==(const Selection&) const = default;
};

/// <port, sensor name, selection> on the machine evaluating the query.
struct SensorRef {
    std::uint16_t port = 0;
    std::string sensor;
    std::optional<Selection> selection;

    bool operator==(const SensorRef&) const = default;
};

enum class Comparator { kEq, kNe, kGt, kLt, kGe, kLe };
enum class Connective { kAnd, kOr };

std::string_view to_string(Comparator cmp);

struct PredicateClause {
    SensorRef lhs;
    Comparator cmp = Comparator::kEq;
    std::variant<std::string, SensorRef> rhs;  ///< constant or another sensor

    bool operator==(const PredicateClause&) const = default;
};

/// Clauses folded left to right; joins[i] sits between clauses i and i+1.
struct PredicateExpr {
    std::vector<PredicateClause> clauses;
    std::vector<Connective> joins;

    bool operator==(const PredicateExpr&) const = default;
};

struct SensorQuery {
    std::uint16_t port = 0;
    std::string sensor;
    std::optional<std::string> host;  ///< nullopt = ALL
    AggregateOp op = AggregateOp::kValue;
    std::int64_t epoch_ms = 0;  ///< 0 = snapshot
    std::optional<Selection> selection;
    std::optional<PredicateExpr> predicate;
    std::string args;  ///< raw query string forwarded to the sensor/actuator

    bool is_snapshot() const { return epoch_ms == 0; }
    bool all_hosts() const { return !host.has_value(); }
    bool operator==(const SensorQuery&) const = default;
};

/// Parse failure naming the offending URL field.
class QueryParseError : public std::invalid_argument {
public:
    QueryParseError(std::string field, const std::string& what)
        : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

/// Parses `/ising?port=&sensor=&host=&op=&epoch=[&rowcol=&rowregex=&valcol=][&pred=][&args=]`.
/// The path prefix is optional. Throws QueryParseError.
SensorQuery parse_query(std::string_view url);

/// Inverse of parse_query.
std::string format_query(const SensorQuery& query);

PredicateExpr parse_predicate(std::string_view text);
std::string format_predicate(const PredicateExpr& predicate);

/// Filters and projects CSV rows. Rows narrower than a referenced column never match.
std::vector<std::string> apply_selection(std::string_view raw_csv,
                                         const std::optional<Selection>& selection);

/// Numeric comparison when both sides parse as numbers, otherwise lexical.
bool compare_values(std::string_view lhs, Comparator cmp, std::string_view rhs);

/// Raw CSV of a local sensor, or nullopt when it is unreachable.
using LocalFetch = std::function<std::optional<std::string>(const SensorRef&)>;

/// Every sensor (port, name) the predicate reads, without duplicates.
std::vector<SensorRef> referenced_sensors(const PredicateExpr& predicate);

/// False as soon as a referenced sensor is unreachable or selects no value.
bool eval_predicate(const LocalFetch& fetch, const PredicateExpr& predicate);

/// Percent-decoding ('+' as space) and encoding of URL components.
std::string url_decode(std::string_view text);
std::string url_encode(std::string_view text);

/// key=value pairs of a query string, decoded. Later duplicates win.
std::map<std::string, std::string> parse_query_string(std::string_view query);

}  // namespace acme::ising
