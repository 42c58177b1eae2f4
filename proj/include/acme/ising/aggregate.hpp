#pragma once

#include "acme/common/csv.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace acme::ising {

enum class AggregateOp : std::uint8_t { kMin, kMax, kAvg, kMedian, kSum, kCount, kValue };

std::string_view to_string(AggregateOp op);
/// Case-insensitive. Throws std::invalid_argument for an unknown name.
AggregateOp aggregate_from_string(std::string_view name);

/// Ops whose partial state is a fixed-size value, so they combine on arrival.
bool is_incremental(AggregateOp op);

/// A local datum before aggregation: one selected value from one sensor.
struct SensorValue {
    std::string source;  ///< sensor server host:port
    std::int64_t timestamp_ms = 0;
    std::string datum;
};

/// Mergeable partial aggregate flowing up the tree.
///
/// State by op: MIN/MAX hold an optional extremum, SUM a sum, COUNT a value
/// count, AVG a (sum, count) pair, MEDIAN a sorted value list and VALUE the
/// concatenated tuples. `contributors` counts nodes with at least one valid
/// value folded in.
class PartialAggregate {
public:
    struct SumCount {
        double sum = 0.0;
        std::uint64_t count = 0;
        bool operator==(const SumCount&) const = default;
    };
    using State = std::variant<std::optional<double>, SumCount, std::vector<double>,
                               std::vector<ResultTuple>, std::uint64_t>;

    explicit PartialAggregate(AggregateOp op);

    AggregateOp op() const { return op_; }
    std::uint32_t contributors() const { return contributors_; }
    const State& state() const { return state_; }

    /// Number of values carried in the partial's encoding (drives message size).
    std::uint32_t value_units() const;
    bool empty() const;

    /// Folds one node's local values. Values that do not parse as numbers are
    /// invalid for numeric ops and skipped; the node counts as a contributor
    /// only if something was folded.
    void add_local(const std::vector<SensorValue>& values);

    /// Throws std::invalid_argument on op mismatch.
    void merge(const PartialAggregate& other);

    std::string encode() const;
    static PartialAggregate decode(std::string_view bytes);

    bool operator==(const PartialAggregate&) const = default;

private:
    AggregateOp op_;
    std::uint32_t contributors_ = 0;
    State state_;
};

/// Partial holding one node's values (or nothing when the value is invalid).
PartialAggregate init_partial(AggregateOp op, const std::optional<std::vector<SensorValue>>& local);

PartialAggregate merge_partial(const PartialAggregate& a, const PartialAggregate& b);

/// Result tuples at the root. Scalar results carry `root_source` and `now_ms`;
/// VALUE returns the collected tuples unchanged. Empty partial: no tuples.
std::vector<ResultTuple> finalize_partial(const PartialAggregate& p, std::string_view root_source,
                                          std::int64_t now_ms);

/// Shortest round-trip decimal representation.
std::string format_number(double v);

/// Parses a whole decimal number; nullopt if text is not numeric.
std::optional<double> parse_number(std::string_view text);

}  // namespace acme::ising
