#include "acme/ising/aggregate.hpp"
#include "acme/ising/timeout.hpp"

#include "oracle.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace acme::ising;
using acme::ResultTuple;

namespace {

constexpr AggregateOp kOps[] = {AggregateOp::kMin,   AggregateOp::kMax,  AggregateOp::kAvg,  AggregateOp::kMedian,
                                AggregateOp::kSum,   AggregateOp::kCount, AggregateOp::kValue};

PartialAggregate local(AggregateOp op, const std::string& src, double v) {
    return init_partial(op, std::vector<SensorValue>{{src, 1, format_number(v)}});
}

std::string result_of(const PartialAggregate& p) {
    auto t = finalize_partial(p, "root:1", 5);
    std::string s;
    for (const auto& r : t) s += r.source + "," + r.data + ";";
    return s;
}

}  // namespace

TEST(Aggregate, NamesRoundTrip) {
    for (auto op : kOps) EXPECT_EQ(aggregate_from_string(to_string(op)), op);
    EXPECT_EQ(aggregate_from_string("median"), AggregateOp::kMedian);
    EXPECT_THROW(aggregate_from_string("MODE"), std::invalid_argument);
    EXPECT_TRUE(is_incremental(AggregateOp::kSum));
    EXPECT_FALSE(is_incremental(AggregateOp::kMedian));
}

TEST(Aggregate, MergeIsCommutativeAndAssociative) {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> d(-5000, 5000);
    for (auto op : kOps) {
        for (int trial = 0; trial < 50; ++trial) {
            auto a = local(op, "a:1", d(rng) / 8.0);
            auto b = local(op, "b:1", d(rng) / 8.0);
            auto c = merge_partial(local(op, "c:1", d(rng) / 8.0), local(op, "d:1", d(rng) / 8.0));
            EXPECT_EQ(result_of(merge_partial(a, b)), result_of(merge_partial(b, a))) << to_string(op);
            auto left = merge_partial(merge_partial(a, b), c);
            auto right = merge_partial(a, merge_partial(b, c));
            EXPECT_EQ(left.contributors(), 4u);
            if (op == AggregateOp::kValue) {
                EXPECT_EQ(std::get<std::vector<ResultTuple>>(left.state()).size(), 4u);
            } else {
                EXPECT_EQ(result_of(left), result_of(right)) << to_string(op);
            }
        }
    }
}

TEST(Aggregate, EmptyIsIdentity) {
    for (auto op : kOps) {
        auto a = local(op, "a:1", 3.5);
        PartialAggregate e(op);
        EXPECT_TRUE(e.empty());
        EXPECT_EQ(merge_partial(a, e), a);
        EXPECT_EQ(merge_partial(e, a), a);
        EXPECT_TRUE(finalize_partial(e, "r:1", 0).empty());
    }
}

TEST(Aggregate, EncodeDecodeRoundTrip) {
    for (auto op : kOps) {
        auto p = merge_partial(local(op, "a:1", 1.25), local(op, "b:1", -7.0));
        EXPECT_EQ(PartialAggregate::decode(p.encode()), p) << to_string(op);
    }
    EXPECT_THROW(PartialAggregate::decode("\x09"), std::invalid_argument);
}

TEST(Aggregate, ValueUnits) {
    auto m = merge_partial(local(AggregateOp::kMedian, "a:1", 1), local(AggregateOp::kMedian, "b:1", 2));
    EXPECT_EQ(m.value_units(), 2u);
    auto s = merge_partial(local(AggregateOp::kMin, "a:1", 1), local(AggregateOp::kMin, "b:1", 2));
    EXPECT_EQ(s.value_units(), 1u);
}

TEST(Aggregate, InvalidValuesAreSkipped) {
    auto p = init_partial(AggregateOp::kSum, std::vector<SensorValue>{{"a:1", 1, "n/a"}});
    EXPECT_EQ(p.contributors(), 0u);
    EXPECT_TRUE(p.empty());
    auto v = init_partial(AggregateOp::kValue, std::vector<SensorValue>{{"a:1", 1, "n/a"}});
    EXPECT_EQ(v.contributors(), 1u);
    EXPECT_TRUE(init_partial(AggregateOp::kMin, std::nullopt).empty());
}

TEST(Aggregate, MergeRejectsOpMismatch) {
    auto a = local(AggregateOp::kMin, "a:1", 1);
    EXPECT_THROW(a.merge(local(AggregateOp::kMax, "a:1", 1)), std::invalid_argument);
}

TEST(Aggregate, FinalizeMatchesCentral) {
    std::vector<double> values{4, 1.5, 9, -2, 7, 7};
    for (auto op : kOps) {
        if (op == AggregateOp::kValue) continue;
        PartialAggregate acc(op);
        for (std::size_t i = 0; i < values.size(); ++i) acc.merge(local(op, "n" + std::to_string(i) + ":1", values[i]));
        auto out = finalize_partial(acc, "root:8000", 99);
        ASSERT_EQ(out.size(), 1u);
        EXPECT_EQ(out[0].source, "root:8000");
        EXPECT_EQ(out[0].timestamp_ms, 99);
        EXPECT_EQ(out[0].data, acme::check::central_scalar(op, values)) << to_string(op);
    }
}

TEST(Aggregate, MedianOfEvenCountIsLower) {
    EXPECT_EQ(acme::check::central_scalar(AggregateOp::kMedian, {1, 2, 3, 4}), "2");
}

TEST(Aggregate, NumbersRoundTrip) {
    for (double v : {0.1, 1e-300, 123456789.125, -0.0, 5e20}) EXPECT_EQ(*parse_number(format_number(v)), v);
    EXPECT_FALSE(parse_number("12abc"));
    EXPECT_FALSE(parse_number(""));
}

TEST(Timeout, OneBudgetPerLevelBelow) {
    EXPECT_DOUBLE_EQ(node_timeout(0, 4, 100, 400), 2000);
    EXPECT_DOUBLE_EQ(node_timeout(3, 4, 100, 400), 500);
    EXPECT_DOUBLE_EQ(node_timeout(4, 4, 100, 400), 0);
    EXPECT_DOUBLE_EQ(node_timeout(9, 4, 100, 400), 0);
    static_assert(node_timeout(1, 3, 1, 1) == 4);
}
