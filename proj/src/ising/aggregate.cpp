#include "acme/ising/aggregate.hpp"

#include "acme/common/wire.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <stdexcept>

namespace acme::ising {

namespace {

using Scalar = std::optional<double>;
using SumCount = PartialAggregate::SumCount;
using Values = std::vector<double>;
using Tuples = std::vector<ResultTuple>;

bool tuple_less(const ResultTuple& a, const ResultTuple& b) {
    return std::tie(a.source, a.timestamp_ms, a.data) < std::tie(b.source, b.timestamp_ms, b.data);
}

PartialAggregate::State empty_state(AggregateOp op) {
    switch (op) {
        case AggregateOp::kMin:
        case AggregateOp::kMax:
        case AggregateOp::kSum: return Scalar{};
        case AggregateOp::kAvg: return SumCount{};
        case AggregateOp::kMedian: return Values{};
        case AggregateOp::kCount: return std::uint64_t{0};
        case AggregateOp::kValue: return Tuples{};
    }
    throw std::invalid_argument("bad aggregate op");
}

void fold_scalar(AggregateOp op, Scalar& acc, double v) {
    if (!acc) {
        acc = v;
    } else if (op == AggregateOp::kMin) {
        acc = std::min(*acc, v);
    } else if (op == AggregateOp::kMax) {
        acc = std::max(*acc, v);
    } else {
        *acc += v;
    }
}

}  // namespace

std::string_view to_string(AggregateOp op) {
    switch (op) {
        case AggregateOp::kMin: return "MIN";
        case AggregateOp::kMax: return "MAX";
        case AggregateOp::kAvg: return "AVG";
        case AggregateOp::kMedian: return "MEDIAN";
        case AggregateOp::kSum: return "SUM";
        case AggregateOp::kCount: return "COUNT";
        case AggregateOp::kValue: return "VALUE";
    }
    return "?";
}

AggregateOp aggregate_from_string(std::string_view name) {
    std::string upper(name);
    for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    for (auto op : {AggregateOp::kMin, AggregateOp::kMax, AggregateOp::kAvg, AggregateOp::kMedian,
                    AggregateOp::kSum, AggregateOp::kCount, AggregateOp::kValue}) {
        if (upper == to_string(op)) return op;
    }
    throw std::invalid_argument("unknown aggregation operation '" + std::string(name) + "'");
}

bool is_incremental(AggregateOp op) {
    return op != AggregateOp::kMedian && op != AggregateOp::kValue;
}

std::string format_number(double v) { return fmt::format("{}", v); }

std::optional<double> parse_number(std::string_view text) {
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
    if (text.empty()) return std::nullopt;
    if (text.front() == '+') text.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
    return v;
}

PartialAggregate::PartialAggregate(AggregateOp op) : op_(op), state_(empty_state(op)) {}

std::uint32_t PartialAggregate::value_units() const {
    switch (op_) {
        case AggregateOp::kAvg: return 2;
        case AggregateOp::kMedian:
            return std::max<std::uint32_t>(1, static_cast<std::uint32_t>(std::get<Values>(state_).size()));
        case AggregateOp::kValue:
            return std::max<std::uint32_t>(1, static_cast<std::uint32_t>(std::get<Tuples>(state_).size()));
        default: return 1;
    }
}

bool PartialAggregate::empty() const {
    return std::visit(
        [](const auto& s) -> bool {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Scalar>) return !s.has_value();
            else if constexpr (std::is_same_v<T, SumCount>) return s.count == 0;
            else if constexpr (std::is_same_v<T, std::uint64_t>) return s == 0;
            else return s.empty();
        },
        state_);
}

void PartialAggregate::add_local(const std::vector<SensorValue>& values) {
    bool folded = false;
    for (const auto& v : values) {
        if (op_ == AggregateOp::kValue) {
            auto& tuples = std::get<Tuples>(state_);
            ResultTuple t{v.source, v.timestamp_ms, v.datum};
            tuples.insert(std::upper_bound(tuples.begin(), tuples.end(), t, tuple_less), t);
            folded = true;
            continue;
        }
        if (op_ == AggregateOp::kCount) {
            ++std::get<std::uint64_t>(state_);
            folded = true;
            continue;
        }
        const auto number = parse_number(v.datum);
        if (!number) continue;
        folded = true;
        switch (op_) {
            case AggregateOp::kAvg: {
                auto& sc = std::get<SumCount>(state_);
                sc.sum += *number;
                ++sc.count;
                break;
            }
            case AggregateOp::kMedian: {
                auto& list = std::get<Values>(state_);
                list.insert(std::upper_bound(list.begin(), list.end(), *number), *number);
                break;
            }
            default: fold_scalar(op_, std::get<Scalar>(state_), *number);
        }
    }
    if (folded) ++contributors_;
}

void PartialAggregate::merge(const PartialAggregate& other) {
    if (other.op_ != op_) {
        throw std::invalid_argument("cannot merge " + std::string(to_string(other.op_)) + " into " +
                                    std::string(to_string(op_)));
    }
    contributors_ += other.contributors_;
    switch (op_) {
        case AggregateOp::kAvg: {
            auto& sc = std::get<SumCount>(state_);
            const auto& o = std::get<SumCount>(other.state_);
            sc.sum += o.sum;
            sc.count += o.count;
            break;
        }
        case AggregateOp::kCount:
            std::get<std::uint64_t>(state_) += std::get<std::uint64_t>(other.state_);
            break;
        case AggregateOp::kMedian: {
            auto& list = std::get<Values>(state_);
            const auto& o = std::get<Values>(other.state_);
            Values merged;
            merged.reserve(list.size() + o.size());
            std::merge(list.begin(), list.end(), o.begin(), o.end(), std::back_inserter(merged));
            list = std::move(merged);
            break;
        }
        case AggregateOp::kValue: {
            auto& tuples = std::get<Tuples>(state_);
            const auto& o = std::get<Tuples>(other.state_);
            Tuples merged;
            merged.reserve(tuples.size() + o.size());
            std::merge(tuples.begin(), tuples.end(), o.begin(), o.end(), std::back_inserter(merged),
                       tuple_less);
            tuples = std::move(merged);
            break;
        }
        default: {
            const auto& o = std::get<Scalar>(other.state_);
            if (o) fold_scalar(op_, std::get<Scalar>(state_), *o);
        }
    }
}

std::string PartialAggregate::encode() const {
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(op_));
    w.u32(contributors_);
    switch (op_) {
        case AggregateOp::kAvg: {
            const auto& sc = std::get<SumCount>(state_);
            w.f64(sc.sum);
            w.u64(sc.count);
            break;
        }
        case AggregateOp::kCount: w.u64(std::get<std::uint64_t>(state_)); break;
        case AggregateOp::kMedian: {
            const auto& list = std::get<Values>(state_);
            w.u32(static_cast<std::uint32_t>(list.size()));
            for (double v : list) w.f64(v);
            break;
        }
        case AggregateOp::kValue: {
            const auto& tuples = std::get<Tuples>(state_);
            w.u32(static_cast<std::uint32_t>(tuples.size()));
            for (const auto& t : tuples) {
                w.str(t.source);
                w.i64(t.timestamp_ms);
                w.str(t.data);
            }
            break;
        }
        default: {
            const auto& s = std::get<Scalar>(state_);
            w.u8(s ? 1 : 0);
            w.f64(s.value_or(0.0));
        }
    }
    return std::move(w).bytes();
}

PartialAggregate PartialAggregate::decode(std::string_view bytes) {
    ByteReader r(bytes);
    const auto op_byte = r.u8();
    if (op_byte > static_cast<std::uint8_t>(AggregateOp::kValue)) {
        throw std::invalid_argument("partial aggregate has unknown op");
    }
    PartialAggregate p(static_cast<AggregateOp>(op_byte));
    p.contributors_ = r.u32();
    switch (p.op_) {
        case AggregateOp::kAvg: {
            SumCount sc;
            sc.sum = r.f64();
            sc.count = r.u64();
            p.state_ = sc;
            break;
        }
        case AggregateOp::kCount: p.state_ = r.u64(); break;
        case AggregateOp::kMedian: {
            Values list(r.u32());
            for (auto& v : list) v = r.f64();
            p.state_ = std::move(list);
            break;
        }
        case AggregateOp::kValue: {
            Tuples tuples(r.u32());
            for (auto& t : tuples) {
                t.source = r.str();
                t.timestamp_ms = r.i64();
                t.data = r.str();
            }
            p.state_ = std::move(tuples);
            break;
        }
        default: {
            const bool has = r.u8() != 0;
            const double v = r.f64();
            p.state_ = has ? Scalar{v} : Scalar{};
        }
    }
    if (!r.done()) throw std::invalid_argument("trailing bytes after partial aggregate");
    return p;
}

PartialAggregate init_partial(AggregateOp op, const std::optional<std::vector<SensorValue>>& local) {
    PartialAggregate p(op);
    if (local) p.add_local(*local);
    return p;
}

PartialAggregate merge_partial(const PartialAggregate& a, const PartialAggregate& b) {
    PartialAggregate out = a;
    out.merge(b);
    return out;
}

std::vector<ResultTuple> finalize_partial(const PartialAggregate& p, std::string_view root_source,
                                          std::int64_t now_ms) {
    if (p.empty()) return {};
    auto scalar = [&](std::string data) {
        return std::vector<ResultTuple>{ResultTuple{std::string(root_source), now_ms, std::move(data)}};
    };
    switch (p.op()) {
        case AggregateOp::kAvg: {
            const auto& sc = std::get<SumCount>(p.state());
            return scalar(format_number(sc.sum / static_cast<double>(sc.count)));
        }
        case AggregateOp::kCount: return scalar(std::to_string(std::get<std::uint64_t>(p.state())));
        case AggregateOp::kMedian: {
            const auto& list = std::get<Values>(p.state());
            return scalar(format_number(list[(list.size() - 1) / 2]));
        }
        case AggregateOp::kValue: return std::get<Tuples>(p.state());
        default: return scalar(format_number(*std::get<Scalar>(p.state())));
    }
}

}  // namespace acme::ising
