#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace acme {

/// Splits one CSV row. Double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_csv_row(std::string_view line);

/// Joins fields into one CSV row, quoting any field that needs it.
std::string join_csv_row(const std::vector<std::string>& fields);

/// Splits text into lines, dropping a trailing '\r' and empty lines.
std::vector<std::string> split_lines(std::string_view text);

/// One line of ISING output: `host:port,timestamp_ms,data`.
struct ResultTuple {
    std::string source;
    std::int64_t timestamp_ms = 0;
    std::string data;

    bool operator==(const ResultTuple&) const = default;
};

std::string format_tuple(const ResultTuple& tuple);

/// Inverse of format_tuple. The data field keeps any embedded commas.
/// Throws std::invalid_argument on a malformed line.
ResultTuple parse_tuple(std::string_view line);

std::string format_tuples(const std::vector<ResultTuple>& tuples);
std::vector<ResultTuple> parse_tuples(std::string_view text);

}  // namespace acme
