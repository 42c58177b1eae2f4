#include "acme/common/csv.hpp"

#include <charconv>
#include <stdexcept>

namespace acme {

std::vector<std::string> split_csv_row(std::string_view line) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    current.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                current.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    fields.push_back(std::move(current));
    return fields;
}

std::string join_csv_row(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i != 0) out.push_back(',');
        const auto& f = fields[i];
        if (f.find_first_of(",\"\n") == std::string::npos) {
            out += f;
            continue;
        }
        out.push_back('"');
        for (char c : f) {
            if (c == '"') out.push_back('"');
            out.push_back(c);
        }
        out.push_back('"');
    }
    return out;
}

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!line.empty()) lines.emplace_back(line);
        start = end + 1;
    }
    return lines;
}

std::string format_tuple(const ResultTuple& tuple) {
    return tuple.source + "," + std::to_string(tuple.timestamp_ms) + "," + tuple.data;
}

ResultTuple parse_tuple(std::string_view line) {
    const auto first = line.find(',');
    if (first == std::string_view::npos) {
        throw std::invalid_argument("result tuple missing timestamp: " + std::string(line));
    }
    const auto second = line.find(',', first + 1);
    if (second == std::string_view::npos) {
        throw std::invalid_argument("result tuple missing data: " + std::string(line));
    }
    ResultTuple tuple;
    tuple.source = std::string(line.substr(0, first));
    const auto ts = line.substr(first + 1, second - first - 1);
    auto [ptr, ec] = std::from_chars(ts.data(), ts.data() + ts.size(), tuple.timestamp_ms);
    if (ec != std::errc{} || ptr != ts.data() + ts.size()) {
        throw std::invalid_argument("result tuple has bad timestamp: " + std::string(ts));
    }
    tuple.data = std::string(line.substr(second + 1));
    return tuple;
}

std::string format_tuples(const std::vector<ResultTuple>& tuples) {
    std::string out;
    for (const auto& t : tuples) {
        out += format_tuple(t);
        out.push_back('\n');
    }
    return out;
}

std::vector<ResultTuple> parse_tuples(std::string_view text) {
    std::vector<ResultTuple> tuples;
    for (const auto& line : split_lines(text)) tuples.push_back(parse_tuple(line));
    return tuples;
}

}  // namespace acme
