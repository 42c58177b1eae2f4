#include "acme/simnet/report.hpp"

#include "acme/common/csv.hpp"

#include <fmt/core.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace acme::simnet {

namespace {

struct Table {
    std::map<std::string, std::size_t> columns;
    std::vector<std::vector<std::string>> rows;

    const std::string& at(const std::vector<std::string>& row, const std::string& name) const {
        auto it = columns.find(name);
        if (it == columns.end()) throw std::invalid_argument("missing column '" + name + "'");
        if (it->second >= row.size()) throw std::invalid_argument("short row");
        return row[it->second];
    }
};

Table read_table(const std::string& text) {
    Table t;
    auto lines = split_lines(text);
    if (lines.empty()) throw std::invalid_argument("empty table");
    auto header = split_csv_row(lines.front());
    for (std::size_t i = 0; i < header.size(); ++i) t.columns[header[i]] = i;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (!lines[i].empty()) t.rows.push_back(split_csv_row(lines[i]));
    }
    return t;
}

std::optional<std::string> slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

using Cell = std::tuple<std::size_t, std::string, std::string>;

}  // namespace

double median(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("median of nothing");
    std::sort(values.begin(), values.end());
    const auto m = values.size() / 2;
    return values.size() % 2 ? values[m] : (values[m - 1] + values[m]) / 2.0;
}

std::string report_latency(const std::string& latency_csv) {
    auto t = read_table(latency_csv);
    std::map<Cell, std::vector<double>> cells;
    for (const auto& r : t.rows) {
        cells[{std::stoul(t.at(r, "n")), t.at(r, "topology"), t.at(r, "op")}].push_back(
            std::stod(t.at(r, "latency_ms")));
    }
    std::string out = "n,topology,op,median_latency_ms,repetitions\n";
    for (const auto& [k, v] : cells) {
        out += fmt::format("{},{},{},{:.3f},{}\n", std::get<0>(k), std::get<1>(k), std::get<2>(k), median(v),
                           v.size());
    }
    return out;
}

std::string report_bytes(const std::string& bytes_csv) {
    auto t = read_table(bytes_csv);
    std::map<Cell, std::string> cells;
    for (const auto& r : t.rows) {
        cells[{std::stoul(t.at(r, "n")), t.at(r, "topology"), t.at(r, "op")}] = t.at(r, "bytes");
    }
    std::string out = "n,topology,op,bytes\n";
    for (const auto& [k, v] : cells) {
        out += fmt::format("{},{},{},{}\n", std::get<0>(k), std::get<1>(k), std::get<2>(k), v);
    }
    return out;
}

std::string report_loss(const std::string& loss_csv) {
    auto t = read_table(loss_csv);
    std::string out = "p_percent,lossy_percent,expected_percent,mean_nodes_lost\n";
    for (const auto& r : t.rows) {
        out += fmt::format("{:.2f},{:.1f},{:.1f},{:.2f}\n", 100.0 * std::stod(t.at(r, "p")),
                           100.0 * std::stod(t.at(r, "lossy_fraction")),
                           100.0 * std::stod(t.at(r, "expected_fraction")), std::stod(t.at(r, "mean_nodes_lost")));
    }
    return out;
}

std::vector<std::filesystem::path> write_report(const std::filesystem::path& results,
                                                const std::filesystem::path& out) {
    const std::tuple<const char*, const char*, std::string (*)(const std::string&)> parts[] = {
        {"latency.csv", "fig2_latency.csv", &report_latency},
        {"bytes.csv", "fig3_bytes.csv", &report_bytes},
        {"loss.csv", "table1_loss.csv", &report_loss},
    };
    std::vector<std::filesystem::path> written;
    std::filesystem::create_directories(out);
    for (const auto& [in_name, out_name, fn] : parts) {
        auto text = slurp(results / in_name);
        if (!text) continue;
        std::string report;
        try {
            report = fn(*text);
        } catch (const std::exception& e) {
            throw std::invalid_argument(std::string(in_name) + ": " + e.what());
        }
        auto path = out / out_name;
        std::ofstream(path, std::ios::binary) << report;
        written.push_back(path);
    }
    if (written.empty()) throw std::invalid_argument("no latency.csv, bytes.csv or loss.csv in " + results.string());
    return written;
}

}  // namespace acme::simnet
