#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace acme::simnet {

double median(std::vector<double> values);

/// `n,topology,op,median_latency_ms,repetitions` from latency.csv text.
std::string report_latency(const std::string& latency_csv);

/// `n,topology,op,bytes` from bytes.csv text.
std::string report_bytes(const std::string& bytes_csv);

/// `p_percent,lossy_percent,expected_percent,mean_nodes_lost` from loss.csv text.
std::string report_loss(const std::string& loss_csv);

/// Reads latency.csv, bytes.csv and loss.csv from `results` when present and
/// writes fig2_latency.csv, fig3_bytes.csv and table1_loss.csv into `out`.
std::vector<std::filesystem::path> write_report(const std::filesystem::path& results,
                                                const std::filesystem::path& out);

}  // namespace acme::simnet
