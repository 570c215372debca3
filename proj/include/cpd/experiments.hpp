#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpd/model.hpp"
#include "cpd/monitor.hpp"

namespace cpd {

/// Data-file problem with the offending line recorded.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error(what + " (line " + std::to_string(line) + ")"),
          line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

struct Scenario {
    std::string id;
    ModelSpec spec;
    ThetaVector theta0;
    ThetaVector theta1;   // == theta0 under the null
    bool has_change = false;

    static std::vector<Scenario> paper_defaults();
};

struct ExperimentConfig {
    std::vector<Scenario> scenarios;
    std::vector<std::size_t> ms{200, 500};
    double horizon = 1.5;
    double alpha = 0.05;
    double k_star_factor = 1.25;
    int replications = 100;
    std::uint64_t master_seed = 1;
    std::size_t burnin = 500;
    std::size_t v_m = 0;        // 0 -> monitor default
    std::size_t ell_stride = 0; // 0 -> monitor default
    std::string cache_path;
    bool parallel = true;       // replications fan out over threads
};

struct DelayStats {
    std::size_t n = 0;
    double mean = 0.0, sd = 0.0, min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

struct TableRow {
    std::string scenario;
    std::string kind;  // "level" or "power"
    std::size_t m = 0;
    std::size_t k_star = 0;  // 0 for level rows
    double c_alpha = 0.0;
    int replications = 0;
    int rejections = 0;
    double rate = 0.0;
    std::optional<DelayStats> delays;  // power rows with >= 1 detection
};

struct ResultTable {
    std::vector<TableRow> rows;
    int failed_replications = 0;
};

/// One nonnegative integer count per record; optional header, optional
/// leading date column (the count is the last field).
CountSeries load_counts_csv(const std::string& path);

/// Empirical rejection frequencies (levels for null scenarios, powers for
/// change scenarios) over the configured replications.
ResultTable run_level_power(const ExperimentConfig& config);

/// Detection-delay summary statistics over detecting replications of the
/// change scenarios.
ResultTable run_delay_stats(const ExperimentConfig& config);

/// Tab-separated plot data for one monitored series: per-k raw and
/// normalized detector maxima, the threshold, and change/stop markers.
void emit_detector_series(const ModelSpec& spec, const CountSeries& y,
                          const MonitorConfig& config, const std::string& out_path);

/// Serial reference for run_level_power; bitwise-identical results.
ResultTable run_level_power_serial(ExperimentConfig config);

std::string format_table1(const ResultTable& table);
std::string format_table2(const ResultTable& table);

}  // namespace cpd
