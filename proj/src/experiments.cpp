#include "cpd/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cpd/critical_values.hpp"
#include "cpd/rng.hpp"
#include "cpd/simulate.hpp"

namespace cpd {

std::vector<Scenario> Scenario::paper_defaults() {
    const ModelSpec ingarch11 = ModelSpec::ingarch(1, 1);
    std::vector<Scenario> out;
    const std::vector<std::pair<ThetaVector, ThetaVector>> params = {
        {{1.0, 0.2, 0.15}, {1.0, 0.2, 0.5}},
        {{0.75, 0.5, 0.3}, {0.25, 0.5, 0.3}},
        {{2.5, 0.0, 0.35}, {4.5, 0.05, 0.6}},
    };
    for (std::size_t i = 0; i < params.size(); ++i) {
        const std::string id = "S" + std::to_string(i + 1);
        out.push_back({id, ingarch11, params[i].first, params[i].first, false});
        out.push_back({id, ingarch11, params[i].first, params[i].second, true});
    }
    return out;
}

CountSeries load_counts_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path, 0);
    CountSeries series;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string field = line;
        const auto comma = line.rfind(',');
        if (comma != std::string::npos) field = line.substr(comma + 1);
        // Trim surrounding whitespace.
        const auto first = field.find_first_not_of(" \t");
        if (first == std::string::npos) continue;  // blank record
        const auto last = field.find_last_not_of(" \t");
        field = field.substr(first, last - first + 1);

        std::size_t consumed = 0;
        long value = 0;
        bool ok = true;
        try {
            value = std::stol(field, &consumed);
        } catch (const std::exception&) {
            ok = false;
        }
        if (!ok || consumed != field.size() || value < 0) {
            if (line_no == 1 && series.counts.empty()) continue;  // header row
            throw ParseError("invalid count value '" + field + "'", line_no);
        }
        series.counts.push_back(value);
    }
    if (series.counts.empty()) throw std::invalid_argument("empty count file: " + path);
    return series;
}

namespace {

struct RepOutcome {
    bool ok = false;
    bool detected = false;
    std::size_t tau = 0;
    std::size_t k_star = 0;
};

MonitorConfig monitor_config_for(const ExperimentConfig& config, std::size_t m,
                                 const ModelSpec& spec, double c_alpha) {
    MonitorConfig mc;
    mc.m = m;
    mc.horizon = config.horizon;
    mc.v_m = config.v_m;
    mc.alpha = config.alpha;
    mc.c_alpha = c_alpha;
    mc.ell_stride = config.ell_stride;
    mc.domain = ThetaDomain::defaults(spec);
    return mc;
}

RepOutcome run_one(const ExperimentConfig& config, const Scenario& scenario,
                   std::size_t scenario_index, std::size_t m, int rep, double c_alpha) {
    RepOutcome out;
    const std::uint64_t seed = mix_seed(
        config.master_seed, (static_cast<std::uint64_t>(scenario_index) << 32) | m,
        static_cast<std::uint64_t>(rep));
    const std::size_t total_len =
        static_cast<std::size_t>(std::floor(config.horizon * static_cast<double>(m))) + 1;
    try {
        CountSeries y;
        if (scenario.has_change) {
            ChangeSpec change;
            change.theta0 = scenario.theta0;
            change.theta1 = scenario.theta1;
            change.k_star = static_cast<std::size_t>(
                std::llround(config.k_star_factor * static_cast<double>(m)));
            change.total_len = total_len;
            out.k_star = change.k_star;
            y = simulate_with_change(change, scenario.spec, config.burnin, seed);
        } else {
            y = simulate_stationary(scenario.spec, scenario.theta0, total_len,
                                    config.burnin, seed);
        }
        const MonitorTrace trace =
            run_monitor(scenario.spec, y, monitor_config_for(config, m, scenario.spec, c_alpha));
        out.detected = trace.detected();
        out.tau = trace.tau;
        out.ok = true;
    } catch (const std::exception&) {
        out.ok = false;
    }
    return out;
}

std::vector<RepOutcome> run_replications(const ExperimentConfig& config,
                                         const Scenario& scenario,
                                         std::size_t scenario_index, std::size_t m,
                                         double c_alpha) {
    std::vector<RepOutcome> outcomes(static_cast<std::size_t>(config.replications));
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (config.parallel)
#endif
    for (int rep = 0; rep < config.replications; ++rep) {
        outcomes[static_cast<std::size_t>(rep)] =
            run_one(config, scenario, scenario_index, m, rep, c_alpha);
    }
    return outcomes;
}

double quantile_type7(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) return 0.0;
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

DelayStats delay_stats(std::vector<double> delays) {
    DelayStats s;
    s.n = delays.size();
    if (delays.empty()) return s;
    std::sort(delays.begin(), delays.end());
    double sum = 0.0;
    for (double d : delays) sum += d;
    s.mean = sum / static_cast<double>(delays.size());
    double ss = 0.0;
    for (double d : delays) ss += (d - s.mean) * (d - s.mean);
    s.sd = delays.size() > 1 ? std::sqrt(ss / static_cast<double>(delays.size() - 1)) : 0.0;
    s.min = delays.front();
    s.max = delays.back();
    s.q1 = quantile_type7(delays, 0.25);
    s.median = quantile_type7(delays, 0.5);
    s.q3 = quantile_type7(delays, 0.75);
    return s;
}

double scenario_c_alpha(const ExperimentConfig& config, const Scenario& scenario) {
    QuantileRequest req;
    req.d = scenario.spec.dim();
    req.horizon = config.horizon;
    req.alpha = config.alpha;
    req.seed = mix_seed(config.master_seed, 0xC0FFEEULL);
    return quantile_c_alpha(req, config.cache_path).c_alpha;
}

}  // namespace

ResultTable run_level_power(const ExperimentConfig& config) {
    if (config.replications < 1) throw std::invalid_argument("replications must be >= 1");
    ResultTable table;
    for (std::size_t si = 0; si < config.scenarios.size(); ++si) {
        const Scenario& scenario = config.scenarios[si];
        const double c_alpha = scenario_c_alpha(config, scenario);
        for (std::size_t m : config.ms) {
            const auto outcomes = run_replications(config, scenario, si, m, c_alpha);
            TableRow row;
            row.scenario = scenario.id;
            row.kind = scenario.has_change ? "power" : "level";
            row.m = m;
            row.c_alpha = c_alpha;
            std::vector<double> delays;
            for (const RepOutcome& o : outcomes) {
                if (!o.ok) {
                    ++table.failed_replications;
                    continue;
                }
                ++row.replications;
                if (o.detected) {
                    ++row.rejections;
                    if (scenario.has_change && o.tau > o.k_star) {
                        row.k_star = o.k_star;
                        delays.push_back(static_cast<double>(o.tau - o.k_star));
                    }
                }
            }
            row.rate = row.replications > 0
                           ? static_cast<double>(row.rejections) /
                                 static_cast<double>(row.replications)
                           : 0.0;
            if (scenario.has_change && !delays.empty()) row.delays = delay_stats(delays);
            table.rows.push_back(std::move(row));
        }
    }
    return table;
}

ResultTable run_level_power_serial(ExperimentConfig config) {
    config.parallel = false;
    return run_level_power(config);
}

ResultTable run_delay_stats(const ExperimentConfig& config) {
    ExperimentConfig change_only = config;
    change_only.scenarios.clear();
    std::vector<std::size_t> index_map;
    for (std::size_t si = 0; si < config.scenarios.size(); ++si) {
        if (config.scenarios[si].has_change) {
            change_only.scenarios.push_back(config.scenarios[si]);
            index_map.push_back(si);
        }
    }
    if (change_only.scenarios.empty()) {
        throw std::invalid_argument("run_delay_stats requires at least one change scenario");
    }
    ResultTable table;
    for (std::size_t ci = 0; ci < change_only.scenarios.size(); ++ci) {
        const Scenario& scenario = change_only.scenarios[ci];
        const double c_alpha = scenario_c_alpha(config, scenario);
        for (std::size_t m : config.ms) {
            const auto outcomes =
                run_replications(config, scenario, index_map[ci], m, c_alpha);
            TableRow row;
            row.scenario = scenario.id;
            row.kind = "power";
            row.m = m;
            row.c_alpha = c_alpha;
            std::vector<double> delays;
            for (const RepOutcome& o : outcomes) {
                if (!o.ok) {
                    ++table.failed_replications;
                    continue;
                }
                ++row.replications;
                row.k_star = o.k_star;
                if (o.detected && o.tau > o.k_star) {
                    ++row.rejections;
                    delays.push_back(static_cast<double>(o.tau - o.k_star));
                }
            }
            row.rate = row.replications > 0
                           ? static_cast<double>(row.rejections) /
                                 static_cast<double>(row.replications)
                           : 0.0;
            if (!delays.empty()) row.delays = delay_stats(delays);
            table.rows.push_back(std::move(row));
        }
    }
    return table;
}

void emit_detector_series(const ModelSpec& spec, const CountSeries& y,
                          const MonitorConfig& config, const std::string& out_path) {
    const MonitorTrace trace = run_monitor(spec, y, config);
    std::ofstream out(out_path);
    if (!out) throw std::invalid_argument("cannot open output file: " + out_path);
    out << "k\traw_max\tnormalized_max\tthreshold\tmarker\n";
    char buf[128];
    for (const MonitorStep& step : trace.per_k) {
        std::string marker;
        if (y.known_change && step.k == *y.known_change) marker = "change";
        if (trace.detected() && step.k == trace.tau) {
            marker = marker.empty() ? "stop" : marker + "+stop";
        }
        std::snprintf(buf, sizeof(buf), "%zu\t%.17g\t%.17g\t%.17g\t", step.k,
                      step.raw_max, step.normalized_max, config.c_alpha);
        out << buf << marker << '\n';
    }
}

namespace {

std::string format_rate_table(const ResultTable& table) {
    std::ostringstream out;
    out << "scenario\tkind\tm\tc_alpha\treplications\trejections\trate\n";
    char buf[160];
    for (const TableRow& row : table.rows) {
        std::snprintf(buf, sizeof(buf), "%s\t%s\t%zu\t%.6f\t%d\t%d\t%.4f\n",
                      row.scenario.c_str(), row.kind.c_str(), row.m, row.c_alpha,
                      row.replications, row.rejections, row.rate);
        out << buf;
    }
    return out.str();
}

}  // namespace

std::string format_table1(const ResultTable& table) { return format_rate_table(table); }

std::string format_table2(const ResultTable& table) {
    std::ostringstream out;
    out << "scenario\tm\tk_star\tdetections\tmean\tsd\tmin\tq1\tmedian\tq3\tmax\n";
    char buf[240];
    for (const TableRow& row : table.rows) {
        if (row.delays) {
            const DelayStats& s = *row.delays;
            std::snprintf(buf, sizeof(buf),
                          "%s\t%zu\t%zu\t%zu\t%.2f\t%.2f\t%.0f\t%.2f\t%.2f\t%.2f\t%.0f\n",
                          row.scenario.c_str(), row.m, row.k_star, s.n, s.mean, s.sd,
                          s.min, s.q1, s.median, s.q3, s.max);
        } else {
            std::snprintf(buf, sizeof(buf), "%s\t%zu\t%zu\t0\tNA\tNA\tNA\tNA\tNA\tNA\tNA\n",
                          row.scenario.c_str(), row.m, row.k_star);
        }
        out << buf;
    }
    return out.str();
}

}  // namespace cpd
