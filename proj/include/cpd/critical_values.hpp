#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace cpd {

struct QuantileRequest {
    int d = 1;
    double horizon = 1.5;  // T > 1
    double alpha = 0.05;
    int grid_points = 0;       // 0 -> round(2000 * T)
    int replications = 20000;
    std::uint64_t seed = 20240101;

    int effective_grid() const;
};

struct QuantileResult {
    double c_alpha = 0.0;
    double mc_stderr = 0.0;
    bool stderr_reliable = true;
    bool cache_warning = false;  // cache I/O failed, value was recomputed
    QuantileRequest request;
};

/// One realization of sup_{1<t<=T} sup_{1<s<t} ||W_d(s) - s W_d(1)|| / (t b0(s))
/// on a uniform grid. Increments are keyed by (seed, path, coordinate), so a
/// path for smaller d or T is an exact restriction of the larger one.
double draw_U(int d, double horizon, int grid_points, std::uint64_t seed,
              std::uint64_t path_index,
              const std::function<double(double)>& b0 = {});

/// All replications of draw_U, sequentially. Reference path for the
/// OpenMP batch; results are identical by construction.
std::vector<double> draw_U_batch_serial(const QuantileRequest& req,
                                        const std::function<double(double)>& b0 = {});

/// Same draws, fanned over threads; output ordered by path index.
std::vector<double> draw_U_batch(const QuantileRequest& req,
                                 const std::function<double(double)>& b0 = {});

/// Empirical (1-alpha) quantile over the replications with a binomial
/// bracket standard error. Results are cached (append-only JSONL keyed by
/// the full request) when cache_path is nonempty.
QuantileResult quantile_c_alpha(const QuantileRequest& req,
                                const std::string& cache_path = "");

}  // namespace cpd
