#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <vector>

#include "cpd/likelihood.hpp"
#include "cpd/model.hpp"

namespace cpd {

/// b(s) = c * b0(s); the null b0 means the constant boundary b0 == 1.
struct BoundarySpec {
    std::function<double(double)> b0;

    double eval(double s) const { return b0 ? b0(s) : 1.0; }
};

struct MonitorConfig {
    std::size_t m = 0;                  // historical length
    double horizon = 1.5;               // T; infinity for open-end
    std::size_t v_m = 0;                // 0 -> ceil(m^{1/4})
    BoundarySpec boundary;
    double alpha = 0.05;
    double c_alpha = 0.0;               // critical value (threshold)
    std::size_t ell_stride = 0;         // 0 -> adaptive default
    FitOptions fit;
    std::optional<ThetaDomain> domain;  // defaults from the model spec
    bool parallel_scan = false;         // fan the per-k ell scan over threads

    std::size_t effective_v_m() const;
    std::size_t stride_at(std::size_t k) const;
};

struct MonitorStep {
    std::size_t k = 0;
    double raw_max = 0.0;         // max_ell C_{k,ell}
    double normalized_max = 0.0;  // max_ell C_{k,ell} / b0((k-ell)/m)
    std::size_t argmax_ell = 0;
    std::size_t flagged_fits = 0;
};

struct MonitorTrace {
    static constexpr std::size_t kNoDetection = std::numeric_limits<std::size_t>::max();

    std::vector<MonitorStep> per_k;
    std::size_t tau = kNoDetection;
    std::optional<std::size_t> delay;
    std::size_t flagged_fits = 0;
    FitResult hist_fit;
    SigmaEstimate hist_sigma;

    bool detected() const { return tau != kNoDetection; }
};

/// Window-start candidates Pi_{m,k} = {m-v_m, ..., k-v_m}.
std::vector<std::size_t> window_pi(std::size_t m, std::size_t k, std::size_t v_m);

/// C_{k,ell} = sqrt(m) * ((k-ell)/k) * || whitening * (theta_window - theta_hist) ||.
/// The whitening matrix is the square root of the information matrix (the
/// inverse square root of the asymptotic covariance of the estimates).
double detector(std::size_t k, std::size_t ell, const ThetaVector& theta_window,
                const ThetaVector& theta_hist, const Eigen::MatrixXd& whitening,
                std::size_t m);

/// Incremental monitoring engine; push counts one at a time. A batch run
/// over the same data produces an identical trace.
class MonitorEngine {
public:
    MonitorEngine(const ModelSpec& spec, std::vector<long> historical,
                  const MonitorConfig& config);

    /// Feed the next observation (k = m+1, m+2, ...). Returns the step result
    /// once monitoring is active and not yet stopped or past the horizon.
    std::optional<MonitorStep> push(long count);

    bool stopped() const { return trace_.detected(); }
    std::size_t monitoring_end() const { return k_max_; }
    const MonitorTrace& trace() const { return trace_; }
    MonitorTrace take_trace(std::optional<std::size_t> known_change);

private:
    ModelSpec spec_;
    MonitorConfig config_;
    ThetaDomain domain_;
    CountSeries data_;
    MonitorTrace trace_;
    std::size_t k_max_;  // last monitored index, [T m]+1 in closed-end mode
    std::map<std::size_t, ThetaVector> warm_;  // ell -> last converged fit
};

/// Batch monitoring: historical fit and Sigma-hat once, then the sequential
/// scan over k = m+1 ... min(series end, [T m]+1), stopping at the first
/// strict boundary crossing.
MonitorTrace run_monitor(const ModelSpec& spec, const CountSeries& y,
                         const MonitorConfig& config);

}  // namespace cpd
