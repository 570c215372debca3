#include "cpd/monitor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cpd {

std::size_t MonitorConfig::effective_v_m() const {
    if (v_m > 0) return v_m;
    return static_cast<std::size_t>(
        std::ceil(std::pow(static_cast<double>(m), 0.25)));
}

std::size_t MonitorConfig::stride_at(std::size_t k) const {
    if (ell_stride > 0) return ell_stride;
    if (m <= 300) return 1;
    return (k - m + 49) / 50;  // scan at most ~50 window starts per step
}

std::vector<std::size_t> window_pi(std::size_t m, std::size_t k, std::size_t v_m) {
    if (k <= m) throw std::invalid_argument("window_pi requires k > m");
    if (v_m >= m) throw std::invalid_argument("window_pi requires v_m < m");
    std::vector<std::size_t> out;
    out.reserve(k - m + 1);
    for (std::size_t ell = m - v_m; ell <= k - v_m; ++ell) out.push_back(ell);
    return out;
}

double detector(std::size_t k, std::size_t ell, const ThetaVector& theta_window,
                const ThetaVector& theta_hist, const Eigen::MatrixXd& whitening,
                std::size_t m) {
    if (ell >= k) throw std::invalid_argument("detector requires ell < k");
    if (theta_window.size() != theta_hist.size() ||
        whitening.rows() != static_cast<Eigen::Index>(theta_window.size())) {
        throw std::invalid_argument("detector dimension mismatch");
    }
    Eigen::VectorXd diff(static_cast<Eigen::Index>(theta_window.size()));
    for (std::size_t i = 0; i < theta_window.size(); ++i) {
        diff[static_cast<Eigen::Index>(i)] = theta_window[i] - theta_hist[i];
    }
    const double frac = static_cast<double>(k - ell) / static_cast<double>(k);
    return std::sqrt(static_cast<double>(m)) * frac * (whitening * diff).norm();
}

MonitorEngine::MonitorEngine(const ModelSpec& spec, std::vector<long> historical,
                             const MonitorConfig& config)
    : spec_(spec),
      config_(config),
      domain_(config.domain ? *config.domain : ThetaDomain::defaults(spec)) {
    if (config_.m < 1 || historical.size() < config_.m) {
        throw std::invalid_argument("historical segment shorter than m");
    }
    if (config_.effective_v_m() >= config_.m) {
        throw std::invalid_argument("v_m must be smaller than m");
    }
    if (std::isfinite(config_.horizon) && config_.horizon <= 1.0) {
        throw std::invalid_argument("closed-end horizon must exceed 1");
    }
    data_.counts = std::move(historical);
    data_.counts.resize(config_.m);

    k_max_ = std::isfinite(config_.horizon)
                 ? static_cast<std::size_t>(std::floor(
                       config_.horizon * static_cast<double>(config_.m))) + 1
                 : std::numeric_limits<std::size_t>::max();

    trace_.hist_fit = fit_mle(spec_, data_, Window{1, config_.m}, domain_, std::nullopt,
                              config_.fit);
    trace_.hist_sigma = sigma_hat(spec_, trace_.hist_fit.theta_hat, data_,
                                  Window{1, config_.m});
}

std::optional<MonitorStep> MonitorEngine::push(long count) {
    data_.counts.push_back(count);
    const std::size_t k = data_.counts.size();
    if (k <= config_.m || k > k_max_ || stopped()) return std::nullopt;

    const std::size_t v_m = config_.effective_v_m();
    const std::size_t stride = config_.stride_at(k);
    std::vector<std::size_t> ells;
    for (std::size_t ell = config_.m - v_m; ell <= k - v_m; ell += stride) {
        ells.push_back(ell);
    }
    if (ells.back() != k - v_m) ells.push_back(k - v_m);

    struct ScanCell {
        double value = -1.0;
        double normalized = -1.0;
        ThetaVector theta;
        bool flagged = false;
    };
    std::vector<ScanCell> cells(ells.size());

    // A strided scan rarely revisits the same ell at consecutive k, so warm
    // starts fall back to the cached fit with the nearest window start; those
    // windows overlap almost entirely and their estimates are close.
    const auto nearest_warm = [this](std::size_t ell) -> const ThetaVector* {
        if (warm_.empty()) return nullptr;
        auto hi = warm_.lower_bound(ell);
        if (hi == warm_.end()) return &std::prev(hi)->second;
        if (hi->first == ell || hi == warm_.begin()) return &hi->second;
        const auto lo = std::prev(hi);
        return ell - lo->first <= hi->first - ell ? &lo->second : &hi->second;
    };

    const auto scan_one = [&](std::size_t idx) {
        const std::size_t ell = ells[idx];
        auto warm_it = warm_.find(ell);
        const ThetaVector* near = nearest_warm(ell);
        const std::optional<ThetaVector> init =
            near ? std::optional<ThetaVector>(*near)
                 : std::optional<ThetaVector>(trace_.hist_fit.theta_hat);
        const FitResult fit =
            fit_mle(spec_, data_, Window{ell, k}, domain_, init, config_.fit);
        ScanCell& cell = cells[idx];
        cell.flagged = !fit.converged;
        // A flagged fit falls back on the last converged estimate for this
        // ell (or the historical one); monitoring must not silently stop.
        cell.theta = fit.converged ? fit.theta_hat
                     : warm_it != warm_.end() ? warm_it->second
                                              : trace_.hist_fit.theta_hat;
        // The whitening matrix is the square root of the information matrix:
        // sqrt(n)(theta_hat - theta*) has asymptotic covariance Sigma^{-1}, so
        // Sigma^{1/2} standardizes the estimate differences.
        cell.value = detector(k, ell, cell.theta, trace_.hist_fit.theta_hat,
                              trace_.hist_sigma.sqrt, config_.m);
        cell.normalized =
            cell.value / config_.boundary.eval(static_cast<double>(k - ell) /
                                               static_cast<double>(config_.m));
    };

    // Exceptions must not escape an OpenMP region; capture and rethrow.
    std::exception_ptr scan_error;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (config_.parallel_scan)
#endif
    for (std::size_t idx = 0; idx < ells.size(); ++idx) {
        try {
            scan_one(idx);
        } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
            scan_error = std::current_exception();
        }
    }
    if (scan_error) std::rethrow_exception(scan_error);

    MonitorStep step;
    step.k = k;
    for (std::size_t idx = 0; idx < ells.size(); ++idx) {
        const ScanCell& cell = cells[idx];
        if (!cell.flagged) warm_[ells[idx]] = cell.theta;
        if (cell.flagged) ++step.flagged_fits;
        if (cell.normalized > step.normalized_max || idx == 0) {
            step.normalized_max = cell.normalized;
            step.argmax_ell = ells[idx];
        }
        step.raw_max = std::max(step.raw_max, cell.value);
    }
    trace_.flagged_fits += step.flagged_fits;
    trace_.per_k.push_back(step);
    if (step.normalized_max > config_.c_alpha) trace_.tau = k;
    return step;
}

MonitorTrace MonitorEngine::take_trace(std::optional<std::size_t> known_change) {
    if (known_change && trace_.detected() && trace_.tau > *known_change) {
        trace_.delay = trace_.tau - *known_change;
    }
    return std::move(trace_);
}

MonitorTrace run_monitor(const ModelSpec& spec, const CountSeries& y,
                         const MonitorConfig& config) {
    if (y.size() < config.m + 1) {
        throw std::invalid_argument("series must extend past the historical segment");
    }
    std::vector<long> hist(y.counts.begin(),
                           y.counts.begin() + static_cast<std::ptrdiff_t>(config.m));
    MonitorEngine engine(spec, std::move(hist), config);
    for (std::size_t t = config.m + 1; t <= y.size(); ++t) {
        if (engine.stopped() || t > engine.monitoring_end()) break;
        engine.push(y.counts[t - 1]);
    }
    return engine.take_trace(y.known_change);
}

}  // namespace cpd
