#include "cpd/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "cpd/rng.hpp"

namespace cpd {

namespace {

void require_feasible(const ModelSpec& spec, const ThetaVector& theta) {
    if (static_cast<int>(theta.size()) != spec.dim()) {
        throw std::invalid_argument("theta dimension does not match model");
    }
    if (theta[0] <= 0.0) throw std::domain_error("intercept must be strictly positive");
    for (std::size_t i = 1; i < theta.size(); ++i) {
        if (theta[i] < 0.0) throw std::domain_error("coefficients must be >= 0");
    }
    if (contraction_norm(spec, theta) >= 1.0) {
        throw std::domain_error("theta is not contractive");
    }
}

// One-step-ahead intensity recursion over a growing realized-count history
// (1-based global indices, zero counts before index 1).
class Recursion {
public:
    Recursion(const ModelSpec& spec, const ThetaVector& theta,
              const std::vector<long>& counts)
        : spec_(spec), theta_(theta), counts_(counts) {
        if (spec.family == Family::Ingarch) {
            double a_sum = 0.0;
            for (int i = 1; i <= spec.p; ++i) a_sum += theta[static_cast<std::size_t>(i)];
            fix_ = theta[0] / (1.0 - a_sum);
            lam_hist_.assign(static_cast<std::size_t>(std::max(spec.p, 1)), fix_);
        }
    }

    // Intensity of global step t; must be called with t = 1, 2, ... in order.
    double next(std::size_t t) {
        const double lam = eval(t);
        if (spec_.family == Family::Ingarch) {
            lam_hist_[(t - 1) % lam_hist_.size()] = lam;
        }
        return lam;
    }

private:
    double count_at(std::size_t t) const {
        return t >= 1 && t <= counts_.size() ? static_cast<double>(counts_[t - 1]) : 0.0;
    }

    double eval(std::size_t t) const {
        double lam = theta_[0];
        if (spec_.family == Family::Ingarch) {
            for (int i = 1; i <= spec_.p; ++i) {
                const double prev =
                    t > static_cast<std::size_t>(i)
                        ? lam_hist_[(t - static_cast<std::size_t>(i) - 1) % lam_hist_.size()]
                        : fix_;
                lam += theta_[static_cast<std::size_t>(i)] * prev;
            }
            for (int j = 1; j <= spec_.q; ++j) {
                lam += theta_[static_cast<std::size_t>(spec_.p + j)] *
                       (t > static_cast<std::size_t>(j)
                            ? count_at(t - static_cast<std::size_t>(j))
                            : 0.0);
            }
        } else {
            const double ell = static_cast<double>(spec_.threshold);
            for (int k = 1; k <= spec_.q; ++k) {
                const double yk = t > static_cast<std::size_t>(k)
                                      ? count_at(t - static_cast<std::size_t>(k))
                                      : 0.0;
                lam += theta_[static_cast<std::size_t>(k)] * std::max(yk - ell, 0.0) +
                       theta_[static_cast<std::size_t>(k + spec_.q)] * std::min(yk, ell);
            }
        }
        return lam;
    }

    const ModelSpec& spec_;
    const ThetaVector& theta_;
    const std::vector<long>& counts_;
    double fix_ = 0.0;
    std::vector<double> lam_hist_;
};

}  // namespace

CountSeries simulate_stationary(const ModelSpec& spec, const ThetaVector& theta,
                                std::size_t n, std::size_t burnin, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("simulation length must be >= 1");
    require_feasible(spec, theta);

    std::vector<long> all;
    all.reserve(burnin + n);
    Recursion rec(spec, theta, all);
    for (std::size_t t = 1; t <= burnin + n; ++t) {
        const double lam = rec.next(t);
        RngStream rng(seed, t);
        all.push_back(rng.poisson(lam));
    }
    CountSeries out;
    out.counts.assign(all.begin() + static_cast<std::ptrdiff_t>(burnin), all.end());
    return out;
}

CountSeries simulate_with_change(const ChangeSpec& change, const ModelSpec& spec,
                                 std::size_t burnin, std::uint64_t seed) {
    if (change.total_len < 1) throw std::invalid_argument("total_len must be >= 1");
    if (change.k_star < 1 || change.k_star > change.total_len) {
        throw std::invalid_argument("k_star must lie in [1, total_len]");
    }
    require_feasible(spec, change.theta0);
    require_feasible(spec, change.theta1);

    std::vector<long> all;
    all.reserve(burnin + change.total_len);
    // Both recursions track the full realized past; the post-change intensity
    // is f_{theta1} applied to everything generated so far.
    Recursion rec0(spec, change.theta0, all);
    Recursion rec1(spec, change.theta1, all);
    for (std::size_t t = 1; t <= burnin + change.total_len; ++t) {
        const double lam0 = rec0.next(t);
        const double lam1 = rec1.next(t);
        const bool post_change = t > burnin + change.k_star;
        const double lam = post_change ? lam1 : lam0;
        RngStream rng(seed, t);
        all.push_back(rng.poisson(lam));
    }
    CountSeries out;
    out.counts.assign(all.begin() + static_cast<std::ptrdiff_t>(burnin), all.end());
    out.known_change = change.k_star;
    return out;
}

}  // namespace cpd
