#include "cpd/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cpd {

namespace {

void require_dim(const ModelSpec& spec, const ThetaVector& theta) {
    if (static_cast<int>(theta.size()) != spec.dim()) {
        throw std::invalid_argument("theta dimension " + std::to_string(theta.size()) +
                                    " does not match model dimension " +
                                    std::to_string(spec.dim()));
    }
}

}  // namespace

ModelSpec ModelSpec::ingarch(int p, int q) {
    if (p < 0 || q < 1) throw std::invalid_argument("INGARCH requires p >= 0, q >= 1");
    return ModelSpec{Family::Ingarch, p, q, 0};
}

ModelSpec ModelSpec::intarch(int q, long threshold) {
    if (q < 1) throw std::invalid_argument("INTARCH requires q >= 1");
    if (threshold < 0) throw std::invalid_argument("INTARCH threshold must be >= 0");
    return ModelSpec{Family::Intarch, 0, q, threshold};
}

ThetaDomain ThetaDomain::defaults(const ModelSpec& spec) {
    ThetaDomain d;
    const int dim = spec.dim();
    d.lower.assign(static_cast<std::size_t>(dim), 0.0);
    d.upper.assign(static_cast<std::size_t>(dim), 1.0);
    d.lower[0] = d.intensity_floor;
    d.upper[0] = 100.0;
    return d;
}

double contraction_norm(const ModelSpec& spec, const ThetaVector& theta) {
    require_dim(spec, theta);
    double s = 0.0;
    if (spec.family == Family::Ingarch) {
        for (int k = 1; k < spec.dim(); ++k) s += theta[static_cast<std::size_t>(k)];
    } else {
        for (int k = 1; k <= spec.q; ++k) {
            s += std::max(theta[static_cast<std::size_t>(k)],
                          theta[static_cast<std::size_t>(k + spec.q)]);
        }
    }
    return s;
}

DomainReport check_domain(const ModelSpec& spec, const ThetaVector& theta,
                          const ThetaDomain& domain) {
    require_dim(spec, theta);
    if (domain.lower.size() != theta.size() || domain.upper.size() != theta.size()) {
        throw std::invalid_argument("domain bounds do not match model dimension");
    }
    DomainReport report;
    auto violate = [&report](const std::string& what) {
        report.ok = false;
        report.violations.push_back(what);
    };
    for (std::size_t i = 0; i < theta.size(); ++i) {
        if (!std::isfinite(theta[i])) violate("theta[" + std::to_string(i) + "] not finite");
    }
    if (!report.ok) return report;
    if (theta[0] <= 0.0) violate("intercept must be strictly positive");
    if (theta[0] < domain.intensity_floor) violate("intercept below intensity floor");
    for (std::size_t i = 1; i < theta.size(); ++i) {
        if (theta[i] < 0.0) violate("coefficient " + std::to_string(i) + " negative");
    }
    for (std::size_t i = 0; i < theta.size(); ++i) {
        if (theta[i] < domain.lower[i] || theta[i] > domain.upper[i]) {
            violate("theta[" + std::to_string(i) + "] outside box");
        }
    }
    const double c = contraction_norm(spec, theta);
    if (c > 1.0 - domain.contraction_margin) {
        violate("contraction norm " + std::to_string(c) + " exceeds " +
                std::to_string(1.0 - domain.contraction_margin));
    }
    return report;
}

std::vector<double> psi_coefficients(const ModelSpec& spec, const ThetaVector& theta,
                                     int truncation) {
    require_dim(spec, theta);
    if (spec.family != Family::Ingarch) {
        throw std::invalid_argument("psi_coefficients supports INGARCH only");
    }
    if (truncation < 1) throw std::invalid_argument("truncation must be >= 1");
    if (contraction_norm(spec, theta) >= 1.0) {
        throw std::domain_error("psi series requires contraction norm < 1");
    }
    double a_sum = 0.0;
    for (int i = 1; i <= spec.p; ++i) a_sum += theta[static_cast<std::size_t>(i)];
    std::vector<double> psi(static_cast<std::size_t>(truncation) + 1, 0.0);
    psi[0] = theta[0] / (1.0 - a_sum);
    for (int k = 1; k <= truncation; ++k) {
        double v = k <= spec.q ? theta[static_cast<std::size_t>(spec.p + k)] : 0.0;
        for (int i = 1; i <= std::min(spec.p, k - 1); ++i) {
            v += theta[static_cast<std::size_t>(i)] * psi[static_cast<std::size_t>(k - i)];
        }
        psi[static_cast<std::size_t>(k)] = v;
    }
    return psi;
}

IntensityPath intensity_path(const ModelSpec& spec, const ThetaVector& theta,
                             const CountSeries& y, const Window& window,
                             bool with_grad) {
    require_dim(spec, theta);
    if (window.start < 1 || window.start > window.end || window.end > y.size()) {
        throw std::invalid_argument("window out of series bounds");
    }
    const int d = spec.dim();
    if (theta[0] <= 0.0) throw std::domain_error("intercept must be strictly positive");
    for (std::size_t i = 1; i < theta.size(); ++i) {
        if (theta[i] < 0.0) throw std::domain_error("autoregressive coefficients must be >= 0");
    }
    if (contraction_norm(spec, theta) >= 1.0) {
        throw std::domain_error("theta is not contractive");
    }

    const std::size_t out_len = window.length();
    IntensityPath path;
    path.dim = d;
    path.lambdas.resize(out_len);
    if (with_grad) path.grads.assign(out_len * static_cast<std::size_t>(d), 0.0);

    auto count_at = [&y](std::size_t t) -> double {  // 1-based, 0 before the sample
        return t >= 1 && t <= y.size() ? static_cast<double>(y.counts[t - 1]) : 0.0;
    };

    if (spec.family == Family::Intarch) {
        // Direct evaluation; no latent recursion.
        const double ell = static_cast<double>(spec.threshold);
        for (std::size_t t = window.start; t <= window.end; ++t) {
            const std::size_t row = t - window.start;
            double lam = theta[0];
            if (with_grad) path.grads[row * static_cast<std::size_t>(d)] = 1.0;
            for (int k = 1; k <= spec.q; ++k) {
                const double yk = t >= static_cast<std::size_t>(k) + 1
                                      ? count_at(t - static_cast<std::size_t>(k))
                                      : 0.0;
                const double up = std::max(yk - ell, 0.0);
                const double lo = std::min(yk, ell);
                lam += theta[static_cast<std::size_t>(k)] * up +
                       theta[static_cast<std::size_t>(k + spec.q)] * lo;
                if (with_grad) {
                    path.grads[row * static_cast<std::size_t>(d) +
                               static_cast<std::size_t>(k)] = up;
                    path.grads[row * static_cast<std::size_t>(d) +
                               static_cast<std::size_t>(k + spec.q)] = lo;
                }
            }
            path.lambdas[row] = lam;
        }
        return path;
    }

    // INGARCH: run the latent recursion from t=1 so every window sees the
    // same truncated-past intensities.
    double a_sum = 0.0;
    for (int i = 1; i <= spec.p; ++i) a_sum += theta[static_cast<std::size_t>(i)];
    const double fix = theta[0] / (1.0 - a_sum);

    // Pre-sample gradient of the fixpoint: d/da0 = 1/(1-A), d/dai = a0/(1-A)^2.
    std::vector<double> fix_grad(static_cast<std::size_t>(d), 0.0);
    fix_grad[0] = 1.0 / (1.0 - a_sum);
    for (int i = 1; i <= spec.p; ++i) {
        fix_grad[static_cast<std::size_t>(i)] = theta[0] / ((1.0 - a_sum) * (1.0 - a_sum));
    }

    // Ring buffers of the last max(p, 1) intensities and gradients.
    const int hist = std::max(spec.p, 1);
    std::vector<double> lam_hist(static_cast<std::size_t>(hist), fix);
    std::vector<double> grad_hist;
    if (with_grad) {
        grad_hist.resize(static_cast<std::size_t>(hist) * static_cast<std::size_t>(d));
        for (int h = 0; h < hist; ++h) {
            std::copy(fix_grad.begin(), fix_grad.end(),
                      grad_hist.begin() + h * d);
        }
    }
    std::vector<double> g(static_cast<std::size_t>(d), 0.0);

    for (std::size_t t = 1; t <= window.end; ++t) {
        double lam = theta[0];
        for (int i = 1; i <= spec.p; ++i) {
            const double lam_prev =
                t > static_cast<std::size_t>(i)
                    ? lam_hist[(t - static_cast<std::size_t>(i) - 1) % hist]
                    : fix;
            lam += theta[static_cast<std::size_t>(i)] * lam_prev;
        }
        for (int j = 1; j <= spec.q; ++j) {
            lam += theta[static_cast<std::size_t>(spec.p + j)] *
                   (t > static_cast<std::size_t>(j) ? count_at(t - static_cast<std::size_t>(j))
                                                    : 0.0);
        }
        if (with_grad) {
            std::fill(g.begin(), g.end(), 0.0);
            g[0] = 1.0;
            for (int i = 1; i <= spec.p; ++i) {
                const bool in_sample = t > static_cast<std::size_t>(i);
                const double lam_prev =
                    in_sample ? lam_hist[(t - static_cast<std::size_t>(i) - 1) % hist] : fix;
                const double* gp =
                    in_sample
                        ? &grad_hist[((t - static_cast<std::size_t>(i) - 1) % hist) *
                                     static_cast<std::size_t>(d)]
                        : fix_grad.data();
                g[static_cast<std::size_t>(i)] += lam_prev;
                for (int j = 0; j < d; ++j) {
                    g[static_cast<std::size_t>(j)] +=
                        theta[static_cast<std::size_t>(i)] * gp[j];
                }
            }
            for (int j = 1; j <= spec.q; ++j) {
                g[static_cast<std::size_t>(spec.p + j)] +=
                    t > static_cast<std::size_t>(j) ? count_at(t - static_cast<std::size_t>(j))
                                                    : 0.0;
            }
        }
        if (t >= window.start) {
            const std::size_t row = t - window.start;
            path.lambdas[row] = lam;
            if (with_grad) {
                std::copy(g.begin(), g.end(),
                          path.grads.begin() + row * static_cast<std::size_t>(d));
            }
        }
        lam_hist[(t - 1) % hist] = lam;
        if (with_grad) {
            std::copy(g.begin(), g.end(), grad_hist.begin() + ((t - 1) % hist) * d);
        }
    }
    return path;
}

}  // namespace cpd
