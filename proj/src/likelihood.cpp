#include "cpd/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace cpd {

namespace {

constexpr double kFaceActivation = 1e-3;  // barrier switches on this close to the face
constexpr double kBarrierWeight = 1e-6;

struct Objective {
    const ModelSpec& spec;
    const CountSeries& y;
    const Window& window;
    const ThetaDomain& domain;

    // Negative log-likelihood plus (when near the contraction face) a
    // logarithmic barrier; gradient written to g. When `fisher` is given it
    // receives sum (y/lambda^2) grad grad' computed in the same pass: the
    // observed Gauss-Newton curvature, which matches the Hessian up to the
    // second-derivative-of-lambda term and drives the scoring steps.
    double eval(const ThetaVector& theta, Eigen::VectorXd& g,
                Eigen::MatrixXd* fisher = nullptr) const {
        const int d = spec.dim();
        const IntensityPath path = intensity_path(spec, theta, y, window, true);
        double value = 0.0;
        g.setZero(d);
        if (fisher) fisher->setZero(d, d);
        for (std::size_t row = 0; row < path.lambdas.size(); ++row) {
            const double lam = path.lambdas[row];
            const double yt = static_cast<double>(y.counts[window.start - 1 + row]);
            value -= yt * std::log(lam) - lam;
            const double w = -(yt / lam - 1.0);
            for (int j = 0; j < d; ++j) g[j] += w * path.grad(row, j);
            if (fisher) {
                const double wt = yt / (lam * lam);
                for (int r = 0; r < d; ++r) {
                    const double gr = wt * path.grad(row, r);
                    for (int c = r; c < d; ++c) {
                        (*fisher)(r, c) += gr * path.grad(row, c);
                    }
                }
            }
        }
        if (fisher) {
            for (int r = 0; r < d; ++r) {
                for (int c = 0; c < r; ++c) (*fisher)(r, c) = (*fisher)(c, r);
            }
        }
        const double gap = (1.0 - domain.contraction_margin) - contraction_norm(spec, theta);
        if (gap < kFaceActivation) {
            value += kBarrierWeight * std::log(kFaceActivation / gap);
            // d(contraction)/dtheta for the autoregressive block.
            if (spec.family == Family::Ingarch) {
                for (int j = 1; j < d; ++j) g[j] += kBarrierWeight / gap;
            } else {
                for (int k = 1; k <= spec.q; ++k) {
                    const bool plus = theta[static_cast<std::size_t>(k)] >=
                                      theta[static_cast<std::size_t>(k + spec.q)];
                    g[plus ? k : k + spec.q] += kBarrierWeight / gap;
                }
            }
        }
        return value;
    }
};

ThetaVector project(const ModelSpec& spec, const ThetaDomain& domain, ThetaVector x) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = std::clamp(x[i], domain.lower[i], domain.upper[i]);
    }
    const double limit = 1.0 - domain.contraction_margin;
    const double c = contraction_norm(spec, x);
    if (c > limit) {
        const double scale = (limit - 1e-9) / c;
        for (std::size_t i = 1; i < x.size(); ++i) x[i] *= scale;
    }
    return x;
}

double projected_grad_inf_norm(const ThetaVector& x, const Eigen::VectorXd& g,
                               const ThetaDomain& domain) {
    double norm = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double gi = g[static_cast<Eigen::Index>(i)];
        if (x[i] <= domain.lower[i] + 1e-12 && gi > 0.0) gi = 0.0;
        if (x[i] >= domain.upper[i] - 1e-12 && gi < 0.0) gi = 0.0;
        norm = std::max(norm, std::fabs(gi));
    }
    return norm;
}

ThetaVector moment_init(const ModelSpec& spec, const CountSeries& y, const Window& window,
                        const ThetaDomain& domain) {
    double mean = 0.0;
    for (std::size_t t = window.start; t <= window.end; ++t) {
        mean += static_cast<double>(y.counts[t - 1]);
    }
    mean /= static_cast<double>(window.length());
    const int d = spec.dim();
    ThetaVector init(static_cast<std::size_t>(d), 0.1 / static_cast<double>(d - 1));
    init[0] = std::max(0.9 * mean, domain.intensity_floor);
    return project(spec, domain, std::move(init));
}

}  // namespace

double loglik(const ModelSpec& spec, const ThetaVector& theta, const CountSeries& y,
              const Window& window) {
    const IntensityPath path = intensity_path(spec, theta, y, window, false);
    double value = 0.0;
    for (std::size_t row = 0; row < path.lambdas.size(); ++row) {
        const double lam = path.lambdas[row];
        const double yt = static_cast<double>(y.counts[window.start - 1 + row]);
        value += yt * std::log(lam) - lam;
    }
    return value;
}

std::vector<double> score(const ModelSpec& spec, const ThetaVector& theta,
                          const CountSeries& y, const Window& window) {
    const int d = spec.dim();
    const IntensityPath path = intensity_path(spec, theta, y, window, true);
    std::vector<double> g(static_cast<std::size_t>(d), 0.0);
    for (std::size_t row = 0; row < path.lambdas.size(); ++row) {
        const double lam = path.lambdas[row];
        const double yt = static_cast<double>(y.counts[window.start - 1 + row]);
        const double w = yt / lam - 1.0;
        for (int j = 0; j < d; ++j) g[static_cast<std::size_t>(j)] += w * path.grad(row, j);
    }
    return g;
}

FitResult fit_mle(const ModelSpec& spec, const CountSeries& y, const Window& window,
                  const ThetaDomain& domain, const std::optional<ThetaVector>& init,
                  const FitOptions& opts) {
    const int d = spec.dim();
    if (window.length() < static_cast<std::size_t>(d)) {
        throw std::invalid_argument("window shorter than parameter dimension");
    }
    if (domain.lower.size() != static_cast<std::size_t>(d) ||
        domain.upper.size() != static_cast<std::size_t>(d)) {
        throw std::invalid_argument("domain bounds do not match model dimension");
    }

    const Objective objective{spec, y, window, domain};
    ThetaVector x = init ? project(spec, domain, *init) : moment_init(spec, y, window, domain);

    const auto active_set = [&](const ThetaVector& xx, const Eigen::VectorXd& gg) {
        std::vector<bool> a(static_cast<std::size_t>(d), false);
        for (int j = 0; j < d; ++j) {
            const std::size_t i = static_cast<std::size_t>(j);
            if ((xx[i] <= domain.lower[i] + 1e-12 && gg[j] > 0.0) ||
                (xx[i] >= domain.upper[i] - 1e-12 && gg[j] < 0.0)) {
                a[i] = true;
            }
        }
        return a;
    };

    Eigen::VectorXd g(d);
    Eigen::MatrixXd fisher(d, d);
    double f = objective.eval(x, g, &fisher);

    FitResult result;
    result.theta_hat = x;
    int iter = 0;

    // Quasi-Newton descent on the box with projected steps; used from cold
    // starts or when the scoring refinement below cannot make progress.
    const auto bfgs_phase = [&] {
        Eigen::VectorXd gn(d);
        Eigen::MatrixXd H = Eigen::MatrixXd::Identity(d, d);
        bool h_is_identity = true;
        std::vector<bool> prev_active = active_set(x, g);
        double stall_best_pg = std::numeric_limits<double>::infinity();
        int stall_count = 0;
    for (; iter < opts.max_iterations; ++iter) {
        double pg = projected_grad_inf_norm(x, g, domain);
        if (pg <= opts.grad_tol) {
            result.converged = true;
            break;
        }
        // Bail out to the Newton polish when the projected gradient stops
        // shrinking (weakly active bounds make projected BFGS zig-zag).
        if (pg < 0.9 * stall_best_pg) {
            stall_best_pg = pg;
            stall_count = 0;
        } else if (++stall_count >= 12) {
            break;
        }
        // Quasi-Newton curvature only applies while the active set is stable.
        const std::vector<bool> act = active_set(x, g);
        if (act != prev_active) {
            H.setIdentity();
            h_is_identity = true;
            prev_active = act;
        }
        Eigen::VectorXd dir = -(H * g);
        for (int j = 0; j < d; ++j) {
            if (act[static_cast<std::size_t>(j)]) dir[j] = 0.0;
        }
        if (dir.dot(g) > -1e-14 * dir.norm() * g.norm()) {
            for (int j = 0; j < d; ++j) {
                dir[j] = act[static_cast<std::size_t>(j)] ? 0.0 : -g[j];
            }
            H.setIdentity();
            h_is_identity = true;
        }

        // Backtracking search along the projected path. Near the optimum the
        // objective decrease falls below double-precision resolution of f, so
        // a strict drop in the projected-gradient norm also counts as
        // progress.
        double alpha = 1.0;
        ThetaVector xn;
        double fn = f;
        bool accepted = false;
        ThetaVector best_x;
        Eigen::VectorXd best_g(d);
        double best_f = f;
        double best_pg = pg;
        for (int bt = 0; bt < 45; ++bt) {
            ThetaVector cand = x;
            for (int j = 0; j < d; ++j) cand[static_cast<std::size_t>(j)] += alpha * dir[j];
            cand = project(spec, domain, std::move(cand));
            double step_dot = 0.0;
            double step_norm = 0.0;
            for (int j = 0; j < d; ++j) {
                const double s = cand[static_cast<std::size_t>(j)] - x[static_cast<std::size_t>(j)];
                step_dot += g[j] * s;
                step_norm += s * s;
            }
            if (step_norm == 0.0) break;
            const double f_cand = objective.eval(cand, gn);
            if (f_cand <= f + 1e-4 * std::min(step_dot, 0.0)) {
                xn = std::move(cand);
                fn = f_cand;
                accepted = true;
                break;
            }
            const double pg_cand = projected_grad_inf_norm(cand, gn, domain);
            if (f_cand <= f * (1.0 + 1e-12) + 1e-12 && pg_cand < best_pg) {
                best_x = cand;
                best_g = gn;
                best_f = f_cand;
                best_pg = pg_cand;
            }
            alpha *= 0.5;
        }
        if (!accepted && best_pg < pg * (1.0 - 1e-3)) {
            xn = std::move(best_x);
            fn = best_f;
            gn = best_g;
            accepted = true;
        }
        if (!accepted) {
            if (!h_is_identity) {
                H.setIdentity();
                h_is_identity = true;
                continue;
            }
            break;  // no progress possible; reported via converged flag
        }

        Eigen::VectorXd s(d), yv(d);
        for (int j = 0; j < d; ++j) s[j] = xn[static_cast<std::size_t>(j)] - x[static_cast<std::size_t>(j)];
        yv = gn - g;
        const double sy = s.dot(yv);
        if (sy > 1e-12 * s.norm() * yv.norm()) {
            const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
            const double rho = 1.0 / sy;
            H = (I - rho * s * yv.transpose()) * H * (I - rho * yv * s.transpose()) +
                rho * s * s.transpose();
            h_is_identity = false;
        } else {
            H.setIdentity();
            h_is_identity = true;
        }
        x = std::move(xn);
        f = fn;
        g = gn;
    }
        objective.eval(x, g, &fisher);  // refresh the expected Hessian at x
    };

    // Scoring refinement of the free-subspace score equations: steps solve
    // (Fisher + mu I) dx = -g on the free coordinates, with a central-FD
    // Hessian of the analytic gradient as a fallback when the expected
    // Hessian stalls. Acceptance is by projected-gradient decrease alone, so
    // it is immune to the double-precision resolution of the objective value.
    const auto newton_phase = [&] {
        Eigen::VectorXd gn(d), gtmp(d);
        Eigen::MatrixXd fisher_cand(d, d);
        for (int step = 0; step < 60 && iter < opts.max_iterations; ++step, ++iter) {
            const double pg = projected_grad_inf_norm(x, g, domain);
            if (pg <= opts.grad_tol) {
                result.converged = true;
                return;
            }
            const std::vector<bool> act = active_set(x, g);
            std::vector<int> free_idx;
            for (int j = 0; j < d; ++j) {
                if (!act[static_cast<std::size_t>(j)]) free_idx.push_back(j);
            }
            if (free_idx.empty()) return;
            const int nf = static_cast<int>(free_idx.size());

            Eigen::VectorXd g_free(nf);
            for (int r = 0; r < nf; ++r) g_free[r] = g[free_idx[static_cast<std::size_t>(r)]];
            Eigen::MatrixXd h_free(nf, nf);
            for (int r = 0; r < nf; ++r) {
                for (int c = 0; c < nf; ++c) {
                    h_free(r, c) = fisher(free_idx[static_cast<std::size_t>(r)],
                                          free_idx[static_cast<std::size_t>(c)]);
                }
            }

            const auto try_steps = [&](const Eigen::MatrixXd& hess) {
                double mu = 0.0;
                for (int attempt = 0; attempt < 6; ++attempt) {
                    const Eigen::VectorXd dx =
                        (hess + mu * Eigen::MatrixXd::Identity(nf, nf))
                            .ldlt()
                            .solve(-g_free);
                    ThetaVector cand = x;
                    for (int r = 0; r < nf; ++r) {
                        cand[static_cast<std::size_t>(
                            free_idx[static_cast<std::size_t>(r)])] += dx[r];
                    }
                    cand = project(spec, domain, std::move(cand));
                    const double f_cand = objective.eval(cand, gn, &fisher_cand);
                    // Either a projected-gradient drop (works at the optimum,
                    // where f-differences fall below double resolution) or a
                    // clear objective drop (works far away, where scoring
                    // directions need not shrink the gradient monotonically).
                    if (projected_grad_inf_norm(cand, gn, domain) < pg ||
                        f_cand < f - 1e-9 * std::fabs(f) - 1e-12) {
                        x = std::move(cand);
                        f = f_cand;
                        g = gn;
                        fisher = fisher_cand;
                        return true;
                    }
                    mu = mu == 0.0 ? std::max(1e-8, hess.cwiseAbs().maxCoeff() * 1e-4)
                                   : mu * 10.0;
                }
                return false;
            };

            if (try_steps(h_free)) continue;

            // Expected-Hessian step failed; fall back to the observed Hessian
            // via central finite differences of the analytic gradient.
            Eigen::MatrixXd hess(nf, nf);
            const double h = 1e-6;
            for (int c = 0; c < nf; ++c) {
                const std::size_t j =
                    static_cast<std::size_t>(free_idx[static_cast<std::size_t>(c)]);
                // Shrink each side of the stencil to stay inside the box; a
                // free coordinate can still sit within h of a bound.
                const double hp = std::min(h, domain.upper[j] - x[j]);
                const double hm = std::min(h, x[j] - domain.lower[j]);
                ThetaVector up = x, dn = x;
                up[j] += hp;
                dn[j] -= hm;
                objective.eval(up, gn);
                objective.eval(dn, gtmp);
                for (int r = 0; r < nf; ++r) {
                    hess(r, c) = (gn[free_idx[static_cast<std::size_t>(r)]] -
                                  gtmp[free_idx[static_cast<std::size_t>(r)]]) /
                                 (hp + hm);
                }
            }
            hess = ((hess + hess.transpose()) / 2.0).eval();
            if (!try_steps(hess)) return;
        }
        result.converged =
            result.converged || projected_grad_inf_norm(x, g, domain) <= opts.grad_tol;
    };

    // Any caller-supplied start goes straight to the damped scoring phase;
    // sliding-window refits converge there almost always, and the descent
    // phase remains as the fallback.
    const bool warm_start = init.has_value();
    if (warm_start) newton_phase();
    if (!result.converged &&
        projected_grad_inf_norm(x, g, domain) > opts.grad_tol) {
        bfgs_phase();
        if (!result.converged) newton_phase();
    }

    result.theta_hat = x;
    result.iterations = iter;
    result.grad_norm = projected_grad_inf_norm(x, g, domain);
    result.converged = result.converged || result.grad_norm <= opts.grad_tol;
    result.loglik = loglik(spec, x, y, window);
    return result;
}

SigmaEstimate sigma_hat(const ModelSpec& spec, const ThetaVector& theta_hat,
                        const CountSeries& y, const Window& window) {
    const int d = spec.dim();
    const IntensityPath path = intensity_path(spec, theta_hat, y, window, true);
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd g(d);
    for (std::size_t row = 0; row < path.lambdas.size(); ++row) {
        for (int j = 0; j < d; ++j) g[j] = path.grad(row, j);
        sigma += (g * g.transpose()) / path.lambdas[row];
    }
    sigma /= static_cast<double>(path.lambdas.size());
    sigma = ((sigma + sigma.transpose()) / 2.0).eval();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
    SigmaEstimate out;
    out.min_eigenvalue = es.eigenvalues().minCoeff();
    out.ridge_added = out.min_eigenvalue < 1e-8 ? 1e-8 - out.min_eigenvalue : 0.0;
    const Eigen::VectorXd ev = es.eigenvalues().array() + out.ridge_added;
    const Eigen::MatrixXd& v = es.eigenvectors();
    out.sigma = sigma + out.ridge_added * Eigen::MatrixXd::Identity(d, d);
    out.inv_sqrt = v * ev.array().rsqrt().matrix().asDiagonal() * v.transpose();
    out.sqrt = v * ev.array().sqrt().matrix().asDiagonal() * v.transpose();
    return out;
}

}  // namespace cpd
