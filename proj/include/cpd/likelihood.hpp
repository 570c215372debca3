#pragma once

#include <Eigen/Dense>
#include <optional>

#include "cpd/model.hpp"

namespace cpd {

struct FitOptions {
    double grad_tol = 1e-5;  // infinity norm of the projected gradient
    int max_iterations = 200;
};

struct FitResult {
    ThetaVector theta_hat;
    double loglik = 0.0;
    bool converged = false;
    int iterations = 0;
    double grad_norm = 0.0;
};

/// Information-matrix estimate on a window, with symmetric square roots.
struct SigmaEstimate {
    Eigen::MatrixXd sigma;
    Eigen::MatrixXd inv_sqrt;
    Eigen::MatrixXd sqrt;
    double min_eigenvalue = 0.0;
    double ridge_added = 0.0;
};

/// Truncated conditional Poisson log-likelihood on the window:
/// sum_t Y_t log(lambda_t) - lambda_t, intensities conditioned back to
/// observation 1.
double loglik(const ModelSpec& spec, const ThetaVector& theta, const CountSeries& y,
              const Window& window);

/// Gradient of loglik: sum_t (Y_t/lambda_t - 1) dlambda_t/dtheta.
std::vector<double> score(const ModelSpec& spec, const ThetaVector& theta,
                          const CountSeries& y, const Window& window);

/// Box-projected quasi-Newton maximizer of loglik over the domain, with a
/// logarithmic barrier activated near the contraction face. Deterministic;
/// honors a warm start. Non-convergence is reported, never silent.
FitResult fit_mle(const ModelSpec& spec, const CountSeries& y, const Window& window,
                  const ThetaDomain& domain,
                  const std::optional<ThetaVector>& init = std::nullopt,
                  const FitOptions& opts = {});

/// Sigma-hat = (1/n) sum_t (1/lambda_t) grad_t grad_t' at theta_hat, with
/// inverse square root via symmetric eigendecomposition (ridged if nearly
/// singular; the ridge is recorded).
SigmaEstimate sigma_hat(const ModelSpec& spec, const ThetaVector& theta_hat,
                        const CountSeries& y, const Window& window);

}  // namespace cpd
