#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace cpd {

enum class Family { Ingarch, Intarch };

/// Structural description of the intensity family. Orders and the INTARCH
/// threshold are fixed hyperparameters, never estimated.
struct ModelSpec {
    Family family = Family::Ingarch;
    int p = 0;           // lagged-intensity order (INGARCH only)
    int q = 1;           // lagged-count order
    long threshold = 0;  // INTARCH threshold

    static ModelSpec ingarch(int p, int q);
    static ModelSpec intarch(int q, long threshold);

    /// Parameter dimension: 1+p+q (INGARCH), 1+2q (INTARCH).
    int dim() const {
        return family == Family::Ingarch ? 1 + p + q : 1 + 2 * q;
    }
};

/// Parameter point. INGARCH layout: (a0, a1..ap, b1..bq).
/// INTARCH layout: (phi0, phi1+..phiq+, phi1-..phiq-).
using ThetaVector = std::vector<double>;

/// Compact box domain with a contraction margin and an intensity floor.
struct ThetaDomain {
    std::vector<double> lower;
    std::vector<double> upper;
    double contraction_margin = 0.02;  // feasible iff contraction <= 1 - margin
    double intensity_floor = 1e-3;     // lower bound on the intercept

    static ThetaDomain defaults(const ModelSpec& spec);
};

struct DomainReport {
    bool ok = true;
    std::vector<std::string> violations;
};

/// Observed count trajectory; indices are 1-based in all window arithmetic.
struct CountSeries {
    std::vector<long> counts;
    std::optional<std::size_t> known_change;

    std::size_t size() const { return counts.size(); }
};

/// Inclusive 1-based index range T_{start,end}.
struct Window {
    std::size_t start = 1;
    std::size_t end = 1;

    std::size_t length() const { return end - start + 1; }
};

/// Truncated-past intensities over a window, optionally with the
/// parameter gradient of each intensity (row-major window_len x dim).
struct IntensityPath {
    std::vector<double> lambdas;
    std::vector<double> grads;
    int dim = 0;

    double grad(std::size_t t, int j) const {
        return grads[t * static_cast<std::size_t>(dim) + static_cast<std::size_t>(j)];
    }
};

/// Sum of the Lipschitz coefficients of the intensity map: sum(a)+sum(b)
/// for INGARCH, sum_k max(phi_k+, phi_k-) for INTARCH.
double contraction_norm(const ModelSpec& spec, const ThetaVector& theta);

/// Box, positivity and contraction feasibility; violations are reported,
/// not thrown.
DomainReport check_domain(const ModelSpec& spec, const ThetaVector& theta,
                          const ThetaDomain& domain);

/// Linear-representation coefficients psi_0..psi_K of an INGARCH intensity,
/// lambda_t = psi_0 + sum_k psi_k Y_{t-k}. Requires contraction < 1.
std::vector<double> psi_coefficients(const ModelSpec& spec, const ThetaVector& theta,
                                     int truncation);

/// Truncated-past intensity recursion over `window`, always conditioning on
/// the realized counts back to index 1 (zeros before that). Latent INGARCH
/// intensities before the sample start at the no-data fixpoint
/// a0/(1-sum(a)), gradients at the fixpoint derivative.
IntensityPath intensity_path(const ModelSpec& spec, const ThetaVector& theta,
                             const CountSeries& y, const Window& window,
                             bool with_grad);

}  // namespace cpd
