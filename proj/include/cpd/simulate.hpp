#pragma once

#include <cstdint>
#include <cstddef>

#include "cpd/model.hpp"

namespace cpd {

/// Change-point scenario: theta0 before k_star (inclusive), theta1 after.
/// theta0 == theta1 encodes the null.
struct ChangeSpec {
    ThetaVector theta0;
    ThetaVector theta1;
    std::size_t k_star = 1;
    std::size_t total_len = 1;
};

/// Draw Y_t | past ~ Poisson(lambda_t) forward from a zero initial past,
/// discard `burnin` draws, return the last n. One counter-based RNG
/// substream per time step, so equal seeds give coupled trajectories.
CountSeries simulate_stationary(const ModelSpec& spec, const ThetaVector& theta,
                                std::size_t n, std::size_t burnin, std::uint64_t seed);

/// Simulate the change model: intensities use theta0 up to observation
/// k_star and theta1 afterwards, both conditioning on the full realized
/// past (the post-change segment is nonstationary by construction).
CountSeries simulate_with_change(const ChangeSpec& change, const ModelSpec& spec,
                                 std::size_t burnin, std::uint64_t seed);

}  // namespace cpd
