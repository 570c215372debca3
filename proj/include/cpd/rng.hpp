#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace cpd {

/// Inverse of the standard normal CDF (Wichura's PPND16 rational
/// approximations, accurate to ~1e-16 for p in (0,1)).
double inv_normal_cdf(double p);

namespace detail {

// Philox 4x32-10 block function.
inline std::array<std::uint32_t, 4> philox10(std::array<std::uint32_t, 4> ctr,
                                             std::array<std::uint32_t, 2> key) {
    constexpr std::uint64_t kM0 = 0xD2511F53ULL;
    constexpr std::uint64_t kM1 = 0xCD9E8D57ULL;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = kM0 * ctr[0];
        const std::uint64_t p1 = kM1 * ctr[2];
        ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
               static_cast<std::uint32_t>(p1),
               static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
               static_cast<std::uint32_t>(p0)};
        key[0] += 0x9E3779B9U;
        key[1] += 0xBB67AE85U;
    }
    return ctr;
}

}  // namespace detail

/// Counter-based random stream: output is a pure function of
/// (seed, stream, position), so distinct streams can be consumed in any
/// order, from any thread, with identical results on every platform.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream)
        : seed_(seed), stream_(stream) {}

    std::uint64_t next_u64() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const auto block = detail::philox10(
            {static_cast<std::uint32_t>(block_index_),
             static_cast<std::uint32_t>(block_index_ >> 32),
             static_cast<std::uint32_t>(stream_),
             static_cast<std::uint32_t>(stream_ >> 32)},
            {static_cast<std::uint32_t>(seed_),
             static_cast<std::uint32_t>(seed_ >> 32)});
        ++block_index_;
        spare_ = (static_cast<std::uint64_t>(block[2]) << 32) | block[3];
        have_spare_ = true;
        return (static_cast<std::uint64_t>(block[0]) << 32) | block[1];
    }

    /// Uniform draw in the open interval (0,1).
    double uniform() { return ((next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    /// Standard normal draw (one uniform per variate).
    double gaussian() { return inv_normal_cdf(uniform()); }

    /// Exact Poisson draw: sequential inversion for small means, Hormann's
    /// transformed rejection (PTRD) for large ones. No normal approximation.
    long poisson(double lambda);

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t block_index_ = 0;
    std::uint64_t spare_ = 0;
    bool have_spare_ = false;
};

/// splitmix64 step, used to derive per-replication seeds from a master seed.
inline std::uint64_t mix_seed(std::uint64_t state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    return mix_seed(mix_seed(a) ^ b);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return mix_seed(mix_seed(a, b) ^ c);
}

inline double inv_normal_cdf(double p) {
    const double q = p - 0.5;
    double r;
    if (std::fabs(q) <= 0.425) {
        r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                     6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
                   1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
                 1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
               (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                     3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
                   5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
                 4.2313330701600911252e1) * r + 1.0);
    }
    r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double value;
    if (r <= 5.0) {
        r -= 1.6;
        value = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                      2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                    3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
                  4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
                (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                      1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                    6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
                  2.05319162663775882187e0) * r + 1.0);
    } else {
        r -= 5.0;
        value = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                      1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                    2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
                  5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
                (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                      1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                    1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
                  5.99832206555887937690e-1) * r + 1.0);
    }
    return q < 0.0 ? -value : value;
}

inline long RngStream::poisson(double lambda) {
    if (lambda < 10.0) {
        // Sequential inversion; one uniform per draw keeps streams coupled
        // monotonically in lambda.
        const double u = uniform();
        double p = std::exp(-lambda);
        double cdf = p;
        long k = 0;
        while (u > cdf) {
            ++k;
            p *= lambda / static_cast<double>(k);
            cdf += p;
            if (k > 100000) break;  // cdf numerically saturated
        }
        return k;
    }
    // PTRD (Hormann 1993).
    const double smu = std::sqrt(lambda);
    const double b = 0.931 + 2.53 * smu;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
        const double u = uniform() - 0.5;
        const double v = uniform();
        const double us = 0.5 - std::fabs(u);
        const long k =
            static_cast<long>(std::floor((2.0 * a / us + b) * u + lambda + 0.43));
        if (us >= 0.07 && v <= v_r) return k;
        if (k < 0 || (us < 0.013 && v > us)) continue;
        if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
            static_cast<double>(k) * std::log(lambda) - lambda -
                std::lgamma(static_cast<double>(k) + 1.0)) {
            return k;
        }
    }
}

}  // namespace cpd
