#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cpd/model.hpp"
#include "cpd/rng.hpp"
#include "cpd/simulate.hpp"

using namespace cpd;

TEST_CASE("normal inverse cdf sanity") {
    CHECK(inv_normal_cdf(0.5) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(inv_normal_cdf(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-9));
    CHECK(inv_normal_cdf(0.025) == doctest::Approx(-1.959963984540054).epsilon(1e-9));
    CHECK(inv_normal_cdf(1e-10) < -6.0);
}

TEST_CASE("poisson sampler moments, small and large mean") {
    for (double lambda : {0.5, 3.0, 25.0, 80.0}) {
        RngStream rng(42, static_cast<std::uint64_t>(lambda * 100));
        const int n = 200000;
        double sum = 0.0, sum2 = 0.0;
        for (int i = 0; i < n; ++i) {
            const double x = static_cast<double>(rng.poisson(lambda));
            sum += x;
            sum2 += x * x;
        }
        const double mean = sum / n;
        const double var = sum2 / n - mean * mean;
        const double se = std::sqrt(lambda / n);
        CHECK(std::fabs(mean - lambda) < 5.0 * se);
        CHECK(var == doctest::Approx(lambda).epsilon(0.05));
    }
}

TEST_CASE("iid poisson special case") {
    const auto spec = ModelSpec::ingarch(1, 1);
    const auto y = simulate_stationary(spec, {1.0, 0.0, 0.0}, 100000, 0, 9);
    double sum = 0.0;
    for (long v : y.counts) sum += static_cast<double>(v);
    const double mean = sum / static_cast<double>(y.size());
    CHECK(std::fabs(mean - 1.0) < 3.0 * std::sqrt(1.0 / 100000.0));
}

TEST_CASE("stationary mean identity") {
    const auto spec = ModelSpec::ingarch(1, 1);
    const auto y = simulate_stationary(spec, {1.0, 0.2, 0.15}, 100000, 500, 11);
    double sum = 0.0;
    for (long v : y.counts) sum += static_cast<double>(v);
    const double mean = sum / static_cast<double>(y.size());
    CHECK(mean == doctest::Approx(1.0 / 0.65).epsilon(0.05));
}

TEST_CASE("preconditions") {
    const auto spec = ModelSpec::ingarch(1, 1);
    CHECK_THROWS_AS(simulate_stationary(spec, {1.0, 0.2, 0.15}, 0, 0, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(simulate_stationary(spec, {1.0, 0.7, 0.4}, 10, 0, 1),
                    std::domain_error);
}

TEST_CASE("reproducibility and seed sensitivity") {
    const auto spec = ModelSpec::ingarch(1, 1);
    const ThetaVector theta{1.0, 0.2, 0.15};
    const auto a = simulate_stationary(spec, theta, 500, 100, 123);
    const auto b = simulate_stationary(spec, theta, 500, 100, 123);
    const auto c = simulate_stationary(spec, theta, 500, 100, 124);
    CHECK(a.counts == b.counts);
    CHECK(a.counts != c.counts);
}

TEST_CASE("null change degeneracy is exact") {
    const auto spec = ModelSpec::ingarch(1, 1);
    const ThetaVector theta{1.0, 0.2, 0.15};
    ChangeSpec change{theta, theta, 50, 200};
    const auto with_change = simulate_with_change(change, spec, 100, 77);
    const auto stationary = simulate_stationary(spec, theta, 200, 100, 77);
    CHECK(with_change.counts == stationary.counts);
    CHECK(with_change.known_change == 50);
}

TEST_CASE("change at the end equals stationary") {
    const auto spec = ModelSpec::ingarch(1, 1);
    ChangeSpec change{{1.0, 0.2, 0.15}, {1.0, 0.2, 0.5}, 200, 200};
    const auto with_change = simulate_with_change(change, spec, 50, 5);
    const auto stationary = simulate_stationary(spec, {1.0, 0.2, 0.15}, 200, 50, 5);
    CHECK(with_change.counts == stationary.counts);
}

TEST_CASE("post-change mean drifts to the new regime") {
    const auto spec = ModelSpec::ingarch(1, 1);
    ChangeSpec change{{1.0, 0.2, 0.15}, {1.0, 0.2, 0.5}, 500, 60500};
    const auto y = simulate_with_change(change, spec, 200, 31);
    // Skip a transition stretch after the break, then compare to the
    // stationary mean of theta1.
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t t = 3000; t < y.size(); ++t) {
        sum += static_cast<double>(y.counts[t]);
        ++n;
    }
    CHECK(sum / static_cast<double>(n) == doctest::Approx(1.0 / 0.3).epsilon(0.06));
}

TEST_CASE("conditional equidispersion") {
    // Bin draws by their conditional intensity; conditional mean and variance
    // of Y_t should both match lambda_t.
    const auto spec = ModelSpec::ingarch(1, 1);
    const ThetaVector theta{1.0, 0.2, 0.15};
    const auto y = simulate_stationary(spec, theta, 200000, 500, 202);
    const auto path = intensity_path(spec, theta, y, Window{1, y.size()}, false);
    const int bins = 8;
    std::vector<double> sum(bins, 0.0), sum2(bins, 0.0), lam_sum(bins, 0.0);
    std::vector<std::size_t> count(bins, 0);
    for (std::size_t t = 0; t < y.size(); ++t) {
        const double lam = path.lambdas[t];
        const int b = std::min(bins - 1, static_cast<int>(lam / 0.5));
        const double v = static_cast<double>(y.counts[t]);
        sum[b] += v;
        sum2[b] += v * v;
        lam_sum[b] += lam;
        ++count[b];
    }
    for (int b = 0; b < bins; ++b) {
        if (count[b] < 5000) continue;
        const double n = static_cast<double>(count[b]);
        const double mean = sum[b] / n;
        const double var = sum2[b] / n - mean * mean;
        const double lam_avg = lam_sum[b] / n;
        CHECK(mean == doctest::Approx(lam_avg).epsilon(0.05));
        CHECK(var == doctest::Approx(lam_avg).epsilon(0.08));
    }
}

TEST_CASE("post-change moments stay bounded") {
    const auto spec = ModelSpec::ingarch(1, 1);
    ChangeSpec change{{2.5, 0.0, 0.35}, {4.5, 0.05, 0.6}, 500, 4500};
    const auto y = simulate_with_change(change, spec, 200, 404);
    // Empirical moments E Y^r, r <= 4, over the nonstationary stretch.
    for (int r = 1; r <= 4; ++r) {
        double acc = 0.0;
        std::size_t n = 0;
        for (std::size_t t = 500; t < y.size(); ++t) {
            acc += std::pow(static_cast<double>(y.counts[t]), r);
            ++n;
        }
        const double moment = acc / static_cast<double>(n);
        CHECK(std::isfinite(moment));
        // Crude bound: stationary mean of theta1 is 4.5/0.35 ~ 12.9.
        CHECK(moment < std::pow(60.0, r));
    }
}
