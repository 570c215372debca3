#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "cpd/monitor.hpp"
#include "cpd/simulate.hpp"

using namespace cpd;

namespace {

CountSeries change_series(std::size_t m, double horizon, const ThetaVector& theta0,
                          const ThetaVector& theta1, std::uint64_t seed) {
    ChangeSpec change;
    change.theta0 = theta0;
    change.theta1 = theta1;
    change.k_star = static_cast<std::size_t>(std::llround(1.25 * static_cast<double>(m)));
    change.total_len =
        static_cast<std::size_t>(std::floor(horizon * static_cast<double>(m))) + 1;
    return simulate_with_change(change, ModelSpec::ingarch(1, 1), 300, seed);
}

}  // namespace

TEST_CASE("window start candidates") {
    CHECK(window_pi(10, 13, 2) == std::vector<std::size_t>{8, 9, 10, 11});
    CHECK(window_pi(10, 11, 1) == std::vector<std::size_t>{9, 10});
    const auto big = window_pi(1000, 1500, 6);
    CHECK(big.size() == 501);
    CHECK(big.front() == 994);
    CHECK(big.back() == 1494);
    CHECK_THROWS_AS(window_pi(10, 10, 2), std::invalid_argument);
    CHECK_THROWS_AS(window_pi(10, 12, 10), std::invalid_argument);
}

TEST_CASE("detector hand values and invariances") {
    const Eigen::MatrixXd id2 = Eigen::MatrixXd::Identity(2, 2);
    const ThetaVector hist{1.0, 0.2};

    // sqrt(4) * (5/10) * ||(0.6, 0.2)|| = sqrt(0.4)
    CHECK(detector(10, 5, ThetaVector{1.6, 0.4}, hist, id2, 4) ==
          doctest::Approx(std::sqrt(0.4)).epsilon(1e-12));

    // Identical estimates give zero regardless of the normalization.
    CHECK(detector(10, 5, hist, hist, 3.7 * id2, 4) == 0.0);

    // Linear in the normalization matrix.
    const ThetaVector w{1.3, 0.1};
    const double base = detector(12, 7, w, hist, id2, 9);
    CHECK(detector(12, 7, w, hist, 2.0 * id2, 9) == doctest::Approx(2.0 * base));

    // The (k-ell)/k weight: doubling k-ell at fixed k doubles the statistic.
    CHECK(detector(12, 2, w, hist, id2, 9) == doctest::Approx(2.0 * base));

    CHECK_THROWS_AS(detector(5, 5, w, hist, id2, 4), std::invalid_argument);
    CHECK_THROWS_AS(detector(5, 2, ThetaVector{1.0}, hist, id2, 4),
                    std::invalid_argument);
}

TEST_CASE("stride defaults") {
    MonitorConfig small;
    small.m = 200;
    CHECK(small.stride_at(300) == 1);
    MonitorConfig big;
    big.m = 400;
    CHECK(big.stride_at(440) == 1);
    CHECK(big.stride_at(600) == 4);
    big.ell_stride = 2;
    CHECK(big.stride_at(600) == 2);
    MonitorConfig vm;
    vm.m = 200;
    CHECK(vm.effective_v_m() == 4);  // ceil(200^(1/4))
    vm.v_m = 9;
    CHECK(vm.effective_v_m() == 9);
}

TEST_CASE("unreachable threshold runs the whole horizon") {
    const ModelSpec spec = ModelSpec::ingarch(1, 1);
    const std::size_t m = 40;
    CountSeries y = simulate_stationary(spec, {1.0, 0.2, 0.15}, m + 25, 200, 17);
    MonitorConfig cfg;
    cfg.m = m;
    cfg.horizon = 1.5;
    cfg.c_alpha = 1e12;
    const MonitorTrace trace = run_monitor(spec, y, cfg);
    CHECK_FALSE(trace.detected());
    CHECK(trace.tau == MonitorTrace::kNoDetection);
    CHECK_FALSE(trace.delay.has_value());
    // k runs m+1 .. min(series end, [T m]+1) = 61 here.
    CHECK(trace.per_k.size() == 21);
    CHECK(trace.per_k.front().k == m + 1);
    CHECK(trace.per_k.back().k == m + 21);
    for (const auto& step : trace.per_k) {
        CHECK(step.raw_max >= 0.0);
        CHECK(step.argmax_ell >= m - 3);  // v_m = ceil(40^(1/4)) = 3
        CHECK(step.argmax_ell <= step.k - 3);
    }
}

TEST_CASE("stopping time is monotone in the threshold") {
    const std::size_t m = 60;
    CountSeries y = change_series(m, 1.5, {1.0, 0.2, 0.15}, {1.0, 0.2, 0.6}, 4242);
    MonitorConfig loose;
    loose.m = m;
    loose.c_alpha = 2.0;
    MonitorConfig tight = loose;
    tight.c_alpha = 3.5;
    const ModelSpec spec = ModelSpec::ingarch(1, 1);
    const MonitorTrace a = run_monitor(spec, y, loose);
    const MonitorTrace b = run_monitor(spec, y, tight);
    if (b.detected()) {
        REQUIRE(a.detected());
        CHECK(a.tau <= b.tau);
    }
    // Per-k maxima agree before either stop: the threshold only gates stopping.
    const std::size_t shared = std::min(a.per_k.size(), b.per_k.size());
    for (std::size_t i = 0; i < shared; ++i) {
        CHECK(a.per_k[i].normalized_max == b.per_k[i].normalized_max);
    }
}

TEST_CASE("large change is detected with sensible delay") {
    const std::size_t m = 60;
    const std::size_t k_star = 75;  // 1.25 m
    CountSeries y = change_series(m, 1.5, {1.0, 0.2, 0.15}, {3.0, 0.2, 0.6}, 7);
    REQUIRE(y.known_change == k_star);
    MonitorConfig cfg;
    cfg.m = m;
    cfg.c_alpha = 9.0;
    const MonitorTrace trace = run_monitor(ModelSpec::ingarch(1, 1), y, cfg);
    REQUIRE(trace.detected());
    CHECK(trace.tau > k_star);
    REQUIRE(trace.delay.has_value());
    CHECK(*trace.delay == trace.tau - k_star);
    CHECK(trace.tau <= static_cast<std::size_t>(std::floor(1.5 * m)) + 1);
    CHECK(trace.per_k.back().normalized_max > cfg.c_alpha);
    CHECK(trace.hist_fit.converged);
}

TEST_CASE("streaming engine matches the batch runner exactly") {
    const ModelSpec spec = ModelSpec::ingarch(1, 1);
    const std::size_t m = 40;
    CountSeries y = change_series(m, 1.5, {1.0, 0.2, 0.15}, {1.0, 0.2, 0.55}, 99);
    MonitorConfig cfg;
    cfg.m = m;
    cfg.c_alpha = 2.8;
    const MonitorTrace batch = run_monitor(spec, y, cfg);

    std::vector<long> hist(y.counts.begin(), y.counts.begin() + static_cast<long>(m));
    MonitorEngine engine(spec, hist, cfg);
    for (std::size_t t = m + 1; t <= y.size(); ++t) {
        if (engine.stopped() || t > engine.monitoring_end()) break;
        engine.push(y.counts[t - 1]);
    }
    const MonitorTrace live = engine.take_trace(y.known_change);

    CHECK(live.tau == batch.tau);
    CHECK(live.delay == batch.delay);
    REQUIRE(live.per_k.size() == batch.per_k.size());
    for (std::size_t i = 0; i < live.per_k.size(); ++i) {
        CHECK(live.per_k[i].k == batch.per_k[i].k);
        CHECK(live.per_k[i].raw_max == batch.per_k[i].raw_max);
        CHECK(live.per_k[i].normalized_max == batch.per_k[i].normalized_max);
        CHECK(live.per_k[i].argmax_ell == batch.per_k[i].argmax_ell);
    }
}

TEST_CASE("boundary weight rescales the normalized statistic") {
    const ModelSpec spec = ModelSpec::ingarch(1, 1);
    const std::size_t m = 40;
    CountSeries y = simulate_stationary(spec, {1.0, 0.2, 0.15}, m + 10, 200, 31);
    MonitorConfig plain;
    plain.m = m;
    plain.c_alpha = 1e12;
    MonitorConfig halved = plain;
    halved.boundary.b0 = [](double) { return 2.0; };
    const MonitorTrace a = run_monitor(spec, y, plain);
    const MonitorTrace b = run_monitor(spec, y, halved);
    REQUIRE(a.per_k.size() == b.per_k.size());
    for (std::size_t i = 0; i < a.per_k.size(); ++i) {
        CHECK(b.per_k[i].raw_max == a.per_k[i].raw_max);
        CHECK(b.per_k[i].normalized_max ==
              doctest::Approx(a.per_k[i].normalized_max / 2.0).epsilon(1e-12));
    }
}

TEST_CASE("engine preconditions") {
    const ModelSpec spec = ModelSpec::ingarch(1, 1);
    MonitorConfig cfg;
    cfg.m = 40;
    CHECK_THROWS_AS(MonitorEngine(spec, std::vector<long>(10, 1), cfg),
                    std::invalid_argument);
    MonitorConfig bad_vm = cfg;
    bad_vm.v_m = 40;
    CHECK_THROWS_AS(MonitorEngine(spec, std::vector<long>(40, 1), bad_vm),
                    std::invalid_argument);
    MonitorConfig bad_T = cfg;
    bad_T.horizon = 1.0;
    CHECK_THROWS_AS(MonitorEngine(spec, std::vector<long>(40, 1), bad_T),
                    std::invalid_argument);
    CountSeries short_series;
    short_series.counts.assign(40, 1);
    CHECK_THROWS_AS(run_monitor(spec, short_series, cfg), std::invalid_argument);
}
