// Compares the serial reference implementations against the OpenMP kernels
// and verifies that the results are bitwise identical.
#include <chrono>
#include <cstdio>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "cpd/critical_values.hpp"
#include "cpd/experiments.hpp"

namespace {

template <typename F>
double time_s(F&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(t1 - t0).count();
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("openmp threads: %d\n", omp_get_max_threads());
#else
    std::printf("openmp: disabled (serial build)\n");
#endif

    cpd::QuantileRequest req;
    req.d = 3;
    req.replications = 4000;

    std::vector<double> serial_draws, parallel_draws;
    const double t_serial =
        time_s([&] { serial_draws = cpd::draw_U_batch_serial(req); });
    const double t_parallel = time_s([&] { parallel_draws = cpd::draw_U_batch(req); });
    std::printf("draw_U batch (%d paths, d=%d, grid=%d)\n", req.replications, req.d,
                req.effective_grid());
    std::printf("  serial    %.3fs\n", t_serial);
    std::printf("  parallel  %.3fs  (speedup %.2fx, identical: %s)\n", t_parallel,
                t_serial / t_parallel, serial_draws == parallel_draws ? "yes" : "NO");

    cpd::ExperimentConfig cfg;
    cfg.scenarios = {{"S1", cpd::ModelSpec::ingarch(1, 1), {1.0, 0.2, 0.15},
                      {1.0, 0.2, 0.5}, true}};
    cfg.ms = {100};
    cfg.replications = 20;
    cfg.burnin = 200;
    cfg.cache_path = "bench_cache.jsonl";

    // Warm the quantile cache so both timings measure only the replications.
    {
        cpd::ExperimentConfig warm = cfg;
        warm.replications = 1;
        cpd::run_level_power(warm);
    }

    cpd::ResultTable serial_table, parallel_table;
    const double t_reps_serial =
        time_s([&] { serial_table = cpd::run_level_power_serial(cfg); });
    const double t_reps_parallel =
        time_s([&] { parallel_table = cpd::run_level_power(cfg); });
    std::printf("monitoring replications (%d reps, m=%zu)\n", cfg.replications,
                cfg.ms[0]);
    std::printf("  serial    %.3fs\n", t_reps_serial);
    std::printf("  parallel  %.3fs  (speedup %.2fx, identical: %s)\n", t_reps_parallel,
                t_reps_serial / t_reps_parallel,
                cpd::format_table1(serial_table) == cpd::format_table1(parallel_table)
                    ? "yes"
                    : "NO");
    std::remove("bench_cache.jsonl");
    return 0;
}
