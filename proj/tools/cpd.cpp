// Command-line surface for count-model fitting, sequential monitoring,
// Monte Carlo quantiles, and the simulation tables.
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "cpd/critical_values.hpp"
#include "cpd/experiments.hpp"
#include "cpd/likelihood.hpp"
#include "cpd/monitor.hpp"
#include "cpd/rng.hpp"
#include "cpd/simulate.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

struct Options {
    // shared
    std::string config_path;
    std::string out_path;       // empty -> stdout, no sidecar
    std::string cache_path;     // empty -> CPD_QUANTILE_CACHE env, else no cache
    std::uint64_t seed = 1;
    bool full = false;

    // model
    std::string family = "ingarch";
    int p = 1, q = 1;
    long threshold = 0;

    // data / windows
    std::string data_path;
    std::size_t window_start = 0, window_end = 0;  // 0 -> full series

    // monitoring
    std::size_t m = 0;
    double horizon = 1.5;
    double alpha = 0.05;
    double c_alpha = 0.0;  // 0 -> computed from the quantile engine
    std::size_t v_m = 0;
    std::size_t ell_stride = 0;

    // quantiles
    int dim = 3;
    int replications = 20000;
    int grid_points = 0;

    // experiments
    int table_replications = 100;
    std::size_t burnin = 500;
    int scenario = 1;  // detector-plot
};

nlohmann::json options_json(const Options& opt) {
    return nlohmann::json{
        {"out", opt.out_path},           {"cache", opt.cache_path},
        {"seed", opt.seed},              {"full", opt.full},
        {"family", opt.family},          {"p", opt.p},
        {"q", opt.q},                    {"threshold", opt.threshold},
        {"data", opt.data_path},         {"window_start", opt.window_start},
        {"window_end", opt.window_end},  {"m", opt.m},
        {"horizon", opt.horizon},        {"alpha", opt.alpha},
        {"c_alpha", opt.c_alpha},        {"v_m", opt.v_m},
        {"ell_stride", opt.ell_stride},  {"dim", opt.dim},
        {"replications", opt.replications},
        {"grid_points", opt.grid_points},
        {"table_replications", opt.table_replications},
        {"burnin", opt.burnin},          {"scenario", opt.scenario},
    };
}

void apply_config_file(Options& opt) {
    if (opt.config_path.empty()) return;
    std::ifstream in(opt.config_path);
    if (!in) throw CLI::ValidationError("--config", "cannot open " + opt.config_path);
    nlohmann::json cfg = nlohmann::json::parse(in, nullptr, false);
    if (cfg.is_discarded() || !cfg.is_object()) {
        throw CLI::ValidationError("--config", "invalid JSON in " + opt.config_path);
    }
    opt.out_path = cfg.value("out", opt.out_path);
    opt.cache_path = cfg.value("cache", opt.cache_path);
    opt.seed = cfg.value("seed", opt.seed);
    opt.full = cfg.value("full", opt.full);
    opt.family = cfg.value("family", opt.family);
    opt.p = cfg.value("p", opt.p);
    opt.q = cfg.value("q", opt.q);
    opt.threshold = cfg.value("threshold", opt.threshold);
    opt.data_path = cfg.value("data", opt.data_path);
    opt.window_start = cfg.value("window_start", opt.window_start);
    opt.window_end = cfg.value("window_end", opt.window_end);
    opt.m = cfg.value("m", opt.m);
    opt.horizon = cfg.value("horizon", opt.horizon);
    opt.alpha = cfg.value("alpha", opt.alpha);
    opt.c_alpha = cfg.value("c_alpha", opt.c_alpha);
    opt.v_m = cfg.value("v_m", opt.v_m);
    opt.ell_stride = cfg.value("ell_stride", opt.ell_stride);
    opt.dim = cfg.value("dim", opt.dim);
    opt.replications = cfg.value("replications", opt.replications);
    opt.grid_points = cfg.value("grid_points", opt.grid_points);
    opt.table_replications = cfg.value("table_replications", opt.table_replications);
    opt.burnin = cfg.value("burnin", opt.burnin);
    opt.scenario = cfg.value("scenario", opt.scenario);
}

std::string effective_cache(const Options& opt) {
    if (!opt.cache_path.empty()) return opt.cache_path;
    const char* env = std::getenv("CPD_QUANTILE_CACHE");
    return env ? std::string(env) : std::string();
}

cpd::ModelSpec model_from(const Options& opt) {
    if (opt.family == "ingarch") return cpd::ModelSpec::ingarch(opt.p, opt.q);
    if (opt.family == "intarch") return cpd::ModelSpec::intarch(opt.q, opt.threshold);
    throw CLI::ValidationError("--family", "must be 'ingarch' or 'intarch'");
}

nlohmann::json environment_fingerprint() {
    nlohmann::json env;
    env["compiler"] = __VERSION__;
#ifdef _OPENMP
    env["openmp"] = _OPENMP;
    env["max_threads"] = omp_get_max_threads();
#else
    env["openmp"] = false;
    env["max_threads"] = 1;
#endif
#if defined(__linux__)
    env["platform"] = "linux";
#elif defined(__APPLE__)
    env["platform"] = "darwin";
#else
    env["platform"] = "other";
#endif
    env["pointer_bits"] = static_cast<int>(sizeof(void*) * 8);
    return env;
}

/// Write the table body to --out (or stdout) and, when a file was written,
/// a JSON sidecar with the resolved configuration next to it.
void emit(const Options& opt, const std::string& command, const std::string& body) {
    if (opt.out_path.empty()) {
        std::cout << body;
        return;
    }
    std::ofstream out(opt.out_path);
    if (!out) throw CLI::ValidationError("--out", "cannot open " + opt.out_path);
    out << body;
    out.close();

    nlohmann::json sidecar{{"command", command},
                           {"config", options_json(opt)},
                           {"environment", environment_fingerprint()},
                           {"output", opt.out_path}};
    std::ofstream meta(opt.out_path + ".json");
    if (meta) meta << sidecar.dump(2) << '\n';
}

cpd::CountSeries load_data(const Options& opt) {
    if (opt.data_path.empty()) throw CLI::ValidationError("--data", "input file required");
    try {
        return cpd::load_counts_csv(opt.data_path);
    } catch (const std::invalid_argument& e) {
        // Structural data problems (e.g. an empty file) are data errors too.
        throw cpd::ParseError(e.what(), 0);
    }
}

double resolve_c_alpha(const Options& opt, int dim) {
    if (opt.c_alpha > 0.0) return opt.c_alpha;
    cpd::QuantileRequest req;
    req.d = dim;
    req.horizon = opt.horizon;
    req.alpha = opt.alpha;
    req.seed = cpd::mix_seed(opt.seed, 0xC0FFEEULL);
    return cpd::quantile_c_alpha(req, effective_cache(opt)).c_alpha;
}

cpd::ExperimentConfig experiment_config(const Options& opt) {
    cpd::ExperimentConfig cfg;
    cfg.scenarios = cpd::Scenario::paper_defaults();
    cfg.ms = {200, 500};
    if (opt.full) cfg.ms.push_back(1000);
    cfg.horizon = opt.horizon;
    cfg.alpha = opt.alpha;
    cfg.replications = opt.table_replications;
    cfg.master_seed = opt.seed;
    cfg.burnin = opt.burnin;
    cfg.v_m = opt.v_m;
    cfg.ell_stride = opt.ell_stride;
    cfg.cache_path = effective_cache(opt);
    return cfg;
}

int cmd_fit(const Options& opt) {
    const cpd::ModelSpec spec = model_from(opt);
    const cpd::CountSeries y = load_data(opt);
    const cpd::Window window{opt.window_start > 0 ? opt.window_start : 1,
                             opt.window_end > 0 ? opt.window_end : y.size()};
    const cpd::ThetaDomain domain = cpd::ThetaDomain::defaults(spec);
    const cpd::FitResult fit = cpd::fit_mle(spec, y, window, domain);

    std::ostringstream body;
    body << "parameter\tvalue\n";
    char buf[96];
    for (std::size_t i = 0; i < fit.theta_hat.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "theta_%zu\t%.10g\n", i, fit.theta_hat[i]);
        body << buf;
    }
    std::snprintf(buf, sizeof(buf), "loglik\t%.10g\n", fit.loglik);
    body << buf;
    body << "converged\t" << (fit.converged ? 1 : 0) << '\n';
    body << "iterations\t" << fit.iterations << '\n';
    std::snprintf(buf, sizeof(buf), "grad_norm\t%.3g\n", fit.grad_norm);
    body << buf;
    emit(opt, "fit", body.str());
    return kExitOk;
}

int cmd_monitor(const Options& opt) {
    const cpd::ModelSpec spec = model_from(opt);
    const cpd::CountSeries y = load_data(opt);
    if (opt.m == 0) throw CLI::ValidationError("--m", "historical length required");
    cpd::MonitorConfig mc;
    mc.m = opt.m;
    mc.horizon = opt.horizon;
    mc.alpha = opt.alpha;
    mc.v_m = opt.v_m;
    mc.ell_stride = opt.ell_stride;
    mc.c_alpha = resolve_c_alpha(opt, spec.dim());

    const cpd::MonitorTrace trace = cpd::run_monitor(spec, y, mc);
    std::ostringstream body;
    body << "k\traw_max\tnormalized_max\tthreshold\tmarker\n";
    char buf[160];
    for (const cpd::MonitorStep& step : trace.per_k) {
        const bool stop = trace.detected() && step.k == trace.tau;
        std::snprintf(buf, sizeof(buf), "%zu\t%.17g\t%.17g\t%.17g\t%s\n", step.k,
                      step.raw_max, step.normalized_max, mc.c_alpha,
                      stop ? "stop" : "");
        body << buf;
    }
    emit(opt, "monitor", body.str());
    if (trace.detected()) {
        std::cerr << "detection at k=" << trace.tau << " (c_alpha=" << mc.c_alpha
                  << ")\n";
    } else {
        std::cerr << "no detection within the monitoring horizon (c_alpha="
                  << mc.c_alpha << ")\n";
    }
    return kExitOk;
}

int cmd_quantiles(const Options& opt) {
    cpd::QuantileRequest req;
    req.d = opt.dim;
    req.horizon = opt.horizon;
    req.alpha = opt.alpha;
    req.replications = opt.replications;
    req.grid_points = opt.grid_points;
    req.seed = opt.seed;
    const cpd::QuantileResult res = cpd::quantile_c_alpha(req, effective_cache(opt));

    std::ostringstream body;
    body << "d\thorizon\talpha\tgrid_points\treplications\tseed\tc_alpha\tmc_stderr\t"
            "stderr_reliable\n";
    char buf[200];
    std::snprintf(buf, sizeof(buf), "%d\t%g\t%g\t%d\t%d\t%llu\t%.10g\t%.4g\t%d\n",
                  req.d, req.horizon, req.alpha, req.effective_grid(),
                  req.replications, static_cast<unsigned long long>(req.seed),
                  res.c_alpha, res.mc_stderr, res.stderr_reliable ? 1 : 0);
    body << buf;
    emit(opt, "quantiles", body.str());
    if (res.cache_warning) std::cerr << "warning: could not update quantile cache\n";
    return kExitOk;
}

int cmd_table1(const Options& opt) {
    const cpd::ResultTable table = cpd::run_level_power(experiment_config(opt));
    emit(opt, "table1", cpd::format_table1(table));
    if (table.failed_replications > 0) {
        std::cerr << "warning: " << table.failed_replications
                  << " replication(s) failed and were excluded\n";
    }
    return kExitOk;
}

int cmd_table2(const Options& opt) {
    const cpd::ResultTable table = cpd::run_delay_stats(experiment_config(opt));
    emit(opt, "table2", cpd::format_table2(table));
    if (table.failed_replications > 0) {
        std::cerr << "warning: " << table.failed_replications
                  << " replication(s) failed and were excluded\n";
    }
    return kExitOk;
}

int cmd_detector_plot(const Options& opt) {
    if (opt.scenario < 1 || opt.scenario > 3) {
        throw CLI::ValidationError("--scenario", "must be 1, 2, or 3");
    }
    const auto scenarios = cpd::Scenario::paper_defaults();
    const cpd::Scenario& scenario =
        scenarios[static_cast<std::size_t>(opt.scenario) * 2 - 1];  // change variant
    const std::size_t m = opt.m > 0 ? opt.m : 200;

    cpd::ChangeSpec change;
    change.theta0 = scenario.theta0;
    change.theta1 = scenario.theta1;
    change.k_star = static_cast<std::size_t>(std::llround(1.25 * static_cast<double>(m)));
    change.total_len =
        static_cast<std::size_t>(std::floor(opt.horizon * static_cast<double>(m))) + 1;
    const cpd::CountSeries y =
        cpd::simulate_with_change(change, scenario.spec, opt.burnin,
                                  cpd::mix_seed(opt.seed, 0xF16ULL));

    cpd::MonitorConfig mc;
    mc.m = m;
    mc.horizon = opt.horizon;
    mc.alpha = opt.alpha;
    mc.v_m = opt.v_m;
    mc.ell_stride = opt.ell_stride;
    mc.c_alpha = resolve_c_alpha(opt, scenario.spec.dim());

    if (opt.out_path.empty()) {
        throw CLI::ValidationError("--out", "detector-plot requires an output file");
    }
    cpd::emit_detector_series(scenario.spec, y, mc, opt.out_path);

    nlohmann::json sidecar{{"command", "detector-plot"},
                           {"config", options_json(opt)},
                           {"environment", environment_fingerprint()},
                           {"output", opt.out_path}};
    std::ofstream meta(opt.out_path + ".json");
    if (meta) meta << sidecar.dump(2) << '\n';
    return kExitOk;
}

void add_common(CLI::App* sub, Options& opt) {
    sub->add_option("--config", opt.config_path, "JSON config file; flags override");
    sub->add_option("--out", opt.out_path, "output file (default: stdout)");
    sub->add_option("--cache", opt.cache_path,
                    "quantile cache file (or CPD_QUANTILE_CACHE)");
    sub->add_option("--seed", opt.seed, "master seed");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Poisson count-model monitoring: fitting, sequential "
                 "change-point detection, and Monte Carlo critical values"};
    app.require_subcommand(1);
    Options opt;

    CLI::App* fit = app.add_subcommand("fit", "fit a count model to a CSV series");
    add_common(fit, opt);
    fit->add_option("--data", opt.data_path, "CSV count file");
    fit->add_option("--family", opt.family, "ingarch or intarch");
    fit->add_option("--p", opt.p, "latent feedback order (ingarch)");
    fit->add_option("--q", opt.q, "count lag order");
    fit->add_option("--threshold", opt.threshold, "intarch threshold");
    fit->add_option("--window-start", opt.window_start, "first observation (1-based)");
    fit->add_option("--window-end", opt.window_end, "last observation (1-based)");

    CLI::App* mon = app.add_subcommand("monitor", "run the sequential monitor on a CSV series");
    add_common(mon, opt);
    mon->add_option("--data", opt.data_path, "CSV count file");
    mon->add_option("--family", opt.family, "ingarch or intarch");
    mon->add_option("--p", opt.p, "latent feedback order (ingarch)");
    mon->add_option("--q", opt.q, "count lag order");
    mon->add_option("--threshold", opt.threshold, "intarch threshold");
    mon->add_option("--m", opt.m, "historical segment length");
    mon->add_option("--horizon", opt.horizon, "closed-end horizon T");
    mon->add_option("--alpha", opt.alpha, "significance level");
    mon->add_option("--c-alpha", opt.c_alpha, "critical value (default: computed)");
    mon->add_option("--v-m", opt.v_m, "window margin (default: ceil(m^(1/4)))");
    mon->add_option("--stride", opt.ell_stride, "window-start stride (default: adaptive)");

    CLI::App* quant = app.add_subcommand("quantiles", "Monte Carlo critical values");
    add_common(quant, opt);
    quant->add_option("--d", opt.dim, "parameter dimension");
    quant->add_option("--horizon", opt.horizon, "closed-end horizon T");
    quant->add_option("--alpha", opt.alpha, "significance level");
    quant->add_option("--replications", opt.replications, "Monte Carlo paths");
    quant->add_option("--grid", opt.grid_points, "time grid points (default: 2000 T)");

    CLI::App* t1 = app.add_subcommand("table1", "empirical level/power table");
    add_common(t1, opt);
    t1->add_option("--replications", opt.table_replications, "replications per cell");
    t1->add_option("--alpha", opt.alpha, "significance level");
    t1->add_option("--horizon", opt.horizon, "closed-end horizon T");
    t1->add_option("--burnin", opt.burnin, "simulation burn-in");
    t1->add_option("--v-m", opt.v_m, "window margin override");
    t1->add_option("--stride", opt.ell_stride, "window-start stride override");
    t1->add_flag("--full", opt.full, "include m = 1000 (slow)");

    CLI::App* t2 = app.add_subcommand("table2", "detection delay statistics table");
    add_common(t2, opt);
    t2->add_option("--replications", opt.table_replications, "replications per cell");
    t2->add_option("--alpha", opt.alpha, "significance level");
    t2->add_option("--horizon", opt.horizon, "closed-end horizon T");
    t2->add_option("--burnin", opt.burnin, "simulation burn-in");
    t2->add_option("--v-m", opt.v_m, "window margin override");
    t2->add_option("--stride", opt.ell_stride, "window-start stride override");
    t2->add_flag("--full", opt.full, "include m = 1000 (slow)");

    CLI::App* plot = app.add_subcommand("detector-plot",
                                        "detector path data for one simulated change");
    add_common(plot, opt);
    plot->add_option("--scenario", opt.scenario, "scenario index 1-3");
    plot->add_option("--m", opt.m, "historical segment length (default 200)");
    plot->add_option("--horizon", opt.horizon, "closed-end horizon T");
    plot->add_option("--alpha", opt.alpha, "significance level");
    plot->add_option("--c-alpha", opt.c_alpha, "critical value (default: computed)");
    plot->add_option("--burnin", opt.burnin, "simulation burn-in");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        // The config file seeds defaults; reparse so explicit flags win.
        if (!opt.config_path.empty()) {
            apply_config_file(opt);
            app.clear();
            app.parse(argc, argv);
        }
        if (fit->parsed()) return cmd_fit(opt);
        if (mon->parsed()) return cmd_monitor(opt);
        if (quant->parsed()) return cmd_quantiles(opt);
        if (t1->parsed()) return cmd_table1(opt);
        if (t2->parsed()) return cmd_table2(opt);
        if (plot->parsed()) return cmd_detector_plot(opt);
        return kExitConfig;
    } catch (const cpd::ParseError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    } catch (const CLI::Error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    }
}
