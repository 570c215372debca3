#include "cpd/critical_values.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "cpd/rng.hpp"

namespace cpd {

namespace {

constexpr int kCacheVersion = 1;

std::uint64_t coord_stream(std::uint64_t path_index, int coord) {
    return (path_index << 8) | static_cast<std::uint64_t>(coord);
}

}  // namespace

int QuantileRequest::effective_grid() const {
    if (grid_points > 0) return grid_points;
    return static_cast<int>(std::llround(2000.0 * horizon));
}

double draw_U(int d, double horizon, int grid_points, std::uint64_t seed,
              std::uint64_t path_index, const std::function<double(double)>& b0) {
    if (horizon <= 1.0) throw std::invalid_argument("horizon must exceed 1");
    if (d < 1) throw std::invalid_argument("dimension must be >= 1");
    if (grid_points < 100) throw std::invalid_argument("grid_points must be >= 100");

    // Keep t=1 on the grid: fix the number of steps per unit time.
    const int steps_per_unit =
        std::max(1, static_cast<int>(std::llround(grid_points / horizon)));
    const double dt = 1.0 / steps_per_unit;
    const double sqrt_dt = std::sqrt(dt);
    const int n_steps = static_cast<int>(std::ceil(horizon * steps_per_unit));

    std::vector<RngStream> streams;
    streams.reserve(static_cast<std::size_t>(d));
    for (int c = 0; c < d; ++c) streams.emplace_back(seed, coord_stream(path_index, c));

    std::vector<double> w(static_cast<std::size_t>(d), 0.0);
    std::vector<double> w1(static_cast<std::size_t>(d), 0.0);
    double running_max = 0.0;  // max over s in (1, t) of ||W(s) - s W(1)|| / b0(s)
    double sup = 0.0;
    for (int i = 1; i <= n_steps; ++i) {
        const double t = i * dt;
        if (i > steps_per_unit) {
            // Candidate at time t uses s strictly below t.
            sup = std::max(sup, running_max / std::min(t, horizon));
        }
        for (int c = 0; c < d; ++c) {
            w[static_cast<std::size_t>(c)] += sqrt_dt * streams[static_cast<std::size_t>(c)].gaussian();
        }
        if (i == steps_per_unit) w1 = w;
        if (i > steps_per_unit && i < n_steps) {
            double norm2 = 0.0;
            for (int c = 0; c < d; ++c) {
                const double dev = w[static_cast<std::size_t>(c)] -
                                   t * w1[static_cast<std::size_t>(c)];
                norm2 += dev * dev;
            }
            const double scaled = std::sqrt(norm2) / (b0 ? b0(t) : 1.0);
            running_max = std::max(running_max, scaled);
        }
    }
    return sup;
}

std::vector<double> draw_U_batch_serial(const QuantileRequest& req,
                                        const std::function<double(double)>& b0) {
    if (req.replications < 1) throw std::invalid_argument("replications must be >= 1");
    std::vector<double> out(static_cast<std::size_t>(req.replications));
    for (int r = 0; r < req.replications; ++r) {
        out[static_cast<std::size_t>(r)] =
            draw_U(req.d, req.horizon, req.effective_grid(), req.seed,
                   static_cast<std::uint64_t>(r), b0);
    }
    return out;
}

std::vector<double> draw_U_batch(const QuantileRequest& req,
                                 const std::function<double(double)>& b0) {
    if (req.replications < 1) throw std::invalid_argument("replications must be >= 1");
    std::vector<double> out(static_cast<std::size_t>(req.replications));
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int r = 0; r < req.replications; ++r) {
        out[static_cast<std::size_t>(r)] =
            draw_U(req.d, req.horizon, req.effective_grid(), req.seed,
                   static_cast<std::uint64_t>(r), b0);
    }
    return out;
}

namespace {

nlohmann::json request_key(const QuantileRequest& req) {
    return nlohmann::json{{"version", kCacheVersion},
                          {"d", req.d},
                          {"T", req.horizon},
                          {"alpha", req.alpha},
                          {"grid_points", req.effective_grid()},
                          {"replications", req.replications},
                          {"seed", req.seed}};
}

bool cache_lookup(const std::string& path, const nlohmann::json& key,
                  QuantileResult& out) {
    std::ifstream in(path);
    if (!in) return false;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.contains("key") || rec["key"] != key) continue;
        out.c_alpha = rec["c_alpha"].get<double>();
        out.mc_stderr = rec["mc_stderr"].get<double>();
        out.stderr_reliable = rec.value("stderr_reliable", true);
        return true;
    }
    return false;
}

bool cache_append(const std::string& path, const nlohmann::json& key,
                  const QuantileResult& result) {
    std::ofstream out(path, std::ios::app);
    if (!out) return false;
    nlohmann::json rec{{"key", key},
                       {"c_alpha", result.c_alpha},
                       {"mc_stderr", result.mc_stderr},
                       {"stderr_reliable", result.stderr_reliable}};
    out << rec.dump() << '\n';
    return static_cast<bool>(out);
}

}  // namespace

QuantileResult quantile_c_alpha(const QuantileRequest& req, const std::string& cache_path) {
    if (req.alpha <= 0.0 || req.alpha >= 1.0) {
        throw std::invalid_argument("alpha must lie in (0,1)");
    }
    if (req.replications < 1000) {
        throw std::invalid_argument("replications must be >= 1000");
    }
    if (req.effective_grid() < 100) {
        throw std::invalid_argument("grid_points must be >= 100");
    }

    QuantileResult result;
    result.request = req;
    const nlohmann::json key = request_key(req);
    if (!cache_path.empty() && cache_lookup(cache_path, key, result)) {
        return result;
    }

    std::vector<double> draws = draw_U_batch(req);
    std::sort(draws.begin(), draws.end());
    const double n = static_cast<double>(req.replications);
    const auto order_stat = [&draws](long rank) {  // 1-based, clamped
        rank = std::clamp<long>(rank, 1, static_cast<long>(draws.size()));
        return draws[static_cast<std::size_t>(rank - 1)];
    };
    const long rank = static_cast<long>(std::ceil((1.0 - req.alpha) * n));
    result.c_alpha = order_stat(rank);

    // Binomial bracket around the order statistic (one-sigma ranks).
    const double spread = std::sqrt(n * req.alpha * (1.0 - req.alpha));
    const long lo = static_cast<long>(std::floor((1.0 - req.alpha) * n - spread));
    const long hi = static_cast<long>(std::ceil((1.0 - req.alpha) * n + spread));
    result.stderr_reliable = lo >= 1 && hi <= static_cast<long>(draws.size());
    result.mc_stderr = (order_stat(hi) - order_stat(lo)) / 2.0;

    if (!cache_path.empty()) {
        result.cache_warning = !cache_append(cache_path, key, result);
    }
    return result;
}

}  // namespace cpd
