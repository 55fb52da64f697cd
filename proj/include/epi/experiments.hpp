#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "epi/config.hpp"
#include "epi/hydro_pde.hpp"
#include "epi/meanfield.hpp"
#include "epi/particle_sim.hpp"
#include "epi/rng.hpp"

namespace epi {

// Stream tags mixed into derive_seed so different experiment kinds never
// share replica streams.
inline constexpr std::uint64_t kSimulateTag = 1;
inline constexpr std::uint64_t kHydroTag = 2;
inline constexpr std::uint64_t kCriticalTag = 3;

/// Runs f(0), ..., f(count - 1) on up to `threads` workers. Each index is
/// claimed exactly once; the first exception is rethrown after all workers
/// stop.
inline void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& f) {
    const auto workers = static_cast<std::size_t>(std::max(1, threads));
    if (workers == 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < count;) {
            try {
                f(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = count;
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < std::min(workers, count); ++w) pool.emplace_back(work);
    }
    if (failure) std::rethrow_exception(failure);
}

struct Summary {
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation; 0 for one value
};

/// Quantile with linear interpolation between order statistics.
inline double quantile(std::vector<double> v, double q) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline Summary summarize(const std::vector<double>& v) {
    Summary s;
    if (v.empty()) {
        s.median = s.q1 = s.q3 = s.mean = std::numeric_limits<double>::quiet_NaN();
        return s;
    }
    s.median = quantile(v, 0.5);
    s.q1 = quantile(v, 0.25);
    s.q3 = quantile(v, 0.75);
    double acc = 0.0;
    for (double x : v) acc += x;
    s.mean = acc / static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - s.mean) * (x - s.mean);
        s.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return s;
}

/// Least-squares slope of log y against log x.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) return std::numeric_limits<double>::quiet_NaN();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) return std::numeric_limits<double>::quiet_NaN();
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

/// Uniformly spaced times 0 = t_0 < ... < t_{count-1} = t_end.
inline std::vector<double> sample_times(double t_end, int count) {
    std::vector<double> t(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) t[static_cast<std::size_t>(k)] = t_end * k / (count - 1);
    t.back() = t_end;
    return t;
}

struct LinearizedPoint {
    double x = 0.0;
    double y = 0.0;
    double t_c = 0.0;
};

/// Linearization around the all-susceptible state with initial infected
/// fraction gamma^alpha:
///   y(t) = gamma^alpha e^{(beta-1)t}
///   x(t) = 1 - beta/(beta-1) gamma^alpha e^{(beta-1)t} + gamma^alpha/(beta-1)
/// and t_c = alpha/(beta-1) log(1/gamma), where y(t_c) = 1.
inline LinearizedPoint linearized_trajectory(double beta, double alpha, double gamma, double t) {
    if (beta == 1.0) throw DomainError("linearized trajectory undefined at beta = 1");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw DomainError("gamma must lie in (0, 1]");
    const double ga = std::pow(gamma, alpha);
    const double growth = std::exp((beta - 1.0) * t);
    return {1.0 - beta / (beta - 1.0) * ga * growth + ga / (beta - 1.0), ga * growth,
            alpha / (beta - 1.0) * std::log(1.0 / gamma)};
}

/// Initial counts for exact placement from uniform densities.
inline std::pair<std::size_t, std::size_t> exact_counts(std::size_t n_sites, double rho0, double rho1) {
    const auto n_s = static_cast<std::size_t>(std::llround(rho0 * static_cast<double>(n_sites)));
    const auto n_i = static_cast<std::size_t>(std::llround(rho1 * static_cast<double>(n_sites)));
    return {n_s, n_i};
}

/// round(gamma^alpha L^d): infected seed count for the critical experiments.
inline std::size_t critical_seed_count(const TorusGrid& grid, double alpha) {
    return static_cast<std::size_t>(
        std::llround(std::pow(grid.gamma(), alpha) * static_cast<double>(grid.n_sites())));
}

inline EpidemicState make_initial_state(const ExperimentConfig& cfg, std::shared_ptr<const DiscreteKernel> kernel,
                                        std::span<const double> rho0, std::span<const double> rho1,
                                        std::uint64_t seed) {
    if (cfg.init == InitMode::Product) return init_random(std::move(kernel), rho0, rho1, seed);
    const auto [n_s, n_i] = exact_counts(kernel->grid().n_sites(), uniform_value(cfg.rho0), uniform_value(cfg.rho1));
    const std::size_t infected = cfg.n_infected >= 0 ? static_cast<std::size_t>(cfg.n_infected) : n_i;
    return init_exact_counts(std::move(kernel), n_s, infected, seed);
}

// ---------------------------------------------------------------------------
// Hydrodynamic convergence sweep

struct HydroRow {
    std::int64_t L = 0;
    double gamma = 0.0;
    int replica = 0;
    std::uint64_t seed = 0;
    double err_i0 = 0.0;
    double err_i1 = 0.0;
    double x0 = 0.0;  // realized initial susceptible fraction
    double y0 = 0.0;
    double err() const { return std::max(err_i0, err_i1); }
};

struct HydroLevel {
    std::int64_t L = 0;
    double gamma = 0.0;
    Summary err;
};

struct HydroCurvePoint {
    std::int64_t L = 0;
    double t = 0.0;
    double pde_x = 0.0;
    double pde_y = 0.0;
    double sim_x_median = 0.0;
    double sim_y_median = 0.0;
};

struct HydroSweepResult {
    std::vector<HydroRow> rows;
    std::vector<HydroLevel> levels;
    std::vector<HydroCurvePoint> curves;
    double slope = std::numeric_limits<double>::quiet_NaN();
    double max_bound_violation = 0.0;
};

/// For each L: solves the PDE once, runs the replicas, and records
/// err_i = max over sample times and test functions G of
/// |<pi^{gamma,i}, G> - gamma^d sum_x u_i(t, gamma x) G(gamma x)|.
inline HydroSweepResult run_hydro_sweep(const ExperimentConfig& cfg) {
    cfg.validate();
    if (cfg.beta.size() != 1) throw ConfigError("hydro sweeps take a single beta");
    const double beta = cfg.beta.front();
    const auto times = sample_times(cfg.t_end, cfg.samples);
    const auto tests = parse_test_functions(cfg.test_functions, cfg.d);
    const Profile p0 = parse_profile(cfg.rho0), p1 = parse_profile(cfg.rho1);

    HydroSweepResult result;
    std::vector<double> level_L, level_err;
    for (const std::int64_t L : cfg.L) {
        const TorusGrid grid(cfg.d, L);
        auto kernel = std::make_shared<const DiscreteKernel>(build_kernel(cfg.kernel_spec(beta), grid));
        const auto rho0 = p0.sample(grid), rho1 = p1.sample(grid);

        std::vector<std::vector<double>> g_values;
        for (const auto& g : tests) {
            std::vector<double> v(grid.n_sites());
            for (std::size_t x = 0; x < v.size(); ++x) v[x] = g.fn(grid.position(x));
            g_values.push_back(std::move(v));
        }
        const auto pde = integrate_pde_at(rho0, rho1, *kernel, cfg.dt, times);
        result.max_bound_violation = std::max(result.max_bound_violation, pde.report.worst());
        // riemann[i][k][g]
        std::vector<std::vector<double>> riemann0(times.size()), riemann1(times.size());
        for (std::size_t k = 0; k < times.size(); ++k) {
            for (const auto& g : g_values) {
                double a0 = 0.0, a1 = 0.0;
                for (std::size_t x = 0; x < g.size(); ++x) {
                    a0 += pde.samples[k].u0[x] * g[x];
                    a1 += pde.samples[k].u1[x] * g[x];
                }
                riemann0[k].push_back(a0 * grid.cell_volume());
                riemann1[k].push_back(a1 * grid.cell_volume());
            }
        }

        const auto M = static_cast<std::size_t>(cfg.replicas);
        std::vector<HydroRow> rows(M);
        std::vector<std::vector<TrajectorySample>> trajectories(M);
        parallel_for(M, cfg.threads, [&](std::size_t r) {
            const std::uint64_t seed =
                derive_seed(cfg.seed, {kHydroTag, static_cast<std::uint64_t>(L), static_cast<std::uint64_t>(r)});
            auto state = make_initial_state(cfg, kernel, rho0, rho1, seed);
            HydroRow row{L, grid.gamma(), static_cast<int>(r), seed, 0.0, 0.0, state.susceptible_fraction(),
                         state.infected_fraction()};
            auto traj = run_sampled(state, times, tests);
            for (std::size_t k = 0; k < times.size(); ++k) {
                for (std::size_t g = 0; g < tests.size(); ++g) {
                    row.err_i0 = std::max(row.err_i0, std::abs(traj[k].avg_susceptible[g] - riemann0[k][g]));
                    row.err_i1 = std::max(row.err_i1, std::abs(traj[k].avg_infected[g] - riemann1[k][g]));
                }
            }
            rows[r] = row;
            trajectories[r] = std::move(traj);
        });

        std::vector<double> errs;
        for (const auto& row : rows) errs.push_back(row.err());
        const HydroLevel level{L, grid.gamma(), summarize(errs)};
        level_L.push_back(static_cast<double>(L));
        level_err.push_back(level.err.median);
        result.levels.push_back(level);

        for (std::size_t k = 0; k < times.size(); ++k) {
            std::vector<double> xs, ys;
            for (const auto& traj : trajectories) {
                xs.push_back(traj[k].x);
                ys.push_back(traj[k].y);
            }
            result.curves.push_back({L, times[k], pde.samples[k].mean_u0(), pde.samples[k].mean_u1(),
                                     quantile(xs, 0.5), quantile(ys, 0.5)});
        }
        result.rows.insert(result.rows.end(), rows.begin(), rows.end());
    }
    result.slope = loglog_slope(level_L, level_err);
    return result;
}

// ---------------------------------------------------------------------------
// Critical sweep

struct CriticalRow {
    double beta = 0.0;
    double alpha = 0.0;
    std::int64_t L = 0;
    int replica = 0;
    std::uint64_t seed = 0;
    double x_inf = 0.0;
    double target = 0.0;
    std::uint64_t events = 0;
};

struct CriticalLevel {
    double beta = 0.0;
    double alpha = 0.0;
    std::int64_t L = 0;
    std::size_t n_infected = 0;
    double realized_y0 = 0.0;
    double target = 0.0;
    Summary x_inf;
    double mean_deficit = 0.0;  // mean of 1 - x_inf
    /// 2 gamma^alpha / (1 - beta) for beta < 1, NaN otherwise.
    double deficit_bound = std::numeric_limits<double>::quiet_NaN();
};

struct HistogramBin {
    double beta = 0.0;
    std::int64_t L = 0;
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;
};

struct CriticalSweepResult {
    std::vector<CriticalRow> rows;
    std::vector<CriticalLevel> levels;
    std::vector<HistogramBin> histogram;
};

inline constexpr int kHistogramBins = 20;

/// Theoretical limit of x(inf) under gamma^alpha seeding: 1 below the
/// threshold, the small root of x = exp(beta (x - 1)) above it.
inline double critical_target(double beta) { return meanfield::hat_x_infinity(beta).value; }

inline CriticalSweepResult run_critical_sweep(const ExperimentConfig& cfg) {
    cfg.validate_critical();
    CriticalSweepResult result;
    for (std::size_t b = 0; b < cfg.beta.size(); ++b) {
        const double beta = cfg.beta[b];
        const double target = critical_target(beta);
        for (const std::int64_t L : cfg.L) {
            const TorusGrid grid(cfg.d, L);
            auto kernel = std::make_shared<const DiscreteKernel>(build_kernel(cfg.kernel_spec(beta), grid));
            const std::size_t n = grid.n_sites();
            const std::size_t n_i =
                cfg.n_infected >= 0 ? static_cast<std::size_t>(cfg.n_infected) : critical_seed_count(grid, cfg.alpha);
            if (n_i > n) throw CountOverflow("n_infected exceeds the number of sites");
            const auto M = static_cast<std::size_t>(cfg.replicas);
            std::vector<CriticalRow> rows(M);
            parallel_for(M, cfg.threads, [&](std::size_t r) {
                const std::uint64_t seed = derive_seed(cfg.seed, {kCriticalTag, static_cast<std::uint64_t>(b),
                                                                  static_cast<std::uint64_t>(L),
                                                                  static_cast<std::uint64_t>(r)});
                auto state = init_exact_counts(kernel, n - n_i, n_i, seed);
                const auto fin = run_to_absorption(state);
                rows[r] = {beta, cfg.alpha, L, static_cast<int>(r), seed, fin.x_inf, target, fin.events};
            });

            std::vector<double> xs, deficits;
            for (const auto& row : rows) {
                xs.push_back(row.x_inf);
                deficits.push_back(1.0 - row.x_inf);
            }
            CriticalLevel level{beta, cfg.alpha, L, n_i, static_cast<double>(n_i) / static_cast<double>(n), target,
                                summarize(xs), summarize(deficits).mean};
            if (beta < 1.0) level.deficit_bound = 2.0 * std::pow(grid.gamma(), cfg.alpha) / (1.0 - beta);
            result.levels.push_back(level);

            std::vector<std::size_t> counts(kHistogramBins, 0);
            for (double x : xs) {
                auto bin = static_cast<std::size_t>(x * kHistogramBins);
                ++counts[std::min<std::size_t>(bin, kHistogramBins - 1)];
            }
            for (int k = 0; k < kHistogramBins; ++k)
                result.histogram.push_back({beta, L, static_cast<double>(k) / kHistogramBins,
                                            static_cast<double>(k + 1) / kHistogramBins,
                                            counts[static_cast<std::size_t>(k)]});
            result.rows.insert(result.rows.end(), rows.begin(), rows.end());
        }
    }
    return result;
}

}  // namespace epi
