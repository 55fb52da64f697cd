#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "epi/config.hpp"
#include "epi/experiments.hpp"
#include "epi/final_density.hpp"
#include "epi/hydro_pde.hpp"
#include "epi/meanfield.hpp"
#include "epi/output.hpp"
#include "epi/particle_sim.hpp"

namespace epi {

namespace detail {

inline void require_single(const ExperimentConfig& cfg, const std::string& command) {
    if (cfg.beta.size() != 1 || cfg.L.size() != 1)
        throw ConfigError(command + " takes a single beta and a single L");
}

using Clock = std::chrono::steady_clock;

inline double elapsed_ms(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Writers. Each takes finished results and emits its files; empty inputs give
// header-only files.

inline void write_hydro(const HydroSweepResult& r, const std::filesystem::path& dir) {
    ensure_directory(dir);
    CsvWriter conv(dir / "hydro_convergence.csv", "L,gamma,replica,err_i0,err_i1");
    for (const auto& row : r.rows) conv.row(row.L, row.gamma, row.replica, row.err_i0, row.err_i1);
    conv.close();
    CsvWriter sum(dir / "hydro_summary.csv", "L,gamma,median_err,q1_err,q3_err,mean_err");
    for (const auto& lv : r.levels) sum.row(lv.L, lv.gamma, lv.err.median, lv.err.q1, lv.err.q3, lv.err.mean);
    sum.close();
    CsvWriter curves(dir / "hydro_curves.csv", "L,t,pde_x,pde_y,sim_x_median,sim_y_median");
    for (const auto& c : r.curves) curves.row(c.L, c.t, c.pde_x, c.pde_y, c.sim_x_median, c.sim_y_median);
    curves.close();
}

inline void write_critical(const CriticalSweepResult& r, const std::filesystem::path& dir) {
    ensure_directory(dir);
    CsvWriter rows(dir / "critical.csv", "beta,alpha,L,replica,seed,x_inf,target");
    for (const auto& row : r.rows) rows.row(row.beta, row.alpha, row.L, row.replica, row.seed, row.x_inf, row.target);
    rows.close();
    CsvWriter sum(dir / "critical_summary.csv",
                  "beta,alpha,L,n_infected,realized_y0,median,q1,q3,mean,stddev,mean_deficit,deficit_bound,target");
    for (const auto& lv : r.levels)
        sum.row(lv.beta, lv.alpha, lv.L, lv.n_infected, lv.realized_y0, lv.x_inf.median, lv.x_inf.q1, lv.x_inf.q3,
                lv.x_inf.mean, lv.x_inf.stddev, lv.mean_deficit, lv.deficit_bound, lv.target);
    sum.close();
    CsvWriter hist(dir / "critical_histogram.csv", "beta,L,bin_lo,bin_hi,count");
    for (const auto& h : r.histogram) hist.row(h.beta, h.L, h.lo, h.hi, h.count);
    hist.close();
}

// ---------------------------------------------------------------------------
// Commands. Each validates the config, runs, writes its files and the
// manifest into cfg.out, and returns the manifest.

inline RunManifest cmd_simulate(const ExperimentConfig& cfg, std::ostream& log) {
    cfg.validate();
    detail::require_single(cfg, "simulate");
    const auto start = detail::Clock::now();
    const TorusGrid grid(cfg.d, cfg.L.front());
    auto kernel = std::make_shared<const DiscreteKernel>(build_kernel(cfg.kernel_spec(cfg.beta.front()), grid));
    const auto rho0 = parse_profile(cfg.rho0).sample(grid), rho1 = parse_profile(cfg.rho1).sample(grid);
    const auto times = sample_times(cfg.t_end, cfg.samples);

    struct Replica {
        std::uint64_t seed = 0;
        double x0 = 0.0, y0 = 0.0;
        std::vector<TrajectorySample> trajectory;
        AbsorptionResult final;
        double wall_ms = 0.0;
    };
    const auto M = static_cast<std::size_t>(cfg.replicas);
    std::vector<Replica> reps(M);
    parallel_for(M, cfg.threads, [&](std::size_t r) {
        const auto t0 = detail::Clock::now();
        Replica& rep = reps[r];
        rep.seed = derive_seed(cfg.seed, {kSimulateTag, static_cast<std::uint64_t>(cfg.L.front()),
                                          static_cast<std::uint64_t>(r)});
        auto state = make_initial_state(cfg, kernel, rho0, rho1, rep.seed);
        rep.x0 = state.susceptible_fraction();
        rep.y0 = state.infected_fraction();
        rep.trajectory = run_sampled(state, times);
        rep.final = run_to_absorption(state);
        if (cfg.timing) rep.wall_ms = detail::elapsed_ms(t0);
    });

    const std::filesystem::path dir(cfg.out);
    ensure_directory(dir);
    for (std::size_t r = 0; r < M; ++r) {
        const std::string name = M == 1 ? "trajectory.csv" : "trajectory_" + std::to_string(r) + ".csv";
        CsvWriter traj(dir / name, "t,x,y,z,events");
        for (const auto& s : reps[r].trajectory) traj.row(s.t, s.x, s.y, s.z, s.events);
        traj.close();
    }
    CsvWriter fin(dir / "final.csv", "replica,seed,x_inf,events,wall_ms");
    for (std::size_t r = 0; r < M; ++r)
        fin.row(r, reps[r].seed, reps[r].final.x_inf, reps[r].final.events, reps[r].wall_ms);
    fin.close();

    RunManifest m{cfg, {}};
    m.add("command", std::string("simulate"));
    m.add("version", std::string(kVersion));
    for (std::size_t r = 0; r < M; ++r) {
        const std::string p = "replica." + std::to_string(r) + ".";
        m.add(p + "seed", reps[r].seed);
        m.add(p + "x0", reps[r].x0);
        m.add(p + "y0", reps[r].y0);
    }
    if (cfg.timing) m.add("wall_ms", detail::elapsed_ms(start));
    m.write(dir);
    log << "simulate: " << M << " replica(s), L=" << grid.side() << ", outputs in " << dir.string() << '\n';
    return m;
}

inline RunManifest cmd_pde(const ExperimentConfig& cfg, std::ostream& log) {
    cfg.validate();
    detail::require_single(cfg, "pde");
    const auto start = detail::Clock::now();
    const double beta = cfg.beta.front();
    const TorusGrid grid(cfg.d, cfg.L.front());
    const auto kernel = build_kernel(cfg.kernel_spec(beta), grid);
    const auto rho0 = parse_profile(cfg.rho0).sample(grid), rho1 = parse_profile(cfg.rho1).sample(grid);
    const auto run = integrate_pde(rho0, rho1, kernel, {cfg.dt, cfg.t_end, cfg.sample_every});

    const std::filesystem::path dir(cfg.out);
    ensure_directory(dir);
    CsvWriter field(dir / "field.csv", "t,site_index,u0,u1");
    CsvWriter summary(dir / "pde_summary.csv", "t,mean_u0,mean_u1,max_resid_poq");
    double worst_resid = 0.0;
    for (const auto& f : run.samples) {
        for (std::size_t x = 0; x < f.u0.size(); ++x) field.row(f.t, x, f.u0[x], f.u1[x]);
        const double resid = max_abs(exp_identity_residual(f, rho0, rho1, kernel, beta));
        worst_resid = std::max(worst_resid, resid);
        summary.row(f.t, f.mean_u0(), f.mean_u1(), resid);
    }
    field.close();
    summary.close();

    RunManifest m{cfg, {}};
    m.add("command", std::string("pde"));
    m.add("version", std::string(kVersion));
    m.add("max_bound_violation", run.report.max_bound_violation);
    m.add("max_monotonicity_violation", run.report.max_monotonicity_violation);
    m.add("max_total_increase", run.report.max_total_increase);
    m.add("max_resid_poq", worst_resid);
    if (cfg.timing) m.add("wall_ms", detail::elapsed_ms(start));
    m.write(dir);
    log << "pde: " << run.samples.size() << " samples to t=" << cfg.t_end << ", max identity residual " << worst_resid
        << '\n';
    return m;
}

inline RunManifest cmd_final(const ExperimentConfig& cfg, std::ostream& log) {
    cfg.validate();
    detail::require_single(cfg, "final");
    const auto start = detail::Clock::now();
    const TorusGrid grid(cfg.d, cfg.L.front());
    const auto kernel = build_kernel(cfg.kernel_spec(cfg.beta.front()), grid);
    const auto rho0 = parse_profile(cfg.rho0).sample(grid), rho1 = parse_profile(cfg.rho1).sample(grid);
    const auto res = solve_final_density(rho0, rho1, kernel, {cfg.tol});

    const std::filesystem::path dir(cfg.out);
    ensure_directory(dir);
    CsvWriter out(dir / "final_density.csv", "site_index,rho0,rho1,rho_final");
    for (std::size_t x = 0; x < rho0.size(); ++x) out.row(x, rho0[x], rho1[x], res.rho[x]);
    out.close();

    RunManifest m{cfg, {}};
    m.add("command", std::string("final"));
    m.add("version", std::string(kVersion));
    m.add("iterations", res.iterations);
    m.add("residual", res.residual);
    if (cfg.timing) m.add("wall_ms", detail::elapsed_ms(start));
    m.write(dir);
    log << "final: converged in " << res.iterations << " iterations\n";
    return m;
}

inline RunManifest cmd_meanfield(const ExperimentConfig& cfg, std::ostream& log) {
    cfg.validate();
    const auto start = detail::Clock::now();
    const double rho0 = uniform_value(cfg.rho0), rho1 = uniform_value(cfg.rho1);

    const std::filesystem::path dir(cfg.out);
    ensure_directory(dir);
    const std::string header = "beta,rho0,rho1,x_inf,y_peak,x_hat";
    CsvWriter table(dir / "meanfield.csv", header);
    CsvWriter curves(dir / "meanfield_curves.csv", "beta,t,x,y,z");
    log << header << '\n';
    for (double beta : cfg.beta) {
        const meanfield::Params p{beta, rho0, rho1};
        const double x_inf = meanfield::final_size(p);
        const auto peak = rho1 > 0.0 ? meanfield::peak_infection(p, cfg.dt) : std::nullopt;
        const std::string y_peak = peak ? fmt17(peak->y_peak) : std::string();
        const double x_hat = meanfield::hat_x_infinity(beta).value;
        table.row(beta, rho0, rho1, x_inf, y_peak, x_hat);
        log << fmt17(beta) << ',' << fmt17(rho0) << ',' << fmt17(rho1) << ',' << fmt17(x_inf) << ',' << y_peak << ','
            << fmt17(x_hat) << '\n';
        const auto traj = meanfield::ode_integrate(p, cfg.dt, cfg.t_end);
        for (std::size_t k = 0; k < traj.size(); ++k)
            if (k % static_cast<std::size_t>(cfg.sample_every) == 0 || k + 1 == traj.size())
                curves.row(beta, traj[k].t, traj[k].x, traj[k].y, traj[k].z);
    }
    table.close();
    curves.close();

    RunManifest m{cfg, {}};
    m.add("command", std::string("meanfield"));
    m.add("version", std::string(kVersion));
    if (cfg.timing) m.add("wall_ms", detail::elapsed_ms(start));
    m.write(dir);
    return m;
}

/// Reads a final-density table (site_index,rho0,rho1,rho_final), estimates
/// beta on the sites with rho1 = 0, and reconstructs the initial profiles
/// with the configured beta.
inline RunManifest cmd_infer(const ExperimentConfig& cfg, std::ostream& log) {
    cfg.validate();
    detail::require_single(cfg, "infer");
    if (cfg.input.empty()) throw ConfigError("infer needs input = <final_density.csv>");
    const auto start = detail::Clock::now();
    const TorusGrid grid(cfg.d, cfg.L.front());
    const auto kernel = build_kernel(cfg.kernel_spec(cfg.beta.front()), grid);
    const CsvTable table = read_csv(cfg.input);
    if (table.rows.size() != grid.n_sites())
        throw GridMismatch(cfg.input + " has " + std::to_string(table.rows.size()) + " rows, grid " +
                           grid.describe() + " has " + std::to_string(grid.n_sites()) + " sites");
    const std::size_t c_site = table.column("site_index"), c_rho = table.column("rho_final");
    const std::size_t c_rho1 = table.column("rho1");
    std::vector<double> rho(grid.n_sites()), rho1(grid.n_sites());
    std::vector<bool> seen(grid.n_sites(), false);
    for (const auto& row : table.rows) {
        const double s = row[c_site];
        if (!(s >= 0.0) || s >= static_cast<double>(grid.n_sites()) || s != std::floor(s))
            throw InputError("bad site_index in " + cfg.input);
        const auto x = static_cast<std::size_t>(s);
        if (seen[x]) throw InputError("duplicate site_index in " + cfg.input);
        seen[x] = true;
        rho[x] = row[c_rho];
        rho1[x] = row[c_rho1];
    }
    std::vector<std::size_t> region;
    for (std::size_t x = 0; x < rho1.size(); ++x)
        if (rho1[x] == 0.0) region.push_back(x);

    const auto est = infer_beta(rho, kernel, region);
    const auto init = infer_initial_infected(rho, kernel, cfg.beta.front());

    const std::filesystem::path dir(cfg.out);
    ensure_directory(dir);
    CsvWriter eb(dir / "infer_beta.csv", "site_index,in_region,degenerate,beta_estimate");
    std::vector<char> in_region(grid.n_sites(), 0), degenerate(grid.n_sites(), 0);
    for (auto x : region) in_region[x] = 1;
    for (auto x : est.degenerate) degenerate[x] = 1;
    for (std::size_t x = 0; x < grid.n_sites(); ++x)
        eb.row(x, int(in_region[x]), int(degenerate[x]), est.per_site[x] ? fmt17(*est.per_site[x]) : std::string());
    eb.close();
    CsvWriter ei(dir / "infer_initial.csv", "site_index,rho0,rho1");
    for (std::size_t x = 0; x < grid.n_sites(); ++x) ei.row(x, init.rho0[x], init.rho1[x]);
    ei.close();

    RunManifest m{cfg, {}};
    m.add("command", std::string("infer"));
    m.add("version", std::string(kVersion));
    m.add("region_sites", static_cast<std::uint64_t>(region.size()));
    m.add("degenerate_sites", static_cast<std::uint64_t>(est.degenerate.size()));
    if (est.has_estimate()) {
        m.add("beta_mean", est.mean);
        m.add("beta_min", est.min);
        m.add("beta_max", est.max);
    }
    if (cfg.timing) m.add("wall_ms", detail::elapsed_ms(start));
    m.write(dir);
    if (est.has_estimate())
        log << "infer: beta mean " << fmt17(est.mean) << " spread " << fmt17(est.spread()) << " over " << est.used
            << " sites, " << est.degenerate.size() << " degenerate\n";
    else
        log << "infer: no usable sites (" << est.degenerate.size() << " degenerate)\n";
    return m;
}

inline RunManifest cmd_hydro_sweep(const ExperimentConfig& cfg, std::ostream& log) {
    const auto start = detail::Clock::now();
    const auto r = run_hydro_sweep(cfg);
    const std::filesystem::path dir(cfg.out);
    write_hydro(r, dir);
    RunManifest m{cfg, {}};
    m.add("command", std::string("hydro-sweep"));
    m.add("version", std::string(kVersion));
    m.add("slope", r.slope);
    m.add("pde_max_bound_violation", r.max_bound_violation);
    for (const auto& row : r.rows) {
        const std::string p = "L" + std::to_string(row.L) + ".replica." + std::to_string(row.replica) + ".";
        m.add(p + "seed", row.seed);
        m.add(p + "x0", row.x0);
        m.add(p + "y0", row.y0);
    }
    if (cfg.timing) m.add("wall_ms", detail::elapsed_ms(start));
    m.write(dir);
    for (const auto& lv : r.levels)
        log << "L=" << lv.L << " median err " << fmt17(lv.err.median) << " [" << fmt17(lv.err.q1) << ", "
            << fmt17(lv.err.q3) << "]\n";
    log << "log-log slope " << fmt17(r.slope) << '\n';
    return m;
}

inline RunManifest cmd_critical_sweep(const ExperimentConfig& cfg, std::ostream& log) {
    const auto start = detail::Clock::now();
    const auto r = run_critical_sweep(cfg);
    const std::filesystem::path dir(cfg.out);
    write_critical(r, dir);
    RunManifest m{cfg, {}};
    m.add("command", std::string("critical-sweep"));
    m.add("version", std::string(kVersion));
    for (const auto& lv : r.levels) {
        const std::string p = "beta" + fmt17(lv.beta) + ".L" + std::to_string(lv.L) + ".";
        m.add(p + "n_infected", static_cast<std::uint64_t>(lv.n_infected));
        m.add(p + "realized_y0", lv.realized_y0);
    }
    for (const auto& row : r.rows)
        m.add("beta" + fmt17(row.beta) + ".L" + std::to_string(row.L) + ".replica." + std::to_string(row.replica) +
                  ".seed",
              row.seed);
    if (cfg.timing) m.add("wall_ms", detail::elapsed_ms(start));
    m.write(dir);
    for (const auto& lv : r.levels)
        log << "beta=" << fmt17(lv.beta) << " L=" << lv.L << " median x_inf " << fmt17(lv.x_inf.median)
            << " target " << fmt17(lv.target) << '\n';
    return m;
}

inline const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names{"simulate",  "pde",         "final",         "meanfield",
                                                "infer",     "hydro-sweep", "critical-sweep"};
    return names;
}

inline RunManifest run_command(const std::string& name, const ExperimentConfig& cfg, std::ostream& log) {
    if (name == "simulate") return cmd_simulate(cfg, log);
    if (name == "pde") return cmd_pde(cfg, log);
    if (name == "final") return cmd_final(cfg, log);
    if (name == "meanfield") return cmd_meanfield(cfg, log);
    if (name == "infer") return cmd_infer(cfg, log);
    if (name == "hydro-sweep") return cmd_hydro_sweep(cfg, log);
    if (name == "critical-sweep") return cmd_critical_sweep(cfg, log);
    throw ConfigError("unknown command " + name);
}

}  // namespace epi
