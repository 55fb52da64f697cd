#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "epi/commands.hpp"
#include "oracles.hpp"

using namespace epi;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("epi_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

}  // namespace

TEST(Config, DefaultsFromEmptyText) {
    const auto c = parse_config_text("# nothing here\n\n");
    EXPECT_EQ(c.kernel, "meanfield");
    EXPECT_EQ(c.beta, std::vector<double>{2.0});
    EXPECT_EQ(c.L, std::vector<std::int64_t>{100});
    EXPECT_EQ(c.alpha, 0.25);
    EXPECT_EQ(c.init, InitMode::Product);
}

TEST(Config, ParsesListsAndRoundTrips) {
    const auto c = parse_config_text(
        "kernel = tophat:0.1  # comment\n"
        "beta = 0.5, 2\n"
        "L = 100,1000,10000\n"
        "d = 2\n"
        "init = exact\n"
        "timing = true\n"
        "dt = 0.0005\n"
        "rho1 = bump:0.5:0.1:0.2\n");
    EXPECT_EQ(c.kernel, "tophat:0.1");
    EXPECT_EQ(c.beta, (std::vector<double>{0.5, 2.0}));
    EXPECT_EQ(c.L, (std::vector<std::int64_t>{100, 1000, 10000}));
    EXPECT_EQ(c.d, 2);
    EXPECT_EQ(c.init, InitMode::Exact);
    EXPECT_TRUE(c.timing);
    const auto again = parse_config_text(c.to_text());
    EXPECT_EQ(again.to_text(), c.to_text());
    EXPECT_EQ(again.dt, 0.0005);
}

TEST(Config, RunKeysAreIgnored) {
    const auto c = parse_config_text("seed = 9\nrun.command = simulate\nrun.wall_ms = 12.5\n");
    EXPECT_EQ(c.seed, 9u);
}

TEST(Config, Errors) {
    EXPECT_THROW(parse_config_text("beta = 2\nbeta = 3\n"), ConfigError);
    EXPECT_THROW(parse_config_text("gamma = 2\n"), ConfigError);
    EXPECT_THROW(parse_config_text("beta = two\n"), ConfigError);
    EXPECT_THROW(parse_config_text("beta 2\n"), ConfigError);
    EXPECT_THROW(parse_config_text("L = 1000,100\n"), ConfigError);
    EXPECT_THROW(parse_config_text("dt = 0.5\n"), ConfigError);
    EXPECT_THROW(parse_config_text("replicas = 0\n"), ConfigError);
    EXPECT_THROW(parse_config_text("kernel = gauss:1\n"), ConfigError);
    EXPECT_THROW(parse_config_text("rho0 = wave:1\n"), ConfigError);
    EXPECT_THROW(parse_config_text("init = random\n"), ConfigError);
    EXPECT_THROW(parse_config_text("seed = -4\n"), ConfigError);
    EXPECT_THROW(load_config("/nonexistent/epi.cfg"), ConfigError);

    auto c = parse_config_text("alpha = 0.5\n");
    EXPECT_THROW(c.validate_critical(), ConfigError);
    c = parse_config_text("kernel = tophat:0.1\n");
    EXPECT_THROW(c.validate_critical(), ConfigError);

    EXPECT_EQ(uniform_value("const:0.25"), 0.25);
    EXPECT_THROW(uniform_value("cos:0.5:0.1"), ConfigError);
}

TEST(Stats, QuantilesAndSummary) {
    const std::vector<double> v{4.0, 1.0, 3.0, 2.0};
    EXPECT_DOUBLE_EQ(quantile(v, 0.5), 2.5);
    EXPECT_DOUBLE_EQ(quantile(v, 0.25), 1.75);
    EXPECT_DOUBLE_EQ(quantile(v, 0.75), 3.25);
    const auto s = summarize(v);
    EXPECT_DOUBLE_EQ(s.mean, 2.5);
    EXPECT_NEAR(s.stddev, std::sqrt(5.0 / 3.0), 1e-15);
    EXPECT_EQ(summarize({7.0}).median, 7.0);
    EXPECT_TRUE(std::isnan(summarize({}).median));
}

TEST(Stats, LogLogSlope) {
    const std::vector<double> x{100, 1000, 10000};
    std::vector<double> y;
    for (double v : x) y.push_back(3.0 / std::sqrt(v));
    EXPECT_NEAR(loglog_slope(x, y), -0.5, 1e-12);
    EXPECT_TRUE(std::isnan(loglog_slope({1.0}, {1.0})));
    EXPECT_TRUE(std::isnan(loglog_slope({1.0, 2.0}, {0.0, 1.0})));
}

TEST(SampleTimes, Endpoints) {
    const auto t = sample_times(10.0, 5);
    EXPECT_EQ(t, (std::vector<double>{0.0, 2.5, 5.0, 7.5, 10.0}));
}

TEST(Linearized, CriticalTimeAndStart) {
    const auto p = linearized_trajectory(2.0, 0.25, 1e-4, 0.0);
    EXPECT_NEAR(p.t_c, 0.25 * std::log(1e4), 1e-15);
    EXPECT_NEAR(p.t_c, 2.3026, 1e-4);
    EXPECT_NEAR(p.y, 0.1, 1e-15);
    EXPECT_NEAR(p.x, 0.9, 1e-15);
    EXPECT_NEAR(linearized_trajectory(2.0, 0.25, 1e-4, p.t_c).y, 1.0, 1e-12);
    const auto q = linearized_trajectory(3.0, 0.3, 1e-3, 0.0);
    EXPECT_NEAR(linearized_trajectory(3.0, 0.3, 1e-3, q.t_c).y, 1.0, 1e-12);
    EXPECT_THROW(linearized_trajectory(1.0, 0.25, 1e-4, 0.0), DomainError);
}

TEST(Linearized, TracksSimulationAtEarlyTimes) {
    ExperimentConfig cfg;
    cfg.beta = {2.0};
    cfg.L = {10000};
    const TorusGrid grid(1, 10000);
    auto kernel = std::make_shared<const DiscreteKernel>(build_kernel(cfg.kernel_spec(2.0), grid));
    const std::size_t n_i = critical_seed_count(grid, 0.25);
    const double t_c = linearized_trajectory(2.0, 0.25, grid.gamma(), 0.0).t_c;
    std::vector<double> times;
    for (double t = 0.0; t <= t_c - 2.0; t += 0.05) times.push_back(t);
    std::vector<std::vector<double>> y(times.size());
    for (std::uint64_t r = 0; r < 9; ++r) {
        auto s = init_exact_counts(kernel, grid.n_sites() - n_i, n_i, derive_seed(5, {kCriticalTag, r}));
        const auto traj = run_sampled(s, times);
        for (std::size_t k = 0; k < times.size(); ++k) y[k].push_back(traj[k].y);
    }
    for (std::size_t k = 0; k < times.size(); ++k) {
        const double lin = linearized_trajectory(2.0, 0.25, grid.gamma(), times[k]).y;
        EXPECT_LE(std::abs(quantile(y[k], 0.5) - lin), 0.2 * lin) << "t=" << times[k];
    }
}

TEST(Counts, ExactAndCritical) {
    EXPECT_EQ(exact_counts(100, 0.99, 0.01), (std::pair<std::size_t, std::size_t>{99, 1}));
    EXPECT_EQ(critical_seed_count(TorusGrid(1, 10000), 0.25), 1000u);
    EXPECT_EQ(critical_seed_count(TorusGrid(1, 100), 0.25), 32u);
}

TEST(ParallelFor, EachIndexOnceAndErrors) {
    std::vector<std::atomic<int>> hits(257);
    parallel_for(hits.size(), 4, [&](std::size_t i) { ++hits[i]; });
    for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
    EXPECT_THROW(parallel_for(50, 3,
                              [](std::size_t i) {
                                  if (i == 17) throw DomainError("boom");
                              }),
                 DomainError);
}

TEST(Writers, EmptyResultsGiveHeaders) {
    const auto dir = scratch_dir("empty_writers");
    write_hydro(HydroSweepResult{}, dir);
    write_critical(CriticalSweepResult{}, dir);
    EXPECT_EQ(slurp(dir / "hydro_convergence.csv"), "L,gamma,replica,err_i0,err_i1\n");
    EXPECT_EQ(slurp(dir / "critical.csv"), "beta,alpha,L,replica,seed,x_inf,target\n");
    EXPECT_EQ(read_csv(dir / "critical_histogram.csv").rows.size(), 0u);
}

TEST(Commands, ManifestReproducesConfig) {
    const auto dir = scratch_dir("manifest");
    auto cfg = parse_config_text("beta = 0.5,2\nrho0 = const:0.9\nrho1 = const:0.1\nt_end = 5\n");
    cfg.out = dir.string();
    std::ostringstream log;
    const auto m = cmd_meanfield(cfg, log);
    const auto again = load_config((dir / "manifest.txt").string());
    EXPECT_EQ(again.to_text(), cfg.to_text());
    const auto table = read_csv(dir / "meanfield.csv");
    ASSERT_EQ(table.rows.size(), 2u);
    EXPECT_NEAR(table.rows[0][table.column("x_inf")], oracle::final_size(0.5, 0.9, 0.1), 1e-12);
    EXPECT_NEAR(table.rows[1][table.column("x_hat")], oracle::hat_x(2.0), 1e-12);
    EXPECT_NE(log.str().find("beta,rho0,rho1,x_inf,y_peak,x_hat"), std::string::npos);
}

TEST(Commands, SimulateIsReproducible) {
    const auto a = scratch_dir("sim_a"), b = scratch_dir("sim_b");
    auto cfg = parse_config_text("kernel = tophat:0.05\nL = 400\nreplicas = 3\nthreads = 3\nt_end = 4\nsamples = 9\n");
    std::ostringstream log;
    cfg.out = a.string();
    cmd_simulate(cfg, log);
    auto again = load_config((a / "manifest.txt").string());
    again.out = b.string();
    cmd_simulate(again, log);
    for (const char* f : {"final.csv", "trajectory_0.csv", "trajectory_2.csv"}) EXPECT_EQ(slurp(a / f), slurp(b / f));
    EXPECT_EQ(slurp(a / "manifest.txt").substr(slurp(a / "manifest.txt").find("run.")),
              slurp(b / "manifest.txt").substr(slurp(b / "manifest.txt").find("run.")));
}

TEST(Commands, FinalThenInferRoundTrip) {
    const auto dir = scratch_dir("final_infer");
    // rho0 = 1 - rho1 everywhere
    auto cfg = parse_config_text(
        "kernel = tophat:0.15\nbeta = 1.5\nL = 64\nrho0 = bump:0.5:0.2:-0.3:1\nrho1 = bump:0.5:0.2:0.3\ntol = 1e-13\n");
    cfg.out = (dir / "final").string();
    std::ostringstream log;
    cmd_final(cfg, log);
    cfg.input = (dir / "final" / "final_density.csv").string();
    cfg.out = (dir / "infer").string();
    const auto m = cmd_infer(cfg, log);
    double beta_mean = 0.0;
    for (const auto& [k, v] : m.entries)
        if (k == "run.beta_mean") beta_mean = std::stod(v);
    EXPECT_NEAR(beta_mean, 1.5, 1e-6);
    const auto init = read_csv(dir / "infer" / "infer_initial.csv");
    const auto fin = read_csv(dir / "final" / "final_density.csv");
    for (std::size_t x = 0; x < 64; ++x)
        EXPECT_NEAR(init.rows[x][init.column("rho1")], fin.rows[x][fin.column("rho1")], 1e-8);
}

TEST(Commands, SingleRunNeedsOneBetaAndL) {
    auto cfg = parse_config_text("beta = 1,2\n");
    std::ostringstream log;
    EXPECT_THROW(cmd_pde(cfg, log), ConfigError);
    EXPECT_THROW(run_command("nope", cfg, log), ConfigError);
}

#ifdef EPI_CLI_PATH
TEST(Cli, ExitCodes) {
    const auto dir = scratch_dir("cli");
    auto run = [&](const std::string& args) {
        const std::string cmd = std::string(EPI_CLI_PATH) + " " + args + " > " + (dir / "log.txt").string() + " 2>&1";
        const int status = std::system(cmd.c_str());
        return WEXITSTATUS(status);
    };
    write_file(dir / "ok.cfg", "beta = 2\nrho0 = const:0.99\nrho1 = const:0.01\nt_end = 2\n");
    write_file(dir / "bad.cfg", "beta = oops\n");
    write_file(dir / "unstable.cfg", "beta = 60\nL = 4\nrho0 = const:0.5\nrho1 = const:0.5\ndt = 0.1\nt_end = 5\n");
    write_file(dir / "blocker", "not a directory\n");
    EXPECT_EQ(run("meanfield --config " + (dir / "ok.cfg").string() + " --out " + (dir / "o").string()), 0);
    EXPECT_TRUE(fs::exists(dir / "o" / "manifest.txt"));
    EXPECT_EQ(run("meanfield --config " + (dir / "bad.cfg").string()), 2);
    EXPECT_EQ(run("meanfield --config " + (dir / "missing.cfg").string()), 2);
    EXPECT_EQ(run("meanfield"), 2);
    EXPECT_EQ(run("pde --config " + (dir / "unstable.cfg").string() + " --out " + (dir / "u").string()), 3);
    EXPECT_EQ(run("meanfield --config " + (dir / "ok.cfg").string() + " --out " + (dir / "blocker" / "x").string()),
              1);
}
#endif
