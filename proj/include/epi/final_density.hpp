#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "epi/convolution.hpp"
#include "epi/error.hpp"
#include "epi/kernel.hpp"
#include "epi/profile.hpp"

namespace epi {

struct FinalDensityResult {
    std::vector<double> rho;
    int iterations = 0;
    double residual = 0.0;  // max |T(rho) - rho|
};

struct FinalDensityOptions {
    double tol = 1e-12;
    int max_iterations = 100'000;
    /// Slack allowed in the per-iteration monotonicity and upper-bound checks.
    double check_slack = 1e-13;
};

/// Least solution above rho0 exp(-beta J*(rho0 + rho1)) of
///   rho = rho0 exp(-beta [J*(rho0 + rho1) - J*rho])
/// by monotone iteration from that lower bound.
inline FinalDensityResult solve_final_density(std::span<const double> rho0, std::span<const double> rho1,
                                              const DiscreteKernel& kernel, FinalDensityOptions opts = {}) {
    const std::size_t n = kernel.grid().n_sites();
    if (rho0.size() != n || rho1.size() != n) throw GridMismatch("profile size does not match grid");
    check_profiles(rho0, rho1);
    if (!(opts.tol > 0.0)) throw DomainError("tol must be positive");

    FinalDensityResult out;
    // No infection: every susceptible survives. The iteration below would
    // instead stop at the smallest fixed point, which can lie under rho0.
    if (std::all_of(rho1.begin(), rho1.end(), [](double v) { return v == 0.0; })) {
        out.rho.assign(rho0.begin(), rho0.end());
        return out;
    }

    const double beta = kernel.beta();
    Convolver conv(kernel);
    std::vector<double> total(n), j_total(n), j_rho(n), next(n);
    for (std::size_t x = 0; x < n; ++x) total[x] = rho0[x] + rho1[x];
    conv.apply(total, j_total);

    std::vector<double> rho(n);
    for (std::size_t x = 0; x < n; ++x) rho[x] = rho0[x] * std::exp(-beta * j_total[x]);

    for (int it = 1; it <= opts.max_iterations; ++it) {
        conv.apply(rho, j_rho);
        double update = 0.0;
        for (std::size_t x = 0; x < n; ++x) {
            next[x] = rho0[x] * std::exp(-beta * (j_total[x] - j_rho[x]));
            const double delta = next[x] - rho[x];
            if (delta < -opts.check_slack || next[x] > rho0[x] + opts.check_slack)
                throw NumericalError("final density iteration lost monotonicity at site " + std::to_string(x));
            update = std::max(update, std::abs(delta));
        }
        rho.swap(next);
        if (update < opts.tol) {
            out.rho = std::move(rho);
            out.iterations = it;
            out.residual = update;
            return out;
        }
        out.residual = update;
    }
    throw NoConvergence("final density iteration did not converge", out.residual);
}

/// max |rho - rho0 exp(-beta [J*(rho0 + rho1) - J*rho])|.
inline double final_density_residual(std::span<const double> rho, std::span<const double> rho0,
                                     std::span<const double> rho1, const DiscreteKernel& kernel) {
    const std::size_t n = kernel.grid().n_sites();
    if (rho.size() != n || rho0.size() != n || rho1.size() != n) throw GridMismatch("profile size does not match grid");
    Convolver conv(kernel);
    std::vector<double> total(n);
    for (std::size_t x = 0; x < n; ++x) total[x] = rho0[x] + rho1[x];
    const auto j_total = conv(total);
    const auto j_rho = conv(rho);
    double worst = 0.0;
    for (std::size_t x = 0; x < n; ++x)
        worst = std::max(worst, std::abs(rho[x] - rho0[x] * std::exp(-kernel.beta() * (j_total[x] - j_rho[x]))));
    return worst;
}

struct BetaEstimate {
    std::vector<std::optional<double>> per_site;  // empty outside the region and at degenerate sites
    std::vector<std::size_t> degenerate;          // region sites with rho = 1 and J*(1 - rho) = 0
    std::size_t used = 0;
    double mean = 0.0;
    double min = 0.0;
    double max = 0.0;
    double spread() const { return max - min; }
    bool has_estimate() const { return used > 0; }
};

/// Denominators below this are treated as 0/0.
inline constexpr double kDegenerateDenominator = 1e-14;

/// Estimates beta = -log rho(r) / J*(1 - rho)(r) on sites r of the region,
/// which must have been fully susceptible initially, with rho0 + rho1 = 1
/// everywhere. The kernel's own beta is ignored.
inline BetaEstimate infer_beta(std::span<const double> rho, const DiscreteKernel& kernel,
                               std::span<const std::size_t> region) {
    const std::size_t n = kernel.grid().n_sites();
    if (rho.size() != n) throw GridMismatch("profile size does not match grid");
    std::vector<double> deficit(n);
    for (std::size_t x = 0; x < n; ++x) {
        if (!(rho[x] > 0.0) || rho[x] > 1.0) throw InvalidProfile("final density must lie in (0, 1]");
        deficit[x] = 1.0 - rho[x];
    }
    const auto j_deficit = convolve(kernel, deficit);

    BetaEstimate est;
    est.per_site.assign(n, std::nullopt);
    double acc = 0.0;
    for (std::size_t x : region) {
        if (x >= n) throw GridMismatch("region site out of range");
        const double denom = j_deficit[x];
        if (denom <= kDegenerateDenominator) {
            est.degenerate.push_back(x);
            continue;
        }
        const double b = -std::log(rho[x]) / denom;
        est.per_site[x] = b;
        est.min = est.used == 0 ? b : std::min(est.min, b);
        est.max = est.used == 0 ? b : std::max(est.max, b);
        acc += b;
        ++est.used;
    }
    if (est.used > 0) est.mean = acc / static_cast<double>(est.used);
    return est;
}

struct InitialProfiles {
    std::vector<double> rho0;
    std::vector<double> rho1;
};

/// Inverts the final-density equation under rho0 + rho1 = 1:
/// rho0 = rho exp(beta (1 - J*rho)), rho1 = 1 - rho0.
inline InitialProfiles infer_initial_infected(std::span<const double> rho, const DiscreteKernel& kernel, double beta,
                                              double slack = 1e-9) {
    const std::size_t n = kernel.grid().n_sites();
    if (rho.size() != n) throw GridMismatch("profile size does not match grid");
    for (double v : rho)
        if (!(v > 0.0) || v > 1.0) throw InvalidProfile("final density must lie in (0, 1]");
    const auto j_rho = convolve(kernel, rho);
    InitialProfiles out{std::vector<double>(n), std::vector<double>(n)};
    for (std::size_t x = 0; x < n; ++x) {
        double r0 = rho[x] * std::exp(beta * (1.0 - j_rho[x]));
        if (r0 < -slack || r0 > 1.0 + slack)
            throw InconsistentInput("recovered rho0 = " + std::to_string(r0) + " at site " + std::to_string(x) +
                                    " is outside [0, 1]");
        r0 = std::clamp(r0, 0.0, 1.0);
        out.rho0[x] = r0;
        out.rho1[x] = 1.0 - r0;
    }
    return out;
}

}  // namespace epi
