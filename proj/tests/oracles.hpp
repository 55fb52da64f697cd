#pragma once

// Independent reference computations for the tests. Nothing here calls the
// solver code it is used to check.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <boost/math/special_functions/lambert_w.hpp>

#include "epi/kernel.hpp"
#include "epi/torus_grid.hpp"

namespace oracle {

/// Root of x = rho0 exp(-beta (rho0 + rho1 - x)) in (0, rho0):
/// x = -W0(-beta rho0 exp(-beta (rho0 + rho1))) / beta.
inline double final_size(double beta, double rho0, double rho1) {
    if (rho1 == 0.0) return rho0;
    const double arg = -beta * rho0 * std::exp(-beta * (rho0 + rho1));
    return -boost::math::lambert_w0(arg) / beta;
}

/// Small root of x = exp(beta (x - 1)) for beta > 1: -W0(-beta e^{-beta}) / beta.
inline double hat_x(double beta) {
    if (beta <= 1.0) return 1.0;
    return -boost::math::lambert_w0(-beta * std::exp(-beta)) / beta;
}

/// (J*f)(x) = gamma^d sum_y w[x - y] f(y), by the definition: O(n^2).
inline std::vector<double> convolve(const epi::DiscreteKernel& k, const std::vector<double>& f) {
    const auto& g = k.grid();
    const std::size_t n = g.n_sites();
    std::vector<double> out(n, 0.0);
    for (std::size_t x = 0; x < n; ++x) {
        double acc = 0.0;
        for (std::size_t y = 0; y < n; ++y) acc += k.weight(g.add(x, y, -1)) * f[y];
        out[x] = acc * g.cell_volume();
    }
    return out;
}

/// Number of lattice displacements z on the d-dimensional torus of side L
/// with minimal-image |z| <= r (lattice units), by enumeration of the box.
inline std::size_t ball_count(int d, std::int64_t L, double r) {
    std::size_t count = 0;
    const std::int64_t lo = -((L - 1) / 2), hi = L / 2;
    if (d == 1) {
        for (std::int64_t a = lo; a <= hi; ++a)
            if (double(a * a) <= r * r * (1 + 1e-12)) ++count;
    } else {
        for (std::int64_t a = lo; a <= hi; ++a)
            for (std::int64_t b = lo; b <= hi; ++b)
                if (double(a * a + b * b) <= r * r * (1 + 1e-12)) ++count;
    }
    return count;
}

/// Half-width of a 3-sigma interval for the fraction of successes in n
/// Bernoulli(p) trials.
inline double binomial_3sigma(double p, std::size_t n) { return 3.0 * std::sqrt(p * (1.0 - p) / double(n)); }

/// Smooth random profile pair on the grid with rho0, rho1 >= 0 and
/// rho0 + rho1 <= 1: a random trigonometric rho0 and a random wrapped
/// Gaussian bump for rho1, scaled to fit.
struct ProfilePair {
    std::vector<double> rho0, rho1;
};

inline ProfilePair random_profiles(const epi::TorusGrid& g, std::mt19937_64& gen, double rho1_max = 0.2) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double two_pi = 6.283185307179586;
    const double mean = 0.5 + 0.4 * u(gen);
    const double amp = 0.3 * u(gen) * std::min(mean, 1.0 - mean);
    const double phase = two_pi * u(gen);
    const int freq = 1 + int(u(gen) * 2.0);
    const double h = rho1_max * (0.2 + 0.8 * u(gen));
    const double w = 0.05 + 0.15 * u(gen);
    std::vector<double> center(static_cast<std::size_t>(g.dimension()));
    for (auto& c : center) c = u(gen);
    ProfilePair p{std::vector<double>(g.n_sites()), std::vector<double>(g.n_sites())};
    for (std::size_t x = 0; x < g.n_sites(); ++x) {
        const auto r = g.position(x);
        double s = 0.0, d2 = 0.0;
        for (std::size_t k = 0; k < r.size(); ++k) {
            s += std::cos(two_pi * freq * r[k] + phase);
            double dk = r[k] - center[k];
            dk -= std::round(dk);
            d2 += dk * dk;
        }
        const double r0 = mean + amp * s / double(r.size());
        const double r1 = h * std::exp(-d2 / (2 * w * w));
        p.rho0[x] = r0;
        p.rho1[x] = std::min(r1, 1.0 - r0);
    }
    return p;
}

}  // namespace oracle
