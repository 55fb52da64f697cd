#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "epi/error.hpp"

namespace epi::meanfield {

struct Params {
    double beta = 1.0;
    double rho0 = 1.0;  // initial susceptible density
    double rho1 = 0.0;  // initial infected density

    void validate() const {
        if (!(beta > 0.0) || !std::isfinite(beta)) throw DomainError("beta must be positive");
        if (!(rho0 >= 0.0 && rho1 >= 0.0 && rho0 + rho1 <= 1.0 + 1e-15))
            throw DomainError("need rho0, rho1 >= 0 and rho0 + rho1 <= 1");
    }
};

struct State {
    double t = 0.0;
    double x = 0.0;  // susceptible
    double y = 0.0;  // infected
    double z = 0.0;  // removed
};

/// Bisection for a sign change of f on [lo, hi]; the signs at the endpoints
/// are checked, and the loop runs until the bracket stops shrinking.
template <class F>
double bisect(F&& f, double lo, double hi) {
    double flo = f(lo);
    const double fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo < 0.0) == (fhi < 0.0))
        throw DomainError("root not bracketed on [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    for (int i = 0; i < 2000; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double fm = f(mid);
        if (fm == 0.0) return mid;
        if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

/// Classical RK4 for x' = -beta x y, y' = beta x y - y, z' = y. Returns every
/// step, including t = 0; the final step is shortened to land on t_end.
inline std::vector<State> ode_integrate(const Params& p, double dt, double t_end) {
    p.validate();
    if (!(dt > 0.0) || dt > 0.1) throw DomainError("ode_integrate needs 0 < dt <= 0.1");
    if (!(t_end >= 0.0)) throw DomainError("t_end must be nonnegative");
    auto rhs = [&](double x, double y, double& dx, double& dy) {
        const double inf = p.beta * x * y;
        dx = -inf;
        dy = inf - y;
    };
    std::vector<State> out;
    State s{0.0, p.rho0, p.rho1, 1.0 - p.rho0 - p.rho1};
    out.push_back(s);
    const auto steps = static_cast<long>(std::ceil(t_end / dt - 1e-9));
    for (long k = 0; k < steps; ++k) {
        const double h = std::min(dt, t_end - s.t);
        double k1x, k1y, k2x, k2y, k3x, k3y, k4x, k4y;
        rhs(s.x, s.y, k1x, k1y);
        rhs(s.x + 0.5 * h * k1x, s.y + 0.5 * h * k1y, k2x, k2y);
        rhs(s.x + 0.5 * h * k2x, s.y + 0.5 * h * k2y, k3x, k3y);
        rhs(s.x + h * k3x, s.y + h * k3y, k4x, k4y);
        const double dx = h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        const double dy = h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
        s.x += dx;
        s.y += dy;
        s.z -= dx + dy;  // z' = y = -(x' + y')
        s.t = k + 1 == steps ? t_end : s.t + h;
        out.push_back(s);
    }
    return out;
}

/// Conserved orbit relation y(x) = -x + log(x)/beta + rho0 + rho1 - log(rho0)/beta.
inline double phase_curve(const Params& p, double x) {
    p.validate();
    if (!(p.rho0 > 0.0)) throw DomainError("phase curve needs rho0 > 0");
    if (!(x > 0.0) || x > p.rho0) throw DomainError("phase curve defined for 0 < x <= rho0");
    return -x + std::log(x) / p.beta + p.rho0 + p.rho1 - std::log(p.rho0) / p.beta;
}

struct Peak {
    double t_peak = 0.0;
    double y_peak = 0.0;
};

/// Maximum of the infected density, reached when x crosses 1/beta. Returns
/// nothing when rho0 <= 1/beta: y is then nonincreasing from the start.
inline std::optional<Peak> peak_infection(const Params& p, double dt = 1e-3) {
    p.validate();
    if (!(p.rho1 > 0.0)) throw DomainError("peak_infection needs rho1 > 0");
    const double threshold = 1.0 / p.beta;
    if (p.rho0 <= threshold) return std::nullopt;
    const double y_peak = p.rho0 + p.rho1 - threshold - std::log(p.beta * p.rho0) / p.beta;

    // x(t) decreases to x_inf < 1/beta, so the crossing happens in finite time.
    double horizon = 16.0;
    for (int attempt = 0; attempt < 12; ++attempt, horizon *= 2.0) {
        const auto traj = ode_integrate(p, dt, horizon);
        for (std::size_t k = 1; k < traj.size(); ++k) {
            if (traj[k].x <= threshold) {
                const auto& a = traj[k - 1];
                const auto& b = traj[k];
                const double frac = (a.x - threshold) / (a.x - b.x);
                return Peak{a.t + frac * (b.t - a.t), y_peak};
            }
        }
    }
    throw NumericalError("x never crossed 1/beta");
}

/// Limit of x(t): rho0 if rho1 = 0, 0 if rho0 = 0, otherwise the unique root
/// of x = rho0 exp(-beta (rho0 + rho1 - x)) in (0, rho0).
inline double final_size(const Params& p) {
    p.validate();
    if (p.rho1 == 0.0) return p.rho0;
    if (p.rho0 == 0.0) return 0.0;
    const double s = p.rho0 + p.rho1;
    auto g = [&](double x) { return x - p.rho0 * std::exp(-p.beta * (s - x)); };
    return bisect(g, 0.0, p.rho0);
}

struct HatX {
    double value = 1.0;
    /// True when beta <= 1 and x = 1 is the only root in (0, 1].
    bool degenerate = false;
};

/// Smallest positive root of x = exp(beta (x - 1)).
inline HatX hat_x_infinity(double beta) {
    if (!(beta > 0.0)) throw DomainError("beta must be positive");
    if (beta <= 1.0) return {1.0, true};
    // The small root lies below 1/beta, where x - exp(beta (x - 1)) > 0.
    auto h = [beta](double x) { return x - std::exp(beta * (x - 1.0)); };
    return {bisect(h, 0.0, 1.0 / beta), false};
}

/// Smallest positive root of 1 = x exp(beta (1 - x)); 1 when beta <= 1.
inline double xinf_max(double beta) {
    if (!(beta > 0.0)) throw DomainError("beta must be positive");
    if (beta <= 1.0) return 1.0;
    auto k = [beta](double x) { return x * std::exp(beta * (1.0 - x)) - 1.0; };
    return bisect(k, 0.0, 1.0 / beta);
}

/// Parameter relations along rho1 = 1 - rho0.
enum class Relation {
    Rho0FromXinf,  // fixed beta, argument x_inf in (0, xinf_max(beta))
    BetaFromXinf,  // fixed rho0, argument x_inf in (0, rho0)
    Rho0FromBeta,  // fixed x_inf, argument beta in (0, log(x_inf)/(x_inf - 1))
};

inline double invert_relation(Relation mode, double fixed, double argument) {
    switch (mode) {
        case Relation::Rho0FromXinf: {
            const double beta = fixed, x = argument;
            if (!(beta > 0.0)) throw DomainError("beta must be positive");
            if (!(x > 0.0) || x >= xinf_max(beta)) throw DomainError("x_inf outside (0, x_inf^M)");
            return x * std::exp(beta * (1.0 - x));
        }
        case Relation::BetaFromXinf: {
            const double rho0 = fixed, x = argument;
            if (!(rho0 > 0.0) || rho0 > 1.0) throw DomainError("rho0 must lie in (0, 1]");
            if (!(x > 0.0) || x >= rho0) throw DomainError("x_inf outside (0, rho0)");
            return (std::log(x) - std::log(rho0)) / (x - 1.0);
        }
        case Relation::Rho0FromBeta: {
            const double x = fixed, beta = argument;
            if (!(x > 0.0) || x >= 1.0) throw DomainError("x_inf must lie in (0, 1)");
            if (!(beta > 0.0) || beta >= std::log(x) / (x - 1.0))
                throw DomainError("beta outside (0, log(x_inf)/(x_inf - 1))");
            return x * std::exp(beta * (1.0 - x));
        }
    }
    throw DomainError("unknown relation");
}

}  // namespace epi::meanfield
