#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "epi/convolution.hpp"
#include "epi/error.hpp"
#include "epi/kernel.hpp"
#include "epi/profile.hpp"

namespace epi {

/// Survivor and infected densities on the lattice at time t.
struct DensityField {
    TorusGrid grid;
    std::vector<double> u0;
    std::vector<double> u1;
    double t = 0.0;

    double mean_u0() const { return mean(u0); }
    double mean_u1() const { return mean(u1); }

private:
    static double mean(const std::vector<double>& v) {
        double acc = 0.0;
        for (double x : v) acc += x;
        return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
    }
};

struct PdeConfig {
    double dt = 1e-3;
    double t_end = 10.0;
    int sample_every = 100;

    void validate() const {
        if (!(dt > 0.0) || dt > 0.1) throw DomainError("pde dt must lie in (0, 0.1]");
        if (!(t_end >= 0.0)) throw DomainError("pde t_end must be nonnegative");
        if (sample_every < 1) throw DomainError("sample_every must be >= 1");
    }
};

/// Largest breach of the invariant bounds seen so far. Bounds are
/// 0 <= u0 <= 1, 0 <= u1 <= 1 - u0, and u0 and u0 + u1 nonincreasing in time.
struct BoundReport {
    double max_bound_violation = 0.0;
    double max_monotonicity_violation = 0.0;
    double max_total_increase = 0.0;  // growth of u0 + u1 over one step

    double worst() const { return std::max({max_bound_violation, max_monotonicity_violation, max_total_increase}); }
};

/// Bound breaches above this fail the integration.
inline constexpr double kStabilityTolerance = 1e-6;

/// Classical RK4 for
///   du0/dt = -beta (J*u1) u0
///   du1/dt =  beta (J*u1) u0 - u1
/// collocated on the kernel's lattice. Never clips: breaches are measured,
/// and those above kStabilityTolerance throw StabilityViolation.
class PdeIntegrator {
public:
    PdeIntegrator(const DiscreteKernel& kernel, std::span<const double> rho0, std::span<const double> rho1, double dt)
        : conv_(kernel),
          beta_(kernel.beta()),
          dt_(dt),
          field_{kernel.grid(), {rho0.begin(), rho0.end()}, {rho1.begin(), rho1.end()}, 0.0} {
        const std::size_t n = kernel.grid().n_sites();
        if (rho0.size() != n || rho1.size() != n) throw GridMismatch("profile size does not match grid");
        check_profiles(rho0, rho1);
        if (!(dt > 0.0) || dt > 0.1) throw DomainError("pde dt must lie in (0, 0.1]");
        for (auto* v : {&c_, &k0_[0], &k0_[1], &k0_[2], &k0_[3], &k1_[0], &k1_[1], &k1_[2], &k1_[3], &s0_, &s1_, &prev0_, &prev1_})
            v->resize(n);
    }

    const DensityField& field() const noexcept { return field_; }
    const BoundReport& report() const noexcept { return report_; }
    Convolver& convolver() noexcept { return conv_; }

    /// One step of size h.
    void step(double h) {
        const std::size_t n = field_.u0.size();
        prev0_ = field_.u0;
        prev1_ = field_.u1;
        rhs(field_.u0, field_.u1, k0_[0], k1_[0]);
        for (int stage = 1; stage < 4; ++stage) {
            const double a = stage == 3 ? h : 0.5 * h;
            for (std::size_t x = 0; x < n; ++x) {
                s0_[x] = field_.u0[x] + a * k0_[stage - 1][x];
                s1_[x] = field_.u1[x] + a * k1_[stage - 1][x];
            }
            rhs(s0_, s1_, k0_[stage], k1_[stage]);
        }
        for (std::size_t x = 0; x < n; ++x) {
            field_.u0[x] += h / 6.0 * (k0_[0][x] + 2.0 * k0_[1][x] + 2.0 * k0_[2][x] + k0_[3][x]);
            field_.u1[x] += h / 6.0 * (k1_[0][x] + 2.0 * k1_[1][x] + 2.0 * k1_[2][x] + k1_[3][x]);
        }
        field_.t += h;
        check_bounds();
    }

    /// Steps of size dt up to t, the last one shortened to land on t.
    void advance_to(double t, const std::function<void(const DensityField&)>& on_step = {}) {
        while (field_.t < t) {
            const double remaining = t - field_.t;
            if (remaining <= dt_ * 1e-9) {
                field_.t = t;
                break;
            }
            const bool last = remaining <= dt_ * (1.0 + 1e-9);
            step(last ? remaining : dt_);
            if (last) field_.t = t;
            if (on_step) on_step(field_);
        }
    }

    double max_u1() const { return *std::max_element(field_.u1.begin(), field_.u1.end()); }

private:
    void rhs(const std::vector<double>& u0, const std::vector<double>& u1, std::vector<double>& d0,
             std::vector<double>& d1) {
        conv_.apply(u1, c_);
        for (std::size_t x = 0; x < u0.size(); ++x) {
            const double inf = beta_ * c_[x] * u0[x];
            d0[x] = -inf;
            d1[x] = inf - u1[x];
        }
    }

    void check_bounds() {
        double bound = 0.0, mono = 0.0, total = 0.0;
        for (std::size_t x = 0; x < field_.u0.size(); ++x) {
            const double a = field_.u0[x], b = field_.u1[x];
            bound = std::max({bound, -a, a - 1.0, -b, b - (1.0 - a)});
            mono = std::max(mono, a - prev0_[x]);
            total = std::max(total, (a + b) - (prev0_[x] + prev1_[x]));
        }
        report_.max_bound_violation = std::max(report_.max_bound_violation, bound);
        report_.max_monotonicity_violation = std::max(report_.max_monotonicity_violation, mono);
        report_.max_total_increase = std::max(report_.max_total_increase, total);
        const double worst = std::max({bound, mono, total});
        if (worst > kStabilityTolerance)
            throw StabilityViolation("density bounds breached by " + std::to_string(worst) +
                                     " at t=" + std::to_string(field_.t) + "; reduce dt");
    }

    Convolver conv_;
    double beta_;
    double dt_;
    DensityField field_;
    BoundReport report_;
    std::vector<double> c_, s0_, s1_, prev0_, prev1_;
    std::vector<double> k0_[4], k1_[4];
};

struct PdeRun {
    std::vector<DensityField> samples;
    BoundReport report;
};

/// Integrates from (rho0, rho1) to config.t_end, keeping t = 0, every
/// sample_every-th step, and the final time.
inline PdeRun integrate_pde(std::span<const double> rho0, std::span<const double> rho1, const DiscreteKernel& kernel,
                            const PdeConfig& config, const std::function<void(const DensityField&)>& on_step = {}) {
    config.validate();
    PdeIntegrator integ(kernel, rho0, rho1, config.dt);
    PdeRun run;
    run.samples.push_back(integ.field());
    long step = 0;
    integ.advance_to(config.t_end, [&](const DensityField& f) {
        ++step;
        if (on_step) on_step(f);
        if (step % config.sample_every == 0 && f.t < config.t_end) run.samples.push_back(f);
    });
    if (run.samples.back().t != integ.field().t) run.samples.push_back(integ.field());
    run.report = integ.report();
    return run;
}

/// Fields at each of the given nondecreasing times.
inline PdeRun integrate_pde_at(std::span<const double> rho0, std::span<const double> rho1,
                               const DiscreteKernel& kernel, double dt, std::span<const double> times) {
    PdeIntegrator integ(kernel, rho0, rho1, dt);
    PdeRun run;
    for (double t : times) {
        if (t < integ.field().t) throw DomainError("sample times must be nondecreasing");
        integ.advance_to(t);
        run.samples.push_back(integ.field());
    }
    run.report = integ.report();
    return run;
}

/// Residual of the exponential identity along the flow,
///   u0(t) = rho0 exp(-beta J*(rho0 + rho1) + beta J*(u0 + u1)(t)),
/// obtained by integrating d/dt log u0 = beta d/dt J*(u0 + u1).
inline std::vector<double> exp_identity_residual(const DensityField& field, std::span<const double> rho0,
                                                 std::span<const double> rho1, const DiscreteKernel& kernel,
                                                 double beta) {
    const std::size_t n = kernel.grid().n_sites();
    if (field.u0.size() != n || rho0.size() != n || rho1.size() != n) throw GridMismatch("field size mismatch");
    Convolver conv(kernel);
    std::vector<double> v0(n), v(n);
    for (std::size_t x = 0; x < n; ++x) {
        v0[x] = rho0[x] + rho1[x];
        v[x] = field.u0[x] + field.u1[x];
    }
    const auto jv0 = conv(v0);
    const auto jv = conv(v);
    std::vector<double> res(n);
    for (std::size_t x = 0; x < n; ++x) res[x] = field.u0[x] - rho0[x] * std::exp(beta * (jv[x] - jv0[x]));
    return res;
}

inline double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

struct LongTimeResult {
    DensityField field;          // u0 approximates the final density
    double lower_bound_gap = 0;  // min over sites of u0 - rho0 exp(-beta J*(rho0 + rho1))
    bool lower_bound_ok = true;
    BoundReport report;
};

/// Time cap for long_time_limit.
inline double long_time_horizon(double beta) {
    return beta < 1.0 ? 50.0 * std::max(1.0, 1.0 / (1.0 - beta)) : 200.0;
}

/// Integrates until max u1 < u1_tol and returns the field as the estimate of
/// the final survivor density.
inline LongTimeResult long_time_limit(std::span<const double> rho0, std::span<const double> rho1,
                                      const DiscreteKernel& kernel, const PdeConfig& config, double u1_tol) {
    config.validate();
    if (!(u1_tol > 0.0)) throw DomainError("u1_tol must be positive");
    PdeIntegrator integ(kernel, rho0, rho1, config.dt);
    const double cap = long_time_horizon(kernel.beta());
    while (integ.max_u1() >= u1_tol) {
        if (integ.field().t >= cap)
            throw HorizonExceeded("max u1 = " + std::to_string(integ.max_u1()) + " still above tolerance at t=" +
                                  std::to_string(integ.field().t));
        integ.step(config.dt);
    }
    LongTimeResult out{integ.field(), 0.0, true, integ.report()};

    const std::size_t n = rho0.size();
    std::vector<double> v0(n);
    for (std::size_t x = 0; x < n; ++x) v0[x] = rho0[x] + rho1[x];
    const auto jv0 = integ.convolver()(v0);
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t x = 0; x < n; ++x)
        gap = std::min(gap, out.field.u0[x] - rho0[x] * std::exp(-kernel.beta() * jv0[x]));
    out.lower_bound_gap = gap;
    out.lower_bound_ok = gap >= -1e-12;
    return out;
}

}  // namespace epi
