#include <gtest/gtest.h>

#include <cmath>

#include "epi/meanfield.hpp"
#include "oracles.hpp"

using namespace epi;
using namespace epi::meanfield;

TEST(Bisect, ChecksBracket) {
    EXPECT_THROW(bisect([](double x) { return x * x + 1.0; }, -1.0, 1.0), DomainError);
    const double r = bisect([](double x) { return x * x - 2.0; }, 0.0, 2.0);
    EXPECT_NEAR(r, std::sqrt(2.0), 4e-16);
}

TEST(OdeIntegrate, TrivialSolutions) {
    for (const auto& s : ode_integrate({3.0, 0.6, 0.0}, 0.01, 5.0)) {
        EXPECT_EQ(s.x, 0.6);
        EXPECT_EQ(s.y, 0.0);
    }
    for (const auto& s : ode_integrate({3.0, 0.0, 0.4}, 0.01, 5.0)) EXPECT_NEAR(s.y, 0.4 * std::exp(-s.t), 1e-9);
    EXPECT_THROW(ode_integrate({2.0, 0.5, 0.5}, 0.2, 1.0), DomainError);
}

TEST(OdeIntegrate, ReachesFinalSize) {
    const auto traj = ode_integrate({2.0, 0.99, 0.01}, 1e-3, 50.0);
    EXPECT_NEAR(traj.back().x, oracle::final_size(2.0, 0.99, 0.01), 1e-3);
    EXPECT_NEAR(traj.back().x, 0.200, 1e-3);
    EXPECT_EQ(traj.back().t, 50.0);
}

TEST(OdeIntegrate, ConservationAndMonotonicity) {
    for (const Params p : {Params{2.0, 0.99, 0.01}, Params{0.7, 0.5, 0.3}, Params{4.0, 0.3, 0.6}}) {
        const auto traj = ode_integrate(p, 1e-3, 30.0);
        for (std::size_t k = 0; k < traj.size(); ++k) {
            EXPECT_NEAR(traj[k].x + traj[k].y + traj[k].z, 1.0, 1e-9 * (1.0 + traj[k].t));
            EXPECT_NEAR(traj[k].y, phase_curve(p, traj[k].x), 1e-7);
            if (k) {
                EXPECT_LE(traj[k].x, traj[k - 1].x);
            }
            EXPECT_GE(traj[k].x, 0.0);
            EXPECT_LE(traj[k].x, p.rho0);
            EXPECT_GE(traj[k].y, 0.0);
            EXPECT_LE(traj[k].y, 1.0 - traj[k].x);
        }
    }
}

TEST(PhaseCurve, Values) {
    const Params p{2.0, 0.99, 0.01};
    EXPECT_NEAR(phase_curve(p, 0.99), 0.01, 1e-15);
    EXPECT_NEAR(phase_curve(p, 0.5), -0.5 + 0.5 * std::log(0.5) + 1.0 - 0.5 * std::log(0.99), 1e-15);
    EXPECT_NEAR(phase_curve(p, 0.5), 0.1584, 1e-4);
    EXPECT_NEAR(phase_curve(p, oracle::final_size(2.0, 0.99, 0.01)), 0.0, 1e-12);
    EXPECT_THROW(phase_curve(p, 0.0), DomainError);
    EXPECT_THROW(phase_curve(p, 0.995), DomainError);
}

TEST(PeakInfection, Cases) {
    EXPECT_FALSE(peak_infection({0.5, 0.9, 0.1}).has_value());
    EXPECT_FALSE(peak_infection({2.0, 0.5, 0.1}).has_value());  // rho0 == 1/beta
    const auto peak = peak_infection({2.0, 0.99, 0.01});
    ASSERT_TRUE(peak.has_value());
    EXPECT_NEAR(peak->y_peak, 1.0 - 0.5 - 0.5 * std::log(1.98), 1e-15);
    EXPECT_NEAR(peak->y_peak, 0.1585, 1e-4);
}

TEST(PeakInfection, MatchesTrajectoryMaximum) {
    for (const Params p : {Params{2.0, 0.99, 0.01}, Params{3.0, 0.8, 0.05}, Params{1.5, 0.9, 0.1}}) {
        const auto peak = peak_infection(p);
        ASSERT_TRUE(peak.has_value());
        const auto traj = ode_integrate(p, 1e-3, 40.0);
        double y_max = 0.0, t_max = 0.0;
        for (const auto& s : traj)
            if (s.y > y_max) y_max = s.y, t_max = s.t;
        EXPECT_NEAR(peak->y_peak, y_max, 1e-4);
        EXPECT_NEAR(peak->t_peak, t_max, 2e-3);
    }
}

TEST(FinalSize, ReferenceCasesAndOracle) {
    EXPECT_EQ(final_size({1.3, 0.7, 0.0}), 0.7);
    EXPECT_EQ(final_size({1.3, 0.0, 0.3}), 0.0);
    EXPECT_NEAR(final_size({2.0, 0.99, 0.01}), 0.1999, 2e-4);
    EXPECT_NEAR(final_size({0.5, 0.9, 0.1}), 0.824, 1e-3);
    for (const Params p : {Params{2.0, 0.99, 0.01}, Params{0.5, 0.9, 0.1}, Params{1.5, 0.5, 0.5},
                           Params{2.0, 0.9, 0.1}, Params{5.0, 0.3, 0.1}, Params{0.1, 0.95, 0.05}}) {
        const double x = final_size(p);
        EXPECT_NEAR(x, oracle::final_size(p.beta, p.rho0, p.rho1), 1e-12);
        EXPECT_LE(std::abs(x - p.rho0 * std::exp(-p.beta * (p.rho0 + p.rho1 - x))), 1e-12);
        EXPECT_LT(x, std::min(1.0 / p.beta, p.rho0));
    }
}

TEST(HatX, OracleAndDegenerate) {
    EXPECT_NEAR(hat_x_infinity(2.0).value, 0.20319, 1e-5);
    EXPECT_NEAR(hat_x_infinity(1.1).value, 0.8239, 1e-4);
    for (double b : {1.05, 1.1, 1.5, 2.0, 3.0, 6.0}) {
        const auto h = hat_x_infinity(b);
        EXPECT_FALSE(h.degenerate);
        EXPECT_NEAR(h.value, oracle::hat_x(b), 1e-12);
        EXPECT_LE(std::abs(h.value - std::exp(b * (h.value - 1.0))), 1e-12);
    }
    const auto d = hat_x_infinity(0.8);
    EXPECT_TRUE(d.degenerate);
    EXPECT_EQ(d.value, 1.0);
}

TEST(XinfMax, IdentityWithHatX) {
    EXPECT_EQ(xinf_max(0.8), 1.0);
    EXPECT_EQ(xinf_max(1.0), 1.0);
    EXPECT_NEAR(xinf_max(1.1), 0.8239, 1e-4);
    for (double b : {1.1, 1.5, 2.0, 3.0, 4.5}) EXPECT_NEAR(xinf_max(b), hat_x_infinity(b).value, 1e-12);
}

TEST(InvertRelation, ValuesAndRoundTrips) {
    EXPECT_NEAR(invert_relation(Relation::Rho0FromXinf, 2.0, 0.1), 0.1 * std::exp(1.8), 1e-15);
    EXPECT_NEAR(invert_relation(Relation::Rho0FromXinf, 2.0, 0.1), 0.6050, 1e-4);
    EXPECT_NEAR(invert_relation(Relation::BetaFromXinf, 0.5, 0.25), std::log(2.0) / 0.75, 1e-15);
    EXPECT_NEAR(invert_relation(Relation::Rho0FromXinf, 2.0, 1e-12), 0.0, 1e-10);

    for (double beta : {0.5, 1.5, 2.0, 3.0})
        for (double frac : {0.1, 0.4, 0.8}) {
            const double x = frac * xinf_max(beta);
            const double rho0 = invert_relation(Relation::Rho0FromXinf, beta, x);
            EXPECT_NEAR(final_size({beta, rho0, 1.0 - rho0}), x, 1e-9);
        }
    for (double rho0 : {0.3, 0.6, 0.95})
        for (double frac : {0.1, 0.5, 0.9}) {
            const double x = frac * rho0;
            const double beta = invert_relation(Relation::BetaFromXinf, rho0, x);
            EXPECT_NEAR(final_size({beta, rho0, 1.0 - rho0}), x, 1e-9);
        }
    for (double x : {0.1, 0.3, 0.7}) {
        const double beta_max = std::log(x) / (x - 1.0);
        for (double frac : {0.2, 0.6, 0.95}) {
            const double rho0 = invert_relation(Relation::Rho0FromBeta, x, frac * beta_max);
            EXPECT_NEAR(final_size({frac * beta_max, rho0, 1.0 - rho0}), x, 1e-9);
        }
    }
}

TEST(InvertRelation, Monotone) {
    double prev = 0.0;
    for (double x = 0.01; x < xinf_max(2.0); x += 0.01) {
        const double r = invert_relation(Relation::Rho0FromXinf, 2.0, x);
        EXPECT_GT(r, prev);
        prev = r;
    }
    prev = 1e300;
    for (double x = 0.01; x < 0.6; x += 0.01) {
        const double b = invert_relation(Relation::BetaFromXinf, 0.6, x);
        EXPECT_LT(b, prev);
        prev = b;
    }
    prev = 0.0;
    for (double b = 0.05; b < std::log(0.3) / (0.3 - 1.0); b += 0.05) {
        const double r = invert_relation(Relation::Rho0FromBeta, 0.3, b);
        EXPECT_GT(r, prev);
        prev = r;
    }
}

TEST(InvertRelation, DomainErrors) {
    EXPECT_THROW(invert_relation(Relation::Rho0FromXinf, 2.0, 0.0), DomainError);
    EXPECT_THROW(invert_relation(Relation::Rho0FromXinf, 2.0, xinf_max(2.0)), DomainError);
    EXPECT_THROW(invert_relation(Relation::BetaFromXinf, 0.5, 0.5), DomainError);
    EXPECT_THROW(invert_relation(Relation::Rho0FromBeta, 0.3, std::log(0.3) / (0.3 - 1.0)), DomainError);
    EXPECT_THROW(invert_relation(Relation::Rho0FromBeta, 1.0, 0.5), DomainError);
}
