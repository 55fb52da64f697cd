#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "epi/error.hpp"
#include "epi/sum_tree.hpp"
#include "epi/kernel.hpp"
#include "epi/profile.hpp"
#include "epi/rng.hpp"

namespace epi {

enum class SiteState : std::int8_t { Removed = -1, Susceptible = 0, Infected = 1 };
enum class Transition { Infection, Recovery };

struct EventRecord {
    double dt = 0.0;
    std::size_t site = 0;
    Transition transition = Transition::Recovery;
};

struct Counts {
    std::size_t removed = 0;
    std::size_t susceptible = 0;
    std::size_t infected = 0;
};

struct RateAudit {
    double max_site_rate_error = 0.0;
    double total_rate_error = 0.0;
    bool counts_consistent = true;
};

struct SimOptions {
    /// Use the per-site rate index even for the mean-field kernel.
    bool force_rate_index = false;
    /// Events between from-scratch rebuilds of the rate cache.
    std::uint64_t rebuild_interval = 1'000'000;
};

/// Microscopic configuration of the epidemic on the torus plus the
/// bookkeeping needed to draw the next Markov jump in O(log n).
///
/// A susceptible site x becomes infected at rate
/// beta * gamma^d * sum_y 1{y infected} w[x - y]; an infected site recovers
/// at rate 1. For the mean-field kernel all susceptible sites share one rate,
/// so the infection channel samples a susceptible site uniformly. Other
/// kernels keep a per-site rate cache in a sum tree, updated over the
/// kernel support of every site that changes state.
class EpidemicState {
public:
    EpidemicState(std::shared_ptr<const DiscreteKernel> kernel, std::vector<SiteState> eta, std::uint64_t seed,
                  SimOptions options = {})
        : EpidemicState(std::move(kernel), std::move(eta), Rng(seed), seed, options) {}

    EpidemicState(std::shared_ptr<const DiscreteKernel> kernel, std::vector<SiteState> eta, Rng rng,
                  std::uint64_t seed, SimOptions options = {})
        : kernel_(std::move(kernel)),
          eta_(std::move(eta)),
          rng_(rng),
          seed_(seed),
          options_(options),
          unit_(kernel_->beta() * kernel_->grid().cell_volume()),
          use_index_(options.force_rate_index || !kernel_->is_mean_field()) {
        const std::size_t n = kernel_->grid().n_sites();
        if (eta_.size() != n) throw GridMismatch("configuration size does not match grid " + kernel_->grid().describe());
        pos_.assign(n, kNone);
        for (std::size_t x = 0; x < n; ++x) {
            if (eta_[x] == SiteState::Infected) push(infected_, x);
            else if (eta_[x] == SiteState::Susceptible) push(susceptible_, x);
            else ++n_removed_;
        }
        scratch_.resize(static_cast<std::size_t>(kernel_->grid().dimension()));
        if (use_index_) rebuild_rates();
    }

    const TorusGrid& grid() const noexcept { return kernel_->grid(); }
    const DiscreteKernel& kernel() const noexcept { return *kernel_; }
    std::shared_ptr<const DiscreteKernel> kernel_ptr() const noexcept { return kernel_; }
    std::uint64_t seed() const noexcept { return seed_; }
    double time() const noexcept { return time_; }
    std::uint64_t events() const noexcept { return events_; }
    bool uses_rate_index() const noexcept { return use_index_; }

    std::span<const SiteState> configuration() const noexcept { return eta_; }
    SiteState state(std::size_t x) const { return eta_[x]; }

    Counts counts() const noexcept { return {n_removed_, susceptible_.size(), infected_.size()}; }
    bool absorbed() const noexcept { return infected_.empty(); }

    double susceptible_fraction() const noexcept { return frac(susceptible_.size()); }
    double infected_fraction() const noexcept { return frac(infected_.size()); }
    double removed_fraction() const noexcept { return frac(n_removed_); }

    /// Cached infection rate of site x (zero unless x is susceptible).
    double site_rate(std::size_t x) const {
        if (eta_[x] != SiteState::Susceptible) return 0.0;
        return use_index_ ? site_rate_[x] : unit_ * static_cast<double>(infected_.size());
    }

    double infection_rate() const noexcept {
        if (!use_index_) return unit_ * static_cast<double>(susceptible_.size()) * static_cast<double>(infected_.size());
        const double total = tree_.total();
        return total > 0.0 ? total : 0.0;
    }

    /// Sum of all jump rates: infections plus one recovery per infected site.
    double total_rate() const noexcept { return infection_rate() + static_cast<double>(infected_.size()); }

    /// Draws and applies the next jump.
    EventRecord step() {
        if (absorbed()) throw Absorbed("no infected sites left at t=" + std::to_string(time_));
        const double dt = rng_.exponential(total_rate());
        time_ += dt;
        auto ev = apply(choose());
        ev.dt = dt;
        return ev;
    }

    /// Runs the dynamics up to time t, leaving the state exactly at time t.
    /// A waiting time that overshoots t is discarded, which is exact by the
    /// memoryless property.
    void advance_until(double t) {
        if (t < time_) throw DomainError("cannot advance backwards in time");
        while (!absorbed()) {
            const double dt = rng_.exponential(total_rate());
            if (time_ + dt > t) break;
            time_ += dt;
            apply(choose());
        }
        time_ = t;
    }

    /// Compares the cached rates with a from-scratch recomputation.
    RateAudit audit() const {
        const std::size_t n = grid().n_sites();
        RateAudit report;
        Counts scan;
        for (auto s : eta_) {
            if (s == SiteState::Susceptible) ++scan.susceptible;
            else if (s == SiteState::Infected) ++scan.infected;
            else ++scan.removed;
        }
        const Counts c = counts();
        report.counts_consistent = scan.susceptible == c.susceptible && scan.infected == c.infected &&
                                   scan.removed == c.removed && c.susceptible + c.infected + c.removed == n;

        std::vector<double> fresh(n, 0.0);
        std::vector<std::uint32_t> fresh_count(n, 0);
        if (use_index_) {
            accumulate_rates(fresh, fresh_count);
        } else {
            double w_sum = 0.0;
            for (std::size_t y = 0; y < n; ++y)
                if (eta_[y] == SiteState::Infected) w_sum += 1.0;
            for (std::size_t x = 0; x < n; ++x)
                if (eta_[x] == SiteState::Susceptible) fresh[x] = unit_ * w_sum;
        }
        double fresh_total = static_cast<double>(scan.infected);
        for (std::size_t x = 0; x < n; ++x) {
            report.max_site_rate_error = std::max(report.max_site_rate_error, std::abs(fresh[x] - site_rate(x)));
            fresh_total += fresh[x];
        }
        report.total_rate_error = std::abs(fresh_total - total_rate());
        return report;
    }

    /// Recomputes every cached site rate from the current configuration.
    void rebuild_rates() {
        if (!use_index_) return;
        const std::size_t n = grid().n_sites();
        site_rate_.assign(n, 0.0);
        neighbor_count_.assign(n, 0);
        accumulate_rates(site_rate_, neighbor_count_);
        tree_.assign(site_rate_);
        events_since_rebuild_ = 0;
        ++rebuilds_;
    }

    std::uint64_t rebuilds() const noexcept { return rebuilds_; }

private:
    static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

    double frac(std::size_t k) const noexcept {
        return static_cast<double>(k) / static_cast<double>(grid().n_sites());
    }

    void push(std::vector<std::size_t>& list, std::size_t x) {
        pos_[x] = list.size();
        list.push_back(x);
    }

    void erase(std::vector<std::size_t>& list, std::size_t x) {
        const std::size_t i = pos_[x];
        const std::size_t last = list.back();
        list[i] = last;
        pos_[last] = i;
        list.pop_back();
        pos_[x] = kNone;
    }

    // Visits x = y + z for every support displacement z, passing x and w[z].
    template <class F>
    void for_each_neighbor(std::size_t y, F&& f) const {
        const TorusGrid& g = grid();
        const auto& offsets = kernel_->support_offsets();
        const auto& weights = kernel_->support_weights();
        const auto d = static_cast<std::size_t>(g.dimension());
        const std::int64_t side = g.side();
        if (d == 1) {
            const auto yy = static_cast<std::int64_t>(y);
            for (std::size_t s = 0; s < weights.size(); ++s) {
                std::int64_t x = yy + offsets[s];
                if (x < 0) x += side;
                else if (x >= side) x -= side;
                f(static_cast<std::size_t>(x), weights[s]);
            }
            return;
        }
        std::size_t rest = y;
        for (std::size_t k = d; k-- > 0;) {
            scratch_[k] = static_cast<std::int64_t>(rest % static_cast<std::size_t>(side));
            rest /= static_cast<std::size_t>(side);
        }
        for (std::size_t s = 0; s < weights.size(); ++s) {
            std::size_t x = 0;
            for (std::size_t k = 0; k < d; ++k) {
                std::int64_t c = scratch_[k] + offsets[s * d + k];
                if (c < 0) c += side;
                else if (c >= side) c -= side;
                x = x * static_cast<std::size_t>(side) + static_cast<std::size_t>(c);
            }
            f(x, weights[s]);
        }
    }

    void accumulate_rates(std::vector<double>& rate, std::vector<std::uint32_t>& count) const {
        for (std::size_t y : infected_) {
            for_each_neighbor(y, [&](std::size_t x, double w) {
                if (eta_[x] != SiteState::Susceptible) return;
                ++count[x];
                rate[x] += unit_ * w;
            });
        }
    }

    void set_rate(std::size_t x, double value) {
        tree_.set(x, value);
        site_rate_[x] = value;
    }

    std::pair<std::size_t, Transition> choose() {
        for (int attempt = 0; attempt < 3; ++attempt) {
            const double n_inf = static_cast<double>(infected_.size());
            const double total = total_rate();
            if (rng_.uniform() * total < n_inf) return {infected_[rng_.index(infected_.size())], Transition::Recovery};
            if (!use_index_) return {susceptible_[rng_.index(susceptible_.size())], Transition::Infection};
            const std::size_t x = tree_.find(rng_.uniform() * tree_.total());
            if (eta_[x] == SiteState::Susceptible && site_rate_[x] > 0.0) return {x, Transition::Infection};
            // Rounding in the descent landed on a zero-rate site.
            rebuild_rates();
        }
        throw NumericalError("rate index inconsistent after rebuild");
    }

    EventRecord apply(std::pair<std::size_t, Transition> event) {
        const auto [y, kind] = event;
        if (kind == Transition::Infection) {
            eta_[y] = SiteState::Infected;
            erase(susceptible_, y);
            push(infected_, y);
            if (use_index_) {
                set_rate(y, 0.0);
                neighbor_count_[y] = 0;
                for_each_neighbor(y, [&](std::size_t x, double w) {
                    if (eta_[x] != SiteState::Susceptible) return;
                    ++neighbor_count_[x];
                    set_rate(x, site_rate_[x] + unit_ * w);
                });
            }
        } else {
            eta_[y] = SiteState::Removed;
            erase(infected_, y);
            ++n_removed_;
            if (use_index_) {
                for_each_neighbor(y, [&](std::size_t x, double w) {
                    if (eta_[x] != SiteState::Susceptible) return;
                    // A site with no infected neighbors left has rate exactly 0.
                    set_rate(x, --neighbor_count_[x] == 0 ? 0.0 : site_rate_[x] - unit_ * w);
                });
            }
        }
        ++events_;
        if (use_index_ && ++events_since_rebuild_ >= options_.rebuild_interval) rebuild_rates();
        return {0.0, y, kind};
    }

    std::shared_ptr<const DiscreteKernel> kernel_;
    std::vector<SiteState> eta_;
    Rng rng_;
    std::uint64_t seed_;
    SimOptions options_;
    double unit_;  // beta * gamma^d
    bool use_index_;

    std::vector<std::size_t> infected_;
    std::vector<std::size_t> susceptible_;
    std::vector<std::size_t> pos_;  // position of a site within its list
    std::size_t n_removed_ = 0;

    std::vector<double> site_rate_;
    std::vector<std::uint32_t> neighbor_count_;
    SumTree tree_;
    mutable std::vector<std::int64_t> scratch_;

    double time_ = 0.0;
    std::uint64_t events_ = 0;
    std::uint64_t events_since_rebuild_ = 0;
    std::uint64_t rebuilds_ = 0;
};

/// Product-measure initial condition: site x is susceptible with probability
/// rho0(x), infected with probability rho1(x), removed otherwise.
inline EpidemicState init_random(std::shared_ptr<const DiscreteKernel> kernel, std::span<const double> rho0,
                                 std::span<const double> rho1, std::uint64_t seed, SimOptions options = {}) {
    const std::size_t n = kernel->grid().n_sites();
    if (rho0.size() != n || rho1.size() != n) throw GridMismatch("profile size does not match grid");
    check_profiles(rho0, rho1);
    Rng rng(seed);
    std::vector<SiteState> eta(n);
    for (std::size_t x = 0; x < n; ++x) {
        const double u = rng.uniform();
        eta[x] = u < rho0[x] ? SiteState::Susceptible
                             : (u < rho0[x] + rho1[x] ? SiteState::Infected : SiteState::Removed);
    }
    return EpidemicState(std::move(kernel), std::move(eta), rng, seed, options);
}

/// Exactly n_susceptible and n_infected sites at uniformly random positions;
/// the rest removed.
inline EpidemicState init_exact_counts(std::shared_ptr<const DiscreteKernel> kernel, std::size_t n_susceptible,
                                       std::size_t n_infected, std::uint64_t seed, SimOptions options = {}) {
    const std::size_t n = kernel->grid().n_sites();
    if (n_susceptible > n || n_infected > n - n_susceptible)
        throw CountOverflow("requested " + std::to_string(n_susceptible) + " susceptible + " +
                            std::to_string(n_infected) + " infected sites on " + std::to_string(n) + " sites");
    Rng rng(seed);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    const std::size_t placed = n_susceptible + n_infected;
    for (std::size_t i = 0; i < placed; ++i) std::swap(order[i], order[i + rng.index(n - i)]);
    std::vector<SiteState> eta(n, SiteState::Removed);
    for (std::size_t i = 0; i < n_susceptible; ++i) eta[order[i]] = SiteState::Susceptible;
    for (std::size_t i = n_susceptible; i < placed; ++i) eta[order[i]] = SiteState::Infected;
    return EpidemicState(std::move(kernel), std::move(eta), rng, seed, options);
}

struct TrajectorySample {
    double t = 0.0;
    double x = 0.0;  // susceptible fraction
    double y = 0.0;  // infected fraction
    double z = 0.0;  // removed fraction
    std::uint64_t events = 0;
    /// <pi^{gamma,0}, G> and <pi^{gamma,1}, G>, one entry per test function.
    std::vector<double> avg_susceptible;
    std::vector<double> avg_infected;
};

/// <pi^{gamma,i}, G> = gamma^d sum_x 1{eta(x) = i} G(gamma x), with G given
/// by its values on the grid.
inline double empirical_average(const EpidemicState& state, SiteState which, std::span<const double> g_values) {
    const auto eta = state.configuration();
    double acc = 0.0;
    for (std::size_t x = 0; x < eta.size(); ++x)
        if (eta[x] == which) acc += g_values[x];
    return acc * state.grid().cell_volume();
}

inline TrajectorySample snapshot(const EpidemicState& state, std::span<const std::vector<double>> g_values = {}) {
    TrajectorySample s{state.time(), state.susceptible_fraction(), state.infected_fraction(),
                       state.removed_fraction(), state.events(), {}, {}};
    for (const auto& g : g_values) {
        s.avg_susceptible.push_back(empirical_average(state, SiteState::Susceptible, g));
        s.avg_infected.push_back(empirical_average(state, SiteState::Infected, g));
    }
    return s;
}

/// Samples the trajectory at the given nondecreasing times. Once absorbed the
/// configuration is frozen, so later samples repeat the absorbed state.
inline std::vector<TrajectorySample> run_sampled(EpidemicState& state, std::span<const double> sample_times,
                                                 std::span<const TestFunction> test_functions = {}) {
    std::vector<std::vector<double>> g_values;
    for (const auto& g : test_functions) {
        std::vector<double> v(state.grid().n_sites());
        for (std::size_t x = 0; x < v.size(); ++x) v[x] = g.fn(state.grid().position(x));
        g_values.push_back(std::move(v));
    }
    std::vector<TrajectorySample> out;
    out.reserve(sample_times.size());
    for (std::size_t k = 0; k < sample_times.size(); ++k) {
        if (k > 0 && sample_times[k] < sample_times[k - 1]) throw DomainError("sample times must be nondecreasing");
        state.advance_until(sample_times[k]);
        out.push_back(snapshot(state, g_values));
    }
    return out;
}

struct AbsorptionResult {
    double x_inf = 0.0;
    std::uint64_t events = 0;
    TrajectorySample final_sample;
};

/// Runs until no infected site is left.
inline AbsorptionResult run_to_absorption(EpidemicState& state) {
    while (!state.absorbed()) state.step();
    auto s = snapshot(state);
    return {s.x, state.events(), s};
}

}  // namespace epi
