#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "epi/error.hpp"
#include "epi/torus_grid.hpp"

namespace epi {

enum class KernelVariant { MeanField, TopHat, WrappedBump };

/// Continuous infection kernel J together with the infection strength beta.
///
/// TopHat: J constant on the ball of the given radius.
/// WrappedBump: J(r) proportional to exp(1 - 1/(1 - (|r|/width)^2)) inside
/// the ball of the given width, evaluated at minimal-image distance.
struct KernelSpec {
    KernelVariant variant = KernelVariant::MeanField;
    double length = 0.0;  // radius (TopHat) or width (WrappedBump); unused for MeanField
    double beta = 1.0;

    static KernelSpec mean_field(double beta) { return {KernelVariant::MeanField, 0.0, beta}; }
    static KernelSpec top_hat(double radius, double beta) { return {KernelVariant::TopHat, radius, beta}; }
    static KernelSpec bump(double width, double beta) { return {KernelVariant::WrappedBump, width, beta}; }

    void validate() const {
        if (!(beta >= 0.0) || !std::isfinite(beta)) throw InvalidSpec("beta must be a finite nonnegative number");
        switch (variant) {
            case KernelVariant::MeanField:
                break;
            case KernelVariant::TopHat:
                if (!(length > 0.0)) throw InvalidSpec("top-hat radius must be positive");
                if (length > 0.5) throw InvalidSpec("top-hat radius must not exceed 1/2");
                break;
            case KernelVariant::WrappedBump:
                if (!(length > 0.0) || !std::isfinite(length)) throw InvalidSpec("bump width must be positive");
                break;
        }
    }

    /// Config-file form: meanfield | tophat:<radius> | bump:<width>.
    std::string to_string() const {
        char buf[64];
        switch (variant) {
            case KernelVariant::MeanField:
                return "meanfield";
            case KernelVariant::TopHat:
                std::snprintf(buf, sizeof buf, "tophat:%.17g", length);
                return buf;
            case KernelVariant::WrappedBump:
                std::snprintf(buf, sizeof buf, "bump:%.17g", length);
                return buf;
        }
        return {};
    }
};

inline KernelSpec parse_kernel_spec(const std::string& text, double beta) {
    KernelSpec spec;
    spec.beta = beta;
    const auto colon = text.find(':');
    const std::string head = text.substr(0, colon);
    if (head == "meanfield") {
        if (colon != std::string::npos) throw InvalidSpec("meanfield kernel takes no argument: " + text);
        spec.variant = KernelVariant::MeanField;
    } else if (head == "tophat" || head == "bump") {
        if (colon == std::string::npos) throw InvalidSpec("kernel '" + head + "' needs a length: " + text);
        spec.variant = head == "tophat" ? KernelVariant::TopHat : KernelVariant::WrappedBump;
        const std::string arg = text.substr(colon + 1);
        std::size_t used = 0;
        try {
            spec.length = std::stod(arg, &used);
        } catch (const std::exception&) {
            throw InvalidSpec("bad kernel length: " + text);
        }
        if (used != arg.size()) throw InvalidSpec("bad kernel length: " + text);
    } else {
        throw InvalidSpec("unknown kernel: " + text);
    }
    spec.validate();
    return spec;
}

/// Kernel sampled on lattice displacements and renormalized so that
/// gamma^d * sum_z w[z] == 1.
class DiscreteKernel {
public:
    const TorusGrid& grid() const noexcept { return grid_; }
    const KernelSpec& spec() const noexcept { return spec_; }
    double beta() const noexcept { return spec_.beta; }
    bool is_mean_field() const noexcept { return spec_.variant == KernelVariant::MeanField; }

    /// Weight indexed by displacement site index.
    double weight(std::size_t displacement) const { return weights_[displacement]; }
    const std::vector<double>& weights() const noexcept { return weights_; }

    /// Displacements with positive weight, in increasing site-index order.
    const std::vector<std::size_t>& support() const noexcept { return support_; }
    /// Weights aligned with support().
    const std::vector<double>& support_weights() const noexcept { return support_weights_; }
    /// Minimal-image coordinates of support(), flattened with stride d.
    const std::vector<std::int64_t>& support_offsets() const noexcept { return support_offsets_; }

    friend DiscreteKernel build_kernel(const KernelSpec& spec, const TorusGrid& grid);

private:
    DiscreteKernel(TorusGrid grid, KernelSpec spec) : grid_(grid), spec_(spec) {}

    TorusGrid grid_;
    KernelSpec spec_;
    std::vector<double> weights_;
    std::vector<std::size_t> support_;
    std::vector<double> support_weights_;
    std::vector<std::int64_t> support_offsets_;
};

inline DiscreteKernel build_kernel(const KernelSpec& spec, const TorusGrid& grid) {
    spec.validate();
    DiscreteKernel k(grid, spec);
    const std::size_t n = grid.n_sites();
    const double side = static_cast<double>(grid.side());
    k.weights_.assign(n, 0.0);

    // Compare squared lattice lengths against (length * L)^2; the slack keeps
    // displacements lying exactly on the boundary inside the support.
    const double scaled = spec.length * side;
    const double bound2 = scaled * scaled * (1.0 + 1e-12);

    std::size_t off_origin = 0;
    for (std::size_t z = 0; z < n; ++z) {
        const auto r2 = static_cast<double>(grid.norm2(z));
        double raw = 0.0;
        switch (spec.variant) {
            case KernelVariant::MeanField:
                raw = 1.0;
                break;
            case KernelVariant::TopHat:
                raw = r2 <= bound2 ? 1.0 : 0.0;
                break;
            case KernelVariant::WrappedBump: {
                const double s = r2 / (scaled * scaled);
                raw = s < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - s)) : 0.0;
                break;
            }
        }
        k.weights_[z] = raw;
        if (raw > 0.0 && z != 0) ++off_origin;
    }
    // A kernel supported on the origin alone lets no site infect another.
    if (off_origin == 0)
        throw EmptySupport("kernel " + spec.to_string() + " has no support beyond the origin on grid " + grid.describe());

    double total = 0.0;
    for (double w : k.weights_) total += w;
    const double scale = 1.0 / (grid.cell_volume() * total);
    for (double& w : k.weights_) w *= scale;
    if (spec.variant == KernelVariant::MeanField) k.weights_.assign(n, 1.0);

    for (std::size_t z = 0; z < n; ++z) {
        if (k.weights_[z] <= 0.0) continue;
        k.support_.push_back(z);
        k.support_weights_.push_back(k.weights_[z]);
        for (auto c : grid.coords(z)) k.support_offsets_.push_back(grid.minimal_image(c));
    }
    return k;
}

}  // namespace epi
