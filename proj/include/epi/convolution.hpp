#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "epi/error.hpp"
#include "epi/kernel.hpp"

namespace epi {

/// Support size up to which convolution uses direct summation over the support.
inline constexpr std::size_t kDirectSupportLimit = 64;

namespace detail {

// FFTW's planner is not reentrant; plan execution is.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwFree {
    void operator()(void* p) const noexcept { fftw_free(p); }
};
struct FftwPlanDestroy {
    void operator()(fftw_plan p) const noexcept {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(p);
    }
};
using FftwPlan = std::unique_ptr<std::remove_pointer_t<fftw_plan>, FftwPlanDestroy>;

inline void check_size(const TorusGrid& grid, std::size_t size) {
    if (size != grid.n_sites())
        throw GridMismatch("field has " + std::to_string(size) + " values, grid " + grid.describe() + " has " +
                           std::to_string(grid.n_sites()) + " sites");
}

}  // namespace detail

/// Site indices x - z for every site x and support displacement z, laid out
/// as table[x * |support| + s].
inline std::vector<std::size_t> support_neighbor_table(const DiscreteKernel& kernel) {
    const TorusGrid& grid = kernel.grid();
    const std::size_t n = grid.n_sites();
    const auto d = static_cast<std::size_t>(grid.dimension());
    const auto& offsets = kernel.support_offsets();
    const std::size_t m = kernel.support().size();
    std::vector<std::size_t> table(n * m);
    std::vector<std::int64_t> c(d);
    for (std::size_t x = 0; x < n; ++x) {
        const auto cx = grid.coords(x);
        for (std::size_t s = 0; s < m; ++s) {
            for (std::size_t k = 0; k < d; ++k) c[k] = cx[k] - offsets[s * d + k];
            table[x * m + s] = grid.site(c);
        }
    }
    return table;
}

namespace detail {

inline void convolve_with_table(const DiscreteKernel& kernel, const std::vector<std::size_t>& table,
                                std::span<const double> field, std::span<double> out) {
    const auto& weights = kernel.support_weights();
    const std::size_t m = weights.size();
    const double vol = kernel.grid().cell_volume();
    for (std::size_t x = 0; x < out.size(); ++x) {
        const std::size_t* row = table.data() + x * m;
        double acc = 0.0;
        for (std::size_t s = 0; s < m; ++s) acc += weights[s] * field[row[s]];
        out[x] = vol * acc;
    }
}

}  // namespace detail

/// (J*f)(x) = gamma^d sum_{z in support} w[z] f(x - z), summed directly.
inline void convolve_direct(const DiscreteKernel& kernel, std::span<const double> field, std::span<double> out) {
    detail::check_size(kernel.grid(), field.size());
    detail::check_size(kernel.grid(), out.size());
    detail::convolve_with_table(kernel, support_neighbor_table(kernel), field, out);
}

/// Reusable convolution operator for one kernel. Owns its FFT buffers, so a
/// Convolver must not be shared between threads; the kernel it wraps may be.
class Convolver {
public:
    enum class Path { Average, Direct, Spectral };

    explicit Convolver(const DiscreteKernel& kernel, bool force_spectral = false) : kernel_(kernel) {
        if (force_spectral)
            path_ = Path::Spectral;
        else if (kernel.is_mean_field())
            path_ = Path::Average;
        else if (kernel.support().size() <= kDirectSupportLimit)
            path_ = Path::Direct;
        else
            path_ = Path::Spectral;
        if (path_ == Path::Spectral) plan_spectral();
        if (path_ == Path::Direct) table_ = support_neighbor_table(kernel_);
    }

    Convolver(const Convolver&) = delete;
    Convolver& operator=(const Convolver&) = delete;

    Path path() const noexcept { return path_; }
    const DiscreteKernel& kernel() const noexcept { return kernel_; }

    void apply(std::span<const double> field, std::span<double> out) {
        const TorusGrid& grid = kernel_.grid();
        detail::check_size(grid, field.size());
        detail::check_size(grid, out.size());
        switch (path_) {
            case Path::Average: {
                double acc = 0.0;
                for (double v : field) acc += v;
                const double mean = acc * grid.cell_volume();
                for (double& v : out) v = mean;
                return;
            }
            case Path::Direct:
                detail::convolve_with_table(kernel_, table_, field, out);
                return;
            case Path::Spectral:
                apply_spectral(field, out);
                return;
        }
    }

    std::vector<double> operator()(std::span<const double> field) {
        std::vector<double> out(field.size());
        apply(field, out);
        return out;
    }

private:
    void plan_spectral() {
        const TorusGrid& grid = kernel_.grid();
        const std::size_t n = grid.n_sites();
        const auto side = static_cast<std::size_t>(grid.side());
        n_complex_ = n / side * (side / 2 + 1);
        real_.reset(static_cast<double*>(fftw_malloc(sizeof(double) * n)));
        spec_.reset(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n_complex_)));
        std::vector<int> dims(static_cast<std::size_t>(grid.dimension()), static_cast<int>(grid.side()));
        {
            std::lock_guard lock(detail::fftw_planner_mutex());
            forward_.reset(fftw_plan_dft_r2c(grid.dimension(), dims.data(), real_.get(), spec_.get(), FFTW_ESTIMATE));
            backward_.reset(fftw_plan_dft_c2r(grid.dimension(), dims.data(), spec_.get(), real_.get(), FFTW_ESTIMATE));
        }
        // Transform of gamma^d w, with the 1/n of the inverse transform folded in.
        const double scale = grid.cell_volume() / static_cast<double>(n);
        for (std::size_t z = 0; z < n; ++z) real_.get()[z] = kernel_.weight(z) * scale;
        fftw_execute(forward_.get());
        kernel_hat_.resize(n_complex_);
        for (std::size_t k = 0; k < n_complex_; ++k) kernel_hat_[k] = {spec_.get()[k][0], spec_.get()[k][1]};
    }

    void apply_spectral(std::span<const double> field, std::span<double> out) {
        const std::size_t n = field.size();
        std::copy(field.begin(), field.end(), real_.get());
        fftw_execute(forward_.get());
        for (std::size_t k = 0; k < n_complex_; ++k) {
            const std::complex<double> f{spec_.get()[k][0], spec_.get()[k][1]};
            const auto p = f * kernel_hat_[k];
            spec_.get()[k][0] = p.real();
            spec_.get()[k][1] = p.imag();
        }
        fftw_execute(backward_.get());
        std::copy(real_.get(), real_.get() + n, out.begin());
    }

    DiscreteKernel kernel_;
    Path path_ = Path::Direct;
    std::size_t n_complex_ = 0;
    std::unique_ptr<double, detail::FftwFree> real_;
    std::unique_ptr<fftw_complex, detail::FftwFree> spec_;
    detail::FftwPlan forward_;
    detail::FftwPlan backward_;
    std::vector<std::complex<double>> kernel_hat_;
    std::vector<std::size_t> table_;
};

/// One-off convolution; picks the path the same way Convolver does.
inline std::vector<double> convolve(const DiscreteKernel& kernel, std::span<const double> field) {
    Convolver conv(kernel);
    return conv(field);
}

/// Spectral convolution regardless of support size.
inline std::vector<double> convolve_spectral(const DiscreteKernel& kernel, std::span<const double> field) {
    Convolver conv(kernel, true);
    return conv(field);
}

}  // namespace epi
