#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "epi/error.hpp"

namespace epi {

/// Periodic lattice {0,...,L-1}^d with spacing gamma = 1/L.
///
/// Sites are stored row-major with the first coordinate varying slowest.
/// Displacements are represented by the site index of their coordinates
/// reduced modulo L, so the displacement set coincides with the site set.
class TorusGrid {
public:
    TorusGrid(int dimension, std::int64_t side) : d_(dimension), side_(side) {
        if (dimension < 1) throw InvalidSpec("torus dimension must be >= 1");
        if (side < 1) throw InvalidSpec("torus side length must be >= 1");
        std::size_t n = 1;
        for (int k = 0; k < dimension; ++k) {
            if (n > std::numeric_limits<std::size_t>::max() / static_cast<std::size_t>(side))
                throw InvalidSpec("torus too large");
            n *= static_cast<std::size_t>(side);
        }
        n_sites_ = n;
    }

    int dimension() const noexcept { return d_; }
    std::int64_t side() const noexcept { return side_; }
    double gamma() const noexcept { return 1.0 / static_cast<double>(side_); }
    std::size_t n_sites() const noexcept { return n_sites_; }
    /// gamma^d, the mass of one site in the empirical measures.
    double cell_volume() const noexcept { return 1.0 / static_cast<double>(n_sites_); }

    bool operator==(const TorusGrid& other) const noexcept {
        return d_ == other.d_ && side_ == other.side_;
    }

    std::vector<std::int64_t> coords(std::size_t site) const {
        std::vector<std::int64_t> c(static_cast<std::size_t>(d_));
        for (int k = d_ - 1; k >= 0; --k) {
            c[static_cast<std::size_t>(k)] = static_cast<std::int64_t>(site % static_cast<std::size_t>(side_));
            site /= static_cast<std::size_t>(side_);
        }
        return c;
    }

    std::size_t site(std::span<const std::int64_t> c) const {
        std::size_t s = 0;
        for (int k = 0; k < d_; ++k) s = s * static_cast<std::size_t>(side_) + wrap(c[static_cast<std::size_t>(k)]);
        return s;
    }

    std::size_t wrap(std::int64_t c) const noexcept {
        std::int64_t m = c % side_;
        if (m < 0) m += side_;
        return static_cast<std::size_t>(m);
    }

    /// Minimal-image representative of a coordinate, in (-L/2, L/2].
    std::int64_t minimal_image(std::int64_t c) const noexcept {
        auto m = static_cast<std::int64_t>(wrap(c));
        return 2 * m > side_ ? m - side_ : m;
    }

    /// Squared minimal-image length of a displacement, in lattice units.
    std::int64_t norm2(std::size_t displacement) const {
        std::int64_t acc = 0;
        for (auto c : coords(displacement)) {
            const auto m = minimal_image(c);
            acc += m * m;
        }
        return acc;
    }

    /// Site index of -z.
    std::size_t negate(std::size_t displacement) const {
        auto c = coords(displacement);
        for (auto& v : c) v = -v;
        return site(c);
    }

    /// Site index of a + sign * b (coordinate-wise, modulo L).
    std::size_t add(std::size_t a, std::size_t b, int sign = 1) const {
        auto ca = coords(a);
        const auto cb = coords(b);
        for (std::size_t k = 0; k < ca.size(); ++k) ca[k] += sign * cb[k];
        return site(ca);
    }

    /// Macroscopic position gamma * x in [0,1)^d.
    std::vector<double> position(std::size_t site) const {
        std::vector<double> r(static_cast<std::size_t>(d_));
        const auto c = coords(site);
        for (std::size_t k = 0; k < r.size(); ++k) r[k] = static_cast<double>(c[k]) * gamma();
        return r;
    }

    std::string describe() const {
        return "d=" + std::to_string(d_) + ",L=" + std::to_string(side_);
    }

private:
    int d_;
    std::int64_t side_;
    std::size_t n_sites_ = 1;
};

}  // namespace epi
