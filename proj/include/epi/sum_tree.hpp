#pragma once

#include <bit>
#include <cstddef>
#include <span>
#include <vector>

namespace epi {

/// Complete binary tree of partial sums over nonnegative weights. Every
/// internal node is recomputed from its two children on update, so the
/// total never accumulates drift from repeated incremental changes.
class SumTree {
public:
    SumTree() = default;
    explicit SumTree(std::size_t n) { resize(n); }

    std::size_t size() const noexcept { return n_; }

    void assign(std::span<const double> weights) {
        resize(weights.size());
        for (std::size_t i = 0; i < n_; ++i) node_[leaves_ + i] = weights[i];
        for (std::size_t i = leaves_ - 1; i > 0; --i) node_[i] = node_[2 * i] + node_[2 * i + 1];
    }

    void set(std::size_t index, double value) noexcept {
        std::size_t i = leaves_ + index;
        node_[i] = value;
        for (i >>= 1; i > 0; i >>= 1) node_[i] = node_[2 * i] + node_[2 * i + 1];
    }

    double value(std::size_t index) const noexcept { return node_[leaves_ + index]; }

    double total() const noexcept { return n_ == 0 ? 0.0 : node_[1]; }

    /// Sum of weights [0, count).
    double prefix(std::size_t count) const noexcept {
        double acc = 0.0;
        std::size_t lo = leaves_, hi = leaves_ + count;
        while (lo < hi) {
            if (lo & 1) acc += node_[lo++];
            if (hi & 1) acc += node_[--hi];
            lo >>= 1;
            hi >>= 1;
        }
        return acc;
    }

    /// Smallest index whose inclusive prefix sum exceeds target. Returns
    /// size() - 1 when target is at or beyond the total.
    std::size_t find(double target) const noexcept {
        std::size_t i = 1;
        while (i < leaves_) {
            if (node_[2 * i] <= target) {
                target -= node_[2 * i];
                i = 2 * i + 1;
            } else {
                i = 2 * i;
            }
        }
        const std::size_t pos = i - leaves_;
        return pos < n_ ? pos : n_ - 1;
    }

private:
    void resize(std::size_t n) {
        n_ = n;
        leaves_ = std::bit_ceil(std::max<std::size_t>(n, 1));
        node_.assign(2 * leaves_, 0.0);
    }

    std::size_t n_ = 0;
    std::size_t leaves_ = 1;
    std::vector<double> node_;
};

}  // namespace epi
