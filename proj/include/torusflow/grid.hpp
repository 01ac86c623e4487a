#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>

#include "torusflow/errors.hpp"

namespace torusflow {

inline constexpr double two_pi = 6.283185307179586476925286766559;

/// Uniform periodic grid on [0,2pi)^d with n points per dimension.
/// Grid points sit exactly at j*h, h = 2pi/n.
class TorusGrid {
public:
    TorusGrid() = default;

    TorusGrid(int dim, int n) : dim_(dim), n_(n) {
        if (dim != 2 && dim != 3)
            throw invalid_argument_error("TorusGrid: dimension must be 2 or 3");
        if (n < 8 || (n & (n - 1)) != 0)
            throw invalid_argument_error("TorusGrid: n must be a power of two >= 8");
    }

    int dim() const { return dim_; }
    int n() const { return n_; }
    double spacing() const { return two_pi / n_; }

    std::size_t num_points() const {
        std::size_t p = 1;
        for (int a = 0; a < dim_; ++a) p *= static_cast<std::size_t>(n_);
        return p;
    }

    /// Linear index with x fastest: idx = i0 + n*i1 (+ n^2*i2).
    std::size_t index(const std::array<int, 3>& mi) const {
        std::size_t idx = 0;
        for (int a = dim_ - 1; a >= 0; --a) idx = idx * n_ + static_cast<std::size_t>(mi[a]);
        return idx;
    }

    std::array<int, 3> multi_index(std::size_t idx) const {
        std::array<int, 3> mi{0, 0, 0};
        for (int a = 0; a < dim_; ++a) {
            mi[a] = static_cast<int>(idx % n_);
            idx /= n_;
        }
        return mi;
    }

    std::array<double, 3> point(std::size_t idx) const {
        auto mi = multi_index(idx);
        const double h = spacing();
        return {mi[0] * h, mi[1] * h, dim_ == 3 ? mi[2] * h : 0.0};
    }

    /// Signed integer frequency for a storage slot: 0..n/2-1, then -n/2..-1.
    int freq(int i) const { return i < n_ / 2 ? i : i - n_; }

    /// Storage slot holding frequency k (k in [-n/2, n/2)).
    int slot(int k) const { return k >= 0 ? k : k + n_; }

    bool operator==(const TorusGrid& o) const { return dim_ == o.dim_ && n_ == o.n_; }
    bool operator!=(const TorusGrid& o) const { return !(*this == o); }

private:
    int dim_ = 2;
    int n_ = 8;
};

/// Wrap a coordinate into [0, 2pi).
inline double wrap_coordinate(double x) {
    double y = std::fmod(x, two_pi);
    return y < 0.0 ? y + two_pi : y;
}

/// Signed distance x-y on the circle, in (-pi, pi].
inline double wrap_difference(double x, double y) {
    double d = std::fmod(x - y, two_pi);
    if (d > 0.5 * two_pi) d -= two_pi;
    if (d <= -0.5 * two_pi) d += two_pi;
    return d;
}

} // namespace torusflow
