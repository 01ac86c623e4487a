#pragma once

#include <cmath>
#include <complex>
#include <span>
#include <type_traits>
#include <vector>

#include "torusflow/fft.hpp"
#include "torusflow/grid.hpp"

namespace torusflow {

namespace detail {
inline void check_same_grid(const TorusGrid& a, const TorusGrid& b, const char* where) {
    if (a != b) throw invalid_argument_error(std::string(where) + ": grid mismatch");
}
} // namespace detail

/// Real samples at grid points. Component blocks are contiguous, x-fastest
/// within a block (the raw file layout is the in-memory layout).
class FieldBase {
public:
    FieldBase() = default;
    FieldBase(const TorusGrid& grid, int ncomp)
        : grid_(grid), ncomp_(ncomp), data_(grid.num_points() * ncomp, 0.0) {}

    const TorusGrid& grid() const { return grid_; }
    int ncomp() const { return ncomp_; }
    std::size_t num_points() const { return grid_.num_points(); }

    std::span<double> comp(int c) {
        return {data_.data() + static_cast<std::size_t>(c) * num_points(), num_points()};
    }
    std::span<const double> comp(int c) const {
        return {data_.data() + static_cast<std::size_t>(c) * num_points(), num_points()};
    }

    std::span<double> raw() { return data_; }
    std::span<const double> raw() const { return data_; }

    bool finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : data_) m = std::max(m, std::abs(v));
        return m;
    }

protected:
    TorusGrid grid_;
    int ncomp_ = 0;
    std::vector<double> data_;
};

class ScalarField : public FieldBase {
public:
    ScalarField() = default;
    explicit ScalarField(const TorusGrid& grid) : FieldBase(grid, 1) {}

    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }

    template <class Fn>
    static ScalarField from_function(const TorusGrid& grid, Fn&& fn) {
        ScalarField f(grid);
        for (std::size_t i = 0; i < f.num_points(); ++i) f[i] = fn(grid.point(i));
        return f;
    }
};

class VectorField : public FieldBase {
public:
    VectorField() = default;
    explicit VectorField(const TorusGrid& grid) : FieldBase(grid, grid.dim()) {}

    template <class Fn>
    static VectorField from_function(const TorusGrid& grid, Fn&& fn) {
        VectorField f(grid);
        for (std::size_t i = 0; i < f.num_points(); ++i) {
            auto v = fn(grid.point(i));
            for (int c = 0; c < grid.dim(); ++c) f.comp(c)[i] = v[c];
        }
        return f;
    }

    ScalarField component(int c) const {
        ScalarField s(grid_);
        auto src = comp(c);
        for (std::size_t i = 0; i < num_points(); ++i) s[i] = src[i];
        return s;
    }
};

/// Row-major d x d matrix per point; entry (i,j) lives in component i*d+j.
class MatrixField : public FieldBase {
public:
    MatrixField() = default;
    explicit MatrixField(const TorusGrid& grid) : FieldBase(grid, grid.dim() * grid.dim()) {}

    std::span<double> entry(int i, int j) { return comp(i * grid_.dim() + j); }
    std::span<const double> entry(int i, int j) const { return comp(i * grid_.dim() + j); }

    static MatrixField identity(const TorusGrid& grid) {
        MatrixField m(grid);
        for (int i = 0; i < grid.dim(); ++i) {
            auto e = m.entry(i, i);
            for (std::size_t p = 0; p < m.num_points(); ++p) e[p] = 1.0;
        }
        return m;
    }
};

/// Fourier coefficients with the mean-value convention u_hat(0) = spatial mean.
class SpectralBase {
public:
    SpectralBase() = default;
    SpectralBase(const TorusGrid& grid, int ncomp)
        : grid_(grid), ncomp_(ncomp), data_(grid.num_points() * ncomp) {}

    const TorusGrid& grid() const { return grid_; }
    int ncomp() const { return ncomp_; }
    std::size_t num_modes() const { return grid_.num_points(); }

    std::span<std::complex<double>> comp(int c) {
        return {data_.data() + static_cast<std::size_t>(c) * num_modes(), num_modes()};
    }
    std::span<const std::complex<double>> comp(int c) const {
        return {data_.data() + static_cast<std::size_t>(c) * num_modes(), num_modes()};
    }

protected:
    TorusGrid grid_;
    int ncomp_ = 0;
    std::vector<std::complex<double>> data_;
};

class SpectralScalar : public SpectralBase {
public:
    SpectralScalar() = default;
    explicit SpectralScalar(const TorusGrid& grid) : SpectralBase(grid, 1) {}
    std::complex<double> operator[](std::size_t i) const { return data_[i]; }
    std::complex<double>& operator[](std::size_t i) { return data_[i]; }
};

class SpectralVector : public SpectralBase {
public:
    SpectralVector() = default;
    explicit SpectralVector(const TorusGrid& grid) : SpectralBase(grid, grid.dim()) {}
};

// ---- transforms ------------------------------------------------------------

inline SpectralScalar to_spectral(const ScalarField& f) {
    SpectralScalar out(f.grid());
    std::vector<std::complex<double>> in(f.num_points());
    for (std::size_t i = 0; i < in.size(); ++i) in[i] = f[i];
    fft_forward_raw(f.grid(), in.data(), out.comp(0).data());
    const double scale = 1.0 / static_cast<double>(f.num_points());
    for (auto& c : out.comp(0)) c *= scale;
    return out;
}

inline ScalarField from_spectral(const SpectralScalar& s) {
    ScalarField out(s.grid());
    std::vector<std::complex<double>> tmp(s.num_modes());
    fft_backward_raw(s.grid(), s.comp(0).data(), tmp.data());
    for (std::size_t i = 0; i < tmp.size(); ++i) out[i] = tmp[i].real();
    return out;
}

inline SpectralVector to_spectral(const VectorField& f) {
    SpectralVector out(f.grid());
    std::vector<std::complex<double>> in(f.num_points());
    const double scale = 1.0 / static_cast<double>(f.num_points());
    for (int c = 0; c < f.ncomp(); ++c) {
        auto src = f.comp(c);
        for (std::size_t i = 0; i < in.size(); ++i) in[i] = src[i];
        fft_forward_raw(f.grid(), in.data(), out.comp(c).data());
        for (auto& v : out.comp(c)) v *= scale;
    }
    return out;
}

inline VectorField from_spectral(const SpectralVector& s) {
    VectorField out(s.grid());
    std::vector<std::complex<double>> tmp(s.num_modes());
    for (int c = 0; c < s.ncomp(); ++c) {
        fft_backward_raw(s.grid(), s.comp(c).data(), tmp.data());
        auto dst = out.comp(c);
        for (std::size_t i = 0; i < tmp.size(); ++i) dst[i] = tmp[i].real();
    }
    return out;
}

// ---- elementwise arithmetic ------------------------------------------------

template <class F>
concept GridField = std::is_base_of_v<FieldBase, F>;

template <GridField F>
F field_axpy(const F& x, const F& y, double a) {
    detail::check_same_grid(x.grid(), y.grid(), "field_axpy");
    F out = x;
    auto o = out.raw();
    auto yv = y.raw();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += a * yv[i];
    return out;
}

template <GridField F>
F operator+(const F& a, const F& b) { return field_axpy(a, b, 1.0); }

template <GridField F>
F operator-(const F& a, const F& b) { return field_axpy(a, b, -1.0); }

template <GridField F>
F operator*(double a, const F& f) {
    F out = f;
    for (auto& v : out.raw()) v *= a;
    return out;
}

} // namespace torusflow
