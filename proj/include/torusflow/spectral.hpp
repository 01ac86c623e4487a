#pragma once

#include <cmath>
#include <complex>

#include "torusflow/field.hpp"
#include "torusflow/parallel.hpp"

namespace torusflow {

/// Nonnegative Sobolev regularity exponent. Solver entry points warn when
/// s <= d/2 + 1, where the contraction theory stops applying.
struct SobolevIndex {
    double s = 0.0;
    SobolevIndex() = default;
    SobolevIndex(double value) : s(value) {
        if (s < 0.0) throw invalid_argument_error("SobolevIndex: s must be >= 0");
    }
    operator double() const { return s; }
};

namespace detail {

/// Iterate all modes; fn(slot, k[3], |k|^2). Frequencies are signed,
/// Nyquist slot maps to -n/2.
template <class Fn>
void for_each_mode(const TorusGrid& grid, Fn&& fn) {
    const int n = grid.n();
    const int d = grid.dim();
    const std::size_t total = grid.num_points();
    for (std::size_t idx = 0; idx < total; ++idx) {
        std::size_t rem = idx;
        int k[3] = {0, 0, 0};
        double k2 = 0.0;
        for (int a = 0; a < d; ++a) {
            const int i = static_cast<int>(rem % n);
            rem /= n;
            k[a] = grid.freq(i);
            k2 += static_cast<double>(k[a]) * k[a];
        }
        fn(idx, k, k2);
    }
}

inline bool is_nyquist(const TorusGrid& grid, const int k[3]) {
    for (int a = 0; a < grid.dim(); ++a)
        if (k[a] == -grid.n() / 2) return true;
    return false;
}

} // namespace detail

// ---- differentiation --------------------------------------------------------

/// d/dx_axis in spectral space: multiply by i*k_axis; the Nyquist mode of the
/// differentiated axis is zeroed to keep derivatives real and odd-symmetric.
inline void differentiate_inplace(SpectralScalar& s, int axis) {
    const int n = s.grid().n();
    auto c = s.comp(0);
    detail::for_each_mode(s.grid(), [&](std::size_t idx, const int k[3], double) {
        if (k[axis] == -n / 2) {
            c[idx] = 0.0;
        } else {
            c[idx] *= std::complex<double>(0.0, static_cast<double>(k[axis]));
        }
    });
}

inline ScalarField derivative(const ScalarField& f, int axis) {
    SpectralScalar s = to_spectral(f);
    differentiate_inplace(s, axis);
    return from_spectral(s);
}

inline VectorField gradient(const ScalarField& f) {
    SpectralScalar base = to_spectral(f);
    VectorField out(f.grid());
    for (int a = 0; a < f.grid().dim(); ++a) {
        SpectralScalar da = base;
        differentiate_inplace(da, a);
        ScalarField comp = from_spectral(da);
        auto dst = out.comp(a);
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = comp[i];
    }
    return out;
}

/// Entry (i,j) = d v_i / d x_j.
inline MatrixField jacobian_of_field(const VectorField& v) {
    const int d = v.grid().dim();
    MatrixField out(v.grid());
    for (int i = 0; i < d; ++i) {
        SpectralScalar base = to_spectral(v.component(i));
        for (int j = 0; j < d; ++j) {
            SpectralScalar dj = base;
            differentiate_inplace(dj, j);
            ScalarField comp = from_spectral(dj);
            auto dst = out.entry(i, j);
            for (std::size_t p = 0; p < dst.size(); ++p) dst[p] = comp[p];
        }
    }
    return out;
}

inline ScalarField divergence(const VectorField& v) {
    const int d = v.grid().dim();
    SpectralScalar acc(v.grid());
    for (int a = 0; a < d; ++a) {
        SpectralScalar da = to_spectral(v.component(a));
        differentiate_inplace(da, a);
        auto dst = acc.comp(0);
        auto src = da.comp(0);
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
    return from_spectral(acc);
}

/// Scalar vorticity dv2/dx1 - dv1/dx2 (d = 2 only).
inline ScalarField curl_2d(const VectorField& v) {
    if (v.grid().dim() != 2) throw invalid_argument_error("curl_2d: needs d = 2");
    SpectralScalar a = to_spectral(v.component(1));
    differentiate_inplace(a, 0);
    SpectralScalar b = to_spectral(v.component(0));
    differentiate_inplace(b, 1);
    auto ca = a.comp(0);
    auto cb = b.comp(0);
    for (std::size_t i = 0; i < ca.size(); ++i) ca[i] -= cb[i];
    return from_spectral(a);
}

inline ScalarField laplacian(const ScalarField& f) {
    SpectralScalar s = to_spectral(f);
    auto c = s.comp(0);
    detail::for_each_mode(f.grid(), [&](std::size_t idx, const int*, double k2) {
        c[idx] *= -k2;
    });
    return from_spectral(s);
}

// ---- Leray-Hodge projection --------------------------------------------------

/// Mode-wise v - k (k.v)/|k|^2; the k = 0 mode passes through (constants are
/// divergence-free).
inline void leray_project_inplace(SpectralVector& v) {
    const int d = v.grid().dim();
    std::complex<double>* c[3] = {nullptr, nullptr, nullptr};
    for (int a = 0; a < d; ++a) c[a] = v.comp(a).data();
    detail::for_each_mode(v.grid(), [&](std::size_t idx, const int k[3], double k2) {
        if (k2 == 0.0) return;
        std::complex<double> kdotv(0.0, 0.0);
        for (int a = 0; a < d; ++a) kdotv += static_cast<double>(k[a]) * c[a][idx];
        kdotv /= k2;
        for (int a = 0; a < d; ++a) c[a][idx] -= static_cast<double>(k[a]) * kdotv;
    });
}

inline VectorField leray_project(const VectorField& v) {
    SpectralVector s = to_spectral(v);
    leray_project_inplace(s);
    return from_spectral(s);
}

// ---- norms and inner products -------------------------------------------------

/// H^s norm with weights (1+|k|^2)^s over the mean-value coefficients, summed
/// over components. s = 0 is the root mean square.
inline double sobolev_norm(const SpectralBase& v, SobolevIndex s) {
    double acc = 0.0;
    std::vector<double> weights(v.num_modes());
    detail::for_each_mode(v.grid(), [&](std::size_t idx, const int*, double k2) {
        weights[idx] = std::pow(1.0 + k2, s.s);
    });
    for (int c = 0; c < v.ncomp(); ++c) {
        auto cc = v.comp(c);
        for (std::size_t i = 0; i < cc.size(); ++i) acc += weights[i] * std::norm(cc[i]);
    }
    return std::sqrt(acc);
}

inline double sobolev_norm(const ScalarField& f, SobolevIndex s) {
    return sobolev_norm(to_spectral(f), s);
}
inline double sobolev_norm(const VectorField& f, SobolevIndex s) {
    return sobolev_norm(to_spectral(f), s);
}

/// (a,b)_s = sum_k (1+|k|^2)^s a_k . conj(b_k), real part.
inline double sobolev_inner(const SpectralBase& a, const SpectralBase& b, SobolevIndex s) {
    if (a.ncomp() != b.ncomp()) throw invalid_argument_error("sobolev_inner: shape mismatch");
    detail::check_same_grid(a.grid(), b.grid(), "sobolev_inner");
    std::vector<double> weights(a.num_modes());
    detail::for_each_mode(a.grid(), [&](std::size_t idx, const int*, double k2) {
        weights[idx] = std::pow(1.0 + k2, s.s);
    });
    double acc = 0.0;
    for (int c = 0; c < a.ncomp(); ++c) {
        auto ca = a.comp(c);
        auto cb = b.comp(c);
        for (std::size_t i = 0; i < ca.size(); ++i)
            acc += weights[i] * (ca[i] * std::conj(cb[i])).real();
    }
    return acc;
}

inline double sobolev_inner(const VectorField& a, const VectorField& b, SobolevIndex s) {
    return sobolev_inner(to_spectral(a), to_spectral(b), s);
}

/// Grid-quadrature (mean-value) L2 inner product; Parseval partner of
/// sobolev_inner at s = 0.
inline double l2_inner(const FieldBase& a, const FieldBase& b) {
    if (a.ncomp() != b.ncomp()) throw invalid_argument_error("l2_inner: shape mismatch");
    detail::check_same_grid(a.grid(), b.grid(), "l2_inner");
    double acc = 0.0;
    auto ra = a.raw();
    auto rb = b.raw();
    for (std::size_t i = 0; i < ra.size(); ++i) acc += ra[i] * rb[i];
    return acc / static_cast<double>(a.num_points());
}

inline double l2_norm(const FieldBase& a) { return std::sqrt(l2_inner(a, a)); }

/// Mean kinetic energy (1/2)|u|^2 averaged over the torus.
inline double kinetic_energy(const VectorField& u) { return 0.5 * l2_inner(u, u); }

// ---- dealiasing and advection ---------------------------------------------------

/// 2/3-rule: zero every mode with |k_a| > n/3 on some axis.
inline void dealias_inplace(SpectralBase& v) {
    const int kmax = v.grid().n() / 3;
    const int d = v.grid().dim();
    for (int c = 0; c < v.ncomp(); ++c) {
        auto cc = v.comp(c);
        detail::for_each_mode(v.grid(), [&](std::size_t idx, const int k[3], double) {
            for (int a = 0; a < d; ++a) {
                if (std::abs(k[a]) > kmax) {
                    cc[idx] = 0.0;
                    return;
                }
            }
        });
    }
}

inline VectorField dealias(const VectorField& v) {
    SpectralVector s = to_spectral(v);
    dealias_inplace(s);
    return from_spectral(s);
}

/// B(u,v) = (u . grad) v, physical-space product of u with the spectral
/// derivatives of v, dealiased by the 2/3 rule.
inline VectorField advect(const VectorField& u, const VectorField& v) {
    detail::check_same_grid(u.grid(), v.grid(), "advect");
    const int d = u.grid().dim();
    MatrixField dv = jacobian_of_field(v);
    VectorField out(u.grid());
    for (int i = 0; i < d; ++i) {
        auto dst = out.comp(i);
        for (int j = 0; j < d; ++j) {
            auto uj = u.comp(j);
            auto dvij = dv.entry(i, j);
            for (std::size_t p = 0; p < dst.size(); ++p) dst[p] += uj[p] * dvij[p];
        }
    }
    SpectralVector s = to_spectral(out);
    dealias_inplace(s);
    return from_spectral(s);
}

// ---- pointwise matrix algebra -----------------------------------------------

/// w_i = sum_j M_ij v_j at every grid point.
inline VectorField matrix_apply(const MatrixField& m, const VectorField& v) {
    detail::check_same_grid(m.grid(), v.grid(), "matrix_apply");
    const int d = v.grid().dim();
    VectorField out(v.grid());
    for (int i = 0; i < d; ++i) {
        auto dst = out.comp(i);
        for (int j = 0; j < d; ++j) {
            auto mij = m.entry(i, j);
            auto vj = v.comp(j);
            for (std::size_t p = 0; p < dst.size(); ++p) dst[p] += mij[p] * vj[p];
        }
    }
    return out;
}

/// w_i = sum_j M_ji v_j (transpose application).
inline VectorField matrix_transpose_apply(const MatrixField& m, const VectorField& v) {
    detail::check_same_grid(m.grid(), v.grid(), "matrix_transpose_apply");
    const int d = v.grid().dim();
    VectorField out(v.grid());
    for (int i = 0; i < d; ++i) {
        auto dst = out.comp(i);
        for (int j = 0; j < d; ++j) {
            auto mji = m.entry(j, i);
            auto vj = v.comp(j);
            for (std::size_t p = 0; p < dst.size(); ++p) dst[p] += mji[p] * vj[p];
        }
    }
    return out;
}

inline ScalarField matrix_determinant(const MatrixField& m) {
    const int d = m.grid().dim();
    ScalarField out(m.grid());
    if (d == 2) {
        auto a = m.entry(0, 0), b = m.entry(0, 1), c = m.entry(1, 0), e = m.entry(1, 1);
        for (std::size_t p = 0; p < out.num_points(); ++p) out[p] = a[p] * e[p] - b[p] * c[p];
    } else {
        for (std::size_t p = 0; p < out.num_points(); ++p) {
            const double a00 = m.entry(0, 0)[p], a01 = m.entry(0, 1)[p], a02 = m.entry(0, 2)[p];
            const double a10 = m.entry(1, 0)[p], a11 = m.entry(1, 1)[p], a12 = m.entry(1, 2)[p];
            const double a20 = m.entry(2, 0)[p], a21 = m.entry(2, 1)[p], a22 = m.entry(2, 2)[p];
            out[p] = a00 * (a11 * a22 - a12 * a21) - a01 * (a10 * a22 - a12 * a20) +
                     a02 * (a10 * a21 - a11 * a20);
        }
    }
    return out;
}

/// Pointwise matrix inverse. det <= det_floor anywhere is a resolution failure.
inline MatrixField matrix_inverse(const MatrixField& m, double det_floor = 1e-8) {
    const int d = m.grid().dim();
    MatrixField out(m.grid());
    ScalarField det = matrix_determinant(m);
    for (std::size_t p = 0; p < out.num_points(); ++p) {
        if (std::abs(det[p]) <= det_floor)
            throw resolution_error("matrix_inverse: singular Jacobian, |det| <= 1e-8");
    }
    if (d == 2) {
        auto a = m.entry(0, 0), b = m.entry(0, 1), c = m.entry(1, 0), e = m.entry(1, 1);
        auto o00 = out.entry(0, 0), o01 = out.entry(0, 1), o10 = out.entry(1, 0),
             o11 = out.entry(1, 1);
        for (std::size_t p = 0; p < out.num_points(); ++p) {
            const double inv = 1.0 / det[p];
            o00[p] = e[p] * inv;
            o01[p] = -b[p] * inv;
            o10[p] = -c[p] * inv;
            o11[p] = a[p] * inv;
        }
    } else {
        for (std::size_t p = 0; p < out.num_points(); ++p) {
            double a[3][3];
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) a[i][j] = m.entry(i, j)[p];
            const double inv = 1.0 / det[p];
            out.entry(0, 0)[p] = (a[1][1] * a[2][2] - a[1][2] * a[2][1]) * inv;
            out.entry(0, 1)[p] = (a[0][2] * a[2][1] - a[0][1] * a[2][2]) * inv;
            out.entry(0, 2)[p] = (a[0][1] * a[1][2] - a[0][2] * a[1][1]) * inv;
            out.entry(1, 0)[p] = (a[1][2] * a[2][0] - a[1][0] * a[2][2]) * inv;
            out.entry(1, 1)[p] = (a[0][0] * a[2][2] - a[0][2] * a[2][0]) * inv;
            out.entry(1, 2)[p] = (a[0][2] * a[1][0] - a[0][0] * a[1][2]) * inv;
            out.entry(2, 0)[p] = (a[1][0] * a[2][1] - a[1][1] * a[2][0]) * inv;
            out.entry(2, 1)[p] = (a[0][1] * a[2][0] - a[0][0] * a[2][1]) * inv;
            out.entry(2, 2)[p] = (a[0][0] * a[1][1] - a[0][1] * a[1][0]) * inv;
        }
    }
    return out;
}

inline double max_divergence(const VectorField& v) { return divergence(v).max_abs(); }

} // namespace torusflow
