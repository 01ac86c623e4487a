#pragma once

#include <cmath>
#include <complex>
#include <memory>
#include <vector>

#include "torusflow/field.hpp"
#include "torusflow/spectral.hpp"

namespace torusflow {

enum class InterpMethod { spline, fourier };

inline InterpMethod interp_method_from_string(const std::string& s) {
    if (s == "spline") return InterpMethod::spline;
    if (s == "fourier") return InterpMethod::fourier;
    throw invalid_argument_error("interpolation method must be \"spline\" or \"fourier\"");
}

/// Periodic point evaluation of a gridded field; out must hold ncomp doubles.
class Interpolant {
public:
    explicit Interpolant(const TorusGrid& grid, int ncomp) : grid_(grid), ncomp_(ncomp) {}
    virtual ~Interpolant() = default;
    const TorusGrid& grid() const { return grid_; }
    int ncomp() const { return ncomp_; }
    virtual void eval(const double* x, double* out) const = 0;

protected:
    TorusGrid grid_;
    int ncomp_;
};

/// Periodic cubic B-spline. Coefficients are prefiltered in spectral space
/// (divide by (2 + cos(k h))/3 per axis) so grid values reproduce exactly;
/// off-grid error is O(h^4) on smooth fields.
class SplineInterpolant final : public Interpolant {
public:
    explicit SplineInterpolant(const FieldBase& f)
        : Interpolant(f.grid(), f.ncomp()), coef_(f.ncomp() * f.num_points()) {
        const int n = grid_.n();
        const double h = grid_.spacing();
        std::vector<double> bhat(n);
        for (int i = 0; i < n; ++i) bhat[i] = (2.0 + std::cos(grid_.freq(i) * h)) / 3.0;
        for (int c = 0; c < ncomp_; ++c) {
            ScalarField tmp(grid_);
            auto src = f.comp(c);
            for (std::size_t i = 0; i < src.size(); ++i) tmp[i] = src[i];
            SpectralScalar sc = to_spectral(tmp);
            auto cc = sc.comp(0);
            detail::for_each_mode(grid_, [&](std::size_t idx, const int k[3], double) {
                double w = 1.0;
                for (int a = 0; a < grid_.dim(); ++a) w *= bhat[grid_.slot(k[a])];
                cc[idx] /= w;
            });
            ScalarField filtered = from_spectral(sc);
            double* dst = coef_.data() + static_cast<std::size_t>(c) * grid_.num_points();
            for (std::size_t i = 0; i < filtered.num_points(); ++i) dst[i] = filtered[i];
        }
    }

    void eval(const double* x, double* out) const override {
        const int n = grid_.n();
        const int d = grid_.dim();
        int base[3][4];
        double w[3][4];
        for (int a = 0; a < d; ++a) {
            const double u = x[a] / grid_.spacing();
            const double fl = std::floor(u);
            weights(u - fl, w[a]);
            long i0 = static_cast<long>(fl) - 1;
            long wrap = i0 % n;
            if (wrap < 0) wrap += n;
            for (int j = 0; j < 4; ++j) {
                base[a][j] = static_cast<int>(wrap);
                if (++wrap == n) wrap = 0;
            }
        }
        const std::size_t npts = grid_.num_points();
        for (int c = 0; c < ncomp_; ++c) {
            const double* cf = coef_.data() + static_cast<std::size_t>(c) * npts;
            double acc = 0.0;
            if (d == 2) {
                for (int jy = 0; jy < 4; ++jy) {
                    const double* row = cf + static_cast<std::size_t>(n) * base[1][jy];
                    double partial = 0.0;
                    for (int jx = 0; jx < 4; ++jx) partial += w[0][jx] * row[base[0][jx]];
                    acc += w[1][jy] * partial;
                }
            } else {
                for (int jz = 0; jz < 4; ++jz) {
                    const double* plane =
                        cf + static_cast<std::size_t>(n) * n * base[2][jz];
                    double pz = 0.0;
                    for (int jy = 0; jy < 4; ++jy) {
                        const double* row = plane + static_cast<std::size_t>(n) * base[1][jy];
                        double partial = 0.0;
                        for (int jx = 0; jx < 4; ++jx) partial += w[0][jx] * row[base[0][jx]];
                        pz += w[1][jy] * partial;
                    }
                    acc += w[2][jz] * pz;
                }
            }
            out[c] = acc;
        }
    }

private:
    static void weights(double t, double w[4]) {
        const double t2 = t * t;
        const double t3 = t2 * t;
        w[0] = (1.0 - 3.0 * t + 3.0 * t2 - t3) / 6.0;
        w[1] = (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0;
        w[2] = (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0;
        w[3] = t3 / 6.0;
    }

    std::vector<double> coef_;
};

/// Direct trigonometric evaluation of the stored spectrum: exact for
/// band-limited fields, O(n^d) per point. Meant for oracles and accuracy
/// checks, not inner loops.
class FourierInterpolant final : public Interpolant {
public:
    explicit FourierInterpolant(const FieldBase& f)
        : Interpolant(f.grid(), f.ncomp()), coef_(f.ncomp() * f.num_points()) {
        for (int c = 0; c < ncomp_; ++c) {
            ScalarField tmp(grid_);
            auto src = f.comp(c);
            for (std::size_t i = 0; i < src.size(); ++i) tmp[i] = src[i];
            SpectralScalar sc = to_spectral(tmp);
            auto cc = sc.comp(0);
            std::complex<double>* dst =
                coef_.data() + static_cast<std::size_t>(c) * grid_.num_points();
            for (std::size_t i = 0; i < cc.size(); ++i) dst[i] = cc[i];
        }
    }

    void eval(const double* x, double* out) const override {
        const int n = grid_.n();
        const int d = grid_.dim();
        thread_local std::vector<std::complex<double>> phase;
        phase.resize(static_cast<std::size_t>(d) * n);
        for (int a = 0; a < d; ++a)
            for (int i = 0; i < n; ++i)
                phase[static_cast<std::size_t>(a) * n + i] =
                    std::polar(1.0, grid_.freq(i) * x[a]);
        const std::complex<double>* px = phase.data();
        const std::complex<double>* py = phase.data() + n;
        const std::complex<double>* pz = phase.data() + 2 * static_cast<std::size_t>(n);
        const std::size_t npts = grid_.num_points();
        for (int c = 0; c < ncomp_; ++c) {
            const std::complex<double>* cf = coef_.data() + static_cast<std::size_t>(c) * npts;
            std::complex<double> acc(0.0, 0.0);
            if (d == 2) {
                for (int iy = 0; iy < n; ++iy) {
                    const std::complex<double>* row = cf + static_cast<std::size_t>(n) * iy;
                    std::complex<double> partial(0.0, 0.0);
                    for (int ix = 0; ix < n; ++ix) partial += row[ix] * px[ix];
                    acc += py[iy] * partial;
                }
            } else {
                for (int iz = 0; iz < n; ++iz) {
                    std::complex<double> sz(0.0, 0.0);
                    for (int iy = 0; iy < n; ++iy) {
                        const std::complex<double>* row =
                            cf + static_cast<std::size_t>(n) * n * iz +
                            static_cast<std::size_t>(n) * iy;
                        std::complex<double> partial(0.0, 0.0);
                        for (int ix = 0; ix < n; ++ix) partial += row[ix] * px[ix];
                        sz += py[iy] * partial;
                    }
                    acc += pz[iz] * sz;
                }
            }
            out[c] = acc.real();
        }
    }

private:
    std::vector<std::complex<double>> coef_;
};

inline std::unique_ptr<Interpolant> make_interpolant(const FieldBase& f, InterpMethod m) {
    if (m == InterpMethod::spline) return std::make_unique<SplineInterpolant>(f);
    return std::make_unique<FourierInterpolant>(f);
}

/// Evaluate f at arbitrary points (flattened d-vectors); result is
/// point-major: out[p*ncomp + c].
inline std::vector<double> sample_at(const FieldBase& f, const std::vector<double>& points,
                                     InterpMethod m = InterpMethod::fourier) {
    if (points.size() % f.grid().dim() != 0)
        throw invalid_argument_error("sample_at: points not a multiple of dimension");
    const std::size_t np = points.size() / f.grid().dim();
    auto interp = make_interpolant(f, m);
    std::vector<double> out(np * f.ncomp());
    for (std::size_t p = 0; p < np; ++p)
        interp->eval(points.data() + p * f.grid().dim(), out.data() + p * f.ncomp());
    return out;
}

} // namespace torusflow
