#pragma once

#include <array>
#include <cmath>
#include <utility>

#include "torusflow/field_io.hpp"
#include "torusflow/interp.hpp"
#include "torusflow/parallel.hpp"
#include "torusflow/spectral.hpp"

namespace torusflow {

/// Torus diffeomorphism stored as a periodic displacement: map(x) = x + delta(x).
/// The raw map x + delta is not periodic, the displacement is; spectral
/// differentiation therefore acts on delta and the Jacobian is I + grad(delta).
/// The Jacobian is computed at construction, so instances are immutable and
/// safe to share across threads. Composition injects a chain-rule Jacobian
/// instead of differentiating interpolated displacements.
class DiffeoMap {
public:
    explicit DiffeoMap(const TorusGrid& grid)
        : disp_(grid), jac_(MatrixField::identity(grid)) {}

    explicit DiffeoMap(VectorField displacement)
        : disp_(std::move(displacement)), jac_(spectral_jacobian(disp_)) {}

    DiffeoMap(VectorField displacement, MatrixField jacobian)
        : disp_(std::move(displacement)), jac_(std::move(jacobian)) {
        detail::check_same_grid(disp_.grid(), jac_.grid(), "DiffeoMap");
    }

    static DiffeoMap identity(const TorusGrid& grid) { return DiffeoMap(grid); }

    static DiffeoMap translation(const TorusGrid& grid, const std::array<double, 3>& c) {
        VectorField d(grid);
        for (int a = 0; a < grid.dim(); ++a) {
            auto comp = d.comp(a);
            for (std::size_t p = 0; p < comp.size(); ++p) comp[p] = c[a];
        }
        return DiffeoMap(std::move(d), MatrixField::identity(grid));
    }

    const TorusGrid& grid() const { return disp_.grid(); }
    const VectorField& displacement() const { return disp_; }
    const MatrixField& jacobian() const { return jac_; }

    /// Image of grid point p, unwrapped.
    std::array<double, 3> apply(std::size_t p) const {
        auto x = grid().point(p);
        for (int a = 0; a < grid().dim(); ++a) x[a] += disp_.comp(a)[p];
        return x;
    }

    double max_displacement() const { return disp_.max_abs(); }

private:
    static MatrixField spectral_jacobian(const VectorField& d) {
        MatrixField j = jacobian_of_field(d);
        for (int a = 0; a < d.grid().dim(); ++a) {
            auto diag = j.entry(a, a);
            for (std::size_t p = 0; p < diag.size(); ++p) diag[p] += 1.0;
        }
        return j;
    }

    VectorField disp_;
    MatrixField jac_;
};

inline const MatrixField& jacobian(const DiffeoMap& m) { return m.jacobian(); }

/// K = (grad m)^{-1} pointwise.
inline MatrixField inverse_jacobian(const DiffeoMap& m) { return matrix_inverse(m.jacobian()); }

inline ScalarField jacobian_determinant(const DiffeoMap& m) {
    return matrix_determinant(m.jacobian());
}

/// f(m(x)) resampled onto the grid.
template <GridField F>
F compose(const F& f, const DiffeoMap& m, InterpMethod im = InterpMethod::spline) {
    detail::check_same_grid(f.grid(), m.grid(), "compose");
    auto interp = make_interpolant(f, im);
    F out(f.grid());
    const int nc = f.ncomp();
    const std::size_t npts = f.num_points();
    parallel_for(npts, [&](std::size_t p) {
        const auto x = m.apply(p);
        double vals[9];
        interp->eval(x.data(), vals);
        for (int c = 0; c < nc; ++c) out.comp(c)[p] = vals[c];
    });
    return out;
}

/// outer(inner(x)) with a chain-rule Jacobian grad(outer)(inner(x)) * grad(inner).
inline DiffeoMap compose_maps(const DiffeoMap& outer, const DiffeoMap& inner,
                              InterpMethod im = InterpMethod::spline) {
    detail::check_same_grid(outer.grid(), inner.grid(), "compose_maps");
    const TorusGrid& grid = outer.grid();
    const int d = grid.dim();
    auto disp_interp = make_interpolant(outer.displacement(), im);
    auto jac_interp = make_interpolant(outer.jacobian(), im);
    VectorField disp(grid);
    MatrixField jac(grid);
    parallel_for(grid.num_points(), [&](std::size_t p) {
        const auto y = inner.apply(p);
        double dv[3];
        disp_interp->eval(y.data(), dv);
        for (int a = 0; a < d; ++a)
            disp.comp(a)[p] = inner.displacement().comp(a)[p] + dv[a];
        double jo[9];
        jac_interp->eval(y.data(), jo);
        for (int i = 0; i < d; ++i) {
            for (int j = 0; j < d; ++j) {
                double acc = 0.0;
                for (int k = 0; k < d; ++k)
                    acc += jo[i * d + k] * inner.jacobian().entry(k, j)[p];
                jac.entry(i, j)[p] = acc;
            }
        }
    });
    return DiffeoMap(std::move(disp), std::move(jac));
}

/// Solves y = x - delta(y) for every grid target x by the displacement
/// fixed-point iteration, optionally warm-started from a nearby inverse
/// displacement. Returns the inverse displacement only (no Jacobian work);
/// throws inversion_error when any point fails to reach `tol` max update
/// within `max_iters`.
inline VectorField invert_displacement(const DiffeoMap& m, double tol = 1e-12,
                                       int max_iters = 100,
                                       const VectorField* warm_start = nullptr,
                                       InterpMethod im = InterpMethod::spline) {
    const TorusGrid& grid = m.grid();
    const int d = grid.dim();
    if (m.max_displacement() >= 0.5 * two_pi)
        warn("invert_map: displacement exceeds half-period, iteration may not contract");
    auto interp = make_interpolant(m.displacement(), im);
    VectorField inv_disp(grid);
    std::vector<double> residual(num_threads(), 0.0);
    parallel_for_chunked(grid.num_points(), [&](int chunk, std::size_t p) {
        const auto x = grid.point(p);
        double y[3] = {x[0], x[1], x[2]};
        if (warm_start)
            for (int a = 0; a < d; ++a) y[a] += warm_start->comp(a)[p];
        double upd = 0.0;
        for (int it = 0; it < max_iters; ++it) {
            double delta[3];
            interp->eval(y, delta);
            upd = 0.0;
            for (int a = 0; a < d; ++a) {
                const double yn = x[a] - delta[a];
                upd = std::max(upd, std::abs(yn - y[a]));
                y[a] = yn;
            }
            if (upd < tol) break;
        }
        residual[chunk] = std::max(residual[chunk], upd);
        for (int a = 0; a < d; ++a) inv_disp.comp(a)[p] = y[a] - x[a];
    });
    double worst = 0.0;
    for (double r : residual) worst = std::max(worst, r);
    if (worst >= tol)
        throw inversion_error(
            "invert_map: fixed point stalled at max update " + g17(worst), worst);
    return inv_disp;
}

inline DiffeoMap invert_map(const DiffeoMap& m, double tol = 1e-12, int max_iters = 100,
                            const VectorField* warm_start = nullptr,
                            InterpMethod im = InterpMethod::spline) {
    return DiffeoMap(invert_displacement(m, tol, max_iters, warm_start, im));
}

/// K(x) * u(m(x)): the velocity u seen in the coordinates moved by m.
inline VectorField pull_back_velocity(const VectorField& u, const DiffeoMap& m,
                                      InterpMethod im = InterpMethod::spline) {
    detail::check_same_grid(u.grid(), m.grid(), "pull_back_velocity");
    VectorField composed = compose(u, m, im);
    return matrix_apply(matrix_inverse(m.jacobian()), composed);
}

} // namespace torusflow
