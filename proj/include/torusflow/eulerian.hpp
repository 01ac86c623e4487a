#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "torusflow/brownian.hpp"
#include "torusflow/errors.hpp"
#include "torusflow/noise_basis.hpp"
#include "torusflow/spectral.hpp"
#include "torusflow/trajectory.hpp"

namespace torusflow {

/// L*_sigma u = sigma . grad u + (grad sigma)^T u, dealiased.
inline VectorField lie_adjoint(const VectorField& sigma, const VectorField& u) {
    detail::check_same_grid(sigma.grid(), u.grid(), "lie_adjoint");
    VectorField w = advect(sigma, u) + matrix_transpose_apply(jacobian_of_field(sigma), u);
    return dealias(w);
}

/// L_sigma w = sigma . grad w - (grad sigma) w, dealiased.
inline VectorField lie_derivative(const VectorField& sigma, const VectorField& w) {
    detail::check_same_grid(sigma.grid(), w.grid(), "lie_derivative");
    VectorField v = advect(sigma, w) - matrix_apply(jacobian_of_field(sigma), w);
    return dealias(v);
}

struct DirectSolverConfig {
    double dt = 1e-3;
    bool dealias = true;
    double viscosity = 0.0; // demo stabilization only, keep 0 for validation runs
    enum class Scheme { stratonovich_heun, ito_corrected_em };
    Scheme scheme = Scheme::stratonovich_heun;
    int snapshot_stride = 1;
    SobolevIndex s{3.0};
};

namespace detail {

// Velocity increment over one step with the Brownian increments dw:
//   P[ -dt (u . grad)u - sum_k (sigma_k . grad u + (grad sigma_k)^T u) dw_k ]
//   + dt * eps * Lap u.
// The drift and noise products share one gradient evaluation and one
// projection; projection is linear so combining stages is exact.
class DirectStepper {
public:
    DirectStepper(const NoiseBasis& basis, const TorusGrid& grid, const DirectSolverConfig& cfg)
        : grid_(grid), cfg_(cfg) {
        for (int j = 0; j < basis.num_components(); ++j) {
            sigma_.push_back(basis.sigma(j));
            grad_sigma_.push_back(jacobian_of_field(basis.sigma(j)));
        }
    }

    VectorField increment(const VectorField& u, const double* dw, double dt) const {
        const int d = grid_.dim();
        const MatrixField gu = jacobian_of_field(u);
        VectorField z(grid_);
        const int m = static_cast<int>(sigma_.size());
        parallel_for(grid_.num_points(), [&](std::size_t p) {
            for (int i = 0; i < d; ++i) {
                double acc = 0.0;
                for (int j = 0; j < d; ++j) acc -= u.comp(j)[p] * gu.entry(i, j)[p];
                acc *= dt;
                for (int k = 0; k < m; ++k) {
                    double lie = 0.0;
                    for (int j = 0; j < d; ++j) {
                        lie += sigma_[k].comp(j)[p] * gu.entry(i, j)[p];
                        lie += grad_sigma_[k].entry(j, i)[p] * u.comp(j)[p];
                    }
                    acc -= lie * dw[k];
                }
                z.comp(i)[p] = acc;
            }
        });
        SpectralVector sz = to_spectral(z);
        if (cfg_.dealias) dealias_inplace(sz);
        leray_project_inplace(sz);
        if (cfg_.viscosity > 0.0) {
            SpectralVector su = to_spectral(u);
            detail::for_each_mode(grid_, [&](std::size_t idx, const int*, double k2) {
                for (int c = 0; c < d; ++c) sz.comp(c)[idx] -= cfg_.viscosity * dt * k2 * su.comp(c)[idx];
            });
        }
        return from_spectral(sz);
    }

    // 0.5 sum_k P[L*_k (P[L*_k u])], the drift charge for Ito stepping of the
    // same Stratonovich equation.
    VectorField ito_correction(const VectorField& u) const {
        VectorField acc(grid_);
        for (std::size_t k = 0; k < sigma_.size(); ++k) {
            VectorField v = leray_project(lie_adjoint(sigma_[k], u));
            acc = acc + leray_project(lie_adjoint(sigma_[k], v));
        }
        return 0.5 * acc;
    }

    VectorField step(const VectorField& u, const double* dw, double dt) const {
        if (cfg_.scheme == DirectSolverConfig::Scheme::ito_corrected_em) {
            VectorField inc = increment(u, dw, dt);
            if (!sigma_.empty()) inc = inc + dt * ito_correction(u);
            return u + inc;
        }
        VectorField inc0 = increment(u, dw, dt);
        VectorField pred = u + inc0;
        VectorField inc1 = increment(pred, dw, dt);
        return u + 0.5 * (inc0 + inc1);
    }

private:
    const TorusGrid& grid_;
    DirectSolverConfig cfg_;
    std::vector<VectorField> sigma_;
    std::vector<MatrixField> grad_sigma_;
};

} // namespace detail

/// Direct pseudo-spectral integration of the velocity equation under
/// transport noise, stepping on the path mesh (or a uniform dt mesh when the
/// basis is empty). A non-finite step is retried once as two half steps with
/// the Brownian increment split evenly; failing that, aborts with the last
/// stable time.
inline VelocityTrajectory solve_direct(const VectorField& u0, const NoiseBasis& basis,
                                       const BrownianPath& path, double T,
                                       const DirectSolverConfig& cfg = {}) {
    const TorusGrid& grid = u0.grid();
    if (!(cfg.dt > 0.0)) throw invalid_argument_error("solve_direct: dt > 0 required");
    if (T < 0.0) throw invalid_argument_error("solve_direct: T >= 0 required");
    if (cfg.snapshot_stride < 1)
        throw invalid_argument_error("solve_direct: snapshot_stride >= 1 required");
    const long long n_steps = std::llround(T / cfg.dt);
    if (std::abs(n_steps * cfg.dt - T) > 1e-9 * std::max(1.0, T))
        throw invalid_argument_error("solve_direct: T must be a multiple of dt");

    const bool noisy = !basis.empty();
    if (noisy) {
        if (path.m != basis.num_components())
            throw invalid_argument_error("solve_direct: path components do not match the basis");
        if (path.steps() < n_steps)
            throw invalid_argument_error("solve_direct: path shorter than the horizon");
        for (long long i = 0; i <= n_steps; ++i)
            if (std::abs(path.times[i] - i * cfg.dt) > 1e-9 * std::max(1.0, T))
                throw invalid_argument_error("solve_direct: path mesh does not match dt");
    }

    detail::DirectStepper stepper(basis, grid, cfg);
    const int m = noisy ? basis.num_components() : 0;
    std::vector<double> dw(std::max(m, 1), 0.0);
    std::vector<double> half(std::max(m, 1), 0.0);

    SpectralVector s0 = to_spectral(u0);
    if (cfg.dealias) dealias_inplace(s0);
    leray_project_inplace(s0);
    VectorField u = from_spectral(s0);

    VelocityTrajectory traj(grid, cfg.s);
    traj.append(0.0, u);
    for (long long i = 0; i < n_steps; ++i) {
        const double t = i * cfg.dt;
        for (int k = 0; k < m; ++k) dw[k] = path.increment(static_cast<int>(i), k);
        VectorField next = stepper.step(u, dw.data(), cfg.dt);
        if (!next.finite()) {
            for (int k = 0; k < m; ++k) half[k] = 0.5 * dw[k];
            VectorField mid = stepper.step(u, half.data(), 0.5 * cfg.dt);
            if (mid.finite()) next = stepper.step(mid, half.data(), 0.5 * cfg.dt);
            if (!mid.finite() || !next.finite())
                throw numerical_error("solve_direct: instability", t);
        }
        u = std::move(next);
        if ((i + 1) % cfg.snapshot_stride == 0 || i + 1 == n_steps)
            traj.append((i + 1) * cfg.dt, u);
    }
    return traj;
}

/// Closed-form reference for a single spatially constant noise field c:
/// u(t, x) = u_det(t, x - c W(t)), with the shift applied as a spectral phase.
inline VelocityTrajectory random_shift_oracle(const VectorField& u0, const NoiseBasis& basis,
                                              const BrownianPath& path, double T,
                                              const DirectSolverConfig& cfg = {}) {
    const TorusGrid& grid = u0.grid();
    if (basis.num_components() != 1)
        throw invalid_argument_error("random_shift_oracle: exactly one noise component required");
    const VectorField& sig = basis.sigma(0);
    std::array<double, 3> c = {sig.comp(0)[0], 0.0, 0.0};
    for (int a = 1; a < grid.dim(); ++a) c[a] = sig.comp(a)[0];
    for (int a = 0; a < grid.dim(); ++a) {
        const auto span = sig.comp(a);
        for (std::size_t p = 0; p < span.size(); ++p)
            if (std::abs(span[p] - c[a]) > 1e-13)
                throw invalid_argument_error("random_shift_oracle: basis field is not constant");
    }

    NoiseBasis nil(grid, {});
    VelocityTrajectory det = solve_direct(u0, nil, path, T, cfg);
    VelocityTrajectory out(grid, cfg.s);
    const int d = grid.dim();
    for (int i = 0; i < det.size(); ++i) {
        const double t = det.time(i);
        const int pi = find_time_index(path, t);
        double shift[3] = {0, 0, 0};
        for (int a = 0; a < d; ++a) shift[a] = c[a] * path.value(pi, 0);
        SpectralVector su = to_spectral(det.field(i));
        detail::for_each_mode(grid, [&](std::size_t idx, const int* k, double) {
            double phase = 0.0;
            for (int a = 0; a < d; ++a) phase -= k[a] * shift[a];
            const std::complex<double> e = std::polar(1.0, phase);
            for (int comp = 0; comp < d; ++comp) su.comp(comp)[idx] *= e;
        });
        out.append(t, from_spectral(su));
    }
    return out;
}

} // namespace torusflow
