#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "torusflow/interp.hpp"
#include "torusflow/parallel.hpp"
#include "torusflow/trajectory.hpp"

namespace torusflow {

/// Point evaluation of a velocity trajectory: interpolation in space per
/// snapshot, linear interpolation in time between snapshots (times outside
/// the stored range are clamped).
class VelocitySampler {
public:
    VelocitySampler(const VelocityTrajectory& u, InterpMethod im) : times_(u.times()) {
        if (u.size() == 0) throw invalid_argument_error("VelocitySampler: empty trajectory");
        dim_ = u.grid().dim();
        for (int i = 0; i < u.size(); ++i) {
            interp_.push_back(make_interpolant(u.field(i), im));
            max_speed_ = std::max(max_speed_, u.field(i).max_abs());
        }
    }

    int dim() const { return dim_; }
    double max_speed() const { return max_speed_; }

    void eval(double t, const double* x, double* out) const {
        const std::size_t count = times_.size();
        if (count == 1 || t <= times_.front()) {
            interp_.front()->eval(x, out);
            return;
        }
        if (t >= times_.back()) {
            interp_.back()->eval(x, out);
            return;
        }
        const auto it = std::upper_bound(times_.begin(), times_.end(), t);
        const std::size_t hi = static_cast<std::size_t>(it - times_.begin());
        const std::size_t lo = hi - 1;
        const double w = (t - times_[lo]) / (times_[hi] - times_[lo]);
        double a[3], b[3];
        interp_[lo]->eval(x, a);
        interp_[hi]->eval(x, b);
        for (int c = 0; c < dim_; ++c) out[c] = (1.0 - w) * a[c] + w * b[c];
    }

private:
    std::vector<double> times_;
    std::vector<std::unique_ptr<Interpolant>> interp_;
    int dim_ = 0;
    double max_speed_ = 0.0;
};

enum class TransportForcing { zero, minus_velocity };

/// df/dt + (u.grad) f = g with g = 0 or g = -u, f(0) = f0.
struct TransportProblem {
    VectorField f0;
    TransportForcing forcing = TransportForcing::zero;
};

/// Semi-Lagrangian solve: for each requested output time, trace the
/// characteristic of every grid point backward to 0 with RK4 and read
/// f = f0(foot) + integral of g along the characteristic (the forcing
/// accumulator rides along the backward integration).
inline std::vector<VectorField> solve_transport(const TransportProblem& problem,
                                                const VelocityTrajectory& u,
                                                const std::vector<double>& output_times,
                                                int substeps_per_interval = 1,
                                                InterpMethod im = InterpMethod::spline) {
    const TorusGrid& grid = problem.f0.grid();
    detail::check_same_grid(grid, u.grid(), "solve_transport");
    if (substeps_per_interval < 1)
        throw invalid_argument_error("solve_transport: substeps_per_interval >= 1");
    const int d = grid.dim();
    VelocitySampler sampler(u, im);
    auto f0_interp = make_interpolant(problem.f0, im);
    const bool forced = problem.forcing == TransportForcing::minus_velocity;

    // One CFL advisory per solve.
    if (u.size() >= 2) {
        const double dt = (u.time(u.size() - 1) - u.time(0)) / (u.size() - 1) /
                          substeps_per_interval;
        if (sampler.max_speed() * dt > grid.spacing())
            warn("solve_transport: max speed * dt exceeds grid spacing");
    }

    std::vector<VectorField> out;
    for (double t_out : output_times) {
        if (t_out < u.time(0) - 1e-12 || t_out > u.time(u.size() - 1) + 1e-12)
            throw invalid_argument_error("solve_transport: output time outside trajectory");
        // Backward mesh: snapshot times below t_out, each interval subdivided
        // into uniform substeps.
        std::vector<double> mesh;
        mesh.push_back(t_out);
        for (int i = u.size() - 1; i >= 0; --i) {
            const double lo = u.time(i);
            if (lo >= mesh.back() - 1e-14) continue;
            const double hi = mesh.back();
            for (int sub = 1; sub <= substeps_per_interval; ++sub)
                mesh.push_back(hi + (lo - hi) * sub / substeps_per_interval);
        }
        VectorField f(grid);
        parallel_for(grid.num_points(), [&](std::size_t p) {
            auto x = grid.point(p);
            double chi[3] = {x[0], x[1], x[2]};
            double acc[3] = {0.0, 0.0, 0.0};
            double k1[6], k2[6], k3[6], k4[6];
            auto rhs = [&](double s, const double* state, double* k) {
                for (int a = 0; a < 6; ++a) k[a] = 0.0;
                sampler.eval(s, state, k); // d(chi)/ds
                if (forced)
                    for (int a = 0; a < d; ++a) k[3 + a] = k[a]; // dA/ds = -g = +u
            };
            for (std::size_t step = 0; step + 1 < mesh.size(); ++step) {
                const double s = mesh[step];
                const double h = mesh[step + 1] - mesh[step];
                double state[6] = {chi[0], chi[1], chi[2], acc[0], acc[1], acc[2]};
                double tmp[6];
                rhs(s, state, k1);
                for (int a = 0; a < 6; ++a) tmp[a] = state[a] + 0.5 * h * k1[a];
                rhs(s + 0.5 * h, tmp, k2);
                for (int a = 0; a < 6; ++a) tmp[a] = state[a] + 0.5 * h * k2[a];
                rhs(s + 0.5 * h, tmp, k3);
                for (int a = 0; a < 6; ++a) tmp[a] = state[a] + h * k3[a];
                rhs(s + h, tmp, k4);
                for (int a = 0; a < 6; ++a)
                    state[a] += h / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
                for (int a = 0; a < 3; ++a) {
                    chi[a] = state[a];
                    acc[a] = state[3 + a];
                }
            }
            double foot_val[3];
            f0_interp->eval(chi, foot_val);
            // A(0) = -(accumulated backward integral of dA/ds) since we
            // integrated from t down to 0: acc already equals A(0).
            for (int a = 0; a < d; ++a) f.comp(a)[p] = foot_val[a] + acc[a];
        });
        out.push_back(std::move(f));
    }
    return out;
}

// ---- growth monitoring -----------------------------------------------------

struct GrowthRow {
    double t;
    double f_norm;   // ||f(t)||_s
    double rate;     // log(||f(t)||_s / ||f(0)||_s) / t
    double envelope; // transport bound with the supplied constant
};

struct GrowthReport {
    std::vector<GrowthRow> rows;
    double c4;
    double velocity_norm; // ||u||_{Sigma_s}
    double forcing_norm;  // ||g||_{Sigma_s}
    bool envelope_satisfied = true;
};

/// Through-origin least squares slope of y over x: the empirical growth
/// constant from samples (t * ||u||_s, log growth).
inline double fit_growth_constant(const std::vector<std::pair<double, double>>& xy) {
    double sxx = 0.0;
    double sxy = 0.0;
    for (const auto& [x, y] : xy) {
        sxx += x * x;
        sxy += x * y;
    }
    if (sxx == 0.0) return 0.0;
    return sxy / sxx;
}

/// Checks ||f(t)||_s against the exponential transport envelope
///   (||f(0)||_s + G/(c4 U)) exp(c4 t U) - G/(c4 U),
/// with U = ||u||_{Sigma_s} and G = ||g||_{Sigma_s}, using an empirically
/// calibrated c4 and a slack factor on the exponent.
inline GrowthReport growth_monitor(const std::vector<VectorField>& f_traj,
                                   const std::vector<double>& times,
                                   const VelocityTrajectory& u, TransportForcing forcing,
                                   SobolevIndex s, double c4, double slack = 1.2) {
    if (f_traj.size() != times.size() || f_traj.empty())
        throw invalid_argument_error("growth_monitor: times/fields mismatch");
    GrowthReport report;
    report.c4 = c4;
    report.velocity_norm = u.sigma_norm(s);
    report.forcing_norm =
        forcing == TransportForcing::minus_velocity ? report.velocity_norm : 0.0;
    const double f0 = sobolev_norm(f_traj.front(), s);
    const double cu = slack * c4 * report.velocity_norm;
    for (std::size_t i = 0; i < f_traj.size(); ++i) {
        GrowthRow row;
        row.t = times[i];
        row.f_norm = sobolev_norm(f_traj[i], s);
        row.rate = (row.t > 0.0 && f0 > 0.0) ? std::log(row.f_norm / f0) / row.t : 0.0;
        if (cu < 1e-12) {
            row.envelope = f0 + report.forcing_norm * row.t;
        } else {
            const double ratio = report.forcing_norm / cu;
            row.envelope = (f0 + ratio) * std::exp(cu * row.t) - ratio;
        }
        if (row.f_norm > row.envelope + 1e-12) report.envelope_satisfied = false;
        report.rows.push_back(row);
    }
    return report;
}

/// ||f1 - f2||_{L2} / (t ||u1 - u2||_{Sigma_0}), the two-velocity stability
/// ratio whose boundedness the transport theory asserts.
inline double transport_stability_ratio(const VectorField& f1, const VectorField& f2, double t,
                                        const VelocityTrajectory& u1,
                                        const VelocityTrajectory& u2) {
    const double den = t * sigma0_distance(u1, u2);
    if (den == 0.0) return 0.0;
    return l2_norm(f1 - f2) / den;
}

} // namespace torusflow
