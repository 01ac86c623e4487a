#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "torusflow/brownian.hpp"
#include "torusflow/diffeo.hpp"
#include "torusflow/errors.hpp"
#include "torusflow/noise_basis.hpp"
#include "torusflow/noise_flow.hpp"
#include "torusflow/trajectory.hpp"
#include "torusflow/transport.hpp"

namespace torusflow {

struct SOptions {
    int ode_substeps = 1;
    InterpMethod interp = InterpMethod::spline;
    double inversion_tol = 1e-12;
    int inversion_max_iters = 100;
    bool keep_maps = false; // retain the composed forward maps X(t_i)
};

namespace detail {

// Inverse of a d x d matrix stored row-major in the leading d*d entries.
// Returns the determinant; the inverse is only valid when |det| is usable.
inline double invert_small(const double* m, double* inv, int d) {
    if (d == 2) {
        const double det = m[0] * m[3] - m[1] * m[2];
        const double r = det != 0.0 ? 1.0 / det : 0.0;
        inv[0] = m[3] * r;
        inv[1] = -m[1] * r;
        inv[2] = -m[2] * r;
        inv[3] = m[0] * r;
        return det;
    }
    const double c00 = m[4] * m[8] - m[5] * m[7];
    const double c01 = m[5] * m[6] - m[3] * m[8];
    const double c02 = m[3] * m[7] - m[4] * m[6];
    const double det = m[0] * c00 + m[1] * c01 + m[2] * c02;
    const double r = det != 0.0 ? 1.0 / det : 0.0;
    inv[0] = c00 * r;
    inv[1] = (m[2] * m[7] - m[1] * m[8]) * r;
    inv[2] = (m[1] * m[5] - m[2] * m[4]) * r;
    inv[3] = c01 * r;
    inv[4] = (m[0] * m[8] - m[2] * m[6]) * r;
    inv[5] = (m[2] * m[3] - m[0] * m[5]) * r;
    inv[6] = c02 * r;
    inv[7] = (m[1] * m[6] - m[0] * m[7]) * r;
    inv[8] = (m[0] * m[4] - m[1] * m[3]) * r;
    return det;
}

} // namespace detail

/// Integrates dY/dt = u(t, Y) for one particle per grid node, forward from
/// u.time(0), with classical RK4 on each snapshot interval split into
/// `substeps` stages. Velocity between snapshots is linear in time. Every
/// requested output time must coincide with a snapshot time of `u`.
inline std::vector<DiffeoMap> solve_particle_ode(const VelocityTrajectory& u,
                                                 const std::vector<double>& out_times,
                                                 int substeps = 1,
                                                 InterpMethod im = InterpMethod::spline) {
    if (u.size() == 0) throw invalid_argument_error("solve_particle_ode: empty trajectory");
    if (substeps < 1) throw invalid_argument_error("solve_particle_ode: substeps >= 1");
    const TorusGrid& grid = u.grid();
    const int d = grid.dim();
    const double ttol = 1e-9 * std::max(1.0, std::abs(u.times().back()));

    // Map each output time to its snapshot index.
    std::vector<int> out_idx(out_times.size());
    for (std::size_t j = 0; j < out_times.size(); ++j) {
        int hit = -1;
        for (int i = 0; i < u.size(); ++i)
            if (std::abs(u.time(i) - out_times[j]) <= ttol) { hit = i; break; }
        if (hit < 0)
            throw invalid_argument_error("solve_particle_ode: output time off the snapshot mesh");
        if (j > 0 && out_idx[j - 1] > hit)
            throw invalid_argument_error("solve_particle_ode: output times must be nondecreasing");
        out_idx[j] = hit;
    }
    const int last = out_idx.empty() ? 0 : out_idx.back();

    VelocitySampler sampler(u, im);
    if (last > 0) {
        const double hmin = (u.time(1) - u.time(0)) / substeps;
        if (sampler.max_speed() * hmin > grid.spacing())
            warn("solve_particle_ode: step exceeds one cell per stage, refine dt or substeps");
    }

    const std::size_t np = grid.num_points();
    std::vector<double> pos(np * d);
    for (std::size_t p = 0; p < np; ++p) {
        const auto x = grid.point(p);
        for (int a = 0; a < d; ++a) pos[p * d + a] = x[a];
    }

    std::vector<DiffeoMap> out;
    out.reserve(out_times.size());
    std::size_t next = 0;
    auto emit_upto = [&](int i) {
        while (next < out_idx.size() && out_idx[next] == i) {
            VectorField disp(grid);
            for (std::size_t p = 0; p < np; ++p) {
                const auto x = grid.point(p);
                for (int a = 0; a < d; ++a) disp.comp(a)[p] = pos[p * d + a] - x[a];
            }
            if (!disp.finite())
                throw numerical_error("solve_particle_ode: non-finite position", u.time(i));
            out.emplace_back(std::move(disp));
            ++next;
        }
    };

    emit_upto(0);
    for (int i = 0; i < last; ++i) {
        const double t0 = u.time(i);
        const double h = (u.time(i + 1) - t0) / substeps;
        for (int sub = 0; sub < substeps; ++sub) {
            const double ts = t0 + sub * h;
            parallel_for(np, [&](std::size_t p) {
                double* y = &pos[p * d];
                double k1[3], k2[3], k3[3], k4[3], tmp[3] = {0, 0, 0};
                sampler.eval(ts, y, k1);
                for (int a = 0; a < d; ++a) tmp[a] = y[a] + 0.5 * h * k1[a];
                sampler.eval(ts + 0.5 * h, tmp, k2);
                for (int a = 0; a < d; ++a) tmp[a] = y[a] + 0.5 * h * k2[a];
                sampler.eval(ts + 0.5 * h, tmp, k3);
                for (int a = 0; a < d; ++a) tmp[a] = y[a] + h * k3[a];
                sampler.eval(ts + h, tmp, k4);
                for (int a = 0; a < d; ++a)
                    y[a] += h / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
            });
        }
        emit_upto(i + 1);
    }
    return out;
}

/// Per-window precomputation for the fixed-point map: the stochastic flow
/// snapshots, their inverse Jacobians, and interpolants of displacement and
/// Jacobian for composing with particle maps. Built once, reused across
/// iterations because the noise flow does not depend on the velocity iterate.
struct FlowCache {
    std::vector<double> times; // window-local, times[0] = 0
    std::vector<DiffeoMap> phi;
    std::vector<MatrixField> inv_jac; // (grad phi)^{-1} on the grid
    std::vector<std::unique_ptr<Interpolant>> disp_interp;
    std::vector<std::unique_ptr<Interpolant>> jac_interp;
    bool identity_flow = false;

    const TorusGrid& grid() const { return phi.front().grid(); }
    int size() const { return static_cast<int>(phi.size()); }
};

inline FlowCache build_flow_cache(const NoiseBasis& basis, const BrownianPath& path,
                                  const std::vector<double>& times,
                                  InterpMethod im = InterpMethod::spline) {
    FlowCache cache;
    cache.times = times;
    cache.identity_flow = basis.empty();
    cache.phi = solve_noise_flow_trajectory(basis, path, times);
    cache.inv_jac.reserve(cache.phi.size());
    for (const auto& m : cache.phi) cache.inv_jac.push_back(matrix_inverse(m.jacobian()));
    if (!cache.identity_flow) {
        cache.disp_interp.reserve(cache.phi.size());
        cache.jac_interp.reserve(cache.phi.size());
        for (const auto& m : cache.phi) {
            cache.disp_interp.push_back(make_interpolant(m.displacement(), im));
            cache.jac_interp.push_back(make_interpolant(m.jacobian(), im));
        }
    }
    return cache;
}

namespace detail {

// X = phi_i o Y with the chain-rule Jacobian, reusing the cached interpolants.
inline DiffeoMap compose_cached(const FlowCache& cache, int i, const DiffeoMap& inner) {
    if (cache.identity_flow) return inner;
    const TorusGrid& grid = inner.grid();
    const int d = grid.dim();
    VectorField disp(grid);
    MatrixField jac(grid);
    const Interpolant& di = *cache.disp_interp[i];
    const Interpolant& ji = *cache.jac_interp[i];
    parallel_for(grid.num_points(), [&](std::size_t p) {
        const auto y = inner.apply(p);
        double dv[3];
        di.eval(y.data(), dv);
        for (int a = 0; a < d; ++a)
            disp.comp(a)[p] = inner.displacement().comp(a)[p] + dv[a];
        double jo[9];
        ji.eval(y.data(), jo);
        for (int r = 0; r < d; ++r) {
            for (int c = 0; c < d; ++c) {
                double acc = 0.0;
                for (int k = 0; k < d; ++k)
                    acc += jo[r * d + k] * inner.jacobian().entry(k, c)[p];
                jac.entry(r, c)[p] = acc;
            }
        }
    });
    return DiffeoMap(std::move(disp), std::move(jac));
}

// Pull-back (phi^{-1})_* u = (grad phi)^{-1} (u o phi) using cached data.
inline VectorField pull_back_cached(const VectorField& u, const FlowCache& cache, int i,
                                    InterpMethod im) {
    if (cache.identity_flow) return u;
    const TorusGrid& grid = u.grid();
    const int d = grid.dim();
    auto ui = make_interpolant(u, im);
    const DiffeoMap& phi = cache.phi[i];
    const MatrixField& K = cache.inv_jac[i];
    VectorField w(grid);
    parallel_for(grid.num_points(), [&](std::size_t p) {
        const auto x = phi.apply(p);
        double v[3];
        ui->eval(x.data(), v);
        for (int r = 0; r < d; ++r) {
            double acc = 0.0;
            for (int c = 0; c < d; ++c) acc += K.entry(r, c)[p] * v[c];
            w.comp(r)[p] = acc;
        }
    });
    return w;
}

} // namespace detail

/// Pull the iterate back along the noise flow, advect labels by the
/// pulled-back velocity, and compose with the noise flow: the forward maps
/// X(t_i) of one window, X(t_0) = identity.
inline std::vector<DiffeoMap> flow_composition(const VelocityTrajectory& u, const FlowCache& cache,
                                               const SOptions& opts = {}) {
    const TorusGrid& grid = u.grid();
    const int n_snap = u.size();
    if (n_snap != cache.size())
        throw invalid_argument_error("apply_S: iterate and flow cache snapshot counts differ");
    const double ttol = 1e-9 * std::max(1.0, std::abs(cache.times.back()));
    for (int i = 0; i < n_snap; ++i)
        if (std::abs(u.time(i) - cache.times[i]) > ttol)
            throw invalid_argument_error("apply_S: iterate and flow cache snapshot times differ");

    std::vector<DiffeoMap> X;
    X.reserve(n_snap);
    X.emplace_back(grid);
    if (n_snap == 1) return X;

    VelocityTrajectory ut(grid, u.sobolev_index());
    for (int i = 0; i < n_snap; ++i)
        ut.append(u.time(i), detail::pull_back_cached(u.field(i), cache, i, opts.interp));
    std::vector<DiffeoMap> Y = solve_particle_ode(ut, ut.times(), opts.ode_substeps, opts.interp);
    for (int i = 1; i < n_snap; ++i) X.push_back(detail::compose_cached(cache, i, Y[i]));
    return X;
}

struct SResult {
    VelocityTrajectory su;
    std::vector<DiffeoMap> maps; // X(t_i) when keep_maps was set, else empty
    double max_divergence = 0.0; // residual divergence of the projected output
};

/// One application of the fixed-point map: compose the flows, invert at every
/// snapshot, and push the initial datum forward through the inverse map's
/// transpose Jacobian. Snapshot 0 is the projected initial datum.
inline SResult apply_S_cached(const VelocityTrajectory& u, const VectorField& u0,
                              const FlowCache& cache, const Interpolant& u0_interp,
                              const SOptions& opts = {}) {
    const TorusGrid& grid = u.grid();
    const int d = grid.dim();
    const int n_snap = u.size();

    std::vector<DiffeoMap> X = flow_composition(u, cache, opts);
    SResult res{VelocityTrajectory(grid, u.sobolev_index()), {}, 0.0};
    res.su.append(u.time(0), leray_project(u0));
    if (n_snap == 1) {
        if (opts.keep_maps) res.maps = std::move(X);
        return res;
    }

    const std::size_t np = grid.num_points();
    VectorField prev_inv(grid); // warm start for successive inversions
    bool have_prev = false;
    for (int i = 1; i < n_snap; ++i) {
        VectorField a_disp = invert_displacement(X[i], opts.inversion_tol, opts.inversion_max_iters,
                                                 have_prev ? &prev_inv : nullptr, opts.interp);
        auto jac_interp = make_interpolant(X[i].jacobian(), opts.interp);
        VectorField w(grid);
        std::vector<double> min_det(num_threads(), std::numeric_limits<double>::infinity());
        parallel_for_chunked(np, [&](int chunk, std::size_t p) {
            const auto x = grid.point(p);
            double y[3] = {x[0], x[1], x[2]};
            for (int a = 0; a < d; ++a) y[a] += a_disp.comp(a)[p];
            double J[9], inv[9], v[3];
            jac_interp->eval(y, J);
            u0_interp.eval(y, v);
            const double det = detail::invert_small(J, inv, d);
            min_det[chunk] = std::min(min_det[chunk], std::abs(det));
            // grad A = (grad X o A)^{-1}; push-forward uses its transpose.
            for (int r = 0; r < d; ++r) {
                double acc = 0.0;
                for (int c = 0; c < d; ++c) acc += inv[c * d + r] * v[c];
                w.comp(r)[p] = acc;
            }
        });
        double worst_det = std::numeric_limits<double>::infinity();
        for (double v : min_det) worst_det = std::min(worst_det, v);
        if (worst_det <= 1e-8)
            throw resolution_error("apply_S: singular composed Jacobian, |det| <= 1e-8");
        VectorField su = leray_project(w);
        if (!su.finite())
            throw numerical_error("apply_S: non-finite iterate", u.time(i - 1));
        res.max_divergence = std::max(res.max_divergence, max_divergence(su));
        res.su.append(u.time(i), std::move(su));
        prev_inv = std::move(a_disp);
        have_prev = true;
    }
    if (opts.keep_maps) res.maps = std::move(X);
    return res;
}

/// Convenience wrapper that builds the flow cache and initial-datum
/// interpolant for a single application.
inline VelocityTrajectory apply_S(const VelocityTrajectory& u, const VectorField& u0,
                                  const NoiseBasis& basis, const BrownianPath& path,
                                  const SOptions& opts = {}) {
    FlowCache cache = build_flow_cache(basis, path, u.times(), opts.interp);
    auto u0i = make_interpolant(u0, opts.interp);
    return apply_S_cached(u, u0, cache, *u0i, opts).su;
}

/// || P[(grad X)^T (u_t o X)] - u0 ||_{L^2}: how far the current velocity is
/// from reproducing the initial datum when dragged back to labels.
inline double weber_residual(const VectorField& u_t, const DiffeoMap& X, const VectorField& u0,
                             InterpMethod im = InterpMethod::spline) {
    detail::check_same_grid(u_t.grid(), X.grid(), "weber_residual");
    const TorusGrid& grid = u_t.grid();
    const int d = grid.dim();
    auto ui = make_interpolant(u_t, im);
    VectorField w(grid);
    parallel_for(grid.num_points(), [&](std::size_t p) {
        const auto x = X.apply(p);
        double v[3];
        ui->eval(x.data(), v);
        for (int r = 0; r < d; ++r) {
            double acc = 0.0;
            for (int c = 0; c < d; ++c) acc += X.jacobian().entry(c, r)[p] * v[c];
            w.comp(r)[p] = acc;
        }
    });
    return l2_norm(leray_project(w) - u0);
}

inline VelocityTrajectory constant_trajectory(const VectorField& u, const std::vector<double>& times,
                                              SobolevIndex s) {
    VelocityTrajectory traj(u.grid(), s);
    for (double t : times) traj.append(t, u);
    return traj;
}

struct PicardConfig {
    double horizon = 0.25;
    double dt = 1e-3;
    SobolevIndex s{3.0};
    double tol_rel = 1e-8;   // absolute tolerance is tol_rel * ||u0||_{L^2}
    double ratio_max = 0.9;  // consecutive-increment ratio treated as stalling
    int max_iters = 50;
    double t_min = -1.0;     // window floor; < 0 means horizon / 64
    double ball_factor = 2.0;
    int ratio_patience = 3;  // stalled iterations tolerated before shrinking
    SOptions s_options{};
};

struct PicardIteration {
    double increment = 0.0;
    double ratio = 0.0;
    bool has_ratio = false;
    double sigma_s = 0.0; // sup-in-time H^s norm of the new iterate
    double wall_seconds = 0.0;
};

struct PicardWindow {
    double start = 0.0;
    double length = 0.0;
    bool accepted = false;
    std::string reason;
    std::vector<PicardIteration> iterations;
};

struct IterationReport {
    double tol_abs = 0.0;
    double ball_radius = 0.0;
    bool converged = false;
    double final_time = 0.0;
    int total_iterations = 0;
    std::vector<PicardWindow> windows;
};

/// Wall-clock timings are reproducibility-hostile, so they are only emitted
/// when explicitly requested (the harness writes them to a separate file).
inline nlohmann::json to_json(const IterationReport& rep, bool include_timing = false) {
    nlohmann::json j;
    j["tol_abs"] = rep.tol_abs;
    j["ball_radius"] = rep.ball_radius;
    j["converged"] = rep.converged;
    j["final_time"] = rep.final_time;
    j["total_iterations"] = rep.total_iterations;
    j["windows"] = nlohmann::json::array();
    for (const auto& w : rep.windows) {
        nlohmann::json jw;
        jw["start"] = w.start;
        jw["length"] = w.length;
        jw["accepted"] = w.accepted;
        jw["reason"] = w.reason;
        jw["iterations"] = nlohmann::json::array();
        for (const auto& it : w.iterations) {
            nlohmann::json ji;
            ji["increment"] = it.increment;
            if (it.has_ratio) ji["ratio"] = it.ratio;
            ji["sigma_s"] = it.sigma_s;
            if (include_timing) ji["wall_seconds"] = it.wall_seconds;
            jw["iterations"].push_back(std::move(ji));
        }
        j["windows"].push_back(std::move(jw));
    }
    return j;
}

struct PicardResult {
    VelocityTrajectory u;
    IterationReport report;
};

/// Picard iteration for the velocity fixed point, with windowed continuation:
/// if a window fails to contract (increment ratio persistently >= ratio_max,
/// ball bound exceeded, iteration budget spent, or a numerical failure), the
/// window is halved and retried; falling below the floor raises
/// nonconvergence_error after filling *report_out when provided.
inline PicardResult picard_solve(const VectorField& u0_raw, const NoiseBasis& basis,
                                 const BrownianPath& path, const PicardConfig& cfg,
                                 IterationReport* report_out = nullptr) {
    const TorusGrid& grid = u0_raw.grid();
    if (!(cfg.dt > 0.0)) throw invalid_argument_error("picard: dt > 0 required");
    if (cfg.horizon < 0.0) throw invalid_argument_error("picard: horizon >= 0 required");
    if (!(cfg.tol_rel > 0.0)) throw invalid_argument_error("picard: tol_rel > 0 required");
    if (!(cfg.ratio_max > 0.0)) throw invalid_argument_error("picard: ratio_max > 0 required");
    if (cfg.max_iters < 1) throw invalid_argument_error("picard: max_iters >= 1 required");
    if (!(cfg.ball_factor > 1.0)) throw invalid_argument_error("picard: ball_factor > 1 required");

    VectorField u0 = leray_project(u0_raw);
    const double norm0 = l2_norm(u0);
    const double norm_s = sobolev_norm(u0, cfg.s);

    IterationReport rep;
    rep.tol_abs = cfg.tol_rel * norm0;
    rep.ball_radius = cfg.ball_factor * norm_s;

    auto finish = [&](VelocityTrajectory traj) {
        rep.converged = true;
        rep.final_time = traj.times().back();
        if (report_out) *report_out = rep;
        return PicardResult{std::move(traj), std::move(rep)};
    };

    if (cfg.horizon == 0.0) {
        VelocityTrajectory traj(grid, cfg.s);
        traj.append(0.0, std::move(u0));
        return finish(std::move(traj));
    }

    const long long n_steps = std::llround(cfg.horizon / cfg.dt);
    if (n_steps < 1 || std::abs(n_steps * cfg.dt - cfg.horizon) > 1e-9 * std::max(1.0, cfg.horizon))
        throw invalid_argument_error("picard: horizon must be a positive multiple of dt");
    if (path.steps() < n_steps)
        throw invalid_argument_error("picard: driving path shorter than the horizon");

    const double t_min = cfg.t_min < 0.0 ? cfg.horizon / 64.0 : cfg.t_min;
    if (t_min > cfg.horizon * (1.0 + 1e-12))
        throw invalid_argument_error("picard: window floor exceeds the horizon");
    const long long min_steps = std::max<long long>(1, std::llround(std::ceil(t_min / cfg.dt - 1e-9)));

    VelocityTrajectory traj(grid, cfg.s);
    traj.append(0.0, u0);
    VectorField u_cur = u0;
    long long cursor = 0;
    long long window_steps = n_steps;

    while (cursor < n_steps) {
        window_steps = std::min(window_steps, n_steps - cursor);
        const int i0 = static_cast<int>(cursor);
        const int i1 = static_cast<int>(cursor + window_steps);
        BrownianPath wp = subpath(path, i0, i1);

        PicardWindow wrec;
        wrec.start = path.times[i0];
        wrec.length = wp.horizon();

        bool ok = false;
        std::string fail_reason;
        VelocityTrajectory accepted(grid, cfg.s);
        try {
            FlowCache cache = build_flow_cache(basis, wp, wp.times, cfg.s_options.interp);
            auto u0i = make_interpolant(u_cur, cfg.s_options.interp);
            VelocityTrajectory iterate = constant_trajectory(u_cur, wp.times, cfg.s);
            double prev_inc = -1.0;
            int stalled = 0;
            for (int it = 0; it < cfg.max_iters; ++it) {
                const auto tic = std::chrono::steady_clock::now();
                SResult sr = apply_S_cached(iterate, u_cur, cache, *u0i, cfg.s_options);
                const double inc = sigma0_distance(sr.su, iterate);
                PicardIteration irec;
                irec.increment = inc;
                irec.sigma_s = sr.su.sigma_norm(cfg.s);
                irec.wall_seconds =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - tic).count();
                if (prev_inc > 0.0) {
                    irec.ratio = inc / prev_inc;
                    irec.has_ratio = true;
                }
                wrec.iterations.push_back(irec);
                ++rep.total_iterations;
                iterate = std::move(sr.su);
                if (!std::isfinite(inc)) {
                    fail_reason = "non-finite increment";
                    break;
                }
                if (irec.sigma_s > rep.ball_radius + 1e-12) {
                    fail_reason = "ball bound exceeded";
                    break;
                }
                if (inc <= rep.tol_abs) {
                    ok = true;
                    break;
                }
                if (irec.has_ratio && irec.ratio >= cfg.ratio_max) ++stalled;
                else stalled = 0;
                if (stalled >= cfg.ratio_patience) {
                    fail_reason = "increment ratio stalled";
                    break;
                }
                prev_inc = inc;
            }
            if (ok) accepted = std::move(iterate);
            else if (fail_reason.empty()) fail_reason = "iteration budget spent";
        } catch (const inversion_error& e) {
            fail_reason = std::string("inversion failed: ") + e.what();
        } catch (const numerical_error& e) {
            fail_reason = std::string("numerical failure: ") + e.what();
        } catch (const resolution_error& e) {
            fail_reason = std::string("resolution failure: ") + e.what();
        }

        wrec.accepted = ok;
        wrec.reason = ok ? "converged" : fail_reason;
        rep.windows.push_back(std::move(wrec));

        if (ok) {
            for (int k = 1; k <= static_cast<int>(window_steps); ++k)
                traj.append(path.times[i0 + k], accepted.field(k));
            u_cur = accepted.field(static_cast<int>(window_steps));
            cursor += window_steps;
        } else {
            if (window_steps <= min_steps) {
                rep.final_time = path.times[i0];
                if (report_out) *report_out = rep;
                throw nonconvergence_error("picard: window floor " + std::to_string(t_min) +
                                           " reached at t = " + std::to_string(path.times[i0]) +
                                           " (" + fail_reason + ")");
            }
            window_steps = std::max(min_steps, window_steps / 2);
        }
    }
    return finish(std::move(traj));
}

} // namespace torusflow
