#pragma once

#include <vector>

#include "torusflow/brownian.hpp"
#include "torusflow/diffeo.hpp"
#include "torusflow/noise_basis.hpp"

namespace torusflow {

namespace detail {

/// One Stratonovich-Heun step of dp = sum_j sigma_j(p) o dW^j for a single
/// particle: Euler predictor, trapezoidal corrector. sigma is evaluated from
/// the analytic descriptors, so there is no interpolation error in the flow.
inline void heun_step(const NoiseBasis& basis, const BrownianPath& path, int step, double* pos) {
    const int d = basis.grid().dim();
    const int m = basis.num_components();
    double drift1[3] = {0.0, 0.0, 0.0};
    double sig[3];
    for (int j = 0; j < m; ++j) {
        basis.eval(j, pos, sig);
        const double dw = path.increment(step, j);
        for (int a = 0; a < d; ++a) drift1[a] += sig[a] * dw;
    }
    double pred[3];
    for (int a = 0; a < d; ++a) pred[a] = pos[a] + drift1[a];
    double drift2[3] = {0.0, 0.0, 0.0};
    for (int j = 0; j < m; ++j) {
        basis.eval(j, pred, sig);
        const double dw = path.increment(step, j);
        for (int a = 0; a < d; ++a) drift2[a] += sig[a] * dw;
    }
    for (int a = 0; a < d; ++a) pos[a] += 0.5 * (drift1[a] + drift2[a]);
}

} // namespace detail

/// Integrates every grid particle along the given path and returns the flow
/// map at each requested time. Times must lie on the path mesh and be
/// nondecreasing; time 0 yields the identity exactly.
inline std::vector<DiffeoMap> solve_noise_flow_trajectory(const NoiseBasis& basis,
                                                          const BrownianPath& path,
                                                          const std::vector<double>& times) {
    const TorusGrid& grid = basis.grid();
    const int d = grid.dim();
    if (times.empty()) return {};
    if (basis.empty()) {
        std::vector<DiffeoMap> out;
        for (std::size_t i = 0; i < times.size(); ++i) out.push_back(DiffeoMap::identity(grid));
        return out;
    }
    std::vector<int> snap_idx(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
        snap_idx[i] = find_time_index(path, times[i]);
        if (i > 0 && snap_idx[i] < snap_idx[i - 1])
            throw invalid_argument_error("solve_noise_flow_trajectory: times must be ordered");
    }
    const int last = snap_idx.back();
    std::vector<VectorField> disp(times.size(), VectorField(grid));
    parallel_for(grid.num_points(), [&](std::size_t p) {
        auto x0 = grid.point(p);
        double pos[3] = {x0[0], x0[1], x0[2]};
        std::size_t next = 0;
        while (next < snap_idx.size() && snap_idx[next] == 0) ++next; // identity snapshots
        for (int step = 0; step < last; ++step) {
            detail::heun_step(basis, path, step, pos);
            while (next < snap_idx.size() && snap_idx[next] == step + 1) {
                for (int a = 0; a < d; ++a) disp[next].comp(a)[p] = pos[a] - x0[a];
                ++next;
            }
        }
    });
    std::vector<DiffeoMap> out;
    out.reserve(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!disp[i].finite())
            throw numerical_error("noise flow produced non-finite displacement",
                                  i == 0 ? 0.0 : times[i - 1]);
        out.emplace_back(std::move(disp[i]));
    }
    return out;
}

inline DiffeoMap solve_noise_flow(const NoiseBasis& basis, const BrownianPath& path, double t) {
    auto traj = solve_noise_flow_trajectory(basis, path, {t});
    return std::move(traj.front());
}

/// Restarts the particle integration from an existing flow state at time s
/// and advances it to time t on the same path. The step arithmetic matches
/// the direct solve, so continuing equals solving in one go bit for bit.
inline DiffeoMap continue_noise_flow(const DiffeoMap& state, const NoiseBasis& basis,
                                     const BrownianPath& path, double s, double t) {
    const TorusGrid& grid = basis.grid();
    detail::check_same_grid(grid, state.grid(), "continue_noise_flow");
    const int d = grid.dim();
    if (basis.empty()) return state;
    const int i0 = find_time_index(path, s);
    const int i1 = find_time_index(path, t);
    if (i1 < i0) throw invalid_argument_error("continue_noise_flow: t precedes s");
    VectorField disp(grid);
    parallel_for(grid.num_points(), [&](std::size_t p) {
        auto x0 = grid.point(p);
        double pos[3] = {x0[0], x0[1], x0[2]};
        for (int a = 0; a < d; ++a) pos[a] += state.displacement().comp(a)[p];
        for (int step = i0; step < i1; ++step) detail::heun_step(basis, path, step, pos);
        for (int a = 0; a < d; ++a) disp.comp(a)[p] = pos[a] - x0[a];
    });
    if (!disp.finite())
        throw numerical_error("noise flow produced non-finite displacement", s);
    return DiffeoMap(std::move(disp));
}

} // namespace torusflow
