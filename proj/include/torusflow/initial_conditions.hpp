#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "torusflow/errors.hpp"
#include "torusflow/rng.hpp"
#include "torusflow/spectral.hpp"

namespace torusflow {

/// Steady Euler solution; its self-advection is a pure gradient.
inline VectorField taylor_green(const TorusGrid& grid, double amplitude = 1.0) {
    if (grid.dim() == 2)
        return VectorField::from_function(grid, [&](const std::array<double, 3>& x) {
            return std::array<double, 3>{amplitude * std::sin(x[0]) * std::cos(x[1]),
                                         -amplitude * std::cos(x[0]) * std::sin(x[1]), 0.0};
        });
    return VectorField::from_function(grid, [&](const std::array<double, 3>& x) {
        return std::array<double, 3>{amplitude * std::sin(x[0]) * std::cos(x[1]) * std::cos(x[2]),
                                     -amplitude * std::cos(x[0]) * std::sin(x[1]) * std::cos(x[2]),
                                     0.0};
    });
}

inline VectorField shear_flow(const TorusGrid& grid, double amplitude = 1.0) {
    return VectorField::from_function(grid, [&](const std::array<double, 3>& x) {
        return std::array<double, 3>{amplitude * std::sin(x[1]), 0.0, 0.0};
    });
}

/// Divergence-free trig polynomial with Gaussian coefficients on |k|_inf <=
/// kmax, normalized to L^2 norm `amplitude`. The coefficient draw depends only
/// on (seed, kmax, d), never on n, so refining the grid samples the same
/// analytic field.
inline VectorField random_bandlimited(const TorusGrid& grid, std::uint64_t seed, int kmax = 3,
                                      double amplitude = 1.0) {
    const int d = grid.dim();
    if (kmax < 1) throw invalid_argument_error("random_bandlimited: kmax >= 1 required");
    if (kmax > grid.n() / 3)
        throw invalid_argument_error("random_bandlimited: kmax exceeds the dealiased band");

    struct Mode {
        std::array<int, 3> k;
        std::array<double, 3> a, b;
    };
    std::vector<Mode> modes;
    CounterRng rng(seed, mix_seed(seed, 0xF1E1Du));
    std::uint64_t counter = 0;
    const int k3max = d == 3 ? kmax : 0;
    for (int k1 = -kmax; k1 <= kmax; ++k1) {
        for (int k2 = -kmax; k2 <= kmax; ++k2) {
            for (int k3 = -k3max; k3 <= k3max; ++k3) {
                const bool upper = k1 > 0 || (k1 == 0 && k2 > 0) || (k1 == 0 && k2 == 0 && k3 > 0);
                if (!upper) continue;
                Mode m;
                m.k = {k1, k2, k3};
                for (int c = 0; c < d; ++c) {
                    m.a[c] = rng.normal(counter++);
                    m.b[c] = rng.normal(counter++);
                }
                for (int c = d; c < 3; ++c) m.a[c] = m.b[c] = 0.0;
                modes.push_back(m);
            }
        }
    }

    VectorField u(grid);
    parallel_for(grid.num_points(), [&](std::size_t p) {
        const auto x = grid.point(p);
        double v[3] = {0, 0, 0};
        for (const auto& m : modes) {
            double phase = 0.0;
            for (int a = 0; a < d; ++a) phase += m.k[a] * x[a];
            const double cp = std::cos(phase), sp = std::sin(phase);
            for (int c = 0; c < d; ++c) v[c] += m.a[c] * cp + m.b[c] * sp;
        }
        for (int c = 0; c < d; ++c) u.comp(c)[p] = v[c];
    });

    u = leray_project(u);
    const double nrm = l2_norm(u);
    if (nrm == 0.0) throw numerical_error("random_bandlimited: projected field vanished");
    return (amplitude / nrm) * u;
}

inline VectorField zero_velocity(const TorusGrid& grid) { return VectorField(grid); }

struct InitialCondition {
    std::string type = "taylor-green"; // taylor-green | shear | random-bandlimited | zero
    double amplitude = 1.0;
    std::uint64_t seed = 0; // random-bandlimited only
    int kmax = 3;           // random-bandlimited only
};

inline VectorField make_initial_condition(const TorusGrid& grid, const InitialCondition& ic) {
    if (ic.type == "taylor-green") return taylor_green(grid, ic.amplitude);
    if (ic.type == "shear") return shear_flow(grid, ic.amplitude);
    if (ic.type == "random-bandlimited")
        return random_bandlimited(grid, ic.seed, ic.kmax, ic.amplitude);
    if (ic.type == "zero") return zero_velocity(grid);
    throw invalid_argument_error("unknown initial condition type '" + ic.type + "'");
}

} // namespace torusflow
