#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "torusflow/errors.hpp"
#include "torusflow/field_io.hpp"
#include "torusflow/rng.hpp"

namespace torusflow {

/// An m-component Brownian trajectory on a fixed mesh, W(0) = 0.
/// `level` counts bridge refinements applied since sampling; it selects the
/// RNG stream so every refinement level draws fresh, reproducible randomness.
struct BrownianPath {
    int m = 0;
    std::uint64_t seed = 0;
    int level = 0;
    std::vector<double> times;  // N+1 strictly increasing, times[0] = 0
    std::vector<double> values; // time-major: values[i*m + k]

    int steps() const { return static_cast<int>(times.size()) - 1; }
    double horizon() const { return times.back(); }

    double value(int i, int k) const { return values[static_cast<std::size_t>(i) * m + k]; }

    /// W_k(t_{i+1}) - W_k(t_i).
    double increment(int i, int k) const { return value(i + 1, k) - value(i, k); }
};

inline int find_time_index(const BrownianPath& path, double t) {
    const double tol = 1e-9 * std::max(1.0, path.horizon());
    for (std::size_t i = 0; i < path.times.size(); ++i)
        if (std::abs(path.times[i] - t) <= tol) return static_cast<int>(i);
    throw invalid_argument_error("time " + std::to_string(t) + " is not on the path mesh");
}

/// Knot window [i0, i1] of a path, re-based so the window starts at time zero
/// with value zero. Increments inside the window are preserved bit-for-bit
/// whenever times[i0] == 0 or exactly cancels; otherwise to round-off.
inline BrownianPath subpath(const BrownianPath& path, int i0, int i1) {
    if (i0 < 0 || i1 <= i0 || i1 > path.steps())
        throw invalid_argument_error("subpath: need 0 <= i0 < i1 <= steps");
    BrownianPath out;
    out.m = path.m;
    out.seed = path.seed;
    out.level = path.level;
    out.times.resize(i1 - i0 + 1);
    out.values.resize(static_cast<std::size_t>(i1 - i0 + 1) * path.m);
    for (int i = i0; i <= i1; ++i) {
        out.times[i - i0] = path.times[i] - path.times[i0];
        for (int k = 0; k < path.m; ++k)
            out.values[static_cast<std::size_t>(i - i0) * path.m + k] =
                path.value(i, k) - path.value(i0, k);
    }
    return out;
}

inline BrownianPath sample_brownian(int m, double T, int N, std::uint64_t seed) {
    if (m < 1) throw invalid_argument_error("sample_brownian: m >= 1 required");
    if (N < 1) throw invalid_argument_error("sample_brownian: N >= 1 required");
    if (!(T > 0.0)) throw invalid_argument_error("sample_brownian: T > 0 required");
    BrownianPath path;
    path.m = m;
    path.seed = seed;
    path.level = 0;
    path.times.resize(N + 1);
    path.values.assign(static_cast<std::size_t>(N + 1) * m, 0.0);
    for (int i = 0; i <= N; ++i) path.times[i] = T * i / N;
    CounterRng rng(seed, seed);
    const double sqdt = std::sqrt(T / N);
    for (int i = 0; i < N; ++i) {
        for (int k = 0; k < m; ++k) {
            const double dw = sqdt * rng.normal(static_cast<std::uint64_t>(i) * m + k);
            path.values[static_cast<std::size_t>(i + 1) * m + k] =
                path.values[static_cast<std::size_t>(i) * m + k] + dw;
        }
    }
    return path;
}

/// Brownian-bridge subdivision of every interval into `factor` pieces.
/// Parent mesh values are copied bit-for-bit; interior points are sampled
/// sequentially from the conditional law given the already-fixed left value
/// and the parent right endpoint.
inline BrownianPath refine(const BrownianPath& parent, int factor) {
    if (factor < 2) throw invalid_argument_error("refine: factor >= 2 required");
    const int N = parent.steps();
    const int m = parent.m;
    BrownianPath out;
    out.m = m;
    out.seed = parent.seed;
    out.level = parent.level + 1;
    out.times.resize(static_cast<std::size_t>(N) * factor + 1);
    out.values.resize((static_cast<std::size_t>(N) * factor + 1) * m);
    CounterRng rng(parent.seed, mix_seed(parent.seed, static_cast<std::uint64_t>(out.level)));
    for (int i = 0; i < N; ++i) {
        const double ta = parent.times[i];
        const double tb = parent.times[i + 1];
        const std::size_t base = static_cast<std::size_t>(i) * factor;
        out.times[base] = ta;
        for (int j = 1; j < factor; ++j)
            out.times[base + j] = ta + (tb - ta) * j / factor;
        for (int k = 0; k < m; ++k) {
            out.values[base * m + k] = parent.value(i, k);
            const double wb = parent.value(i + 1, k);
            for (int j = 1; j < factor; ++j) {
                const double s = out.times[base + j];
                const double a = out.times[base + j - 1];
                const double wa = out.values[(base + j - 1) * m + k];
                const double mean = wa + (s - a) / (tb - a) * (wb - wa);
                const double var = (s - a) * (tb - s) / (tb - a);
                const std::uint64_t q =
                    (static_cast<std::uint64_t>(i) * (factor - 1) + (j - 1)) * m + k;
                out.values[(base + j) * m + k] = mean + std::sqrt(var) * rng.normal(q);
            }
        }
    }
    out.times[static_cast<std::size_t>(N) * factor] = parent.times[N];
    for (int k = 0; k < m; ++k)
        out.values[static_cast<std::size_t>(N) * factor * m + k] = parent.value(N, k);
    return out;
}

inline void write_brownian_csv(const std::string& path, const BrownianPath& p) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open for writing: " + path);
    out << "t";
    for (int k = 1; k <= p.m; ++k) out << ",W" << k;
    out << "\n";
    for (std::size_t i = 0; i < p.times.size(); ++i) {
        out << g17(p.times[i]);
        for (int k = 0; k < p.m; ++k) out << "," << g17(p.values[i * p.m + k]);
        out << "\n";
    }
    if (!out) throw io_error("write failed: " + path);
}

/// Reads a path CSV back; seed/level are not stored in the file and are
/// zeroed (the file format carries only the realization).
inline BrownianPath read_brownian_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line)) throw io_error("empty path file: " + path);
    int m = 0;
    for (char c : line)
        if (c == ',') ++m;
    if (m < 1 || line.rfind("t,", 0) != 0) throw io_error("bad path header: " + path);
    BrownianPath p;
    p.m = m;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell;
        if (!std::getline(row, cell, ',')) throw io_error("bad path row: " + path);
        p.times.push_back(std::stod(cell));
        for (int k = 0; k < m; ++k) {
            if (!std::getline(row, cell, ',')) throw io_error("short path row: " + path);
            p.values.push_back(std::stod(cell));
        }
    }
    if (p.times.size() < 2) throw io_error("path has no steps: " + path);
    return p;
}

} // namespace torusflow
