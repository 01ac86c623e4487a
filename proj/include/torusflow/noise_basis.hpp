#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "torusflow/field.hpp"
#include "torusflow/spectral.hpp"

namespace torusflow {

/// Analytic descriptor of one noise term. Modes sharing a `component` index
/// are summed into a single field driven by one Brownian component; -1 means
/// the mode gets its own component.
struct NoiseMode {
    enum class Kind { trig_cos, trig_sin, constant };
    Kind kind = Kind::trig_cos;
    std::array<int, 3> wavevector{0, 0, 0};
    double amplitude = 1.0;
    std::array<double, 3> constant{0.0, 0.0, 0.0};
    int component = -1;
    int polarization = 0; // d = 3: selects one of the two directions normal to k
};

inline NoiseMode::Kind noise_kind_from_string(const std::string& s) {
    if (s == "trig-cos") return NoiseMode::Kind::trig_cos;
    if (s == "trig-sin") return NoiseMode::Kind::trig_sin;
    if (s == "constant") return NoiseMode::Kind::constant;
    throw invalid_argument_error("noise mode type must be trig-cos, trig-sin, or constant");
}

/// The family {sigma_j} of divergence-free fields driving the transport
/// noise. Grid samples are kept for spectral work; the analytic descriptors
/// are kept so integrators can evaluate sigma exactly at particle positions.
class NoiseBasis {
public:
    NoiseBasis(const TorusGrid& grid, std::vector<NoiseMode> modes)
        : grid_(grid), modes_(std::move(modes)) {
        validate();
        group();
        synthesize();
    }

    const TorusGrid& grid() const { return grid_; }
    const std::vector<NoiseMode>& modes() const { return modes_; }
    int num_components() const { return static_cast<int>(groups_.size()); }
    bool empty() const { return groups_.empty(); }
    const VectorField& sigma(int j) const { return sigma_[j]; }

    /// sigma_j at an arbitrary point, from the descriptors (no interpolation).
    void eval(int j, const double* x, double* out) const {
        const int d = grid_.dim();
        for (int a = 0; a < d; ++a) out[a] = 0.0;
        for (int idx : groups_[j]) add_mode(idx, x, out);
    }

    NoiseBasis resample(const TorusGrid& g) const { return NoiseBasis(g, modes_); }

    /// sum_j ||sigma_j||_{s=5}^2, the truncated summability diagnostic.
    double smoothness_proxy() const {
        double acc = 0.0;
        for (const auto& s : sigma_) {
            const double v = sobolev_norm(s, SobolevIndex(5.0));
            acc += v * v;
        }
        return acc;
    }

private:
    void validate() const {
        const int d = grid_.dim();
        for (const auto& m : modes_) {
            if (m.kind == NoiseMode::Kind::constant) continue;
            int norm2 = 0;
            for (int a = 0; a < 3; ++a) {
                if (a >= d && m.wavevector[a] != 0)
                    throw invalid_argument_error("noise wavevector uses axis beyond dimension");
                norm2 += m.wavevector[a] * m.wavevector[a];
            }
            if (norm2 == 0)
                throw invalid_argument_error(
                    "zero wavevector: use a constant descriptor for uniform fields");
            for (int a = 0; a < d; ++a)
                if (std::abs(m.wavevector[a]) >= grid_.n() / 2)
                    throw invalid_argument_error("noise wavevector outside the grid band");
            if (m.polarization != 0 && m.polarization != 1)
                throw invalid_argument_error("polarization must be 0 or 1");
        }
    }

    void group() {
        // One group per distinct component id, in order of first appearance;
        // id -1 always starts a fresh group.
        std::vector<int> ids;
        for (std::size_t i = 0; i < modes_.size(); ++i) {
            const int c = modes_[i].component;
            if (c >= 0) {
                bool merged = false;
                for (std::size_t g = 0; g < ids.size(); ++g) {
                    if (ids[g] == c) {
                        groups_[g].push_back(static_cast<int>(i));
                        merged = true;
                        break;
                    }
                }
                if (merged) continue;
            }
            groups_.push_back({static_cast<int>(i)});
            ids.push_back(c);
        }
    }

    void synthesize() {
        directions_.resize(modes_.size());
        for (std::size_t i = 0; i < modes_.size(); ++i) directions_[i] = direction(modes_[i]);
        for (std::size_t j = 0; j < groups_.size(); ++j) {
            VectorField f(grid_);
            const int d = grid_.dim();
            const std::size_t npts = grid_.num_points();
            for (std::size_t p = 0; p < npts; ++p) {
                const auto x = grid_.point(p);
                double v[3] = {0.0, 0.0, 0.0};
                eval_into(static_cast<int>(j), x.data(), v);
                for (int a = 0; a < d; ++a) f.comp(a)[p] = v[a];
            }
            sigma_.push_back(std::move(f));
        }
    }

    void eval_into(int j, const double* x, double* out) const {
        for (int idx : groups_[j]) add_mode(idx, x, out);
    }

    std::array<double, 3> direction(const NoiseMode& m) const {
        std::array<double, 3> dir{0.0, 0.0, 0.0};
        if (m.kind == NoiseMode::Kind::constant) return dir;
        const auto& k = m.wavevector;
        if (grid_.dim() == 2) {
            // In-plane normal (k2, -k1): the orientation that makes
            // k = (0,1) produce the x1-directed shear profile.
            const double norm = std::sqrt(static_cast<double>(k[0]) * k[0] +
                                          static_cast<double>(k[1]) * k[1]);
            dir[0] = k[1] / norm;
            dir[1] = -k[0] / norm;
            return dir;
        }
        // d = 3: unit vectors normal to k; either one is the curl of a
        // single-mode vector potential, hence exactly divergence-free.
        double kv[3] = {static_cast<double>(k[0]), static_cast<double>(k[1]),
                        static_cast<double>(k[2])};
        double r[3] = {1.0, 0.0, 0.0};
        if (k[1] == 0 && k[2] == 0) {
            r[0] = 0.0;
            r[1] = 1.0;
        }
        double e1[3] = {kv[1] * r[2] - kv[2] * r[1], kv[2] * r[0] - kv[0] * r[2],
                        kv[0] * r[1] - kv[1] * r[0]};
        double n1 = std::sqrt(e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]);
        for (double& v : e1) v /= n1;
        if (m.polarization == 0) {
            dir = {e1[0], e1[1], e1[2]};
            return dir;
        }
        double e2[3] = {kv[1] * e1[2] - kv[2] * e1[1], kv[2] * e1[0] - kv[0] * e1[2],
                        kv[0] * e1[1] - kv[1] * e1[0]};
        double n2 = std::sqrt(e2[0] * e2[0] + e2[1] * e2[1] + e2[2] * e2[2]);
        dir = {e2[0] / n2, e2[1] / n2, e2[2] / n2};
        return dir;
    }

    void add_mode(int idx, const double* x, double* out) const {
        const NoiseMode& m = modes_[idx];
        const int d = grid_.dim();
        if (m.kind == NoiseMode::Kind::constant) {
            for (int a = 0; a < d; ++a) out[a] += m.constant[a];
            return;
        }
        double phase = 0.0;
        for (int a = 0; a < d; ++a) phase += m.wavevector[a] * x[a];
        const double profile =
            m.kind == NoiseMode::Kind::trig_cos ? std::cos(phase) : std::sin(phase);
        const auto& dir = directions_[idx];
        for (int a = 0; a < d; ++a) out[a] += m.amplitude * profile * dir[a];
    }

    TorusGrid grid_;
    std::vector<NoiseMode> modes_;
    std::vector<std::vector<int>> groups_;
    std::vector<std::array<double, 3>> directions_;
    std::vector<VectorField> sigma_;
};

/// Cosine modes, one Brownian component each.
inline NoiseBasis make_trig_basis(const TorusGrid& grid,
                                  const std::vector<std::pair<std::array<int, 3>, double>>& modes) {
    std::vector<NoiseMode> descriptors;
    for (const auto& [k, a] : modes) {
        NoiseMode m;
        m.kind = NoiseMode::Kind::trig_cos;
        m.wavevector = k;
        m.amplitude = a;
        descriptors.push_back(m);
    }
    return NoiseBasis(grid, std::move(descriptors));
}

} // namespace torusflow
