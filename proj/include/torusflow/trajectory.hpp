#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "torusflow/field_io.hpp"
#include "torusflow/spectral.hpp"

namespace torusflow {

/// A time-indexed sequence of divergence-free velocity snapshots, the object
/// the fixed point lives in. The trajectory norm is the sup over snapshots.
class VelocityTrajectory {
public:
    VelocityTrajectory(const TorusGrid& grid, SobolevIndex s) : grid_(grid), s_(s) {}

    const TorusGrid& grid() const { return grid_; }
    SobolevIndex sobolev_index() const { return s_; }
    int size() const { return static_cast<int>(times_.size()); }
    double time(int i) const { return times_[i]; }
    const std::vector<double>& times() const { return times_; }
    const VectorField& field(int i) const { return fields_[i]; }
    VectorField& field(int i) { return fields_[i]; }

    void append(double t, VectorField u) {
        detail::check_same_grid(grid_, u.grid(), "VelocityTrajectory::append");
        if (!times_.empty() && t <= times_.back())
            throw invalid_argument_error("VelocityTrajectory: times must increase");
        times_.push_back(t);
        fields_.push_back(std::move(u));
    }

    /// sup_t ||u(t)||_s.
    double sigma_norm(SobolevIndex s) const {
        double acc = 0.0;
        for (const auto& f : fields_) acc = std::max(acc, sobolev_norm(f, s));
        return acc;
    }
    double sigma_norm() const { return sigma_norm(s_); }
    double sigma0_norm() const { return sigma_norm(SobolevIndex(0.0)); }

    double max_divergence() const {
        double acc = 0.0;
        for (const auto& f : fields_) acc = std::max(acc, torusflow::max_divergence(f));
        return acc;
    }

private:
    TorusGrid grid_;
    SobolevIndex s_;
    std::vector<double> times_;
    std::vector<VectorField> fields_;
};

/// sup_t ||a(t) - b(t)||_s; snapshot times must agree.
inline double sigma_distance(const VelocityTrajectory& a, const VelocityTrajectory& b,
                             SobolevIndex s) {
    detail::check_same_grid(a.grid(), b.grid(), "sigma_distance");
    if (a.size() != b.size())
        throw invalid_argument_error("sigma_distance: snapshot counts differ");
    double acc = 0.0;
    for (int i = 0; i < a.size(); ++i) {
        if (std::abs(a.time(i) - b.time(i)) > 1e-12 * std::max(1.0, a.time(a.size() - 1)))
            throw invalid_argument_error("sigma_distance: snapshot times differ");
        acc = std::max(acc, sobolev_norm(a.field(i) - b.field(i), s));
    }
    return acc;
}

inline double sigma0_distance(const VelocityTrajectory& a, const VelocityTrajectory& b) {
    return sigma_distance(a, b, SobolevIndex(0.0));
}

// ---- manifest I/O -------------------------------------------------------------

/// A stored trajectory: per-snapshot raw field files plus manifest.json
/// carrying times, grid, seed, and the config hash (compare refuses
/// manifests without the last two).
struct TrajectoryBundle {
    VelocityTrajectory trajectory;
    std::uint64_t seed = 0;
    bool has_seed = false;
    std::string config_hash; // empty means the manifest lacked it
    std::string kind;        // "lagrangian" | "direct" | "oracle"
};

inline void write_trajectory(const std::string& dir, const VelocityTrajectory& traj,
                             std::uint64_t seed, const std::string& config_hash,
                             const std::string& kind) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json manifest;
    manifest["kind"] = kind;
    manifest["dimension"] = traj.grid().dim();
    manifest["resolution"] = traj.grid().n();
    manifest["sobolev_s"] = static_cast<double>(traj.sobolev_index());
    manifest["seed"] = seed;
    manifest["config_hash"] = config_hash;
    manifest["times"] = traj.times();
    std::vector<std::string> names;
    for (int i = 0; i < traj.size(); ++i) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "u_%06d.raw", i);
        names.emplace_back(buf);
        write_field_raw((fs::path(dir) / buf).string(), traj.field(i));
    }
    manifest["fields"] = names;
    std::ofstream out(fs::path(dir) / "manifest.json");
    if (!out) throw io_error("cannot write manifest in " + dir);
    out << manifest.dump(2) << "\n";
}

/// Accepts either the manifest path or its directory.
inline TrajectoryBundle read_trajectory(const std::string& where) {
    namespace fs = std::filesystem;
    fs::path manifest_path(where);
    if (fs::is_directory(manifest_path)) manifest_path /= "manifest.json";
    std::ifstream in(manifest_path);
    if (!in) throw io_error("cannot open manifest: " + manifest_path.string());
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw io_error("malformed manifest " + manifest_path.string() + ": " + e.what());
    }
    for (const char* key : {"kind", "dimension", "resolution", "sobolev_s", "times", "fields"})
        if (!manifest.contains(key))
            throw io_error("manifest missing \"" + std::string(key) + "\": " +
                           manifest_path.string());
    TorusGrid grid(manifest["dimension"].get<int>(), manifest["resolution"].get<int>());
    VelocityTrajectory traj(grid, SobolevIndex(manifest["sobolev_s"].get<double>()));
    const auto times = manifest["times"].get<std::vector<double>>();
    const auto names = manifest["fields"].get<std::vector<std::string>>();
    if (times.size() != names.size())
        throw io_error("manifest times/fields length mismatch: " + manifest_path.string());
    const fs::path dir = manifest_path.parent_path();
    for (std::size_t i = 0; i < names.size(); ++i)
        traj.append(times[i], read_vector_field((dir / names[i]).string()));
    TrajectoryBundle bundle{std::move(traj), 0, false, "", manifest["kind"].get<std::string>()};
    if (manifest.contains("seed")) {
        bundle.seed = manifest["seed"].get<std::uint64_t>();
        bundle.has_seed = true;
    }
    if (manifest.contains("config_hash"))
        bundle.config_hash = manifest["config_hash"].get<std::string>();
    return bundle;
}

} // namespace torusflow
