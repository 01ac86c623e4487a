#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "torusflow/errors.hpp"
#include "torusflow/initial_conditions.hpp"
#include "torusflow/interp.hpp"
#include "torusflow/noise_basis.hpp"

namespace torusflow {

struct PicardSettings {
    double tol = 1e-8; // relative to the L^2 norm of the initial datum
    double ratio_max = 0.9;
    int max_iters = 50;
    double t_min = -1.0; // < 0 selects horizon / 64
    double ball_factor = 2.0;
};

struct ExperimentConfig {
    int dimension = 2;
    int resolution = 64;
    double sobolev_s = 3.0;
    InitialCondition initial_condition;
    std::vector<NoiseMode> noise;
    std::uint64_t seed = 0;
    double horizon = 0.25;
    double dt = 1e-3;
    PicardSettings picard;
    double viscosity = 0.0;
    std::string interpolation = "spline";
    int snapshot_stride = 1;
    std::string output = "out";
};

namespace detail {

inline void check_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                       const std::string& where) {
    if (!j.is_object()) throw invalid_argument_error("config: " + where + " must be an object");
    for (const auto& item : j.items()) {
        bool known = false;
        for (auto a : allowed)
            if (item.key() == a) { known = true; break; }
        if (!known)
            throw invalid_argument_error("config: unknown key '" + where + "." + item.key() + "'");
    }
}

template <typename T>
T get_or(const nlohmann::json& j, const std::string& key, T fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw invalid_argument_error("config: bad value for '" + where + "." + key + "'");
    }
}

template <typename T, std::size_t N>
std::array<T, N> get_padded_array(const nlohmann::json& j, const std::string& key, int want,
                                  const std::string& where) {
    std::array<T, N> out{};
    if (!j.contains(key) || !j.at(key).is_array() ||
        static_cast<int>(j.at(key).size()) != want)
        throw invalid_argument_error("config: '" + where + "." + key + "' must be a length-" +
                                     std::to_string(want) + " array");
    for (int i = 0; i < want; ++i) {
        try {
            out[i] = j.at(key).at(i).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw invalid_argument_error("config: bad entry in '" + where + "." + key + "'");
        }
    }
    return out;
}

} // namespace detail

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

/// Hash of the effective configuration with the output location removed, so
/// relocating results does not change identity. nlohmann objects serialize
/// with sorted keys, which makes the dump canonical.
inline std::string config_hash(nlohmann::json effective) {
    effective.erase("output");
    const std::uint64_t h = fnv1a64(effective.dump());
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

struct LoadedConfig {
    ExperimentConfig cfg;
    std::string hash;
    nlohmann::json effective;
};

inline LoadedConfig parse_config(const nlohmann::json& j) {
    using detail::check_keys;
    using detail::get_or;
    check_keys(j,
               {"dimension", "resolution", "sobolev_s", "initial_condition", "noise", "seed",
                "horizon", "dt", "picard", "viscosity", "interpolation", "snapshot_stride",
                "output"},
               "config");

    ExperimentConfig c;
    c.dimension = get_or<int>(j, "dimension", c.dimension, "config");
    if (c.dimension != 2 && c.dimension != 3)
        throw invalid_argument_error("config: dimension must be 2 or 3");
    c.resolution = get_or<int>(j, "resolution", c.resolution, "config");
    if (c.resolution < 8 || (c.resolution & (c.resolution - 1)) != 0)
        throw invalid_argument_error("config: resolution must be a power of two >= 8");
    c.sobolev_s = get_or<double>(j, "sobolev_s", c.sobolev_s, "config");
    if (c.sobolev_s < 0.0) throw invalid_argument_error("config: sobolev_s must be >= 0");

    if (j.contains("initial_condition")) {
        const auto& ji = j.at("initial_condition");
        check_keys(ji, {"type", "amplitude", "seed", "kmax"}, "initial_condition");
        c.initial_condition.type = get_or<std::string>(ji, "type", "taylor-green", "initial_condition");
        c.initial_condition.amplitude = get_or<double>(ji, "amplitude", 1.0, "initial_condition");
        c.initial_condition.seed = get_or<std::uint64_t>(ji, "seed", 0, "initial_condition");
        c.initial_condition.kmax = get_or<int>(ji, "kmax", 3, "initial_condition");
        if (c.initial_condition.type != "taylor-green" && c.initial_condition.type != "shear" &&
            c.initial_condition.type != "random-bandlimited" && c.initial_condition.type != "zero")
            throw invalid_argument_error("config: unknown initial_condition.type '" +
                                         c.initial_condition.type + "'");
    }

    if (j.contains("noise")) {
        if (!j.at("noise").is_array())
            throw invalid_argument_error("config: noise must be an array");
        int idx = 0;
        for (const auto& jm : j.at("noise")) {
            const std::string where = "noise[" + std::to_string(idx++) + "]";
            check_keys(jm, {"type", "wavevector", "amplitude", "vector", "component",
                            "polarization"},
                       where);
            NoiseMode m;
            const std::string type = get_or<std::string>(jm, "type", "", where);
            m.kind = noise_kind_from_string(type);
            m.amplitude = get_or<double>(jm, "amplitude", 1.0, where);
            m.component = get_or<int>(jm, "component", -1, where);
            m.polarization = get_or<int>(jm, "polarization", 0, where);
            if (m.kind == NoiseMode::Kind::constant) {
                if (jm.contains("wavevector"))
                    throw invalid_argument_error("config: " + where +
                                                 " is constant, wavevector not allowed");
                m.constant =
                    detail::get_padded_array<double, 3>(jm, "vector", c.dimension, where);
            } else {
                if (jm.contains("vector"))
                    throw invalid_argument_error("config: " + where +
                                                 " is trigonometric, vector not allowed");
                m.wavevector =
                    detail::get_padded_array<int, 3>(jm, "wavevector", c.dimension, where);
            }
            c.noise.push_back(m);
        }
    }

    c.seed = get_or<std::uint64_t>(j, "seed", c.seed, "config");
    c.horizon = get_or<double>(j, "horizon", c.horizon, "config");
    if (c.horizon < 0.0) throw invalid_argument_error("config: horizon must be >= 0");
    c.dt = get_or<double>(j, "dt", c.dt, "config");
    if (!(c.dt > 0.0)) throw invalid_argument_error("config: dt must be > 0");
    if (c.horizon > 0.0) {
        const long long n = std::llround(c.horizon / c.dt);
        if (n < 1 || std::abs(n * c.dt - c.horizon) > 1e-9 * std::max(1.0, c.horizon))
            throw invalid_argument_error("config: horizon must be a multiple of dt");
    }

    if (j.contains("picard")) {
        const auto& jp = j.at("picard");
        check_keys(jp, {"tol", "ratio_max", "max_iters", "t_min", "ball_factor"}, "picard");
        c.picard.tol = get_or<double>(jp, "tol", c.picard.tol, "picard");
        c.picard.ratio_max = get_or<double>(jp, "ratio_max", c.picard.ratio_max, "picard");
        c.picard.max_iters = get_or<int>(jp, "max_iters", c.picard.max_iters, "picard");
        c.picard.t_min = get_or<double>(jp, "t_min", c.picard.t_min, "picard");
        c.picard.ball_factor = get_or<double>(jp, "ball_factor", c.picard.ball_factor, "picard");
        if (!(c.picard.tol > 0.0)) throw invalid_argument_error("config: picard.tol must be > 0");
        if (c.picard.max_iters < 1)
            throw invalid_argument_error("config: picard.max_iters must be >= 1");
        if (c.horizon > 0.0 && c.picard.t_min > c.horizon * (1.0 + 1e-12))
            throw invalid_argument_error("config: picard.t_min exceeds the horizon");
    }

    c.viscosity = get_or<double>(j, "viscosity", c.viscosity, "config");
    if (c.viscosity < 0.0) throw invalid_argument_error("config: viscosity must be >= 0");
    c.interpolation = get_or<std::string>(j, "interpolation", c.interpolation, "config");
    interp_method_from_string(c.interpolation); // validates
    c.snapshot_stride = get_or<int>(j, "snapshot_stride", c.snapshot_stride, "config");
    if (c.snapshot_stride < 1)
        throw invalid_argument_error("config: snapshot_stride must be >= 1");
    c.output = get_or<std::string>(j, "output", c.output, "config");

    nlohmann::json effective = j;
    return LoadedConfig{std::move(c), config_hash(effective), std::move(effective)};
}

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw invalid_argument_error("cannot open config file '" + path + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw invalid_argument_error("config parse error in '" + path + "': " + e.what());
    }
}

} // namespace torusflow
