#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <torusflow/torusflow.hpp>

namespace fs = std::filesystem;
using namespace torusflow;

namespace {

struct CommonOpts {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out;
    bool out_set = false;
    int threads = 1;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool need_config = true) {
    auto* cfg = cmd->add_option("--config", o.config_path, "experiment configuration (JSON)");
    if (need_config) cfg->required();
    cmd->add_option("--seed", o.seed, "override the config seed")->each([&](const std::string&) {
        o.seed_set = true;
    });
    cmd->add_option("--out", o.out, "override the config output directory")
        ->each([&](const std::string&) { o.out_set = true; });
    cmd->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
}

LoadedConfig load_effective(const CommonOpts& o) {
    nlohmann::json j = read_json_file(o.config_path);
    if (o.seed_set) j["seed"] = o.seed;
    if (o.out_set) j["output"] = o.out;
    return parse_config(j);
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open '" + path + "' for writing");
    out << j.dump(2) << '\n';
    if (!out) throw io_error("failed writing '" + path + "'");
}

BrownianPath make_run_path(const ExperimentConfig& cfg, int m) {
    const long long n = std::llround(cfg.horizon / cfg.dt);
    return sample_brownian(std::max(m, 1), cfg.horizon, static_cast<int>(n), cfg.seed);
}

int cmd_run_lagrangian(const CommonOpts& o) {
    set_num_threads(o.threads);
    LoadedConfig lc = load_effective(o);
    const ExperimentConfig& cfg = lc.cfg;
    TorusGrid grid(cfg.dimension, cfg.resolution);
    VectorField u0 = make_initial_condition(grid, cfg.initial_condition);
    NoiseBasis basis(grid, cfg.noise);
    const InterpMethod im = interp_method_from_string(cfg.interpolation);

    BrownianPath path;
    if (cfg.horizon > 0.0) path = make_run_path(cfg, basis.num_components());

    PicardConfig pc;
    pc.horizon = cfg.horizon;
    pc.dt = cfg.dt;
    pc.s = SobolevIndex(cfg.sobolev_s);
    pc.tol_rel = cfg.picard.tol;
    pc.ratio_max = cfg.picard.ratio_max;
    pc.max_iters = cfg.picard.max_iters;
    pc.t_min = cfg.picard.t_min;
    pc.ball_factor = cfg.picard.ball_factor;
    pc.s_options.interp = im;

    fs::create_directories(cfg.output);
    IterationReport rep;
    VelocityTrajectory traj(grid, pc.s);
    try {
        PicardResult res = picard_solve(u0, basis, path, pc, &rep);
        traj = std::move(res.u);
    } catch (const nonconvergence_error& e) {
        nlohmann::json j = to_json(rep, false);
        j["kind"] = "lagrangian";
        j["config_hash"] = lc.hash;
        j["seed"] = cfg.seed;
        j["error"] = e.what();
        write_json_file(cfg.output + "/report.json", j);
        write_json_file(cfg.output + "/timing.json", to_json(rep, true));
        std::cerr << "run-lagrangian: " << e.what() << '\n';
        return 4;
    }

    if (!basis.empty() && cfg.horizon > 0.0)
        write_brownian_csv(cfg.output + "/path.csv", path);

    // Weber residual per snapshot, window by window against each window's
    // starting datum.
    std::vector<double> weber(traj.size(), 0.0);
    SOptions sop;
    sop.interp = im;
    long long i0 = 0;
    for (const auto& w : rep.windows) {
        if (!w.accepted) continue;
        const long long steps = std::llround(w.length / cfg.dt);
        BrownianPath wp = subpath(path, static_cast<int>(i0), static_cast<int>(i0 + steps));
        FlowCache cache = build_flow_cache(basis, wp, wp.times, im);
        VelocityTrajectory local(grid, pc.s);
        for (long long k = 0; k <= steps; ++k)
            local.append(wp.times[k], traj.field(static_cast<int>(i0 + k)));
        auto X = flow_composition(local, cache, sop);
        for (long long k = 1; k <= steps; ++k)
            weber[i0 + k] = weber_residual(traj.field(static_cast<int>(i0 + k)),
                                           X[static_cast<std::size_t>(k)],
                                           traj.field(static_cast<int>(i0)), im);
        i0 += steps;
    }

    // Persist on the same snapshot grid run-direct uses: stride multiples
    // plus the final step, so trajectories from one config line up.
    VelocityTrajectory kept(grid, pc.s);
    std::vector<DiagnosticsRow> rows;
    for (int i = 0; i < traj.size(); ++i) {
        if (i % cfg.snapshot_stride != 0 && i != traj.size() - 1) continue;
        kept.append(traj.time(i), traj.field(i));
        DiagnosticsRow row = basic_diagnostics(traj.time(i), traj.field(i), pc.s);
        row.weber = weber[i];
        row.has_weber = true;
        row.picard_iters = rep.total_iterations;
        row.has_picard = true;
        rows.push_back(row);
    }
    write_trajectory(cfg.output + "/trajectory", kept, cfg.seed, lc.hash, "lagrangian");
    write_diagnostics_csv(cfg.output + "/diagnostics.csv", rows);

    double sup_weber = 0.0;
    for (double v : weber) sup_weber = std::max(sup_weber, v);
    nlohmann::json j = to_json(rep, false);
    j["kind"] = "lagrangian";
    j["config_hash"] = lc.hash;
    j["seed"] = cfg.seed;
    j["max_divergence"] = traj.max_divergence();
    j["sup_weber_residual"] = sup_weber;
    write_json_file(cfg.output + "/report.json", j);
    write_json_file(cfg.output + "/timing.json", to_json(rep, true));
    std::cout << "run-lagrangian: converged, " << rep.total_iterations << " iterations over "
              << rep.windows.size() << " window(s), final time " << g17(rep.final_time) << '\n';
    return 0;
}

int cmd_run_direct(const CommonOpts& o) {
    set_num_threads(o.threads);
    LoadedConfig lc = load_effective(o);
    const ExperimentConfig& cfg = lc.cfg;
    TorusGrid grid(cfg.dimension, cfg.resolution);
    VectorField u0 = make_initial_condition(grid, cfg.initial_condition);
    NoiseBasis basis(grid, cfg.noise);

    BrownianPath path;
    if (!basis.empty() && cfg.horizon > 0.0) path = make_run_path(cfg, basis.num_components());

    DirectSolverConfig dc;
    dc.dt = cfg.dt;
    dc.viscosity = cfg.viscosity;
    dc.snapshot_stride = cfg.snapshot_stride;
    dc.s = SobolevIndex(cfg.sobolev_s);

    VelocityTrajectory traj = solve_direct(u0, basis, path, cfg.horizon, dc);

    fs::create_directories(cfg.output);
    write_trajectory(cfg.output + "/trajectory", traj, cfg.seed, lc.hash, "direct");
    if (!basis.empty() && cfg.horizon > 0.0)
        write_brownian_csv(cfg.output + "/path.csv", path);

    std::vector<DiagnosticsRow> rows;
    for (int i = 0; i < traj.size(); ++i)
        rows.push_back(basic_diagnostics(traj.time(i), traj.field(i), dc.s));
    write_diagnostics_csv(cfg.output + "/diagnostics.csv", rows);

    const double e0 = rows.front().energy;
    double drift = 0.0;
    for (const auto& r : rows) drift = std::max(drift, std::abs(r.energy - e0));
    const double rel_drift = e0 > 0.0 ? drift / e0 : drift;

    nlohmann::json j;
    j["kind"] = "direct";
    j["config_hash"] = lc.hash;
    j["seed"] = cfg.seed;
    j["final_time"] = traj.times().back();
    j["relative_energy_drift"] = rel_drift;
    j["max_divergence"] = traj.max_divergence();
    write_json_file(cfg.output + "/report.json", j);
    std::cout << "run-direct: finished at t = " << g17(traj.times().back())
              << ", relative energy drift " << g17(rel_drift) << '\n';
    return 0;
}

int cmd_compare(const std::string& pa, const std::string& pb, double threshold, int threads) {
    set_num_threads(threads);
    TrajectoryBundle a = read_trajectory(pa);
    TrajectoryBundle b = read_trajectory(pb);

    auto refuse = [](const std::string& why) {
        std::cerr << "compare: " << why << '\n';
        return 3;
    };
    if (!a.has_seed || a.config_hash.empty())
        return refuse("first manifest lacks a recorded seed or config hash");
    if (!b.has_seed || b.config_hash.empty())
        return refuse("second manifest lacks a recorded seed or config hash");
    if (a.seed != b.seed) return refuse("seeds differ");
    if (a.trajectory.grid().dim() != b.trajectory.grid().dim() ||
        a.trajectory.grid().n() != b.trajectory.grid().n())
        return refuse("grids differ");
    if (a.trajectory.size() != b.trajectory.size()) return refuse("snapshot counts differ");
    const double ttol = 1e-12 * std::max(1.0, std::abs(a.trajectory.times().back()));
    for (int i = 0; i < a.trajectory.size(); ++i)
        if (std::abs(a.trajectory.time(i) - b.trajectory.time(i)) > ttol)
            return refuse("snapshot times differ");
    if (a.config_hash != b.config_hash)
        warn("compare: config hashes differ (comparing different experiments?)");

    const double s = static_cast<double>(a.trajectory.sobolev_index());
    const SobolevIndex hs(std::max(0.0, s - 1.0));
    std::cout << "t,l2_distance,hs1_distance\n";
    double sup_l2 = 0.0, sup_hs = 0.0, sup_ref = 0.0;
    for (int i = 0; i < a.trajectory.size(); ++i) {
        VectorField diff = a.trajectory.field(i) - b.trajectory.field(i);
        const double dl2 = l2_norm(diff);
        const double dhs = sobolev_norm(diff, hs);
        sup_l2 = std::max(sup_l2, dl2);
        sup_hs = std::max(sup_hs, dhs);
        sup_ref = std::max(sup_ref, l2_norm(a.trajectory.field(i)));
        std::cout << g17(a.trajectory.time(i)) << ',' << g17(dl2) << ',' << g17(dhs) << '\n';
    }
    const double rel = sup_l2 / std::max(sup_ref, 1e-300);
    std::cout << "sup_l2 " << g17(sup_l2) << '\n';
    std::cout << "sup_hs1 " << g17(sup_hs) << '\n';
    std::cout << "sup_l2_relative " << g17(rel) << '\n';
    const bool pass = rel <= threshold;
    std::cout << (pass ? "PASS" : "FAIL") << " (relative sup L2 vs threshold " << g17(threshold)
              << ")\n";
    return pass ? 0 : 1;
}

int cmd_convergence(const CommonOpts& o, int levels) {
    if (levels < 2) throw invalid_argument_error("convergence: --levels must be >= 2");
    set_num_threads(o.threads);
    LoadedConfig lc = load_effective(o);
    const ExperimentConfig& cfg = lc.cfg;
    if (!(cfg.horizon > 0.0))
        throw invalid_argument_error("convergence: horizon must be positive");
    TorusGrid grid(cfg.dimension, cfg.resolution);
    VectorField u0 = make_initial_condition(grid, cfg.initial_condition);
    NoiseBasis basis(grid, cfg.noise);

    std::vector<double> dts, errors;
    std::string mode;
    if (basis.empty()) {
        mode = "deterministic-dt";
        std::vector<VelocityTrajectory> sols;
        for (int l = 0; l < levels; ++l) {
            DirectSolverConfig dc;
            dc.dt = cfg.dt / (1 << l);
            dc.snapshot_stride = 1 << l;
            dc.viscosity = cfg.viscosity;
            dc.s = SobolevIndex(cfg.sobolev_s);
            sols.push_back(solve_direct(u0, basis, BrownianPath{}, cfg.horizon, dc));
            dts.push_back(dc.dt);
        }
        const VelocityTrajectory& ref = sols.back();
        for (int l = 0; l + 1 < levels; ++l) {
            double err = 0.0;
            for (int i = 0; i < sols[l].size(); ++i)
                err = std::max(err, l2_norm(sols[l].field(i) - ref.field(i)));
            errors.push_back(err);
        }
    } else {
        mode = "pathwise-flow";
        const long long n = std::llround(cfg.horizon / cfg.dt);
        std::vector<BrownianPath> paths{
            sample_brownian(basis.num_components(), cfg.horizon, static_cast<int>(n), cfg.seed)};
        for (int l = 1; l < levels; ++l) paths.push_back(refine(paths.back(), 2));
        std::vector<DiffeoMap> maps;
        for (int l = 0; l < levels; ++l) {
            maps.push_back(solve_noise_flow(basis, paths[l], cfg.horizon));
            dts.push_back(cfg.horizon / paths[l].steps());
        }
        for (int l = 0; l + 1 < levels; ++l)
            errors.push_back(l2_norm(maps[l].displacement() - maps.back().displacement()));
    }

    std::cout << "mode " << mode << "\nlevel,dt,error\n";
    for (std::size_t l = 0; l < errors.size(); ++l)
        std::cout << l << ',' << g17(dts[l]) << ',' << g17(errors[l]) << '\n';

    const double floor = 1e-12;
    bool at_floor = true;
    for (double e : errors) at_floor = at_floor && e <= floor;
    double order = 0.0;
    int fits = 0;
    for (std::size_t l = 0; l + 1 < errors.size(); ++l) {
        if (errors[l] <= floor || errors[l + 1] <= floor) continue;
        order += std::log2(errors[l] / errors[l + 1]);
        ++fits;
    }
    if (at_floor) std::cout << "order exact-to-roundoff\n";
    else if (fits == 0) std::cout << "order n/a (need >= 3 levels above the floor)\n";
    else std::cout << "order " << g17(order / fits) << '\n';

    if (o.out_set || !cfg.output.empty()) {
        fs::create_directories(cfg.output);
        std::ofstream csv(cfg.output + "/convergence.csv");
        csv << "level,dt,error\n";
        for (std::size_t l = 0; l < errors.size(); ++l)
            csv << l << ',' << g17(dts[l]) << ',' << g17(errors[l]) << '\n';
    }
    return 0;
}

int cmd_flow_demo(const CommonOpts& o) {
    set_num_threads(o.threads);
    LoadedConfig lc = load_effective(o);
    const ExperimentConfig& cfg = lc.cfg;
    if (!(cfg.horizon > 0.0)) throw invalid_argument_error("flow-demo: horizon must be positive");
    TorusGrid grid(cfg.dimension, cfg.resolution);
    NoiseBasis basis(grid, cfg.noise);
    BrownianPath path = make_run_path(cfg, basis.num_components());

    std::vector<double> times;
    const long long n = std::llround(cfg.horizon / cfg.dt);
    for (long long i = 0; i <= n; ++i) times.push_back(path.times[i]);
    std::vector<DiffeoMap> maps = solve_noise_flow_trajectory(basis, path, times);

    fs::create_directories(cfg.output);
    std::ofstream csv(cfg.output + "/flow.csv");
    csv << "t,max_displacement,mean_abs_det_err,max_abs_det_err\n";
    double worst_mean = 0.0;
    for (std::size_t i = 0; i < maps.size(); ++i) {
        ScalarField det = jacobian_determinant(maps[i]);
        double mean = 0.0, worst = 0.0;
        for (std::size_t p = 0; p < det.num_points(); ++p) {
            const double e = std::abs(det[p] - 1.0);
            mean += e;
            worst = std::max(worst, e);
        }
        mean /= static_cast<double>(det.num_points());
        worst_mean = std::max(worst_mean, mean);
        csv << g17(times[i]) << ',' << g17(maps[i].max_displacement()) << ',' << g17(mean) << ','
            << g17(worst) << '\n';
    }
    write_brownian_csv(cfg.output + "/path.csv", path);
    write_field_raw(cfg.output + "/displacement_final.raw", maps.back().displacement());
    std::cout << "flow-demo: " << maps.size() << " snapshots, worst mean |det - 1| = "
              << g17(worst_mean) << " (volume bound 5*dt = " << g17(5.0 * cfg.dt) << ")\n";
    return 0;
}

int cmd_selftest(int threads, bool inject_defect) {
    set_num_threads(threads);
    TorusGrid grid(2, 32);
    int failures = 0;
    auto check = [&](const std::string& name, bool ok) {
        std::cout << (ok ? "[ok]  " : "[FAIL] ") << name << '\n';
        if (!ok) ++failures;
    };

    // Projection: idempotence and gradient annihilation.
    {
        double worst = 0.0;
        for (int r = 0; r < 10; ++r) {
            VectorField sol = random_bandlimited(grid, 100 + r, 5, 1.0);
            ScalarField phi = ScalarField::from_function(grid, [&](const std::array<double, 3>& x) {
                return std::sin(2.0 * x[0] + x[1]) + 0.5 * std::cos(3.0 * x[1] + r);
            });
            VectorField v = sol + gradient(phi);
            VectorField pv = leray_project(v);
            if (inject_defect) pv = pv + 0.01 * gradient(phi);
            VectorField ppv = leray_project(pv);
            if (inject_defect) ppv = ppv + 0.01 * gradient(phi);
            worst = std::max(worst, (pv - sol).max_abs());
            worst = std::max(worst, (ppv - pv).max_abs());
            worst = std::max(worst, max_divergence(pv));
        }
        check("projection idempotence/annihilation (max err " + g17(worst) + ")",
              worst <= 1e-10);
    }

    // Adjointness of the transport operator pair.
    {
        double worst = 0.0;
        for (int r = 0; r < 10; ++r) {
            VectorField sig = random_bandlimited(grid, 200 + r, 4, 1.0);
            VectorField v = random_bandlimited(grid, 300 + r, 4, 1.0);
            VectorField w = random_bandlimited(grid, 400 + r, 4, 1.0);
            const double lhs = l2_inner(lie_adjoint(sig, v), w);
            const double rhs = -l2_inner(v, lie_derivative(sig, w));
            worst = std::max(worst, std::abs(lhs - rhs) / (1.0 + std::abs(lhs)));
        }
        check("transport operator adjointness (max err " + g17(worst) + ")",
              worst <= 1e-9);
    }

    // Map inversion self-consistency.
    {
        VectorField delta = 0.08 * random_bandlimited(grid, 500, 2, 1.0);
        DiffeoMap m(delta);
        DiffeoMap inv = invert_map(m);
        DiffeoMap round = compose_maps(m, inv);
        const double err = round.max_displacement();
        check("map inversion round trip (max err " + g17(err) + ")", err <= 1e-8);
    }

    // Weber residual on a tiny zero-noise fixed-point run.
    {
        VectorField u0 = taylor_green(grid);
        NoiseBasis nil(grid, {});
        PicardConfig pc;
        pc.horizon = 0.05;
        pc.dt = 5e-3;
        pc.s = SobolevIndex(3.0);
        pc.tol_rel = 1e-6;
        BrownianPath path = sample_brownian(1, pc.horizon, 10, 7);
        PicardResult res = picard_solve(u0, nil, path, pc);
        FlowCache cache = build_flow_cache(nil, path, res.u.times());
        auto X = flow_composition(res.u, cache);
        const double wr = weber_residual(res.u.field(res.u.size() - 1), X.back(), res.u.field(0));
        const double bound = 5e-3 * l2_norm(u0);
        check("fixed point + Weber residual (" + g17(wr) + " <= " +
                  g17(bound) + ", " + std::to_string(res.report.total_iterations) +
                  " iterations)",
              res.report.converged && wr <= bound && res.report.total_iterations <= 5);
    }

    std::cout << (failures == 0 ? "selftest passed" : "selftest FAILED") << '\n';
    return failures == 0 ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"pseudo-spectral laboratory for incompressible flows with transport noise"};
    app.require_subcommand(1);

    CommonOpts lag, dir, conv, demo;
    auto* c_lag = app.add_subcommand("run-lagrangian", "velocity fixed point via flow maps");
    add_common(c_lag, lag);
    auto* c_dir = app.add_subcommand("run-direct", "direct pseudo-spectral reference solver");
    add_common(c_dir, dir);

    std::string cmp_a, cmp_b;
    double threshold = 5e-3;
    int cmp_threads = 1;
    auto* c_cmp = app.add_subcommand("compare", "compare two trajectory manifests");
    c_cmp->add_option("a", cmp_a, "first manifest (dir or manifest.json)")->required();
    c_cmp->add_option("b", cmp_b, "second manifest")->required();
    c_cmp->add_option("--threshold", threshold, "relative sup L2 pass threshold");
    c_cmp->add_option("--threads", cmp_threads, "worker threads")->check(CLI::PositiveNumber);

    int levels = 0;
    auto* c_conv = app.add_subcommand("convergence", "refinement study on one Brownian realization");
    add_common(c_conv, conv);
    c_conv->add_option("--levels", levels, "refinement levels")->required();

    auto* c_demo = app.add_subcommand("flow-demo", "integrate and report the noise flow alone");
    add_common(c_demo, demo);

    int st_threads = 1;
    bool inject_defect = false;
    auto* c_st = app.add_subcommand("selftest", "fast invariant suite");
    c_st->add_option("--threads", st_threads, "worker threads")->check(CLI::PositiveNumber);
    c_st->add_flag("--inject-defect", inject_defect)->group("");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    }

    try {
        if (app.got_subcommand(c_lag)) return cmd_run_lagrangian(lag);
        if (app.got_subcommand(c_dir)) return cmd_run_direct(dir);
        if (app.got_subcommand(c_cmp)) return cmd_compare(cmp_a, cmp_b, threshold, cmp_threads);
        if (app.got_subcommand(c_conv)) return cmd_convergence(conv, levels);
        if (app.got_subcommand(c_demo)) return cmd_flow_demo(demo);
        if (app.got_subcommand(c_st)) return cmd_selftest(st_threads, inject_defect);
    } catch (const nonconvergence_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    } catch (const invalid_argument_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const io_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
