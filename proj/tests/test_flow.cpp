#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include <torusflow/torusflow.hpp>

using namespace torusflow;
using Catch::Approx;

namespace {

NoiseMode shear_mode() {
    NoiseMode m;
    m.kind = NoiseMode::Kind::trig_sin;
    m.wavevector = {0, 1, 0};
    return m;
}

NoiseMode constant_mode(double cx, double cy) {
    NoiseMode m;
    m.kind = NoiseMode::Kind::constant;
    m.constant = {cx, cy, 0.0};
    return m;
}

DiffeoMap translation(const TorusGrid& grid, double cx, double cy) {
    VectorField disp(grid);
    for (std::size_t p = 0; p < disp.num_points(); ++p) {
        disp.comp(0)[p] = cx;
        disp.comp(1)[p] = cy;
    }
    return DiffeoMap(disp);
}

} // namespace

TEST_CASE("constant basis translates exactly, empty basis is the identity") {
    TorusGrid grid(2, 32);
    BrownianPath path = sample_brownian(1, 1.0, 40, 21);

    NoiseBasis cb(grid, {constant_mode(1.0, -0.5)});
    const double t = path.times[25];
    DiffeoMap phi = solve_noise_flow(cb, path, t);
    const double w = path.value(25, 0);
    for (std::size_t p = 0; p < grid.num_points(); ++p) {
        REQUIRE(phi.displacement().comp(0)[p] == Approx(1.0 * w).margin(1e-13));
        REQUIRE(phi.displacement().comp(1)[p] == Approx(-0.5 * w).margin(1e-13));
    }
    MatrixField I = MatrixField::identity(grid);
    REQUIRE((phi.jacobian() - I).max_abs() < 1e-12);

    NoiseBasis nil(grid, {});
    DiffeoMap ident = solve_noise_flow(nil, path, t);
    REQUIRE(ident.max_displacement() == 0.0);
}

TEST_CASE("shear flow matches the closed form including Jacobians") {
    TorusGrid grid(2, 64);
    BrownianPath path = sample_brownian(1, 0.5, 100, 3);
    NoiseBasis basis(grid, {shear_mode()});
    const int i = 100;
    const double w = path.value(i, 0);
    DiffeoMap phi = solve_noise_flow(basis, path, path.times[i]);

    // x2 never moves, so the Heun steps telescope to sin(x2) * W(t) exactly.
    double worst = 0.0;
    for (std::size_t p = 0; p < grid.num_points(); ++p) {
        const auto x = grid.point(p);
        worst = std::max(worst,
                         std::abs(phi.displacement().comp(0)[p] - std::sin(x[1]) * w));
        worst = std::max(worst, std::abs(phi.displacement().comp(1)[p]));
    }
    REQUIRE(worst < 1e-12);

    // grad phi = [[1, W cos x2], [0, 1]], K its inverse.
    MatrixField K = inverse_jacobian(phi);
    double jerr = 0.0;
    for (std::size_t p = 0; p < grid.num_points(); ++p) {
        const auto x = grid.point(p);
        jerr = std::max(jerr, std::abs(phi.jacobian().entry(0, 0)[p] - 1.0));
        jerr = std::max(jerr, std::abs(phi.jacobian().entry(0, 1)[p] - w * std::cos(x[1])));
        jerr = std::max(jerr, std::abs(phi.jacobian().entry(1, 0)[p]));
        jerr = std::max(jerr, std::abs(phi.jacobian().entry(1, 1)[p] - 1.0));
        jerr = std::max(jerr, std::abs(K.entry(0, 1)[p] + w * std::cos(x[1])));
    }
    REQUIRE(jerr < 1e-10);

    // Orientation is preserved.
    ScalarField det = jacobian_determinant(phi);
    for (std::size_t p = 0; p < det.num_points(); ++p) REQUIRE(det[p] > 0.0);

    // Inverse in closed form: (y1 - sin(y2) W, y2).
    DiffeoMap inv = invert_map(phi);
    double ierr = 0.0;
    for (std::size_t p = 0; p < grid.num_points(); ++p) {
        const auto x = grid.point(p);
        ierr = std::max(ierr, std::abs(inv.displacement().comp(0)[p] + std::sin(x[1]) * w));
        ierr = std::max(ierr, std::abs(inv.displacement().comp(1)[p]));
    }
    REQUIRE(ierr < 1e-10);
}

TEST_CASE("map inversion: identity, translations, random smooth maps") {
    TorusGrid grid(2, 32);
    DiffeoMap ident(grid);
    REQUIRE(invert_map(ident).max_displacement() == 0.0);

    DiffeoMap tr = translation(grid, 0.7, -1.1);
    DiffeoMap itr = invert_map(tr);
    for (std::size_t p = 0; p < grid.num_points(); ++p) {
        REQUIRE(itr.displacement().comp(0)[p] == Approx(-0.7).margin(1e-12));
        REQUIRE(itr.displacement().comp(1)[p] == Approx(1.1).margin(1e-12));
    }

    for (int r = 0; r < 3; ++r) {
        DiffeoMap m(0.15 * random_bandlimited(grid, 600 + r, 2, 1.0));
        DiffeoMap round = compose_maps(m, invert_map(m));
        REQUIRE(round.max_displacement() <= 1e-8);
    }
}

TEST_CASE("pull-back closed forms") {
    TorusGrid grid(2, 64);
    VectorField u = VectorField::from_function(grid, [](const std::array<double, 3>& x) {
        return std::array<double, 3>{0.0, std::cos(x[0]), 0.0};
    });

    DiffeoMap ident(grid);
    REQUIRE((pull_back_velocity(u, ident, InterpMethod::fourier) - u).max_abs() < 1e-12);

    DiffeoMap tr = translation(grid, 1.0, 0.0);
    VectorField want = VectorField::from_function(grid, [](const std::array<double, 3>& x) {
        return std::array<double, 3>{0.0, std::cos(x[0] + 1.0), 0.0};
    });
    REQUIRE((pull_back_velocity(u, tr, InterpMethod::fourier) - want).max_abs() < 1e-11);

    // Shear map at Brownian value w: utilde = K (u o phi).
    BrownianPath path = sample_brownian(1, 0.5, 100, 3);
    NoiseBasis basis(grid, {shear_mode()});
    DiffeoMap phi = solve_noise_flow(basis, path, 0.5);
    const double w = path.value(100, 0);
    VectorField ut = pull_back_velocity(u, phi, InterpMethod::fourier);
    double worst = 0.0;
    for (std::size_t p = 0; p < grid.num_points(); ++p) {
        const auto x = grid.point(p);
        const double inner = std::cos(x[0] + std::sin(x[1]) * w);
        worst = std::max(worst, std::abs(ut.comp(0)[p] + w * std::cos(x[1]) * inner));
        worst = std::max(worst, std::abs(ut.comp(1)[p] - inner));
    }
    REQUIRE(worst < 1e-9);
}

TEST_CASE("map composition basics") {
    TorusGrid grid(2, 32);
    DiffeoMap ident(grid);
    DiffeoMap m(0.2 * random_bandlimited(grid, 77, 2, 1.0));
    REQUIRE((compose_maps(ident, m).displacement() - m.displacement()).max_abs() < 1e-10);
    REQUIRE((compose_maps(m, ident).displacement() - m.displacement()).max_abs() < 1e-10);

    DiffeoMap t1 = translation(grid, 0.3, 0.4), t2 = translation(grid, 1.0, -0.9);
    DiffeoMap t12 = compose_maps(t1, t2);
    for (std::size_t p = 0; p < grid.num_points(); ++p) {
        REQUIRE(t12.displacement().comp(0)[p] == Approx(1.3).margin(1e-11));
        REQUIRE(t12.displacement().comp(1)[p] == Approx(-0.5).margin(1e-11));
    }
}

TEST_CASE("volume preservation along a multi-mode flow") {
    TorusGrid grid(2, 32);
    std::vector<NoiseMode> modes{shear_mode()};
    NoiseMode m2;
    m2.kind = NoiseMode::Kind::trig_cos;
    m2.wavevector = {1, 0, 0};
    m2.amplitude = 0.5;
    modes.push_back(m2);
    NoiseBasis basis(grid, modes);
    const double T = 0.5, dt = T / 100;
    BrownianPath path = sample_brownian(basis.num_components(), T, 100, 17);
    std::vector<double> times;
    for (int i = 0; i <= 100; ++i) times.push_back(path.times[i]);
    auto maps = solve_noise_flow_trajectory(basis, path, times);
    for (const auto& phi : maps) {
        ScalarField det = jacobian_determinant(phi);
        double mean = 0.0;
        for (std::size_t p = 0; p < det.num_points(); ++p) mean += std::abs(det[p] - 1.0);
        mean /= static_cast<double>(det.num_points());
        REQUIRE(mean <= 5.0 * dt);
    }
}

TEST_CASE("continuing a flow equals solving in one go") {
    TorusGrid grid(2, 32);
    NoiseBasis basis(grid, {shear_mode(), constant_mode(0.4, 0.0)});
    BrownianPath path = sample_brownian(basis.num_components(), 1.0, 64, 4);
    DiffeoMap half = solve_noise_flow(basis, path, 0.5);
    DiffeoMap cont = continue_noise_flow(half, basis, path, 0.5, 1.0);
    DiffeoMap full = solve_noise_flow(basis, path, 1.0);
    REQUIRE((cont.displacement() - full.displacement()).max_abs() == 0.0);
}

TEST_CASE("time outside the path mesh is rejected") {
    TorusGrid grid(2, 32);
    NoiseBasis basis(grid, {shear_mode()});
    BrownianPath path = sample_brownian(1, 1.0, 16, 8);
    REQUIRE_THROWS_AS(solve_noise_flow(basis, path, 2.0), invalid_argument_error);
    REQUIRE_THROWS_AS(solve_noise_flow(basis, path, 0.03), invalid_argument_error);
}

TEST_CASE("pathwise Heun convergence") {
    TorusGrid grid(2, 32);
    const double T = 0.25;

    SECTION("single shear mode integrates exactly at every refinement") {
        NoiseBasis basis(grid, {shear_mode()});
        BrownianPath p0 = sample_brownian(1, T, 32, 12);
        for (int l = 0; l < 3; ++l) {
            DiffeoMap phi = solve_noise_flow(basis, p0, T);
            double worst = 0.0;
            const double w = p0.value(p0.steps(), 0);
            for (std::size_t p = 0; p < grid.num_points(); ++p) {
                const auto x = grid.point(p);
                worst = std::max(
                    worst, std::abs(phi.displacement().comp(0)[p] - std::sin(x[1]) * w));
            }
            REQUIRE(worst <= 1e-12);
            p0 = refine(p0, 2);
        }
    }

    SECTION("two modes on one Brownian component: strong order about one") {
        NoiseMode a = shear_mode();
        a.component = 0;
        NoiseMode b;
        b.kind = NoiseMode::Kind::trig_cos;
        b.wavevector = {1, 0, 0};
        b.component = 0;
        NoiseBasis basis(grid, {a, b});
        BrownianPath path = sample_brownian(1, T, 8, 31);
        std::vector<BrownianPath> levels{path};
        for (int l = 1; l < 6; ++l) levels.push_back(refine(levels.back(), 2));
        std::vector<VectorField> disp;
        for (const auto& p : levels)
            disp.push_back(solve_noise_flow(basis, p, T).displacement());
        std::vector<double> errs;
        for (int l = 0; l + 1 < static_cast<int>(levels.size()); ++l)
            errs.push_back((disp[l] - disp.back()).max_abs());
        double order = 0.0;
        for (std::size_t l = 0; l + 1 < errs.size(); ++l)
            order += std::log2(errs[l] / errs[l + 1]);
        order /= static_cast<double>(errs.size() - 1);
        INFO("errors: " << errs[0] << " .. " << errs.back() << ", order " << order);
        REQUIRE(order >= 0.9);
    }

    SECTION("two independent components: Cauchy rate at least one half") {
        NoiseMode a = shear_mode();
        NoiseMode b;
        b.kind = NoiseMode::Kind::trig_cos;
        b.wavevector = {1, 0, 0};
        NoiseBasis basis(grid, {a, b});
        BrownianPath path = sample_brownian(2, T, 8, 77);
        std::vector<BrownianPath> levels{path};
        for (int l = 1; l < 7; ++l) levels.push_back(refine(levels.back(), 2));
        std::vector<VectorField> disp;
        for (const auto& p : levels)
            disp.push_back(solve_noise_flow(basis, p, T).displacement());
        std::vector<double> errs;
        for (int l = 0; l + 1 < static_cast<int>(levels.size()); ++l)
            errs.push_back(l2_norm(disp[l] - disp.back()));
        // Least-squares slope of log2(err) vs level.
        const int m = static_cast<int>(errs.size());
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (int l = 0; l < m; ++l) {
            sx += l;
            sy += std::log2(errs[l]);
            sxx += static_cast<double>(l) * l;
            sxy += l * std::log2(errs[l]);
        }
        const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
        INFO("errors: " << errs[0] << " .. " << errs.back() << ", rate " << -slope);
        REQUIRE(-slope >= 0.45);
    }
}
