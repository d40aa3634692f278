#include "doctest.h"

#include "models.hpp"
#include "tunnel/finsler.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <random>

using namespace tunnel;

namespace {

// Independent 1D distance: integral of arcosh(1 + V0/2) from the well.
double exact_distance_1d(double from, double to)
{
    auto f = [](double t) { return std::acosh(1.0 + (t * t - 1) * (t * t - 1) / 2.0); };
    return std::abs(boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, from, to, 15, 1e-14));
}

Grid line_grid(long n) { return Grid(Vec::Constant(1, -2.0), Vec::Constant(1, 2.0), {n}); }

}  // namespace

TEST_CASE("Finsler norm in 1D is arcosh of the potential")
{
    const auto cfg = double_well();
    for (double x : {-1.7, -0.5, 0.0, 0.3, 1.4}) {
        const double V = (x * x - 1) * (x * x - 1);
        const Vec X = Vec::Constant(1, x);
        CHECK(finsler_norm(cfg.model, X, Vec::Constant(1, 0.7)) == doctest::Approx(0.7 * std::acosh(1 + V / 2)).epsilon(1e-12));
        CHECK(finsler_norm(cfg.model, X, Vec::Constant(1, -0.7)) == doctest::Approx(0.7 * std::acosh(1 + V / 2)).epsilon(1e-12));
    }
    CHECK(finsler_norm(cfg.model, Vec::Constant(1, 1.0), Vec::Constant(1, 1.0)) == 0.0);
}

TEST_CASE("Finsler norm in 2D is a norm and matches the constraint")
{
    const auto cfg = load_config(config_path("product_2d.ini"));
    std::mt19937 rng(5);
    std::normal_distribution<double> g;
    for (int t = 0; t < 30; ++t) {
        Vec x(2), v(2), w(2);
        x << 1.5 * g(rng), 0.5 * g(rng);
        v << g(rng), g(rng);
        w << g(rng), g(rng);
        const double nv = finsler_norm(cfg.model, x, v);
        CHECK(finsler_norm(cfg.model, x, 2.5 * v) == doctest::Approx(2.5 * nv).epsilon(1e-10));
        CHECK(finsler_norm(cfg.model, x, v + w) <= nv + finsler_norm(cfg.model, x, w) + 1e-12);
        const Vec xi = finsler_dual(cfg.model, x, v);
        CHECK(kinetic(cfg.model, x, xi) == doctest::Approx(cfg.model.potential.leading(x)).epsilon(1e-10));
    }
}

TEST_CASE("unbounded Finsler norm is rejected")
{
    auto cfg = parse_config(R"(
[model]
dimension = 2
[hopping]
0,0 = 2
1,0 = -1
-1,0 = -1
[potential]
V0 = (x1^2-1)^2 + x2^2
wells = -1,0 | 1,0
[domain]
box_lo = -2,-1
box_hi = 2,1
epsilon = 1/10
Mj_lo = -2,-1
Mj_hi = 0.5,1
Mk_lo = -0.5,-1
Mk_hi = 2,1
)");
    Vec x(2), v(2);
    x << 0.0, 0.5;
    v << 0.0, 1.0;
    CHECK_THROWS_AS(finsler_norm(cfg.model, x, v), std::domain_error);
}

TEST_CASE("1D eikonal solution converges to the integral distance")
{
    const auto cfg = double_well();
    const Vec well = cfg.well_point_j();
    const Region band([](const Vec& x) { return x[0] < 0.5 && std::abs(x[0] + 1) > 0.1; }, "band");
    double prev_res = 0.0, prev_err = 0.0;
    for (long n : {1001L, 2001L, 4001L}) {
        const auto f = eikonal_solve(cfg.model, well, line_grid(n));
        double err = 0.0;
        for (double x : {-1.8, -1.3, -0.5, 0.0, 0.4}) err = std::max(err, std::abs(f.value(Vec::Constant(1, x)) - exact_distance_1d(-1, x)));
        const auto res = eikonal_residual(cfg.model, f, band);
        MESSAGE("n=" << n << " err=" << err << " residual=" << res.max_abs << " sweeps=" << f.sweeps);
        CHECK(err < 0.05);
        if (prev_res > 0) {
            CHECK(err < prev_err);
            CHECK(prev_res / res.max_abs >= 1.7);
        }
        prev_res = res.max_abs;
        prev_err = err;
    }
    CHECK(prev_res <= 5e-3);
}

TEST_CASE("Hamiltonian flow conserves energy and linearizes to the harmonic frequency")
{
    const auto cfg = double_well();
    const auto tr = hamiltonian_flow(cfg.model, Vec::Constant(1, 0.0), Vec::Constant(1, 0.0), 10.0);
    CHECK(tr.energy_drift < 1e-8);
    // Energy -1 orbit at rest on the barrier top stays bounded.
    for (const auto& x : tr.x) CHECK(std::abs(x[0]) < 2.0);
    const Mat J = flow_linearization(cfg.model, cfg.well_point_j(), Vec::Zero(1));
    Eigen::EigenSolver<Mat> es(J);
    std::vector<double> ev{es.eigenvalues()[0].real(), es.eigenvalues()[1].real()};
    std::sort(ev.begin(), ev.end());
    CHECK(ev[0] == doctest::Approx(-4.0).epsilon(1e-6));
    CHECK(ev[1] == doctest::Approx(4.0).epsilon(1e-6));
}

TEST_CASE("transverse Hessian recovers a quadratic form")
{
    Mat Q(3, 3);
    Q << 2, 0.5, 0, 0.5, 1, 0.2, 0, 0.2, 3;
    const Field f = [&](const Vec& y) { return 0.5 * y.dot(Q * y) + y.sum(); };
    const Mat H = transverse_hessian(f, Vec::Constant(3, 0.3), Mat::Identity(3, 3), 0.05);
    CHECK((H - Q).norm() < 1e-8);
    CHECK(transverse_hessian(f, Vec::Zero(3), Mat(3, 0), 0.1).size() == 0);
}

TEST_CASE("geodesic of the 1D double well")
{
    const auto cfg = double_well();
    const Grid grid = line_grid(2001);
    const auto dj = eikonal_solve(cfg.model, cfg.well_point_j(), grid);
    const auto dk = eikonal_solve(cfg.model, cfg.well_point_k(), grid);
    const auto geo = minimal_geodesic(cfg.model, dj, dk);
    const double S = exact_distance_1d(-1, 1);
    CHECK(geo.crossing[0] == doctest::Approx(0.0).scale(1.0).epsilon(1e-6));
    CHECK(geo.S == doctest::Approx(S).epsilon(2e-3));
    CHECK(geo.total_action == doctest::Approx(S).epsilon(2e-3));
    CHECK(geo.transversality == doctest::Approx(1.0));
    CHECK(geo.hessian.size() == 0);
    CHECK_FALSE(geo.manifold);
    CHECK(geo.path.front()[0] == doctest::Approx(-1.0));
    CHECK(geo.path.back()[0] == doctest::Approx(1.0));
}

TEST_CASE("strip model has a one-dimensional geodesic manifold")
{
    const auto cfg = load_config(config_path("strip_2d.ini"));
    const Grid grid(cfg.box_lo, cfg.box_hi, {161, 40}, cfg.model.periodic);
    const auto dj = eikonal_solve(cfg.model, cfg.well_point_j(), grid);
    const auto dk = eikonal_solve(cfg.model, cfg.well_point_k(), grid);
    // Distance depends on the first coordinate only.
    for (long i = 0; i < grid.size(); i += 37) {
        Vec x = grid.node(i);
        Vec x2 = x;
        x2[1] = 0.55;
        CHECK(std::abs(dj.value(x) - dj.value(x2)) < 1e-6);
    }
    const auto geo = minimal_geodesic(cfg.model, dj, dk);
    CHECK(geo.manifold);
    const auto gm = manifold_detect(dj, dk);
    CHECK(gm.dimension == 1);
    CHECK(gm.nodes.size() == 40);
    double length = 0.0;
    for (double w : gm.weights) length += w;
    CHECK(length == doctest::Approx(1.0));
    CHECK(gm.hessians.front().size() == 0);
    CHECK(gm.S == doctest::Approx(exact_distance_1d(-1, 1)).epsilon(5e-3));
}

TEST_CASE("product model has an isolated crossing point")
{
    const auto cfg = load_config(config_path("product_2d.ini"));
    const Grid grid(cfg.box_lo, cfg.box_hi, {161, 121});
    const auto dj = eikonal_solve(cfg.model, cfg.well_point_j(), grid);
    const auto dk = eikonal_solve(cfg.model, cfg.well_point_k(), grid);
    const auto geo = minimal_geodesic(cfg.model, dj, dk);
    CHECK_FALSE(geo.manifold);
    CHECK(std::abs(geo.crossing[1]) < 0.03);
    REQUIRE(geo.hessian.rows() == 1);
    CHECK(geo.hessian(0, 0) > 0.1);
    const auto gm = manifold_detect(dj, dk);
    CHECK(gm.dimension == 0);
    CHECK(geo.total_action == doctest::Approx(geo.S).epsilon(1e-2));
}
