#include "doctest.h"

#include "models.hpp"
#include "tunnel/spectral.hpp"

#include <cmath>

using namespace tunnel;

TEST_CASE("free tridiagonal chain reproduces the sine spectrum in binary128")
{
    auto cfg = double_well();
    cfg.model.potential.orders[0] = [](const Vec&) { return 0.0; };
    const int N = 39;
    LatticeDomain dom(0.1, Vec::Constant(1, 0.1), Vec::Constant(1, 3.9));
    REQUIRE(dom.size() == N);
    const auto eig = dirichlet_eigs(cfg.model, dom, Region::everything(), 5);
    for (int k = 0; k < 5; ++k) {
        const quad exact = 2 - 2 * boost::multiprecision::cos(quad(k + 1) * boost::multiprecision::acos(quad(-1)) / (N + 1));
        CHECK(static_cast<double>(abs(eig[k].value - exact)) < 1e-30);
        CHECK(eig[k].residual < 1e-28);
        // Sine eigenvector, normalized, positive at the anchor-free maximum.
        const double norm = std::sqrt(2.0 / (N + 1));
        double sign = eig[k].vector[0] > 0 ? 1.0 : -1.0;
        for (int i = 0; i < N; ++i)
            CHECK(eig[k].vector[static_cast<size_t>(i)] ==
                  doctest::Approx(sign * norm * std::sin((k + 1) * (i + 1) * M_PI / (N + 1))).epsilon(1e-9));
    }
}

TEST_CASE("band solver agrees with dense diagonalization in two dimensions")
{
    const auto cfg = load_config(config_path("product_2d.ini"));
    const auto dom = cfg.lattice(1.0 / 6);
    const auto op = assemble(cfg.model, dom, cfg.region_j());
    const auto dense = dense_eigenpairs(op, dom, 4);
    for (auto prec : {Precision::binary64, Precision::binary128}) {
        EigenOptions opt;
        opt.precision = prec;
        const auto band = lowest_eigenpairs(op, dom, 4, opt, std::nullopt, "j");
        for (int k = 0; k < 4; ++k) {
            CHECK(static_cast<double>(band[k].value) == doctest::Approx(static_cast<double>(dense[k].value)).epsilon(1e-11));
            double overlap = 0.0;
            for (size_t i = 0; i < band[k].vector.size(); ++i) overlap += band[k].vector[i] * dense[k].vector[i];
            CHECK(std::abs(overlap) == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("single-well ground state approaches the harmonic level")
{
    const auto cfg = double_well();
    const Vec well = cfg.well_point_j();
    double prev = 1e9;
    for (double eps : {0.1, 0.05, 0.025}) {
        const auto h = harmonic_levels(cfg.model, well, eps, 3);
        CHECK(h.frequencies[0] == doctest::Approx(4.0).epsilon(1e-8));
        CHECK(h.levels[0] == doctest::Approx(2 * eps));
        CHECK(h.levels[1] == doctest::Approx(6 * eps));
        const auto eig = dirichlet_eigs(cfg.model, cfg.lattice(eps), cfg.region_j(), 2, {}, well);
        const double dev = std::abs(static_cast<double>(eig[0].value) - h.levels[0]) / eps;
        CHECK(dev < prev);
        prev = dev;
        // Ground state positive at the well.
        CHECK(eig[0].vector[static_cast<size_t>(cfg.lattice(eps).nearest(well))] > 0);
    }
    CHECK(prev < 0.05);
}

TEST_CASE("full double well resolves the tunnelling pair")
{
    const auto cfg = double_well();
    const double eps = 1.0 / 40;
    const auto dom = cfg.lattice(eps);
    const auto eig = dirichlet_eigs(cfg.model, dom, Region::everything(), 2, {}, cfg.well_point_j());
    const quad split = eig[1].value - eig[0].value;
    CHECK(split > 0);
    CHECK(static_cast<double>(split) < 1e-18);
    CHECK(static_cast<double>(split) > 1e-26);
    double overlap = 0.0;
    for (size_t i = 0; i < eig[0].vector.size(); ++i) overlap += eig[0].vector[i] * eig[1].vector[i];
    CHECK(std::abs(overlap) < 1e-12);
    // Even ground state, odd excited state under the mirror i -> n-1-i.
    const size_t n = eig[0].vector.size();
    for (size_t i = 0; i < n; i += 7) {
        CHECK(eig[0].vector[i] == doctest::Approx(eig[0].vector[n - 1 - i]).epsilon(1e-9).scale(1e-30));
        CHECK(eig[1].vector[i] == doctest::Approx(-eig[1].vector[n - 1 - i]).epsilon(1e-9).scale(1e-30));
    }
}

TEST_CASE("interval selection picks one eigenvalue per well")
{
    const auto cfg = double_well();
    const double eps = 1.0 / 16;
    const auto dom = cfg.lattice(eps);
    const auto si = select_interval(cfg.model, dom, {cfg.region_j(), cfg.region_k()},
                                    {cfg.well_point_j(), cfg.well_point_k()}, 0);
    REQUIRE(si.selected.size() == 2);
    CHECK(si.well_mismatch < 1e-25);
    CHECK(si.gap_margin > 0.5 * eps);
    CHECK(static_cast<double>(si.selected[0].value) == doctest::Approx(2 * eps).epsilon(0.05));
    // Regions that contain the other well are rejected.
    CHECK_THROWS(select_interval(cfg.model, dom, {Region::everything(), cfg.region_k()},
                                 {cfg.well_point_j(), cfg.well_point_k()}, 0));
}

TEST_CASE("binary128 Jacobi matches the closed form for 2x2")
{
    const quad a = 0.25, b = 0.25 + quad(1e-20), c = quad(3e-22);
    const auto ev = small_symmetric_eigenvalues({{a, c}, {c, b}});
    const quad mid = (a + b) / 2, rad = boost::multiprecision::sqrt((b - a) * (b - a) / 4 + c * c);
    CHECK(static_cast<double>(abs(ev[0] - (mid - rad))) < 1e-32);
    CHECK(static_cast<double>(abs(ev[1] - (mid + rad))) < 1e-32);
}
