#include "doctest.h"

#include "models.hpp"
#include "tunnel/operator.hpp"

#include <cmath>
#include <random>

using namespace tunnel;

namespace {

std::vector<Vec> samples_1d(double lo, double hi, int n)
{
    std::vector<Vec> s;
    for (int i = 0; i < n; ++i) s.push_back(Vec::Constant(1, lo + (hi - lo) * i / (n - 1)));
    return s;
}

double inner(const std::vector<double>& a, const std::vector<double>& b)
{
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

TEST_CASE("reference double well passes validation")
{
    const auto cfg = double_well();
    const auto rep = validate_model(cfg.model, samples_1d(-2, 2, 41), 0.1);
    INFO(rep.summary());
    CHECK(rep.ok());
}

TEST_CASE("one-sided hopping fails symmetry and zero sum")
{
    auto cfg = double_well();
    auto& terms = cfg.model.hopping.terms;
    const int minus = cfg.model.hopping.find({-1});
    REQUIRE(minus >= 0);
    terms[static_cast<size_t>(minus)].orders[0] = [](const Vec&) { return 0.0; };
    const auto rep = validate_model(cfg.model, samples_1d(-2, 2, 11), 0.1);
    CHECK_FALSE(rep.find("zero_sum")->passed);
    CHECK_FALSE(rep.find("hopping_symmetry")->passed);
    CHECK_FALSE(rep.ok());
}

TEST_CASE("hopping along one axis only fails the span condition")
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
    const auto rep = validate_model(cfg.model, {Vec::Zero(2), Vec::Ones(2)}, 0.1);
    CHECK_FALSE(rep.find("hopping_span")->passed);
    CHECK_FALSE(rep.find("kinetic_B_positive")->passed);
}

TEST_CASE("leading symbols of the nearest-neighbour model")
{
    const auto cfg = double_well();
    const Vec x = Vec::Constant(1, 0.3);
    for (double xi : {-3.0, -1.0, 0.0, 0.5, 2.5}) {
        CVec z = CVec::Constant(1, xi);
        CHECK(symbol_t0(cfg.model, x, z).real() == doctest::Approx(2 - 2 * std::cos(xi)));
        CHECK(std::abs(symbol_t(cfg.model, x, z, 0.1) - std::complex<double>(2 - 2 * std::cos(xi))) < 1e-14);
        CHECK(symbol_t0(cfg.model, x, z).real() == doctest::Approx(symbol_t0(cfg.model, x, -z).real()));
        const Vec p = Vec::Constant(1, xi);
        CHECK(kinetic(cfg.model, x, p) == doctest::Approx(2 * (std::cosh(xi) - 1)));
        CHECK(kinetic_grad(cfg.model, x, p)[0] == doctest::Approx(2 * std::sinh(xi)));
        CHECK(kinetic_hess(cfg.model, x, p)(0, 0) == doctest::Approx(2 * std::cosh(xi)));
        // Imaginary argument rotates the symbol into the kinetic function.
        CVec iz = CVec::Constant(1, std::complex<double>(0, xi));
        CHECK(-symbol_t0(cfg.model, x, iz).real() == doctest::Approx(kinetic(cfg.model, x, p)));
    }
    CHECK(kinetic_B(cfg.model, x)(0, 0) == doctest::Approx(1.0));
    CHECK(potential_hessian(cfg.model, Vec::Constant(1, 1.0))(0, 0) == doctest::Approx(8.0).epsilon(1e-8));
}

TEST_CASE("operator acts on plane waves by the symbol")
{
    auto cfg = double_well();
    cfg.model.potential.orders[0] = [](const Vec&) { return 0.0; };
    const int n = 64;
    const double eps = 2 * M_PI / n;
    LatticeDomain dom(eps, Vec::Constant(1, -M_PI), Vec::Constant(1, M_PI), {true});
    REQUIRE(dom.size() == n);
    for (int kappa : {1, 3, 7}) {
        std::vector<double> u(n);
        for (long i = 0; i < n; ++i) u[static_cast<size_t>(i)] = std::cos(kappa * dom.point(i)[0]);
        const auto Hu = apply_operator(cfg.model, dom, u);
        const double lam = 2 - 2 * std::cos(eps * kappa);
        for (long i = 0; i < n; ++i) CHECK(Hu[static_cast<size_t>(i)] == doctest::Approx(lam * u[static_cast<size_t>(i)]).epsilon(1e-12));
    }
}

TEST_CASE("assembled matrix matches operator application")
{
    const auto cfg = double_well();
    const auto dom = cfg.lattice(0.1);
    const Region M = cfg.region_j();
    const auto op = assemble(cfg.model, dom, M);
    CHECK(op.asymmetry == 0.0);
    CHECK(op.bandwidth == 1);
    std::mt19937 rng(3);
    std::normal_distribution<double> g;
    std::vector<double> u(static_cast<size_t>(dom.size()), 0.0);
    Vec ul(static_cast<Eigen::Index>(op.points.size()));
    for (size_t r = 0; r < op.points.size(); ++r) u[static_cast<size_t>(op.points[r])] = ul[static_cast<Eigen::Index>(r)] = g(rng);
    const auto Hu = apply_dirichlet(cfg.model, dom, M, u);
    const Vec Hl = op.H * ul;
    for (size_t r = 0; r < op.points.size(); ++r) CHECK(Hu[static_cast<size_t>(op.points[r])] == doctest::Approx(Hl[static_cast<Eigen::Index>(r)]));
    u[static_cast<size_t>(dom.size() - 1)] = 1.0;
    CHECK_THROWS(apply_dirichlet(cfg.model, dom, M, u));
}

TEST_CASE("symmetrized position-dependent hopping is self-adjoint and bounded below")
{
    const auto cfg = varying_hopping();
    {
        const auto rep = validate_model(cfg.model, samples_1d(-3, 3, 31), 0.1);
        INFO(rep.summary());
        CHECK(rep.ok());
    }
    auto kinetic_only = cfg.model;
    kinetic_only.potential.orders = {[](const Vec&) { return 0.0; }};
    double worst_c = 0.0;
    for (int n : {60, 120, 240}) {
        const double eps = 2 * M_PI / n;
        LatticeDomain dom(eps, Vec::Constant(1, -M_PI), Vec::Constant(1, M_PI), {true});
        std::mt19937 rng(n);
        std::normal_distribution<double> g;
        std::vector<double> u(static_cast<size_t>(n)), v(static_cast<size_t>(n));
        for (auto& a : u) a = g(rng);
        for (auto& a : v) a = g(rng);
        const auto Hu = apply_operator(cfg.model, dom, u);
        const auto Hv = apply_operator(cfg.model, dom, v);
        CHECK(std::abs(inner(u, Hv) - inner(Hu, v)) < 1e-11 * std::sqrt(inner(u, u) * inner(v, v)));

        const auto op = assemble(kinetic_only, dom, Region::everything());
        Eigen::SelfAdjointEigenSolver<Mat> es{Mat(op.H)};
        worst_c = std::max(worst_c, -es.eigenvalues()[0] / eps);
    }
    CHECK(worst_c < 1.0);
}

TEST_CASE("leading Hamiltonian is uniformly convex in the momentum")
{
    const auto cfg = varying_hopping();
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> ux(-3, 3), up(-2, 2);
    for (int t = 0; t < 50; ++t) {
        const Vec x = Vec::Constant(1, ux(rng));
        const Vec p = Vec::Constant(1, up(rng));
        CHECK(kinetic_hess(cfg.model, x, p)(0, 0) >= 1.0);
    }
}
