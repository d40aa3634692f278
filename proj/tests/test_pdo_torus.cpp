#include "doctest.h"

#include "models.hpp"
#include "tunnel/finsler.hpp"
#include "tunnel/operator.hpp"
#include "tunnel/pdo_torus.hpp"

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <numbers>
#include <random>

using namespace tunnel;

namespace {

constexpr double pi = std::numbers::pi;

CVec random_field(long n, std::mt19937& rng)
{
    std::normal_distribution<double> g;
    CVec u(n);
    for (long i = 0; i < n; ++i) u[i] = Complex(g(rng), g(rng));
    return u;
}

Vec v1(double x) { return Vec::Constant(1, x); }

LatticeDomain line(double eps, double lo, double hi) { return LatticeDomain(eps, v1(lo), v1(hi)); }

// Random x-dependent two-variable symbol with a few modes in 2D.
PeriodicSymbol random_symbol_2d(std::mt19937& rng, PeriodicSymbol::Kind kind)
{
    std::uniform_real_distribution<double> U(-1, 1);
    PeriodicSymbol q(2, kind);
    for (const auto& eta : std::vector<std::vector<int>>{{0, 0}, {1, 0}, {-1, 1}, {0, -2}}) {
        const double a = U(rng), b = U(rng), c = U(rng), f = U(rng);
        q.add(eta, [=](const Vec& x, const Vec& y) {
            return Complex(a + b * std::cos(x[0] - 0.5 * y[1]), c * std::sin(x[1] + y[0]) + f);
        });
    }
    return q;
}

}  // namespace

TEST_CASE("kinetic symbol quantizes to the lattice hopping operator")
{
    std::mt19937 rng(11);
    for (const auto& cfg : {double_well(), varying_hopping()}) {
        for (int rep = 0; rep < 20; ++rep) {
            const double eps = 1.0 / (8 + rep);
            const auto dom = line(eps, -2, 2);
            std::normal_distribution<double> g;
            std::vector<double> u(static_cast<size_t>(dom.size()));
            for (auto& v : u) v = g(rng);
            const auto Hu = apply_operator(cfg.model, dom, u);
            CVec cu(dom.size());
            for (long i = 0; i < dom.size(); ++i) cu[i] = u[static_cast<size_t>(i)];
            const CVec Tu = quantize(PeriodicSymbol::kinetic(cfg.model, eps), 0.0, dom, cu);
            double worst = 0.0;
            for (long i = 0; i < dom.size(); ++i) {
                const double V = cfg.model.potential.value(dom.point(i), eps);
                worst = std::max(worst, std::abs(Tu[i] - (Hu[static_cast<size_t>(i)] - V * u[static_cast<size_t>(i)])));
            }
            CHECK(worst <= 1e-12);
        }
    }
}

TEST_CASE("constant and single-mode symbols")
{
    std::mt19937 rng(3);
    const LatticeDomain dom(0.1, Vec::Constant(2, -1.0), Vec::Constant(2, 1.0));
    const CVec u = random_field(dom.size(), rng);
    CHECK((quantize(PeriodicSymbol::constant(2, 1.0), 0.3, dom, u) - u).norm() == 0.0);
    const CVec s = quantize(PeriodicSymbol::mode(2, {1, 0}), 0.0, dom, u);
    for (long i = 0; i < dom.size(); ++i) {
        const long j = dom.shift(i, {1, 0});
        CHECK(s[i] == (j < 0 ? Complex(0.0) : u[j]));
    }
}

TEST_CASE("t-quantization adjoint identity")
{
    std::mt19937 rng(5);
    const LatticeDomain dom(0.125, Vec::Constant(2, -1.0), Vec::Constant(2, 1.0));
    for (int rep = 0; rep < 20; ++rep) {
        const auto q = random_symbol_2d(rng, PeriodicSymbol::Kind::one_variable);
        const CVec u = random_field(dom.size(), rng), v = random_field(dom.size(), rng);
        const Complex lhs = u.dot(quantize(q, 0.0, dom, v));  // dot conjugates the first argument
        const Complex rhs = quantize(q.adjoint(), 1.0, dom, u).dot(v);
        CHECK(std::abs(lhs - rhs) <= 1e-12 * (1.0 + std::abs(lhs)));
    }
}

TEST_CASE("operator norm stays bounded over the epsilon sweep")
{
    std::mt19937 rng(8);
    const auto q = random_symbol_2d(rng, PeriodicSymbol::Kind::one_variable);
    // Each mode has modulus at most |a| + |b| + |c| + |f| <= 4, so the norm is at most 16.
    for (double eps : {0.25, 0.125, 0.0625}) {
        const LatticeDomain dom(eps, Vec::Constant(2, -1.0), Vec::Constant(2, 1.0));
        CVec u = random_field(dom.size(), rng);
        double norm = 0.0;
        for (int it = 0; it < 60; ++it) {
            const CVec w = quantize(q.adjoint(), 1.0, dom, quantize(q, 0.0, dom, u.normalized()));
            norm = std::sqrt(w.norm());
            u = w;
        }
        CHECK(norm <= 16.0);
    }
}

TEST_CASE("restriction of the continuum quantization")
{
    const auto cfg = varying_hopping();
    for (double eps : {0.1, 0.05, 0.02}) {
        const auto dom = line(eps, -2, 2);
        const PlaneWaves cosine{{0.5, 0.5}, {v1(1 / eps), v1(-1 / eps)}};
        CHECK(restriction_check(PeriodicSymbol::kinetic(cfg.model, eps), cosine, dom) <= 1e-10);
        const PlaneWaves mixed{{1.0, Complex(0.3, -0.2)}, {v1(0.7 / eps), v1(2.9)}};
        CHECK(restriction_check(PeriodicSymbol::kinetic(cfg.model, eps), mixed, dom) <= 1e-10);
        CHECK(restriction_check(PeriodicSymbol::constant(1, 1.0), mixed, dom) == 0.0);
        CHECK(restriction_check(PeriodicSymbol::kinetic(cfg.model, eps), PlaneWaves{}, dom) == 0.0);
    }
    CHECK_THROWS(restriction_check(PeriodicSymbol(1, PeriodicSymbol::Kind::two_variable), PlaneWaves{}, line(0.1, 0, 1)));
}

TEST_CASE("quantization conversion of a single mode")
{
    const double t = 0.3;
    const int eta = 2;
    PeriodicSymbol a(1, PeriodicSymbol::Kind::two_variable);
    a.add({eta}, [](const Vec&, const Vec& y) { return Complex(std::sin(y[0])); });
    const auto conv = convert_quantization(a, t, 3, 0.1);
    for (double x : {-0.8, 0.1, 1.3}) {
        const Vec X = v1(x);
        // Hand derivatives of sin(x - (1 - t) s eta): leading sin x, then (1 - t) eta cos x, then -((1 - t) eta)^2 sin x / 2.
        const double k = (1 - t) * eta;
        CHECK(std::abs(conv.terms[0].modes()[0].coefficient(X, X) - std::sin(x)) < 1e-12);
        CHECK(std::abs(conv.terms[1].modes()[0].coefficient(X, X) - k * std::cos(x)) < 1e-10);
        CHECK(std::abs(conv.terms[2].modes()[0].coefficient(X, X) + 0.5 * k * k * std::sin(x)) < 1e-9);
    }
    CHECK_THROWS(convert_quantization(a, t, max_conversion_terms + 1, 0.1));
}

TEST_CASE("quantization conversion is exact at the operator level")
{
    std::mt19937 rng(21);
    for (int rep = 0; rep < 20; ++rep) {
        const double t = std::uniform_real_distribution<double>(0, 1)(rng);
        const auto a = random_symbol_2d(rng, PeriodicSymbol::Kind::two_variable);
        const LatticeDomain dom(0.1, Vec::Constant(2, -1.0), Vec::Constant(2, 1.0));
        const CVec u = random_field(dom.size(), rng);
        const auto conv = convert_quantization(a, t, 1, dom.eps());
        CHECK((quantize(a, 0.0, dom, u) - quantize(conv.exact, t, dom, u)).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("y-independent symbols convert without corrections")
{
    PeriodicSymbol a(1, PeriodicSymbol::Kind::two_variable);
    a.add({1}, [](const Vec& x, const Vec&) { return Complex(std::exp(x[0])); });
    a.add({-1}, [](const Vec& x, const Vec&) { return Complex(std::cos(x[0]), 0.5); });
    const auto conv = convert_quantization(a, 0.0, 3, 0.1);
    for (double x : {-1.0, 0.2, 0.9})
        for (const auto& md : conv.terms[1].modes()) CHECK(std::abs(md.coefficient(v1(x), v1(x))) < 1e-12);
}

TEST_CASE("expansion through second order leaves a third-order remainder")
{
    PeriodicSymbol a(1, PeriodicSymbol::Kind::two_variable);
    a.add({1}, [](const Vec& x, const Vec& y) { return Complex(std::exp(0.5 * y[0]) * std::cos(x[0]), std::sin(y[0])); });
    a.add({-2}, [](const Vec& x, const Vec& y) { return Complex(1.0 / (2.0 + std::sin(x[0] + 2 * y[0]))); });
    const double t = 0.4;
    std::vector<double> le, lr;
    for (double eps : {0.1, 0.05, 0.025, 0.0125}) {
        const auto conv = convert_quantization(a, t, 3, eps);
        const auto expansion = conv.expansion(eps);
        double worst = 0.0;
        for (double x = -1.0; x <= 1.0; x += 0.1)
            for (double xi : {0.0, 0.7, 2.0}) {
                CVec Xi(1);
                Xi << xi;
                worst = std::max(worst, std::abs(conv.exact(v1(x), Xi) - expansion(v1(x), Xi)));
            }
        le.push_back(std::log(eps));
        lr.push_back(std::log(worst));
    }
    const double slope = (lr.back() - lr.front()) / (le.back() - le.front());
    MESSAGE("remainder slope " << slope);
    CHECK(slope == doctest::Approx(3.0).epsilon(0.05));
}

TEST_CASE("conjugation by a linear weight scales each mode")
{
    const Vec g = (Vec(2) << 0.7, -1.3).finished();
    const Weight psi{[g](const Vec& x) { return g.dot(x); }, [g](const Vec&) { return g; }, true};
    std::mt19937 rng(4);
    const auto q = random_symbol_2d(rng, PeriodicSymbol::Kind::two_variable);
    const auto qh = conjugate_weight(q, psi);
    const Vec x = (Vec(2) << 0.2, -0.4).finished();
    for (size_t k = 0; k < q.modes().size(); ++k) {
        const auto& eta = q.modes()[k].eta;
        const Vec y = x + 0.1 * Vec((Vec(2) << eta[0], eta[1]).finished());
        const Complex expect = q.modes()[k].coefficient(x, y) * std::exp(-(eta[0] * g[0] + eta[1] * g[1]));
        CHECK(std::abs(qh.modes()[k].coefficient(x, y) - expect) < 1e-13);
    }
    const Weight zero{[](const Vec&) { return 0.0; }, [](const Vec& x) { return Vec(Vec::Zero(x.size())); }, true};
    const auto q0 = conjugate_weight(q, zero);
    for (size_t k = 0; k < q.modes().size(); ++k)
        CHECK(q0.modes()[k].coefficient(x, x) == q.modes()[k].coefficient(x, x));
}

TEST_CASE("conjugation identity holds at the operator level")
{
    std::mt19937 rng(17);
    const LatticeDomain dom(0.1, Vec::Constant(2, -1.0), Vec::Constant(2, 1.0));
    const Mat A = (Mat(2, 2) << 1.2, 0.3, 0.3, 0.8).finished();
    const Weight quad{[A](const Vec& x) { return 0.5 * x.dot(A * x); }, [A](const Vec& x) { return Vec(A * x); }, true};
    for (int rep = 0; rep < 20; ++rep) {
        const auto q = random_symbol_2d(rng, PeriodicSymbol::Kind::two_variable);
        const CVec u = random_field(dom.size(), rng);
        CVec weighted(dom.size());
        for (long i = 0; i < dom.size(); ++i) weighted[i] = std::exp(-quad.value(dom.point(i)) / dom.eps()) * u[i];
        CVec lhs = quantize(q, 0.0, dom, weighted);
        for (long i = 0; i < dom.size(); ++i) lhs[i] *= std::exp(quad.value(dom.point(i)) / dom.eps());
        const CVec rhs = quantize(conjugate_weight(q, quad), 0.0, dom, u);
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-10 * (1.0 + rhs.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("conjugation by a smooth interpolant of the distance field")
{
    const auto cfg = double_well();
    const auto f = eikonal_solve(cfg.model, cfg.well_point_j(), Grid(v1(-2), v1(2), {401}));
    const double h = f.grid.spacing(0);
    const boost::math::interpolators::cardinal_cubic_b_spline<double> spline(f.values.begin(), f.values.end(), -2.0, h);
    const Weight psi{[&](const Vec& x) { return spline(x[0]); }, [&](const Vec& x) { return v1(spline.prime(x[0])); }, false};
    const double eps = 0.05;
    const auto dom = line(eps, -1.5, 0.5);
    const auto q = PeriodicSymbol::kinetic(cfg.model, eps);
    std::mt19937 rng(2);
    const CVec u = random_field(dom.size(), rng);
    CVec weighted(dom.size());
    for (long i = 0; i < dom.size(); ++i) weighted[i] = std::exp(-psi.value(dom.point(i)) / eps) * u[i];
    CVec lhs = quantize(q, 0.0, dom, weighted);
    for (long i = 0; i < dom.size(); ++i) lhs[i] *= std::exp(psi.value(dom.point(i)) / eps);
    const CVec rhs = quantize(conjugate_weight(q, psi), 0.0, dom, u);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-10 * (1.0 + rhs.cwiseAbs().maxCoeff()));

    // The leading reduction differs from the exact symbol on the diagonal by O(eps).
    const auto lead = conjugate_leading(q, psi);
    const auto full = conjugate_weight(q, psi);
    double worst = 0.0;
    for (double x = -1.4; x <= 0.4; x += 0.1) {
        for (size_t k = 0; k < q.modes().size(); ++k) {
            const Vec X = v1(x), Y = v1(x + eps * q.modes()[k].eta[0]);
            worst = std::max(worst, std::abs(full.modes()[k].coefficient(X, Y) - lead.modes()[k].coefficient(X, X)));
        }
    }
    CHECK(worst < 20 * eps);
    CHECK(worst > 0.0);
}

TEST_CASE("Gaussian window integrates to one over its center")
{
    using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
    for (double eps : {0.1, 0.02})
        for (double C0 : {0.5, 3.0}) {
            const double total = GK::integrate([&](double s) { return GaussianWindow{s, C0, eps}(0.37); },
                                               -std::numeric_limits<double>::infinity(),
                                               std::numeric_limits<double>::infinity(), 15, 1e-14);
            CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
        }
}

TEST_CASE("window commutator two ways")
{
    std::mt19937 rng(9);
    const auto cfg = load_config(config_path("product_2d.ini"));
    SUBCASE("random functions on 64 points")
    {
        for (int rep = 0; rep < 20; ++rep) {
            const LatticeDomain dom(0.125, Vec::Constant(2, 0.0), Vec::Constant(2, 0.875));
            REQUIRE(dom.size() == 64);
            const CVec u = random_field(dom.size(), rng);
            const GaussianWindow w{std::uniform_real_distribution<double>(0, 1)(rng), 0.5 + rep * 0.1, dom.eps()};
            const auto r = window_commutator(cfg.model, w, dom, u);
            CHECK(r.deviation <= 1e-10 * (1.0 + r.direct.cwiseAbs().maxCoeff()));
        }
    }
    SUBCASE("window far from the support")
    {
        const LatticeDomain dom(0.1, Vec::Constant(2, -1.0), Vec::Constant(2, 1.0));
        const CVec u = random_field(dom.size(), rng);
        const auto r = window_commutator(cfg.model, GaussianWindow{25.0, 1.0, 0.1}, dom, u);
        CHECK(r.formula.cwiseAbs().maxCoeff() <= 1e-12 * u.cwiseAbs().maxCoeff());
        CHECK(r.direct.cwiseAbs().maxCoeff() <= 1e-12 * u.cwiseAbs().maxCoeff());
    }
    SUBCASE("offsets transverse to the window axis do not contribute")
    {
        const auto strip = cfg;
        ModelSpec m = strip.model;
        std::erase_if(m.hopping.terms, [](const HoppingTerm& t) { return t.eta[1] != 0; });
        const LatticeDomain dom(0.1, Vec::Constant(2, -1.0), Vec::Constant(2, 1.0));
        const CVec u = random_field(dom.size(), rng);
        const auto r = window_commutator(m, GaussianWindow{0.1, 1.0, 0.1}, dom, u);
        CHECK(r.formula.cwiseAbs().maxCoeff() == 0.0);
        CHECK(r.direct.cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("periodic contour shift")
{
    const FourierSeries expz{{1}, {1.0}};
    const auto r = contour_shift_check(expz, 0.9);
    CHECK(std::abs(r.shifted) <= 1e-12);
    CHECK(std::abs(r.real_line) <= 1e-12);
    CHECK(r.deviation <= 1e-12);
    const auto one = contour_shift_check(FourierSeries{{0}, {1.0}}, -0.4);
    CHECK(std::abs(one.shifted - 2 * pi) <= 1e-12);
    CHECK(std::abs(one.real_line - 2 * pi) <= 1e-12);
    const auto c = contour_shift_check(FourierSeries{{1, -1}, {0.5, 0.5}}, 0.7);
    CHECK(c.deviation <= 1e-12);
    // Mixed series: only the constant mode survives on either line.
    const auto mix = contour_shift_check(FourierSeries{{-3, 0, 2}, {Complex(0.2, 1.0), Complex(1.5, -0.5), 4.0}}, 1.1);
    CHECK(std::abs(mix.shifted - 2 * pi * Complex(1.5, -0.5)) <= 1e-11);
    CHECK(mix.deviation <= 1e-11);
}

TEST_CASE("lattice Laplace sum of a Gaussian matches the Poisson dual series")
{
    for (double c : {0.0, 0.3}) {
        const auto psi = [c](const Vec& x) { return 0.5 * (x[0] - c) * (x[0] - c); };
        const std::vector<double> eps_list{2.0, 1.0, 0.5, 0.25};
        const auto r = lattice_laplace([](const Vec&) { return 1.0; }, psi, v1(c), eps_list, v1(-40), v1(40));
        CHECK(r.J0 == doctest::Approx(std::sqrt(2 * pi)).epsilon(1e-9));
        for (const auto& s : r.samples) {
            double dual = 0.0;
            for (int k = -20; k <= 20; ++k)
                dual += std::exp(-2 * pi * pi * k * k / s.eps) * std::cos(2 * pi * k * c / s.eps);
            dual *= std::sqrt(2 * pi);
            CHECK(std::abs(s.sum - dual) <= 1e-12);
        }
    }
}

TEST_CASE("lattice Laplace prefactor scaling and remainder order")
{
    const auto bump = [](const Vec& x) {
        const double r = x[0] / 0.9;
        return std::abs(r) < 1 ? std::exp(1 - 1 / (1 - r * r)) : 0.0;
    };
    const auto psi = [](const Vec& x) { return 0.5 * x[0] * x[0]; };
    const std::vector<double> eps_list{0.04, 0.02, 0.01, 0.005};
    const auto base = lattice_laplace(bump, psi, v1(0), eps_list, v1(-1), v1(1));
    const auto steep = lattice_laplace(bump, [&](const Vec& x) { return 4 * psi(x); }, v1(0), eps_list, v1(-1), v1(1));
    CHECK(steep.J0 == doctest::Approx(0.5 * base.J0).epsilon(1e-9));
    const auto vanish = lattice_laplace([&](const Vec& x) { return x[0] * bump(x); }, psi, v1(0), eps_list, v1(-1), v1(1));
    CHECK(vanish.J0 == 0.0);
    CHECK_THROWS(lattice_laplace(bump, [](const Vec& x) { return -x[0] * x[0]; }, v1(0), eps_list, v1(-1), v1(1)));

    // Asymmetric amplitude and phase: first-order remainder.
    const auto a = [&](const Vec& x) { return (1 + x[0]) * bump(x); };
    const auto phase = [](const Vec& x) { return x[0] * x[0] * (0.5 + x[0] / 6); };
    const auto r = lattice_laplace(a, phase, v1(0), eps_list, v1(-1), v1(1));
    MESSAGE("remainder order " << r.remainder_order);
    CHECK(r.remainder_order == doctest::Approx(1.0).epsilon(0.1));
    for (const auto& s : r.samples) CHECK(std::abs(s.sum - r.J0) / s.eps < 5.0);
}
