#include "models.hpp"
#include "tunnel/pdo_torus.hpp"
#include "tunnel/pipeline.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

using namespace tunnel;

namespace {

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

ExperimentConfig small_sweep(const std::string& out)
{
    auto cfg = double_well();
    cfg.grid = {801};
    cfg.eps_list = {0.1, 1.0 / 16, 1.0 / 24};
    cfg.out_dir = out;
    return cfg;
}

}  // namespace

TEST_CASE("asymptotic fit recovers synthetic parameters")
{
    std::vector<double> eps = {0.1, 0.08, 0.0625, 0.05, 0.04}, w;
    for (double e : eps) w.push_back(-3.0 * std::pow(e, 0.5) * std::exp(-2.0 / e));
    const auto fit = fit_asymptotics(eps, w);
    CHECK(fit.S == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(fit.p == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(fit.c == doctest::Approx(std::log(3.0)).epsilon(1e-6));
    CHECK(fit.r2 == doctest::Approx(1.0));
    CHECK_FALSE(fit.sign_change);
    CHECK(fit.points == 5);
}

TEST_CASE("asymptotic fit edge cases")
{
    SUBCASE("constant data")
    {
        const auto fit = fit_asymptotics({0.1, 0.05, 0.025}, {2.0, 2.0, 2.0});
        CHECK(std::abs(fit.S) < 1e-10);
        CHECK(std::abs(fit.p) < 1e-10);
        CHECK(fit.r2 == 1.0);
    }
    SUBCASE("two points are underdetermined")
    {
        CHECK_THROWS_WITH_AS(fit_asymptotics({0.1, 0.05}, {1e-3, 1e-6}), doctest::Contains("underdetermined"),
                             std::invalid_argument);
    }
    SUBCASE("zero interaction") { CHECK_THROWS_AS(fit_asymptotics({0.1, 0.05, 0.025}, {1e-3, 0.0, 1e-9}), std::invalid_argument); }
    SUBCASE("sign change is flagged")
    {
        const auto fit = fit_asymptotics({0.1, 0.05, 0.025}, {1e-3, -1e-6, 1e-12});
        CHECK(fit.sign_change);
    }
}

TEST_CASE("overrides are checked")
{
    const auto cfg = double_well();
    RunOptions opt;
    opt.eps = std::vector<double>{};
    CHECK_THROWS_AS(apply_overrides(cfg, opt), std::invalid_argument);
    opt.eps = std::vector<double>{0.05, 0.1};
    CHECK_THROWS_AS(apply_overrides(cfg, opt), std::invalid_argument);
    opt.eps = std::vector<double>{0.1, 0.05};
    opt.level = 1;
    opt.seed = 9;
    const auto out = apply_overrides(cfg, opt);
    CHECK(out.eps_list.size() == 2);
    CHECK(out.level == 1);
    CHECK(out.seed == 9u);
}

TEST_CASE("regions that contain both wells fail validation")
{
    auto cfg = small_sweep("unused");
    cfg.mj_hi = Vec::Constant(1, 1.5);
    const auto rep = validate_experiment(cfg);
    CHECK_FALSE(rep.ok());
    REQUIRE(rep.find("regions_separate_wells"));
    CHECK_FALSE(rep.find("regions_separate_wells")->passed);
    try {
        run_pipeline(cfg, false);
        FAIL("expected a stage error");
    } catch (const StageError& e) {
        CHECK(e.stage() == "validate");
    }
}

TEST_CASE("a valid model passes validation")
{
    const auto rep = validate_experiment(double_well());
    CHECK(rep.ok());
}

TEST_CASE("pipeline output is deterministic")
{
    const auto base = std::filesystem::temp_directory_path() / "tunnel_determinism";
    std::filesystem::remove_all(base);
    auto a = small_sweep((base / "a").string());
    auto b = small_sweep((base / "b").string());
    b.threads = 3;
    const auto ra = run_pipeline(a);
    const auto rb = run_pipeline(b);
    CHECK(ra.ok());
    REQUIRE(ra.files == rb.files);
    for (const auto& f : ra.files) {
        INFO(f);
        CHECK(slurp(base / "a" / f) == slurp(base / "b" / f));
    }
    CHECK(slurp(base / "a" / "manifest.json") == slurp(base / "b" / "manifest.json"));
    const auto report = slurp(base / "a" / "report.csv");
    CHECK(report.rfind("eps,S_jk,w_exact,w_pred,ratio,slope_fit,prefactor_fit,splitting_exact,splitting_model,", 0) == 0);
    CHECK(report.find(",801,") != std::string::npos);
    std::filesystem::remove_all(base);
}

TEST_CASE("sweep rows are consistent")
{
    const auto rep = run_pipeline(small_sweep("unused"), false);
    REQUIRE(rep.rows.size() == 3);
    CHECK(rep.ell == 0);
    CHECK(rep.sign_agrees);
    for (const auto& r : rep.rows) {
        CHECK(r.w_exact < 0.0);
        CHECK(std::abs(r.w_exact - r.w_kj) <= 1e-10 * std::abs(r.w_exact) + std::abs(r.mu_j - r.mu_k));
        CHECK(r.ratio > 0.6);
        CHECK(r.ratio < 1.5);
    }
    CHECK(std::abs(rep.rows[2].ratio - 1.0) < std::abs(rep.rows[0].ratio - 1.0));
}

TEST_CASE("pdo suite passes on every seed tried")
{
    for (unsigned seed : {1u, 2u, 3u}) {
        for (const auto& r : pdo_check(seed, 5)) {
            INFO(r.name, " ", r.worst);
            CHECK(r.passed());
            CHECK(r.instances == 5);
        }
    }
}

TEST_CASE("lattice sum of a trigonometric polynomial is exact")
{
    // Mean of sin^8 over a period is C(8,4)/2^8.
    const auto r = lattice_sum_vs_integral([](double x) { return std::pow(std::sin(std::numbers::pi * x), 8); }, 0.0,
                                           1.0, 1.0 / 40);
    CHECK(r.sum == doctest::Approx(70.0 / 256).epsilon(1e-14));
    CHECK(r.integral == doctest::Approx(70.0 / 256).epsilon(1e-12));
}

TEST_CASE("lattice sum of a bump converges faster than any power")
{
    const auto bump = [](double x) { return std::abs(x) < 1.0 ? std::exp(-1.0 / (1.0 - x * x)) : 0.0; };
    const auto coarse = lattice_sum_vs_integral(bump, -1.0, 1.0, 0.05);
    const auto fine = lattice_sum_vs_integral(bump, -1.0, 1.0, 0.025);
    CHECK(fine.integral == doctest::Approx(0.4439938161680794).epsilon(1e-13));
    CHECK(fine.deviation < 1e-8);
    CHECK(fine.deviation < coarse.deviation / 256);
}

TEST_CASE("configuration invariants are enforced at parse time")
{
    const std::string head = R"(
[model]
dimension = 1
[hopping]
0 = 2
1 = -1
-1 = -1
[potential]
V0 = (x^2 - 1)^2
)";
    const std::string box = R"(
[domain]
box_lo = -2
box_hi = 2
Mj_lo = -2
Mj_hi = 0.5
Mk_lo = -0.5
Mk_hi = 2
)";
    CHECK_NOTHROW(parse_config(head + "wells = -1 | 1\n" + box + "epsilon = 1/10, 1/16\n"));
    CHECK_THROWS_WITH_AS(parse_config(head + "wells = -1 | 1\n" + box), doctest::Contains("epsilon list is empty"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_config(head + "wells = -1 | 1\n" + box + "epsilon = 1/16, 1/10\n"),
                         doctest::Contains("decreasing"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_config(head + "wells = -1 | 1\n" + box + "epsilon = 0.1, -0.05\n"),
                         doctest::Contains("positive"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_config(head + "wells = 1 | -1\n" + box + "epsilon = 1/10\n"),
                         doctest::Contains("splitting hyperplane"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_config(head + "wells = 1 | 1\n" + box + "epsilon = 1/10\n"), doctest::Contains("coincide"),
                         std::invalid_argument);
}

TEST_CASE("outputs of finished stages survive a later failure")
{
    const auto dir = std::filesystem::temp_directory_path() / "tunnel_partial";
    std::filesystem::remove_all(dir);
    auto cfg = small_sweep(dir.string());
    cfg.ellipse_a = 10.0;
    CHECK_THROWS_AS(run_pipeline(cfg), StageError);
    CHECK_FALSE(std::filesystem::exists(dir / "field_j.csv"));
    cfg.ellipse_a = 0.3;
    cfg.level = 40;
    try {
        run_pipeline(cfg);
        FAIL("expected a stage error");
    } catch (const StageError& e) {
        CHECK(e.stage() == "dirichlet");
    }
    CHECK(std::filesystem::exists(dir / "field_j.csv"));
    CHECK(std::filesystem::exists(dir / "geodesic.csv"));
    CHECK_FALSE(std::filesystem::exists(dir / "report.csv"));
    std::filesystem::remove_all(dir);
}
