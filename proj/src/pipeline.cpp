#include "tunnel/pipeline.hpp"

#include "tunnel/operator.hpp"
#include "tunnel/pdo_torus.hpp"

#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <future>
#include <mutex>
#include <numbers>
#include <random>
#include <thread>

namespace tunnel {

namespace {

std::string num(double v) { return fmt::format("{:.17g}", v); }

// Runs fn(0..n-1) on up to `threads` workers; the first exception is rethrown after all workers finish.
template <class Fn>
void parallel_for(size_t n, int threads, Fn fn)
{
    const size_t workers = std::max<size_t>(1, std::min<size_t>(n, static_cast<size_t>(std::max(threads, 1))));
    if (workers == 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::jthread> pool;
    for (size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    pool.clear();
    if (error) std::rethrow_exception(error);
}

std::ofstream open_csv(const std::string& path)
{
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.imbue(std::locale::classic());
    return out;
}

std::string coordinate_header(int d, const std::string& prefix)
{
    std::string h;
    for (int a = 0; a < d; ++a) h += "," + prefix + std::to_string(a + 1);
    return h;
}

Region away_from_well(const Region& M, const Vec& well, int axis, double radius)
{
    const double w = well[axis];
    return M.intersect(Region([w, axis, radius](const Vec& x) { return std::abs(x[axis] - w) > radius; }, "band"));
}

template <class F>
auto stage(const std::string& name, F&& f)
{
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

}  // namespace

AsymptoticFit fit_asymptotics(const std::vector<double>& eps, const std::vector<double>& w)
{
    if (eps.size() != w.size()) throw std::invalid_argument("eps and w lengths differ");
    if (eps.size() < 3) throw std::invalid_argument("underdetermined: at least 3 sweep points are required");
    AsymptoticFit fit;
    fit.points = static_cast<int>(eps.size());
    const auto n = static_cast<Eigen::Index>(eps.size());
    Mat A(n, 3);
    Vec y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double e = eps[static_cast<size_t>(i)], v = w[static_cast<size_t>(i)];
        if (!(e > 0.0)) throw std::invalid_argument("eps must be positive");
        if (v == 0.0 || !std::isfinite(v)) throw std::invalid_argument("w must be finite and nonzero");
        if (i > 0 && (v > 0) != (w[0] > 0)) fit.sign_change = true;
        A(i, 0) = -1.0 / e;
        A(i, 1) = std::log(e);
        A(i, 2) = 1.0;
        y[i] = std::log(std::abs(v));
    }
    if (fit.sign_change) spdlog::warn("w changes sign across the sweep, fitting |w|");
    const Vec c = A.colPivHouseholderQr().solve(y);
    fit.S = c[0];
    fit.p = c[1];
    fit.c = c[2];
    const double mean = y.mean();
    const double ss_tot = (y.array() - mean).square().sum();
    const double ss_res = (A * c - y).squaredNorm();
    fit.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    return fit;
}

ExperimentConfig apply_overrides(ExperimentConfig cfg, const RunOptions& opt)
{
    if (opt.out_dir) cfg.out_dir = *opt.out_dir;
    if (opt.eps) {
        if (opt.eps->empty()) throw std::invalid_argument("epsilon list is empty");
        for (size_t i = 0; i < opt.eps->size(); ++i) {
            if (!((*opt.eps)[i] > 0.0)) throw std::invalid_argument("epsilon values must be positive");
            if (i > 0 && !((*opt.eps)[i] < (*opt.eps)[i - 1]))
                throw std::invalid_argument("epsilon values must be decreasing");
        }
        cfg.eps_list = *opt.eps;
    }
    if (opt.level) {
        if (*opt.level < 0) throw std::invalid_argument("level must be nonnegative");
        cfg.level = *opt.level;
    }
    if (opt.threads) cfg.threads = std::max(1, *opt.threads);
    if (opt.seed) cfg.seed = *opt.seed;
    return cfg;
}

ValidationReport validate_experiment(const ExperimentConfig& cfg)
{
    const int d = cfg.model.dim;
    const int per_axis = d == 1 ? 41 : 11;
    std::vector<Vec> samples;
    long total = 1;
    for (int a = 0; a < d; ++a) total *= per_axis;
    for (long c = 0; c < total; ++c) {
        Vec x(d);
        long r = c;
        for (int a = 0; a < d; ++a) {
            x[a] = cfg.box_lo[a] + (cfg.box_hi[a] - cfg.box_lo[a]) * static_cast<double>(r % per_axis) / (per_axis - 1);
            r /= per_axis;
        }
        samples.push_back(x);
    }
    auto rep = validate_model(cfg.model, samples, cfg.eps_list.back());
    const Vec& wj = cfg.well_point_j();
    const Vec& wk = cfg.well_point_k();
    const Region Mj = cfg.region_j(), Mk = cfg.region_k();
    rep.checks.push_back({"wells_in_regions", Mj.contains(wj) && Mk.contains(wk), 0.0,
                          "each well must lie in its own region"});
    rep.checks.push_back({"regions_separate_wells", !Mj.contains(wk) && !Mk.contains(wj), 0.0,
                          "a region contains the other well"});
    return rep;
}

Geometry compute_geometry(const ExperimentConfig& cfg, int threads)
{
    Grid grid(cfg.box_lo, cfg.box_hi, cfg.grid, cfg.model.periodic);
    DistanceField dj{grid, {}, {}, cfg.well_point_j()}, dk = dj;
    stage("eikonal", [&] {
        if (threads > 1) {
            auto fk = std::async(std::launch::async, [&] { return eikonal_solve(cfg.model, cfg.well_point_k(), grid); });
            dj = eikonal_solve(cfg.model, cfg.well_point_j(), grid);
            dk = fk.get();
        } else {
            dj = eikonal_solve(cfg.model, cfg.well_point_j(), grid);
            dk = eikonal_solve(cfg.model, cfg.well_point_k(), grid);
        }
        return 0;
    });
    Geometry g{grid, dj, dk, {}, {}, {}, {}, 0.0, 0, {}};
    const int axis = cfg.split_axis;
    g.residual_j = eikonal_residual(cfg.model, g.dj, away_from_well(cfg.region_j(), cfg.well_point_j(), axis, 0.1));
    g.residual_k = eikonal_residual(cfg.model, g.dk, away_from_well(cfg.region_k(), cfg.well_point_k(), axis, 0.1));
    stage("geodesic", [&] {
        g.geodesic = minimal_geodesic(cfg.model, g.dj, g.dk, {axis, 0.0});
        g.manifold = manifold_detect(g.dj, g.dk, {axis, 0.0});
        g.ell = g.manifold.dimension;
        g.S_jk = g.ell > 0 ? g.manifold.S : g.geodesic.S;
        return 0;
    });
    stage("ellipse", [&] {
        g.ellipse = ellipse_region(g.dj, g.dk, g.S_jk, {cfg.ellipse_a, cfg.band_R, axis, 0.0}, cfg.region_j(),
                                   cfg.region_k());
        return 0;
    });
    return g;
}

SpectrumEntry compute_spectrum(const ExperimentConfig& cfg, double eps)
{
    SpectrumEntry e;
    e.eps = eps;
    const auto dom = cfg.lattice(eps);
    e.lattice_points = dom.size();
    EigenOptions opt;
    opt.precision = cfg.precision;
    opt.seed = cfg.seed;
    e.interval = select_interval(cfg.model, dom, {cfg.region_j(), cfg.region_k()},
                                 {cfg.well_point_j(), cfg.well_point_k()}, cfg.level, opt);
    const int count = 2 * (cfg.level + 1) + 1;
    e.full = dirichlet_eigs(cfg.model, dom, Region::everything(), std::min<long>(count, dom.size()), opt,
                            cfg.well_point_j(), "full");
    for (const auto& p : e.full) {
        const double v = static_cast<double>(p.value);
        if (v >= e.interval.lo && v <= e.interval.hi) e.inside.push_back(p);
    }
    return e;
}

SweepRow interaction_entry(const ExperimentConfig& cfg, const Geometry& geo, const SpectrumEntry& sp, int N_j, int N_k,
                           AmplitudeField* bj_out, AmplitudeField* bk_out)
{
    const auto dom = cfg.lattice(sp.eps);
    const auto& vj = sp.interval.selected.at(0);
    const auto& vk = sp.interval.selected.at(1);
    const int axis = cfg.split_axis;
    SweepRow r;
    r.eps = sp.eps;
    r.lattice_points = sp.lattice_points;
    r.S_jk = geo.S_jk;
    r.mu_j = static_cast<double>(vj.value);
    r.mu_k = static_cast<double>(vk.value);
    r.w_exact = interaction_exact(cfg.model, dom, vj, vk, cfg.region_k());
    r.w_kj = interaction_exact(cfg.model, dom, vk, vj, cfg.region_j());
    const auto im = interaction_matrix(cfg.model, dom, {vj, vk}, {0, 1}, {cfg.region_j(), cfg.region_k()}, sp.inside);
    r.splitting_exact = static_cast<double>(im.exact_eigenvalues[1] - im.exact_eigenvalues[0]);
    r.splitting_model = static_cast<double>(im.model_eigenvalues[1] - im.model_eigenvalues[0]);
    r.model_deviation = *std::max_element(im.deviation.begin(), im.deviation.end());

    const auto bj = amplitude_extract(vj, geo.dj, dom, cfg.well_j, 1.0, cfg.precision);
    const auto bk = amplitude_extract(vk, geo.dk, dom, cfg.well_k, 1.0, cfg.precision);
    double exponent = 0.5 * (1 - geo.ell) - (N_j + N_k);
    if (geo.ell == 0) {
        const Vec& y = geo.geodesic.crossing;
        r.b_j = bj.at(dom, y);
        r.b_k = bk.at(dom, y);
        r.I0 = I0_point(r.b_j, r.b_k, geo.geodesic.hessian, current_sum(cfg.model, y, geo.dj.gradient(y), axis));
    } else {
        const auto mi = I0_manifold(bj, bk, dom, geo.manifold, cfg.model, geo.dj, axis);
        r.b_j = bj.at(dom, geo.manifold.nodes.front());
        r.b_k = bk.at(dom, geo.manifold.nodes.front());
        r.I0 = mi.I0;
    }
    r.w_pred = predicted_interaction(sp.eps, geo.S_jk, r.I0, exponent);
    r.ratio = r.w_pred / r.w_exact;
    try {
        r.band_leading = band_estimate(cfg.model, dom, vj, vk, geo.dj, geo.dk, geo.ellipse.region, {axis, 0.0, -1.0}).leading;
    } catch (const std::exception& e) {
        spdlog::warn("band estimate skipped at eps={}: {}", sp.eps, e.what());
        r.band_leading = std::numeric_limits<double>::quiet_NaN();
    }
    if (bj_out) *bj_out = bj;
    if (bk_out) *bk_out = bk;
    return r;
}

bool TunnelingReport::ok() const
{
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

std::string grid_label(const std::vector<long>& nodes)
{
    std::string s;
    for (size_t i = 0; i < nodes.size(); ++i) s += (i ? "x" : "") + std::to_string(nodes[i]);
    return s;
}

TunnelingReport run_pipeline(const ExperimentConfig& cfg, bool write)
{
    TunnelingReport rep;
    const std::string grid = grid_label(cfg.grid);
    auto emit = [&](const std::string& name, auto&& writer) {
        if (!write) return;
        rep.files.push_back(name);
        writer((std::filesystem::path(cfg.out_dir) / name).string());
    };
    const auto validation = stage("validate", [&] { return validate_experiment(cfg); });
    rep.checks.push_back({"validation", validation.ok(), 0.0, validation.ok() ? "" : validation.summary()});
    if (!validation.ok()) throw StageError("validate", validation.summary());

    const Geometry geo = compute_geometry(cfg, cfg.threads);
    rep.S_jk = geo.S_jk;
    rep.ell = geo.ell;
    spdlog::info("S_jk={:.10f} crossing dimension {}", geo.S_jk, geo.ell);
    emit("field_j.csv", [&](const std::string& p) { write_field_csv(p, geo.dj, "j"); });
    emit("field_k.csv", [&](const std::string& p) { write_field_csv(p, geo.dk, "k"); });
    emit("geodesic.csv", [&](const std::string& p) { write_geodesic_csv(p, geo); });

    std::vector<SpectrumEntry> spectra(cfg.eps_list.size());
    stage("dirichlet", [&] {
        parallel_for(spectra.size(), cfg.threads, [&](size_t i) { spectra[i] = compute_spectrum(cfg, cfg.eps_list[i]); });
        return 0;
    });
    emit("spectrum.csv", [&](const std::string& p) { write_spectrum_csv(p, grid, spectra); });

    std::vector<SweepRow> rows(spectra.size());
    stage("interaction", [&] {
        parallel_for(rows.size(), cfg.threads, [&](size_t i) { rows[i] = interaction_entry(cfg, geo, spectra[i], 0, 0); });
        return 0;
    });

    // Leading amplitude orders from the eps-scaling of b at the crossing.
    if (rows.size() >= 2) {
        std::vector<double> eps, bj, bk;
        for (const auto& r : rows) {
            eps.push_back(r.eps);
            bj.push_back(r.b_j);
            bk.push_back(r.b_k);
        }
        try {
            rep.N_j = amplitude_order(eps, bj).N;
            rep.N_k = amplitude_order(eps, bk).N;
        } catch (const std::invalid_argument& e) {
            spdlog::warn("amplitude order not estimated: {}", e.what());
        }
    }
    rep.predicted_exponent = 0.5 * (1 - geo.ell) - (rep.N_j + rep.N_k);
    for (auto& r : rows) {
        r.w_pred *= std::pow(r.eps, -(rep.N_j + rep.N_k));
        r.ratio = r.w_pred / r.w_exact;
        if ((r.w_pred > 0) != (r.w_exact > 0)) rep.sign_agrees = false;
    }
    rep.rows = rows;

    if (rows.size() >= 3) {
        std::vector<double> eps, w;
        for (const auto& r : rows) {
            eps.push_back(r.eps);
            w.push_back(r.w_exact);
        }
        rep.fit = stage("fit", [&] { return fit_asymptotics(eps, w); });
    }

    double recip = 0.0, b1 = 0.0;
    bool sign_ok = true;
    for (const auto& r : rows) {
        const double tol = std::max(std::abs(r.mu_j - r.mu_k), 1e-10) + 1e-10 * std::abs(r.w_exact);
        recip = std::max(recip, std::abs(r.w_exact - r.w_kj) / std::max(tol, 1e-300));
        b1 = std::max(b1, r.model_deviation / r.splitting_exact);
        if ((r.w_exact > 0) != (rows.front().w_exact > 0)) sign_ok = false;
    }
    rep.checks.push_back({"reciprocity", recip <= 1.0, recip, "|w_jk - w_kj| relative to the allowed bound"});
    rep.checks.push_back({"interaction_matrix", b1 <= 0.1, b1, "max eigenvalue deviation / splitting"});
    rep.checks.push_back({"sign_consistency", sign_ok, 0.0, "w_exact keeps one sign across the sweep"});

    emit("report.csv", [&](const std::string& p) { write_report_csv(p, grid, rep); });
    emit("fit.csv", [&](const std::string& p) { write_fit_csv(p, grid, rep); });
    if (write) write_manifest((std::filesystem::path(cfg.out_dir) / "manifest.json").string(), cfg, rep);
    return rep;
}

void write_spectrum_csv(const std::string& path, const std::string& grid, const std::vector<SpectrumEntry>& entries)
{
    auto out = open_csv(path);
    out << "eps,grid,lattice_points,region,index,eigenvalue,residual,in_interval,interval_lo,interval_hi\n";
    for (const auto& e : entries) {
        auto row = [&](const std::string& region, const EigenPair& p, bool in) {
            out << num(e.eps) << ',' << grid << ',' << e.lattice_points << ',' << region << ',' << p.index << ','
                << fmt::format("{:.30g}", static_cast<double>(p.value)) << ',' << num(p.residual) << ',' << (in ? 1 : 0)
                << ',' << num(e.interval.lo) << ',' << num(e.interval.hi) << '\n';
        };
        const char* names[] = {"M_j", "M_k"};
        for (size_t r = 0; r < e.interval.spectra.size() && r < 2; ++r)
            for (const auto& p : e.interval.spectra[r]) {
                const double v = static_cast<double>(p.value);
                row(names[r], p, v >= e.interval.lo && v <= e.interval.hi);
            }
        for (const auto& p : e.full) {
            const double v = static_cast<double>(p.value);
            row("full", p, v >= e.interval.lo && v <= e.interval.hi);
        }
    }
}

void write_field_csv(const std::string& path, const DistanceField& f, const std::string& well)
{
    auto out = open_csv(path);
    const int d = f.grid.dim();
    const std::string grid = grid_label(f.grid.nodes());
    out << "grid,well,index" << coordinate_header(d, "x") << ",distance" << coordinate_header(d, "grad") << '\n';
    for (long i = 0; i < f.grid.size(); ++i) {
        const Vec x = f.grid.node(i);
        out << grid << ',' << well << ',' << i;
        for (int a = 0; a < d; ++a) out << ',' << num(x[a]);
        out << ',' << num(f.values[static_cast<size_t>(i)]);
        for (int a = 0; a < d; ++a) out << ',' << num(f.gradients[static_cast<size_t>(i)][a]);
        out << '\n';
    }
}

void write_geodesic_csv(const std::string& path, const Geometry& geo)
{
    auto out = open_csv(path);
    const int d = geo.grid.dim();
    const std::string grid = grid_label(geo.grid.nodes());
    out << "grid,kind,index" << coordinate_header(d, "x") << ",value\n";
    const auto& g = geo.geodesic;
    for (size_t i = 0; i < g.path.size(); ++i) {
        out << grid << ",path," << i;
        for (int a = 0; a < d; ++a) out << ',' << num(g.path[i][a]);
        out << ',' << num(i < g.action.size() ? g.action[i] : std::nan("")) << '\n';
    }
    for (size_t i = 0; i < geo.manifold.nodes.size(); ++i) {
        out << grid << ",manifold," << i;
        for (int a = 0; a < d; ++a) out << ',' << num(geo.manifold.nodes[i][a]);
        out << ',' << num(geo.manifold.weights[i]) << '\n';
    }
}

void write_report_csv(const std::string& path, const std::string& grid, const TunnelingReport& rep)
{
    auto out = open_csv(path);
    out << "eps,S_jk,w_exact,w_pred,ratio,slope_fit,prefactor_fit,splitting_exact,splitting_model,grid,lattice_points,"
           "w_kj,mu_j,mu_k,I0,b_j,b_k,band_leading\n";
    for (const auto& r : rep.rows)
        out << num(r.eps) << ',' << num(r.S_jk) << ',' << num(r.w_exact) << ',' << num(r.w_pred) << ','
            << num(r.ratio) << ',' << num(-rep.fit.S) << ',' << num(rep.fit.p) << ',' << num(r.splitting_exact) << ','
            << num(r.splitting_model) << ',' << grid << ',' << r.lattice_points << ',' << num(r.w_kj) << ',' << num(r.mu_j)
            << ',' << num(r.mu_k) << ',' << num(r.I0) << ',' << num(r.b_j) << ',' << num(r.b_k) << ','
            << num(r.band_leading) << '\n';
}

void write_fit_csv(const std::string& path, const std::string& grid, const TunnelingReport& rep)
{
    auto out = open_csv(path);
    out << "grid,points,eps_min,eps_max,S_fit,p_fit,c_fit,r2,S_jk,ell,N_j,N_k,predicted_exponent,sign_agrees\n";
    double lo = 0.0, hi = 0.0;
    if (!rep.rows.empty()) {
        lo = rep.rows.back().eps;
        hi = rep.rows.front().eps;
    }
    out << grid << ',' << rep.fit.points << ',' << num(lo) << ',' << num(hi) << ',' << num(rep.fit.S) << ','
        << num(rep.fit.p) << ',' << num(rep.fit.c) << ',' << num(rep.fit.r2) << ',' << num(rep.S_jk) << ',' << rep.ell
        << ',' << rep.N_j << ',' << rep.N_k << ',' << num(rep.predicted_exponent) << ',' << (rep.sign_agrees ? 1 : 0)
        << '\n';
}

void write_manifest(const std::string& path, const ExperimentConfig& cfg, const TunnelingReport& rep)
{
    nlohmann::ordered_json j;
    j["config"] = cfg.source;
    j["eps"] = cfg.eps_list;
    j["grid"] = cfg.grid;
    j["level"] = cfg.level;
    j["seed"] = cfg.seed;
    j["precision"] = cfg.precision == Precision::binary128 ? "quad" : "double";
    j["files"] = rep.files;
    j["S_jk"] = rep.S_jk;
    j["crossing_dimension"] = rep.ell;
    j["fit"] = {{"S", rep.fit.S}, {"p", rep.fit.p}, {"r2", rep.fit.r2}, {"points", rep.fit.points}};
    auto& checks = j["checks"];
    checks = nlohmann::ordered_json::array();
    for (const auto& c : rep.checks) checks.push_back({{"name", c.name}, {"passed", c.passed}, {"worst", c.worst}});
    j["ok"] = rep.ok();
    auto out = open_csv(path);
    out << j.dump(2) << '\n';
}

std::vector<PdoCheckResult> pdo_check(unsigned seed, int instances)
{
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> U(-1, 1);
    std::normal_distribution<double> G;
    auto random_field = [&](long n) {
        CVec u(n);
        for (long i = 0; i < n; ++i) u[i] = Complex(G(rng), G(rng));
        return u;
    };
    std::vector<PdoCheckResult> out;

    // Restriction: random one-variable symbols against plane waves on a line.
    {
        PdoCheckResult r{"restriction", instances, 0.0, 1e-10};
        for (int rep = 0; rep < instances; ++rep) {
            const double eps = std::vector<double>{0.1, 0.05, 0.025}[static_cast<size_t>(rep % 3)];
            const LatticeDomain dom(eps, Vec::Constant(1, -2.0), Vec::Constant(1, 2.0));
            PeriodicSymbol q(1);
            for (int e = -2; e <= 2; ++e) {
                const double a = U(rng), b = U(rng), c = 2 * U(rng);
                q.add({e}, [=](const Vec& x, const Vec&) { return Complex(a + b * std::cos(c * x[0]), b * std::sin(x[0])); });
            }
            PlaneWaves u;
            for (int k = 0; k < 3; ++k) {
                u.amplitudes.push_back(Complex(U(rng), U(rng)));
                u.frequencies.push_back(Vec::Constant(1, 3 * U(rng) / eps));
            }
            r.worst = std::max(r.worst, restriction_check(q, u, dom));
        }
        out.push_back(r);
    }
    // Conjugation by a quadratic weight, operator identity in 2D.
    {
        PdoCheckResult r{"conjugate_weight", instances, 0.0, 1e-10};
        const LatticeDomain dom(0.1, Vec::Constant(2, -1.0), Vec::Constant(2, 1.0));
        for (int rep = 0; rep < instances; ++rep) {
            Mat B(2, 2);
            B << U(rng), U(rng), U(rng), U(rng);
            const Mat A = B * B.transpose() + 0.5 * Mat::Identity(2, 2);
            const Weight psi{[A](const Vec& x) { return 0.5 * x.dot(A * x); }, [A](const Vec& x) { return Vec(A * x); }, true};
            PeriodicSymbol q(2, PeriodicSymbol::Kind::two_variable);
            for (const auto& eta : std::vector<std::vector<int>>{{0, 0}, {1, 0}, {-1, 1}, {0, -2}}) {
                const double a = U(rng), b = U(rng), c = U(rng), f = U(rng);
                q.add(eta, [=](const Vec& x, const Vec& y) {
                    return Complex(a + b * std::cos(x[0] - 0.5 * y[1]), c * std::sin(x[1] + y[0]) + f);
                });
            }
            const CVec u = random_field(dom.size());
            CVec weighted(dom.size());
            for (long i = 0; i < dom.size(); ++i) weighted[i] = std::exp(-psi.value(dom.point(i)) / dom.eps()) * u[i];
            CVec lhs = quantize(q, 0.0, dom, weighted);
            for (long i = 0; i < dom.size(); ++i) lhs[i] *= std::exp(psi.value(dom.point(i)) / dom.eps());
            const CVec rhs = quantize(conjugate_weight(q, psi), 0.0, dom, u);
            r.worst = std::max(r.worst, (lhs - rhs).cwiseAbs().maxCoeff() / (1.0 + rhs.cwiseAbs().maxCoeff()));
        }
        out.push_back(r);
    }
    // Window commutator computed directly and through the shifted-momentum form.
    {
        PdoCheckResult r{"window_commutator", instances, 0.0, 1e-10};
        const auto cfg = parse_config(R"(
[model]
dimension = 2
[hopping]
0,0 = 4 + 0.2*cos(x1)
1,0 = -1
-1,0 = -1
0,1 = -1 - 0.1*sin(x1)
0,-1 = -1 - 0.1*sin(x1)
[potential]
V0 = (x1^2 - 1)^2 + x2^2
wells = -1, 0 | 1, 0
[domain]
box_lo = -2, -2
box_hi = 2, 2
epsilon = 1/8
Mj_lo = -2, -2
Mj_hi = 0.5, 2
Mk_lo = -0.5, -2
Mk_hi = 2, 2
)");
        const LatticeDomain dom(0.125, Vec::Constant(2, 0.0), Vec::Constant(2, 0.875));
        for (int rep = 0; rep < instances; ++rep) {
            const CVec u = random_field(dom.size());
            const GaussianWindow w{0.5 + 0.5 * U(rng), 0.5 + 0.1 * rep, dom.eps()};
            const auto c = window_commutator(cfg.model, w, dom, u, rep % 2);
            r.worst = std::max(r.worst, c.deviation / (1.0 + c.direct.cwiseAbs().maxCoeff()));
        }
        out.push_back(r);
    }
    // Contour shift of random trigonometric polynomials.
    {
        PdoCheckResult r{"contour_shift", instances, 0.0, 1e-12};
        for (int rep = 0; rep < instances; ++rep) {
            FourierSeries f;
            for (int n = -3; n <= 3; ++n) {
                f.n.push_back(n);
                f.c.push_back(Complex(U(rng), U(rng)));
            }
            r.worst = std::max(r.worst, contour_shift_check(f, U(rng)).deviation);
        }
        out.push_back(r);
    }
    return out;
}

}  // namespace tunnel
