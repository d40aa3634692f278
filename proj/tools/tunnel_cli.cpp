#include "tunnel/config.hpp"
#include "tunnel/pipeline.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace tunnel;

namespace {

struct Args {
    std::string config;
    std::string out;
    std::string eps;
    int level = -1;
    int threads = 0;
    long long seed = -1;
    std::string input;
};

void add_common(CLI::App* sub, Args& a)
{
    sub->add_option("--config", a.config, "model file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", a.out, "output directory");
    sub->add_option("--eps", a.eps, "comma-separated epsilon list, decreasing");
    sub->add_option("--level", a.level, "target level")->check(CLI::NonNegativeNumber);
    sub->add_option("--threads", a.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--seed", a.seed, "random seed")->check(CLI::NonNegativeNumber);
}

ExperimentConfig load(const Args& a)
{
    RunOptions opt;
    if (!a.out.empty()) opt.out_dir = a.out;
    if (!a.eps.empty()) opt.eps = parse_number_list(a.eps);
    if (a.level >= 0) opt.level = a.level;
    if (a.threads > 0) opt.threads = a.threads;
    if (a.seed >= 0) opt.seed = static_cast<unsigned>(a.seed);
    return apply_overrides(load_config(a.config), opt);
}

std::string out_path(const ExperimentConfig& cfg, const std::string& name)
{
    return (std::filesystem::path(cfg.out_dir) / name).string();
}

void print_checks(const std::vector<Check>& checks)
{
    for (const auto& c : checks)
        fmt::print("{:<28} {:<4} worst={:.3e}{}\n", c.name, c.passed ? "ok" : "FAIL", c.worst,
                   c.detail.empty() || c.passed ? "" : "  " + c.detail);
}

int cmd_validate(const Args& a)
{
    const auto rep = validate_experiment(load(a));
    print_checks(rep.checks);
    return rep.ok() ? 0 : 1;
}

int cmd_spectrum(const Args& a)
{
    const auto cfg = load(a);
    std::vector<SpectrumEntry> entries;
    for (double e : cfg.eps_list) {
        entries.push_back(compute_spectrum(cfg, e));
        const auto& s = entries.back();
        fmt::print("eps={:.6g} points={} interval=[{:.12g}, {:.12g}] inside={}\n", e, s.lattice_points, s.interval.lo,
                   s.interval.hi, s.inside.size());
        for (const auto& p : s.inside) fmt::print("  {:.17g}\n", static_cast<double>(p.value));
    }
    write_spectrum_csv(out_path(cfg, "spectrum.csv"), grid_label(cfg.grid), entries);
    return 0;
}

int cmd_distance(const Args& a)
{
    const auto cfg = load(a);
    const auto geo = compute_geometry(cfg, cfg.threads);
    write_field_csv(out_path(cfg, "field_j.csv"), geo.dj, "j");
    write_field_csv(out_path(cfg, "field_k.csv"), geo.dk, "k");
    fmt::print("grid {} residual j max={:.3e} mean={:.3e}, k max={:.3e} mean={:.3e}\n", grid_label(cfg.grid),
               geo.residual_j.max_abs, geo.residual_j.mean_abs, geo.residual_k.max_abs, geo.residual_k.mean_abs);
    return 0;
}

int cmd_geodesic(const Args& a)
{
    const auto cfg = load(a);
    const auto geo = compute_geometry(cfg, cfg.threads);
    write_geodesic_csv(out_path(cfg, "geodesic.csv"), geo);
    fmt::print("S_jk={:.12g} crossing dimension {} path action={:.12g} transversality={:.3e}\n", geo.S_jk, geo.ell,
               geo.geodesic.total_action, geo.geodesic.transversality);
    return 0;
}

int cmd_interact(const Args& a)
{
    const auto cfg = load(a);
    const auto geo = compute_geometry(cfg, cfg.threads);
    TunnelingReport rep;
    rep.S_jk = geo.S_jk;
    rep.ell = geo.ell;
    for (double e : cfg.eps_list) {
        const auto sp = compute_spectrum(cfg, e);
        rep.rows.push_back(interaction_entry(cfg, geo, sp, 0, 0));
        const auto& r = rep.rows.back();
        fmt::print("eps={:.6g} w={:.10e} w_kj={:.10e} pred={:.10e} ratio={:.6f}\n", e, r.w_exact, r.w_kj, r.w_pred,
                   r.ratio);
    }
    write_report_csv(out_path(cfg, "interaction.csv"), grid_label(cfg.grid), rep);
    return 0;
}

std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> cells;
    std::stringstream s(line);
    std::string c;
    while (std::getline(s, c, ',')) cells.push_back(c);
    return cells;
}

int fit_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::string line;
    std::getline(in, line);
    const auto header = split(line);
    const auto col = [&](const std::string& name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw std::runtime_error(path + " has no column " + name);
        return static_cast<size_t>(it - header.begin());
    };
    const size_t ce = col("eps"), cw = col("w_exact");
    std::vector<double> eps, w;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split(line);
        eps.push_back(std::stod(cells.at(ce)));
        w.push_back(std::stod(cells.at(cw)));
    }
    const auto fit = fit_asymptotics(eps, w);
    fmt::print("S={:.12g} p={:.6f} c={:.6f} r2={:.10f} points={}{}\n", fit.S, fit.p, fit.c, fit.r2, fit.points,
               fit.sign_change ? " (sign change)" : "");
    return 0;
}

int cmd_sweep(const Args& a, bool fit_only)
{
    const auto cfg = load(a);
    const auto rep = run_pipeline(cfg);
    for (const auto& r : rep.rows)
        fmt::print("eps={:.6g} w={:.10e} pred={:.10e} ratio={:.6f} dev/split={:.3e}\n", r.eps, r.w_exact, r.w_pred,
                   r.ratio, r.model_deviation / r.splitting_exact);
    fmt::print("S_jk={:.12g} fit S={:.12g} p={:.6f} r2={:.10f} predicted exponent {}\n", rep.S_jk, rep.fit.S, rep.fit.p,
               rep.fit.r2, rep.predicted_exponent);
    if (!fit_only) print_checks(rep.checks);
    fmt::print("outputs in {}\n", cfg.out_dir);
    return rep.ok() ? 0 : 1;
}

int cmd_pdo(long long seed, int instances)
{
    bool ok = true;
    for (const auto& r : pdo_check(seed >= 0 ? static_cast<unsigned>(seed) : 12345u, instances)) {
        fmt::print("{:<20} instances={} worst={:.3e} tolerance={:.0e} {}\n", r.name, r.instances, r.worst, r.tolerance,
                   r.passed() ? "ok" : "FAIL");
        ok = ok && r.passed();
    }
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv)
{
    if (const char* lvl = std::getenv("TUNNEL_LOG")) spdlog::set_level(spdlog::level::from_str(lvl));
    else spdlog::set_level(spdlog::level::warn);

    CLI::App app{"Tunneling between potential wells of lattice difference operators"};
    app.require_subcommand(1);
    Args a;
    int instances = 20;
    auto* validate = app.add_subcommand("validate", "check the model hypotheses and the region setup");
    auto* spectrum = app.add_subcommand("spectrum", "Dirichlet spectra and the spectral interval per epsilon");
    auto* distance = app.add_subcommand("distance", "distance fields of both wells and their eikonal residuals");
    auto* geodesic = app.add_subcommand("geodesic", "minimal geodesic, crossing set and S_jk");
    auto* interact = app.add_subcommand("interact", "interaction term and its leading prediction per epsilon");
    auto* asymptotics = app.add_subcommand("asymptotics", "fit log|w| = -S/eps + p log eps + c");
    auto* sweep = app.add_subcommand("sweep", "full pipeline with all outputs and hard checks");
    auto* pdo = app.add_subcommand("pdo-check", "randomized exactness suite of the torus quantization");
    for (auto* s : {validate, spectrum, distance, geodesic, interact, sweep}) add_common(s, a);
    asymptotics->add_option("--input", a.input, "existing report CSV with eps and w_exact columns")->check(CLI::ExistingFile);
    asymptotics->add_option("--config", a.config, "model file, used when no input is given")->check(CLI::ExistingFile);
    asymptotics->add_option("--out", a.out, "output directory");
    asymptotics->add_option("--eps", a.eps, "comma-separated epsilon list, decreasing");
    asymptotics->add_option("--level", a.level, "target level")->check(CLI::NonNegativeNumber);
    asymptotics->add_option("--threads", a.threads, "worker threads")->check(CLI::PositiveNumber);
    asymptotics->add_option("--seed", a.seed, "random seed")->check(CLI::NonNegativeNumber);
    pdo->add_option("--seed", a.seed, "random seed")->check(CLI::NonNegativeNumber);
    pdo->add_option("--instances", instances, "instances per check")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*validate) return cmd_validate(a);
        if (*spectrum) return cmd_spectrum(a);
        if (*distance) return cmd_distance(a);
        if (*geodesic) return cmd_geodesic(a);
        if (*interact) return cmd_interact(a);
        if (*asymptotics) {
            if (!a.input.empty()) return fit_file(a.input);
            if (a.config.empty()) throw std::invalid_argument("asymptotics needs --input or --config");
            return cmd_sweep(a, true);
        }
        if (*sweep) return cmd_sweep(a, false);
        if (*pdo) return cmd_pdo(a.seed, instances);
    } catch (const StageError& e) {
        spdlog::error("stage {} failed: {}", e.stage(), e.what());
        return 2;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 2;
    }
    return 0;
}
