#pragma once

#include "tunnel/config.hpp"
#include "tunnel/finsler.hpp"
#include "tunnel/spectral.hpp"
#include "tunnel/tunneling.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tunnel {

struct AsymptoticFit {
    double S = 0.0;  // log|w| = -S/eps + p log eps + c
    double p = 0.0;
    double c = 0.0;
    double r2 = 1.0;
    bool sign_change = false;
    int points = 0;
};

AsymptoticFit fit_asymptotics(const std::vector<double>& eps, const std::vector<double>& w);

class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& what)
        : std::runtime_error(stage + ": " + what), stage_(std::move(stage))
    {
    }
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

struct RunOptions {
    std::optional<std::string> out_dir;
    std::optional<std::vector<double>> eps;
    std::optional<int> level;
    std::optional<int> threads;
    std::optional<unsigned> seed;
};

// Config with command-line overrides applied and its invariants re-checked.
ExperimentConfig apply_overrides(ExperimentConfig cfg, const RunOptions& opt);

// Model hypotheses on a sample grid of the box, plus region and well consistency.
ValidationReport validate_experiment(const ExperimentConfig& cfg);

struct Geometry {
    Grid grid;
    DistanceField dj, dk;
    ResidualStats residual_j, residual_k;
    Geodesic geodesic;
    GeodesicManifold manifold;
    double S_jk = 0.0;
    int ell = 0;  // dimension of the crossing set
    EllipseRegion ellipse;
};

Geometry compute_geometry(const ExperimentConfig& cfg, int threads = 1);

struct SpectrumEntry {
    double eps = 0.0;
    long lattice_points = 0;
    SpectralInterval interval;
    std::vector<EigenPair> full;  // lowest eigenpairs of the full operator
    std::vector<EigenPair> inside;  // those inside the spectral interval
};

SpectrumEntry compute_spectrum(const ExperimentConfig& cfg, double eps);

struct SweepRow {
    double eps = 0.0;
    long lattice_points = 0;
    double S_jk = 0.0;
    double w_exact = 0.0, w_kj = 0.0, w_pred = 0.0, ratio = 0.0;
    double mu_j = 0.0, mu_k = 0.0;
    double splitting_exact = 0.0, splitting_model = 0.0, model_deviation = 0.0;
    double I0 = 0.0, b_j = 0.0, b_k = 0.0;
    double band_leading = 0.0;
};

struct TunnelingReport {
    std::vector<SweepRow> rows;
    AsymptoticFit fit;
    double S_jk = 0.0;
    int ell = 0;
    int N_j = 0, N_k = 0;
    double predicted_exponent = 0.5;
    bool sign_agrees = true;
    std::vector<Check> checks;
    std::vector<std::string> files;

    bool ok() const;
};

// validate -> eikonal -> geodesic/manifold -> Dirichlet eigenpairs -> interaction -> amplitudes -> I0 -> fit.
// Writes report.csv, spectrum.csv, field_j.csv, field_k.csv, geodesic.csv, fit.csv and manifest.json
// to cfg.out_dir when write is set. Stage failures throw StageError.
TunnelingReport run_pipeline(const ExperimentConfig& cfg, bool write = true);

// Per-eps interaction data for one sweep entry (eigenpairs, w, matrix, amplitudes, prediction).
SweepRow interaction_entry(const ExperimentConfig& cfg, const Geometry& geo, const SpectrumEntry& sp, int N_j, int N_k,
                           AmplitudeField* bj_out = nullptr, AmplitudeField* bk_out = nullptr);

std::string grid_label(const std::vector<long>& nodes);

void write_spectrum_csv(const std::string& path, const std::string& grid, const std::vector<SpectrumEntry>& entries);
void write_field_csv(const std::string& path, const DistanceField& f, const std::string& well);
void write_geodesic_csv(const std::string& path, const Geometry& geo);
void write_report_csv(const std::string& path, const std::string& grid, const TunnelingReport& rep);
void write_fit_csv(const std::string& path, const std::string& grid, const TunnelingReport& rep);
void write_manifest(const std::string& path, const ExperimentConfig& cfg, const TunnelingReport& rep);

struct PdoCheckResult {
    std::string name;
    int instances = 0;
    double worst = 0.0;
    double tolerance = 0.0;
    bool passed() const { return worst <= tolerance; }
};

// Randomized exactness suite: restriction, quadratic-weight conjugation, window commutator, contour shift.
std::vector<PdoCheckResult> pdo_check(unsigned seed, int instances = 20);

}  // namespace tunnel
