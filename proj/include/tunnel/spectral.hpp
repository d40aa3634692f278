#pragma once

#include "tunnel/lattice.hpp"
#include "tunnel/model.hpp"
#include "tunnel/operator.hpp"

#include <boost/multiprecision/float128.hpp>

#include <optional>
#include <string>
#include <vector>

namespace tunnel {

using quad = boost::multiprecision::float128;

enum class Precision { binary64, binary128 };
enum class SolverMethod { band, dense };

struct EigenOptions {
    Precision precision = Precision::binary128;
    SolverMethod method = SolverMethod::band;
    unsigned seed = 12345;
    // Dense fallback is allowed up to this size when inverse iteration fails.
    long dense_limit = 2048;
};

struct EigenPair {
    quad value = 0;
    // Unit l2-norm on the full lattice, zero outside the region it was computed on.
    std::vector<double> vector;
    double residual = 0.0;  // ||H v - value v|| in the working precision
    int index = 0;
    std::string tag;
};

// Lowest `count` eigenpairs of the operator restricted to M (full domain when M is everything).
// The sign is fixed so that the entry nearest to `anchor` is positive.
std::vector<EigenPair> dirichlet_eigs(const ModelSpec& m, const LatticeDomain& dom, const Region& M, int count,
                                      const EigenOptions& opt = {}, std::optional<Vec> anchor = std::nullopt,
                                      const std::string& tag = "");

std::vector<EigenPair> lowest_eigenpairs(const AssembledOperator& op, const LatticeDomain& dom, int count,
                                         const EigenOptions& opt, std::optional<Vec> anchor, const std::string& tag);

// Dense double-precision diagonalization, used as an independent check.
std::vector<EigenPair> dense_eigenpairs(const AssembledOperator& op, const LatticeDomain& dom, int count);

struct HarmonicData {
    Vec frequencies;  // square roots of the eigenvalues of 2 B Q (periodic axes excluded)
    double shift = 0.0;  // V1(well) + t1(well, 0)
    std::vector<double> levels;  // eps * (sum_i w_i (n_i + 1/2) + shift), ascending
};

HarmonicData harmonic_levels(const ModelSpec& m, const Vec& well, double eps, int count);

struct SpectralInterval {
    double lo = 0.0, hi = 0.0;
    double gap_margin = 0.0;  // distance from the interval to the nearest excluded Dirichlet eigenvalue
    double well_mismatch = 0.0;  // max |mu_j - mu_k| over selected pairs
    std::vector<EigenPair> selected;  // one per well, in the order of the regions
    std::vector<std::vector<EigenPair>> spectra;  // all computed Dirichlet eigenpairs per well
    std::vector<double> harmonic;  // harmonic prediction of the target level per well
};

SpectralInterval select_interval(const ModelSpec& m, const LatticeDomain& dom, const std::vector<Region>& regions,
                                 const std::vector<Vec>& wells, int target, const EigenOptions& opt = {});

// Symmetric eigenvalues of a small matrix in binary128 (cyclic Jacobi).
std::vector<quad> small_symmetric_eigenvalues(std::vector<std::vector<quad>> A);

}  // namespace tunnel
