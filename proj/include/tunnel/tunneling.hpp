#pragma once

#include "tunnel/finsler.hpp"
#include "tunnel/lattice.hpp"
#include "tunnel/model.hpp"
#include "tunnel/spectral.hpp"

#include <string>
#include <vector>

namespace tunnel {

// w_jk = sum_{x not in M_k} sum_gamma a_gamma(x; eps) v_k(x + gamma) v_j(x).
double interaction_exact(const ModelSpec& m, const LatticeDomain& dom, const EigenPair& vj, const EigenPair& vk,
                         const Region& Mk);

struct InteractionResult {
    double eps = 0.0;
    double w_jk = 0.0, w_kj = 0.0;
    double w_tilde = 0.0;
    double mu_j = 0.0, mu_k = 0.0;
    double splitting_model = 0.0;
    double splitting_exact = 0.0;
    double S_jk = 0.0;
    double I0 = 0.0;
    double w_pred = 0.0;
    int N_j = 0, N_k = 0;
};

struct InteractionMatrix {
    std::vector<std::vector<quad>> gram;
    double gram_min_eigenvalue = 0.0;
    std::vector<std::vector<quad>> model;  // diag(mu) + w~, w~ = 0 within a well
    std::vector<quad> model_eigenvalues;  // ascending
    std::vector<quad> exact_eigenvalues;  // ascending
    std::vector<double> deviation;  // |model - exact| per pair, in ascending order
};

// well_of[a] names the well of pairs[a]; regions are indexed by well.
InteractionMatrix interaction_matrix(const ModelSpec& m, const LatticeDomain& dom, const std::vector<EigenPair>& pairs,
                                     const std::vector<int>& well_of, const std::vector<Region>& regions,
                                     const std::vector<EigenPair>& exact);

struct AmplitudeField {
    int well = 0;
    double eps = 0.0;
    int order = 0;  // N_m
    std::vector<double> b;  // per lattice point, NaN where masked
    // Multilinear interpolation between lattice points; NaN when a needed value is masked.
    double at(const LatticeDomain& dom, const Vec& x) const;
};

// b(x) = eps^{-d/4} exp(d(x)/eps) v(x), kept where d(x) <= rho eps log(1/eps_machine) and v is nonzero.
AmplitudeField amplitude_extract(const EigenPair& v, const DistanceField& d, const LatticeDomain& dom, int well,
                                 double rho = 1.0, Precision precision = Precision::binary128);

struct AmplitudeOrder {
    int N = 0;
    double slope = 0.0;  // fitted d log b / d log eps, about -N
};

// Leading order from the eps-scaling of b at a fixed point.
AmplitudeOrder amplitude_order(const std::vector<double>& eps, const std::vector<double>& b);

// sum_eta a^(0)_eta(y) eta_axis sinh(eta.grad); axis defaults to the last coordinate.
double current_sum(const ModelSpec& m, const Vec& y, const Vec& grad, int axis = -1);

// (2 pi)^{(d-1)/2} / sqrt(det D^2_perp) b_k current b_j; an empty Hessian contributes 1.
double I0_point(double bj, double bk, const Mat& hessian, double current);

// eps^{exponent} exp(-S/eps) I0
double predicted_interaction(double eps, double S, double I0, double exponent);

struct ManifoldIntegrand {
    std::vector<double> values;  // integrand per manifold node
    double I0 = 0.0;
};

// Quadrature over the geodesic manifold of (2 pi)^{(d-1-l)/2} / sqrt(det D^2_perp,G0) b_k current b_j.
ManifoldIntegrand I0_manifold(const AmplitudeField& bj, const AmplitudeField& bk, const LatticeDomain& dom,
                              const GeodesicManifold& gm, const ModelSpec& m, const DistanceField& dj, int axis = -1);

struct BandEstimate {
    double leading = 0.0;
    double lower = 0.0, upper = 0.0;
    bool bounds = false;  // false when the eigenfunctions are not positive on the band
    long band_points = 0;
};

struct BandSpec {
    int axis = 0;
    double value = 0.0;  // hyperplane x_axis = value
    double delta = 0.0;  // band width; <= 0 selects 2 * max offset length
};

// Leading form sum_{x in band} v_j v_k (t(x, grad d_j) - t(x, grad d_k)) with
// t(x, xi) = -sum_gamma 1[x + gamma across the hyperplane] a^(0)_gamma(x) exp(-eta.xi), and its convexity bounds.
BandEstimate band_estimate(const ModelSpec& m, const LatticeDomain& dom, const EigenPair& vj, const EigenPair& vk,
                               const DistanceField& dj, const DistanceField& dk, const Region& ellipse,
                               const BandSpec& band);

struct EllipseRegion {
    Region region;
    double S0 = 0.0, a = 0.0;
    double boundary_distance = 0.0;  // min over wells of the distance from the well to the boundary of its region
};

struct EllipseSpec {
    double a = 0.3;
    double R = 1.0;
    int axis = 0;
    double value = 0.0;
};

// E = {d_j + d_k <= S0 + a}. Checks a < 2 S - S0, E inside int M_j u int M_k and the R-band conditions on the
// grid nodes; throws std::invalid_argument listing offending points.
EllipseRegion ellipse_region(const DistanceField& dj, const DistanceField& dk, double S0, const EllipseSpec& spec,
                             const Region& Mj, const Region& Mk);

}  // namespace tunnel
