#pragma once

#include "tunnel/lattice.hpp"
#include "tunnel/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace tunnel {

// Uniform tensor grid; a periodic axis of length P holds n nodes with spacing P/n.
class Grid {
public:
    Grid(const Vec& lo, const Vec& hi, std::vector<long> nodes, std::vector<bool> periodic = {});

    int dim() const { return static_cast<int>(n_.size()); }
    long size() const { return total_; }
    double spacing(int axis) const { return h_[static_cast<size_t>(axis)]; }
    const std::vector<long>& nodes() const { return n_; }
    const std::vector<bool>& periodic() const { return periodic_; }
    const Vec& lo() const { return lo_; }
    const Vec& hi() const { return hi_; }

    Vec node(long index) const;
    std::vector<long> multi_index(long index) const;
    long linear(std::vector<long> mi) const;  // -1 outside a non-periodic axis
    long neighbor(long index, int axis, int step) const;
    bool on_boundary(long index) const;
    long nearest(const Vec& x) const;
    Vec wrap(const Vec& dx) const;

    // Multilinear interpolation of node values (clamped to the box on non-periodic axes).
    double interpolate(const std::vector<double>& values, const Vec& x) const;
    Vec interpolate(const std::vector<Vec>& values, const Vec& x) const;

private:
    template <class T>
    T interpolate_impl(const std::vector<T>& values, const Vec& x, T zero) const;

    Vec lo_, hi_;
    std::vector<long> n_, stride_;
    std::vector<bool> periodic_;
    std::vector<double> h_;
    long total_ = 0;
};

struct DistanceField {
    Grid grid;
    std::vector<double> values;
    std::vector<Vec> gradients;  // central differences at the nodes
    Vec well;
    int sweeps = 0;
    double last_update = 0.0;

    double value(const Vec& x) const { return grid.interpolate(values, x); }
    Vec gradient(const Vec& x) const;
};

// Finsler length sup{xi.v : K(x, xi) <= V0(x)} of the tangent vector v at x.
double finsler_norm(const ModelSpec& m, const Vec& x, const Vec& v);
// The maximizing covector (zero where V0 vanishes).
Vec finsler_dual(const ModelSpec& m, const Vec& x, const Vec& v);

struct EikonalOptions {
    double tolerance = 1e-11;
    int max_sweeps = 4000;
    // Nodes within this radius (in units of the largest spacing) of the well are fixed by the quadratic model.
    double fixed_radius = 2.0;
    // Defect-correction passes toward the second-order scheme (0 keeps the first-order Lax-Friedrichs solution).
    int corrections = 30;
    double correction_tolerance = 1e-7;
    double damping = 0.125;
    // Under-relaxation of the Gauss-Seidel updates in the correction passes.
    double correction_relaxation = 0.8;
};

DistanceField eikonal_solve(const ModelSpec& m, const Vec& well, const Grid& grid, const EikonalOptions& opt = {});

// Dijkstra estimate on the grid graph with Finsler edge lengths (an upper bound of the distance).
std::vector<double> graph_distance(const ModelSpec& m, const Vec& well, const Grid& grid, double fixed_radius);

struct ResidualStats {
    double max_abs = 0.0;
    double mean_abs = 0.0;
    long count = 0;
    Vec worst_point;
};

// |K(x, grad d) - V0(x)| over interior nodes of `band` (box-boundary nodes excluded).
ResidualStats eikonal_residual(const ModelSpec& m, const DistanceField& d, const Region& band);

struct Trajectory {
    std::vector<double> t;
    std::vector<Vec> x, xi;
    double energy_drift = 0.0;
};

struct FlowOptions {
    double abs_tol = 1e-13;
    double rel_tol = 1e-13;
    double initial_step = 1e-3;
};

// Flow of h(x, xi) = K(x, xi) - V0(x): dx/dt = d_xi h, dxi/dt = -d_x h.
Trajectory hamiltonian_flow(const ModelSpec& m, const Vec& x0, const Vec& xi0, double horizon,
                            const FlowOptions& opt = {});
// Jacobian of the vector field at (x, xi); at a well it has eigenvalues +-frequencies.
Mat flow_linearization(const ModelSpec& m, const Vec& x, const Vec& xi);

struct Geodesic {
    std::vector<Vec> path;  // from well j through the crossing point to well k
    std::vector<double> action;  // cumulative Finsler length along the path
    Vec crossing;  // minimizer of d_j + d_k on the splitting hyperplane
    double S = 0.0;  // d_j + d_k at the crossing point
    double total_action = 0.0;
    double transversality = 0.0;  // |normal component| of the unit tangent at the crossing
    Mat hessian;  // transverse Hessian of d_j + d_k at the crossing, in hyperplane coordinates
    bool manifold = false;  // minimizer set is not an isolated point
};

struct HyperplaneSpec {
    int axis = 0;
    double value = 0.0;
};

Geodesic minimal_geodesic(const ModelSpec& m, const DistanceField& dj, const DistanceField& dk,
                          const HyperplaneSpec& H = {});

// Hessian of f along the orthonormal columns of dirs (an empty matrix when dirs has no columns).
Mat transverse_hessian(const Field& f, const Vec& y, const Mat& dirs, double h);

struct GeodesicManifold {
    int dimension = 0;
    double S = 0.0;
    std::vector<Vec> nodes;
    std::vector<double> weights;  // surface measure per node
    std::vector<Mat> normals;  // orthonormal normal frame inside the hyperplane, per node
    std::vector<Mat> hessians;  // transverse Hessians along the normal frames
};

GeodesicManifold manifold_detect(const DistanceField& dj, const DistanceField& dk, const HyperplaneSpec& H = {},
                                 double tolerance = -1.0);

}  // namespace tunnel
