#pragma once

#include <Eigen/Dense>

#include <complex>
#include <functional>
#include <string>
#include <vector>

namespace tunnel {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using Field = std::function<double(const Vec&)>;

// One stencil offset eta (the lattice offset is eps*eta) with its expansion
// a(x; eps) = sum_k eps^k orders[k](x).
struct HoppingTerm {
    std::vector<int> eta;
    std::vector<Field> orders;
    std::vector<std::string> sources;
};

struct HoppingFamily {
    int dim = 1;
    int order = 1;
    double decay_rate = 1.0;
    // Replace a_gamma(x) by the average of a_gamma(x) and a_{-gamma}(x+gamma); exact symmetry
    // at the cost of an O(eps^order) change inside the truncated remainder.
    bool symmetrize = false;
    std::vector<HoppingTerm> terms;

    int find(const std::vector<int>& eta) const;
    double leading(size_t term, const Vec& x) const;
    double truncated(size_t term, const Vec& x, double eps) const;
    double coefficient(size_t term, const Vec& x, double eps) const;
    int max_reach() const;
    double max_offset_length() const;
};

struct PotentialExpansion {
    std::vector<Field> orders;
    std::vector<std::string> sources;
    std::vector<Vec> wells;

    double leading(const Vec& x) const { return orders.empty() ? 0.0 : orders[0](x); }
    double value(const Vec& x, double eps) const;
    double correction(const Vec& x) const { return orders.size() > 1 ? orders[1](x) : 0.0; }
};

struct ModelSpec {
    int dim = 1;
    HoppingFamily hopping;
    PotentialExpansion potential;
    // Axes along which wells may be degenerate (periodic directions of the intended domain).
    std::vector<bool> periodic;

    void check_structure() const;
};

// Full symbol sum_eta a_eta(x; eps) exp(-i eta.xi).
std::complex<double> symbol_t(const ModelSpec& m, const Vec& x, const CVec& xi, double eps);
// Leading symbol, even in xi: sum_eta a^(0)_eta(x) cos(eta.xi) for real xi.
std::complex<double> symbol_t0(const ModelSpec& m, const Vec& x, const CVec& xi);

// K(x,p) = sum_{eta != 0} (-a^(0)_eta(x)) (cosh(eta.p) - 1); the rotated leading Hamiltonian is K - V0.
double kinetic(const ModelSpec& m, const Vec& x, const Vec& p);
Vec kinetic_grad(const ModelSpec& m, const Vec& x, const Vec& p);
Mat kinetic_hess(const ModelSpec& m, const Vec& x, const Vec& p);
double h0_tilde(const ModelSpec& m, const Vec& x, const Vec& p);
// Gradient of K - V0 with respect to x (finite differences).
Vec h0_tilde_grad_x(const ModelSpec& m, const Vec& x, const Vec& p);

Mat kinetic_B(const ModelSpec& m, const Vec& x);
Mat potential_hessian(const ModelSpec& m, const Vec& x);
Vec potential_gradient(const ModelSpec& m, const Vec& x);

struct Check {
    std::string name;
    bool passed = true;
    double worst = 0.0;
    std::string detail;
};

struct ValidationReport {
    std::vector<Check> checks;
    bool ok() const;
    const Check* find(const std::string& name) const;
    std::string summary() const;
};

ValidationReport validate_model(const ModelSpec& m, const std::vector<Vec>& samples, double eps);

}  // namespace tunnel
