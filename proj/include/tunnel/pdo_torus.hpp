#pragma once

#include "tunnel/lattice.hpp"
#include "tunnel/model.hpp"

#include <complex>
#include <functional>
#include <vector>

namespace tunnel {

using Complex = std::complex<double>;
// Coefficient of one Fourier mode; one-variable symbols ignore y.
using Coefficient = std::function<Complex(const Vec& x, const Vec& y)>;

struct SymbolMode {
    std::vector<int> eta;
    Coefficient coefficient;
};

// q(x[, y], xi) = sum_eta c_eta(x[, y]) exp(-i eta.xi), a finite Fourier series in xi.
class PeriodicSymbol {
public:
    enum class Kind { one_variable, two_variable };

    explicit PeriodicSymbol(int dim = 1, Kind kind = Kind::one_variable);

    static PeriodicSymbol constant(int dim, Complex value);
    static PeriodicSymbol mode(int dim, std::vector<int> eta, Complex value = 1.0);
    // The kinetic symbol sum_eta a_eta(x; eps) exp(-i eta.xi) of a model.
    static PeriodicSymbol kinetic(const ModelSpec& m, double eps);

    void add(std::vector<int> eta, Coefficient c);

    int dim() const { return dim_; }
    Kind kind() const { return kind_; }
    const std::vector<SymbolMode>& modes() const { return modes_; }
    int max_reach() const;

    Complex operator()(const Vec& x, const CVec& xi) const { return (*this)(x, x, xi); }
    Complex operator()(const Vec& x, const Vec& y, const CVec& xi) const;

    // q*(x, xi) = conj(q(x, conj(xi))): modes -eta with conjugated coefficients.
    PeriodicSymbol adjoint() const;

    // Bookkeeping for the class S^k_delta; not used in evaluation.
    int order_k = 0;
    double order_delta = 0.0;

private:
    int dim_;
    Kind kind_;
    std::vector<SymbolMode> modes_;
};

// Quantization on the lattice eps*Z^d, u = 0 off the domain. One-variable symbols use
// c_eta((1-t)x + t(x + eps eta)); two-variable symbols use c_eta(x, x + eps eta) and ignore t.
CVec quantize(const PeriodicSymbol& q, double t, const LatticeDomain& dom, const CVec& u);

// Finite sum of plane waves b exp(i kappa.x) on R^d.
struct PlaneWaves {
    std::vector<Complex> amplitudes;
    std::vector<Vec> frequencies;

    Complex operator()(const Vec& x) const;
    CVec restrict_to(const LatticeDomain& dom) const;
};

// Max over lattice points (whose stencil stays in the domain) of the difference between the
// continuum quantization restricted to the lattice and the lattice quantization of the restriction.
double restriction_check(const PeriodicSymbol& q, const PlaneWaves& u, const LatticeDomain& dom);

struct ConvertedSymbol {
    std::vector<PeriodicSymbol> terms;  // eps^j coefficients a_{t,j}, j < N
    PeriodicSymbol exact;  // the one-variable symbol with Op~(a) = Op_t(exact) at the given eps

    // sum_{j<N} eps^j a_{t,j}
    PeriodicSymbol expansion(double eps, int upto = -1) const;
};

// Highest expansion order available from the finite-difference derivatives.
inline constexpr int max_conversion_terms = 5;

ConvertedSymbol convert_quantization(const PeriodicSymbol& a, double t, int N, double eps);

struct Weight {
    Field value;
    std::function<Vec(const Vec&)> gradient;
    // When set, the mean gradient along a segment is the gradient at its midpoint.
    bool quadratic = false;
};

// Mean gradient of the weight along the segment from x to y.
Vec mean_gradient(const Weight& psi, const Vec& x, const Vec& y);

// Symbol of e^{psi/eps} Op~(q) e^{-psi/eps}: mode eta picks up exp(-eta.Phi(x, x + eps eta)).
// One-variable input is treated as two-variable with t = 0.
PeriodicSymbol conjugate_weight(const PeriodicSymbol& q, const Weight& psi);
// Leading one-variable reduction q(x, x, xi - i grad psi(x)).
PeriodicSymbol conjugate_leading(const PeriodicSymbol& q, const Weight& psi);

struct GaussianWindow {
    double center = 0.0;
    double stiffness = 1.0;
    double eps = 1.0;

    double operator()(double xd) const;
};

struct CommutatorResult {
    CVec direct;
    CVec formula;
    double deviation = 0.0;
};

// [T, pi_s] u along the given axis (default: last), once directly and once through the
// shifted-momentum form sum_gamma a_gamma(x) u(x+gamma) e^{-(C0/2eps)((x_d-s)^2+(y_d-s)^2)} (-2 sinh(gamma_d C0 sigma/eps)).
CommutatorResult window_commutator(const ModelSpec& m, const GaussianWindow& w, const LatticeDomain& dom,
                                   const CVec& u, int axis = -1);

// f(z) = sum_n c_n exp(i n z).
struct FourierSeries {
    std::vector<int> n;
    std::vector<Complex> c;

    Complex operator()(Complex z) const;
};

struct ContourShift {
    Complex shifted;
    Complex real_line;
    double deviation = 0.0;
};

ContourShift contour_shift_check(const FourierSeries& f, double a);

struct LaplaceSample {
    double eps = 0.0;
    double sum = 0.0;  // eps^{d/2} sum_{x in eps Z^d} a(x) exp(-psi(x)/eps)
};

struct LaplaceResult {
    std::vector<LaplaceSample> samples;
    double J0 = 0.0;
    double remainder_order = 0.0;  // fitted slope of log|sum - J0| against log eps
};

// The lattice sum is taken over the box [lo, hi], which must contain the support of a.
LaplaceResult lattice_laplace(const Field& a, const Field& psi, const Vec& x0, const std::vector<double>& eps_list,
                              const Vec& lo, const Vec& hi);

struct SumIntegral {
    double sum = 0.0;  // h sum_{y in hZ, lo <= y <= hi} f(y)
    double integral = 0.0;
    double deviation = 0.0;
};

// One-dimensional lattice sum against the integral over [lo, hi]; f must vanish at both ends to all orders.
SumIntegral lattice_sum_vs_integral(const std::function<double(double)>& f, double lo, double hi, double h);

}  // namespace tunnel
