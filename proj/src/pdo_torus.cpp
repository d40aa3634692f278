#include "tunnel/pdo_torus.hpp"

#include "tunnel/numdiff.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <stdexcept>

namespace tunnel {

namespace {

constexpr Complex I{0.0, 1.0};

Vec offset(const std::vector<int>& eta, double scale)
{
    Vec v(static_cast<Eigen::Index>(eta.size()));
    for (size_t i = 0; i < eta.size(); ++i) v[static_cast<Eigen::Index>(i)] = scale * eta[i];
    return v;
}

// Finite-difference weights for the m-th derivative at 0 on the given nodes (Fornberg's recursion).
std::vector<double> fd_weights(int m, const std::vector<double>& nodes)
{
    const int n = static_cast<int>(nodes.size()) - 1;
    std::vector<std::vector<double>> c(static_cast<size_t>(n + 1), std::vector<double>(static_cast<size_t>(m + 1), 0.0));
    double c1 = 1.0;
    double c4 = nodes[0];
    c[0][0] = 1.0;
    for (int i = 1; i <= n; ++i) {
        const int mn = std::min(i, m);
        double c2 = 1.0;
        const double c5 = c4;
        c4 = nodes[static_cast<size_t>(i)];
        for (int j = 0; j < i; ++j) {
            const double c3 = nodes[static_cast<size_t>(i)] - nodes[static_cast<size_t>(j)];
            c2 *= c3;
            if (j == i - 1)
                for (int k = mn; k >= 1; --k)
                    c[static_cast<size_t>(i)][static_cast<size_t>(k)] =
                        c1 * (k * c[static_cast<size_t>(i - 1)][static_cast<size_t>(k - 1)] -
                              c5 * c[static_cast<size_t>(i - 1)][static_cast<size_t>(k)]) / c2;
            if (j == i - 1) c[static_cast<size_t>(i)][0] = -c1 * c5 * c[static_cast<size_t>(i - 1)][0] / c2;
            for (int k = mn; k >= 1; --k)
                c[static_cast<size_t>(j)][static_cast<size_t>(k)] =
                    (c4 * c[static_cast<size_t>(j)][static_cast<size_t>(k)] - k * c[static_cast<size_t>(j)][static_cast<size_t>(k - 1)]) / c3;
            c[static_cast<size_t>(j)][0] = c4 * c[static_cast<size_t>(j)][0] / c3;
        }
        c1 = c2;
    }
    std::vector<double> w(static_cast<size_t>(n + 1));
    for (int i = 0; i <= n; ++i) w[static_cast<size_t>(i)] = c[static_cast<size_t>(i)][static_cast<size_t>(m)];
    return w;
}

// j-th derivative at 0 of a scalar function of one variable, 9-point central stencil.
Complex derivative(const std::function<Complex(double)>& g, int j, double h)
{
    if (j == 0) return g(0.0);
    static const std::vector<double> nodes{0, -1, 1, -2, 2, -3, 3, -4, 4};
    const auto w = fd_weights(j, nodes);
    Complex s = 0.0;
    for (size_t i = 0; i < nodes.size(); ++i) s += w[i] * g(nodes[i] * h);
    return s / std::pow(h, j);
}

double factorial(int n)
{
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

}  // namespace

PeriodicSymbol::PeriodicSymbol(int dim, Kind kind) : dim_(dim), kind_(kind)
{
    if (dim < 1) throw std::invalid_argument("symbol dimension must be positive");
}

PeriodicSymbol PeriodicSymbol::constant(int dim, Complex value)
{
    return mode(dim, std::vector<int>(static_cast<size_t>(dim), 0), value);
}

PeriodicSymbol PeriodicSymbol::mode(int dim, std::vector<int> eta, Complex value)
{
    PeriodicSymbol q(dim);
    q.add(std::move(eta), [value](const Vec&, const Vec&) { return value; });
    return q;
}

PeriodicSymbol PeriodicSymbol::kinetic(const ModelSpec& m, double eps)
{
    PeriodicSymbol q(m.dim);
    const auto hop = std::make_shared<const HoppingFamily>(m.hopping);
    for (size_t k = 0; k < hop->terms.size(); ++k)
        q.add(hop->terms[k].eta,
              [hop, k, eps](const Vec& x, const Vec&) { return Complex(hop->coefficient(k, x, eps)); });
    return q;
}

void PeriodicSymbol::add(std::vector<int> eta, Coefficient c)
{
    if (static_cast<int>(eta.size()) != dim_) throw std::invalid_argument("mode dimension mismatch");
    modes_.push_back({std::move(eta), std::move(c)});
}

int PeriodicSymbol::max_reach() const
{
    int r = 0;
    for (const auto& md : modes_)
        for (int e : md.eta) r = std::max(r, std::abs(e));
    return r;
}

Complex PeriodicSymbol::operator()(const Vec& x, const Vec& y, const CVec& xi) const
{
    Complex s = 0.0;
    for (const auto& md : modes_) {
        Complex phase = 0.0;
        for (int a = 0; a < dim_; ++a) phase += static_cast<double>(md.eta[static_cast<size_t>(a)]) * xi[a];
        s += md.coefficient(x, y) * std::exp(-I * phase);
    }
    return s;
}

PeriodicSymbol PeriodicSymbol::adjoint() const
{
    PeriodicSymbol q(dim_, kind_);
    for (const auto& md : modes_) {
        std::vector<int> neg(md.eta.size());
        std::transform(md.eta.begin(), md.eta.end(), neg.begin(), [](int e) { return -e; });
        q.add(neg, [c = md.coefficient](const Vec& x, const Vec& y) { return std::conj(c(x, y)); });
    }
    q.order_k = order_k;
    q.order_delta = order_delta;
    return q;
}

CVec quantize(const PeriodicSymbol& q, double t, const LatticeDomain& dom, const CVec& u)
{
    if (q.dim() != dom.dim()) throw std::invalid_argument("symbol and lattice dimensions differ");
    if (u.size() != dom.size()) throw std::invalid_argument("lattice function size mismatch");
    const double eps = dom.eps();
    const bool two = q.kind() == PeriodicSymbol::Kind::two_variable;
    CVec out = CVec::Zero(u.size());
    for (long i = 0; i < dom.size(); ++i) {
        const Vec x = dom.point(i);
        Complex s = 0.0;
        for (const auto& md : q.modes()) {
            const long j = dom.shift(i, md.eta);
            if (j < 0) continue;
            const Vec y = x + offset(md.eta, eps);
            const Complex c = two ? md.coefficient(x, y) : md.coefficient((1 - t) * x + t * y, (1 - t) * x + t * y);
            s += c * u[j];
        }
        out[i] = s;
    }
    return out;
}

Complex PlaneWaves::operator()(const Vec& x) const
{
    Complex s = 0.0;
    for (size_t k = 0; k < amplitudes.size(); ++k) s += amplitudes[k] * std::exp(I * frequencies[k].dot(x));
    return s;
}

CVec PlaneWaves::restrict_to(const LatticeDomain& dom) const
{
    CVec u(dom.size());
    for (long i = 0; i < dom.size(); ++i) u[i] = (*this)(dom.point(i));
    return u;
}

double restriction_check(const PeriodicSymbol& q, const PlaneWaves& u, const LatticeDomain& dom)
{
    if (q.kind() != PeriodicSymbol::Kind::one_variable)
        throw std::invalid_argument("restriction check needs a one-variable symbol");
    const double eps = dom.eps();
    const CVec lattice = quantize(q, 0.0, dom, u.restrict_to(dom));
    const int reach = q.max_reach();
    double worst = 0.0;
    for (long i = 0; i < dom.size(); ++i) {
        const auto mi = dom.multi_index(i);
        bool interior = true;
        for (int a = 0; a < dom.dim(); ++a) {
            if (dom.periodic()[static_cast<size_t>(a)]) continue;
            const long m = mi[static_cast<size_t>(a)];
            interior = interior && m >= reach && m < dom.extent()[static_cast<size_t>(a)] - reach;
        }
        if (!interior) continue;
        const Vec x = dom.point(i);
        // Op_eps(q) exp(i kappa.x) = q(x, -eps kappa) exp(i kappa.x) for the phase convention exp(i(y-x)xi/eps).
        Complex continuum = 0.0;
        for (size_t k = 0; k < u.amplitudes.size(); ++k)
            continuum += u.amplitudes[k] * q(x, CVec((-eps * u.frequencies[k]).cast<Complex>())) *
                         std::exp(I * u.frequencies[k].dot(x));
        worst = std::max(worst, std::abs(continuum - lattice[i]));
    }
    return worst;
}

PeriodicSymbol ConvertedSymbol::expansion(double eps, int upto) const
{
    const int n = upto < 0 ? static_cast<int>(terms.size()) : std::min(upto, static_cast<int>(terms.size()));
    if (n == 0) throw std::invalid_argument("empty expansion");
    PeriodicSymbol q(terms.front().dim());
    for (int j = 0; j < n; ++j) {
        const double w = std::pow(eps, j);
        for (const auto& md : terms[static_cast<size_t>(j)].modes())
            q.add(md.eta, [c = md.coefficient, w](const Vec& x, const Vec& y) { return w * c(x, y); });
    }
    return q;
}

ConvertedSymbol convert_quantization(const PeriodicSymbol& a, double t, int N, double eps)
{
    if (N < 1 || N > max_conversion_terms)
        throw std::invalid_argument("expansion order beyond the finite-difference budget");
    if (t < 0.0 || t > 1.0) throw std::invalid_argument("quantization parameter outside [0, 1]");
    const int d = a.dim();
    ConvertedSymbol out{{}, PeriodicSymbol(d)};
    // Mode eta of the exact symbol is c_eta(x - t eps eta, x + (1 - t) eps eta).
    for (const auto& md : a.modes()) {
        const Vec e = offset(md.eta, eps);
        out.exact.add(md.eta, [c = md.coefficient, e, t](const Vec& x, const Vec&) { return c(x - t * e, x + (1 - t) * e); });
    }
    // a_{t,j} = (-1)^j / j! (d/ds)^j c_eta(x + t s eta, x - (1 - t) s eta) at s = 0.
    for (int j = 0; j < N; ++j) {
        PeriodicSymbol term(d);
        const double scale = (j % 2 ? -1.0 : 1.0) / factorial(j);
        for (const auto& md : a.modes()) {
            const Vec e = offset(md.eta, 1.0);
            term.add(md.eta, [c = md.coefficient, e, t, j, scale](const Vec& x, const Vec&) {
                auto g = [&](double s) { return c(x + t * s * e, x - (1 - t) * s * e); };
                return scale * derivative(g, j, 0.05);
            });
        }
        out.terms.push_back(std::move(term));
    }
    return out;
}

Vec mean_gradient(const Weight& psi, const Vec& x, const Vec& y)
{
    if (psi.quadratic) return psi.gradient(0.5 * (x + y));
    using GL = boost::math::quadrature::gauss<double, 16>;
    auto panel = [&](double a, double b) {
        Vec s = Vec::Zero(x.size());
        for (size_t k = 0; k < GL::abscissa().size(); ++k) {
            const double r = GL::abscissa()[k], w = GL::weights()[k];
            for (double sgn : {-1.0, 1.0}) {
                if (r == 0.0 && sgn > 0) continue;
                const double tt = 0.5 * (a + b) + sgn * 0.5 * (b - a) * r;
                s += 0.5 * (b - a) * w * psi.gradient((1 - tt) * x + tt * y);
            }
        }
        return s;
    };
    // Bisect until the two halves reproduce the panel.
    std::function<Vec(double, double, const Vec&, int)> adapt = [&](double a, double b, const Vec& whole, int depth) -> Vec {
        const double mid = 0.5 * (a + b);
        const Vec left = panel(a, mid), right = panel(mid, b);
        const Vec sum = left + right;
        if ((sum - whole).norm() <= 1e-14 * (1.0 + sum.norm()) * (b - a)) return sum;
        if (depth >= 14) throw std::runtime_error("mean-gradient quadrature did not converge");
        return adapt(a, mid, left, depth + 1) + adapt(mid, b, right, depth + 1);
    };
    return adapt(0.0, 1.0, panel(0.0, 1.0), 0);
}

PeriodicSymbol conjugate_weight(const PeriodicSymbol& q, const Weight& psi)
{
    PeriodicSymbol out(q.dim(), PeriodicSymbol::Kind::two_variable);
    const bool two = q.kind() == PeriodicSymbol::Kind::two_variable;
    for (const auto& md : q.modes()) {
        const Vec e = offset(md.eta, 1.0);
        out.add(md.eta, [c = md.coefficient, e, two, psi](const Vec& x, const Vec& y) {
            const Complex base = two ? c(x, y) : c(x, x);
            if (e.isZero()) return base;
            return base * std::exp(-e.dot(mean_gradient(psi, x, y)));
        });
    }
    out.order_k = q.order_k;
    out.order_delta = q.order_delta;
    return out;
}

PeriodicSymbol conjugate_leading(const PeriodicSymbol& q, const Weight& psi)
{
    PeriodicSymbol out(q.dim());
    for (const auto& md : q.modes()) {
        const Vec e = offset(md.eta, 1.0);
        out.add(md.eta, [c = md.coefficient, e, psi](const Vec& x, const Vec&) {
            return c(x, x) * std::exp(-e.dot(psi.gradient(x)));
        });
    }
    return out;
}

double GaussianWindow::operator()(double xd) const
{
    const double dx = xd - center;
    return std::sqrt(stiffness / (std::numbers::pi * eps)) * std::exp(-stiffness * dx * dx / eps);
}

CommutatorResult window_commutator(const ModelSpec& m, const GaussianWindow& w, const LatticeDomain& dom,
                                   const CVec& u, int axis)
{
    if (u.size() != dom.size()) throw std::invalid_argument("lattice function size mismatch");
    if (axis < 0) axis = m.dim - 1;
    if (axis >= m.dim) throw std::invalid_argument("window axis out of range");
    const double eps = dom.eps(), C0 = w.stiffness, s = w.center;
    const double norm = std::sqrt(C0 / (std::numbers::pi * eps));
    CommutatorResult r{CVec::Zero(u.size()), CVec::Zero(u.size()), 0.0};
    for (long i = 0; i < dom.size(); ++i) {
        const Vec x = dom.point(i);
        const double xd = x[axis];
        Complex direct = 0.0, formula = 0.0;
        for (size_t k = 0; k < m.hopping.terms.size(); ++k) {
            const auto& eta = m.hopping.terms[k].eta;
            const long j = dom.shift(i, eta);
            if (j < 0) continue;
            const double a = m.hopping.coefficient(k, x, eps);
            const double yd = xd + eps * eta[static_cast<size_t>(axis)];
            direct += a * (w(yd) - w(xd)) * u[j];
            const double sigma = 0.5 * (xd + yd) - s;
            const double envelope =
                norm * std::exp(-0.5 * C0 / eps * ((xd - s) * (xd - s) + (yd - s) * (yd - s)));
            formula += a * u[j] * envelope * (-2.0 * std::sinh(eta[static_cast<size_t>(axis)] * C0 * sigma));
        }
        r.direct[i] = direct;
        r.formula[i] = formula;
    }
    r.deviation = (r.direct - r.formula).cwiseAbs().maxCoeff();
    return r;
}

Complex FourierSeries::operator()(Complex z) const
{
    Complex s = 0.0;
    for (size_t k = 0; k < n.size(); ++k) s += c[k] * std::exp(I * static_cast<double>(n[k]) * z);
    return s;
}

ContourShift contour_shift_check(const FourierSeries& f, double a)
{
    using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
    const double pi = std::numbers::pi;
    auto integrate = [&](double shift) {
        const double re = GK::integrate([&](double x) { return f(Complex(x, shift)).real(); }, -pi, pi, 15, 1e-15);
        const double im = GK::integrate([&](double x) { return f(Complex(x, shift)).imag(); }, -pi, pi, 15, 1e-15);
        return Complex(re, im);
    };
    ContourShift r;
    r.shifted = integrate(a);
    r.real_line = integrate(0.0);
    r.deviation = std::abs(r.shifted - r.real_line);
    return r;
}

LaplaceResult lattice_laplace(const Field& a, const Field& psi, const Vec& x0, const std::vector<double>& eps_list,
                              const Vec& lo, const Vec& hi)
{
    const auto d = static_cast<int>(x0.size());
    if (lo.size() != d || hi.size() != d) throw std::invalid_argument("Laplace box dimension mismatch");
    const Mat D2 = fd_hessian(psi, x0);
    Eigen::LLT<Mat> llt(0.5 * (D2 + D2.transpose()));
    if (llt.info() != Eigen::Success) throw std::invalid_argument("phase Hessian is not positive definite");
    const double det = llt.matrixL().determinant();  // sqrt(det D2)
    LaplaceResult r;
    r.J0 = std::pow(2 * std::numbers::pi, 0.5 * d) * a(x0) / det;
    for (double eps : eps_list) {
        std::vector<long> first(static_cast<size_t>(d)), count(static_cast<size_t>(d));
        long total = 1;
        for (int k = 0; k < d; ++k) {
            first[static_cast<size_t>(k)] = static_cast<long>(std::ceil(lo[k] / eps));
            count[static_cast<size_t>(k)] = static_cast<long>(std::floor(hi[k] / eps)) - first[static_cast<size_t>(k)] + 1;
            total *= std::max(0L, count[static_cast<size_t>(k)]);
        }
        double sum = 0.0, comp = 0.0;
        Vec x(d);
        for (long idx = 0; idx < total; ++idx) {
            long rem = idx;
            for (int k = d - 1; k >= 0; --k) {
                x[k] = eps * static_cast<double>(first[static_cast<size_t>(k)] + rem % count[static_cast<size_t>(k)]);
                rem /= count[static_cast<size_t>(k)];
            }
            const double av = a(x);
            if (av == 0.0) continue;
            // Compensated summation.
            const double term = av * std::exp(-psi(x) / eps) - comp;
            const double next = sum + term;
            comp = (next - sum) - term;
            sum = next;
        }
        r.samples.push_back({eps, std::pow(eps, 0.5 * d) * sum});
    }
    // Least-squares slope of log|sum - J0| against log eps.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (const auto& s : r.samples) {
        const double e = std::abs(s.sum - r.J0);
        if (!(e > 0.0)) continue;
        const double lx = std::log(s.eps), ly = std::log(e);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++n;
    }
    r.remainder_order = n >= 2 ? (n * sxy - sx * sy) / (n * sxx - sx * sx) : std::numeric_limits<double>::quiet_NaN();
    return r;
}

SumIntegral lattice_sum_vs_integral(const std::function<double(double)>& f, double lo, double hi, double h)
{
    if (!(h > 0.0) || !(hi > lo)) throw std::invalid_argument("bad lattice sum interval");
    SumIntegral r;
    double comp = 0.0;
    for (long k = static_cast<long>(std::ceil(lo / h)); k * h <= hi; ++k) {
        const double term = h * f(static_cast<double>(k) * h) - comp;
        const double next = r.sum + term;
        comp = (next - r.sum) - term;
        r.sum = next;
    }
    boost::math::quadrature::tanh_sinh<double> ts;
    r.integral = ts.integrate(f, lo, hi);
    r.deviation = std::abs(r.sum - r.integral);
    return r;
}

}  // namespace tunnel
