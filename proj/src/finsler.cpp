#include "tunnel/finsler.hpp"

#include "tunnel/numdiff.hpp"

#include <boost/math/tools/roots.hpp>
#include <boost/math/tools/toms748_solve.hpp>
#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <queue>
#include <stdexcept>

namespace tunnel {

namespace {

void require_positive_B(const ModelSpec& m, const Vec& x)
{
    Eigen::SelfAdjointEigenSolver<Mat> es(kinetic_B(m, x));
    if (es.eigenvalues().minCoeff() <= 0.0)
        throw std::domain_error("kinetic matrix is not positive definite; Finsler norm unbounded");
}

// Solves grad_xi K(x, xi) = target by damped Newton, starting from xi.
Vec solve_gradient(const ModelSpec& m, const Vec& x, const Vec& target, Vec xi)
{
    Vec r = kinetic_grad(m, x, xi) - target;
    for (int it = 0; it < 100; ++it) {
        if (r.norm() <= 1e-15 * (1.0 + target.norm())) break;
        const Vec step = kinetic_hess(m, x, xi).ldlt().solve(r);
        double t = 1.0;
        bool moved = false;
        for (int ls = 0; ls < 60; ++ls) {
            const Vec trial = xi - t * step;
            const Vec rt = kinetic_grad(m, x, trial) - target;
            if (rt.norm() < r.norm()) {
                xi = trial;
                r = rt;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if (!moved) break;
    }
    return xi;
}

// Non-periodic axes of the model (all axes when no flags are set).
std::vector<int> confined_axes(const ModelSpec& m)
{
    std::vector<int> axes;
    for (int i = 0; i < m.dim; ++i)
        if (m.periodic.empty() || !m.periodic[static_cast<size_t>(i)]) axes.push_back(i);
    return axes;
}

// Quadratic approximation 0.5 y^T A y of the distance near a well, with A B A = Q/2.
Mat well_quadratic(const ModelSpec& m, const Vec& well)
{
    const auto axes = confined_axes(m);
    const auto k = static_cast<Eigen::Index>(axes.size());
    Mat A = Mat::Zero(m.dim, m.dim);
    if (k == 0) return A;
    const Mat Qf = potential_hessian(m, well), Bf = kinetic_B(m, well);
    Mat Q(k, k), B(k, k);
    for (Eigen::Index a = 0; a < k; ++a)
        for (Eigen::Index b = 0; b < k; ++b) {
            Q(a, b) = Qf(axes[a], axes[b]);
            B(a, b) = Bf(axes[a], axes[b]);
        }
    Eigen::SelfAdjointEigenSolver<Mat> eb(B);
    const Mat Bh = eb.operatorSqrt(), Bih = eb.operatorInverseSqrt();
    Eigen::SelfAdjointEigenSolver<Mat> inner(Bh * (0.5 * Q) * Bh);
    const Mat Ak = Bih * inner.operatorSqrt() * Bih;
    for (Eigen::Index a = 0; a < k; ++a)
        for (Eigen::Index b = 0; b < k; ++b) A(axes[a], axes[b]) = Ak(a, b);
    return A;
}

Vec confined_offset(const ModelSpec& m, const Grid& g, const Vec& x, const Vec& well)
{
    Vec y = g.wrap(x - well);
    if (!m.periodic.empty())
        for (int i = 0; i < m.dim; ++i)
            if (m.periodic[static_cast<size_t>(i)]) y[i] = 0.0;
    return y;
}

// Largest |d K / d xi_axis| over the momentum set {K(.) <= V}, sampled on its boundary.
// kin(p) and grad(p, g) take arrays of length d <= 3.
template <class Kin, class Grad>
Vec viscosity_bound(int d, double V, Kin kin, Grad grad)
{
    Vec best = Vec::Zero(d);
    if (V <= 0.0) return best;
    std::vector<std::array<double, 3>> dirs;
    if (d == 1) {
        dirs = {{1.0, 0.0, 0.0}, {-1.0, 0.0, 0.0}};
    } else if (d == 2) {
        for (int i = 0; i < 64; ++i) {
            const double th = 2 * std::numbers::pi * i / 64;
            dirs.push_back({std::cos(th), std::sin(th), 0.0});
        }
    } else {
        const int n = 64 * d;
        for (int i = 0; i < n; ++i) {
            const double z = 1.0 - 2.0 * (i + 0.5) / n;
            const double r = std::sqrt(std::max(0.0, 1 - z * z));
            const double th = std::numbers::pi * (3.0 - std::sqrt(5.0)) * i;
            dirs.push_back({r * std::cos(th), r * std::sin(th), z});
        }
    }
    std::array<double, 3> p{}, g{};
    for (const auto& e : dirs) {
        auto at_radius = [&](double r) {
            for (int a = 0; a < d; ++a) p[static_cast<size_t>(a)] = r * e[static_cast<size_t>(a)];
        };
        auto f = [&](double r) {
            at_radius(r);
            const double val = kin(p.data()) - V;
            grad(p.data(), g.data());
            double slope = 0.0;
            for (int a = 0; a < d; ++a) slope += g[static_cast<size_t>(a)] * e[static_cast<size_t>(a)];
            return std::make_pair(val, slope);
        };
        double lo = 0.0, hi = 1.0;
        while (f(hi).first < 0.0 && hi < 1e3) {
            lo = hi;
            hi *= 2;
        }
        const double r = boost::math::tools::newton_raphson_iterate(f, 0.5 * (lo + hi), lo, hi, 40);
        at_radius(r);
        grad(p.data(), g.data());
        for (int a = 0; a < d; ++a) best[a] = std::max(best[a], std::abs(g[static_cast<size_t>(a)]));
    }
    return best;
}


constexpr int max_sweep_dim = 3;

// Leading kinetic term sampled at the grid nodes: K(p) = sum_k w_k(x) (cosh(eta_k.p) - 1).
class NodeKinetic {
public:
    NodeKinetic(const ModelSpec& m, const Grid& g) : d_(g.dim())
    {
        std::vector<size_t> terms;
        for (size_t k = 0; k < m.hopping.terms.size(); ++k) {
            const auto& eta = m.hopping.terms[k].eta;
            if (std::all_of(eta.begin(), eta.end(), [](int e) { return e == 0; })) continue;
            terms.push_back(k);
            for (int e : eta) eta_.push_back(e);
        }
        t_ = terms.size();
        w_.resize(t_ * static_cast<size_t>(g.size()));
        for (long i = 0; i < g.size(); ++i) {
            const Vec x = g.node(i);
            for (size_t k = 0; k < t_; ++k) w_[static_cast<size_t>(i) * t_ + k] = -m.hopping.leading(terms[k], x);
        }
    }

    double value(long i, const double* p) const
    {
        double s = 0.0;
        for (size_t k = 0; k < t_; ++k) s += w_[static_cast<size_t>(i) * t_ + k] * (std::cosh(phase(k, p)) - 1.0);
        return s;
    }

    void gradient(long i, const double* p, double* g) const
    {
        for (int a = 0; a < d_; ++a) g[a] = 0.0;
        for (size_t k = 0; k < t_; ++k) {
            const double c = w_[static_cast<size_t>(i) * t_ + k] * std::sinh(phase(k, p));
            for (int a = 0; a < d_; ++a) g[a] += c * eta_[k * static_cast<size_t>(d_) + static_cast<size_t>(a)];
        }
    }

    // Value and gradient together, sharing one exponential per term.
    double value_gradient(long i, const double* p, double* g) const
    {
        for (int a = 0; a < d_; ++a) g[a] = 0.0;
        double s = 0.0;
        for (size_t k = 0; k < t_; ++k) {
            const double w = w_[static_cast<size_t>(i) * t_ + k];
            const double e = std::exp(phase(k, p)), r = 1.0 / e;
            s += w * (0.5 * (e + r) - 1.0);
            const double c = w * 0.5 * (e - r);
            for (int a = 0; a < d_; ++a) g[a] += c * eta_[k * static_cast<size_t>(d_) + static_cast<size_t>(a)];
        }
        return s;
    }

private:
    double phase(size_t k, const double* p) const
    {
        double s = 0.0;
        for (int a = 0; a < d_; ++a) s += eta_[k * static_cast<size_t>(d_) + static_cast<size_t>(a)] * p[a];
        return s;
    }

    int d_;
    size_t t_ = 0;
    std::vector<double> eta_, w_;
};

}  // namespace

Vec finsler_dual(const ModelSpec& m, const Vec& x, const Vec& v)
{
    const Eigen::Index d = x.size();
    const double V = m.potential.leading(x);
    if (V <= 0.0 || v.norm() == 0.0) return Vec::Zero(d);
    require_positive_B(m, x);
    const Mat B = kinetic_B(m, x);
    const Vec Binv_v = B.ldlt().solve(v);
    double mu = 2.0 * std::sqrt(V / v.dot(Binv_v));
    Vec xi = 0.5 * mu * Binv_v;
    auto excess = [&](double log_mu) {
        xi = solve_gradient(m, x, std::exp(log_mu) * v, xi);
        return std::log(kinetic(m, x, xi)) - std::log(V);
    };
    double a = std::log(mu), b = a;
    double fa = excess(a), fb = fa;
    if (fa == 0.0) return xi;
    const double step = fa > 0 ? -0.5 : 0.5;
    for (int it = 0; it < 200 && (fa > 0) == (fb > 0); ++it) {
        a = b;
        fa = fb;
        b += step;
        fb = excess(b);
    }
    if ((fa > 0) == (fb > 0)) throw std::runtime_error("Finsler norm: failed to bracket the constraint");
    boost::uintmax_t iters = 200;
    auto tol = [](double l, double r) { return std::abs(r - l) <= 1e-15 * (1.0 + std::abs(l)); };
    const auto root = boost::math::tools::toms748_solve(excess, std::min(a, b), std::max(a, b),
                                                        a < b ? fa : fb, a < b ? fb : fa, tol, iters);
    excess(0.5 * (root.first + root.second));
    return xi;
}

double finsler_norm(const ModelSpec& m, const Vec& x, const Vec& v)
{
    return finsler_dual(m, x, v).dot(v);
}

std::vector<double> graph_distance(const ModelSpec& m, const Vec& well, const Grid& grid, double fixed_radius)
{
    const int d = grid.dim();
    double hmax = 0.0;
    for (int a = 0; a < d; ++a) hmax = std::max(hmax, grid.spacing(a));
    const Mat A = well_quadratic(m, well);
    std::vector<double> dist(static_cast<size_t>(grid.size()), std::numeric_limits<double>::infinity());
    using Item = std::pair<double, long>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    for (long i = 0; i < grid.size(); ++i) {
        const Vec y = confined_offset(m, grid, grid.node(i), well);
        if (y.norm() <= fixed_radius * hmax) {
            dist[static_cast<size_t>(i)] = 0.5 * y.dot(A * y);
            pq.emplace(dist[static_cast<size_t>(i)], i);
        }
    }
    if (pq.empty()) throw std::invalid_argument("well lies outside the grid");
    std::vector<std::vector<int>> offsets;
    long total = 1;
    for (int a = 0; a < d; ++a) total *= 3;
    for (long c = 0; c < total; ++c) {
        std::vector<int> o(static_cast<size_t>(d));
        long r = c;
        bool zero = true;
        for (int a = 0; a < d; ++a) {
            o[static_cast<size_t>(a)] = static_cast<int>(r % 3) - 1;
            zero = zero && o[static_cast<size_t>(a)] == 0;
            r /= 3;
        }
        if (!zero) offsets.push_back(o);
    }
    while (!pq.empty()) {
        const auto [du, i] = pq.top();
        pq.pop();
        if (du > dist[static_cast<size_t>(i)]) continue;
        const auto mi = grid.multi_index(i);
        const Vec xi = grid.node(i);
        for (const auto& o : offsets) {
            auto mj = mi;
            Vec step(d);
            for (int a = 0; a < d; ++a) {
                mj[static_cast<size_t>(a)] += o[static_cast<size_t>(a)];
                step[a] = o[static_cast<size_t>(a)] * grid.spacing(a);
            }
            const long j = grid.linear(mj);
            if (j < 0) continue;
            const double w = finsler_norm(m, xi + 0.5 * step, step);
            if (du + w < dist[static_cast<size_t>(j)]) {
                dist[static_cast<size_t>(j)] = du + w;
                pq.emplace(du + w, j);
            }
        }
    }
    return dist;
}

DistanceField eikonal_solve(const ModelSpec& m, const Vec& well, const Grid& grid, const EikonalOptions& opt)
{
    if (well.size() != grid.dim() || m.dim != grid.dim()) throw std::invalid_argument("eikonal: dimension mismatch");
    const int d = grid.dim();
    if (d > max_sweep_dim) throw std::invalid_argument("eikonal: dimension above " + std::to_string(max_sweep_dim));
    const long n = grid.size();
    const auto at = [](long i) { return static_cast<size_t>(i); };
    double hmax = 0.0;
    std::array<double, max_sweep_dim> h{};
    for (int a = 0; a < d; ++a) {
        h[static_cast<size_t>(a)] = grid.spacing(a);
        hmax = std::max(hmax, grid.spacing(a));
    }

    DistanceField f{grid, graph_distance(m, well, grid, opt.fixed_radius), {}, well};
    auto& u = f.values;
    const NodeKinetic K(m, grid);

    // neighbours[2 (d i + a) + (s > 0)] for steps s = -1, +1
    std::vector<long> nb(static_cast<size_t>(2 * d * n));
    for (long i = 0; i < n; ++i)
        for (int a = 0; a < d; ++a) {
            nb[at(2 * (d * i + a))] = grid.neighbor(i, a, -1);
            nb[at(2 * (d * i + a) + 1)] = grid.neighbor(i, a, 1);
        }

    std::vector<char> fixed(at(n), 0);
    std::vector<double> sigma(at(d * n)), V(at(n));
    double smax = 0.0;
    for (long i = 0; i < n; ++i) {
        const Vec x = grid.node(i);
        fixed[at(i)] = confined_offset(m, grid, x, well).norm() <= opt.fixed_radius * hmax;
        V[at(i)] = m.potential.leading(x);
        const Vec b = viscosity_bound(
            d, V[at(i)], [&](const double* p) { return K.value(i, p); },
            [&](const double* p, double* g) { K.gradient(i, p, g); });
        for (int a = 0; a < d; ++a) sigma[at(d * i + a)] = b[a];
        smax = std::max(smax, b.maxCoeff());
    }
    // Use the largest bound over the axis neighbours; the discrete gradient samples a neighbourhood.
    std::vector<double> sig = sigma;
    for (long i = 0; i < n; ++i)
        for (int e = 0; e < 2 * d; ++e) {
            const long j = nb[at(2 * d * i + e)];
            if (j < 0) continue;
            for (int a = 0; a < d; ++a) sig[at(d * i + a)] = std::max(sig[at(d * i + a)], sigma[at(d * j + a)]);
        }
    const double floor = 1e-2 * smax + 1e-12;
    for (auto& s : sig) s = std::max(1.1 * s, floor);

    using Point = std::array<double, max_sweep_dim>;
    // Keep the momentum inside a range where cosh does not overflow.
    const auto clamp_p = [](double v) { return std::clamp(v, -30.0, 30.0); };

    // Outflow condition on the box boundary. Missing axes use the second-order one-sided difference
    // through the next two interior nodes; the node value is the smallest root of K(x, p(u)) = V0(x)
    // with outward-pointing one-sided slopes.
    double omega = 1.0;
    std::vector<long> boundary;
    for (long i = 0; i < n; ++i)
        if (grid.on_boundary(i) && !fixed[at(i)]) boundary.push_back(i);
    auto outflow = [&](long i) {
        Point p{}, base{}, outward{};
        double lo = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < d; ++a) {
            const auto k = static_cast<size_t>(a);
            const long dn = nb[at(2 * (d * i + a))], up = nb[at(2 * (d * i + a) + 1)];
            if (up >= 0 && dn >= 0) {
                p[k] = clamp_p((u[at(up)] - u[at(dn)]) / (2 * h[k]));
                continue;
            }
            const int dir = up >= 0 ? 1 : -1;  // towards the interior
            const long in1 = up >= 0 ? up : dn, in2 = grid.neighbor(in1, a, dir);
            base[k] = (4 * u[at(in1)] - u[at(in2)]) / 3;
            outward[k] = -dir;
            lo = std::max(lo, base[k]);
        }
        auto excess = [&](double ui) {
            Point q = p;
            for (size_t k = 0; k < static_cast<size_t>(d); ++k)
                if (outward[k] != 0.0) q[k] = clamp_p(outward[k] * 3 * (ui - base[k]) / (2 * h[k]));
            return K.value(i, q.data()) - V[at(i)];
        };
        double hi = lo;
        if (excess(lo) < 0.0) {
            double step = hmax;
            hi = lo + step;
            while (excess(hi) < 0.0 && step < 1e3) {
                lo = hi;
                step *= 2;
                hi = lo + step;
            }
            if (excess(hi) >= 0.0) {
                std::uintmax_t iters = 100;
                const auto r = boost::math::tools::toms748_solve(excess, lo, hi, boost::math::tools::eps_tolerance<double>(50), iters);
                lo = r.first;
                hi = r.second;
            }
        }
        u[at(i)] += omega * (0.5 * (lo + hi) - u[at(i)]);
    };
    auto extrapolate = [&]() {
        for (long i : boundary) outflow(i);
    };

    std::vector<long> order;
    for (long i = 0; i < n; ++i)
        if (!fixed[at(i)] && !grid.on_boundary(i)) order.push_back(i);

    // Central discrete gradient and a viscosity that dominates |dK/dp| there, so the update stays monotone.
    // During defect correction the viscosity stays at its lagged value, the same one used in the defect.
    std::vector<double> frozen;
    auto local = [&](long i, Point& p, Point& s) {
        for (int a = 0; a < d; ++a)
            p[static_cast<size_t>(a)] =
                clamp_p((u[at(nb[at(2 * (d * i + a) + 1)])] - u[at(nb[at(2 * (d * i + a))])]) / (2 * h[static_cast<size_t>(a)]));
        const double k = K.value_gradient(i, p.data(), s.data());
        for (int a = 0; a < d; ++a)
            s[static_cast<size_t>(a)] = frozen.empty() ? std::max(sig[at(d * i + a)], 1.1 * std::abs(s[static_cast<size_t>(a)]))
                                                       : frozen[at(d * i + a)];
        return k;
    };

    // Lagged defect of the second-order scheme against the first-order one; zero in the first pass.
    std::vector<double> defect(at(n), 0.0);
    auto update = [&](long i) {
        Point p{}, s{};
        const double H = local(i, p, s) - V[at(i)];
        double num = 0.0, den = 0.0;
        for (int a = 0; a < d; ++a) {
            const auto k = static_cast<size_t>(a);
            const double up = u[at(nb[at(2 * (d * i + a) + 1)])], dn = u[at(nb[at(2 * (d * i + a))])];
            num += s[k] * (up + dn) / (2 * h[k]);
            den += s[k] / h[k];
        }
        const double nu = u[at(i)] + omega * ((num - H - defect[at(i)]) / den - u[at(i)]);
        const double change = std::abs(nu - u[at(i)]);
        u[at(i)] = nu;
        return change;
    };
    // Viscous term of the first-order scheme minus the fourth-difference damping of the second-order one.
    auto lagged_defect = [&](long i) {
        Point p{}, s{};
        local(i, p, s);
        double c = 0.0;
        const double ui = u[at(i)];
        for (int a = 0; a < d; ++a) {
            const auto k = static_cast<size_t>(a);
            const double u1 = u[at(nb[at(2 * (d * i + a) + 1)])], um1 = u[at(nb[at(2 * (d * i + a))])];
            c += s[k] * (u1 + um1 - 2 * ui) / (2 * h[k]);
            const long up2 = grid.neighbor(i, a, 2), dn2 = grid.neighbor(i, a, -2);
            if (up2 >= 0 && dn2 >= 0)
                c += opt.damping * s[k] * (u[at(dn2)] - 4 * um1 + 6 * ui - 4 * u1 + u[at(up2)]) / h[k];
        }
        return c;
    };

    // Alternate the 2^d sweep orientations.
    const int orientations = 1 << d;
    std::vector<std::vector<long>> orders(static_cast<size_t>(orientations));
    std::vector<std::vector<long>> keys(at(n));
    for (long i : order) keys[at(i)] = grid.multi_index(i);
    for (int o = 0; o < orientations; ++o) {
        auto& ord = orders[static_cast<size_t>(o)];
        ord = order;
        std::sort(ord.begin(), ord.end(), [&](long a, long b) {
            const auto &ma = keys[at(a)], &mb = keys[at(b)];
            for (int k = 0; k < d; ++k) {
                const bool rev = (o >> k) & 1;
                const long xa = ma[static_cast<size_t>(k)], xb = mb[static_cast<size_t>(k)];
                if (xa != xb) return rev ? xa > xb : xa < xb;
            }
            return false;
        });
    }
    int sweeps = 0;
    auto relax = [&](double tolerance) {
        extrapolate();
        double change = 0.0;
        for (int sweep = 0; sweep < opt.max_sweeps; ++sweep) {
            ++sweeps;
            change = 0.0;
            for (long i : orders[static_cast<size_t>(sweep % orientations)]) change = std::max(change, update(i));
            extrapolate();
            if (change <= tolerance) break;
        }
        f.last_update = change;
        if (!(change <= tolerance))
            throw std::runtime_error("eikonal sweeps did not converge: last update " + std::to_string(change));
    };
    relax(opt.tolerance);
    double shift = std::numeric_limits<double>::infinity();
    for (int pass = 0; pass < opt.corrections; ++pass) {
        const std::vector<double> prev = u;
        frozen.clear();
        std::vector<double> lagged(at(d * n), 0.0);
        for (long i : order) {
            defect[at(i)] = lagged_defect(i);
            Point p{}, s{};
            local(i, p, s);
            for (int a = 0; a < d; ++a) lagged[at(d * i + a)] = s[static_cast<size_t>(a)];
        }
        frozen = std::move(lagged);
        omega = opt.correction_relaxation;
        relax(std::max(opt.tolerance, 1e-3 * std::min(shift, 1.0)));
        shift = 0.0;
        for (long i = 0; i < n; ++i) shift = std::max(shift, std::abs(u[at(i)] - prev[at(i)]));
        if (shift <= opt.correction_tolerance) break;
    }
    if (opt.corrections > 0) relax(opt.tolerance);
    frozen.clear();
    omega = 1.0;
    f.sweeps = sweeps;

    f.gradients.assign(at(n), Vec::Zero(d));
    for (long i = 0; i < n; ++i) {
        Vec g(d);
        for (int a = 0; a < d; ++a) {
            const long up = grid.neighbor(i, a, 1), dn = grid.neighbor(i, a, -1);
            const double ha = grid.spacing(a);
            if (up >= 0 && dn >= 0)
                g[a] = (u[at(up)] - u[at(dn)]) / (2 * ha);
            else if (up >= 0)
                g[a] = (-3 * u[at(i)] + 4 * u[at(up)] - u[at(grid.neighbor(i, a, 2))]) / (2 * ha);
            else
                g[a] = (3 * u[at(i)] - 4 * u[at(dn)] + u[at(grid.neighbor(i, a, -2))]) / (2 * ha);
        }
        f.gradients[at(i)] = g;
    }
    return f;
}

ResidualStats eikonal_residual(const ModelSpec& m, const DistanceField& f, const Region& band)
{
    ResidualStats st;
    double sum = 0.0;
    for (long i = 0; i < f.grid.size(); ++i) {
        if (f.grid.on_boundary(i)) continue;
        const Vec x = f.grid.node(i);
        if (!band.contains(x)) continue;
        const double r = std::abs(h0_tilde(m, x, f.gradients[static_cast<size_t>(i)]));
        sum += r;
        ++st.count;
        if (r > st.max_abs) {
            st.max_abs = r;
            st.worst_point = x;
        }
    }
    st.mean_abs = st.count ? sum / static_cast<double>(st.count) : 0.0;
    return st;
}

Trajectory hamiltonian_flow(const ModelSpec& m, const Vec& x0, const Vec& xi0, double horizon, const FlowOptions& opt)
{
    namespace ode = boost::numeric::odeint;
    using State = std::vector<double>;
    const int d = m.dim;
    if (x0.size() != d || xi0.size() != d) throw std::invalid_argument("flow: dimension mismatch");
    auto split = [d](const State& s, Vec& x, Vec& xi) {
        x = Eigen::Map<const Vec>(s.data(), d);
        xi = Eigen::Map<const Vec>(s.data() + d, d);
    };
    auto rhs = [&](const State& s, State& ds, double) {
        Vec x, xi;
        split(s, x, xi);
        const Vec dx = kinetic_grad(m, x, xi);
        const Vec dxi = -h0_tilde_grad_x(m, x, xi);
        for (int a = 0; a < d; ++a) {
            ds[static_cast<size_t>(a)] = dx[a];
            ds[static_cast<size_t>(d + a)] = dxi[a];
        }
    };
    State s(static_cast<size_t>(2 * d));
    for (int a = 0; a < d; ++a) {
        s[static_cast<size_t>(a)] = x0[a];
        s[static_cast<size_t>(d + a)] = xi0[a];
    }
    Trajectory tr;
    const double e0 = h0_tilde(m, x0, xi0);
    auto observe = [&](const State& st, double t) {
        Vec x, xi;
        split(st, x, xi);
        if (!x.allFinite() || !xi.allFinite()) throw std::runtime_error("flow left the finite range");
        tr.t.push_back(t);
        tr.x.push_back(x);
        tr.xi.push_back(xi);
        tr.energy_drift = std::max(tr.energy_drift, std::abs(h0_tilde(m, x, xi) - e0));
    };
    try {
        auto stepper = ode::make_controlled(opt.abs_tol, opt.rel_tol, ode::runge_kutta_dopri5<State>());
        ode::integrate_adaptive(stepper, rhs, s, 0.0, horizon, opt.initial_step, observe);
    } catch (const std::exception& e) {
        std::string where = tr.t.empty() ? "start" : "t=" + std::to_string(tr.t.back());
        throw std::runtime_error(std::string("Hamiltonian flow failed at ") + where + ": " + e.what());
    }
    return tr;
}

Mat flow_linearization(const ModelSpec& m, const Vec& x, const Vec& xi)
{
    const int d = m.dim;
    auto field = [&](const Vec& z) {
        const Vec a = z.head(d), b = z.tail(d);
        Vec out(2 * d);
        out.head(d) = kinetic_grad(m, a, b);
        out.tail(d) = -h0_tilde_grad_x(m, a, b);
        return out;
    };
    Vec z(2 * d);
    z << x, xi;
    Mat J(2 * d, 2 * d);
    const double h = 1e-4;
    for (int c = 0; c < 2 * d; ++c) {
        Vec p = z, q = z, p2 = z, q2 = z;
        p[c] += h;
        q[c] -= h;
        p2[c] += 2 * h;
        q2[c] -= 2 * h;
        J.col(c) = (8 * (field(p) - field(q)) - (field(p2) - field(q2))) / (12 * h);
    }
    return J;
}

Mat transverse_hessian(const Field& f, const Vec& y, const Mat& dirs, double h)
{
    if (dirs.cols() == 0) return Mat(0, 0);
    return fd_hessian_along(f, y, dirs, h);
}

namespace {

struct HyperplaneSample {
    std::vector<Vec> points;
    std::vector<double> values;
    std::vector<std::vector<long>> index;  // multi-index over the remaining axes
    std::vector<long> extent;
    std::vector<int> axes;
};

HyperplaneSample sample_hyperplane(const DistanceField& dj, const DistanceField& dk, const HyperplaneSpec& H)
{
    const Grid& g = dj.grid;
    const int d = g.dim();
    if (H.axis < 0 || H.axis >= d) throw std::invalid_argument("hyperplane axis out of range");
    HyperplaneSample hs;
    for (int a = 0; a < d; ++a)
        if (a != H.axis) {
            hs.axes.push_back(a);
            hs.extent.push_back(g.nodes()[static_cast<size_t>(a)]);
        }
    long total = 1;
    for (long e : hs.extent) total *= e;
    for (long c = 0; c < total; ++c) {
        std::vector<long> mi(hs.axes.size());
        long r = c;
        for (size_t k = hs.axes.size(); k-- > 0;) {
            mi[k] = r % hs.extent[k];
            r /= hs.extent[k];
        }
        Vec y(d);
        y[H.axis] = H.value;
        for (size_t k = 0; k < hs.axes.size(); ++k)
            y[hs.axes[k]] = g.lo()[hs.axes[k]] + static_cast<double>(mi[k]) * g.spacing(hs.axes[k]);
        hs.points.push_back(y);
        hs.values.push_back(dj.value(y) + dk.value(y));
        hs.index.push_back(mi);
    }
    return hs;
}

Mat hyperplane_dirs(int d, const std::vector<int>& axes)
{
    Mat D = Mat::Zero(d, static_cast<Eigen::Index>(axes.size()));
    for (size_t k = 0; k < axes.size(); ++k) D(axes[k], static_cast<Eigen::Index>(k)) = 1.0;
    return D;
}

// Follow -d_xi K(x, grad d) from y towards the well of d.
std::vector<Vec> descend(const ModelSpec& m, const DistanceField& f, const Vec& y, double step)
{
    std::vector<Vec> pts;
    Vec x = y;
    double prev = f.value(x);
    const double stop = 4 * step * step;
    for (int it = 0; it < 200000; ++it) {
        const Vec dir = kinetic_grad(m, x, f.gradient(x));
        const double nrm = dir.norm();
        if (nrm == 0.0) break;
        // Midpoint step along the characteristic direction.
        const Vec half = x - 0.5 * step * dir / nrm;
        const Vec dir2 = kinetic_grad(m, half, f.gradient(half));
        if (dir2.norm() == 0.0) break;
        const Vec next = x - step * dir2 / dir2.norm();
        const double val = f.value(next);
        if (val >= prev || val <= stop) break;
        x = next;
        prev = val;
        pts.push_back(x);
    }
    return pts;
}

Vec well_projection(const ModelSpec& m, const Vec& x, const Vec& well)
{
    Vec w = well;
    if (!m.periodic.empty())
        for (int i = 0; i < m.dim; ++i)
            if (m.periodic[static_cast<size_t>(i)]) w[i] = x[i];
    return w;
}

}  // namespace

Geodesic minimal_geodesic(const ModelSpec& m, const DistanceField& dj, const DistanceField& dk, const HyperplaneSpec& H)
{
    const Grid& g = dj.grid;
    const int d = g.dim();
    const auto hs = sample_hyperplane(dj, dk, H);
    const auto best = static_cast<size_t>(std::min_element(hs.values.begin(), hs.values.end()) - hs.values.begin());
    Vec y0 = hs.points[best];
    Field f = [&](const Vec& y) { return dj.value(y) + dk.value(y); };
    // Parabolic refinement along each hyperplane axis.
    for (size_t k = 0; k < hs.axes.size(); ++k) {
        const int a = hs.axes[k];
        const double h = g.spacing(a);
        const double fm = f(y0 - h * Vec::Unit(d, a)), f0 = f(y0), fp = f(y0 + h * Vec::Unit(d, a));
        const double curv = fp - 2 * f0 + fm;
        if (curv > 1e-14 && !g.periodic()[static_cast<size_t>(a)] && hs.index[best][k] > 0 &&
            hs.index[best][k] < hs.extent[k] - 1)
            y0[a] += 0.5 * h * (fm - fp) / curv;
    }
    Geodesic geo;
    geo.crossing = y0;
    geo.S = f(y0);
    double hstep = 0.0;
    for (int a : hs.axes) hstep = std::max(hstep, g.spacing(a));
    geo.hessian = transverse_hessian(f, y0, hyperplane_dirs(d, hs.axes), 2 * hstep);
    if (geo.hessian.size() > 0) {
        Eigen::SelfAdjointEigenSolver<Mat> es(geo.hessian);
        const double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().cwiseAbs().maxCoeff();
        geo.manifold = lo < 1e-3 * std::max(1.0, hi);
    }

    const Vec tangent = kinetic_grad(m, y0, dj.gradient(y0));
    if (tangent.norm() == 0.0) throw std::runtime_error("geodesic: vanishing direction at the crossing point");
    geo.transversality = std::abs(tangent[H.axis]) / tangent.norm();
    if (geo.transversality <= 1e-3) throw std::runtime_error("geodesic does not cross the hyperplane transversally");

    double hmin = std::numeric_limits<double>::infinity();
    for (int a = 0; a < d; ++a) hmin = std::min(hmin, g.spacing(a));
    auto to_j = descend(m, dj, y0, 0.5 * hmin);
    auto to_k = descend(m, dk, y0, 0.5 * hmin);
    geo.path.push_back(well_projection(m, to_j.empty() ? y0 : to_j.back(), dj.well));
    for (auto it = to_j.rbegin(); it != to_j.rend(); ++it) geo.path.push_back(*it);
    geo.path.push_back(y0);
    for (const auto& p : to_k) geo.path.push_back(p);
    geo.path.push_back(well_projection(m, to_k.empty() ? y0 : to_k.back(), dk.well));
    geo.action.push_back(0.0);
    for (size_t i = 1; i < geo.path.size(); ++i) {
        const Vec step = geo.path[i] - geo.path[i - 1];
        geo.action.push_back(geo.action.back() + finsler_norm(m, geo.path[i - 1] + 0.5 * step, step));
    }
    geo.total_action = geo.action.back();
    return geo;
}

GeodesicManifold manifold_detect(const DistanceField& dj, const DistanceField& dk, const HyperplaneSpec& H,
                                 double tolerance)
{
    const Grid& g = dj.grid;
    const int d = g.dim();
    const auto hs = sample_hyperplane(dj, dk, H);
    const auto best = static_cast<size_t>(std::min_element(hs.values.begin(), hs.values.end()) - hs.values.begin());
    GeodesicManifold gm;
    gm.S = hs.values[best];
    if (tolerance < 0) tolerance = 1e-6 * std::max(1.0, gm.S);

    // Connected component of the sublevel set containing the minimizer.
    const size_t ns = hs.points.size();
    std::vector<char> in(ns, 0), seen(ns, 0);
    for (size_t i = 0; i < ns; ++i) in[i] = hs.values[i] <= gm.S + tolerance;
    auto flat = [&](std::vector<long> mi) -> long {
        long idx = 0;
        for (size_t k = 0; k < mi.size(); ++k) {
            const bool per = g.periodic()[static_cast<size_t>(hs.axes[k])];
            if (per) mi[k] = ((mi[k] % hs.extent[k]) + hs.extent[k]) % hs.extent[k];
            else if (mi[k] < 0 || mi[k] >= hs.extent[k]) return -1;
            idx = idx * hs.extent[k] + mi[k];
        }
        return idx;
    };
    std::vector<size_t> comp;
    std::vector<size_t> stack{best};
    seen[best] = 1;
    while (!stack.empty()) {
        const size_t i = stack.back();
        stack.pop_back();
        comp.push_back(i);
        for (size_t k = 0; k < hs.axes.size(); ++k)
            for (int s : {-1, 1}) {
                auto mi = hs.index[i];
                mi[k] += s;
                const long j = flat(mi);
                if (j < 0 || seen[static_cast<size_t>(j)] || !in[static_cast<size_t>(j)]) continue;
                seen[static_cast<size_t>(j)] = 1;
                stack.push_back(static_cast<size_t>(j));
            }
    }
    std::sort(comp.begin(), comp.end());

    const auto q = static_cast<Eigen::Index>(hs.axes.size());
    double hmax = 0.0;
    for (int a : hs.axes) hmax = std::max(hmax, g.spacing(a));
    Mat tangent(d, 0);
    if (comp.size() > 1 && q > 0) {
        Mat C = Mat::Zero(q, q);
        std::vector<Vec> rel;
        Vec mean = Vec::Zero(q);
        for (size_t i : comp) {
            const Vec dx = g.wrap(hs.points[i] - hs.points[best]);
            Vec r(q);
            for (Eigen::Index k = 0; k < q; ++k) r[k] = dx[hs.axes[static_cast<size_t>(k)]];
            rel.push_back(r);
            mean += r;
        }
        mean /= static_cast<double>(rel.size());
        for (const auto& r : rel) C += (r - mean) * (r - mean).transpose();
        C /= static_cast<double>(rel.size());
        Eigen::SelfAdjointEigenSolver<Mat> es(C);
        const Vec sd = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
        int ell = 0;
        for (Eigen::Index k = 0; k < q; ++k) {
            if (sd[k] > 2 * hmax) ++ell;
            else if (sd[k] > 0.5 * hmax) throw std::runtime_error("ambiguous geodesic manifold dimension");
        }
        gm.dimension = ell;
        tangent = Mat::Zero(d, ell);
        for (int t = 0; t < ell; ++t) {
            const Vec ev = es.eigenvectors().col(q - 1 - t);
            for (Eigen::Index k = 0; k < q; ++k) tangent(hs.axes[static_cast<size_t>(k)], t) = ev[k];
        }
    }

    // Normal frame inside the hyperplane: complement of the tangent space.
    Mat normal(d, 0);
    if (q > 0) {
        Mat P = hyperplane_dirs(d, hs.axes);
        if (tangent.cols() > 0) P -= tangent * (tangent.transpose() * P);
        Eigen::JacobiSVD<Mat> svd(P, Eigen::ComputeThinU);
        int rank = 0;
        for (Eigen::Index k = 0; k < svd.singularValues().size(); ++k)
            if (svd.singularValues()[k] > 1e-8) ++rank;
        normal = svd.matrixU().leftCols(rank);
    }

    Field f = [&](const Vec& y) { return dj.value(y) + dk.value(y); };
    if (gm.dimension == 0) {
        gm.nodes.push_back(hs.points[best]);
        gm.weights.push_back(1.0);
    } else if (gm.dimension == q) {
        double cell = 1.0;
        for (int a : hs.axes) cell *= g.spacing(a);
        for (size_t i : comp) {
            gm.nodes.push_back(hs.points[i]);
            gm.weights.push_back(cell);
        }
    } else if (gm.dimension == 1) {
        std::vector<std::pair<double, size_t>> ord;
        for (size_t i : comp) ord.emplace_back(g.wrap(hs.points[i] - hs.points[best]).dot(tangent.col(0)), i);
        std::sort(ord.begin(), ord.end());
        for (size_t r = 0; r < ord.size(); ++r) {
            double w = 0.0;
            if (r > 0) w += 0.5 * (ord[r].first - ord[r - 1].first);
            if (r + 1 < ord.size()) w += 0.5 * (ord[r + 1].first - ord[r].first);
            gm.nodes.push_back(hs.points[ord[r].second]);
            gm.weights.push_back(w);
        }
    } else {
        throw std::runtime_error("geodesic manifolds of dimension " + std::to_string(gm.dimension) +
                                 " inside a hyperplane of dimension " + std::to_string(q) + " are not supported");
    }
    for (const auto& y : gm.nodes) {
        gm.normals.push_back(normal);
        gm.hessians.push_back(transverse_hessian(f, y, normal, 2 * hmax));
    }
    return gm;
}

}  // namespace tunnel
