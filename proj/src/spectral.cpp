#include "tunnel/spectral.hpp"

#include "tunnel/banded.hpp"
#include "tunnel/numdiff.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace tunnel {

namespace {

template <class Real>
Real abs_r(const Real& v)
{
    return v < 0 ? -v : v;
}

template <class Real>
Real sqrt_r(const Real& v)
{
    using std::sqrt;
    using boost::multiprecision::sqrt;
    return sqrt(v);
}

SymBand<double> to_band(const AssembledOperator& op)
{
    const long n = static_cast<long>(op.points.size());
    SymBand<double> A(n, std::max(op.bandwidth, 0));
    for (int k = 0; k < op.H.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(op.H, k); it; ++it)
            if (it.row() >= it.col()) A.at(it.row(), it.col()) = it.value();
    return A;
}

// k-th eigenvalue (0-based) inside [lo, hi] by bisection on inertia counts.
template <class Real>
Real bisect(const SymBand<Real>& A, long k, Real lo, Real hi, Real width)
{
    for (int it = 0; it < 400 && hi - lo > width; ++it) {
        const Real mid = (lo + hi) / 2;
        if (mid <= lo || mid >= hi) break;
        if (A.count_below(mid) <= k)
            lo = mid;
        else
            hi = mid;
    }
    return (lo + hi) / 2;
}

template <class Real>
void normalize(std::vector<Real>& v)
{
    Real s = 0;
    for (const auto& x : v) s += x * x;
    s = sqrt_r(s);
    for (auto& x : v) x /= s;
}

template <class Real>
struct BandResult {
    std::vector<Real> values;
    std::vector<std::vector<Real>> vectors;
    std::vector<double> residuals;
    bool converged = true;
};

template <class Real>
BandResult<Real> band_solve(const SymBand<double>& Ad, int count, unsigned seed)
{
    const long n = Ad.size();
    auto [glo, ghi] = Ad.gershgorin();
    const double scale = std::max({std::abs(glo), std::abs(ghi), 1.0});
    glo -= 1e-3 * scale;
    ghi += 1e-3 * scale;

    std::vector<double> coarse(static_cast<size_t>(count));
    double lo = glo;
    for (int k = 0; k < count; ++k) {
        coarse[k] = bisect<double>(Ad, k, lo, ghi, 8 * std::numeric_limits<double>::epsilon() * scale);
        lo = std::max(glo, coarse[k] - 1e-9 * scale);
    }

    BandResult<Real> res;
    const SymBand<Real> A = Ad.template cast<Real>();
    const Real rscale = Real(scale);
    const Real reps = std::numeric_limits<Real>::epsilon();
    for (int k = 0; k < count; ++k) {
        Real value = Real(coarse[k]);
        if constexpr (!std::is_same_v<Real, double>) {
            Real delta = Real(1e-10) * rscale;
            Real a = value - delta, b = value + delta;
            for (int tries = 0; tries < 40; ++tries) {
                if (A.count_below(a) <= k) break;
                a -= delta;
                delta *= 4;
            }
            delta = Real(1e-10) * rscale;
            for (int tries = 0; tries < 40; ++tries) {
                if (A.count_below(b) > k) break;
                b += delta;
                delta *= 4;
            }
            value = bisect<Real>(A, k, a, b, 8 * reps * rscale);
        }
        res.values.push_back(value);
    }

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int k = 0; k < count; ++k) {
        const Real lambda = res.values[k];
        std::vector<size_t> cluster;
        for (int j = 0; j < k; ++j)
            if (abs_r(res.values[j] - lambda) < Real(1e-7) * rscale) cluster.push_back(static_cast<size_t>(j));
        std::vector<Real> v(static_cast<size_t>(n));
        for (auto& x : v) x = Real(uni(rng));
        normalize(v);
        double resid = 0.0;
        for (int it = 0; it < 8; ++it) {
            v = A.solve_shifted(lambda, v);
            for (size_t j : cluster) {
                Real p = 0;
                for (long i = 0; i < n; ++i) p += v[i] * res.vectors[j][i];
                for (long i = 0; i < n; ++i) v[i] -= p * res.vectors[j][i];
            }
            normalize(v);
            const auto Av = A.multiply(v);
            Real r = 0;
            for (long i = 0; i < n; ++i) r += (Av[i] - lambda * v[i]) * (Av[i] - lambda * v[i]);
            resid = static_cast<double>(sqrt_r(r));
            if (it >= 1 && resid <= 1e3 * static_cast<double>(reps) * scale) break;
        }
        if (!(resid <= 1e5 * static_cast<double>(reps) * scale)) res.converged = false;
        res.vectors.push_back(std::move(v));
        res.residuals.push_back(resid);
    }
    return res;
}

void fix_sign(EigenPair& p, const LatticeDomain& dom, const std::optional<Vec>& anchor)
{
    double ref = 0.0;
    if (anchor) ref = p.vector[static_cast<size_t>(dom.nearest(*anchor))];
    const double vmax = *std::max_element(p.vector.begin(), p.vector.end(),
                                          [](double a, double b) { return std::abs(a) < std::abs(b); });
    if (std::abs(ref) < 1e-8 * std::abs(vmax)) ref = vmax;
    if (ref < 0)
        for (auto& x : p.vector) x = -x;
}

}  // namespace

std::vector<EigenPair> dense_eigenpairs(const AssembledOperator& op, const LatticeDomain& dom, int count)
{
    const Mat H = Mat(op.H);
    Eigen::SelfAdjointEigenSolver<Mat> es(H);
    if (es.info() != Eigen::Success) throw std::runtime_error("dense eigensolver failed");
    std::vector<EigenPair> out;
    for (int k = 0; k < std::min<long>(count, H.rows()); ++k) {
        EigenPair p;
        p.value = es.eigenvalues()[k];
        p.index = k;
        p.vector.assign(static_cast<size_t>(dom.size()), 0.0);
        const Vec v = es.eigenvectors().col(k);
        for (size_t r = 0; r < op.points.size(); ++r) p.vector[static_cast<size_t>(op.points[r])] = v[static_cast<Eigen::Index>(r)];
        p.residual = (H * v - es.eigenvalues()[k] * v).norm();
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<EigenPair> lowest_eigenpairs(const AssembledOperator& op, const LatticeDomain& dom, int count,
                                         const EigenOptions& opt, std::optional<Vec> anchor, const std::string& tag)
{
    const long n = static_cast<long>(op.points.size());
    if (count < 1 || count > n) throw std::invalid_argument("requested eigenpair count out of range");
    std::vector<EigenPair> out;
    auto scatter = [&](const auto& vec) {
        std::vector<double> full(static_cast<size_t>(dom.size()), 0.0);
        for (long r = 0; r < n; ++r) full[static_cast<size_t>(op.points[r])] = static_cast<double>(vec[r]);
        return full;
    };
    bool done = false;
    if (opt.method == SolverMethod::band) {
        const auto A = to_band(op);
        auto fill = [&](const auto& res) {
            if (!res.converged) return false;
            for (int k = 0; k < count; ++k) {
                EigenPair p;
                p.value = quad(res.values[k]);
                p.vector = scatter(res.vectors[k]);
                p.residual = res.residuals[k];
                p.index = k;
                out.push_back(std::move(p));
            }
            return true;
        };
        if (opt.precision == Precision::binary128)
            done = fill(band_solve<quad>(A, count, opt.seed));
        else
            done = fill(band_solve<double>(A, count, opt.seed));
        if (!done) {
            if (n > opt.dense_limit) throw std::runtime_error("inverse iteration did not converge");
            spdlog::warn("inverse iteration did not converge, falling back to dense solve (n={})", n);
        }
    }
    if (!done) out = dense_eigenpairs(op, dom, count);
    for (auto& p : out) {
        p.tag = tag;
        fix_sign(p, dom, anchor);
    }
    return out;
}

std::vector<EigenPair> dirichlet_eigs(const ModelSpec& m, const LatticeDomain& dom, const Region& M, int count,
                                      const EigenOptions& opt, std::optional<Vec> anchor, const std::string& tag)
{
    const auto op = assemble(m, dom, M);
    if (op.asymmetry > 1e-12) spdlog::warn("assembled operator asymmetric by {:.3e}, symmetrized", op.asymmetry);
    return lowest_eigenpairs(op, dom, count, opt, std::move(anchor), tag);
}

HarmonicData harmonic_levels(const ModelSpec& m, const Vec& well, double eps, int count)
{
    std::vector<int> axes;
    for (int i = 0; i < m.dim; ++i)
        if (m.periodic.empty() || !m.periodic[static_cast<size_t>(i)]) axes.push_back(i);
    const auto k = static_cast<Eigen::Index>(axes.size());
    HarmonicData h;
    h.frequencies = Vec::Zero(k);
    if (k > 0) {
        const Mat Qf = potential_hessian(m, well);
        const Mat Bf = kinetic_B(m, well);
        Mat Q(k, k), B(k, k);
        for (Eigen::Index a = 0; a < k; ++a)
            for (Eigen::Index b = 0; b < k; ++b) {
                Q(a, b) = Qf(axes[a], axes[b]);
                B(a, b) = Bf(axes[a], axes[b]);
            }
        Eigen::SelfAdjointEigenSolver<Mat> eb(B);
        if (eb.eigenvalues().minCoeff() <= 0) throw std::invalid_argument("kinetic matrix not positive at well");
        const Mat Bh = eb.operatorSqrt();
        Eigen::SelfAdjointEigenSolver<Mat> es(2.0 * Bh * Q * Bh);
        if (es.eigenvalues().minCoeff() <= 0) throw std::invalid_argument("well is degenerate");
        h.frequencies = es.eigenvalues().cwiseSqrt();
    }
    double t1 = 0.0;
    for (const auto& t : m.hopping.terms)
        if (t.orders.size() > 1) t1 += t.orders[1](well);
    h.shift = m.potential.correction(well) + t1;

    std::vector<double> levels;
    std::vector<int> n(static_cast<size_t>(k), 0);
    const int cap = std::max(count, 1);
    for (;;) {
        double e = h.shift;
        for (Eigen::Index a = 0; a < k; ++a) e += h.frequencies[a] * (n[static_cast<size_t>(a)] + 0.5);
        levels.push_back(eps * e);
        size_t a = 0;
        while (a < n.size() && ++n[a] >= cap) n[a++] = 0;
        if (a == n.size()) break;
    }
    std::sort(levels.begin(), levels.end());
    levels.resize(static_cast<size_t>(std::min<long>(count, static_cast<long>(levels.size()))));
    h.levels = levels;
    return h;
}

SpectralInterval select_interval(const ModelSpec& m, const LatticeDomain& dom, const std::vector<Region>& regions,
                                 const std::vector<Vec>& wells, int target, const EigenOptions& opt)
{
    if (regions.size() != wells.size() || regions.size() < 2)
        throw std::invalid_argument("need one region per well and at least two wells");
    for (size_t r = 0; r < regions.size(); ++r)
        for (size_t s = 0; s < wells.size(); ++s)
            if (r != s && regions[r].contains(wells[s]))
                throw std::invalid_argument("region of well " + std::to_string(r) + " contains well " +
                                            std::to_string(s));
    SpectralInterval si;
    const int count = target + 3;
    double center = 0.0, half = std::numeric_limits<double>::infinity();
    for (size_t r = 0; r < regions.size(); ++r) {
        auto eig = dirichlet_eigs(m, dom, regions[r], count, opt, wells[r], "well" + std::to_string(r));
        const double mu = static_cast<double>(eig[target].value);
        center += mu / static_cast<double>(regions.size());
        if (target > 0) half = std::min(half, mu - static_cast<double>(eig[target - 1].value));
        half = std::min(half, static_cast<double>(eig[target + 1].value) - mu);
        try {
            si.harmonic.push_back(harmonic_levels(m, wells[r], dom.eps(), target + 1).levels.back());
        } catch (const std::invalid_argument&) {
            si.harmonic.push_back(std::nan(""));
        }
        si.spectra.push_back(std::move(eig));
    }
    half *= 0.4;
    si.lo = center - half;
    si.hi = center + half;
    si.gap_margin = std::numeric_limits<double>::infinity();
    for (size_t r = 0; r < regions.size(); ++r) {
        int inside = 0;
        for (const auto& p : si.spectra[r]) {
            const double v = static_cast<double>(p.value);
            if (v >= si.lo && v <= si.hi) {
                ++inside;
                si.selected.push_back(p);
            } else {
                si.gap_margin = std::min(si.gap_margin, std::min(std::abs(v - si.lo), std::abs(v - si.hi)));
            }
        }
        if (inside != 1)
            throw std::runtime_error("no common spectral interval: well " + std::to_string(r) + " has " +
                                     std::to_string(inside) + " eigenvalues in the candidate interval");
    }
    for (size_t a = 0; a < si.selected.size(); ++a)
        for (size_t b = 0; b < a; ++b)
            si.well_mismatch = std::max(
                si.well_mismatch, std::abs(static_cast<double>(si.selected[a].value - si.selected[b].value)));
    return si;
}

std::vector<quad> small_symmetric_eigenvalues(std::vector<std::vector<quad>> A)
{
    const size_t n = A.size();
    for (int sweep = 0; sweep < 100; ++sweep) {
        quad off = 0;
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < i; ++j) off += A[i][j] * A[i][j];
        if (off == 0) break;
        for (size_t p = 0; p < n; ++p)
            for (size_t q = p + 1; q < n; ++q) {
                if (A[p][q] == 0) continue;
                const quad theta = (A[q][q] - A[p][p]) / (2 * A[p][q]);
                const quad t = (theta >= 0 ? quad(1) : quad(-1)) /
                               (abs_r(theta) + boost::multiprecision::sqrt(theta * theta + 1));
                const quad c = 1 / boost::multiprecision::sqrt(t * t + 1);
                const quad s = t * c;
                for (size_t k = 0; k < n; ++k) {
                    const quad akp = A[k][p], akq = A[k][q];
                    A[k][p] = c * akp - s * akq;
                    A[k][q] = s * akp + c * akq;
                }
                for (size_t k = 0; k < n; ++k) {
                    const quad apk = A[p][k], aqk = A[q][k];
                    A[p][k] = c * apk - s * aqk;
                    A[q][k] = s * apk + c * aqk;
                }
            }
    }
    std::vector<quad> ev(n);
    for (size_t i = 0; i < n; ++i) ev[i] = A[i][i];
    std::sort(ev.begin(), ev.end());
    return ev;
}

}  // namespace tunnel
