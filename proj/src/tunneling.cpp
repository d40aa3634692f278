#include "tunnel/tunneling.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace tunnel {

namespace {

int resolve_axis(int axis, int d) { return axis < 0 ? d - 1 : axis; }

bool nonzero_offset(const std::vector<int>& eta)
{
    return std::any_of(eta.begin(), eta.end(), [](int e) { return e != 0; });
}

Vec as_vec(const std::vector<int>& eta)
{
    Vec v(static_cast<Eigen::Index>(eta.size()));
    for (size_t i = 0; i < eta.size(); ++i) v[static_cast<Eigen::Index>(i)] = eta[i];
    return v;
}

std::string format_points(const std::vector<Vec>& pts)
{
    std::ostringstream os;
    const size_t shown = std::min<size_t>(pts.size(), 5);
    for (size_t i = 0; i < shown; ++i) {
        os << (i ? "; (" : "(");
        for (Eigen::Index k = 0; k < pts[i].size(); ++k) os << (k ? ", " : "") << pts[i][k];
        os << ")";
    }
    if (pts.size() > shown) os << "; ... " << pts.size() << " in total";
    return os.str();
}

}  // namespace

double interaction_exact(const ModelSpec& m, const LatticeDomain& dom, const EigenPair& vj, const EigenPair& vk,
                         const Region& Mk)
{
    if (static_cast<long>(vj.vector.size()) != dom.size() || static_cast<long>(vk.vector.size()) != dom.size())
        throw std::invalid_argument("eigenvector size does not match the lattice");
    const double eps = dom.eps();
    quad sum = 0;
    long terms = 0;
    for (long i = 0; i < dom.size(); ++i) {
        const double uj = vj.vector[static_cast<size_t>(i)];
        if (uj == 0.0) continue;
        const Vec x = dom.point(i);
        if (Mk.contains(x)) continue;
        for (size_t t = 0; t < m.hopping.terms.size(); ++t) {
            const long y = dom.shift(i, m.hopping.terms[t].eta);
            if (y < 0) continue;
            const double uk = vk.vector[static_cast<size_t>(y)];
            if (uk == 0.0) continue;
            sum += quad(m.hopping.coefficient(t, x, eps)) * quad(uk) * quad(uj);
            ++terms;
        }
    }
    if (terms == 0) spdlog::warn("interaction band is empty, w = 0");
    return static_cast<double>(sum);
}

InteractionMatrix interaction_matrix(const ModelSpec& m, const LatticeDomain& dom, const std::vector<EigenPair>& pairs,
                                     const std::vector<int>& well_of, const std::vector<Region>& regions,
                                     const std::vector<EigenPair>& exact)
{
    const size_t n = pairs.size();
    if (n == 0 || well_of.size() != n) throw std::invalid_argument("one well index per eigenpair required");
    for (int w : well_of)
        if (w < 0 || static_cast<size_t>(w) >= regions.size()) throw std::invalid_argument("well index out of range");
    if (exact.size() != n)
        throw std::invalid_argument("model has " + std::to_string(n) + " eigenvalues but " +
                                    std::to_string(exact.size()) + " exact eigenvalues were given");

    InteractionMatrix r;
    r.gram.assign(n, std::vector<quad>(n, 0));
    for (size_t a = 0; a < n; ++a)
        for (size_t b = 0; b <= a; ++b) {
            quad s = 0;
            for (size_t i = 0; i < pairs[a].vector.size(); ++i) s += quad(pairs[a].vector[i]) * quad(pairs[b].vector[i]);
            r.gram[a][b] = r.gram[b][a] = s;
        }
    const auto gev = small_symmetric_eigenvalues(r.gram);
    r.gram_min_eigenvalue = static_cast<double>(gev.front());
    if (!(r.gram_min_eigenvalue > 1e-10))
        throw std::runtime_error("Gram matrix of the Dirichlet eigenfunctions is not positive definite");

    r.model.assign(n, std::vector<quad>(n, 0));
    for (size_t a = 0; a < n; ++a) {
        r.model[a][a] = pairs[a].value;
        for (size_t b = 0; b < a; ++b) {
            if (well_of[a] == well_of[b]) continue;
            const double wab = interaction_exact(m, dom, pairs[a], pairs[b], regions[static_cast<size_t>(well_of[b])]);
            const double wba = interaction_exact(m, dom, pairs[b], pairs[a], regions[static_cast<size_t>(well_of[a])]);
            r.model[a][b] = r.model[b][a] = quad(0.5) * (quad(wab) + quad(wba));
        }
    }
    r.model_eigenvalues = small_symmetric_eigenvalues(r.model);
    for (const auto& p : exact) r.exact_eigenvalues.push_back(p.value);
    std::sort(r.exact_eigenvalues.begin(), r.exact_eigenvalues.end());
    for (size_t a = 0; a < n; ++a)
        r.deviation.push_back(static_cast<double>(abs(r.model_eigenvalues[a] - r.exact_eigenvalues[a])));
    return r;
}

double AmplitudeField::at(const LatticeDomain& dom, const Vec& x) const
{
    const int d = dom.dim();
    const Vec first = dom.point(0);
    std::vector<long> base(static_cast<size_t>(d));
    std::vector<double> frac(static_cast<size_t>(d));
    for (int a = 0; a < d; ++a) {
        const auto k = static_cast<size_t>(a);
        const long n = dom.extent()[k];
        double t = (x[a] - first[a]) / dom.eps();
        long i0 = static_cast<long>(std::floor(t + 1e-9));
        if (std::abs(t - std::round(t)) < 1e-9) t = std::round(t);
        if (!dom.periodic()[k]) i0 = std::clamp<long>(i0, 0, std::max<long>(n - 2, 0));
        base[k] = i0;
        frac[k] = std::clamp(t - static_cast<double>(i0), 0.0, 1.0);
    }
    double s = 0.0;
    for (long c = 0; c < (1L << d); ++c) {
        double w = 1.0;
        std::vector<long> mi(static_cast<size_t>(d));
        for (int a = 0; a < d; ++a) {
            const auto k = static_cast<size_t>(a);
            const int bit = static_cast<int>((c >> a) & 1);
            w *= bit ? frac[k] : 1.0 - frac[k];
            long idx = base[k] + bit;
            const long n = dom.extent()[k];
            if (dom.periodic()[k]) idx = ((idx % n) + n) % n;
            else idx = std::min(idx, n - 1);
            mi[k] = idx;
        }
        if (w == 0.0) continue;
        s += w * b[static_cast<size_t>(dom.linear(mi))];
    }
    return s;
}

AmplitudeField amplitude_extract(const EigenPair& v, const DistanceField& d, const LatticeDomain& dom, int well,
                                 double rho, Precision precision)
{
    if (static_cast<long>(v.vector.size()) != dom.size()) throw std::invalid_argument("eigenvector size mismatch");
    if (d.grid.dim() != dom.dim()) throw std::invalid_argument("distance field and lattice dimensions differ");
    const double eps = dom.eps();
    const double machine = precision == Precision::binary128
                               ? static_cast<double>(std::numeric_limits<quad>::epsilon())
                               : std::numeric_limits<double>::epsilon();
    const double cutoff = rho * eps * std::log(1.0 / machine);
    AmplitudeField f;
    f.well = well;
    f.eps = eps;
    f.b.assign(v.vector.size(), std::numeric_limits<double>::quiet_NaN());
    const double scale = std::pow(eps, -0.25 * dom.dim());
    for (long i = 0; i < dom.size(); ++i) {
        const double u = v.vector[static_cast<size_t>(i)];
        if (u == 0.0) continue;
        const Vec x = dom.point(i);
        const double dist = d.value(x);
        if (std::abs(dist) > cutoff) continue;
        f.b[static_cast<size_t>(i)] = scale * std::exp(dist / eps) * u;
    }
    return f;
}

AmplitudeOrder amplitude_order(const std::vector<double>& eps, const std::vector<double>& b)
{
    if (eps.size() != b.size() || eps.size() < 2) throw std::invalid_argument("need at least two amplitude samples");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const auto n = static_cast<double>(eps.size());
    for (size_t i = 0; i < eps.size(); ++i) {
        if (!(b[i] > 0.0) || !(eps[i] > 0.0)) throw std::invalid_argument("amplitudes must be positive");
        const double x = std::log(eps[i]), y = std::log(b[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    AmplitudeOrder o;
    o.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    o.N = std::max(0, static_cast<int>(std::lround(-o.slope)));
    return o;
}

double current_sum(const ModelSpec& m, const Vec& y, const Vec& grad, int axis)
{
    axis = resolve_axis(axis, m.dim);
    double s = 0.0;
    for (size_t t = 0; t < m.hopping.terms.size(); ++t) {
        const auto& eta = m.hopping.terms[t].eta;
        const int ed = eta[static_cast<size_t>(axis)];
        if (ed == 0) continue;
        s += m.hopping.leading(t, y) * ed * std::sinh(as_vec(eta).dot(grad));
    }
    return s;
}

double I0_point(double bj, double bk, const Mat& hessian, double current)
{
    double factor = 1.0;
    if (hessian.size() > 0) {
        const double det = hessian.determinant();
        if (!(det > 0.0)) throw std::domain_error("transverse Hessian is not positive definite");
        factor = std::pow(2 * std::numbers::pi, 0.5 * static_cast<double>(hessian.rows())) / std::sqrt(det);
    }
    return factor * bk * current * bj;
}

double predicted_interaction(double eps, double S, double I0, double exponent)
{
    return std::pow(eps, exponent) * std::exp(-S / eps) * I0;
}

ManifoldIntegrand I0_manifold(const AmplitudeField& bj, const AmplitudeField& bk, const LatticeDomain& dom,
                              const GeodesicManifold& gm, const ModelSpec& m, const DistanceField& dj, int axis)
{
    if (gm.nodes.empty()) throw std::invalid_argument("geodesic manifold has no nodes");
    ManifoldIntegrand r;
    for (size_t i = 0; i < gm.nodes.size(); ++i) {
        const Vec& y = gm.nodes[i];
        const Mat& H = gm.hessians[i];
        double factor = 1.0;
        if (H.size() > 0) {
            const double det = H.determinant();
            if (!(det > 0.0)) {
                std::ostringstream os;
                os << "degenerate transverse Hessian at manifold node " << i << " " << format_points({y});
                throw std::domain_error(os.str());
            }
            factor = std::pow(2 * std::numbers::pi, 0.5 * static_cast<double>(H.rows())) / std::sqrt(det);
        }
        const double v = factor * bk.at(dom, y) * current_sum(m, y, dj.gradient(y), axis) * bj.at(dom, y);
        r.values.push_back(v);
        r.I0 += gm.weights[i] * v;
    }
    return r;
}

BandEstimate band_estimate(const ModelSpec& m, const LatticeDomain& dom, const EigenPair& vj, const EigenPair& vk,
                               const DistanceField& dj, const DistanceField& dk, const Region& ellipse,
                               const BandSpec& band)
{
    const double eps = dom.eps();
    const double delta = band.delta > 0 ? band.delta : 2 * eps * m.hopping.max_offset_length();
    const int ax = band.axis;
    const int d = dom.dim();
    BandEstimate r;
    r.bounds = true;
    for (long i = 0; i < dom.size(); ++i) {
        const Vec x = dom.point(i);
        const double s = x[ax] - band.value;
        if (!(s >= -delta - 1e-12 && s < 0.0) || !ellipse.contains(x)) continue;
        // Offsets that cross the hyperplane into the other half of the band.
        std::vector<size_t> crossing;
        for (size_t t = 0; t < m.hopping.terms.size(); ++t) {
            const auto& eta = m.hopping.terms[t].eta;
            if (!nonzero_offset(eta)) continue;
            const long j = dom.shift(i, eta);
            if (j < 0) continue;
            const Vec y = dom.point(j);
            const double sy = y[ax] - band.value;
            if (sy >= 0.0 && sy <= delta + 1e-12 && ellipse.contains(y)) crossing.push_back(t);
        }
        if (crossing.empty()) continue;
        ++r.band_points;
        const Vec gj = dj.gradient(x), gk = dk.gradient(x);
        auto t_delta = [&](const Vec& xi, Vec& grad) {
            grad = Vec::Zero(d);
            double v = 0.0;
            for (size_t t : crossing) {
                const Vec eta = as_vec(m.hopping.terms[t].eta);
                const double c = -m.hopping.leading(t, x) * std::exp(-eta.dot(xi));
                v += c;
                grad -= c * eta;
            }
            return v;
        };
        Vec Gj, Gk;
        const double tj = t_delta(gj, Gj), tk = t_delta(gk, Gk);
        const double uj = vj.vector[static_cast<size_t>(i)], uk = vk.vector[static_cast<size_t>(i)];
        const double w = uj * uk;
        r.leading += w * (tj - tk);
        r.lower += w * Gk.dot(gj - gk);
        r.upper += w * Gj.dot(gj - gk);
        if (!(uj > 0.0 && uk > 0.0)) r.bounds = false;
    }
    if (r.band_points == 0) throw std::invalid_argument("the band around the hyperplane is empty");
    if (!r.bounds) {
        spdlog::warn("eigenfunctions are not positive on the band, bounds omitted");
        r.lower = r.upper = std::numeric_limits<double>::quiet_NaN();
    }
    return r;
}

EllipseRegion ellipse_region(const DistanceField& dj, const DistanceField& dk, double S0, const EllipseSpec& spec,
                             const Region& Mj, const Region& Mk)
{
    const Grid& g = dj.grid;
    if (dk.grid.size() != g.size()) throw std::invalid_argument("distance fields on different grids");
    EllipseRegion e;
    e.S0 = S0;
    e.a = spec.a;

    // Distance from each well to the boundary of its region (box edges count as boundary).
    double S = std::numeric_limits<double>::infinity();
    for (int r = 0; r < 2; ++r) {
        const Region& M = r == 0 ? Mj : Mk;
        const auto& f = r == 0 ? dj : dk;
        for (long i = 0; i < g.size(); ++i) {
            if (!M.contains(g.node(i))) continue;
            bool edge = g.on_boundary(i);
            for (int a = 0; a < g.dim() && !edge; ++a)
                for (int s : {-1, 1}) {
                    const long n = g.neighbor(i, a, s);
                    if (n >= 0 && !M.contains(g.node(n))) edge = true;
                }
            if (edge) S = std::min(S, f.values[static_cast<size_t>(i)]);
        }
    }
    e.boundary_distance = S;
    if (!(spec.a > 0.0 && spec.a < 2 * S - S0))
        throw std::invalid_argument("ellipse parameter a=" + std::to_string(spec.a) + " outside (0, 2S - S0) = (0, " +
                                    std::to_string(2 * S - S0) + ")");

    const double level = S0 + spec.a;
    std::vector<Vec> outside, below, wrong_side;
    const double margin = 1e-9;
    for (long i = 0; i < g.size(); ++i) {
        if (dj.values[static_cast<size_t>(i)] + dk.values[static_cast<size_t>(i)] > level) continue;
        const Vec x = g.node(i);
        const bool in_j = Mj.contains_interior(x, margin), in_k = Mk.contains_interior(x, margin);
        if (!in_j && !in_k) outside.push_back(x);
        const double s = x[spec.axis] - spec.value;
        if (s <= -spec.R) below.push_back(x);
        else if (s < 0.0 && !in_j) wrong_side.push_back(x);
        else if (s >= 0.0 && !in_k) wrong_side.push_back(x);
    }
    if (!outside.empty())
        throw std::invalid_argument("ellipse not inside int M_j u int M_k at " + format_points(outside));
    if (!below.empty()) throw std::invalid_argument("ellipse reaches beyond the band of width R at " + format_points(below));
    if (!wrong_side.empty())
        throw std::invalid_argument("ellipse part on one side of the hyperplane leaves its region at " +
                                    format_points(wrong_side));

    auto fj = std::make_shared<DistanceField>(dj);
    auto fk = std::make_shared<DistanceField>(dk);
    e.region = Region([fj, fk, level](const Vec& x) { return fj->value(x) + fk->value(x) <= level; }, "ellipse");
    return e;
}

}  // namespace tunnel
