#include "tunnel/model.hpp"

#include "tunnel/numdiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace tunnel {

namespace {

double dot(const std::vector<int>& eta, const Vec& p)
{
    double s = 0.0;
    for (size_t i = 0; i < eta.size(); ++i) s += eta[i] * p[static_cast<Eigen::Index>(i)];
    return s;
}

Vec as_vec(const std::vector<int>& eta)
{
    Vec v(static_cast<Eigen::Index>(eta.size()));
    for (size_t i = 0; i < eta.size(); ++i) v[static_cast<Eigen::Index>(i)] = eta[i];
    return v;
}

bool is_zero(const std::vector<int>& eta)
{
    return std::all_of(eta.begin(), eta.end(), [](int e) { return e == 0; });
}

}  // namespace

int HoppingFamily::find(const std::vector<int>& eta) const
{
    for (size_t i = 0; i < terms.size(); ++i)
        if (terms[i].eta == eta) return static_cast<int>(i);
    return -1;
}

double HoppingFamily::leading(size_t term, const Vec& x) const
{
    const auto& o = terms[term].orders;
    return o.empty() ? 0.0 : o[0](x);
}

double HoppingFamily::truncated(size_t term, const Vec& x, double eps) const
{
    const auto& o = terms[term].orders;
    double s = 0.0, p = 1.0;
    for (const auto& f : o) {
        s += p * f(x);
        p *= eps;
    }
    return s;
}

double HoppingFamily::coefficient(size_t term, const Vec& x, double eps) const
{
    if (!symmetrize) return truncated(term, x, eps);
    const auto& eta = terms[term].eta;
    std::vector<int> neg(eta.size());
    for (size_t i = 0; i < eta.size(); ++i) neg[i] = -eta[i];
    const int partner = find(neg);
    if (partner < 0) return truncated(term, x, eps);
    const Vec shifted = x + eps * as_vec(eta);
    return 0.5 * (truncated(term, x, eps) + truncated(static_cast<size_t>(partner), shifted, eps));
}

int HoppingFamily::max_reach() const
{
    int r = 0;
    for (const auto& t : terms)
        for (int e : t.eta) r = std::max(r, std::abs(e));
    return r;
}

double HoppingFamily::max_offset_length() const
{
    double r = 0.0;
    for (const auto& t : terms) r = std::max(r, as_vec(t.eta).norm());
    return r;
}

double PotentialExpansion::value(const Vec& x, double eps) const
{
    double s = 0.0, p = 1.0;
    for (const auto& f : orders) {
        s += p * f(x);
        p *= eps;
    }
    return s;
}

void ModelSpec::check_structure() const
{
    if (dim < 1) throw std::invalid_argument("model dimension must be positive");
    if (hopping.dim != dim) throw std::invalid_argument("hopping dimension does not match model dimension");
    if (hopping.terms.empty()) throw std::invalid_argument("hopping family has no offsets");
    for (const auto& t : hopping.terms) {
        if (static_cast<int>(t.eta.size()) != dim)
            throw std::invalid_argument("offset with wrong number of components");
        if (t.orders.empty()) throw std::invalid_argument("offset without coefficient functions");
        if (static_cast<int>(t.orders.size()) > hopping.order)
            throw std::invalid_argument("offset carries more orders than the declared expansion order");
    }
    if (potential.orders.empty()) throw std::invalid_argument("potential has no leading term");
    for (const auto& w : potential.wells)
        if (w.size() != dim) throw std::invalid_argument("well point with wrong number of coordinates");
    if (!periodic.empty() && static_cast<int>(periodic.size()) != dim)
        throw std::invalid_argument("periodic flags do not match model dimension");
}

std::complex<double> symbol_t(const ModelSpec& m, const Vec& x, const CVec& xi, double eps)
{
    std::complex<double> s = 0.0;
    const std::complex<double> I(0.0, 1.0);
    for (size_t k = 0; k < m.hopping.terms.size(); ++k) {
        std::complex<double> phase = 0.0;
        const auto& eta = m.hopping.terms[k].eta;
        for (size_t i = 0; i < eta.size(); ++i) phase += double(eta[i]) * xi[static_cast<Eigen::Index>(i)];
        s += m.hopping.coefficient(k, x, eps) * std::exp(-I * phase);
    }
    return s;
}

std::complex<double> symbol_t0(const ModelSpec& m, const Vec& x, const CVec& xi)
{
    std::complex<double> s = 0.0;
    for (size_t k = 0; k < m.hopping.terms.size(); ++k) {
        std::complex<double> phase = 0.0;
        const auto& eta = m.hopping.terms[k].eta;
        for (size_t i = 0; i < eta.size(); ++i) phase += double(eta[i]) * xi[static_cast<Eigen::Index>(i)];
        s += m.hopping.leading(k, x) * std::cos(phase);
    }
    return s;
}

double kinetic(const ModelSpec& m, const Vec& x, const Vec& p)
{
    double s = 0.0;
    for (size_t k = 0; k < m.hopping.terms.size(); ++k) {
        const auto& eta = m.hopping.terms[k].eta;
        if (is_zero(eta)) continue;
        s += -m.hopping.leading(k, x) * (std::cosh(dot(eta, p)) - 1.0);
    }
    return s;
}

Vec kinetic_grad(const ModelSpec& m, const Vec& x, const Vec& p)
{
    Vec g = Vec::Zero(p.size());
    for (size_t k = 0; k < m.hopping.terms.size(); ++k) {
        const auto& eta = m.hopping.terms[k].eta;
        if (is_zero(eta)) continue;
        g += -m.hopping.leading(k, x) * std::sinh(dot(eta, p)) * as_vec(eta);
    }
    return g;
}

Mat kinetic_hess(const ModelSpec& m, const Vec& x, const Vec& p)
{
    Mat H = Mat::Zero(p.size(), p.size());
    for (size_t k = 0; k < m.hopping.terms.size(); ++k) {
        const auto& eta = m.hopping.terms[k].eta;
        if (is_zero(eta)) continue;
        const Vec e = as_vec(eta);
        H += -m.hopping.leading(k, x) * std::cosh(dot(eta, p)) * e * e.transpose();
    }
    return H;
}

double h0_tilde(const ModelSpec& m, const Vec& x, const Vec& p)
{
    return kinetic(m, x, p) - m.potential.leading(x);
}

Vec h0_tilde_grad_x(const ModelSpec& m, const Vec& x, const Vec& p)
{
    return fd_gradient([&](const Vec& y) { return h0_tilde(m, y, p); }, x, 1e-3);
}

Mat kinetic_B(const ModelSpec& m, const Vec& x)
{
    Mat B = Mat::Zero(m.dim, m.dim);
    for (size_t k = 0; k < m.hopping.terms.size(); ++k) {
        const Vec e = as_vec(m.hopping.terms[k].eta);
        B += -0.5 * m.hopping.leading(k, x) * e * e.transpose();
    }
    return B;
}

Mat potential_hessian(const ModelSpec& m, const Vec& x)
{
    return fd_hessian([&](const Vec& y) { return m.potential.leading(y); }, x, 1e-3);
}

Vec potential_gradient(const ModelSpec& m, const Vec& x)
{
    return fd_gradient([&](const Vec& y) { return m.potential.leading(y); }, x, 1e-3);
}

bool ValidationReport::ok() const
{
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

const Check* ValidationReport::find(const std::string& name) const
{
    for (const auto& c : checks)
        if (c.name == name) return &c;
    return nullptr;
}

std::string ValidationReport::summary() const
{
    std::ostringstream os;
    for (const auto& c : checks)
        os << (c.passed ? "ok   " : "FAIL ") << c.name << "  worst=" << c.worst
           << (c.detail.empty() ? "" : "  " + c.detail) << "\n";
    return os.str();
}

ValidationReport validate_model(const ModelSpec& m, const std::vector<Vec>& samples, double eps)
{
    m.check_structure();
    const auto& hop = m.hopping;
    const double tol = 1e-10;
    ValidationReport rep;
    auto add = [&](std::string name, bool ok, double worst, std::string detail = "") {
        rep.checks.push_back({std::move(name), ok, worst, std::move(detail)});
    };

    bool has_zero = false, closed = true;
    for (const auto& t : hop.terms) {
        if (is_zero(t.eta)) has_zero = true;
        std::vector<int> neg(t.eta.size());
        for (size_t i = 0; i < neg.size(); ++i) neg[i] = -t.eta[i];
        if (hop.find(neg) < 0) closed = false;
    }
    add("offsets_symmetric", has_zero && closed, 0.0,
        has_zero ? (closed ? "" : "offset set not closed under negation") : "offset 0 missing");

    double zero_sum = 0.0, sign = 0.0, sym = 0.0, even = 0.0, vmin = 0.0, decay = 0.0;
    int min_rank = m.dim;
    double bmin = std::numeric_limits<double>::infinity();
    double scale = 0.0;
    for (const auto& x : samples)
        for (size_t k = 0; k < hop.terms.size(); ++k) scale = std::max(scale, std::abs(hop.leading(k, x)));
    scale = std::max(scale, 1.0);
    for (const auto& x : samples) {
        double s = 0.0;
        std::vector<Vec> hopping_dirs;
        for (size_t k = 0; k < hop.terms.size(); ++k) {
            const auto& eta = hop.terms[k].eta;
            const double a0 = hop.leading(k, x);
            s += a0;
            decay = std::max(decay, std::abs(a0) * std::exp(hop.decay_rate * as_vec(eta).norm()));
            if (!is_zero(eta)) {
                sign = std::max(sign, a0);
                if (a0 < -tol) hopping_dirs.push_back(as_vec(eta));
            }
            std::vector<int> neg(eta.size());
            for (size_t i = 0; i < neg.size(); ++i) neg[i] = -eta[i];
            const int p = hop.find(neg);
            if (p >= 0) {
                const Vec shifted = x + eps * as_vec(eta);
                sym = std::max(sym, std::abs(hop.truncated(k, x, eps) -
                                             hop.truncated(static_cast<size_t>(p), shifted, eps)));
                even = std::max(even, std::abs(a0 - hop.leading(static_cast<size_t>(p), x)));
            }
        }
        zero_sum = std::max(zero_sum, std::abs(s));
        int rank = 0;
        if (!hopping_dirs.empty()) {
            Mat E(m.dim, static_cast<Eigen::Index>(hopping_dirs.size()));
            for (size_t i = 0; i < hopping_dirs.size(); ++i) E.col(static_cast<Eigen::Index>(i)) = hopping_dirs[i];
            Eigen::FullPivLU<Mat> lu(E);
            rank = static_cast<int>(lu.rank());
        }
        min_rank = std::min(min_rank, rank);
        vmin = std::min(vmin, m.potential.leading(x));
        Eigen::SelfAdjointEigenSolver<Mat> es(kinetic_B(m, x));
        bmin = std::min(bmin, es.eigenvalues().minCoeff());
    }
    add("zero_sum", zero_sum <= tol * scale, zero_sum);
    add("hopping_sign", sign <= tol * scale, sign);
    // The truncated expansion is symmetric only up to the unmodeled remainder.
    const double sym_tol = tol * scale + scale * std::pow(eps, hop.order);
    add("hopping_symmetry", sym <= sym_tol, sym);
    add("leading_evenness", even <= tol * scale, even);
    add("hopping_span", min_rank == m.dim, min_rank,
        "rank of negative-coefficient offsets " + std::to_string(min_rank) + " of " + std::to_string(m.dim));
    add("decay_surrogate", std::isfinite(decay), decay);
    add("kinetic_B_positive", bmin > 0.0, bmin);
    add("potential_nonnegative", vmin >= -tol, vmin);

    double well_value = 0.0, well_curv = std::numeric_limits<double>::infinity(), well_symbol = std::numeric_limits<double>::infinity();
    for (const auto& w : m.potential.wells) {
        well_value = std::max(well_value, std::abs(m.potential.leading(w)));
        std::vector<int> axes;
        for (int i = 0; i < m.dim; ++i)
            if (m.periodic.empty() || !m.periodic[static_cast<size_t>(i)]) axes.push_back(i);
        if (!axes.empty()) {
            Mat P = Mat::Zero(m.dim, static_cast<Eigen::Index>(axes.size()));
            for (size_t i = 0; i < axes.size(); ++i) P(axes[i], static_cast<Eigen::Index>(i)) = 1.0;
            const Mat Q = fd_hessian_along([&](const Vec& y) { return m.potential.leading(y); }, w, P, 1e-3);
            Eigen::SelfAdjointEigenSolver<Mat> es(Q);
            well_curv = std::min(well_curv, es.eigenvalues().minCoeff());
        }
        const int n = 24;
        long total = 1;
        for (int i = 0; i < m.dim; ++i) total *= n;
        for (long idx = 1; idx < total; ++idx) {
            CVec xi(m.dim);
            long r = idx;
            for (int i = 0; i < m.dim; ++i) {
                xi[i] = 2.0 * M_PI * static_cast<double>(r % n) / n - M_PI;
                r /= n;
            }
            if (xi.norm() < 1e-12) continue;
            well_symbol = std::min(well_symbol, symbol_t0(m, w, xi).real());
        }
    }
    if (m.potential.wells.empty()) {
        add("wells_present", false, 0.0, "no wells declared");
    } else {
        add("wells_zero", well_value <= 1e-10, well_value);
        add("wells_nondegenerate", !(well_curv <= 0.0), std::isfinite(well_curv) ? well_curv : 0.0);
        add("symbol_positive_at_wells", well_symbol > 0.0, well_symbol);
    }
    return rep;
}

}  // namespace tunnel
