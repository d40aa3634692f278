#include "tunnel/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tunnel {

Region::Region() : Region(everything()) {}

Region::Region(std::function<bool(const Vec&)> pred, std::string name)
    : pred_(std::move(pred)), name_(std::move(name))
{
}

Region Region::everything()
{
    return Region([](const Vec&) { return true; }, "all");
}

Region Region::box(const Vec& lo, const Vec& hi)
{
    if (lo.size() != hi.size()) throw std::invalid_argument("box corners of different dimension");
    const double tol = 1e-9;
    return Region(
        [lo, hi, tol](const Vec& x) {
            for (Eigen::Index i = 0; i < x.size(); ++i)
                if (x[i] < lo[i] - tol || x[i] > hi[i] + tol) return false;
            return true;
        },
        "box");
}

Region Region::halfspace(int axis, double bound, bool below)
{
    const double tol = 1e-9;
    return Region(
        [axis, bound, below, tol](const Vec& x) {
            return below ? x[axis] <= bound + tol : x[axis] >= bound - tol;
        },
        below ? "below" : "above");
}

bool Region::contains_interior(const Vec& x, double margin) const
{
    const Eigen::Index d = x.size();
    long total = 1;
    for (Eigen::Index i = 0; i < d; ++i) total *= 3;
    for (long c = 0; c < total; ++c) {
        Vec y = x;
        long r = c;
        for (Eigen::Index i = 0; i < d; ++i) {
            y[i] += margin * static_cast<double>(r % 3 - 1);
            r /= 3;
        }
        if (!contains(y)) return false;
    }
    return true;
}

Region Region::intersect(const Region& other) const
{
    auto a = pred_;
    auto b = other.pred_;
    return Region([a, b](const Vec& x) { return a(x) && b(x); }, name_ + "&" + other.name_);
}

LatticeDomain::LatticeDomain(double eps, const Vec& lo, const Vec& hi, std::vector<bool> periodic)
    : eps_(eps), lo_(lo), hi_(hi), periodic_(std::move(periodic))
{
    if (!(eps > 0.0)) throw std::invalid_argument("lattice spacing must be positive");
    const auto d = static_cast<size_t>(lo.size());
    if (d == 0 || static_cast<size_t>(hi.size()) != d) throw std::invalid_argument("bad lattice box");
    if (periodic_.empty()) periodic_.assign(d, false);
    if (periodic_.size() != d) throw std::invalid_argument("periodic flags do not match box dimension");
    first_.resize(d);
    n_.resize(d);
    stride_.resize(d);
    for (size_t i = 0; i < d; ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        if (!(hi[k] > lo[k])) throw std::invalid_argument("empty lattice box");
        first_[i] = static_cast<long>(std::ceil(lo[k] / eps - 1e-9));
        if (periodic_[i]) {
            const double cells = (hi[k] - lo[k]) / eps;
            const long n = std::lround(cells);
            if (std::abs(cells - static_cast<double>(n)) > 1e-6 || n < 1)
                throw std::invalid_argument("periodic length is not a multiple of the lattice spacing");
            n_[i] = n;
        } else {
            const long last = static_cast<long>(std::floor(hi[k] / eps + 1e-9));
            n_[i] = last - first_[i] + 1;
            if (n_[i] < 1) throw std::invalid_argument("lattice box holds no points");
        }
    }
    total_ = 1;
    for (size_t i = d; i-- > 0;) {
        stride_[i] = total_;
        total_ *= n_[i];
    }
}

Vec LatticeDomain::point(long index) const
{
    const auto mi = multi_index(index);
    Vec x(lo_.size());
    for (size_t i = 0; i < mi.size(); ++i)
        x[static_cast<Eigen::Index>(i)] = static_cast<double>(first_[i] + mi[i]) * eps_;
    return x;
}

std::vector<long> LatticeDomain::multi_index(long index) const
{
    std::vector<long> mi(n_.size());
    for (size_t i = 0; i < n_.size(); ++i) {
        mi[i] = index / stride_[i];
        index %= stride_[i];
    }
    return mi;
}

long LatticeDomain::linear(const std::vector<long>& mi) const
{
    long idx = 0;
    for (size_t i = 0; i < n_.size(); ++i) {
        long m = mi[i];
        if (periodic_[i]) m = ((m % n_[i]) + n_[i]) % n_[i];
        else if (m < 0 || m >= n_[i]) return -1;
        idx += m * stride_[i];
    }
    return idx;
}

long LatticeDomain::shift(long index, const std::vector<int>& eta) const
{
    long idx = 0;
    for (size_t i = 0; i < n_.size(); ++i) {
        long m = index / stride_[i] + eta[i];
        index %= stride_[i];
        if (periodic_[i]) m = ((m % n_[i]) + n_[i]) % n_[i];
        else if (m < 0 || m >= n_[i]) return -1;
        idx += m * stride_[i];
    }
    return idx;
}

long LatticeDomain::nearest(const Vec& x) const
{
    std::vector<long> mi(n_.size());
    for (size_t i = 0; i < n_.size(); ++i) {
        long m = std::lround(x[static_cast<Eigen::Index>(i)] / eps_) - first_[i];
        if (!periodic_[i]) m = std::clamp(m, 0L, n_[i] - 1);
        mi[i] = m;
    }
    return linear(mi);
}

std::vector<long> LatticeDomain::points_in(const Region& r) const
{
    std::vector<long> out;
    for (long i = 0; i < total_; ++i)
        if (r.contains(point(i))) out.push_back(i);
    return out;
}

Vec LatticeDomain::wrap(const Vec& dx) const
{
    Vec r = dx;
    for (size_t i = 0; i < n_.size(); ++i) {
        if (!periodic_[i]) continue;
        const auto k = static_cast<Eigen::Index>(i);
        const double p = hi_[k] - lo_[k];
        r[k] -= p * std::round(r[k] / p);
    }
    return r;
}

}  // namespace tunnel
