#include "tunnel/finsler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tunnel {

Grid::Grid(const Vec& lo, const Vec& hi, std::vector<long> nodes, std::vector<bool> periodic)
    : lo_(lo), hi_(hi), n_(std::move(nodes)), periodic_(std::move(periodic))
{
    const auto d = n_.size();
    if (d == 0 || static_cast<size_t>(lo.size()) != d || static_cast<size_t>(hi.size()) != d)
        throw std::invalid_argument("grid dimension mismatch");
    if (periodic_.empty()) periodic_.assign(d, false);
    if (periodic_.size() != d) throw std::invalid_argument("grid periodic flags mismatch");
    stride_.resize(d);
    h_.resize(d);
    for (size_t i = 0; i < d; ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        if (!(hi[k] > lo[k])) throw std::invalid_argument("empty grid box");
        if (n_[i] < (periodic_[i] ? 1 : 3)) throw std::invalid_argument("grid needs at least three nodes per axis");
        h_[i] = periodic_[i] ? (hi[k] - lo[k]) / static_cast<double>(n_[i])
                             : (hi[k] - lo[k]) / static_cast<double>(n_[i] - 1);
    }
    total_ = 1;
    for (size_t i = d; i-- > 0;) {
        stride_[i] = total_;
        total_ *= n_[i];
    }
}

Vec Grid::node(long index) const
{
    Vec x(lo_.size());
    for (size_t i = 0; i < n_.size(); ++i) {
        const long m = index / stride_[i];
        index %= stride_[i];
        x[static_cast<Eigen::Index>(i)] = lo_[static_cast<Eigen::Index>(i)] + static_cast<double>(m) * h_[i];
    }
    return x;
}

std::vector<long> Grid::multi_index(long index) const
{
    std::vector<long> mi(n_.size());
    for (size_t i = 0; i < n_.size(); ++i) {
        mi[i] = index / stride_[i];
        index %= stride_[i];
    }
    return mi;
}

long Grid::linear(std::vector<long> mi) const
{
    long idx = 0;
    for (size_t i = 0; i < n_.size(); ++i) {
        if (periodic_[i]) mi[i] = ((mi[i] % n_[i]) + n_[i]) % n_[i];
        else if (mi[i] < 0 || mi[i] >= n_[i]) return -1;
        idx += mi[i] * stride_[i];
    }
    return idx;
}

long Grid::neighbor(long index, int axis, int step) const
{
    const auto a = static_cast<size_t>(axis);
    const long m = (index / stride_[a]) % n_[a];
    long t = m + step;
    if (periodic_[a]) t = ((t % n_[a]) + n_[a]) % n_[a];
    else if (t < 0 || t >= n_[a]) return -1;
    return index + (t - m) * stride_[a];
}

bool Grid::on_boundary(long index) const
{
    for (size_t i = 0; i < n_.size(); ++i) {
        if (periodic_[i]) continue;
        const long m = (index / stride_[i]) % n_[i];
        if (m == 0 || m == n_[i] - 1) return true;
    }
    return false;
}

long Grid::nearest(const Vec& x) const
{
    std::vector<long> mi(n_.size());
    for (size_t i = 0; i < n_.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        long m = std::lround((x[k] - lo_[k]) / h_[i]);
        if (!periodic_[i]) m = std::clamp(m, 0L, n_[i] - 1);
        mi[i] = m;
    }
    return linear(mi);
}

Vec Grid::wrap(const Vec& dx) const
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

template <class T>
T Grid::interpolate_impl(const std::vector<T>& values, const Vec& x, T zero) const
{
    const size_t d = n_.size();
    std::vector<long> base(d);
    std::vector<double> frac(d);
    for (size_t i = 0; i < d; ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        double s = (x[k] - lo_[k]) / h_[i];
        if (periodic_[i]) {
            const double fl = std::floor(s);
            base[i] = static_cast<long>(fl);
            frac[i] = s - fl;
        } else {
            s = std::clamp(s, 0.0, static_cast<double>(n_[i] - 1));
            long b = std::min(static_cast<long>(std::floor(s)), n_[i] - 2);
            base[i] = b;
            frac[i] = s - static_cast<double>(b);
        }
    }
    T out = zero;
    const long corners = 1L << d;
    std::vector<long> mi(d);
    for (long c = 0; c < corners; ++c) {
        double w = 1.0;
        for (size_t i = 0; i < d; ++i) {
            const bool up = (c >> i) & 1;
            mi[i] = base[i] + (up ? 1 : 0);
            w *= up ? frac[i] : 1.0 - frac[i];
        }
        if (w == 0.0) continue;
        out += w * values[static_cast<size_t>(linear(mi))];
    }
    return out;
}

double Grid::interpolate(const std::vector<double>& values, const Vec& x) const
{
    return interpolate_impl<double>(values, x, 0.0);
}

Vec Grid::interpolate(const std::vector<Vec>& values, const Vec& x) const
{
    return interpolate_impl<Vec>(values, x, Vec::Zero(static_cast<Eigen::Index>(n_.size())));
}

Vec DistanceField::gradient(const Vec& x) const { return grid.interpolate(gradients, x); }

}  // namespace tunnel
