#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace tunnel {

// Symmetric band matrix holding the lower band: entry (i, i-k) for 0 <= k <= b.
template <class Real>
class SymBand {
public:
    SymBand(long n, int b) : n_(n), b_(b), a_(static_cast<size_t>((b + 1) * n), Real(0)) {}

    long size() const { return n_; }
    int bandwidth() const { return b_; }

    Real& at(long i, long j)
    {
        if (i < j) std::swap(i, j);
        return a_[static_cast<size_t>((i - j) * n_ + i)];
    }
    Real get(long i, long j) const
    {
        if (i < j) std::swap(i, j);
        if (i - j > b_) return Real(0);
        return a_[static_cast<size_t>((i - j) * n_ + i)];
    }

    template <class Other>
    SymBand<Other> cast() const
    {
        SymBand<Other> o(n_, b_);
        for (long i = 0; i < n_; ++i)
            for (long j = std::max(0L, i - b_); j <= i; ++j) o.at(i, j) = static_cast<Other>(get(i, j));
        return o;
    }

    std::vector<Real> multiply(const std::vector<Real>& v) const
    {
        std::vector<Real> out(static_cast<size_t>(n_), Real(0));
        for (long i = 0; i < n_; ++i) {
            out[i] += get(i, i) * v[i];
            for (long j = std::max(0L, i - b_); j < i; ++j) {
                const Real a = get(i, j);
                out[i] += a * v[j];
                out[j] += a * v[i];
            }
        }
        return out;
    }

    // Bounds enclosing the spectrum.
    std::pair<Real, Real> gershgorin() const
    {
        Real lo = std::numeric_limits<Real>::max(), hi = -std::numeric_limits<Real>::max();
        for (long i = 0; i < n_; ++i) {
            Real r = 0;
            for (long j = std::max(0L, i - b_); j <= std::min(n_ - 1, i + b_); ++j)
                if (j != i) r += abs_(get(i, j));
            lo = std::min(lo, get(i, i) - r);
            hi = std::max(hi, get(i, i) + r);
        }
        return {lo, hi};
    }

    // Number of eigenvalues strictly below sigma, from the inertia of A - sigma I = L D L^T.
    long count_below(Real sigma) const
    {
        const Real tiny = std::numeric_limits<Real>::epsilon() * std::numeric_limits<Real>::epsilon() *
                          (abs_(sigma) + Real(1));
        std::vector<Real> L(static_cast<size_t>(b_ * n_ + 1), Real(0));  // L(i, i-k) at (k-1)*n + i
        std::vector<Real> D(static_cast<size_t>(n_));
        auto Lref = [&](long i, long j) -> Real& { return L[static_cast<size_t>((i - j - 1) * n_ + i)]; };
        long neg = 0;
        for (long i = 0; i < n_; ++i) {
            const long j0 = std::max(0L, i - b_);
            for (long j = j0; j < i; ++j) {
                Real w = get(i, j);
                for (long k = std::max(j0, j - b_); k < j; ++k) w -= Lref(i, k) * D[k] * Lref(j, k);
                Lref(i, j) = w / D[j];
            }
            Real d = get(i, i) - sigma;
            for (long k = j0; k < i; ++k) d -= Lref(i, k) * Lref(i, k) * D[k];
            if (abs_(d) < tiny) d = tiny;
            D[i] = d;
            if (d < 0) ++neg;
        }
        return neg;
    }

    // Solve (A - sigma I) x = rhs by band LU with partial pivoting.
    std::vector<Real> solve_shifted(Real sigma, std::vector<Real> rhs) const
    {
        const long w = 3 * b_ + 1;
        std::vector<Real> M(static_cast<size_t>(n_ * w), Real(0));
        auto at = [&](long i, long j) -> Real& { return M[static_cast<size_t>(i * w + (j - i + b_))]; };
        for (long i = 0; i < n_; ++i)
            for (long j = std::max(0L, i - b_); j <= std::min(n_ - 1, i + b_); ++j)
                at(i, j) = get(i, j) - (i == j ? sigma : Real(0));
        Real scale = 0;
        for (const auto& v : M) scale = std::max(scale, abs_(v));
        const Real tiny = std::numeric_limits<Real>::epsilon() * (scale + Real(1));
        std::vector<long> piv(static_cast<size_t>(n_));
        for (long k = 0; k < n_; ++k) {
            const long rmax = std::min(n_ - 1, k + b_);
            const long cmax = std::min(n_ - 1, k + 2 * b_);
            long p = k;
            for (long r = k + 1; r <= rmax; ++r)
                if (abs_(at(r, k)) > abs_(at(p, k))) p = r;
            piv[k] = p;
            if (p != k)
                for (long j = k; j <= cmax; ++j) std::swap(at(k, j), at(p, j));
            if (abs_(at(k, k)) < tiny) at(k, k) = tiny;
            for (long r = k + 1; r <= rmax; ++r) {
                const Real f = at(r, k) / at(k, k);
                at(r, k) = f;
                if (f == Real(0)) continue;
                for (long j = k + 1; j <= cmax; ++j) at(r, j) -= f * at(k, j);
            }
        }
        for (long k = 0; k < n_; ++k) {
            if (piv[k] != k) std::swap(rhs[k], rhs[piv[k]]);
            for (long r = k + 1; r <= std::min(n_ - 1, k + b_); ++r) rhs[r] -= at(r, k) * rhs[k];
        }
        for (long i = n_ - 1; i >= 0; --i) {
            Real s = rhs[i];
            for (long j = i + 1; j <= std::min(n_ - 1, i + 2 * b_); ++j) s -= at(i, j) * rhs[j];
            rhs[i] = s / at(i, i);
        }
        return rhs;
    }

private:
    static Real abs_(const Real& v) { return v < 0 ? -v : v; }

    long n_;
    int b_;
    std::vector<Real> a_;
};

}  // namespace tunnel
