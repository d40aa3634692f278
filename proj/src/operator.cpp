#include "tunnel/operator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tunnel {

std::vector<double> apply_operator(const ModelSpec& m, const LatticeDomain& dom, const std::vector<double>& u)
{
    if (static_cast<long>(u.size()) != dom.size()) throw std::invalid_argument("lattice function size mismatch");
    const double eps = dom.eps();
    std::vector<double> out(u.size(), 0.0);
    for (long i = 0; i < dom.size(); ++i) {
        const Vec x = dom.point(i);
        double s = m.potential.value(x, eps) * u[static_cast<size_t>(i)];
        for (size_t k = 0; k < m.hopping.terms.size(); ++k) {
            const long j = dom.shift(i, m.hopping.terms[k].eta);
            if (j < 0) continue;
            s += m.hopping.coefficient(k, x, eps) * u[static_cast<size_t>(j)];
        }
        out[static_cast<size_t>(i)] = s;
    }
    return out;
}

std::vector<double> apply_dirichlet(const ModelSpec& m, const LatticeDomain& dom, const Region& M,
                                    const std::vector<double>& u)
{
    if (static_cast<long>(u.size()) != dom.size()) throw std::invalid_argument("lattice function size mismatch");
    std::vector<char> inside(u.size());
    for (long i = 0; i < dom.size(); ++i) {
        inside[static_cast<size_t>(i)] = M.contains(dom.point(i));
        if (!inside[static_cast<size_t>(i)] && u[static_cast<size_t>(i)] != 0.0)
            throw std::invalid_argument("Dirichlet argument does not vanish outside the region");
    }
    auto out = apply_operator(m, dom, u);
    for (size_t i = 0; i < out.size(); ++i)
        if (!inside[i]) out[i] = 0.0;
    return out;
}

AssembledOperator assemble(const ModelSpec& m, const LatticeDomain& dom, const Region& M)
{
    AssembledOperator op;
    op.points = dom.points_in(M);
    if (op.points.empty()) throw std::invalid_argument("region contains no lattice points");
    std::vector<long> local(static_cast<size_t>(dom.size()), -1);
    for (size_t r = 0; r < op.points.size(); ++r) local[static_cast<size_t>(op.points[r])] = static_cast<long>(r);

    const double eps = dom.eps();
    const auto n = static_cast<Eigen::Index>(op.points.size());
    std::vector<Eigen::Triplet<double>> trip;
    for (size_t r = 0; r < op.points.size(); ++r) {
        const long i = op.points[r];
        const Vec x = dom.point(i);
        trip.emplace_back(static_cast<int>(r), static_cast<int>(r), m.potential.value(x, eps));
        for (size_t k = 0; k < m.hopping.terms.size(); ++k) {
            const long j = dom.shift(i, m.hopping.terms[k].eta);
            if (j < 0) continue;
            const long c = local[static_cast<size_t>(j)];
            if (c < 0) continue;
            trip.emplace_back(static_cast<int>(r), static_cast<int>(c), m.hopping.coefficient(k, x, eps));
        }
    }
    Eigen::SparseMatrix<double> A(n, n);
    A.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseMatrix<double> At = A.transpose();
    Eigen::SparseMatrix<double> diff = A - At;
    for (int k = 0; k < diff.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(diff, k); it; ++it)
            op.asymmetry = std::max(op.asymmetry, std::abs(it.value()));
    op.H = 0.5 * (A + At);
    int bw = 0;
    for (int k = 0; k < op.H.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(op.H, k); it; ++it)
            bw = std::max(bw, static_cast<int>(std::abs(it.row() - it.col())));
    op.bandwidth = bw;
    return op;
}

}  // namespace tunnel
