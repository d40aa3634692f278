#pragma once

#include "tunnel/lattice.hpp"
#include "tunnel/model.hpp"

#include <Eigen/Sparse>

#include <vector>

namespace tunnel {

// (H u)(x) = sum_gamma a_gamma(x; eps) u(x + gamma) + V(x; eps) u(x), with u = 0 off the domain.
std::vector<double> apply_operator(const ModelSpec& m, const LatticeDomain& dom, const std::vector<double>& u);

// Dirichlet realization on M: u must vanish off M, the result is set to zero off M.
std::vector<double> apply_dirichlet(const ModelSpec& m, const LatticeDomain& dom, const Region& M,
                                    const std::vector<double>& u);

struct AssembledOperator {
    std::vector<long> points;  // domain indices of the rows, ascending
    Eigen::SparseMatrix<double> H;
    double asymmetry = 0.0;  // max |H_ij - H_ji| before symmetrization
    int bandwidth = 0;
};

AssembledOperator assemble(const ModelSpec& m, const LatticeDomain& dom, const Region& M);

}  // namespace tunnel
