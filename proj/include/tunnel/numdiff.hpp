#pragma once

#include "tunnel/model.hpp"

namespace tunnel {

// Fourth-order central differences.
Vec fd_gradient(const Field& f, const Vec& x, double h = 1e-3);
Mat fd_hessian(const Field& f, const Vec& x, double h = 1e-3);
// Hessian of f restricted to the span of the orthonormal columns of dirs.
Mat fd_hessian_along(const Field& f, const Vec& x, const Mat& dirs, double h);

}  // namespace tunnel
