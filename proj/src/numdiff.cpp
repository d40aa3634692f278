#include "tunnel/numdiff.hpp"

namespace tunnel {

Vec fd_gradient(const Field& f, const Vec& x, double h)
{
    Vec g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        Vec a = x, b = x, c = x, d = x;
        a[i] += 2 * h;
        b[i] += h;
        c[i] -= h;
        d[i] -= 2 * h;
        g[i] = (-f(a) + 8 * f(b) - 8 * f(c) + f(d)) / (12 * h);
    }
    return g;
}

Mat fd_hessian_along(const Field& f, const Vec& x, const Mat& dirs, double h)
{
    const Eigen::Index k = dirs.cols();
    Mat H(k, k);
    const double f0 = f(x);
    for (Eigen::Index i = 0; i < k; ++i) {
        const Vec u = dirs.col(i);
        H(i, i) = (-f(x + 2 * h * u) + 16 * f(x + h * u) - 30 * f0 + 16 * f(x - h * u) -
                   f(x - 2 * h * u)) /
                  (12 * h * h);
        for (Eigen::Index j = 0; j < i; ++j) {
            const Vec v = dirs.col(j);
            auto cross = [&](double s) {
                return f(x + s * (u + v)) - f(x + s * (u - v)) - f(x - s * (u - v)) + f(x - s * (u + v));
            };
            // Richardson combination of two four-point stencils.
            H(i, j) = H(j, i) = (16 * cross(h) / (4 * h * h) - cross(2 * h) / (16 * h * h)) / 15;
        }
    }
    return H;
}

Mat fd_hessian(const Field& f, const Vec& x, double h)
{
    return fd_hessian_along(f, x, Mat::Identity(x.size(), x.size()), h);
}

}  // namespace tunnel
