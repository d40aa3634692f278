#pragma once

#include "tunnel/model.hpp"

#include <functional>
#include <string>
#include <vector>

namespace tunnel {

class Region {
public:
    Region();
    Region(std::function<bool(const Vec&)> pred, std::string name);

    static Region everything();
    static Region box(const Vec& lo, const Vec& hi);
    // {x : x[axis] <= bound} or {x : x[axis] >= bound}.
    static Region halfspace(int axis, double bound, bool below);

    bool contains(const Vec& x) const { return pred_(x); }
    // True when every point within sup-distance margin of x (sampled at the 3^d corners) lies in the region.
    bool contains_interior(const Vec& x, double margin) const;
    Region intersect(const Region& other) const;
    const std::string& name() const { return name_; }

private:
    std::function<bool(const Vec&)> pred_;
    std::string name_;
};

// The lattice eps*Z^d restricted to a box, optionally periodic along some axes.
// Non-periodic axes hold the points i*eps inside [lo, hi]; a periodic axis holds
// period/eps points starting at the first lattice point >= lo.
class LatticeDomain {
public:
    LatticeDomain(double eps, const Vec& lo, const Vec& hi, std::vector<bool> periodic = {});

    int dim() const { return static_cast<int>(lo_.size()); }
    double eps() const { return eps_; }
    long size() const { return total_; }
    const std::vector<long>& extent() const { return n_; }
    const std::vector<bool>& periodic() const { return periodic_; }
    const Vec& lo() const { return lo_; }
    const Vec& hi() const { return hi_; }

    Vec point(long index) const;
    std::vector<long> multi_index(long index) const;
    long linear(const std::vector<long>& mi) const;
    // Index of point(index) + eps*eta, or -1 when it leaves the box.
    long shift(long index, const std::vector<int>& eta) const;
    long nearest(const Vec& x) const;
    // Stride of axis in the linear ordering (axis 0 slowest).
    long stride(int axis) const { return stride_[static_cast<size_t>(axis)]; }
    std::vector<long> points_in(const Region& r) const;
    // Map a displacement to its minimal periodic representative.
    Vec wrap(const Vec& dx) const;

private:
    double eps_;
    Vec lo_, hi_;
    std::vector<bool> periodic_;
    std::vector<long> first_, n_, stride_;
    long total_ = 0;
};

}  // namespace tunnel
