#pragma once

#include "tunnel/lattice.hpp"
#include "tunnel/model.hpp"
#include "tunnel/spectral.hpp"

#include <string>
#include <vector>

namespace tunnel {

struct ExperimentConfig {
    std::string source;  // path of the model file, empty when parsed from text
    ModelSpec model;
    Vec box_lo, box_hi;
    std::vector<double> eps_list;
    int well_j = 0, well_k = 1;
    Vec mj_lo, mj_hi, mk_lo, mk_hi;
    double ellipse_a = 0.3;
    double band_R = 1.0;
    int split_axis = 0;
    std::vector<long> grid;  // eikonal grid nodes per axis
    int level = 0;
    std::string out_dir = "out";
    int threads = 1;
    unsigned seed = 12345;
    Precision precision = Precision::binary128;

    Region region_j() const { return Region::box(mj_lo, mj_hi); }
    Region region_k() const { return Region::box(mk_lo, mk_hi); }
    const Vec& well_point_j() const { return model.potential.wells.at(static_cast<size_t>(well_j)); }
    const Vec& well_point_k() const { return model.potential.wells.at(static_cast<size_t>(well_k)); }
    LatticeDomain lattice(double eps) const { return LatticeDomain(eps, box_lo, box_hi, model.periodic); }
};

// INI model file with sections [model], [hopping], [potential], [domain] and an optional [experiment].
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Comma-separated list of constant expressions ("1/10, 1/16").
std::vector<double> parse_number_list(const std::string& s);

}  // namespace tunnel
