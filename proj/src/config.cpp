#include "tunnel/config.hpp"

#include "tunnel/expr.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace tunnel {

namespace pt = boost::property_tree;

namespace {

double constant(const std::string& s)
{
    const Expression e(s, 0);
    return e(std::span<const double>{});
}

Field make_field(const std::string& src, int dim)
{
    const Expression e(src, dim);
    return [e](const Vec& x) { return e(std::span<const double>(x.data(), static_cast<size_t>(x.size()))); };
}

Vec to_vec(const std::vector<double>& v, int dim, const std::string& what)
{
    if (static_cast<int>(v.size()) != dim)
        throw std::invalid_argument(what + ": expected " + std::to_string(dim) + " coordinates");
    return Eigen::Map<const Vec>(v.data(), dim);
}

const pt::ptree& section(const pt::ptree& root, const std::string& name)
{
    auto it = root.find(name);
    if (it == root.not_found()) throw std::invalid_argument("missing section [" + name + "]");
    return it->second;
}

std::string get(const pt::ptree& sec, const std::string& key, const std::string& fallback = "")
{
    for (const auto& [k, v] : sec)
        if (boost::algorithm::trim_copy(k) == key) return boost::algorithm::trim_copy(v.data());
    return fallback;
}

bool get_bool(const pt::ptree& sec, const std::string& key, bool fallback)
{
    const std::string s = boost::algorithm::to_lower_copy(get(sec, key));
    if (s.empty()) return fallback;
    return s == "1" || s == "true" || s == "yes" || s == "on";
}

std::vector<int> parse_offset(const std::string& s, int dim)
{
    std::vector<std::string> parts;
    boost::algorithm::split(parts, s, boost::is_any_of(","));
    if (static_cast<int>(parts.size()) != dim)
        throw std::invalid_argument("offset '" + s + "' has wrong number of components");
    std::vector<int> eta;
    for (auto& p : parts) eta.push_back(std::stoi(boost::algorithm::trim_copy(p)));
    return eta;
}

}  // namespace

std::vector<double> parse_number_list(const std::string& s)
{
    std::vector<std::string> parts;
    boost::algorithm::split(parts, s, boost::is_any_of(","));
    std::vector<double> out;
    for (auto& p : parts) {
        boost::algorithm::trim(p);
        if (!p.empty()) out.push_back(constant(p));
    }
    return out;
}

ExperimentConfig parse_config(const std::string& text)
{
    pt::ptree root;
    std::istringstream in(text);
    pt::ini_parser::read_ini(in, root);

    ExperimentConfig cfg;
    const auto& msec = section(root, "model");
    const int dim = std::stoi(get(msec, "dimension", "1"));
    ModelSpec& m = cfg.model;
    m.dim = dim;
    m.hopping.dim = dim;
    m.hopping.order = std::stoi(get(msec, "order", "1"));
    m.hopping.decay_rate = constant(get(msec, "decay_rate", "1"));
    m.hopping.symmetrize = get_bool(msec, "symmetrize", false);

    std::map<std::vector<int>, std::map<int, std::string>> hop;
    for (const auto& [key, val] : section(root, "hopping")) {
        std::string k = boost::algorithm::trim_copy(key);
        int order = 0;
        if (auto at = k.find('@'); at != std::string::npos) {
            order = std::stoi(k.substr(at + 1));
            k = k.substr(0, at);
        }
        if (order < 0 || order >= m.hopping.order)
            throw std::invalid_argument("hopping order " + std::to_string(order) + " outside declared expansion");
        hop[parse_offset(k, dim)][order] = boost::algorithm::trim_copy(val.data());
    }
    for (const auto& [eta, orders] : hop) {
        HoppingTerm t;
        t.eta = eta;
        const int top = orders.rbegin()->first;
        for (int k = 0; k <= top; ++k) {
            auto it = orders.find(k);
            const std::string src = it == orders.end() ? "0" : it->second;
            t.sources.push_back(src);
            t.orders.push_back(make_field(src, dim));
        }
        m.hopping.terms.push_back(std::move(t));
    }

    const auto& psec = section(root, "potential");
    const std::string v0 = get(psec, "V0");
    if (v0.empty()) throw std::invalid_argument("potential V0 missing");
    m.potential.sources.push_back(v0);
    m.potential.orders.push_back(make_field(v0, dim));
    const std::string v1 = get(psec, "V1");
    if (!v1.empty()) {
        m.potential.sources.push_back(v1);
        m.potential.orders.push_back(make_field(v1, dim));
    }
    std::vector<std::string> wells;
    const std::string wsrc = get(psec, "wells");
    boost::algorithm::split(wells, wsrc, boost::is_any_of("|"));
    for (auto& w : wells) {
        boost::algorithm::trim(w);
        if (!w.empty()) m.potential.wells.push_back(to_vec(parse_number_list(w), dim, "well"));
    }

    const auto& dsec = section(root, "domain");
    cfg.box_lo = to_vec(parse_number_list(get(dsec, "box_lo")), dim, "box_lo");
    cfg.box_hi = to_vec(parse_number_list(get(dsec, "box_hi")), dim, "box_hi");
    const std::string per = get(dsec, "periodic");
    m.periodic.assign(static_cast<size_t>(dim), false);
    if (!per.empty()) {
        const auto flags = parse_number_list(per);
        if (static_cast<int>(flags.size()) != dim) throw std::invalid_argument("periodic: wrong number of flags");
        for (int i = 0; i < dim; ++i) m.periodic[static_cast<size_t>(i)] = flags[static_cast<size_t>(i)] != 0.0;
    }
    cfg.eps_list = parse_number_list(get(dsec, "epsilon"));
    cfg.mj_lo = to_vec(parse_number_list(get(dsec, "Mj_lo")), dim, "Mj_lo");
    cfg.mj_hi = to_vec(parse_number_list(get(dsec, "Mj_hi")), dim, "Mj_hi");
    cfg.mk_lo = to_vec(parse_number_list(get(dsec, "Mk_lo")), dim, "Mk_lo");
    cfg.mk_hi = to_vec(parse_number_list(get(dsec, "Mk_hi")), dim, "Mk_hi");
    cfg.ellipse_a = constant(get(dsec, "ellipse_a", "0.3"));
    cfg.band_R = constant(get(dsec, "band_R", "1"));
    cfg.split_axis = std::stoi(get(dsec, "split_axis", "0"));
    if (cfg.split_axis < 0 || cfg.split_axis >= dim) throw std::invalid_argument("split_axis out of range");

    auto eit = root.find("experiment");
    if (eit != root.not_found()) {
        const auto& esec = eit->second;
        cfg.well_j = std::stoi(get(esec, "well_j", "0"));
        cfg.well_k = std::stoi(get(esec, "well_k", "1"));
        for (double g : parse_number_list(get(esec, "grid"))) cfg.grid.push_back(static_cast<long>(g));
        cfg.level = std::stoi(get(esec, "level", "0"));
        cfg.out_dir = get(esec, "output", "out");
        cfg.threads = std::stoi(get(esec, "threads", "1"));
        cfg.seed = static_cast<unsigned>(std::stoul(get(esec, "seed", "12345")));
        const std::string prec = get(esec, "precision", "quad");
        if (prec == "double") cfg.precision = Precision::binary64;
        else if (prec == "quad") cfg.precision = Precision::binary128;
        else throw std::invalid_argument("precision must be 'double' or 'quad'");
    }
    if (cfg.grid.empty()) cfg.grid.assign(static_cast<size_t>(dim), 401);
    if (cfg.grid.size() == 1 && dim > 1) cfg.grid.assign(static_cast<size_t>(dim), cfg.grid[0]);
    if (static_cast<int>(cfg.grid.size()) != dim) throw std::invalid_argument("grid: wrong number of axes");
    const int nw = static_cast<int>(m.potential.wells.size());
    if (cfg.well_j < 0 || cfg.well_j >= nw || cfg.well_k < 0 || cfg.well_k >= nw || cfg.well_j == cfg.well_k)
        throw std::invalid_argument("well indices must name two distinct declared wells");
    if (cfg.eps_list.empty()) throw std::invalid_argument("epsilon list is empty");
    for (size_t i = 0; i < cfg.eps_list.size(); ++i) {
        if (!(cfg.eps_list[i] > 0.0)) throw std::invalid_argument("epsilon values must be positive");
        if (i > 0 && !(cfg.eps_list[i] < cfg.eps_list[i - 1]))
            throw std::invalid_argument("epsilon values must be decreasing");
    }
    const Vec& wj = m.potential.wells[static_cast<size_t>(cfg.well_j)];
    const Vec& wk = m.potential.wells[static_cast<size_t>(cfg.well_k)];
    if ((wj - wk).norm() == 0.0) throw std::invalid_argument("wells j and k coincide");
    if (!(wj[cfg.split_axis] < 0.0 && wk[cfg.split_axis] > 0.0))
        throw std::invalid_argument("coordinates must put well j below and well k above the splitting hyperplane");
    m.check_structure();
    return cfg;
}

ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open model file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    auto cfg = parse_config(ss.str());
    cfg.source = path;
    return cfg;
}

}  // namespace tunnel
