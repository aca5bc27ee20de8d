#include "lpfno/enthalpy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

namespace lpfno {

void MaterialTable::validate() const {
    for (Real v : {eta, rho, cp, dT_m, diffusivity, sigma_beam, t_solidus, t_liquidus, t_boil})
        require(v > 0 && std::isfinite(v), Errc::invalid_argument,
                "material entries must be strictly positive");
    require(t_solidus < t_liquidus && t_liquidus < t_boil, Errc::invalid_argument,
            "material requires T_solidus < T_liquidus < T_boil");
}

Real normalized_enthalpy(Real power_w, Real v_scan_m_s, const MaterialTable& mat) {
    require(power_w > 0 && v_scan_m_s > 0, Errc::invalid_argument,
            "normalized enthalpy needs positive power and speed");
    const Real s3 = mat.sigma_beam * mat.sigma_beam * mat.sigma_beam;
    return mat.eta * power_w /
           (mat.rho * mat.cp * mat.dT_m *
            std::sqrt(std::numbers::pi * mat.diffusivity * s3 * v_scan_m_s));
}

Real speed_from_enthalpy(Real h_star, Real power_w, const MaterialTable& mat) {
    require(h_star > 0 && power_w > 0, Errc::invalid_argument,
            "speed inversion needs positive enthalpy and power");
    const Real s3 = mat.sigma_beam * mat.sigma_beam * mat.sigma_beam;
    const Real q = mat.eta * power_w / (mat.rho * mat.cp * mat.dT_m * h_star);
    return q * q / (std::numbers::pi * mat.diffusivity * s3);
}

ProcessParams make_process_params(Real power_w, Real v_scan_m_s, const MaterialTable& mat) {
    return ProcessParams{power_w, v_scan_m_s, normalized_enthalpy(power_w, v_scan_m_s, mat)};
}

std::string to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::validation: return "validation";
        case Split::test: return "test";
    }
    return "train";
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "validation") return Split::validation;
    if (s == "test") return Split::test;
    fail(Errc::invalid_argument, "unknown split label '" + s + "'");
}

namespace {

Real lattice(std::array<Real, 2> range, std::size_t i, std::size_t n) {
    return range[0] + (range[1] - range[0]) * static_cast<Real>(i) / static_cast<Real>(n - 1);
}

std::string point_id(std::size_t h, std::size_t p) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "h%02zu_p%02zu", h, p);
    return buf;
}

}  // namespace

SamplingPlan build_plan(std::array<Real, 2> p_range, std::array<Real, 2> h_range, std::size_t n_p,
                        std::size_t n_h, std::array<Real, 2> v_bounds, SplitRule rule,
                        const MaterialTable& mat) {
    mat.validate();
    require(n_p >= 2 && n_h >= 2, Errc::invalid_argument, "plan lattice counts must be >= 2");
    require(p_range[0] > 0 && p_range[1] > p_range[0], Errc::invalid_argument,
            "power range must be positive and non-degenerate");
    require(h_range[0] > 0 && h_range[1] > h_range[0], Errc::invalid_argument,
            "enthalpy range must be positive and non-degenerate");
    require(v_bounds[0] > 0 && v_bounds[1] >= v_bounds[0], Errc::invalid_argument,
            "speed bounds must be positive and ordered");

    SamplingPlan plan;
    plan.p_range = p_range;
    plan.h_range = h_range;
    plan.n_p = n_p;
    plan.n_h = n_h;
    plan.v_bounds = v_bounds;
    plan.material = mat;

    std::mt19937_64 rng(rule.seed);
    for (std::size_t h = 0; h < n_h; ++h) {
        const Real h_star = lattice(h_range, h, n_h);
        std::vector<PlanPoint> row;
        for (std::size_t p = 0; p < n_p; ++p) {
            const Real power = lattice(p_range, p, n_p);
            const Real v = speed_from_enthalpy(h_star, power, mat);
            if (v < v_bounds[0] || v > v_bounds[1]) {
                char reason[96];
                std::snprintf(reason, sizeof reason, "scan speed %.4g m/s outside [%.4g, %.4g]", v,
                              v_bounds[0], v_bounds[1]);
                plan.excluded.push_back({h, p, power, h_star, v, reason});
                continue;
            }
            row.push_back(PlanPoint{point_id(h, p), ProcessParams{power, v, h_star}, h, p,
                                    Split::train});
        }
        if (row.empty()) continue;
        // Row is already ordered by power. Even-sized rows have two medians.
        std::size_t val = (row.size() - 1) / 2;
        if (row.size() % 2 == 0 && (rng() & 1u)) val += 1;
        row[val].split = Split::validation;
        if (row.size() > 1) {
            const std::size_t test = val + 1 < row.size() ? val + 1 : val - 1;
            row[test].split = Split::test;
        }
        plan.points.insert(plan.points.end(), row.begin(), row.end());
    }
    require(!plan.points.empty(), Errc::empty_plan,
            "every lattice point violates the scan speed bounds");
    return plan;
}

nlohmann::json to_json(const MaterialTable& m) {
    return {{"eta", m.eta},
            {"rho", m.rho},
            {"cp", m.cp},
            {"dT_m", m.dT_m},
            {"diffusivity", m.diffusivity},
            {"sigma_beam", m.sigma_beam},
            {"t_solidus", m.t_solidus},
            {"t_liquidus", m.t_liquidus},
            {"t_boil", m.t_boil}};
}

MaterialTable material_from_json(const nlohmann::json& j) {
    MaterialTable m;
    m.eta = j.at("eta").get<Real>();
    m.rho = j.at("rho").get<Real>();
    m.cp = j.at("cp").get<Real>();
    m.dT_m = j.at("dT_m").get<Real>();
    m.diffusivity = j.at("diffusivity").get<Real>();
    m.sigma_beam = j.at("sigma_beam").get<Real>();
    m.t_solidus = j.at("t_solidus").get<Real>();
    m.t_liquidus = j.at("t_liquidus").get<Real>();
    m.t_boil = j.at("t_boil").get<Real>();
    m.validate();
    return m;
}

nlohmann::json to_json(const SamplingPlan& plan) {
    nlohmann::json points = nlohmann::json::array();
    for (const auto& p : plan.points)
        points.push_back({{"id", p.id},
                          {"power_w", p.params.power_w},
                          {"v_scan_m_s", p.params.v_scan_m_s},
                          {"h_star", p.params.h_star},
                          {"h_row", p.h_row},
                          {"p_col", p.p_col},
                          {"split", to_string(p.split)}});
    nlohmann::json excluded = nlohmann::json::array();
    for (const auto& e : plan.excluded)
        excluded.push_back({{"h_row", e.h_row},
                            {"p_col", e.p_col},
                            {"power_w", e.power_w},
                            {"h_star", e.h_star},
                            {"v_scan_m_s", e.v_scan_m_s},
                            {"reason", e.reason}});
    return {{"p_range", plan.p_range},   {"h_range", plan.h_range},
            {"n_p", plan.n_p},           {"n_h", plan.n_h},
            {"v_bounds", plan.v_bounds}, {"material", to_json(plan.material)},
            {"points", points},          {"excluded", excluded}};
}

SamplingPlan plan_from_json(const nlohmann::json& j) {
    SamplingPlan plan;
    plan.p_range = j.at("p_range").get<std::array<Real, 2>>();
    plan.h_range = j.at("h_range").get<std::array<Real, 2>>();
    plan.n_p = j.at("n_p").get<std::size_t>();
    plan.n_h = j.at("n_h").get<std::size_t>();
    plan.v_bounds = j.at("v_bounds").get<std::array<Real, 2>>();
    plan.material = material_from_json(j.at("material"));
    for (const auto& p : j.at("points"))
        plan.points.push_back(PlanPoint{
            p.at("id").get<std::string>(),
            ProcessParams{p.at("power_w").get<Real>(), p.at("v_scan_m_s").get<Real>(),
                          p.at("h_star").get<Real>()},
            p.at("h_row").get<std::size_t>(), p.at("p_col").get<std::size_t>(),
            split_from_string(p.at("split").get<std::string>())});
    if (j.contains("excluded"))
        for (const auto& e : j.at("excluded"))
            plan.excluded.push_back({e.at("h_row").get<std::size_t>(),
                                     e.at("p_col").get<std::size_t>(), e.at("power_w").get<Real>(),
                                     e.at("h_star").get<Real>(), e.at("v_scan_m_s").get<Real>(),
                                     e.at("reason").get<std::string>()});
    return plan;
}

}  // namespace lpfno
