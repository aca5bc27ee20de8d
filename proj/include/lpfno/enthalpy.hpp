#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "lpfno/grid.hpp"

namespace lpfno {

/// Ti-6Al-4V thermophysical constants used for normalized enthalpy, liquid
/// fraction and gas masking.
struct MaterialTable {
    Real eta = 0.35;            // absorptivity
    Real rho = 4420.0;          // kg/m^3
    Real cp = 750.0;            // J/(kg K)
    Real dT_m = 1573.0;         // K, rise to melting
    Real diffusivity = 8.1e-6;  // m^2/s
    Real sigma_beam = 50e-6;    // m
    Real t_solidus = 1873.0;
    Real t_liquidus = 1923.0;
    Real t_boil = 3123.0;

    Real conductivity() const { return rho * cp * diffusivity; }
    void validate() const;
    friend bool operator==(const MaterialTable&, const MaterialTable&) = default;
};

inline constexpr Real kAmbientTemperature = 300.0;

Real normalized_enthalpy(Real power_w, Real v_scan_m_s, const MaterialTable& mat = {});
Real speed_from_enthalpy(Real h_star, Real power_w, const MaterialTable& mat = {});

struct ProcessParams {
    Real power_w = 0;
    Real v_scan_m_s = 0;
    Real h_star = 0;

    friend bool operator==(const ProcessParams&, const ProcessParams&) = default;
};

ProcessParams make_process_params(Real power_w, Real v_scan_m_s, const MaterialTable& mat = {});

enum class Split { train, validation, test };
std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct PlanPoint {
    std::string id;
    ProcessParams params;
    std::size_t h_row = 0;
    std::size_t p_col = 0;
    Split split = Split::train;
};

struct ExcludedPoint {
    std::size_t h_row = 0;
    std::size_t p_col = 0;
    Real power_w = 0;
    Real h_star = 0;
    Real v_scan_m_s = 0;
    std::string reason;
};

struct SplitRule {
    std::uint64_t seed = 0;
};

struct SamplingPlan {
    std::array<Real, 2> p_range{};
    std::array<Real, 2> h_range{};
    std::size_t n_p = 0;
    std::size_t n_h = 0;
    std::array<Real, 2> v_bounds{0.1, 1.0};
    MaterialTable material;
    std::vector<PlanPoint> points;
    std::vector<ExcludedPoint> excluded;
};

/// Lattice equally spaced in (H*, P); the scan speed of each node follows from
/// the enthalpy relation. Nodes outside v_bounds are dropped with a reason.
/// Every H* row gets its median-power point as validation and the next-higher
/// power point as test.
SamplingPlan build_plan(std::array<Real, 2> p_range, std::array<Real, 2> h_range, std::size_t n_p,
                        std::size_t n_h, std::array<Real, 2> v_bounds = {0.1, 1.0},
                        SplitRule rule = {}, const MaterialTable& mat = {});

nlohmann::json to_json(const MaterialTable& mat);
MaterialTable material_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SamplingPlan& plan);
SamplingPlan plan_from_json(const nlohmann::json& j);

}  // namespace lpfno
