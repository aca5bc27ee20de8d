#pragma once

#include <filesystem>
#include <optional>

#include "lpfno/dataset.hpp"
#include "lpfno/enthalpy.hpp"
#include "lpfno/preprocess.hpp"

namespace lpfno {

struct OracleConfig {
    MaterialTable material;
    Grid3 grid = make_grid(90, 40, 30, 1e-5);
    Real laser_fraction = 2.0 / 3.0;
    Real r_min = 0;  // 0 selects dx / 2
    bool carve_depression = true;
    Real mask_sharpness = kDefaultMaskSharpness;

    Real effective_r_min() const { return r_min > 0 ? r_min : grid.dx / 2; }
    std::size_t laser_index() const;
    /// Laser spot in the co-moving frame: x node at laser_index, y mid-width, top surface.
    std::array<Real, 3> laser_position() const;
    void validate() const;
};

/// Quasi-steady point source moving along +x over a half-space. xi is measured
/// along the scan direction from the source, z downward from the surface.
Real oracle_temperature(Real xi, Real y, Real z, Real power_w, Real v_scan_m_s,
                        const MaterialTable& mat, Real r_min);

/// Raw temperature with the source at an arbitrary x position (lab frame).
ScalarField3 oracle_field(const ProcessParams& params, const OracleConfig& cfg, Real laser_x);

/// Cells with T >= T_boil that connect to the top face through such cells.
std::vector<bool> depression_cells(const ScalarField3& T, Real t_boil);

/// Carves the depression, then masks exactly as in preprocessing.
FieldBundle bundle_from_temperature(const ScalarField3& T, const OracleConfig& cfg);

FieldBundle generate_sample(const ProcessParams& params, const OracleConfig& cfg);

/// Writes one sample per plan point plus manifest.json. The directory is
/// assembled next to `dir` and swapped in only when complete.
DatasetManifest generate_dataset(const SamplingPlan& plan, const OracleConfig& cfg,
                                 const std::filesystem::path& dir);

struct SweepConfig {
    Real duration_s = 1.2e-3;
    Real cadence_s = 5e-6;
    Real x_start = 0;  // laser x at t = 0, relative to the grid origin
};

/// Lab-frame sequence with the source travelling at v_scan.
FieldSequence transient_sweep(const ProcessParams& params, const OracleConfig& cfg,
                              const SweepConfig& sweep);

}  // namespace lpfno
