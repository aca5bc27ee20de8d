#pragma once

#include <cmath>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "json.hpp"
#include "lpfno/enthalpy.hpp"
#include "lpfno/grid.hpp"

namespace lpfno {

/// Lab- or laser-frame snapshots with their times (s) and laser x-positions (m).
struct FieldSequence {
    Grid3 grid;
    std::vector<Real> times;
    std::vector<FieldBundle> frames;
    std::vector<Real> laser_x;

    std::size_t size() const { return frames.size(); }
    void validate() const;
};

inline constexpr std::size_t kDefaultWindow = 30;
inline constexpr Real kDefaultMaskSharpness = 20.0;

/// Default laser cell in the co-moving frame: two thirds along x.
inline std::size_t default_laser_index(const Grid3& g) { return (2 * g.nx()) / 3; }

/// Resamples at dt = dx / v_scan (nearest snapshot, no temporal interpolation)
/// and shifts each frame along x so the laser sits at `laser_index`. Cells
/// shifted in from outside the domain get ambient values (300 K, alpha 1, fl 0).
FieldSequence to_moving_frame(const FieldSequence& seq, Real v_scan,
                              std::optional<std::size_t> laser_index = std::nullopt);

/// Cellwise mean of the final n frames.
FieldBundle window_average(const FieldSequence& seq, std::size_t n = kDefaultWindow);

/// Sequence of window averages ending at frames n-1, n, ..., size()-1.
FieldSequence sliding_window_average(const FieldSequence& seq, std::size_t n = kDefaultWindow);

/// Entry k-1 is (t_k, domain mean |T_k - T_{k-1}|) for k = 1..size()-1.
std::vector<std::pair<Real, Real>> temporal_difference_curve(const FieldSequence& seq);

struct QuasiSteadySample {
    FieldBundle bundle;
    std::vector<std::pair<Real, Real>> raw_curve;
    std::vector<std::pair<Real, Real>> averaged_curve;
    bool steady = false;
};

/// Moving frame, then window average of the last n laser-frame steps. The
/// sample is steady when the last entry of the averaged curve (or the raw
/// curve when too short to average twice) is below threshold_k.
QuasiSteadySample reduce_quasi_steady(const FieldSequence& lab, Real v_scan,
                                      std::size_t n = kDefaultWindow, Real threshold_k = 1.0,
                                      std::optional<std::size_t> laser_index = std::nullopt);

struct NormalizationScales {
    Real L_ref = 1e-4;
    Real T_ref = 3000.0;
    Real V_ref = 1e-1;
    Real P_ref = 10.0;
    Real H_ref = 7.5;

    void validate() const;
    friend bool operator==(const NormalizationScales&, const NormalizationScales&) = default;
};

nlohmann::json to_json(const NormalizationScales& s);
NormalizationScales scales_from_json(const nlohmann::json& j);

/// Only temperature carries a unit inside a bundle; fractions pass through.
FieldBundle normalize(const FieldBundle& bundle, const NormalizationScales& s);
FieldBundle denormalize(const FieldBundle& bundle, const NormalizationScales& s);
ProcessParams normalize(const ProcessParams& p, const NormalizationScales& s);
ProcessParams denormalize(const ProcessParams& p, const NormalizationScales& s);

inline Real liquid_fraction(Real T, const MaterialTable& mat) {
    if (T <= mat.t_solidus) return 0;
    if (T >= mat.t_liquidus) return 1;
    return (T - mat.t_solidus) / (mat.t_liquidus - mat.t_solidus);
}

/// Subgradient of liquid_fraction: constant inside the mushy zone, 0 elsewhere.
inline Real liquid_fraction_slope(Real T, const MaterialTable& mat) {
    return (T > mat.t_solidus && T < mat.t_liquidus) ? 1 / (mat.t_liquidus - mat.t_solidus) : 0;
}

/// Smooth metal gate 0.5 * (tanh(k (alpha - 0.5)) + 1).
inline Real metal_gate(Real alpha, Real k) { return 0.5 * (std::tanh(k * (alpha - 0.5)) + 1); }

inline bool is_metal(Real alpha) { return alpha >= 0.5; }

ScalarField3 liquid_fraction(const ScalarField3& T, const MaterialTable& mat);

/// Blends T toward T_boil through the tanh gate, then derives fl from the
/// blended temperature. fl and alpha are zeroed outside the metal (alpha < 0.5).
FieldBundle alpha_mask(const ScalarField3& T, const ScalarField3& alpha,
                       Real k = kDefaultMaskSharpness, const MaterialTable& mat = {});

/// 1 where alpha >= tau and fl >= tau, else 0.
ScalarField3 meltpool_mask(const ScalarField3& alpha, const ScalarField3& fl, Real tau = 0.5);

/// Transient dump on disk: manifest.json with a per-frame table plus .f32 arrays.
void write_sequence(const FieldSequence& seq, const ProcessParams& params,
                    const MaterialTable& mat, const std::filesystem::path& dir);

struct StoredSequence {
    FieldSequence sequence;
    ProcessParams params;
    MaterialTable material;
};

StoredSequence read_sequence(const std::filesystem::path& dir);

}  // namespace lpfno
