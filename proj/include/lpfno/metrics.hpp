#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "lpfno/enthalpy.hpp"
#include "lpfno/grid.hpp"

namespace lpfno {

inline constexpr Real kMetricEpsilon = 1e-8;
inline constexpr Real kMaskThreshold = 0.5;

/// Mean over grid points of the squared difference.
Real field_l2_loss(const ScalarField3& pred, const ScalarField3& target);

/// Per-sample spatial mean of |e|, averaged over samples.
Real mae(const std::vector<ScalarField3>& preds, const std::vector<ScalarField3>& targets);
/// Per-sample spatial root-mean-square of e, averaged over samples.
Real rmse(const std::vector<ScalarField3>& preds, const std::vector<ScalarField3>& targets);
/// Global ground-truth mean over all samples and points.
Real global_mean(const std::vector<ScalarField3>& targets);
Real rel_mae(const std::vector<ScalarField3>& preds, const std::vector<ScalarField3>& targets,
             Real eps = kMetricEpsilon);
Real rel_rmse(const std::vector<ScalarField3>& preds, const std::vector<ScalarField3>& targets,
              Real eps = kMetricEpsilon);
/// Mean per-sample IoU of the masks {v >= tau}; an empty union scores 1.
Real iou(const std::vector<ScalarField3>& preds, const std::vector<ScalarField3>& targets,
         Real tau = kMaskThreshold);

struct FieldMetrics {
    Real mae = 0;
    Real rmse = 0;
    Real rel_mae = 0;
    Real rel_rmse = 0;
    Real iou = 1;
};

struct BundleMetrics {
    FieldMetrics T;
    FieldMetrics alpha;
    FieldMetrics fl;
};

/// All metrics for matched bundle lists. IoU is reported for alpha and fl;
/// the T entry carries IoU of the melt-pool derived from fl as a courtesy.
BundleMetrics evaluate_bundles(const std::vector<FieldBundle>& preds,
                               const std::vector<FieldBundle>& targets);

nlohmann::json to_json(const FieldMetrics& m);
nlohmann::json to_json(const BundleMetrics& m);

/// Named scalar view of a BundleMetrics, e.g. "T.rel_rmse", "fl.iou".
std::vector<std::pair<std::string, Real>> flatten(const BundleMetrics& m);

struct SampleMetrics {
    std::string id;
    ProcessParams params;
    BundleMetrics metrics;
};

struct ProcessMapRow {
    std::string id;
    Real power_w = 0;
    Real v_scan_m_s = 0;
    Real h_star = 0;
    std::vector<std::pair<std::string, Real>> values;
};

/// One row per sample, sorted by (H*, P, id).
std::vector<ProcessMapRow> process_map(const std::vector<SampleMetrics>& samples);
std::string process_map_csv(const std::vector<ProcessMapRow>& rows);
nlohmann::json to_json(const std::vector<ProcessMapRow>& rows);

}  // namespace lpfno
