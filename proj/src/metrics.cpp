#include "lpfno/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace lpfno {

namespace {

void check_lists(const std::vector<ScalarField3>& preds, const std::vector<ScalarField3>& targets) {
    require(!preds.empty(), Errc::invalid_argument, "metric over an empty sample set");
    require(preds.size() == targets.size(), Errc::length_mismatch,
            "prediction and target lists differ in length");
    for (std::size_t s = 0; s < preds.size(); ++s)
        require(preds[s].grid().shape == targets[s].grid().shape, Errc::shape_mismatch,
                "prediction and target grids differ");
}

template <class F>
Real sample_mean(const std::vector<ScalarField3>& preds, const std::vector<ScalarField3>& targets,
                 F per_sample) {
    check_lists(preds, targets);
    Real acc = 0;
    for (std::size_t s = 0; s < preds.size(); ++s) acc += per_sample(preds[s], targets[s]);
    return acc / static_cast<Real>(preds.size());
}

}  // namespace

Real field_l2_loss(const ScalarField3& pred, const ScalarField3& target) {
    require(pred.grid() == target.grid(), Errc::shape_mismatch, "loss grid mismatch");
    Real acc = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const Real d = pred[i] - target[i];
        acc += d * d;
    }
    return acc / static_cast<Real>(pred.size());
}

Real mae(const std::vector<ScalarField3>& preds, const std::vector<ScalarField3>& targets) {
    return sample_mean(preds, targets, [](const ScalarField3& p, const ScalarField3& t) {
        Real acc = 0;
        for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - t[i]);
        return acc / static_cast<Real>(p.size());
    });
}

Real rmse(const std::vector<ScalarField3>& preds, const std::vector<ScalarField3>& targets) {
    return sample_mean(preds, targets, [](const ScalarField3& p, const ScalarField3& t) {
        Real acc = 0;
        for (std::size_t i = 0; i < p.size(); ++i) acc += (p[i] - t[i]) * (p[i] - t[i]);
        return std::sqrt(acc / static_cast<Real>(p.size()));
    });
}

Real global_mean(const std::vector<ScalarField3>& targets) {
    require(!targets.empty(), Errc::invalid_argument, "metric over an empty sample set");
    Real acc = 0;
    std::size_t n = 0;
    for (const auto& t : targets) {
        for (Real v : t.values()) acc += v;
        n += t.size();
    }
    return acc / static_cast<Real>(n);
}

Real rel_mae(const std::vector<ScalarField3>& preds, const std::vector<ScalarField3>& targets,
             Real eps) {
    return mae(preds, targets) / (global_mean(targets) + eps);
}

Real rel_rmse(const std::vector<ScalarField3>& preds, const std::vector<ScalarField3>& targets,
              Real eps) {
    return rmse(preds, targets) / (global_mean(targets) + eps);
}

Real iou(const std::vector<ScalarField3>& preds, const std::vector<ScalarField3>& targets,
         Real tau) {
    return sample_mean(preds, targets, [tau](const ScalarField3& p, const ScalarField3& t) {
        std::size_t inter = 0, uni = 0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const bool a = p[i] >= tau, b = t[i] >= tau;
            inter += a && b;
            uni += a || b;
        }
        return uni == 0 ? Real{1} : static_cast<Real>(inter) / static_cast<Real>(uni);
    });
}

BundleMetrics evaluate_bundles(const std::vector<FieldBundle>& preds,
                               const std::vector<FieldBundle>& targets) {
    auto pick = [](const std::vector<FieldBundle>& b, ScalarField3 FieldBundle::*m) {
        std::vector<ScalarField3> out;
        out.reserve(b.size());
        for (const auto& x : b) out.push_back(x.*m);
        return out;
    };
    auto fill = [&](ScalarField3 FieldBundle::*m, bool relative) {
        const auto p = pick(preds, m), t = pick(targets, m);
        FieldMetrics f;
        f.mae = mae(p, t);
        f.rmse = rmse(p, t);
        if (relative) {
            f.rel_mae = rel_mae(p, t);
            f.rel_rmse = rel_rmse(p, t);
        } else {
            f.iou = iou(p, t);
        }
        return f;
    };
    BundleMetrics r;
    r.T = fill(&FieldBundle::T, true);
    r.alpha = fill(&FieldBundle::alpha, false);
    r.fl = fill(&FieldBundle::fl, false);
    r.T.iou = r.fl.iou;
    return r;
}

nlohmann::json to_json(const FieldMetrics& m) {
    return {{"mae", m.mae}, {"rmse", m.rmse}, {"rel_mae", m.rel_mae}, {"rel_rmse", m.rel_rmse},
            {"iou", m.iou}};
}

nlohmann::json to_json(const BundleMetrics& m) {
    nlohmann::json t = {{"mae", m.T.mae}, {"rmse", m.T.rmse}, {"rel_mae", m.T.rel_mae},
                        {"rel_rmse", m.T.rel_rmse}};
    return {{"T", t},
            {"alpha", {{"mae", m.alpha.mae}, {"rmse", m.alpha.rmse}, {"iou", m.alpha.iou}}},
            {"fl", {{"mae", m.fl.mae}, {"rmse", m.fl.rmse}, {"iou", m.fl.iou}}}};
}

std::vector<std::pair<std::string, Real>> flatten(const BundleMetrics& m) {
    return {{"T.mae", m.T.mae},         {"T.rmse", m.T.rmse},         {"T.rel_mae", m.T.rel_mae},
            {"T.rel_rmse", m.T.rel_rmse}, {"alpha.mae", m.alpha.mae}, {"alpha.rmse", m.alpha.rmse},
            {"alpha.iou", m.alpha.iou}, {"fl.mae", m.fl.mae},         {"fl.rmse", m.fl.rmse},
            {"fl.iou", m.fl.iou}};
}

std::vector<ProcessMapRow> process_map(const std::vector<SampleMetrics>& samples) {
    std::vector<ProcessMapRow> rows;
    rows.reserve(samples.size());
    for (const auto& s : samples)
        rows.push_back({s.id, s.params.power_w, s.params.v_scan_m_s, s.params.h_star,
                        flatten(s.metrics)});
    std::sort(rows.begin(), rows.end(), [](const ProcessMapRow& a, const ProcessMapRow& b) {
        if (a.h_star != b.h_star) return a.h_star < b.h_star;
        if (a.power_w != b.power_w) return a.power_w < b.power_w;
        return a.id < b.id;
    });
    return rows;
}

std::string process_map_csv(const std::vector<ProcessMapRow>& rows) {
    std::ostringstream out;
    out << "id,power_w,v_scan_m_s,h_star";
    if (!rows.empty())
        for (const auto& [name, v] : rows.front().values) out << ',' << name;
    out << '\n';
    char buf[64];
    for (const auto& r : rows) {
        out << r.id;
        for (Real v : {r.power_w, r.v_scan_m_s, r.h_star}) {
            std::snprintf(buf, sizeof buf, ",%.10g", v);
            out << buf;
        }
        for (const auto& [name, v] : r.values) {
            std::snprintf(buf, sizeof buf, ",%.10g", v);
            out << buf;
        }
        out << '\n';
    }
    return out.str();
}

nlohmann::json to_json(const std::vector<ProcessMapRow>& rows) {
    auto arr = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json j{{"id", r.id},
                         {"power_w", r.power_w},
                         {"v_scan_m_s", r.v_scan_m_s},
                         {"h_star", r.h_star}};
        for (const auto& [name, v] : r.values) j[name] = v;
        arr.push_back(j);
    }
    return arr;
}

}  // namespace lpfno
