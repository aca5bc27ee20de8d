#include "lpfno/oracle.hpp"

#include <cmath>
#include <deque>
#include <numbers>
#include <random>

namespace lpfno {

namespace fs = std::filesystem;

std::size_t OracleConfig::laser_index() const {
    return static_cast<std::size_t>(std::floor(laser_fraction * static_cast<Real>(grid.nx())));
}

std::array<Real, 3> OracleConfig::laser_position() const {
    return {grid.origin[0] + static_cast<Real>(laser_index()) * grid.dx,
            grid.origin[1] + static_cast<Real>(grid.ny() / 2) * grid.dx,
            grid.origin[2] + static_cast<Real>(grid.nz() - 1) * grid.dx};
}

void OracleConfig::validate() const {
    material.validate();
    require(laser_fraction >= 0 && laser_fraction < 1, Errc::invalid_argument,
            "laser position must lie inside the grid");
    require(r_min >= 0 && std::isfinite(r_min), Errc::invalid_argument, "r_min must be positive");
    require(mask_sharpness > 0, Errc::invalid_argument, "mask sharpness must be positive");
}

Real oracle_temperature(Real xi, Real y, Real z, Real power_w, Real v, const MaterialTable& mat,
                        Real r_min) {
    const Real r = std::max(std::sqrt(xi * xi + y * y + z * z), r_min);
    const Real k = mat.conductivity();
    return kAmbientTemperature + mat.eta * power_w / (2 * std::numbers::pi * k * r) *
                                     std::exp(-v * (xi + r) / (2 * mat.diffusivity));
}

ScalarField3 oracle_field(const ProcessParams& params, const OracleConfig& cfg, Real laser_x) {
    cfg.validate();
    require(params.power_w > 0 && params.v_scan_m_s > 0, Errc::invalid_argument,
            "power and scan speed must be positive");
    const Grid3& g = cfg.grid;
    const auto spot = cfg.laser_position();
    const Real r_min = cfg.effective_r_min();
    std::vector<Real> T(g.size());
    for (std::size_t i = 0; i < g.nx(); ++i)
        for (std::size_t j = 0; j < g.ny(); ++j)
            for (std::size_t k = 0; k < g.nz(); ++k) {
                const auto p = g.position(i, j, k);
                T[g.index(i, j, k)] = oracle_temperature(p[0] - laser_x, p[1] - spot[1],
                                                         spot[2] - p[2], params.power_w,
                                                         params.v_scan_m_s, cfg.material, r_min);
            }
    return ScalarField3(g, std::move(T));
}

std::vector<bool> depression_cells(const ScalarField3& T, Real t_boil) {
    const Grid3& g = T.grid();
    std::vector<bool> gas(g.size(), false);
    std::deque<std::size_t> queue;
    const std::size_t top = g.nz() - 1;
    for (std::size_t i = 0; i < g.nx(); ++i)
        for (std::size_t j = 0; j < g.ny(); ++j) {
            const std::size_t idx = g.index(i, j, top);
            if (T[idx] >= t_boil) {
                gas[idx] = true;
                queue.push_back(idx);
            }
        }
    while (!queue.empty()) {
        const std::size_t idx = queue.front();
        queue.pop_front();
        const auto [i, j, k] = g.coords(idx);
        const long ci[3] = {static_cast<long>(i), static_cast<long>(j), static_cast<long>(k)};
        const long n[3] = {static_cast<long>(g.nx()), static_cast<long>(g.ny()),
                           static_cast<long>(g.nz())};
        for (int axis = 0; axis < 3; ++axis)
            for (int d : {-1, 1}) {
                long c[3] = {ci[0], ci[1], ci[2]};
                c[axis] += d;
                if (c[axis] < 0 || c[axis] >= n[axis]) continue;
                const std::size_t nb = g.index(static_cast<std::size_t>(c[0]),
                                               static_cast<std::size_t>(c[1]),
                                               static_cast<std::size_t>(c[2]));
                if (!gas[nb] && T[nb] >= t_boil) {
                    gas[nb] = true;
                    queue.push_back(nb);
                }
            }
    }
    return gas;
}

FieldBundle bundle_from_temperature(const ScalarField3& T, const OracleConfig& cfg) {
    std::vector<Real> alpha(T.size(), Real{1});
    if (cfg.carve_depression) {
        const auto gas = depression_cells(T, cfg.material.t_boil);
        for (std::size_t i = 0; i < alpha.size(); ++i)
            if (gas[i]) alpha[i] = 0;
    }
    return alpha_mask(T, ScalarField3(T.grid(), std::move(alpha)), cfg.mask_sharpness,
                      cfg.material);
}

FieldBundle generate_sample(const ProcessParams& params, const OracleConfig& cfg) {
    return bundle_from_temperature(oracle_field(params, cfg, cfg.laser_position()[0]), cfg);
}

DatasetManifest generate_dataset(const SamplingPlan& plan, const OracleConfig& cfg,
                                 const fs::path& dir) {
    require(!plan.points.empty(), Errc::empty_plan, "sampling plan has no points");
    const fs::path target = fs::absolute(dir);
    const fs::path parent = target.parent_path();
    fs::create_directories(parent);
    std::random_device rd;
    const fs::path staging =
        parent / (target.filename().string() + ".partial-" + std::to_string(rd()));
    fs::remove_all(staging);
    fs::create_directories(staging);

    DatasetManifest manifest;
    manifest.grid = cfg.grid;
    manifest.material = cfg.material;
    manifest.provenance = "oracle";
    try {
        for (const auto& pt : plan.points) {
            const ProcessParams p = make_process_params(pt.params.power_w, pt.params.v_scan_m_s,
                                                        cfg.material);
            manifest.samples.push_back(
                write_bundle(generate_sample(p, cfg), staging, pt.id, p, pt.split));
        }
        save_manifest(manifest, staging);
    } catch (...) {
        fs::remove_all(staging);
        throw;
    }
    const fs::path old = parent / (target.filename().string() + ".old-" + std::to_string(rd()));
    if (fs::exists(target)) fs::rename(target, old);
    fs::rename(staging, target);
    fs::remove_all(old);
    return manifest;
}

FieldSequence transient_sweep(const ProcessParams& params, const OracleConfig& cfg,
                              const SweepConfig& sweep) {
    require(sweep.cadence_s > 0 && sweep.duration_s >= sweep.cadence_s, Errc::invalid_argument,
            "sweep needs a positive cadence and at least two frames");
    FieldSequence seq;
    seq.grid = cfg.grid;
    const auto n = static_cast<std::size_t>(std::llround(sweep.duration_s / sweep.cadence_s)) + 1;
    for (std::size_t f = 0; f < n; ++f) {
        const Real t = static_cast<Real>(f) * sweep.cadence_s;
        const Real x = cfg.grid.origin[0] + sweep.x_start + params.v_scan_m_s * t;
        seq.times.push_back(t);
        seq.laser_x.push_back(x);
        seq.frames.push_back(bundle_from_temperature(oracle_field(params, cfg, x), cfg));
    }
    seq.validate();
    return seq;
}

}  // namespace lpfno
