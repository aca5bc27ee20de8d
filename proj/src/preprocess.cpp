#include "lpfno/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "lpfno/dataset.hpp"

namespace lpfno {

namespace fs = std::filesystem;

void FieldSequence::validate() const {
    require(times.size() == frames.size() && laser_x.size() == frames.size(),
            Errc::length_mismatch, "sequence times, frames and laser positions differ in length");
    for (std::size_t i = 1; i < times.size(); ++i) {
        require(times[i] > times[i - 1], Errc::invalid_argument,
                "sequence times must be strictly increasing");
        require(laser_x[i] >= laser_x[i - 1], Errc::invalid_argument,
                "laser positions must be non-decreasing");
    }
    for (const auto& f : frames)
        require(f.grid() == grid, Errc::shape_mismatch, "sequence frame on a different grid");
}

namespace {

std::size_t nearest_snapshot(const std::vector<Real>& times, Real t) {
    auto it = std::lower_bound(times.begin(), times.end(), t);
    if (it == times.end()) return times.size() - 1;
    const auto hi = static_cast<std::size_t>(it - times.begin());
    if (hi == 0) return 0;
    return (t - times[hi - 1] <= times[hi] - t) ? hi - 1 : hi;
}

std::vector<Real> shift_x(const ScalarField3& f, long shift, Real fill) {
    const Grid3& g = f.grid();
    std::vector<Real> out(g.size(), fill);
    const long nx = static_cast<long>(g.nx());
    const std::size_t plane = g.ny() * g.nz();
    for (long i = 0; i < nx; ++i) {
        const long src = i + shift;
        if (src < 0 || src >= nx) continue;
        std::copy_n(f.values().begin() + static_cast<std::ptrdiff_t>(src * plane), plane,
                    out.begin() + static_cast<std::ptrdiff_t>(i * plane));
    }
    return out;
}

}  // namespace

FieldSequence to_moving_frame(const FieldSequence& seq, Real v_scan,
                              std::optional<std::size_t> laser_index) {
    require(v_scan > 0, Errc::invalid_argument, "scan speed must be positive");
    seq.validate();
    require(seq.size() >= 2, Errc::invalid_argument, "sequence needs at least two snapshots");
    const Grid3& g = seq.grid;
    const Real dt = g.dx / v_scan;
    const Real span = seq.times.back() - seq.times.front();
    require(span + 1e-12 * dt >= dt, Errc::invalid_argument,
            "sequence is shorter than one laser cell traversal");

    const Real travel = seq.laser_x.back() - seq.laser_x.front();
    require(std::abs(travel - v_scan * span) <= std::max(g.dx, 0.01 * std::abs(travel)),
            Errc::invalid_argument, "laser positions inconsistent with the scan speed");

    const std::size_t fixed = laser_index.value_or(default_laser_index(g));
    require(fixed < g.nx(), Errc::invalid_argument, "laser index outside grid");

    const auto steps = static_cast<std::size_t>(std::floor(span / dt + 1e-9));
    FieldSequence out;
    out.grid = g;
    for (std::size_t k = 0; k <= steps; ++k) {
        const std::size_t j = nearest_snapshot(seq.times, seq.times.front() + static_cast<Real>(k) * dt);
        const long shift =
            std::lround((seq.laser_x[j] - g.origin[0]) / g.dx) - static_cast<long>(fixed);
        const FieldBundle& src = seq.frames[j];
        out.frames.push_back(FieldBundle{
            ScalarField3(g, shift_x(src.T, shift, kAmbientTemperature)),
            ScalarField3(g, shift_x(src.alpha, shift, 1.0)),
            ScalarField3(g, shift_x(src.fl, shift, 0.0))});
        out.times.push_back(static_cast<Real>(k) * dt);
        out.laser_x.push_back(g.origin[0] + static_cast<Real>(fixed) * g.dx);
    }
    return out;
}

namespace {

FieldBundle average_range(const FieldSequence& seq, std::size_t first, std::size_t n) {
    const Grid3& g = seq.grid;
    std::vector<Real> T(g.size(), 0), a(g.size(), 0), fl(g.size(), 0);
    for (std::size_t f = first; f < first + n; ++f) {
        const auto& b = seq.frames[f];
        for (std::size_t i = 0; i < g.size(); ++i) {
            T[i] += b.T[i];
            a[i] += b.alpha[i];
            fl[i] += b.fl[i];
        }
    }
    const Real inv = 1 / static_cast<Real>(n);
    for (std::size_t i = 0; i < g.size(); ++i) {
        T[i] *= inv;
        a[i] = std::clamp(a[i] * inv, Real{0}, Real{1});
        fl[i] = std::clamp(fl[i] * inv, Real{0}, Real{1});
    }
    return FieldBundle{ScalarField3(g, std::move(T)), ScalarField3(g, std::move(a)),
                       ScalarField3(g, std::move(fl))};
}

}  // namespace

FieldBundle window_average(const FieldSequence& seq, std::size_t n) {
    require(n >= 1, Errc::invalid_argument, "window length must be >= 1");
    require(seq.size() >= n, Errc::invalid_argument,
            "window of " + std::to_string(n) + " needs that many frames, sequence has " +
                std::to_string(seq.size()));
    return average_range(seq, seq.size() - n, n);
}

FieldSequence sliding_window_average(const FieldSequence& seq, std::size_t n) {
    require(n >= 1 && seq.size() >= n, Errc::invalid_argument, "too few frames for window");
    FieldSequence out;
    out.grid = seq.grid;
    for (std::size_t end = n - 1; end < seq.size(); ++end) {
        out.frames.push_back(average_range(seq, end + 1 - n, n));
        out.times.push_back(seq.times[end]);
        out.laser_x.push_back(seq.laser_x[end]);
    }
    return out;
}

std::vector<std::pair<Real, Real>> temporal_difference_curve(const FieldSequence& seq) {
    std::vector<std::pair<Real, Real>> curve;
    for (std::size_t k = 1; k < seq.size(); ++k) {
        const auto a = seq.frames[k].T.values();
        const auto b = seq.frames[k - 1].T.values();
        Real sum = 0;
        for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] - b[i]);
        curve.emplace_back(seq.times[k], sum / static_cast<Real>(a.size()));
    }
    return curve;
}

QuasiSteadySample reduce_quasi_steady(const FieldSequence& lab, Real v_scan, std::size_t n,
                                      Real threshold_k, std::optional<std::size_t> laser_index) {
    const FieldSequence moving = to_moving_frame(lab, v_scan, laser_index);
    QuasiSteadySample out{window_average(moving, n), temporal_difference_curve(moving), {}, false};
    if (moving.size() >= n + 1)
        out.averaged_curve = temporal_difference_curve(sliding_window_average(moving, n));
    const auto& gate = out.averaged_curve.empty() ? out.raw_curve : out.averaged_curve;
    out.steady = !gate.empty() && gate.back().second < threshold_k;
    return out;
}

void NormalizationScales::validate() const {
    for (Real v : {L_ref, T_ref, V_ref, P_ref, H_ref})
        require(v > 0 && std::isfinite(v), Errc::invalid_argument,
                "normalization scales must be positive");
}

nlohmann::json to_json(const NormalizationScales& s) {
    return {{"L_ref", s.L_ref}, {"T_ref", s.T_ref}, {"V_ref", s.V_ref},
            {"P_ref", s.P_ref}, {"H_ref", s.H_ref}};
}

NormalizationScales scales_from_json(const nlohmann::json& j) {
    NormalizationScales s{j.at("L_ref").get<Real>(), j.at("T_ref").get<Real>(),
                          j.at("V_ref").get<Real>(), j.at("P_ref").get<Real>(),
                          j.at("H_ref").get<Real>()};
    s.validate();
    return s;
}

namespace {

ScalarField3 scaled(const ScalarField3& f, Real factor) {
    std::vector<Real> v(f.values().begin(), f.values().end());
    for (Real& x : v) x *= factor;
    return ScalarField3(f.grid(), std::move(v));
}

}  // namespace

FieldBundle normalize(const FieldBundle& b, const NormalizationScales& s) {
    s.validate();
    return FieldBundle{scaled(b.T, 1 / s.T_ref), b.alpha, b.fl};
}

FieldBundle denormalize(const FieldBundle& b, const NormalizationScales& s) {
    s.validate();
    return FieldBundle{scaled(b.T, s.T_ref), b.alpha, b.fl};
}

ProcessParams normalize(const ProcessParams& p, const NormalizationScales& s) {
    s.validate();
    return {p.power_w / s.P_ref, p.v_scan_m_s / s.V_ref, p.h_star / s.H_ref};
}

ProcessParams denormalize(const ProcessParams& p, const NormalizationScales& s) {
    s.validate();
    return {p.power_w * s.P_ref, p.v_scan_m_s * s.V_ref, p.h_star * s.H_ref};
}

ScalarField3 liquid_fraction(const ScalarField3& T, const MaterialTable& mat) {
    std::vector<Real> v(T.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = liquid_fraction(T[i], mat);
    return ScalarField3(T.grid(), std::move(v));
}

FieldBundle alpha_mask(const ScalarField3& T, const ScalarField3& alpha, Real k,
                       const MaterialTable& mat) {
    require(k > 0, Errc::invalid_argument, "mask sharpness must be positive");
    require(T.grid() == alpha.grid(), Errc::shape_mismatch, "alpha_mask grid mismatch");
    const std::size_t n = T.size();
    std::vector<Real> Tm(n), fl(n), am(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Real g = metal_gate(alpha[i], k);
        Tm[i] = mat.t_boil + g * (T[i] - mat.t_boil);
        const bool metal = is_metal(alpha[i]);
        fl[i] = metal ? liquid_fraction(Tm[i], mat) : 0;
        am[i] = metal ? alpha[i] : 0;
    }
    return FieldBundle{ScalarField3(T.grid(), std::move(Tm)), ScalarField3(T.grid(), std::move(am)),
                       ScalarField3(T.grid(), std::move(fl))};
}

ScalarField3 meltpool_mask(const ScalarField3& alpha, const ScalarField3& fl, Real tau) {
    require(tau > 0 && tau < 1, Errc::invalid_argument, "mask threshold must lie in (0,1)");
    require(alpha.grid() == fl.grid(), Errc::shape_mismatch, "meltpool_mask grid mismatch");
    std::vector<Real> m(alpha.size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = (alpha[i] >= tau && fl[i] >= tau) ? 1 : 0;
    return ScalarField3(alpha.grid(), std::move(m));
}

void write_sequence(const FieldSequence& seq, const ProcessParams& params,
                    const MaterialTable& mat, const fs::path& dir) {
    seq.validate();
    nlohmann::json frames = nlohmann::json::array();
    for (std::size_t k = 0; k < seq.size(); ++k) {
        char id[32];
        std::snprintf(id, sizeof id, "frame%05zu", k);
        const SampleEntry e = write_bundle(seq.frames[k], dir, id, params, Split::train);
        frames.push_back({{"time_s", seq.times[k]},
                          {"laser_x_m", seq.laser_x[k]},
                          {"files", {{"T", e.files.T}, {"alpha", e.files.alpha}, {"fl", e.files.fl}}}});
    }
    const nlohmann::json j{{"schema_version", kDatasetSchemaVersion},
                           {"grid", to_json(seq.grid)},
                           {"material", to_json(mat)},
                           {"power_w", params.power_w},
                           {"v_scan_m_s", params.v_scan_m_s},
                           {"h_star", params.h_star},
                           {"frames", frames}};
    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    require(out.good(), Errc::io, "cannot write sequence manifest in " + dir.string());
    out << j.dump(2) << '\n';
}

StoredSequence read_sequence(const fs::path& dir) {
    std::ifstream in(dir / "manifest.json");
    require(in.good(), Errc::io, "cannot open sequence manifest in " + dir.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::io, std::string("malformed sequence manifest: ") + e.what());
    }
    require(j.at("schema_version").get<int>() == kDatasetSchemaVersion, Errc::schema_version,
            "unsupported sequence schema_version");
    StoredSequence out;
    out.sequence.grid = grid_from_json(j.at("grid"));
    out.material = material_from_json(j.at("material"));
    out.params = {j.at("power_w").get<Real>(), j.at("v_scan_m_s").get<Real>(),
                  j.at("h_star").get<Real>()};
    for (const auto& f : j.at("frames")) {
        SampleEntry e;
        e.files = {f.at("files").at("T").get<std::string>(),
                   f.at("files").at("alpha").get<std::string>(),
                   f.at("files").at("fl").get<std::string>()};
        out.sequence.frames.push_back(read_bundle(dir, e, out.sequence.grid));
        out.sequence.times.push_back(f.at("time_s").get<Real>());
        out.sequence.laser_x.push_back(f.at("laser_x_m").get<Real>());
    }
    out.sequence.validate();
    return out;
}

}  // namespace lpfno
