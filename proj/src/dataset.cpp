#include "lpfno/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>

namespace lpfno {

namespace fs = std::filesystem;

namespace {

std::uint32_t to_little(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big)
        return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
    return v;
}

}  // namespace

void write_f32(const fs::path& path, std::span<const Real> values) {
    std::vector<std::uint32_t> words(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i]))
            fail(Errc::non_finite, "refusing to write non-finite value at index " +
                                       std::to_string(i) + " to " + path.string());
        words[i] = to_little(std::bit_cast<std::uint32_t>(static_cast<float>(values[i])));
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), Errc::io, "cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(words.data()),
              static_cast<std::streamsize>(words.size() * sizeof(std::uint32_t)));
    require(out.good(), Errc::io, "short write to " + path.string());
}

std::vector<Real> read_f32(const fs::path& path, std::size_t expected_count) {
    require(fs::exists(path), Errc::missing_field_file, "missing field file " + path.string());
    const auto bytes = fs::file_size(path);
    require(bytes == expected_count * sizeof(std::uint32_t), Errc::length_mismatch,
            path.string() + " holds " + std::to_string(bytes / 4) + " scalars, expected " +
                std::to_string(expected_count));
    std::vector<std::uint32_t> words(expected_count);
    std::ifstream in(path, std::ios::binary);
    require(in.good(), Errc::io, "cannot open " + path.string());
    in.read(reinterpret_cast<char*>(words.data()), static_cast<std::streamsize>(bytes));
    require(in.good(), Errc::io, "short read from " + path.string());
    std::vector<Real> values(expected_count);
    for (std::size_t i = 0; i < expected_count; ++i)
        values[i] = static_cast<Real>(std::bit_cast<float>(to_little(words[i])));
    return values;
}

const SampleEntry& DatasetManifest::find(const std::string& id) const {
    auto it = std::find_if(samples.begin(), samples.end(),
                           [&](const SampleEntry& s) { return s.id == id; });
    require(it != samples.end(), Errc::invalid_argument, "no sample with id '" + id + "'");
    return *it;
}

std::vector<std::string> DatasetManifest::ids(Split split) const {
    std::vector<std::string> out;
    for (const auto& s : samples)
        if (s.split == split) out.push_back(s.id);
    return out;
}

nlohmann::json to_json(const Grid3& g) {
    return {{"nx", g.nx()}, {"ny", g.ny()}, {"nz", g.nz()}, {"dx", g.dx}, {"origin", g.origin}};
}

Grid3 grid_from_json(const nlohmann::json& j) {
    std::array<Real, 3> origin{0, 0, 0};
    if (j.contains("origin")) origin = j.at("origin").get<std::array<Real, 3>>();
    return make_grid(j.at("nx").get<long>(), j.at("ny").get<long>(), j.at("nz").get<long>(),
                     j.at("dx").get<Real>(), origin);
}

nlohmann::json to_json(const DatasetManifest& m) {
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& s : m.samples)
        samples.push_back({{"id", s.id},
                           {"power_w", s.params.power_w},
                           {"v_scan_m_s", s.params.v_scan_m_s},
                           {"h_star", s.params.h_star},
                           {"split", to_string(s.split)},
                           {"files", {{"T", s.files.T}, {"alpha", s.files.alpha}, {"fl", s.files.fl}}}});
    return {{"schema_version", m.schema_version},
            {"grid", to_json(m.grid)},
            {"samples", samples},
            {"material", to_json(m.material)},
            {"provenance", m.provenance}};
}

DatasetManifest manifest_from_json(const nlohmann::json& j) {
    DatasetManifest m;
    m.schema_version = j.at("schema_version").get<int>();
    require(m.schema_version == kDatasetSchemaVersion, Errc::schema_version,
            "dataset schema_version " + std::to_string(m.schema_version) + " is not supported");
    m.grid = grid_from_json(j.at("grid"));
    m.material = material_from_json(j.at("material"));
    m.provenance = j.at("provenance").get<std::string>();
    std::set<std::string> seen;
    for (const auto& s : j.at("samples")) {
        SampleEntry e;
        e.id = s.at("id").get<std::string>();
        require(seen.insert(e.id).second, Errc::invalid_argument, "duplicate sample id " + e.id);
        e.params = {s.at("power_w").get<Real>(), s.at("v_scan_m_s").get<Real>(),
                    s.at("h_star").get<Real>()};
        e.split = split_from_string(s.at("split").get<std::string>());
        const auto& f = s.at("files");
        e.files = {f.at("T").get<std::string>(), f.at("alpha").get<std::string>(),
                   f.at("fl").get<std::string>()};
        m.samples.push_back(std::move(e));
    }
    return m;
}

SampleEntry write_bundle(const FieldBundle& bundle, const fs::path& dir, const std::string& id,
                         const ProcessParams& params, Split split) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    require(!ec, Errc::io, "cannot create " + dir.string() + ": " + ec.message());
    SampleEntry e{id, params, split, {id + "_T.f32", id + "_alpha.f32", id + "_fl.f32"}};
    write_f32(dir / e.files.T, bundle.T.values());
    write_f32(dir / e.files.alpha, bundle.alpha.values());
    write_f32(dir / e.files.fl, bundle.fl.values());
    return e;
}

namespace {

std::vector<Real> clamp_fraction(std::vector<Real> v, const std::string& what) {
    std::size_t clamped = 0;
    for (Real& x : v) {
        if (x < 0 || x > 1) {
            x = std::clamp(x, Real{0}, Real{1});
            ++clamped;
        }
    }
    if (clamped > 0)
        log_warning("clamped " + std::to_string(clamped) + " out-of-range values in " + what);
    return v;
}

}  // namespace

FieldBundle read_bundle(const fs::path& dir, const SampleEntry& entry, const Grid3& grid) {
    const std::size_t n = grid.size();
    auto T = read_f32(dir / entry.files.T, n);
    auto alpha = clamp_fraction(read_f32(dir / entry.files.alpha, n), entry.files.alpha);
    auto fl = clamp_fraction(read_f32(dir / entry.files.fl, n), entry.files.fl);
    return make_bundle(ScalarField3(grid, std::move(T)), ScalarField3(grid, std::move(alpha)),
                       ScalarField3(grid, std::move(fl)));
}

void save_manifest(const DatasetManifest& manifest, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    require(!ec, Errc::io, "cannot create " + dir.string());
    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    require(out.good(), Errc::io, "cannot write manifest in " + dir.string());
    out << to_json(manifest).dump(2) << '\n';
    require(out.good(), Errc::io, "short write of manifest in " + dir.string());
}

DatasetManifest load_manifest(const fs::path& dir) {
    const fs::path path = dir / "manifest.json";
    std::ifstream in(path);
    require(in.good(), Errc::io, "cannot open " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::io, "malformed manifest " + path.string() + ": " + e.what());
    }
    DatasetManifest m;
    try {
        m = manifest_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::invalid_argument, "invalid manifest " + path.string() + ": " + e.what());
    }
    const auto expected = m.grid.size() * sizeof(std::uint32_t);
    for (const auto& s : m.samples) {
        for (const auto* name : {&s.files.T, &s.files.alpha, &s.files.fl}) {
            const fs::path f = dir / *name;
            require(fs::exists(f), Errc::missing_field_file,
                    "sample " + s.id + ": missing field file " + f.string());
            require(fs::file_size(f) == expected, Errc::length_mismatch,
                    "sample " + s.id + ": " + f.string() + " has wrong length");
        }
    }
    return m;
}

Dataset::Dataset(fs::path dir) : dir_(std::move(dir)), manifest_(load_manifest(dir_)) {}

Dataset::Dataset(fs::path dir, DatasetManifest manifest)
    : dir_(std::move(dir)), manifest_(std::move(manifest)) {}

FieldBundle Dataset::load(const std::string& id) const {
    return read_bundle(dir_, manifest_.find(id), manifest_.grid);
}

}  // namespace lpfno
