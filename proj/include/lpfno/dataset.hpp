#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "lpfno/enthalpy.hpp"
#include "lpfno/grid.hpp"

namespace lpfno {

inline constexpr int kDatasetSchemaVersion = 1;

/// Raw little-endian binary32 arrays, no header. Non-finite values are rejected.
void write_f32(const std::filesystem::path& path, std::span<const Real> values);
std::vector<Real> read_f32(const std::filesystem::path& path, std::size_t expected_count);

struct SampleFiles {
    std::string T;
    std::string alpha;
    std::string fl;
};

struct SampleEntry {
    std::string id;
    ProcessParams params;
    Split split = Split::train;
    SampleFiles files;
};

struct DatasetManifest {
    int schema_version = kDatasetSchemaVersion;
    Grid3 grid;
    std::vector<SampleEntry> samples;
    MaterialTable material;
    std::string provenance = "oracle";

    const SampleEntry& find(const std::string& id) const;
    std::vector<std::string> ids(Split split) const;
};

nlohmann::json to_json(const Grid3& grid);
Grid3 grid_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const nlohmann::json& j);

/// Writes <dir>/<id>_{T,alpha,fl}.f32 and returns the manifest entry.
SampleEntry write_bundle(const FieldBundle& bundle, const std::filesystem::path& dir,
                         const std::string& id, const ProcessParams& params, Split split);

/// Loads one sample. Out-of-range alpha or fl is clamped to [0,1] with a warning.
FieldBundle read_bundle(const std::filesystem::path& dir, const SampleEntry& entry,
                        const Grid3& grid);

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& dir);

/// Parses and validates manifest.json: schema version, unique ids, and that
/// every referenced array exists with exactly nx*ny*nz scalars.
DatasetManifest load_manifest(const std::filesystem::path& dir);

/// A dataset directory opened for reading.
class Dataset {
public:
    explicit Dataset(std::filesystem::path dir);
    Dataset(std::filesystem::path dir, DatasetManifest manifest);

    const DatasetManifest& manifest() const { return manifest_; }
    const std::filesystem::path& dir() const { return dir_; }
    FieldBundle load(const std::string& id) const;

private:
    std::filesystem::path dir_;
    DatasetManifest manifest_;
};

}  // namespace lpfno
