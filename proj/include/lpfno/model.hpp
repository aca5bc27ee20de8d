#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "lpfno/enthalpy.hpp"
#include "lpfno/params.hpp"
#include "lpfno/preprocess.hpp"
#include "lpfno/tape.hpp"

namespace lpfno {

inline constexpr int kCheckpointFormatVersion = 1;

struct DecoderConfig {
    std::size_t layers = 3;
    std::size_t width = 32;
    Activation activation = Activation::silu;
    bool weight_norm = true;
    friend bool operator==(const DecoderConfig&, const DecoderConfig&) = default;
};

struct ModelConfig {
    std::size_t n_fourier_layers = 3;
    std::array<int, 3> modes{25, 20, 15};
    std::size_t padding = 9;
    std::size_t latent_width = 32;
    Activation activation = Activation::gelu;
    bool activate_last_layer = true;
    bool coordinate_features = true;
    std::vector<std::string> input_channels{"x", "y", "z", "V_scan", "P"};
    DecoderConfig decoder;
    std::vector<std::string> output_channels{"T", "alpha"};
    Real mask_sharpness = kDefaultMaskSharpness;
    MaterialTable material;
    NormalizationScales scales;
    Grid3 train_grid = make_grid(90, 40, 30, 1e-5);

    /// Adds the normalized-enthalpy input channel.
    ModelConfig& with_enthalpy_channel();
    void validate() const;
    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

nlohmann::json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Process-parameter box spanned by the training samples.
struct TrainedWindow {
    bool known = false;
    std::array<Real, 2> power_w{0, 0};
    std::array<Real, 2> v_scan_m_s{0, 0};
    std::array<Real, 2> h_star{0, 0};

    bool contains(const ProcessParams& p) const;
    friend bool operator==(const TrainedWindow&, const TrainedWindow&) = default;
};

struct FnoModel {
    ModelConfig config;
    ParamSet params;
    TrainedWindow window;
    std::string provenance;

    struct Blocks {
        std::size_t lift_w = 0, lift_b = 0;
        std::vector<FourierLayerBlocks> layers;
        struct Dense {
            std::size_t w = 0, gain = 0, b = 0;
            bool weight_norm = false;
        };
        std::vector<Dense> decoder;  // hidden layers followed by the output layer
    } blocks;

    std::size_t parameter_count() const { return params.parameter_count(); }
};

/// Closed-form real parameter count for a configuration.
std::size_t expected_parameter_count(const ModelConfig& cfg);

/// Deterministic for a given seed. Rejects modes that do not fit the padded
/// training grid.
FnoModel build_model(const ModelConfig& cfg, std::uint64_t seed);

/// Input channels on a grid: coordinates ix/nx, iy/ny, iz/nz and constant
/// normalized process fields.
LatentField assemble_inputs(const ModelConfig& cfg, const ProcessParams& params, const Grid3& grid);

/// Padding used on a grid: cfg.padding scaled by train_dx / dx.
std::size_t padding_for(const ModelConfig& cfg, const Grid3& grid);

/// Raw network output (normalized T, alpha) on the unpadded grid.
Var forward(GradTape& tape, const FnoModel& model, const LatentField& inputs, std::size_t padding);

/// Post-processing shared by infer and evaluation: clamps, denormalizes,
/// applies alpha_mask with the predicted alpha.
FieldBundle decode_output(const ModelConfig& cfg, const LatentField& raw, const Grid3& grid);

FieldBundle infer(const FnoModel& model, const ProcessParams& params, const Grid3& grid);
/// Same weights evaluated on a finer grid; coordinates and padding follow the grid.
FieldBundle infer_superresolved(const FnoModel& model, const ProcessParams& params,
                                const Grid3& fine_grid);

void save_checkpoint(const FnoModel& model, const std::filesystem::path& dir);
FnoModel load_checkpoint(const std::filesystem::path& dir);

nlohmann::json model_info(const FnoModel& model);

/// FNV-1a over bytes, hex encoded.
std::string fingerprint(std::string_view bytes);

}  // namespace lpfno
