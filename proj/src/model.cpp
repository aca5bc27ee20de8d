#include "lpfno/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "lpfno/dataset.hpp"

namespace lpfno {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::string> kKnownInputs{"x", "y", "z", "V_scan", "P", "H_star"};

Real uniform01(std::mt19937_64& rng) { return static_cast<Real>(rng() >> 11) * 0x1.0p-53; }

void fill_uniform(std::span<Real> v, Real bound, std::mt19937_64& rng) {
    for (Real& x : v) x = bound * (2 * uniform01(rng) - 1);
}

}  // namespace

ModelConfig& ModelConfig::with_enthalpy_channel() {
    if (std::find(input_channels.begin(), input_channels.end(), "H_star") == input_channels.end())
        input_channels.push_back("H_star");
    return *this;
}

void ModelConfig::validate() const {
    require(n_fourier_layers >= 1, Errc::invalid_argument, "need at least one Fourier layer");
    require(latent_width >= 1, Errc::invalid_argument, "latent width must be positive");
    require(decoder.layers >= 1 && decoder.width >= 1, Errc::invalid_argument,
            "decoder needs at least one hidden layer");
    require(!input_channels.empty(), Errc::invalid_argument, "no input channels");
    for (const auto& c : input_channels)
        require(std::count(kKnownInputs.begin(), kKnownInputs.end(), c) == 1 &&
                    std::count(input_channels.begin(), input_channels.end(), c) == 1,
                Errc::invalid_argument, "bad input channel '" + c + "'");
    const bool has_coords = std::count(input_channels.begin(), input_channels.end(), "x") +
                                std::count(input_channels.begin(), input_channels.end(), "y") +
                                std::count(input_channels.begin(), input_channels.end(), "z") ==
                            3;
    require(has_coords == coordinate_features, Errc::invalid_argument,
            "coordinate_features flag disagrees with input channels");
    require(output_channels == std::vector<std::string>{"T", "alpha"}, Errc::invalid_argument,
            "output channels must be [T, alpha]");
    require(mask_sharpness > 0, Errc::invalid_argument, "mask sharpness must be positive");
    material.validate();
    scales.validate();
}

json to_json(const ModelConfig& c) {
    return json{{"spatial_dim", 3},
                {"n_fourier_layers", c.n_fourier_layers},
                {"modes", c.modes},
                {"padding", c.padding},
                {"latent_width", c.latent_width},
                {"activation", to_string(c.activation)},
                {"activate_last_layer", c.activate_last_layer},
                {"coordinate_features", c.coordinate_features},
                {"input_channels", c.input_channels},
                {"decoder",
                 {{"layers", c.decoder.layers},
                  {"width", c.decoder.width},
                  {"activation", to_string(c.decoder.activation)},
                  {"weight_norm", c.decoder.weight_norm}}},
                {"output_channels", c.output_channels},
                {"mask_sharpness", c.mask_sharpness},
                {"material", to_json(c.material)},
                {"scales", to_json(c.scales)},
                {"train_grid", to_json(c.train_grid)}};
}

ModelConfig model_config_from_json(const json& j) {
    ModelConfig c;
    try {
        c.n_fourier_layers = j.value("n_fourier_layers", c.n_fourier_layers);
        c.modes = j.value("modes", c.modes);
        c.padding = j.value("padding", c.padding);
        c.latent_width = j.value("latent_width", c.latent_width);
        if (j.contains("activation")) c.activation = activation_from_string(j.at("activation"));
        c.activate_last_layer = j.value("activate_last_layer", c.activate_last_layer);
        c.coordinate_features = j.value("coordinate_features", c.coordinate_features);
        c.input_channels = j.value("input_channels", c.input_channels);
        if (j.contains("decoder")) {
            const auto& d = j.at("decoder");
            c.decoder.layers = d.value("layers", c.decoder.layers);
            c.decoder.width = d.value("width", c.decoder.width);
            if (d.contains("activation"))
                c.decoder.activation = activation_from_string(d.at("activation"));
            c.decoder.weight_norm = d.value("weight_norm", c.decoder.weight_norm);
        }
        c.output_channels = j.value("output_channels", c.output_channels);
        c.mask_sharpness = j.value("mask_sharpness", c.mask_sharpness);
        if (j.contains("material")) c.material = material_from_json(j.at("material"));
        if (j.contains("scales")) c.scales = scales_from_json(j.at("scales"));
        if (j.contains("train_grid")) c.train_grid = grid_from_json(j.at("train_grid"));
    } catch (const json::exception& e) {
        fail(Errc::invalid_argument, std::string("model config: ") + e.what());
    }
    c.validate();
    return c;
}

bool TrainedWindow::contains(const ProcessParams& p) const {
    if (!known) return true;
    return p.power_w >= power_w[0] && p.power_w <= power_w[1] && p.v_scan_m_s >= v_scan_m_s[0] &&
           p.v_scan_m_s <= v_scan_m_s[1];
}

std::size_t expected_parameter_count(const ModelConfig& cfg) {
    const std::size_t cin = cfg.input_channels.size();
    const std::size_t w = cfg.latent_width;
    const std::size_t q = ModeSet::count_for(cfg.modes);
    std::size_t n = cin * w + w;
    n += cfg.n_fourier_layers * (2 * q * w * w + w * w + w);
    std::size_t fan_in = w;
    for (std::size_t l = 0; l < cfg.decoder.layers; ++l) {
        const std::size_t d = cfg.decoder.width;
        n += d * fan_in + d + (cfg.decoder.weight_norm ? d : 0);
        fan_in = d;
    }
    n += cfg.output_channels.size() * fan_in + cfg.output_channels.size();
    return n;
}

FnoModel build_model(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const Shape3 g = cfg.train_grid.shape;
    const Shape3 padded{g.nx + 2 * cfg.padding, g.ny + 2 * cfg.padding, g.nz + 2 * cfg.padding};
    ModeSet::check(cfg.modes, padded);

    FnoModel m;
    m.config = cfg;
    std::mt19937_64 rng(seed);
    const std::size_t cin = cfg.input_channels.size();
    const std::size_t w = cfg.latent_width;
    const std::size_t q = ModeSet::count_for(cfg.modes);
    auto& P = m.params;

    m.blocks.lift_w = P.add("lift.W", {w, cin});
    m.blocks.lift_b = P.add("lift.b", {w});
    fill_uniform(P.values(m.blocks.lift_w), 1 / std::sqrt(Real(cin)), rng);
    fill_uniform(P.values(m.blocks.lift_b), 1 / std::sqrt(Real(cin)), rng);

    for (std::size_t l = 0; l < cfg.n_fourier_layers; ++l) {
        const std::string pre = "layer" + std::to_string(l);
        FourierLayerBlocks b;
        b.spectral = P.add(pre + ".R", {q, w, w}, true);
        b.weight = P.add(pre + ".W", {w, w});
        b.bias = P.add(pre + ".b", {w});
        const Real scale = 1 / Real(w * w);
        for (Real& x : P.values(b.spectral)) x = scale * uniform01(rng);
        fill_uniform(P.values(b.weight), 1 / std::sqrt(Real(w)), rng);
        fill_uniform(P.values(b.bias), 1 / std::sqrt(Real(w)), rng);
        m.blocks.layers.push_back(b);
    }

    std::size_t fan_in = w;
    const std::size_t layers = cfg.decoder.layers + 1;
    for (std::size_t l = 0; l < layers; ++l) {
        const bool last = l + 1 == layers;
        const std::size_t out = last ? cfg.output_channels.size() : cfg.decoder.width;
        const std::string pre = last ? std::string("out") : "dec" + std::to_string(l);
        FnoModel::Blocks::Dense d;
        d.weight_norm = !last && cfg.decoder.weight_norm;
        d.w = P.add(pre + (d.weight_norm ? ".v" : ".W"), {out, fan_in});
        if (d.weight_norm) d.gain = P.add(pre + ".g", {out});
        d.b = P.add(pre + ".b", {out});
        const Real bound = 1 / std::sqrt(Real(fan_in));
        fill_uniform(P.values(d.w), bound, rng);
        fill_uniform(P.values(d.b), bound, rng);
        if (d.weight_norm) {
            auto v = P.values(d.w);
            auto gain = P.values(d.gain);
            for (std::size_t o = 0; o < out; ++o) {
                Real n2 = 0;
                for (std::size_t i = 0; i < fan_in; ++i) n2 += v[o * fan_in + i] * v[o * fan_in + i];
                gain[o] = std::sqrt(n2);
            }
        }
        m.blocks.decoder.push_back(d);
        fan_in = out;
    }
    return m;
}

LatentField assemble_inputs(const ModelConfig& cfg, const ProcessParams& params, const Grid3& grid) {
    const auto n = normalize(params, cfg.scales);
    const Shape3 s = grid.shape;
    LatentField x(s, cfg.input_channels.size());
    for (std::size_t c = 0; c < cfg.input_channels.size(); ++c) {
        const std::string& name = cfg.input_channels[c];
        auto ch = x.channel(c);
        if (name == "x" || name == "y" || name == "z") {
            const int axis = name == "x" ? 0 : name == "y" ? 1 : 2;
            const std::size_t extent = axis == 0 ? s.nx : axis == 1 ? s.ny : s.nz;
            for (std::size_t p = 0; p < ch.size(); ++p)
                ch[p] = static_cast<Real>(s.coords(p)[axis]) / static_cast<Real>(extent);
        } else {
            const Real v = name == "V_scan" ? n.v_scan_m_s : name == "P" ? n.power_w : n.h_star;
            std::fill(ch.begin(), ch.end(), v);
        }
    }
    return x;
}

std::size_t padding_for(const ModelConfig& cfg, const Grid3& grid) {
    const Real ratio = cfg.train_grid.dx / grid.dx;
    return static_cast<std::size_t>(std::lround(static_cast<Real>(cfg.padding) * ratio));
}

Var forward(GradTape& tape, const FnoModel& model, const LatentField& inputs, std::size_t padding) {
    const ModelConfig& cfg = model.config;
    require(inputs.channels == cfg.input_channels.size(), Errc::shape_mismatch,
            "input channel count does not match model");
    const Shape3 padded{inputs.shape.nx + 2 * padding, inputs.shape.ny + 2 * padding,
                        inputs.shape.nz + 2 * padding};
    auto modes = std::make_shared<const ModeSet>(cfg.modes, padded);

    Var h = affine(tape, tape.leaf(inputs), model.blocks.lift_w, model.blocks.lift_b,
                   cfg.latent_width);
    h = pad(tape, h, padding);
    for (std::size_t l = 0; l < model.blocks.layers.size(); ++l) {
        const bool last = l + 1 == model.blocks.layers.size();
        const Activation act =
            last && !cfg.activate_last_layer ? Activation::identity : cfg.activation;
        h = fourier_layer(tape, h, model.blocks.layers[l], modes, act);
    }
    h = crop(tape, h, padding);
    for (std::size_t l = 0; l < model.blocks.decoder.size(); ++l) {
        const auto& d = model.blocks.decoder[l];
        const bool last = l + 1 == model.blocks.decoder.size();
        const std::size_t out = last ? cfg.output_channels.size() : cfg.decoder.width;
        h = d.weight_norm ? weight_norm_affine(tape, h, d.w, d.gain, d.b, out)
                          : affine(tape, h, d.w, d.b, out);
        if (!last) h = activation(tape, cfg.decoder.activation, h);
    }
    return h;
}

FieldBundle decode_output(const ModelConfig& cfg, const LatentField& raw, const Grid3& grid) {
    require(raw.shape == grid.shape && raw.channels == 2, Errc::shape_mismatch,
            "raw output does not match grid");
    const std::size_t n = grid.size();
    std::vector<Real> T(n), a(n);
    auto t_ch = raw.channel(0);
    auto a_ch = raw.channel(1);
    for (std::size_t i = 0; i < n; ++i) {
        require(std::isfinite(t_ch[i]) && std::isfinite(a_ch[i]), Errc::non_finite,
                "network produced a non-finite value");
        T[i] = std::max<Real>(0, t_ch[i] * cfg.scales.T_ref);
        a[i] = std::clamp<Real>(a_ch[i], 0, 1);
    }
    return alpha_mask(ScalarField3(grid, std::move(T)), ScalarField3(grid, std::move(a)),
                      cfg.mask_sharpness, cfg.material);
}

FieldBundle infer(const FnoModel& model, const ProcessParams& params, const Grid3& grid) {
    GradTape tape = GradTape::inference(model.params);
    const std::size_t pad_width = padding_for(model.config, grid);
    const Shape3 padded{grid.nx() + 2 * pad_width, grid.ny() + 2 * pad_width,
                        grid.nz() + 2 * pad_width};
    ModeSet::check(model.config.modes, padded);
    Var out = forward(tape, model, assemble_inputs(model.config, params, grid), pad_width);
    return decode_output(model.config, out->value, grid);
}

FieldBundle infer_superresolved(const FnoModel& model, const ProcessParams& params,
                                const Grid3& fine_grid) {
    return infer(model, params, fine_grid);
}

namespace {

void write_f64(const fs::path& path, std::span<const Real> v) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), Errc::io, "cannot write " + path.string());
    std::vector<std::uint64_t> bits(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::uint64_t b = std::bit_cast<std::uint64_t>(v[i]);
        if constexpr (std::endian::native == std::endian::big) b = __builtin_bswap64(b);
        bits[i] = b;
    }
    out.write(reinterpret_cast<const char*>(bits.data()),
              static_cast<std::streamsize>(bits.size() * sizeof(std::uint64_t)));
    require(out.good(), Errc::io, "short write to " + path.string());
}

void read_f64(const fs::path& path, std::span<Real> v) {
    std::error_code ec;
    const auto size = fs::file_size(path, ec);
    require(!ec, Errc::missing_field_file, "missing tensor file " + path.string());
    require(size == v.size() * sizeof(std::uint64_t), Errc::length_mismatch,
            "tensor file " + path.string() + " has " + std::to_string(size) + " bytes, expected " +
                std::to_string(v.size() * sizeof(std::uint64_t)));
    std::ifstream in(path, std::ios::binary);
    std::vector<std::uint64_t> bits(v.size());
    in.read(reinterpret_cast<char*>(bits.data()), static_cast<std::streamsize>(size));
    require(in.good(), Errc::io, "cannot read " + path.string());
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::uint64_t b = bits[i];
        if constexpr (std::endian::native == std::endian::big) b = __builtin_bswap64(b);
        v[i] = std::bit_cast<Real>(b);
    }
}

json window_json(const TrainedWindow& w) {
    if (!w.known) return nullptr;
    return json{{"power_w", w.power_w}, {"v_scan_m_s", w.v_scan_m_s}, {"h_star", w.h_star}};
}

TrainedWindow window_from_json(const json& j) {
    TrainedWindow w;
    if (j.is_null()) return w;
    w.known = true;
    w.power_w = j.at("power_w");
    w.v_scan_m_s = j.at("v_scan_m_s");
    w.h_star = j.at("h_star");
    return w;
}

}  // namespace

void save_checkpoint(const FnoModel& model, const fs::path& dir) {
    fs::create_directories(dir);
    json tensors = json::array();
    for (std::size_t b = 0; b < model.params.blocks().size(); ++b) {
        const auto& blk = model.params.block(b);
        const std::string file = blk.name + ".f64";
        write_f64(dir / file, model.params.values(b));
        tensors.push_back({{"name", blk.name},
                           {"shape", blk.shape},
                           {"complex", blk.complex},
                           {"reals", blk.size},
                           {"file", file}});
    }
    json j{{"format_version", kCheckpointFormatVersion},
           {"config", to_json(model.config)},
           {"trained_window", window_json(model.window)},
           {"provenance", model.provenance},
           {"tensors", tensors}};
    const fs::path tmp = dir / "checkpoint.json.tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        out << j.dump(2) << '\n';
        require(out.good(), Errc::io, "cannot write checkpoint manifest");
    }
    fs::rename(tmp, dir / "checkpoint.json");
}

FnoModel load_checkpoint(const fs::path& dir) {
    std::ifstream in(dir / "checkpoint.json");
    require(in.good(), Errc::io, "no checkpoint.json in " + dir.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        fail(Errc::io, std::string("corrupt checkpoint manifest: ") + e.what());
    }
    require(j.value("format_version", -1) == kCheckpointFormatVersion, Errc::schema_version,
            "unsupported checkpoint format version");
    FnoModel m = build_model(model_config_from_json(j.at("config")), 0);
    const auto& tensors = j.at("tensors");
    require(tensors.size() == m.params.blocks().size(), Errc::length_mismatch,
            "checkpoint tensor count does not match config");
    for (std::size_t b = 0; b < tensors.size(); ++b) {
        const auto& t = tensors[b];
        const auto& blk = m.params.block(b);
        require(t.at("name").get<std::string>() == blk.name &&
                    t.at("reals").get<std::size_t>() == blk.size,
                Errc::length_mismatch, "checkpoint tensor " + blk.name + " does not match config");
        read_f64(dir / t.at("file").get<std::string>(), m.params.values(b));
    }
    m.window = window_from_json(j.value("trained_window", json(nullptr)));
    m.provenance = j.value("provenance", std::string());
    return m;
}

json model_info(const FnoModel& model) {
    return json{{"config", to_json(model.config)},
                {"parameter_count", model.parameter_count()},
                {"trained_window", window_json(model.window)},
                {"provenance", model.provenance}};
}

std::string fingerprint(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace lpfno
