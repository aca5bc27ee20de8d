#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lpfno/metrics.hpp"
#include "lpfno/model.hpp"

namespace lpfno {

std::string base64_encode(std::string_view bytes);
std::string base64_decode(std::string_view text);

/// Little-endian binary32 bytes of a field, base64 encoded.
std::string encode_f32(std::span<const Real> values);
std::vector<float> decode_f32(std::string_view base64);

struct MeltPoolSummary {
    std::size_t cells = 0;
    std::array<std::size_t, 3> extent_cells{0, 0, 0};  // length (x), width (y), depth (z)
    std::array<Real, 3> extent_m{0, 0, 0};
    Real max_T = 0;  // over metal cells
};

MeltPoolSummary summarize_meltpool(const FieldBundle& bundle, Real tau = kMaskThreshold);
nlohmann::json to_json(const MeltPoolSummary& s);

struct HttpResponse {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
};

/// Request handling over one checkpoint. Handlers are pure functions of the
/// request for a fixed model; reload() swaps the model atomically.
class SurrogateService {
public:
    explicit SurrogateService(std::filesystem::path checkpoint,
                              std::optional<std::filesystem::path> process_map = std::nullopt);
    SurrogateService(std::shared_ptr<const FnoModel> model,
                     std::vector<ProcessMapRow> process_map = {});

    HttpResponse handle(const std::string& method, const std::string& path,
                        const std::map<std::string, std::string>& query,
                        const std::string& body) const;

    HttpResponse model_info() const;
    HttpResponse infer(const std::string& body) const;
    HttpResponse process_map(const std::string& metric) const;
    HttpResponse healthz() const;

    /// Loads the checkpoint again and swaps it in. Requests arriving while the
    /// load is in progress get 503.
    void reload();

    std::shared_ptr<const FnoModel> model() const;

private:
    std::optional<std::filesystem::path> checkpoint_;
    mutable std::mutex mu_;
    std::shared_ptr<const FnoModel> model_;
    std::vector<ProcessMapRow> map_;
    std::atomic<bool> reloading_{false};
};

/// Reads a process-map CSV written by `lpfno eval`.
std::vector<ProcessMapRow> read_process_map_csv(const std::filesystem::path& path);

/// host:port from LPFNO_BIND, defaulting to 127.0.0.1:8080.
std::pair<std::string, int> bind_address_from_env();

/// Blocks serving the /v1 endpoints until the server is stopped.
void serve(SurrogateService& service, const std::string& host, int port);

}  // namespace lpfno
