#include "lpfno/service.hpp"

#include <algorithm>
#include <bit>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "httplib.h"

namespace lpfno {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

HttpResponse json_response(int status, const json& j) { return {status, j.dump(), "application/json"}; }

HttpResponse error_response(int status, const std::string& message) {
    return json_response(status, json{{"error", message}, {"status", status}});
}

json grid_json(const Grid3& g) {
    return {{"nx", g.nx()}, {"ny", g.ny()}, {"nz", g.nz()}, {"dx_m", g.dx}, {"origin", g.origin}};
}

}  // namespace

std::string base64_encode(std::string_view in) {
    std::string out;
    out.reserve((in.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 2 < in.size(); i += 3) {
        const auto n = (std::uint32_t(std::uint8_t(in[i])) << 16) |
                       (std::uint32_t(std::uint8_t(in[i + 1])) << 8) | std::uint8_t(in[i + 2]);
        out += kAlphabet[(n >> 18) & 63];
        out += kAlphabet[(n >> 12) & 63];
        out += kAlphabet[(n >> 6) & 63];
        out += kAlphabet[n & 63];
    }
    if (i < in.size()) {
        std::uint32_t n = std::uint32_t(std::uint8_t(in[i])) << 16;
        if (i + 1 < in.size()) n |= std::uint32_t(std::uint8_t(in[i + 1])) << 8;
        out += kAlphabet[(n >> 18) & 63];
        out += kAlphabet[(n >> 12) & 63];
        out += i + 1 < in.size() ? kAlphabet[(n >> 6) & 63] : '=';
        out += '=';
    }
    return out;
}

std::string base64_decode(std::string_view in) {
    require(in.size() % 4 == 0, Errc::invalid_argument, "base64 length not a multiple of 4");
    auto value = [](char c) -> int {
        const char* p = std::strchr(kAlphabet, c);
        return (c != '\0' && p) ? static_cast<int>(p - kAlphabet) : -1;
    };
    std::string out;
    out.reserve(in.size() / 4 * 3);
    for (std::size_t i = 0; i < in.size(); i += 4) {
        int v[4];
        int pad = 0;
        for (int k = 0; k < 4; ++k) {
            if (in[i + k] == '=' && i + 4 == in.size() && k >= 2) {
                v[k] = 0;
                ++pad;
                continue;
            }
            v[k] = value(in[i + k]);
            require(v[k] >= 0 && pad == 0, Errc::invalid_argument, "invalid base64 input");
        }
        const std::uint32_t n = (std::uint32_t(v[0]) << 18) | (std::uint32_t(v[1]) << 12) |
                                (std::uint32_t(v[2]) << 6) | std::uint32_t(v[3]);
        out += static_cast<char>((n >> 16) & 0xff);
        if (pad < 2) out += static_cast<char>((n >> 8) & 0xff);
        if (pad < 1) out += static_cast<char>(n & 0xff);
    }
    return out;
}

std::string encode_f32(std::span<const Real> values) {
    std::string bytes(values.size() * 4, '\0');
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint32_t b = std::bit_cast<std::uint32_t>(static_cast<float>(values[i]));
        if constexpr (std::endian::native == std::endian::big) b = __builtin_bswap32(b);
        std::memcpy(bytes.data() + 4 * i, &b, 4);
    }
    return base64_encode(bytes);
}

std::vector<float> decode_f32(std::string_view text) {
    const std::string bytes = base64_decode(text);
    require(bytes.size() % 4 == 0, Errc::length_mismatch, "payload is not a float32 array");
    std::vector<float> out(bytes.size() / 4);
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint32_t b;
        std::memcpy(&b, bytes.data() + 4 * i, 4);
        if constexpr (std::endian::native == std::endian::big) b = __builtin_bswap32(b);
        out[i] = std::bit_cast<float>(b);
    }
    return out;
}

MeltPoolSummary summarize_meltpool(const FieldBundle& b, Real tau) {
    const ScalarField3 mask = meltpool_mask(b.alpha, b.fl, tau);
    const Grid3& g = b.grid();
    MeltPoolSummary s;
    std::array<std::size_t, 3> lo{g.nx(), g.ny(), g.nz()}, hi{0, 0, 0};
    for (std::size_t idx = 0; idx < g.size(); ++idx) {
        if (is_metal(b.alpha[idx])) s.max_T = std::max(s.max_T, b.T[idx]);
        if (mask[idx] < 0.5) continue;
        ++s.cells;
        const auto c = g.coords(idx);
        for (int a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], c[a]);
            hi[a] = std::max(hi[a], c[a]);
        }
    }
    if (s.cells > 0)
        for (int a = 0; a < 3; ++a) {
            s.extent_cells[a] = hi[a] - lo[a] + 1;
            s.extent_m[a] = static_cast<Real>(s.extent_cells[a]) * g.dx;
        }
    return s;
}

json to_json(const MeltPoolSummary& s) {
    return {{"cells", s.cells},
            {"length_cells", s.extent_cells[0]},
            {"width_cells", s.extent_cells[1]},
            {"depth_cells", s.extent_cells[2]},
            {"length_m", s.extent_m[0]},
            {"width_m", s.extent_m[1]},
            {"depth_m", s.extent_m[2]},
            {"max_T_K", s.max_T}};
}

SurrogateService::SurrogateService(fs::path checkpoint, std::optional<fs::path> map)
    : checkpoint_(std::move(checkpoint)) {
    model_ = std::make_shared<const FnoModel>(load_checkpoint(*checkpoint_));
    if (map) map_ = read_process_map_csv(*map);
}

SurrogateService::SurrogateService(std::shared_ptr<const FnoModel> model,
                                   std::vector<ProcessMapRow> map)
    : model_(std::move(model)), map_(std::move(map)) {
    require(model_ != nullptr, Errc::uninitialized, "service needs a model");
}

std::shared_ptr<const FnoModel> SurrogateService::model() const {
    std::lock_guard lock(mu_);
    return model_;
}

void SurrogateService::reload() {
    require(checkpoint_.has_value(), Errc::invalid_argument, "service was not started from a checkpoint");
    reloading_ = true;
    try {
        auto fresh = std::make_shared<const FnoModel>(load_checkpoint(*checkpoint_));
        std::lock_guard lock(mu_);
        model_ = std::move(fresh);
    } catch (...) {
        reloading_ = false;
        throw;
    }
    reloading_ = false;
}

HttpResponse SurrogateService::healthz() const {
    if (reloading_) return error_response(503, "checkpoint reload in progress");
    return json_response(200, json{{"status", "ok"}});
}

HttpResponse SurrogateService::model_info() const {
    if (reloading_) return error_response(503, "checkpoint reload in progress");
    return json_response(200, lpfno::model_info(*model()));
}

HttpResponse SurrogateService::process_map(const std::string& metric) const {
    if (reloading_) return error_response(503, "checkpoint reload in progress");
    if (map_.empty()) return error_response(404, "no process map loaded");
    const auto& names = map_.front().values;
    const auto it = std::find_if(names.begin(), names.end(),
                                 [&](const auto& kv) { return kv.first == metric; });
    if (it == names.end()) return error_response(400, "unknown metric '" + metric + "'");
    const auto col = static_cast<std::size_t>(it - names.begin());
    json rows = json::array();
    for (const auto& r : map_)
        rows.push_back({{"id", r.id},
                        {"power_w", r.power_w},
                        {"v_scan_m_s", r.v_scan_m_s},
                        {"h_star", r.h_star},
                        {"value", r.values.at(col).second}});
    return json_response(200, json{{"metric", metric}, {"rows", rows}});
}

HttpResponse SurrogateService::infer(const std::string& body) const {
    if (reloading_) return error_response(503, "checkpoint reload in progress");
    const auto model = this->model();
    json req;
    try {
        req = json::parse(body);
    } catch (const json::exception& e) {
        return error_response(400, std::string("malformed JSON: ") + e.what());
    }
    ProcessParams params;
    Grid3 grid = model->config.train_grid;
    std::vector<std::string> fields{"T", "alpha", "fl"};
    std::string encoding = "base64-f32";
    try {
        if (!req.is_object() || !req.contains("power_w") || !req.contains("v_scan_m_s"))
            return error_response(400, "power_w and v_scan_m_s are required");
        const Real p = req.at("power_w").get<Real>();
        const Real v = req.at("v_scan_m_s").get<Real>();
        if (!(p > 0) || !(v > 0) || !std::isfinite(p) || !std::isfinite(v))
            return error_response(400, "power_w and v_scan_m_s must be positive");
        params = make_process_params(p, v, model->config.material);
        if (req.contains("fields")) fields = req.at("fields").get<std::vector<std::string>>();
        for (const auto& f : fields)
            if (f != "T" && f != "alpha" && f != "fl" && f != "meltpool_mask")
                return error_response(400, "unknown field '" + f + "'");
        encoding = req.value("encoding", encoding);
        if (encoding != "base64-f32" && encoding != "json-stats")
            return error_response(400, "unknown encoding '" + encoding + "'");
        if (req.contains("grid")) {
            const auto& g = req.at("grid");
            try {
                grid = make_grid(g.at("nx").get<long>(), g.at("ny").get<long>(),
                                 g.at("nz").get<long>(), g.at("dx_m").get<Real>());
            } catch (const Error& e) {
                return error_response(422, e.what());
            }
        }
    } catch (const json::exception& e) {
        return error_response(400, std::string("bad request field: ") + e.what());
    }

    FieldBundle out;
    try {
        out = lpfno::infer(*model, params, grid);
    } catch (const Error& e) {
        if (e.code() == Errc::mode_capacity || e.code() == Errc::invalid_argument)
            return error_response(422, e.what());
        return error_response(500, e.what());
    }

    const ScalarField3 mask = meltpool_mask(out.alpha, out.fl);
    json fj = json::object();
    for (const auto& f : fields) {
        const ScalarField3& src = f == "T" ? out.T : f == "alpha" ? out.alpha
                                  : f == "fl"                  ? out.fl
                                                               : mask;
        if (encoding == "base64-f32")
            fj[f] = {{"encoding", encoding}, {"length", src.size()}, {"data", encode_f32(src.values())}};
        else
            fj[f] = {{"encoding", encoding}, {"length", src.size()}, {"min", src.min()},
                     {"max", src.max()}, {"mean", src.mean()}};
    }
    return json_response(
        200, json{{"grid", grid_json(grid)},
                  {"params",
                   {{"power_w", params.power_w},
                    {"v_scan_m_s", params.v_scan_m_s},
                    {"h_star", params.h_star}}},
                  {"extrapolation", !model->window.contains(params)},
                  {"fields", fj},
                  {"meltpool", to_json(summarize_meltpool(out))}});
}

HttpResponse SurrogateService::handle(const std::string& method, const std::string& path,
                                      const std::map<std::string, std::string>& query,
                                      const std::string& body) const {
    if (path == "/v1/healthz" && method == "GET") return healthz();
    if (path == "/v1/model/info" && method == "GET") return model_info();
    if (path == "/v1/infer" && method == "POST") return infer(body);
    if (path == "/v1/process-map" && method == "GET") {
        const auto it = query.find("metric");
        return process_map(it == query.end() ? "T.rel_rmse" : it->second);
    }
    return error_response(404, "no route for " + method + " " + path);
}

std::vector<ProcessMapRow> read_process_map_csv(const fs::path& path) {
    std::ifstream in(path);
    require(in.good(), Errc::io, "cannot read process map " + path.string());
    auto split = [](const std::string& line) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        return cells;
    };
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), Errc::io, "empty process map");
    const auto header = split(line);
    require(header.size() >= 4 && header[0] == "id", Errc::io, "unexpected process map header");
    std::vector<ProcessMapRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split(line);
        require(cells.size() == header.size(), Errc::length_mismatch, "ragged process map row");
        ProcessMapRow r;
        r.id = cells[0];
        r.power_w = std::stod(cells[1]);
        r.v_scan_m_s = std::stod(cells[2]);
        r.h_star = std::stod(cells[3]);
        for (std::size_t c = 4; c < cells.size(); ++c)
            r.values.emplace_back(header[c], std::stod(cells[c]));
        rows.push_back(std::move(r));
    }
    return rows;
}

std::pair<std::string, int> bind_address_from_env() {
    const char* env = std::getenv("LPFNO_BIND");
    std::string addr = env && *env ? env : "127.0.0.1:8080";
    const auto colon = addr.rfind(':');
    require(colon != std::string::npos, Errc::invalid_argument, "LPFNO_BIND must be host:port");
    return {addr.substr(0, colon), std::stoi(addr.substr(colon + 1))};
}

void serve(SurrogateService& service, const std::string& host, int port) {
    httplib::Server server;
    auto route = [&service](const httplib::Request& req, httplib::Response& res) {
        std::map<std::string, std::string> query;
        for (const auto& [k, v] : req.params) query[k] = v;
        HttpResponse r = service.handle(req.method, req.path, query, req.body);
        res.status = r.status;
        res.set_content(r.body, r.content_type);
    };
    server.Get("/v1/healthz", route);
    server.Get("/v1/model/info", route);
    server.Get("/v1/process-map", route);
    server.Post("/v1/infer", route);
    server.Post("/v1/admin/reload", [&service](const httplib::Request&, httplib::Response& res) {
        try {
            service.reload();
            res.set_content(R"({"status":"reloaded"})", "application/json");
        } catch (const std::exception& e) {
            res.status = 500;
            res.set_content(json{{"error", e.what()}, {"status", 500}}.dump(), "application/json");
        }
    });
    require(server.listen(host, port), Errc::io,
            "cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace lpfno
