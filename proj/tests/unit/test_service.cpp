#include <catch_amalgamated.hpp>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "lpfno/service.hpp"

using namespace lpfno;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::shared_ptr<const FnoModel> tiny_model() {
    ModelConfig c;
    c.train_grid = make_grid(12, 8, 6, 2e-5);
    c.modes = {2, 2, 2};
    c.latent_width = 3;
    c.padding = 2;
    FnoModel m = build_model(c, 5);
    m.window.known = true;
    m.window.power_w = {50, 200};
    m.window.v_scan_m_s = {0.2, 1.0};
    m.window.h_star = {2, 10};
    return std::make_shared<const FnoModel>(std::move(m));
}

json post(const SurrogateService& s, const json& body, int expect) {
    const auto r = s.handle("POST", "/v1/infer", {}, body.dump());
    INFO(r.body);
    REQUIRE(r.status == expect);
    return json::parse(r.body);
}

}  // namespace

TEST_CASE("base64 roundtrip", "[service]") {
    REQUIRE(base64_encode("") == "");
    REQUIRE(base64_encode("f") == "Zg==");
    REQUIRE(base64_encode("fo") == "Zm8=");
    REQUIRE(base64_encode("foo") == "Zm9v");
    REQUIRE(base64_encode("foobar") == "Zm9vYmFy");
    REQUIRE(base64_decode("Zm9vYmE=") == "fooba");
    std::string all;
    for (int i = 0; i < 256; ++i) all.push_back(static_cast<char>(i));
    REQUIRE(base64_decode(base64_encode(all)) == all);
    REQUIRE_THROWS_AS(base64_decode("Zm9"), Error);
    REQUIRE_THROWS_AS(base64_decode("Zm!v"), Error);

    const std::vector<Real> v{0.0, -1.5, 3000.25, 1e-3};
    const auto f = decode_f32(encode_f32(v));
    REQUIRE(f.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) REQUIRE(f[i] == static_cast<float>(v[i]));
}

TEST_CASE("melt-pool summary matches a brute-force scan", "[service]") {
    const Grid3 g = make_grid(6, 5, 4, 1e-5);
    std::vector<Real> T(g.size(), 500), a(g.size(), 1), fl(g.size(), 0);
    T[g.index(1, 1, 3)] = 2900;
    a[g.index(3, 2, 3)] = 0;
    for (auto [i, j, k] : {std::array<std::size_t, 3>{1, 1, 3}, {2, 1, 3}, {3, 3, 3}, {2, 2, 1}})
        fl[g.index(i, j, k)] = 1;
    fl[g.index(4, 4, 3)] = 0.4;
    const FieldBundle b{ScalarField3(g, T), ScalarField3(g, a), ScalarField3(g, fl)};
    const auto s = summarize_meltpool(b);
    REQUIRE(s.cells == 4);
    REQUIRE(s.extent_cells == std::array<std::size_t, 3>{3, 3, 3});
    REQUIRE(s.extent_m[0] == Catch::Approx(3e-5));
    REQUIRE(s.max_T == 2900);

    const FieldBundle none{ScalarField3(g, T), ScalarField3(g, a),
                           ScalarField3(g, std::vector<Real>(g.size(), 0))};
    REQUIRE(summarize_meltpool(none).cells == 0);
    REQUIRE(summarize_meltpool(none).extent_cells == std::array<std::size_t, 3>{0, 0, 0});
}

TEST_CASE("inference endpoint", "[service]") {
    const auto model = tiny_model();
    const SurrogateService s(model);
    const json req{{"power_w", 100}, {"v_scan_m_s", 0.5}};

    const json r = post(s, req, 200);
    REQUIRE(r["grid"]["nx"] == 12);
    REQUIRE_FALSE(r["extrapolation"].get<bool>());
    REQUIRE(r["params"]["h_star"].get<Real>() ==
            Catch::Approx(normalized_enthalpy(100, 0.5, model->config.material)));
    const FieldBundle direct = infer(*model, make_process_params(100, 0.5), model->config.train_grid);
    for (const char* name : {"T", "alpha", "fl"}) {
        const auto& f = r["fields"][name];
        REQUIRE(f["length"] == 12 * 8 * 6);
        const auto data = decode_f32(f["data"].get<std::string>());
        REQUIRE(data.size() == 12u * 8 * 6);
        const ScalarField3& ref = std::string(name) == "T" ? direct.T
                                  : std::string(name) == "alpha" ? direct.alpha
                                                                 : direct.fl;
        for (std::size_t i = 0; i < data.size(); ++i) REQUIRE(data[i] == static_cast<float>(ref[i]));
    }
    REQUIRE(post(s, req, 200) == r);

    const json far = post(s, {{"power_w", 400}, {"v_scan_m_s", 0.5}}, 200);
    REQUIRE(far["extrapolation"].get<bool>());

    const json stats = post(
        s, {{"power_w", 100}, {"v_scan_m_s", 0.5}, {"fields", {"T", "meltpool_mask"}},
            {"encoding", "json-stats"}},
        200);
    REQUIRE(stats["fields"].size() == 2);
    REQUIRE(stats["fields"]["T"]["max"].get<Real>() == Catch::Approx(direct.T.max()));
    REQUIRE(stats["fields"]["meltpool_mask"]["max"].get<Real>() <= 1);

    const json sup = post(s,
                          {{"power_w", 100},
                           {"v_scan_m_s", 0.5},
                           {"grid", {{"nx", 24}, {"ny", 16}, {"nz", 12}, {"dx_m", 1e-5}}}},
                          200);
    REQUIRE(sup["fields"]["T"]["length"] == 24 * 16 * 12);
}

TEST_CASE("inference endpoint rejects bad requests", "[service]") {
    const SurrogateService s(tiny_model());
    REQUIRE(s.handle("POST", "/v1/infer", {}, "{not json").status == 400);
    post(s, {{"power_w", 100}}, 400);
    post(s, {{"power_w", -1}, {"v_scan_m_s", 0.5}}, 400);
    post(s, {{"power_w", 100}, {"v_scan_m_s", 0.5}, {"fields", {"pressure"}}}, 400);
    post(s, {{"power_w", 100}, {"v_scan_m_s", 0.5}, {"encoding", "png"}}, 400);
    post(s, {{"power_w", 100}, {"v_scan_m_s", 0.5}, {"grid", {{"nx", 0}, {"ny", 4}, {"nz", 4}, {"dx_m", 1e-5}}}},
         422);
    // fewer cells than retained modes
    post(s, {{"power_w", 100}, {"v_scan_m_s", 0.5}, {"grid", {{"nx", 1}, {"ny", 1}, {"nz", 1}, {"dx_m", 4e-5}}}},
         422);
    REQUIRE(s.handle("GET", "/v1/nothing", {}, "").status == 404);
    REQUIRE(s.handle("GET", "/v1/infer", {}, "").status == 404);
}

TEST_CASE("info, health and process map", "[service]") {
    const auto model = tiny_model();
    SampleMetrics a{"a", make_process_params(100, 0.5), {}}, b{"b", make_process_params(60, 0.5), {}};
    a.metrics.T.rel_rmse = 0.02;
    b.metrics.T.rel_rmse = 0.05;
    const auto rows = process_map({a, b});
    const fs::path csv = fs::temp_directory_path() / "lpfno_test_map.csv";
    {
        std::ofstream out(csv);
        out << process_map_csv(rows);
    }
    const auto back = read_process_map_csv(csv);
    REQUIRE(back.size() == 2);
    REQUIRE(back[0].id == "b");
    REQUIRE(back[1].values == rows[1].values);

    const SurrogateService s(model, back);
    REQUIRE(s.handle("GET", "/v1/healthz", {}, "").status == 200);
    const auto info = json::parse(s.handle("GET", "/v1/model/info", {}, "").body);
    REQUIRE(info["parameter_count"] == model->params.parameter_count());
    const auto map = s.handle("GET", "/v1/process-map", {{"metric", "T.rel_rmse"}}, "");
    REQUIRE(map.status == 200);
    const auto mj = json::parse(map.body);
    REQUIRE(mj["rows"].size() == 2);
    REQUIRE(mj["rows"][0]["value"].get<Real>() == 0.05);
    REQUIRE(s.handle("GET", "/v1/process-map", {{"metric", "bogus"}}, "").status == 400);
    REQUIRE(SurrogateService(model).handle("GET", "/v1/process-map", {}, "").status == 404);
    fs::remove(csv);
}

TEST_CASE("checkpoint-backed service reloads", "[service]") {
    const fs::path dir = fs::temp_directory_path() / "lpfno_test_service_ckpt";
    fs::remove_all(dir);
    save_checkpoint(*tiny_model(), dir);
    SurrogateService s(dir);
    const auto before = s.model();
    s.reload();
    REQUIRE(s.model() != before);
    REQUIRE(s.model()->params == before->params);
    REQUIRE(s.handle("POST", "/v1/infer", {}, R"({"power_w":100,"v_scan_m_s":0.5})").status == 200);
    fs::remove_all(dir);
}
