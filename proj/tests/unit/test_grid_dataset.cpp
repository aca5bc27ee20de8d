#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>

#include "lpfno/dataset.hpp"

using namespace lpfno;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("lpfno_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

FieldBundle random_bundle(const Grid3& g, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<Real> t(300, 3000), f(0, 1);
    std::vector<Real> T(g.size()), a(g.size()), fl(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        // Values representable in binary32 so the roundtrip is exact.
        T[i] = static_cast<float>(t(rng));
        a[i] = static_cast<float>(f(rng));
        fl[i] = static_cast<float>(f(rng));
    }
    return make_bundle(ScalarField3(g, T), ScalarField3(g, a), ScalarField3(g, fl));
}

}  // namespace

TEST_CASE("make_grid extents and smallest grid", "[grid]") {
    const Grid3 g = make_grid(90, 40, 30, 1e-5);
    const auto e = g.extents();
    REQUIRE(e[0] == Catch::Approx(0.9e-3));
    REQUIRE(e[1] == Catch::Approx(0.4e-3));
    REQUIRE(e[2] == Catch::Approx(0.3e-3));
    const Grid3 s = make_grid(2, 2, 2, 1.0);
    REQUIRE(s.size() == 8);
    REQUIRE(s.index(1, 1, 1) == 7);
    REQUIRE(make_grid(3, 4, 5, 0.5).index(2, 3, 4) == 59);
    REQUIRE_THROWS_AS(make_grid(1, 4, 5, 0.5), Error);
    REQUIRE_THROWS_AS(make_grid(3, 4, 5, 0.0), Error);
    REQUIRE_THROWS_AS(make_grid(3, -4, 5, 1.0), Error);
}

TEST_CASE("index and coordinates are inverse bijections up to 8x8x8", "[grid]") {
    for (long nx = 2; nx <= 8; ++nx)
        for (long ny = 2; ny <= 8; ++ny)
            for (long nz = 2; nz <= 8; ++nz) {
                const Grid3 g = make_grid(nx, ny, nz, 1.0);
                std::vector<bool> seen(g.size(), false);
                for (std::size_t i = 0; i < g.nx(); ++i)
                    for (std::size_t j = 0; j < g.ny(); ++j)
                        for (std::size_t k = 0; k < g.nz(); ++k) {
                            const std::size_t idx = g.index(i, j, k);
                            REQUIRE(idx < g.size());
                            REQUIRE_FALSE(seen[idx]);
                            seen[idx] = true;
                            REQUIRE(g.coords(idx) == std::array<std::size_t, 3>{i, j, k});
                        }
            }
}

TEST_CASE("fields reject non-finite values and wrong lengths", "[grid]") {
    const Grid3 g = make_grid(2, 2, 2, 1.0);
    std::vector<Real> v(8, 1.0);
    v[3] = std::nan("");
    REQUIRE_THROWS_AS(ScalarField3(g, v), Error);
    REQUIRE_THROWS_AS(ScalarField3(g, std::vector<Real>(7, 0.0)), Error);
    const auto c = ScalarField3::constant(g, 2.0);
    REQUIRE_THROWS_AS(make_bundle(c, ScalarField3::constant(g, 1.5), c), Error);
    REQUIRE_THROWS_AS(make_bundle(ScalarField3::constant(g, -1.0), c, c), Error);
}

TEST_CASE("subsample takes every factor-th node", "[grid]") {
    const Grid3 g = make_grid(4, 4, 4, 1.0);
    std::vector<Real> ramp(g.size());
    for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = static_cast<Real>(i);
    const ScalarField3 f(g, ramp);
    REQUIRE(subsample(f, 1) == f);
    const ScalarField3 s = subsample(f, 2);
    REQUIRE(s.grid().shape == Shape3{2, 2, 2});
    REQUIRE(s.grid().dx == 2.0);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            for (std::size_t k = 0; k < 2; ++k) REQUIRE(s(i, j, k) == f(2 * i, 2 * j, 2 * k));
    REQUIRE_THROWS_AS(subsample(f, 0), Error);

    const Grid3 fine = make_grid(180, 80, 60, 5e-6);
    const Grid3 coarse = subsample(fine, 2);
    REQUIRE(coarse.shape == Shape3{90, 40, 30});
    REQUIRE(coarse.dx == 1e-5);

    const Grid3 g12 = make_grid(12, 12, 12, 1.0);
    std::vector<Real> v(g12.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::sin(0.1 * static_cast<Real>(i));
    const ScalarField3 h(g12, v);
    REQUIRE(subsample(subsample(h, 2), 3) == subsample(h, 6));
}

TEST_CASE("bundle roundtrip is bit exact and files are little-endian f32", "[dataset]") {
    const fs::path dir = scratch("roundtrip");
    const Grid3 g = make_grid(90, 40, 30, 1e-5);
    const FieldBundle b = random_bundle(g, 1);
    const auto params = make_process_params(150, 0.542);
    DatasetManifest m;
    m.grid = g;
    m.samples.push_back(write_bundle(b, dir, "s0", params, Split::train));
    save_manifest(m, dir);
    REQUIRE(fs::file_size(dir / m.samples[0].files.T) == g.size() * 4);
    const Dataset d(dir);
    REQUIRE(d.load("s0") == b);
    REQUIRE(d.manifest().samples[0].params == params);

    const auto raw = read_f32(dir / m.samples[0].files.T, g.size());
    REQUIRE(raw[0] == b.T[0]);
}

TEST_CASE("missing or truncated arrays give structured errors", "[dataset]") {
    const fs::path dir = scratch("missing");
    const Grid3 g = make_grid(4, 3, 2, 1e-5);
    DatasetManifest m;
    m.grid = g;
    m.samples.push_back(write_bundle(random_bundle(g, 2), dir, "a", make_process_params(100, 0.5),
                                     Split::train));
    save_manifest(m, dir);
    fs::remove(dir / m.samples[0].files.alpha);
    try {
        load_manifest(dir);
        FAIL("expected missing_field_file");
    } catch (const Error& e) {
        REQUIRE(e.code() == Errc::missing_field_file);
    }
    std::ofstream(dir / m.samples[0].files.alpha, std::ios::binary) << "abc";
    try {
        load_manifest(dir);
        FAIL("expected length_mismatch");
    } catch (const Error& e) {
        REQUIRE(e.code() == Errc::length_mismatch);
    }
}

TEST_CASE("unknown schema version and duplicate ids are rejected", "[dataset]") {
    DatasetManifest m;
    m.grid = make_grid(2, 2, 2, 1.0);
    auto j = to_json(m);
    j["schema_version"] = 99;
    try {
        manifest_from_json(j);
        FAIL("expected schema_version");
    } catch (const Error& e) {
        REQUIRE(e.code() == Errc::schema_version);
    }
    SampleEntry e{"x", make_process_params(100, 0.5), Split::train, {"a", "b", "c"}};
    m.samples = {e, e};
    REQUIRE_THROWS_AS(manifest_from_json(to_json(m)), Error);
}

TEST_CASE("write rejects non-finite arrays", "[dataset]") {
    const fs::path dir = scratch("nan");
    std::vector<Real> v{1.0, std::numeric_limits<Real>::infinity()};
    REQUIRE_THROWS_AS(write_f32(dir / "x.f32", v), Error);
}

TEST_CASE("out-of-range fractions are clamped at ingestion", "[dataset]") {
    const fs::path dir = scratch("clamp");
    const Grid3 g = make_grid(2, 2, 2, 1.0);
    write_f32(dir / "c_T.f32", std::vector<Real>(8, 500.0));
    std::vector<Real> a(8, 1.0);
    a[0] = 1.000001;
    a[1] = -1e-6;
    write_f32(dir / "c_alpha.f32", a);
    write_f32(dir / "c_fl.f32", std::vector<Real>(8, 0.0));
    SampleEntry e{"c", make_process_params(100, 0.5), Split::train,
                  {"c_T.f32", "c_alpha.f32", "c_fl.f32"}};
    const FieldBundle b = read_bundle(dir, e, g);
    REQUIRE(b.alpha.max() == 1.0);
    REQUIRE(b.alpha.min() == 0.0);
}
