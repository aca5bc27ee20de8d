#include <catch_amalgamated.hpp>

#include <set>

#include "lpfno/enthalpy.hpp"

using namespace lpfno;
using Catch::Approx;

TEST_CASE("normalized enthalpy reproduces the reference points", "[enthalpy]") {
    REQUIRE(normalized_enthalpy(150, 0.542) == Approx(7.54).epsilon(0.03));
    REQUIRE(normalized_enthalpy(70, 0.298) == Approx(4.75).epsilon(0.03));
    // Closed-form value with the default material table.
    REQUIRE(normalized_enthalpy(150, 0.542) == Approx(7.6680).epsilon(1e-4));
}

TEST_CASE("enthalpy scales as P over root V", "[enthalpy]") {
    const Real h = normalized_enthalpy(100, 0.4);
    REQUIRE(normalized_enthalpy(200, 0.4) == Approx(2 * h).epsilon(1e-14));
    REQUIRE(normalized_enthalpy(100, 1.6) == Approx(h / 2).epsilon(1e-14));
}

TEST_CASE("speed inversion roundtrips", "[enthalpy]") {
    for (Real p : {40.0, 95.0, 190.0})
        for (Real v : {0.1, 0.33, 1.0}) {
            const Real h = normalized_enthalpy(p, v);
            REQUIRE(std::abs(speed_from_enthalpy(h, p) - v) / v < 1e-10);
        }
    REQUIRE_THROWS_AS(normalized_enthalpy(-1, 0.5), Error);
    REQUIRE_THROWS_AS(speed_from_enthalpy(0, 100), Error);
}

TEST_CASE("material validation", "[enthalpy]") {
    MaterialTable m;
    REQUIRE_NOTHROW(m.validate());
    REQUIRE(m.conductivity() == Approx(26.8515));
    m.t_liquidus = 1800;
    REQUIRE_THROWS_AS(m.validate(), Error);
}

TEST_CASE("plan lattice, exclusions and split rule", "[enthalpy]") {
    const SamplingPlan plan = build_plan({40, 190}, {2, 9}, 6, 8);
    REQUIRE(plan.points.size() + plan.excluded.size() == 48);
    REQUIRE(plan.points.size() <= 48);
    std::set<std::string> ids;
    for (const auto& p : plan.points) {
        REQUIRE(ids.insert(p.id).second);
        REQUIRE(p.params.v_scan_m_s >= 0.1);
        REQUIRE(p.params.v_scan_m_s <= 1.0);
        REQUIRE(std::abs(normalized_enthalpy(p.params.power_w, p.params.v_scan_m_s) -
                         p.params.h_star) / p.params.h_star < 1e-12);
    }
    for (const auto& e : plan.excluded)
        REQUIRE((e.v_scan_m_s < 0.1 || e.v_scan_m_s > 1.0));

    for (std::size_t h = 0; h < plan.n_h; ++h) {
        std::vector<PlanPoint> row;
        for (const auto& p : plan.points)
            if (p.h_row == h) row.push_back(p);
        if (row.empty()) continue;
        std::size_t val = 0, test = 0;
        for (const auto& p : row) {
            val += p.split == Split::validation;
            test += p.split == Split::test;
        }
        REQUIRE(val == 1);
        REQUIRE(test == (row.size() > 1 ? 1u : 0u));
    }
}

TEST_CASE("plan is deterministic, serializable, and rejects empty lattices", "[enthalpy]") {
    const auto a = build_plan({40, 190}, {2, 9}, 6, 8, {0.1, 1.0}, {7});
    const auto b = plan_from_json(to_json(a));
    REQUIRE(a.points.size() == b.points.size());
    for (std::size_t i = 0; i < a.points.size(); ++i) {
        REQUIRE(a.points[i].id == b.points[i].id);
        REQUIRE(a.points[i].split == b.points[i].split);
        REQUIRE(a.points[i].params == b.points[i].params);
    }
    try {
        build_plan({40, 190}, {2, 9}, 4, 4, {50.0, 60.0});
        FAIL("expected empty_plan");
    } catch (const Error& e) {
        REQUIRE(e.code() == Errc::empty_plan);
    }
}
