#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <set>

#include "lpfno/oracle.hpp"
#include "lpfno/train.hpp"

using namespace lpfno;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

ScalarField3 field(const std::vector<Real>& v) { return ScalarField3(make_grid(2, 2, 2, 1.0), v); }

DatasetManifest fake_manifest(std::size_t n_train, std::size_t n_val) {
    DatasetManifest m;
    m.grid = make_grid(2, 2, 2, 1.0);
    for (std::size_t i = 0; i < n_train + n_val; ++i) {
        const std::string id = "s" + std::to_string(100 + i);
        m.samples.push_back({id, make_process_params(50 + Real(i), 0.5),
                             i < n_train ? Split::train : Split::validation,
                             {id + "_T", id + "_a", id + "_f"}});
    }
    return m;
}

}  // namespace

TEST_CASE("field L2 loss", "[train]") {
    const auto a = field({1, 2, 3, 4, 5, 6, 7, 8});
    REQUIRE(field_l2_loss(a, a) == 0);
    REQUIRE(field_l2_loss(field({1.5, 2.5, 3.5, 4.5, 5.5, 6.5, 7.5, 8.5}), a) == 0.25);
    const auto b = field({0, 1, 0, 1, 0, 1, 0, 3});
    Real brute = 0;
    for (std::size_t i = 0; i < 8; ++i) brute += (a[i] - b[i]) * (a[i] - b[i]);
    REQUIRE(field_l2_loss(a, b) == Approx(brute / 8).epsilon(1e-15));
    REQUIRE_THROWS_AS(field_l2_loss(a, ScalarField3(make_grid(2, 2, 3, 1.0), std::vector<Real>(12))),
                      Error);
}

TEST_CASE("metrics match per-cell loops on hand-built samples", "[train]") {
    const std::vector<ScalarField3> t{field({1, 2, 3, 4, 5, 6, 7, 8}), field({2, 2, 2, 2, 2, 2, 2, 2})};
    const std::vector<ScalarField3> p{field({1, 3, 3, 2, 5, 6, 7, 9}), field({2, 2, 2, 2, 2, 2, 2, 6})};
    // sample 0: |e| = 0,1,0,2,0,0,0,1 -> MAE 0.5, RMSE sqrt(6/8)
    // sample 1: |e| = 0,...,4        -> MAE 0.5, RMSE sqrt(16/8)
    REQUIRE(mae(p, t) == 0.5);
    REQUIRE(rmse(p, t) == Approx(0.5 * (std::sqrt(0.75) + std::sqrt(2.0))).epsilon(1e-15));
    const Real mu = (36.0 + 16.0) / 16.0;
    REQUIRE(global_mean(t) == mu);
    REQUIRE(rel_mae(p, t) == 0.5 / (mu + 1e-8));
    REQUIRE(rel_rmse(p, t) == rmse(p, t) / (mu + 1e-8));
    REQUIRE(mae(t, t) == 0);
    REQUIRE(rmse(t, t) == 0);
    REQUIRE_THROWS_AS(mae({}, {}), Error);

    const std::vector<ScalarField3> c{field(std::vector<Real>(8, 3.0))};
    const std::vector<ScalarField3> z{field(std::vector<Real>(8, 0.0))};
    REQUIRE(mae(c, z) == 3);
    REQUIRE(rmse(c, z) == 3);
}

TEST_CASE("IoU of thresholded masks", "[train]") {
    const auto a = field({1, 1, 0, 0, 0, 0, 0, 0});
    const auto b = field({0, 1, 1, 0, 0, 0, 0, 0});
    const auto d = field({0, 0, 0, 0, 0, 0, 1, 1});
    const auto empty = field(std::vector<Real>(8, 0.2));
    REQUIRE(iou({a}, {a}) == 1.0);
    REQUIRE(iou({a}, {d}) == 0.0);
    REQUIRE(iou({a}, {b}) == Approx(1.0 / 3));
    REQUIRE(iou({empty}, {empty}) == 1.0);
    REQUIRE(iou({a, a}, {b, a}) == Approx((1.0 / 3 + 1) / 2));
    REQUIRE(iou({field({0.5, 0.49, 0, 0, 0, 0, 0, 0})}, {field({0.5, 0, 0, 0, 0, 0, 0, 0})}) == 1.0);
}

TEST_CASE("ReLoBRaLo weights", "[train]") {
    SECTION("equal losses keep unit weights") {
        LossState s = make_loss_state({}, 1);
        const std::array<Real, 3> l{0.3, 0.3, 0.3};
        REQUIRE(relobralo_init(s, l) == Approx(0.9));
        for (int t = 0; t < 50; ++t) {
            const auto a = relobralo_aggregate(s, l);
            for (Real w : a.weights) REQUIRE(w == Approx(1).epsilon(1e-12));
            REQUIRE(a.total == Approx(0.9).epsilon(1e-12));
        }
    }
    SECTION("huge temperature flattens the softmax") {
        RelobraloConfig cfg;
        cfg.tau = 1e12;
        LossState s = make_loss_state(cfg, 1);
        relobralo_init(s, std::array<Real, 3>{1.0, 0.1, 5.0});
        for (int t = 0; t < 10; ++t) {
            const auto a = relobralo_aggregate(s, std::array<Real, 3>{0.2 * (t + 1), 3.0, 0.01});
            for (Real w : a.weights) REQUIRE(std::abs(w - 1) < 1e-6);
        }
    }
    SECTION("two objectives, one step, lookback drawn") {
        LossState s = make_loss_state({}, 1);
        relobralo_init(s, std::array<Real, 2>{1.0, 2.0});
        const auto a = relobralo_aggregate(s, std::array<Real, 2>{0.5, 1.0}, true);
        // lambda = 0.95 * 1 + 0.05 * 2 softmax(0.5/(3*1+eps), 1/(3*2+eps)) = equal terms
        const Real z1 = 0.5 / (3 + 1e-8), z2 = 1.0 / (6 + 1e-8);
        const Real e1 = std::exp(z1), e2 = std::exp(z2);
        const Real h1 = 2 * e1 / (e1 + e2), h2 = 2 * e2 / (e1 + e2);
        REQUIRE(a.weights[0] == Approx(0.95 + 0.05 * h1).epsilon(1e-14));
        REQUIRE(a.weights[1] == Approx(0.95 + 0.05 * h2).epsilon(1e-14));
        REQUIRE(a.total == Approx(a.weights[0] * 0.5 + a.weights[1] * 1.0).epsilon(1e-14));
        const auto b = relobralo_aggregate(s, std::array<Real, 2>{0.4, 1.0}, false);
        const Real y1 = std::exp(0.4 / (3 + 1e-8)), y2 = std::exp(1.0 / (6 + 1e-8));
        const Real p1 = std::exp(0.4 / (1.5 + 1e-8)), p2 = std::exp(1.0 / (3 + 1e-8));
        REQUIRE(b.weights[0] ==
                Approx(0.95 * 2 * y1 / (y1 + y2) + 0.05 * 2 * p1 / (p1 + p2)).epsilon(1e-14));
    }
    SECTION("uninitialized state is an error") {
        LossState s = make_loss_state({}, 1);
        try {
            relobralo_aggregate(s, std::array<Real, 3>{1, 1, 1});
            FAIL("expected uninitialized");
        } catch (const Error& e) {
            REQUIRE(e.code() == Errc::uninitialized);
        }
    }
    SECTION("seeded draws are reproducible") {
        LossState a = make_loss_state({}, 9), b = make_loss_state({}, 9);
        relobralo_init(a, std::array<Real, 2>{1, 2});
        relobralo_init(b, std::array<Real, 2>{1, 2});
        for (int t = 1; t < 100; ++t) {
            const std::array<Real, 2> l{1.0 / t, 2.0 / (t * t)};
            REQUIRE(relobralo_aggregate(a, l).weights == relobralo_aggregate(b, l).weights);
        }
    }
}

TEST_CASE("Lion update and schedule", "[train]") {
    OptimState s = make_optim_state({}, 3);
    std::vector<Real> theta{1.0, 2.0, -3.0};
    const std::vector<Real> g{0.2, 0.0, -5.0};
    lion_step(theta, g, s);
    REQUIRE(theta[0] == 1.0 - 6e-5);
    REQUIRE(theta[1] == 2.0);
    REQUIRE(theta[2] == -3.0 + 6e-5);
    REQUIRE(s.momentum[0] == Approx(0.01 * 0.2).epsilon(1e-15));
    REQUIRE(s.momentum[1] == 0.0);
    REQUIRE(s.step == 1);

    const OptimConfig c;
    REQUIRE(scheduled_lr(c, 0) == 6e-5);
    REQUIRE(scheduled_lr(c, 99) == 6e-5);
    REQUIRE(scheduled_lr(c, 100) == 6e-5 * 0.98);
    REQUIRE(scheduled_lr(c, 1000) == 6e-5 * std::pow(0.98, 10));

    std::mt19937_64 rng(5);
    std::normal_distribution<Real> n(0, 1);
    OptimState big = make_optim_state({}, 64);
    std::vector<Real> p(64, 0.0), before;
    for (int step = 0; step < 20; ++step) {
        std::vector<Real> grad(64);
        for (Real& x : grad) x = n(rng) * std::pow(10.0, step % 7 - 3);
        before = p;
        const Real lr = scheduled_lr(big.cfg, big.step);
        lion_step(p, grad, big);
        for (std::size_t i = 0; i < 64; ++i) {
            const Real d = std::abs(p[i] - before[i]);
            REQUIRE((d == 0 || std::abs(d - lr) <= 1e-15));
        }
    }
}

TEST_CASE("global norm clipping", "[train]") {
    std::vector<Real> g{3, 4};
    REQUIRE(clip_global_norm(g, 0.5) == 5);
    REQUIRE(std::hypot(g[0], g[1]) <= 0.5 + 1e-12);
    std::vector<Real> small{0.1, 0.2};
    const auto copy = small;
    clip_global_norm(small, 0.5);
    REQUIRE(small == copy);
}

TEST_CASE("fold plans", "[train]") {
    const auto loo = make_fold_plan(fake_manifest(8, 2), 8, 1);
    REQUIRE(loo.test.size() == 8);
    std::set<std::string> seen;
    for (const auto& f : loo.test) {
        REQUIRE(f.size() == 1);
        REQUIRE(seen.insert(f[0]).second);
    }
    REQUIRE(loo.excluded.size() == 2);

    const auto plan = make_fold_plan(fake_manifest(17, 3), 8, 4);
    std::set<std::string> all;
    for (std::size_t f = 0; f < 8; ++f) {
        REQUIRE((plan.test[f].size() == 2 || plan.test[f].size() == 3));
        REQUIRE(plan.train[f].size() + plan.test[f].size() == 17);
        for (const auto& id : plan.test[f]) REQUIRE(all.insert(id).second);
    }
    REQUIRE(all.size() == 17);
    for (const auto& id : plan.excluded) REQUIRE(all.count(id) == 0);

    auto shuffled = fake_manifest(17, 3);
    std::reverse(shuffled.samples.begin(), shuffled.samples.end());
    REQUIRE(make_fold_plan(shuffled, 8, 4).test == plan.test);
    REQUIRE_THROWS_AS(make_fold_plan(fake_manifest(5, 1), 8, 1), Error);
}

TEST_CASE("fold aggregates bracket the mean", "[train]") {
    std::vector<BundleMetrics> folds(3);
    folds[0].T.mae = 1;
    folds[1].T.mae = 4;
    folds[2].T.mae = 2;
    const auto agg = aggregate_folds(folds);
    for (const auto& [name, r] : agg) {
        REQUIRE(r.min <= r.mean);
        REQUIRE(r.mean <= r.max);
        if (name == "T.mae") {
            REQUIRE(r.mean == Approx(7.0 / 3));
            REQUIRE(r.min == 1);
            REQUIRE(r.max == 4);
        }
    }
}

TEST_CASE("process map rows", "[train]") {
    SampleMetrics a{"a", make_process_params(100, 0.5), {}};
    SampleMetrics b{"b", make_process_params(50, 0.5), {}};
    SampleMetrics c{"c", make_process_params(150, 0.5), {}};
    a.metrics.T.mae = 12;
    REQUIRE(process_map({a}).size() == 1);
    REQUIRE(process_map({a})[0].power_w == 100);
    const auto rows = process_map({a, c, b});
    REQUIRE(rows.size() == 3);
    REQUIRE(rows[0].id == "b");
    REQUIRE(rows[2].id == "c");
    const std::string csv = process_map_csv(rows);
    REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 4);
}

namespace {

struct TinyData {
    fs::path dir;
    FnoModel model;
};

TinyData tiny_dataset() {
    OracleConfig oc;
    oc.grid = make_grid(24, 12, 9, 3.75e-5);
    SamplingPlan plan = build_plan({60, 160}, {3, 7}, 2, 2, {0.05, 5.0});
    for (auto& p : plan.points) p.split = Split::train;
    const fs::path dir = fs::temp_directory_path() / "lpfno_test_tiny_data";
    generate_dataset(plan, oc, dir);
    ModelConfig mc;
    mc.train_grid = oc.grid;
    mc.modes = {4, 4, 3};
    mc.latent_width = 6;
    mc.padding = 3;
    mc.decoder.width = 8;
    return {dir, build_model(mc, 11)};
}

}  // namespace

TEST_CASE("training on a tiny oracle set reduces the loss and is reproducible", "[train]") {
    const TinyData t = tiny_dataset();
    const Dataset data(t.dir);
    REQUIRE(data.manifest().samples.size() == 4);
    RunConfig run;
    run.steps = 0;
    REQUIRE(train(t.model, data, run).model.params == t.model.params);

    run.steps = 500;
    run.seed = 3;
    run.optim.lr = 1e-3;
    run.validation_interval = 0;
    const TrainResult a = train(t.model, data, run);
    auto mean_total = [](const TrainHistory& h, std::size_t from, std::size_t to) {
        Real s = 0;
        for (std::size_t i = from; i < to; ++i)
            s += h.steps[i].loss_T + h.steps[i].loss_alpha + h.steps[i].loss_fl;
        return s / Real(to - from);
    };
    const Real first = mean_total(a.history, 0, 4);
    const Real last = mean_total(a.history, 496, 500);
    REQUIRE(last < first);
    REQUIRE(a.model.window.known);

    const TrainResult b = train(t.model, data, run);
    REQUIRE(b.history.to_jsonl() == a.history.to_jsonl());
    REQUIRE(b.model.params == a.model.params);
}
