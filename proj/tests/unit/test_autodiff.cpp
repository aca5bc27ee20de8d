#include <catch_amalgamated.hpp>

#include <complex>
#include <functional>
#include <random>

#include "lpfno/model.hpp"
#include "lpfno/tape.hpp"
#include "oracles.hpp"

using namespace lpfno;
using namespace lpfno::test;

namespace {

Real dot(const std::vector<Real>& a, const std::vector<Real>& b) {
    Real s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Central differences of loss(x) = <c, f(x)> at every coordinate of x.
std::vector<Real> numeric_grad(std::vector<Real> x, const std::vector<Real>& c,
                               const std::function<std::vector<Real>(const std::vector<Real>&)>& f,
                               Real h = 1e-6) {
    std::vector<Real> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const Real x0 = x[i];
        x[i] = x0 + h;
        const Real up = dot(c, f(x));
        x[i] = x0 - h;
        const Real down = dot(c, f(x));
        x[i] = x0;
        g[i] = (up - down) / (2 * h);
    }
    return g;
}

std::vector<Real> random_vec(std::size_t n, std::uint64_t seed, Real lo = -1, Real hi = 1) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<Real> u(lo, hi);
    std::vector<Real> v(n);
    for (Real& x : v) x = u(rng);
    return v;
}

}  // namespace

TEST_CASE("activation gradients match finite differences", "[autodiff]") {
    const Shape3 s{3, 2, 2};
    for (Activation a : {Activation::gelu, Activation::silu, Activation::identity}) {
        const LatentField x = test::random_field(s, 2, 1, -3, 3);
        const auto c = random_vec(x.values.size(), 2);
        auto f = [&](const std::vector<Real>& v) {
            return apply_activation(a, LatentField(s, 2, v)).values;
        };
        const auto num = numeric_grad(x.values, c, f);
        const auto ana = activation_backward(a, x, LatentField(s, 2, c)).values;
        REQUIRE(test::rel_diff(ana, num) < 1e-7);
    }
}

TEST_CASE("affine and weight-norm gradients match finite differences", "[autodiff]") {
    const Shape3 s{2, 3, 2};
    const std::size_t in = 3, out = 4;
    const LatentField x = test::random_field(s, in, 3);
    const auto W = random_vec(out * in, 4);
    const auto b = random_vec(out, 5);
    const auto c = random_vec(s.size() * out, 6);
    std::vector<Real> gW(W.size(), 0), gb(out, 0);
    LatentField gx;
    pointwise_affine_backward(x, W, LatentField(s, out, c), &gx, gW, gb);

    REQUIRE(test::rel_diff(gx.values, numeric_grad(x.values, c, [&](const std::vector<Real>& v) {
                               return pointwise_affine(LatentField(s, in, v), W, b, out).values;
                           })) < 1e-7);
    REQUIRE(test::rel_diff(gW, numeric_grad(W, c, [&](const std::vector<Real>& v) {
                               return pointwise_affine(x, v, b, out).values;
                           })) < 1e-7);
    REQUIRE(test::rel_diff(gb, numeric_grad(b, c, [&](const std::vector<Real>& v) {
                               return pointwise_affine(x, W, v, out).values;
                           })) < 1e-7);

    const auto dir = random_vec(out * in, 7);
    const auto gain = random_vec(out, 8, 0.5, 2);
    std::vector<Real> gd(dir.size(), 0), gg(out, 0);
    weight_norm_backward(dir, gain, gW, out, in, gd, gg);
    auto through_norm = [&](const std::vector<Real>& d, const std::vector<Real>& g) {
        return pointwise_affine(x, weight_norm_effective(d, g, out, in), b, out).values;
    };
    REQUIRE(test::rel_diff(gd, numeric_grad(dir, c, [&](const std::vector<Real>& v) {
                               return through_norm(v, gain);
                           })) < 1e-7);
    REQUIRE(test::rel_diff(gg, numeric_grad(gain, c, [&](const std::vector<Real>& v) {
                               return through_norm(dir, v);
                           })) < 1e-7);
}

TEST_CASE("spectral and padding gradients match finite differences", "[autodiff]") {
    const Shape3 s{6, 5, 4};
    const std::array<int, 3> m{2, 2, 3};
    const ModeSet ms(m, s);
    const std::size_t in = 2, out = 3;
    const LatentField x = test::random_field(s, in, 9);
    const auto Rr = random_vec(2 * ms.size() * in * out, 10);
    auto as_complex = [](const std::vector<Real>& v) {
        return std::span<const Complex>(reinterpret_cast<const Complex*>(v.data()), v.size() / 2);
    };
    const auto c = random_vec(s.size() * out, 11);
    SpectralCache cache;
    spectral_conv(x, as_complex(Rr), ms, out, &cache);
    std::vector<Real> gR(Rr.size(), 0);
    LatentField gx;
    spectral_conv_backward(LatentField(s, out, c), as_complex(Rr), ms, in, cache, &gx,
                           {reinterpret_cast<Complex*>(gR.data()), gR.size() / 2});
    REQUIRE(test::rel_diff(gx.values, numeric_grad(x.values, c, [&](const std::vector<Real>& v) {
                               return spectral_conv(LatentField(s, in, v), as_complex(Rr), ms, out)
                                   .values;
                           })) < 1e-7);
    REQUIRE(test::rel_diff(gR, numeric_grad(Rr, c, [&](const std::vector<Real>& v) {
                               return spectral_conv(x, as_complex(v), ms, out).values;
                           })) < 1e-7);

    const Shape3 p{s.nx + 4, s.ny + 4, s.nz + 4};
    const auto cp = random_vec(p.size() * in, 12);
    REQUIRE(test::rel_diff(crop(LatentField(p, in, cp), 2).values,
                           numeric_grad(x.values, cp, [&](const std::vector<Real>& v) {
                               return pad_zero(LatentField(s, in, v), 2).values;
                           })) < 1e-7);
}

TEST_CASE("pad then crop is the identity", "[autodiff]") {
    const LatentField x = test::random_field({4, 3, 5}, 2, 13);
    REQUIRE(crop(pad_zero(x, 3), 3) == x);
    REQUIRE(pad_zero(x, 0) == x);
    REQUIRE(pad_zero(x, 9).shape == Shape3{22, 21, 23});
    REQUIRE(pad_zero(LatentField({90, 40, 30}, 1), 9).shape == Shape3{108, 58, 48});
    REQUIRE_THROWS_AS(crop(x, 2), Error);
}

TEST_CASE("half squared norm through an identity graph has gradient v", "[autodiff]") {
    GradTape tape = GradTape::parameter_free();
    const LatentField v = test::random_field({3, 3, 3}, 2, 14);
    Var x = tape.leaf(v, true);
    Var y = activation(tape, Activation::identity, x);
    tape.backward(y, v);  // d(0.5 |y|^2)/dy = y = v
    REQUIRE(x->grad == v);
    REQUIRE(tape.visits() == tape.size());
}

TEST_CASE("backward without a recorded forward fails", "[autodiff]") {
    GradTape tape = GradTape::parameter_free();
    Var x = tape.leaf(LatentField({2, 2, 2}, 1), true);
    try {
        tape.backward(x, LatentField({2, 2, 2}, 1));
        FAIL("expected not_recorded");
    } catch (const Error& e) {
        REQUIRE(e.code() == Errc::not_recorded);
    }
}

namespace {

ModelConfig tiny_config() { return tiny_gradient_config(); }

}  // namespace

TEST_CASE("tiny model: wide reference forward agrees with the tape", "[autodiff]") {
    const FnoModel m = build_model(tiny_config(), 21);
    const LatentField inputs =
        assemble_inputs(m.config, make_process_params(150, 0.542), m.config.train_grid);
    GradTape tape = GradTape::inference(m.params);
    const Var out = forward(tape, m, inputs, m.config.padding);
    const std::vector<Wide> theta(m.params.flat().begin(), m.params.flat().end());
    const auto ref = wide_forward(m, theta, inputs);
    REQUIRE(ref.size() == out->value.values.size());
    Real num = 0, den = 0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        num += static_cast<Real>((out->value.values[i] - ref[i]) * (out->value.values[i] - ref[i]));
        den += static_cast<Real>(ref[i] * ref[i]);
    }
    REQUIRE(std::sqrt(num / den) < 1e-13);
}

TEST_CASE("tiny model: every parameter gradient matches central differences", "[autodiff]") {
    const FnoModel m = build_model(tiny_config(), 21);
    const LatentField inputs =
        assemble_inputs(m.config, make_process_params(150, 0.542), m.config.train_grid);
    const GradientCheck r = gradient_check(m, inputs, random_vec(m.config.train_grid.size() * 2, 22));
    REQUIRE(r.checked == m.params.size());
    INFO("worst entry " << r.entry);
    REQUIRE(r.worst < 1e-5);
}

TEST_CASE("backward visits every recorded node once", "[autodiff]") {
    const FnoModel m = build_model(tiny_config(), 2);
    const LatentField inputs =
        assemble_inputs(m.config, make_process_params(100, 0.5), m.config.train_grid);
    ParamGrads grads(m.params);
    GradTape tape(m.params, &grads);
    Var out = forward(tape, m, inputs, m.config.padding);
    const std::size_t recorded = tape.size();
    REQUIRE(recorded > 0);
    tape.backward(out, LatentField(out->value.shape, 2, std::vector<Real>(out->value.values.size(), 1)));
    REQUIRE(tape.visits() == recorded);
    REQUIRE_THROWS_AS(tape.backward(out, LatentField(out->value.shape, 2)), Error);
}

TEST_CASE("zero upstream gradient gives zero parameter gradients", "[autodiff]") {
    FnoModel m = build_model(tiny_config(), 3);
    const LatentField inputs =
        assemble_inputs(m.config, make_process_params(100, 0.5), m.config.train_grid);
    ParamGrads grads(m.params);
    GradTape tape(m.params, &grads);
    Var out = forward(tape, m, inputs, m.config.padding);
    tape.backward(out, LatentField(out->value.shape, 2));
    REQUIRE(test::max_abs(grads.flat) == 0);
}
