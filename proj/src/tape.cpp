#include "lpfno/tape.hpp"

namespace lpfno {

const ParamSet& GradTape::params() const {
    require(params_ != nullptr, Errc::uninitialized, "tape has no parameter set");
    return *params_;
}

ParamGrads& GradTape::grads() {
    require(grads_ != nullptr, Errc::uninitialized, "tape has no gradient buffer");
    return *grads_;
}

Var GradTape::leaf(LatentField value, bool requires_grad) const {
    auto n = std::make_shared<VarNode>();
    n->value = std::move(value);
    n->requires_grad = requires_grad && recording();
    return n;
}

void GradTape::record(std::string op, std::function<void()> adjoint) {
    if (!recording()) return;
    require(!consumed_, Errc::invalid_argument, "tape already consumed by backward");
    nodes_.push_back(std::move(adjoint));
    names_.push_back(std::move(op));
}

void GradTape::backward(const Var& out, LatentField seed) {
    require(!nodes_.empty() && !consumed_, Errc::not_recorded, "backward without a recorded forward");
    require(out && seed.same_layout(out->value), Errc::shape_mismatch,
            "seed gradient does not match output");
    consumed_ = true;
    accumulate_grad(*out, std::move(seed));
    visits_ = 0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        (*it)();
        ++visits_;
    }
    nodes_.clear();  // releases saved activations
}

void accumulate_grad(VarNode& node, LatentField&& g) {
    if (!node.requires_grad) return;
    if (node.grad.values.empty()) {
        node.grad = std::move(g);
        return;
    }
    require(node.grad.same_layout(g), Errc::shape_mismatch, "gradient layout mismatch");
    for (std::size_t i = 0; i < g.values.size(); ++i) node.grad.values[i] += g.values[i];
}

namespace {

Var make_output(const GradTape& tape, LatentField value) {
    auto n = std::make_shared<VarNode>();
    n->value = std::move(value);
    n->requires_grad = tape.recording();
    return n;
}

}  // namespace

Var affine(GradTape& tape, const Var& x, std::size_t w_block, std::size_t b_block,
           std::size_t out_channels) {
    const ParamSet& p = tape.params();
    Var y = make_output(tape, pointwise_affine(x->value, p.values(w_block), p.values(b_block),
                                               out_channels));
    if (tape.recording()) {
        std::weak_ptr<VarNode> wy = y;
        tape.record("affine", [&tape, x, wy, w_block, b_block] {
            auto y = wy.lock();
            if (!y || y->grad.values.empty()) return;
            const ParamSet& p = tape.params();
            LatentField gx;
            pointwise_affine_backward(x->value, p.values(w_block), y->grad,
                                      x->requires_grad ? &gx : nullptr,
                                      tape.grads().of(p, w_block), tape.grads().of(p, b_block));
            if (x->requires_grad) accumulate_grad(*x, std::move(gx));
        });
    }
    return y;
}

Var weight_norm_affine(GradTape& tape, const Var& x, std::size_t direction_block,
                       std::size_t gain_block, std::size_t b_block, std::size_t out_channels) {
    const ParamSet& p = tape.params();
    const std::size_t in = x->value.channels;
    auto W = std::make_shared<std::vector<Real>>(
        weight_norm_effective(p.values(direction_block), p.values(gain_block), out_channels, in));
    Var y = make_output(tape, pointwise_affine(x->value, *W, p.values(b_block), out_channels));
    if (tape.recording()) {
        std::weak_ptr<VarNode> wy = y;
        tape.record("weight_norm_affine", [&tape, x, wy, W, direction_block, gain_block, b_block,
                                           out_channels, in] {
            auto y = wy.lock();
            if (!y || y->grad.values.empty()) return;
            const ParamSet& p = tape.params();
            std::vector<Real> gW(W->size(), Real{0});
            LatentField gx;
            pointwise_affine_backward(x->value, *W, y->grad, x->requires_grad ? &gx : nullptr, gW,
                                      tape.grads().of(p, b_block));
            weight_norm_backward(p.values(direction_block), p.values(gain_block), gW, out_channels,
                                 in, tape.grads().of(p, direction_block),
                                 tape.grads().of(p, gain_block));
            if (x->requires_grad) accumulate_grad(*x, std::move(gx));
        });
    }
    return y;
}

Var spectral(GradTape& tape, const Var& x, std::size_t r_block,
             std::shared_ptr<const ModeSet> modes, std::size_t out_channels) {
    const ParamSet& p = tape.params();
    auto cache = std::make_shared<SpectralCache>();
    Var y = make_output(tape, spectral_conv(x->value, p.complex_values(r_block), *modes,
                                            out_channels, tape.recording() ? cache.get() : nullptr));
    if (tape.recording()) {
        std::weak_ptr<VarNode> wy = y;
        tape.record("spectral", [&tape, x, wy, r_block, modes, cache] {
            auto y = wy.lock();
            if (!y || y->grad.values.empty()) return;
            const ParamSet& p = tape.params();
            LatentField gx;
            spectral_conv_backward(y->grad, p.complex_values(r_block), *modes, x->value.channels,
                                   *cache, x->requires_grad ? &gx : nullptr,
                                   tape.grads().complex_of(p, r_block));
            if (x->requires_grad) accumulate_grad(*x, std::move(gx));
        });
    }
    return y;
}

Var add(GradTape& tape, const Var& a, const Var& b) {
    require(a->value.same_layout(b->value), Errc::shape_mismatch, "add layout mismatch");
    LatentField s = a->value;
    for (std::size_t i = 0; i < s.values.size(); ++i) s.values[i] += b->value.values[i];
    Var y = make_output(tape, std::move(s));
    if (tape.recording()) {
        std::weak_ptr<VarNode> wy = y;
        tape.record("add", [a, b, wy] {
            auto y = wy.lock();
            if (!y || y->grad.values.empty()) return;
            if (a->requires_grad) accumulate_grad(*a, LatentField(y->grad));
            if (b->requires_grad) accumulate_grad(*b, LatentField(y->grad));
        });
    }
    return y;
}

Var activation(GradTape& tape, Activation act, const Var& x) {
    Var y = make_output(tape, apply_activation(act, x->value));
    if (tape.recording()) {
        std::weak_ptr<VarNode> wy = y;
        tape.record("activation:" + to_string(act), [act, x, wy] {
            auto y = wy.lock();
            if (!y || y->grad.values.empty() || !x->requires_grad) return;
            accumulate_grad(*x, activation_backward(act, x->value, y->grad));
        });
    }
    return y;
}

Var pad(GradTape& tape, const Var& x, std::size_t width) {
    Var y = make_output(tape, pad_zero(x->value, width));
    if (tape.recording()) {
        std::weak_ptr<VarNode> wy = y;
        tape.record("pad", [x, wy, width] {
            auto y = wy.lock();
            if (!y || y->grad.values.empty() || !x->requires_grad) return;
            accumulate_grad(*x, lpfno::crop(y->grad, width));
        });
    }
    return y;
}

Var crop(GradTape& tape, const Var& x, std::size_t width) {
    Var y = make_output(tape, lpfno::crop(x->value, width));
    if (tape.recording()) {
        std::weak_ptr<VarNode> wy = y;
        tape.record("crop", [x, wy, width] {
            auto y = wy.lock();
            if (!y || y->grad.values.empty() || !x->requires_grad) return;
            accumulate_grad(*x, pad_zero(y->grad, width));
        });
    }
    return y;
}

Var fourier_layer(GradTape& tape, const Var& x, const FourierLayerBlocks& blocks,
                  std::shared_ptr<const ModeSet> modes, Activation act) {
    const std::size_t width = tape.params().block(blocks.bias).shape.at(0);
    Var s = spectral(tape, x, blocks.spectral, std::move(modes), width);
    Var l = affine(tape, x, blocks.weight, blocks.bias, width);
    return activation(tape, act, add(tape, s, l));
}

}  // namespace lpfno
