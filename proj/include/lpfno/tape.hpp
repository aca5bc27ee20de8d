#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "lpfno/latent.hpp"
#include "lpfno/params.hpp"
#include "lpfno/spectral.hpp"

namespace lpfno {

struct VarNode {
    LatentField value;
    LatentField grad;  // empty until something flows back
    bool requires_grad = false;
};

using Var = std::shared_ptr<VarNode>;

/// Records the reverse-mode adjoint of every operation executed through it.
/// A tape built with recording disabled evaluates the same graph without
/// keeping intermediate values or closures (inference).
class GradTape {
public:
    GradTape() = default;
    GradTape(const ParamSet& params, ParamGrads* grads) : params_(&params), grads_(grads) {}
    static GradTape inference(const ParamSet& params) { return GradTape(params, nullptr); }

    bool recording() const { return grads_ != nullptr || record_without_params_; }
    const ParamSet& params() const;
    ParamGrads& grads();

    /// Tape over parameter-free operations only.
    static GradTape parameter_free() {
        GradTape t;
        t.record_without_params_ = true;
        return t;
    }

    Var leaf(LatentField value, bool requires_grad = false) const;
    void record(std::string op, std::function<void()> adjoint);

    /// Seeds d(loss)/d(out) and runs every recorded adjoint once, newest first.
    /// The tape is consumed.
    void backward(const Var& out, LatentField seed);

    std::size_t size() const { return names_.size(); }
    std::size_t visits() const { return visits_; }
    const std::vector<std::string>& ops() const { return names_; }

private:
    const ParamSet* params_ = nullptr;
    ParamGrads* grads_ = nullptr;
    bool record_without_params_ = false;
    std::vector<std::function<void()>> nodes_;
    std::vector<std::string> names_;
    std::size_t visits_ = 0;
    bool consumed_ = false;
};

void accumulate_grad(VarNode& node, LatentField&& g);

Var affine(GradTape& tape, const Var& x, std::size_t w_block, std::size_t b_block,
           std::size_t out_channels);
/// Affine map whose weight rows are gain * direction / |direction|.
Var weight_norm_affine(GradTape& tape, const Var& x, std::size_t direction_block,
                       std::size_t gain_block, std::size_t b_block, std::size_t out_channels);
Var spectral(GradTape& tape, const Var& x, std::size_t r_block,
             std::shared_ptr<const ModeSet> modes, std::size_t out_channels);
Var add(GradTape& tape, const Var& a, const Var& b);
Var activation(GradTape& tape, Activation act, const Var& x);
Var pad(GradTape& tape, const Var& x, std::size_t width);
Var crop(GradTape& tape, const Var& x, std::size_t width);

struct FourierLayerBlocks {
    std::size_t spectral = 0;
    std::size_t weight = 0;
    std::size_t bias = 0;
};

/// act(W v + spectral_conv(v) + b).
Var fourier_layer(GradTape& tape, const Var& x, const FourierLayerBlocks& blocks,
                  std::shared_ptr<const ModeSet> modes, Activation act);

}  // namespace lpfno
