#pragma once

#include <span>
#include <string>
#include <vector>

#include "lpfno/grid.hpp"

namespace lpfno {

/// Multi-channel field on a (possibly padded) grid, channel-major:
/// values[c * shape.size() + cell].
struct LatentField {
    Shape3 shape;
    std::size_t channels = 0;
    std::vector<Real> values;

    LatentField() = default;
    LatentField(Shape3 s, std::size_t c) : shape(s), channels(c), values(s.size() * c, Real{0}) {}
    LatentField(Shape3 s, std::size_t c, std::vector<Real> v);

    std::size_t points() const { return shape.size(); }
    std::span<Real> channel(std::size_t c) {
        return std::span<Real>(values).subspan(c * points(), points());
    }
    std::span<const Real> channel(std::size_t c) const {
        return std::span<const Real>(values).subspan(c * points(), points());
    }
    bool same_layout(const LatentField& o) const {
        return shape == o.shape && channels == o.channels;
    }
    friend bool operator==(const LatentField&, const LatentField&) = default;
};

enum class Activation { identity, gelu, silu };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

Real activate(Activation a, Real x);
Real activate_derivative(Activation a, Real x);

/// y = act(x) elementwise.
LatentField apply_activation(Activation a, const LatentField& x);
/// gx = gy * act'(x).
LatentField activation_backward(Activation a, const LatentField& x, const LatentField& gy);

/// y[o, p] = sum_i W[o, i] x[i, p] + b[o]; W row-major (out x in).
LatentField pointwise_affine(const LatentField& x, std::span<const Real> W, std::span<const Real> b,
                             std::size_t out_channels);

/// Accumulates into gx (if non-null), gW and gb.
void pointwise_affine_backward(const LatentField& x, std::span<const Real> W,
                               const LatentField& gy, LatentField* gx, std::span<Real> gW,
                               std::span<Real> gb);

/// W[o, :] = gain[o] * direction[o, :] / |direction[o, :]|.
std::vector<Real> weight_norm_effective(std::span<const Real> direction, std::span<const Real> gain,
                                        std::size_t out, std::size_t in);

/// Maps dL/dW onto the direction and gain parameters (accumulating).
void weight_norm_backward(std::span<const Real> direction, std::span<const Real> gain,
                          std::span<const Real> gW, std::size_t out, std::size_t in,
                          std::span<Real> g_direction, std::span<Real> g_gain);

/// Zeros on all six faces.
LatentField pad_zero(const LatentField& x, std::size_t width);
/// Removes `width` cells from all six faces.
LatentField crop(const LatentField& x, std::size_t width);

}  // namespace lpfno
