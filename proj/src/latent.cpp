#include "lpfno/latent.hpp"

#include <Eigen/Core>
#include <cmath>
#include <numbers>

namespace lpfno {

namespace {

using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;
using ConstVec = Eigen::Map<const Eigen::VectorX<Real>>;
using MutVec = Eigen::Map<Eigen::VectorX<Real>>;

constexpr Real kInvSqrt2 = 0.70710678118654752440;

}  // namespace

LatentField::LatentField(Shape3 s, std::size_t c, std::vector<Real> v)
    : shape(s), channels(c), values(std::move(v)) {
    require(values.size() == s.size() * c, Errc::length_mismatch,
            "latent field length does not match shape x channels");
}

std::string to_string(Activation a) {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::gelu: return "gelu";
        case Activation::silu: return "silu";
    }
    return "identity";
}

Activation activation_from_string(const std::string& s) {
    if (s == "gelu") return Activation::gelu;
    if (s == "silu") return Activation::silu;
    if (s == "identity") return Activation::identity;
    fail(Errc::invalid_argument, "unknown activation '" + s + "'");
}

Real activate(Activation a, Real x) {
    switch (a) {
        case Activation::gelu: return 0.5 * x * (1 + std::erf(x * kInvSqrt2));
        case Activation::silu: return x / (1 + std::exp(-x));
        case Activation::identity: return x;
    }
    return x;
}

Real activate_derivative(Activation a, Real x) {
    switch (a) {
        case Activation::gelu: {
            const Real cdf = 0.5 * (1 + std::erf(x * kInvSqrt2));
            const Real pdf = std::exp(-0.5 * x * x) * 0.5 * std::numbers::inv_sqrtpi *
                             std::numbers::sqrt2;
            return cdf + x * pdf;
        }
        case Activation::silu: {
            const Real s = 1 / (1 + std::exp(-x));
            return s * (1 + x * (1 - s));
        }
        case Activation::identity: return 1;
    }
    return 1;
}

LatentField apply_activation(Activation a, const LatentField& x) {
    LatentField y = x;
    if (a == Activation::identity) return y;
    for (Real& v : y.values) v = activate(a, v);
    return y;
}

LatentField activation_backward(Activation a, const LatentField& x, const LatentField& gy) {
    require(x.same_layout(gy), Errc::shape_mismatch, "activation gradient layout mismatch");
    LatentField gx = gy;
    if (a == Activation::identity) return gx;
    for (std::size_t i = 0; i < gx.values.size(); ++i)
        gx.values[i] *= activate_derivative(a, x.values[i]);
    return gx;
}

LatentField pointwise_affine(const LatentField& x, std::span<const Real> W, std::span<const Real> b,
                             std::size_t out_channels) {
    const std::size_t in = x.channels;
    require(W.size() == out_channels * in && b.size() == out_channels, Errc::shape_mismatch,
            "pointwise affine weight shape does not match channels");
    LatentField y(x.shape, out_channels);
    const auto P = static_cast<Eigen::Index>(x.points());
    ConstMap X(x.values.data(), static_cast<Eigen::Index>(in), P);
    ConstMap Wm(W.data(), static_cast<Eigen::Index>(out_channels), static_cast<Eigen::Index>(in));
    MutMap Y(y.values.data(), static_cast<Eigen::Index>(out_channels), P);
    Y.noalias() = Wm * X;
    Y.colwise() += ConstVec(b.data(), static_cast<Eigen::Index>(out_channels));
    return y;
}

void pointwise_affine_backward(const LatentField& x, std::span<const Real> W,
                               const LatentField& gy, LatentField* gx, std::span<Real> gW,
                               std::span<Real> gb) {
    const auto in = static_cast<Eigen::Index>(x.channels);
    const auto out = static_cast<Eigen::Index>(gy.channels);
    const auto P = static_cast<Eigen::Index>(x.points());
    require(gy.shape == x.shape && W.size() == static_cast<std::size_t>(in * out),
            Errc::shape_mismatch, "pointwise affine backward shape mismatch");
    ConstMap X(x.values.data(), in, P);
    ConstMap G(gy.values.data(), out, P);
    ConstMap Wm(W.data(), out, in);
    MutMap(gW.data(), out, in).noalias() += G * X.transpose();
    MutVec(gb.data(), out) += G.rowwise().sum();
    if (gx) {
        if (gx->values.empty()) *gx = LatentField(x.shape, x.channels);
        MutMap(gx->values.data(), in, P).noalias() += Wm.transpose() * G;
    }
}

std::vector<Real> weight_norm_effective(std::span<const Real> direction, std::span<const Real> gain,
                                        std::size_t out, std::size_t in) {
    std::vector<Real> W(out * in);
    for (std::size_t o = 0; o < out; ++o) {
        Real norm2 = 0;
        for (std::size_t i = 0; i < in; ++i) norm2 += direction[o * in + i] * direction[o * in + i];
        const Real scale = gain[o] / std::sqrt(norm2);
        for (std::size_t i = 0; i < in; ++i) W[o * in + i] = scale * direction[o * in + i];
    }
    return W;
}

void weight_norm_backward(std::span<const Real> direction, std::span<const Real> gain,
                          std::span<const Real> gW, std::size_t out, std::size_t in,
                          std::span<Real> g_direction, std::span<Real> g_gain) {
    for (std::size_t o = 0; o < out; ++o) {
        Real norm2 = 0, dot = 0;
        for (std::size_t i = 0; i < in; ++i) {
            norm2 += direction[o * in + i] * direction[o * in + i];
            dot += gW[o * in + i] * direction[o * in + i];
        }
        const Real norm = std::sqrt(norm2);
        const Real proj = dot / norm;  // gW . unit direction
        g_gain[o] += proj;
        const Real s = gain[o] / norm;
        for (std::size_t i = 0; i < in; ++i)
            g_direction[o * in + i] += s * (gW[o * in + i] - proj * direction[o * in + i] / norm);
    }
}

LatentField pad_zero(const LatentField& x, std::size_t w) {
    if (w == 0) return x;
    const Shape3 s = x.shape;
    const Shape3 p{s.nx + 2 * w, s.ny + 2 * w, s.nz + 2 * w};
    LatentField y(p, x.channels);
    for (std::size_t c = 0; c < x.channels; ++c) {
        auto src = x.channel(c);
        auto dst = y.channel(c);
        for (std::size_t i = 0; i < s.nx; ++i)
            for (std::size_t j = 0; j < s.ny; ++j)
                std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(s.index(i, j, 0)), s.nz,
                            dst.begin() + static_cast<std::ptrdiff_t>(p.index(i + w, j + w, w)));
    }
    return y;
}

LatentField crop(const LatentField& x, std::size_t w) {
    if (w == 0) return x;
    const Shape3 s = x.shape;
    require(s.nx > 2 * w && s.ny > 2 * w && s.nz > 2 * w, Errc::invalid_argument,
            "crop width exceeds grid");
    const Shape3 c{s.nx - 2 * w, s.ny - 2 * w, s.nz - 2 * w};
    LatentField y(c, x.channels);
    for (std::size_t ch = 0; ch < x.channels; ++ch) {
        auto src = x.channel(ch);
        auto dst = y.channel(ch);
        for (std::size_t i = 0; i < c.nx; ++i)
            for (std::size_t j = 0; j < c.ny; ++j)
                std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(s.index(i + w, j + w, w)),
                            c.nz, dst.begin() + static_cast<std::ptrdiff_t>(c.index(i, j, 0)));
    }
    return y;
}

}  // namespace lpfno
