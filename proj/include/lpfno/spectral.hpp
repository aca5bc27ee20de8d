#pragma once

#include <array>
#include <span>
#include <vector>

#include "lpfno/fft.hpp"
#include "lpfno/latent.hpp"

namespace lpfno {

/// Retained low-frequency modes: signed wavenumbers |kx| < m1, |ky| < m2 on the
/// full axes and 0 <= kz < m3 on the real (half-spectrum) axis. The canonical
/// mode order depends only on (m1, m2, m3), so spectral weights are portable
/// between grids.
class ModeSet {
public:
    struct Mode {
        int kx = 0, ky = 0, kz = 0;
        std::size_t spectrum_index = 0;
        std::size_t mirror = 0;          // canonical index of (-kx, -ky, kz)
        bool self_conjugate = false;     // kz plane stored once by the real transform
    };

    ModeSet(std::array<int, 3> modes, Shape3 shape);

    static std::size_t count_for(std::array<int, 3> modes);
    /// Full axes need 2 m <= n; the real axis needs m <= n/2 + 1.
    static bool representable(std::array<int, 3> modes, Shape3 shape);
    static void check(std::array<int, 3> modes, Shape3 shape);

    std::size_t size() const { return modes_.size(); }
    const Mode& operator[](std::size_t q) const { return modes_[q]; }
    const std::array<int, 3>& counts() const { return counts_; }
    const Shape3& shape() const { return shape_; }

private:
    std::array<int, 3> counts_;
    Shape3 shape_;
    std::vector<Mode> modes_;
};

/// Weights R[q][out][in] for one layer, q in canonical mode order.
using SpectralWeightsView = std::span<const Complex>;

/// Gathered retained coefficients [q][channel] of the layer input, kept for
/// the weight gradient.
struct SpectralCache {
    std::vector<Complex> x_hat;
};

/// irfft(R(k) rfft(x)(k) on retained k, zero elsewhere).
LatentField spectral_conv(const LatentField& x, SpectralWeightsView R, const ModeSet& modes,
                          std::size_t out_channels, SpectralCache* cache = nullptr);

/// Accumulates dL/dx into gx (if non-null) and dL/dR (real-differential
/// convention, d/dRe + i d/dIm) into gR.
void spectral_conv_backward(const LatentField& gy, SpectralWeightsView R, const ModeSet& modes,
                            std::size_t in_channels, const SpectralCache& cache, LatentField* gx,
                            std::span<Complex> gR);

}  // namespace lpfno
