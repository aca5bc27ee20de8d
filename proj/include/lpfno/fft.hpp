#pragma once

#include <complex>
#include <span>
#include <vector>

#include "lpfno/latent.hpp"

namespace lpfno {

using Complex = std::complex<Real>;

/// Single-channel real 3D transform pair on an nx x ny x nz array (z fastest).
/// Forward is unnormalized; inverse is the unnormalized adjoint-style c2r, so
/// inverse(forward(x)) == N * x. Owns aligned work buffers; not thread-safe,
/// use one instance per thread (see cached()).
class RealFft3 {
public:
    explicit RealFft3(Shape3 shape);
    ~RealFft3();
    RealFft3(const RealFft3&) = delete;
    RealFft3& operator=(const RealFft3&) = delete;

    const Shape3& shape() const { return shape_; }
    std::size_t half_nz() const { return shape_.nz / 2 + 1; }
    std::size_t spectrum_size() const { return shape_.nx * shape_.ny * half_nz(); }
    std::size_t spectrum_index(std::size_t ix, std::size_t iy, std::size_t iz) const {
        return (ix * shape_.ny + iy) * half_nz() + iz;
    }

    std::span<Real> real_buffer() { return {real_, shape_.size()}; }
    std::span<Complex> spectrum_buffer() { return {spec_, spectrum_size()}; }

    /// real_buffer -> spectrum_buffer.
    void forward();
    /// spectrum_buffer -> real_buffer; the spectrum buffer is clobbered.
    void inverse();

    /// Per-thread instance for a shape; plans are built once.
    static RealFft3& cached(const Shape3& shape);

private:
    Shape3 shape_;
    Real* real_ = nullptr;
    Complex* spec_ = nullptr;
    void* forward_plan_ = nullptr;
    void* inverse_plan_ = nullptr;
};

/// Half-spectrum coefficients of every channel: [c][ix][iy][iz < nz/2+1].
struct Spectrum3 {
    Shape3 shape;
    std::size_t channels = 0;
    std::vector<Complex> values;
};

Spectrum3 rfft3(const LatentField& field);
/// Applies the 1/N normalization so irfft3(rfft3(v)) == v.
LatentField irfft3(const Spectrum3& coeffs);

}  // namespace lpfno
