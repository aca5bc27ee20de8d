#include "lpfno/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>

namespace lpfno {

namespace {

// The FFTW planner is not re-entrant.
std::mutex& planner_mutex() {
    static std::mutex mu;
    return mu;
}

}  // namespace

RealFft3::RealFft3(Shape3 shape) : shape_(shape) {
    require(shape.nx >= 1 && shape.ny >= 1 && shape.nz >= 1, Errc::invalid_argument,
            "fft shape must be non-empty");
    real_ = static_cast<Real*>(fftw_malloc(sizeof(Real) * shape.size()));
    spec_ = static_cast<Complex*>(fftw_malloc(sizeof(Complex) * spectrum_size()));
    require(real_ && spec_, Errc::io, "fft buffer allocation failed");
    const int n[3] = {static_cast<int>(shape.nx), static_cast<int>(shape.ny),
                      static_cast<int>(shape.nz)};
    std::lock_guard lock(planner_mutex());
    forward_plan_ = fftw_plan_dft_r2c(3, n, real_, reinterpret_cast<fftw_complex*>(spec_),
                                      FFTW_ESTIMATE);
    inverse_plan_ = fftw_plan_dft_c2r(3, n, reinterpret_cast<fftw_complex*>(spec_), real_,
                                      FFTW_ESTIMATE);
    require(forward_plan_ && inverse_plan_, Errc::io, "fftw planning failed");
}

RealFft3::~RealFft3() {
    {
        std::lock_guard lock(planner_mutex());
        if (forward_plan_) fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
        if (inverse_plan_) fftw_destroy_plan(static_cast<fftw_plan>(inverse_plan_));
    }
    fftw_free(real_);
    fftw_free(spec_);
}

void RealFft3::forward() { fftw_execute(static_cast<fftw_plan>(forward_plan_)); }

void RealFft3::inverse() { fftw_execute(static_cast<fftw_plan>(inverse_plan_)); }

RealFft3& RealFft3::cached(const Shape3& shape) {
    thread_local std::map<std::tuple<std::size_t, std::size_t, std::size_t>,
                          std::unique_ptr<RealFft3>>
        cache;
    auto& slot = cache[{shape.nx, shape.ny, shape.nz}];
    if (!slot) slot = std::make_unique<RealFft3>(shape);
    return *slot;
}

Spectrum3 rfft3(const LatentField& field) {
    RealFft3& fft = RealFft3::cached(field.shape);
    Spectrum3 out{field.shape, field.channels,
                  std::vector<Complex>(fft.spectrum_size() * field.channels)};
    for (std::size_t c = 0; c < field.channels; ++c) {
        auto src = field.channel(c);
        std::copy(src.begin(), src.end(), fft.real_buffer().begin());
        fft.forward();
        auto spec = fft.spectrum_buffer();
        std::copy(spec.begin(), spec.end(),
                  out.values.begin() + static_cast<std::ptrdiff_t>(c * fft.spectrum_size()));
    }
    return out;
}

LatentField irfft3(const Spectrum3& coeffs) {
    RealFft3& fft = RealFft3::cached(coeffs.shape);
    require(coeffs.values.size() == fft.spectrum_size() * coeffs.channels, Errc::shape_mismatch,
            "spectrum length does not match shape");
    LatentField out(coeffs.shape, coeffs.channels);
    const Real inv_n = 1 / static_cast<Real>(coeffs.shape.size());
    for (std::size_t c = 0; c < coeffs.channels; ++c) {
        auto first = coeffs.values.begin() + static_cast<std::ptrdiff_t>(c * fft.spectrum_size());
        std::copy(first, first + static_cast<std::ptrdiff_t>(fft.spectrum_size()),
                  fft.spectrum_buffer().begin());
        fft.inverse();
        auto real = fft.real_buffer();
        auto dst = out.channel(c);
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = real[i] * inv_n;
    }
    return out;
}

}  // namespace lpfno
