#include "lpfno/spectral.hpp"

#include <algorithm>
#include <string>

namespace lpfno {

namespace {

std::size_t wrap(int k, std::size_t n) {
    return k >= 0 ? static_cast<std::size_t>(k) : n - static_cast<std::size_t>(-k);
}

// Position of a signed wavenumber in the canonical order 0..m-1, -(m-1)..-1.
std::size_t slot(int k, int m) {
    return static_cast<std::size_t>(k >= 0 ? k : k + 2 * m - 1);
}

int signed_k(std::size_t slot, int m) {
    const int s = static_cast<int>(slot);
    return s < m ? s : s - (2 * m - 1);
}

}  // namespace

std::size_t ModeSet::count_for(std::array<int, 3> m) {
    return static_cast<std::size_t>(2 * m[0] - 1) * static_cast<std::size_t>(2 * m[1] - 1) *
           static_cast<std::size_t>(m[2]);
}

bool ModeSet::representable(std::array<int, 3> m, Shape3 s) {
    if (m[0] < 1 || m[1] < 1 || m[2] < 1) return false;
    return 2 * static_cast<std::size_t>(m[0]) <= s.nx &&
           2 * static_cast<std::size_t>(m[1]) <= s.ny &&
           static_cast<std::size_t>(m[2]) <= s.nz / 2 + 1;
}

void ModeSet::check(std::array<int, 3> m, Shape3 s) {
    if (!representable(m, s))
        fail(Errc::mode_capacity,
             "modes [" + std::to_string(m[0]) + "," + std::to_string(m[1]) + "," +
                 std::to_string(m[2]) + "] not representable on " + std::to_string(s.nx) + "x" +
                 std::to_string(s.ny) + "x" + std::to_string(s.nz));
}

ModeSet::ModeSet(std::array<int, 3> m, Shape3 s) : counts_(m), shape_(s) {
    check(m, s);
    const std::size_t a_n = 2 * static_cast<std::size_t>(m[0]) - 1;
    const std::size_t b_n = 2 * static_cast<std::size_t>(m[1]) - 1;
    const auto c_n = static_cast<std::size_t>(m[2]);
    const std::size_t hz = s.nz / 2 + 1;
    modes_.reserve(a_n * b_n * c_n);
    for (std::size_t a = 0; a < a_n; ++a)
        for (std::size_t b = 0; b < b_n; ++b)
            for (std::size_t c = 0; c < c_n; ++c) {
                Mode md;
                md.kx = signed_k(a, m[0]);
                md.ky = signed_k(b, m[1]);
                md.kz = static_cast<int>(c);
                md.spectrum_index = (wrap(md.kx, s.nx) * s.ny + wrap(md.ky, s.ny)) * hz + c;
                md.self_conjugate = c == 0 || (s.nz % 2 == 0 && c == s.nz / 2);
                md.mirror = (slot(-md.kx, m[0]) * b_n + slot(-md.ky, m[1])) * c_n + c;
                modes_.push_back(md);
            }
}

namespace {

// Plain products; std::complex operator* carries NaN recovery that dominates
// the mixing loops.
inline Complex mul(Complex a, Complex b) {
    return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}
inline Complex mul_conj(Complex a, Complex b) {  // conj(a) * b
    return {a.real() * b.real() + a.imag() * b.imag(), a.real() * b.imag() - a.imag() * b.real()};
}

// Scatters compact coefficients into the half spectrum. On self-conjugate kz
// planes the pair (k, -k) is replaced by its Hermitian part so the c2r input
// is well defined; the real output is unchanged by this projection.
void scatter(const ModeSet& modes, std::span<const Complex> compact, std::size_t stride,
             std::size_t channel, std::span<Complex> spectrum) {
    std::fill(spectrum.begin(), spectrum.end(), Complex{0, 0});
    for (std::size_t q = 0; q < modes.size(); ++q) {
        const auto& md = modes[q];
        Complex v = compact[q * stride + channel];
        if (md.self_conjugate) v = 0.5 * (v + std::conj(compact[md.mirror * stride + channel]));
        spectrum[md.spectrum_index] = v;
    }
}

}  // namespace

LatentField spectral_conv(const LatentField& x, SpectralWeightsView R, const ModeSet& modes,
                          std::size_t out_channels, SpectralCache* cache) {
    require(x.shape == modes.shape(), Errc::shape_mismatch, "spectral_conv grid mismatch");
    const std::size_t in = x.channels;
    const std::size_t Q = modes.size();
    require(R.size() == Q * out_channels * in, Errc::shape_mismatch,
            "spectral weights do not match mode count and channels");
    RealFft3& fft = RealFft3::cached(x.shape);

    std::vector<Complex> x_hat(Q * in);
    for (std::size_t i = 0; i < in; ++i) {
        auto src = x.channel(i);
        std::copy(src.begin(), src.end(), fft.real_buffer().begin());
        fft.forward();
        auto spec = fft.spectrum_buffer();
        for (std::size_t q = 0; q < Q; ++q) x_hat[q * in + i] = spec[modes[q].spectrum_index];
    }

    std::vector<Complex> y_hat(Q * out_channels);
    for (std::size_t q = 0; q < Q; ++q) {
        const Complex* Rq = R.data() + q * out_channels * in;
        const Complex* xq = x_hat.data() + q * in;
        for (std::size_t o = 0; o < out_channels; ++o) {
            Complex acc{0, 0};
            for (std::size_t i = 0; i < in; ++i) acc += mul(Rq[o * in + i], xq[i]);
            y_hat[q * out_channels + o] = acc;
        }
    }

    LatentField y(x.shape, out_channels);
    const Real inv_n = 1 / static_cast<Real>(x.points());
    for (std::size_t o = 0; o < out_channels; ++o) {
        scatter(modes, y_hat, out_channels, o, fft.spectrum_buffer());
        fft.inverse();
        auto real = fft.real_buffer();
        auto dst = y.channel(o);
        for (std::size_t p = 0; p < dst.size(); ++p) dst[p] = real[p] * inv_n;
    }
    if (cache) cache->x_hat = std::move(x_hat);
    return y;
}

void spectral_conv_backward(const LatentField& gy, SpectralWeightsView R, const ModeSet& modes,
                            std::size_t in, const SpectralCache& cache, LatentField* gx,
                            std::span<Complex> gR) {
    const std::size_t out = gy.channels;
    const std::size_t Q = modes.size();
    require(gy.shape == modes.shape() && R.size() == Q * out * in && gR.size() == R.size() &&
                cache.x_hat.size() == Q * in,
            Errc::shape_mismatch, "spectral_conv backward shape mismatch");
    RealFft3& fft = RealFft3::cached(gy.shape);
    const Real inv_n = 1 / static_cast<Real>(gy.points());

    std::vector<Complex> g_hat(Q * out);
    for (std::size_t o = 0; o < out; ++o) {
        auto src = gy.channel(o);
        std::copy(src.begin(), src.end(), fft.real_buffer().begin());
        fft.forward();
        auto spec = fft.spectrum_buffer();
        for (std::size_t q = 0; q < Q; ++q) g_hat[q * out + o] = spec[modes[q].spectrum_index];
    }

    // The c2r output counts interior kz modes twice (k and its implied
    // conjugate), self-conjugate planes once.
    for (std::size_t q = 0; q < Q; ++q) {
        const Real w = (modes[q].self_conjugate ? 1 : 2) * inv_n;
        const Complex* xq = cache.x_hat.data() + q * in;
        Complex* gRq = gR.data() + q * out * in;
        for (std::size_t o = 0; o < out; ++o) {
            const Complex g = w * g_hat[q * out + o];
            for (std::size_t i = 0; i < in; ++i) gRq[o * in + i] += mul_conj(xq[i], g);
        }
    }
    if (!gx) return;

    std::vector<Complex> gx_hat(Q * in, Complex{0, 0});
    for (std::size_t q = 0; q < Q; ++q) {
        const Complex* Rq = R.data() + q * out * in;
        for (std::size_t o = 0; o < out; ++o) {
            const Complex g = inv_n * g_hat[q * out + o];
            for (std::size_t i = 0; i < in; ++i) gx_hat[q * in + i] += mul_conj(Rq[o * in + i], g);
        }
    }
    if (gx->values.empty()) *gx = LatentField(gy.shape, in);
    for (std::size_t i = 0; i < in; ++i) {
        scatter(modes, gx_hat, in, i, fft.spectrum_buffer());
        fft.inverse();
        auto real = fft.real_buffer();
        auto dst = gx->channel(i);
        for (std::size_t p = 0; p < dst.size(); ++p) dst[p] += real[p];
    }
}

}  // namespace lpfno
