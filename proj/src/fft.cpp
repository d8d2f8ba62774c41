#include "lowlat/fft.hpp"

#include <cmath>
#include <cstring>
#include <mutex>
#include <numbers>

#include <fftw3.h>

namespace lowlat {

namespace {
std::mutex& planner_mutex()
{
    static std::mutex m;
    return m;
}
} // namespace

RealFft::RealFft(int n) : n_(n)
{
    std::lock_guard<std::mutex> lock(planner_mutex());
    real_ = fftw_alloc_real(n);
    auto* c = fftw_alloc_complex(n / 2 + 1);
    cplx_ = c;
    fwd_ = fftw_plan_dft_r2c_1d(n, real_, c, FFTW_ESTIMATE);
    inv_ = fftw_plan_dft_c2r_1d(n, c, real_, FFTW_ESTIMATE);
}

RealFft::~RealFft()
{
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(static_cast<fftw_plan>(fwd_));
    fftw_destroy_plan(static_cast<fftw_plan>(inv_));
    fftw_free(real_);
    fftw_free(cplx_);
}

void RealFft::forward(const double* in, std::complex<double>* out)
{
    std::memcpy(real_, in, sizeof(double) * n_);
    fftw_execute(static_cast<fftw_plan>(fwd_));
    std::memcpy(static_cast<void*>(out), cplx_, sizeof(fftw_complex) * bins());
}

void RealFft::inverse(const std::complex<double>* in, double* out)
{
    // c2r destroys its input, so work on the internal copy
    std::memcpy(cplx_, static_cast<const void*>(in), sizeof(fftw_complex) * bins());
    fftw_execute(static_cast<fftw_plan>(inv_));
    std::memcpy(out, real_, sizeof(double) * n_);
}

std::vector<double> hann_window(int n)
{
    std::vector<double> w(n);
    for (int i = 0; i < n; ++i)
        w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
    return w;
}

} // namespace lowlat

namespace lowlat {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> mel_filterbank(int mel_bands, int n, double sample_rate, double fmin, double fmax)
{
    const int bins = n / 2 + 1;
    std::vector<double> edges(mel_bands + 2);
    const double m0 = hz_to_mel(fmin), m1 = hz_to_mel(fmax);
    for (int i = 0; i < mel_bands + 2; ++i)
        edges[i] = mel_to_hz(m0 + (m1 - m0) * i / (mel_bands + 1));
    std::vector<double> fb(static_cast<size_t>(mel_bands) * bins, 0.0);
    for (int m = 0; m < mel_bands; ++m) {
        const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
        for (int k = 0; k < bins; ++k) {
            const double f = k * sample_rate / n;
            double w = 0;
            if (f > lo && f <= mid)
                w = (f - lo) / (mid - lo);
            else if (f > mid && f < hi)
                w = (hi - f) / (hi - mid);
            fb[static_cast<size_t>(m) * bins + k] = w;
        }
    }
    return fb;
}

} // namespace lowlat
