#pragma once

#include <complex>
#include <vector>

namespace lowlat {

// Real-input FFT of a fixed size. Planning is serialized internally; an
// instance itself is not shareable between threads.
class RealFft {
public:
    explicit RealFft(int n);
    ~RealFft();
    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;

    int size() const { return n_; }
    int bins() const { return n_ / 2 + 1; }

    // in: n samples, out: n/2 + 1 bins
    void forward(const double* in, std::complex<double>* out);
    // in: n/2 + 1 bins, out: n samples, unnormalized (scaled by n)
    void inverse(const std::complex<double>* in, double* out);

private:
    int n_;
    double* real_;
    void* cplx_;
    void* fwd_;
    void* inv_;
};

// Periodic Hann window.
std::vector<double> hann_window(int n);

double hz_to_mel(double hz); // HTK
double mel_to_hz(double mel);
// Triangular HTK mel filters over the bins of an rfft of size n, row-major
// mel_bands x (n/2 + 1), unit peak.
std::vector<double> mel_filterbank(int mel_bands, int n, double sample_rate, double fmin, double fmax);

} // namespace lowlat
