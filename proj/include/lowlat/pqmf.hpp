#pragma once

#include <functional>
#include <memory>
#include <vector>

#include <json.hpp>

#include "lowlat/archgraph.hpp"
#include "lowlat/tensor.hpp"

namespace lowlat {

namespace stage {
class Conv;
class TransposedConv;
} // namespace stage

struct PqmfBank {
    int bands = 1;
    double attenuation_db = 0;
    double cutoff = 0; // radians, lowpass edge of the prototype
    double beta = 0;   // Kaiser window parameter actually used
    int design_taps = 1;
    // Zero-padded to a power of two plus one; symmetric.
    std::vector<double> prototype;
    // bands x length, row-major
    std::vector<double> analysis;
    std::vector<double> synthesis;
    int group_delay_samples = 0;

    int length() const { return static_cast<int>(prototype.size()); }
    // Leading zeros of the padded prototype. Taps outside
    // [support_offset, support_offset + design_taps) are exactly zero.
    int support_offset() const { return (length() - design_taps) / 2; }
    bool passthrough() const { return bands == 1; }
    double analysis_tap(int band, int n) const { return analysis[static_cast<size_t>(band) * length() + n]; }
    double synthesis_tap(int band, int n) const { return synthesis[static_cast<size_t>(band) * length() + n]; }
};

struct BankReport {
    double stopband_db = 0;
    double roundtrip_snr_db = 0;
    int roundtrip_delay_samples = 0;
    double energy_ratio_db = 0;
};

constexpr double kSnrCapDb = 300.0;

PqmfBank design(const FilterbankSpec& fb);
std::shared_ptr<const PqmfBank> design_shared(const FilterbankSpec& fb);

TensorBlock analyze(const PqmfBank& bank, const std::vector<float>& audio);
std::vector<float> synthesize(const PqmfBank& bank, const TensorBlock& frames);

BankReport measure_bank(const PqmfBank& bank);

// Magnitude of the prototype's response, normalized to DC, sampled on
// [omega_lo, pi] with n points. Returned in dB.
std::vector<double> prototype_response_db(const PqmfBank& bank, double omega_lo, int points);
double stopband_attenuation_db(const std::vector<double>& prototype, int bands, int points = 16384);

nlohmann::json bank_to_json(const PqmfBank& bank);

// Block-wise front and back ends with internal history.
class PqmfAnalyzer {
public:
    explicit PqmfAnalyzer(std::shared_ptr<const PqmfBank> bank);
    ~PqmfAnalyzer();
    PqmfAnalyzer(PqmfAnalyzer&&) noexcept;
    PqmfAnalyzer& operator=(PqmfAnalyzer&&) noexcept;

    // samples must be a multiple of bands
    TensorBlock process(const std::vector<float>& samples);
    void reset();

private:
    std::shared_ptr<const PqmfBank> bank_;
    std::unique_ptr<stage::Conv> conv_;
};

class PqmfSynthesizer {
public:
    explicit PqmfSynthesizer(std::shared_ptr<const PqmfBank> bank);
    ~PqmfSynthesizer();
    PqmfSynthesizer(PqmfSynthesizer&&) noexcept;
    PqmfSynthesizer& operator=(PqmfSynthesizer&&) noexcept;

    std::vector<float> process(const TensorBlock& frames);
    void reset();

private:
    std::shared_ptr<const PqmfBank> bank_;
    std::unique_ptr<stage::TransposedConv> tconv_;
};

namespace pqmf_detail {

double kaiser_beta(double atten_db);
// Odd tap count from the Kaiser estimate; width is normalized to Nyquist.
int kaiser_taps(double atten_db, double width);
std::vector<double> kaiser_window(int n, double beta);
// Windowed-sinc lowpass without gain normalization, cutoff in radians.
std::vector<double> kaiser_lowpass(int n, double cutoff, double beta);
// Largest off-center tap of h * reverse(h) on the 2M grid.
double reconstruction_loss(const std::vector<double>& h, int bands);

struct ScalarMinimum {
    double x = 0;
    double fx = 0;
    int iterations = 0;
    int evaluations = 0;
};

// Downhill simplex in one dimension, same schedule as scipy.optimize.fmin.
ScalarMinimum nelder_mead(const std::function<double(double)>& f, double x0,
                          double xatol = 1e-4, double fatol = 1e-4, int maxiter = 200, int maxfun = 200);

// Streaming stages realizing the bank: analysis is a strided conv from one
// channel to bands channels, synthesis the matching transposed conv.
std::unique_ptr<stage::Conv> analysis_stage(const PqmfBank& bank);
std::unique_ptr<stage::TransposedConv> synthesis_stage(const PqmfBank& bank);

} // namespace pqmf_detail

} // namespace lowlat
