#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lowlat/rng.hpp"

namespace lowlat {

enum class ExcitationKind { WhiteNoise, DenseSinusoid, Harmonic };

struct ExcitationSpec {
    ExcitationKind kind = ExcitationKind::WhiteNoise;
    int length_samples = 44100;
    double amplitude_db = 0.0;
    double sample_rate = 44100.0;
    uint64_t seed = 0;
};

// Core excitation before padding, plus the drawn parameters.
struct CoreSignal {
    ExcitationSpec spec;
    std::vector<float> samples;
    std::vector<double> frequencies; // sinusoid components, empty for noise
};

struct TrialSignal {
    ExcitationSpec spec;
    std::vector<float> samples;
    int64_t onset_index = 0;
    int64_t front_pad = 0;
    int64_t back_pad = 0;
};

struct AmpGateParams {
    double on_threshold_db = -40.0;
    double off_threshold_db = -45.0;
    int ramp_samples = 64;
};

struct FluxParams {
    int fft_size = 1024;
    int hop = 128;
    int mel_bands = 64;
    int max_filter_width = 3;
    double peak_threshold = 1.5;
    double sample_rate = 44100.0;
};

struct OnsetParams {
    AmpGateParams ampgate;
    FluxParams flux;
};

constexpr int kMinFrontPad = 2048;
constexpr int kMaxFrontPad = 44100;
constexpr int kBackPad = 44100;

void validate(const ExcitationSpec& spec);
void validate(const OnsetParams& params);

// 10^(-3 n / (n_total - 1)): exactly 60 dB from first to last sample.
std::vector<double> decay_envelope(int n);
// Envelope applied first, then peak-normalized to amplitude_db.
CoreSignal generate(const ExcitationSpec& spec);
TrialSignal assemble_trial(const CoreSignal& core, Rng& rng);

// 3 kinds x {4096, 44100} samples x {0, -6} dB, seeds derived from master.
std::vector<ExcitationSpec> excitation_grid(uint64_t master_seed);

// Detectors ignore onsets before `from`; the gate and spectral history still
// run over the preceding samples.
std::optional<int64_t> ampgate_onset(const std::vector<float>& x, const AmpGateParams& p, int64_t from = 0);
std::optional<int64_t> flux_onset(const std::vector<float>& x, const FluxParams& p, int64_t from = 0);
std::optional<int64_t> first_onset(const std::vector<float>& x, const OnsetParams& p, int64_t from = 0);

std::string to_string(ExcitationKind k);
ExcitationKind excitation_kind_from(const std::string& s);
nlohmann::json to_json(const ExcitationSpec& s);
nlohmann::json to_json(const OnsetParams& p);

} // namespace lowlat
