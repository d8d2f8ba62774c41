#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace lowlat {

struct TextureParams {
    int fft_size = 2048;
    int hop = 512;
    int mel_bands = 128;
    int first_coefficient = 1; // zero-based: 1..12 are MFCCs 2-13
    int coefficients = 12;
    int pool_frames = 40;
    int pool_hop = 20;
    double sample_rate = 44100.0;
};

using FeatureRows = std::vector<std::vector<double>>;

struct TextureWindowSet {
    std::string source_id;
    FeatureRows windows;
    TextureParams params;
};

struct MmdResult {
    double mmd2 = 0;
    double sigma = 0;
    int n = 0;
    int m = 0;
};

struct SimilarityResult {
    double to_input = 0;
    double to_target = 0;
    double cross = 0;
    double self_test = 0;
    double self_ref = 0;
    int splits = 0;
};

struct LoudnessCurve {
    std::vector<double> db;
    int fft_size = 2048;
    int hop = 256;
};

struct PitchFrame {
    double t = 0;
    double f0 = 0;
    double conf = 0;
};
using PitchTrack = std::vector<PitchFrame>;

struct YinParams {
    double frame_rate = 200.0;
    int window = 1024;
    int max_lag = 1024;
    double threshold = 0.1;
    double sample_rate = 44100.0;
};

// frames x coefficients
FeatureRows mfcc_frames(const std::vector<float>& audio, const TextureParams& p = {});
TextureWindowSet mfcc_textures(const std::vector<float>& audio, const std::string& source_id = "",
                               const TextureParams& p = {});
TextureWindowSet merge(const std::vector<TextureWindowSet>& sets, const std::string& source_id);

double median_pairwise_distance(const FeatureRows& pooled);
MmdResult mmd_squared(const FeatureRows& x, const FeatureRows& y, std::optional<double> sigma = std::nullopt);
inline MmdResult mmd_squared(const TextureWindowSet& x, const TextureWindowSet& y,
                             std::optional<double> sigma = std::nullopt)
{
    return mmd_squared(x.windows, y.windows, sigma);
}

SimilarityResult similarity_protocol(const FeatureRows& test, const FeatureRows& reference,
                                     const FeatureRows& transferred, uint64_t seed = 0, int splits = 10);

double a_weighting_db(double hz);
LoudnessCurve loudness_curve(const std::vector<float>& audio, double sample_rate = 44100.0);
// Mean absolute frame difference; unequal lengths are truncated and flagged.
double loudness_l1(const LoudnessCurve& a, const LoudnessCurve& b, bool* truncated = nullptr);

double pitch_accuracy(const PitchTrack& input, const PitchTrack& output, double conf_threshold = 0.85,
                      double tol_semitones = 0.5);
PitchTrack yin_f0(const std::vector<float>& audio, const YinParams& p = {});

double integrated_lufs(const std::vector<float>& audio, double sample_rate = 44100.0);
std::vector<float> normalize_to_lufs(const std::vector<float>& audio, double target_lufs,
                                     double sample_rate = 44100.0);

// Report documents emitted by the eval subcommands.
nlohmann::json similarity_report(const TextureWindowSet& test, const TextureWindowSet& reference,
                                 const TextureWindowSet& transferred, uint64_t seed = 0);
nlohmann::json loudness_report(const std::vector<float>& a, const std::vector<float>& b,
                               double sample_rate = 44100.0);
nlohmann::json pitch_report(const PitchTrack& a, const PitchTrack& b, double conf_threshold = 0.85,
                            double tol_semitones = 0.5);

nlohmann::json to_json(const MmdResult& r);
nlohmann::json to_json(const SimilarityResult& r);
nlohmann::json to_json(const PitchTrack& t);
PitchTrack pitch_track_from_json(const nlohmann::json& j);

} // namespace lowlat
