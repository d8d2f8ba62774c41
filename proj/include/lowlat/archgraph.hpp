#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace lowlat {

enum class LayerKind { Conv, TransposedConv, ResidualStack, Activation };
enum class ActivationFn { LeakyRelu, Tanh };

constexpr double kLeakySlope = 0.2;

struct LayerSpec {
    LayerKind kind = LayerKind::Conv;
    int kernel = 1;
    int stride = 1;
    // conv: optional single dilation, residual-stack: one entry per sublayer
    std::vector<int> dilations;
    int channels_in = 1;
    int channels_out = 1;
    // conv / transposed-conv: input timesteps. residual-stack: taps, so a
    // sublayer with dilation d looks ahead lookahead * (d + 1) timesteps.
    int lookahead = 0;
    ActivationFn function = ActivationFn::LeakyRelu;

    int dilation() const { return dilations.empty() ? 1 : dilations.front(); }
};

struct FilterbankSpec {
    int bands = 1;
    double attenuation_db = 100.0;
};

struct ArchitectureSpec {
    std::string name;
    double sample_rate = 44100.0;
    FilterbankSpec filterbank;
    std::vector<LayerSpec> encoder;
    int latent_dim = 1;
    std::vector<LayerSpec> decoder;
    // "identity" or "delay" marks a test fixture with fixed weights
    std::string fixture;
};

struct LatencyBudget {
    int64_t block_samples = 0;
    int64_t buffering_samples = 0;
    int64_t representation_samples = 0;
    int64_t cumulative_samples = 0;
    int64_t jitter_bound_samples = 0;
    double block_ms = 0;
    double buffering_ms = 0;
    double representation_ms = 0;
    double cumulative_ms = 0;
    double jitter_bound_ms = 0;
};

struct AnalysisReport {
    std::string name;
    double sample_rate = 44100.0;
    int64_t compression_ratio = 1;
    int64_t encoder_rf_samples = 1;
    int64_t decoder_rf_latents = 1;
    int64_t total_rf_samples = 1;
    double total_rf_ms = 0;
    int64_t min_block_samples = 1;
    int64_t parameter_count = 0;
    bool causal = true;
    LatencyBudget budget;
};

void validate(const ArchitectureSpec& spec);
bool is_causal(const ArchitectureSpec& spec);

int64_t compression_ratio(const ArchitectureSpec& spec);
int64_t encoder_receptive_field(const ArchitectureSpec& spec);
int64_t decoder_receptive_field(const ArchitectureSpec& spec);
int64_t total_receptive_field(int64_t r_fe, int64_t r_fd, int64_t c_r);
int64_t cumulative_delay(const ArchitectureSpec& spec);
int64_t representation_delay(const FilterbankSpec& fb);
double jitter_bound(int64_t c_r, double sample_rate);
LatencyBudget latency_budget(const ArchitectureSpec& spec, int64_t block_samples);
AnalysisReport analyze(const ArchitectureSpec& spec, int64_t block_samples = 0);

double samples_to_ms(int64_t samples, double sample_rate);

// Weights plus biases of every layer, including the unused variance half
// of the encoder head.
int64_t parameter_count(const ArchitectureSpec& spec);

// Channel count leaving the encoder (latent_dim or 2 * latent_dim).
int encoder_output_channels(const ArchitectureSpec& spec);

ArchitectureSpec spec_from_json(const nlohmann::json& j);
nlohmann::json spec_to_json(const ArchitectureSpec& spec);
ArchitectureSpec load_spec(const std::string& path);
ArchitectureSpec parse_spec(const std::string& text, const std::string& origin = "<string>");
void save_spec(const ArchitectureSpec& spec, const std::string& path);

nlohmann::json to_json(const LatencyBudget& b);
nlohmann::json to_json(const AnalysisReport& r);

std::string to_string(LayerKind k);

// Fixture builders used by tests and the CLI.
ArchitectureSpec make_identity_spec();
ArchitectureSpec make_delay_spec(int delay_samples);

} // namespace lowlat
