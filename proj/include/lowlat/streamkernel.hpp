#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "lowlat/archgraph.hpp"
#include "lowlat/pqmf.hpp"
#include "lowlat/tensor.hpp"

namespace lowlat {

namespace stage {
class Stage;
}

struct WeightTensor {
    std::string name;
    std::vector<int> shape;
    std::vector<float> values;
};

struct WeightSet {
    std::vector<WeightTensor> tensors;

    const WeightTensor* find(const std::string& name) const;
    const WeightTensor& get(const std::string& name) const;
    int64_t count() const;
};

// Names and shapes the architecture requires, in storage order.
std::vector<WeightTensor> expected_tensors(const ArchitectureSpec& spec);

// Uniform in [-a, a] with a = 1 / sqrt(channels_in * kernel_length).
WeightSet seeded_weights(const ArchitectureSpec& spec, uint64_t seed, bool zero_bias = false);
// Unit-delay tap and zero bias for "delay" fixtures, nothing for "identity".
WeightSet fixture_weights(const ArchitectureSpec& spec);

// Manifest document (name, shape, byte offset) next to a raw little-endian
// float32 blob. Either path may be given to load; the other is derived.
void save_weights(const WeightSet& w, const std::string& path);
WeightSet load_weights(const std::string& path);
void check_weights(const ArchitectureSpec& spec, const WeightSet& w);

struct WeightSource {
    enum class Kind { Seeded, File, Fixture };
    Kind kind = Kind::Seeded;
    uint64_t seed = 0;
    bool zero_bias = false;
    std::string path;

    static WeightSource seeded(uint64_t seed, bool zero_bias = false) { return {Kind::Seeded, seed, zero_bias, {}}; }
    static WeightSource file(std::string path) { return {Kind::File, 0, false, std::move(path)}; }
    static WeightSource fixture() { return {Kind::Fixture, 0, false, {}}; }
};

class ModelInstance {
public:
    ModelInstance(ArchitectureSpec spec, WeightSet weights);
    ModelInstance(const ModelInstance& other);
    ModelInstance& operator=(const ModelInstance& other);
    ModelInstance(ModelInstance&&) noexcept;
    ModelInstance& operator=(ModelInstance&&) noexcept;
    ~ModelInstance();

    // Frames must be a multiple of C_r. Mono in, mono out, same length.
    TensorBlock process_block(const TensorBlock& block);
    std::vector<float> process(const std::vector<float>& block);
    void reset();

    const ArchitectureSpec& spec() const { return spec_; }
    const WeightSet& weights() const { return weights_; }
    std::shared_ptr<const PqmfBank> bank() const { return bank_; }
    int64_t compression_ratio() const { return cr_; }
    int64_t parameter_count() const { return weights_.count(); }

    bool streamable() const { return streamable_; }
    bool reconfigured() const { return reconfigured_; }
    // Samples of delay inserted by reconfiguration (0 when causal).
    int64_t stream_delay() const { return stream_delay_; }
    // Set when reconfiguration was requested on an already causal spec.
    bool noop_warning() const { return noop_warning_; }

private:
    friend ModelInstance reconfigure_noncausal(const ModelInstance& inst);
    void build(bool delay_lines);

    ArchitectureSpec spec_;
    WeightSet weights_;
    std::shared_ptr<const PqmfBank> bank_;
    int64_t cr_ = 1;
    std::vector<std::unique_ptr<stage::Stage>> stages_;
    bool streamable_ = true;
    bool reconfigured_ = false;
    bool noop_warning_ = false;
    int64_t stream_delay_ = 0;
    TensorBlock a_, b_;
};

ModelInstance instantiate(const ArchitectureSpec& spec, const WeightSource& source);
ModelInstance reconfigure_noncausal(const ModelInstance& inst);

// Stateless reference: full-signal convolutions over zero-padded inputs, in
// double precision, with lookahead honoured directly. Every tap is
// multiplied, so a NaN reaches every output it structurally touches.
std::vector<double> process_offline(const ArchitectureSpec& spec, const WeightSet& w, const std::vector<double>& signal);
// audio (length multiple of C_r) -> latent_dim x frames (posterior mean)
Signal offline_encode(const ArchitectureSpec& spec, const WeightSet& w, const std::vector<double>& audio);
std::vector<double> offline_decode(const ArchitectureSpec& spec, const WeightSet& w, const Signal& latents);

struct RfMeasurement {
    int64_t encoder_rf_samples = 0;
    int64_t decoder_rf_latents = 0;
    int64_t total_rf_samples = 0;
    int positions = 0;
    int offline_runs = 0;
};

// Empirical span of the structural dependency of outputs on inputs. Inputs are
// poisoned with NaN on a prefix or suffix and the boundary of the poisoned
// outputs is located by bisection. Every output phase of one period is
// measured (at least 8 positions) and the maximum span is reported.
RfMeasurement measure_receptive_field(const ArchitectureSpec& spec, const WeightSet& w);
RfMeasurement measure_receptive_field(const ModelInstance& inst);

// Same graph with every internal width capped; RF does not depend on widths.
ArchitectureSpec reduce_channels(const ArchitectureSpec& spec, int cap);

nlohmann::json to_json(const RfMeasurement& m);

} // namespace lowlat
