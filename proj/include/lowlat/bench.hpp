#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "lowlat/probes.hpp"
#include "lowlat/streamkernel.hpp"

namespace lowlat {

enum class OnsetDetector { First, AmpGate, Flux };

struct LatencyOptions {
    int trials_per_spec = 500;
    uint64_t master_seed = 0;
    OnsetParams onset;
    OnsetDetector detector = OnsetDetector::First;
    int threads = 1;
    // keep every trial's latency in the report
    bool keep_trials = false;
};

struct LatencyStats {
    ExcitationSpec spec;
    int trials = 0;
    int detect_failures = 0;
    double mean_ms = 0;
    double std_ms = 0;
    double min_ms = 0;
    double max_ms = 0;
    double jitter_ms = 0;
    int64_t min_samples = 0;
    int64_t max_samples = 0;
    std::vector<int64_t> latencies_samples;
};

struct LatencyReport {
    std::string model;
    std::string host;
    double sample_rate = 44100.0;
    int64_t block_samples = 0;
    bool buffering_included = true;
    int trials_per_spec = 0;
    uint64_t master_seed = 0;
    std::string detector;
    OnsetParams onset;
    std::vector<LatencyStats> per_spec;
    int selected = -1;
    double selected_mean_ms = 0;
    double selected_jitter_ms = 0;
};

struct LatencyJob {
    const ModelInstance* instance = nullptr;
    int64_t block_samples = 0; // 0 selects the compression ratio
};

// Every job sees the same trials. Instances are copied per worker; the
// originals are not touched.
std::vector<LatencyReport> measure_latency_batch(const std::vector<LatencyJob>& jobs,
                                                 const std::vector<ExcitationSpec>& grid, const LatencyOptions& opt);
LatencyReport measure_latency(const ModelInstance& inst, const std::vector<ExcitationSpec>& grid,
                              const LatencyOptions& opt, int64_t block_samples = 0);

struct RtfOptions {
    std::vector<int64_t> blocks = {128, 256, 512, 2048};
    int runs = 1100;
    int warmup = 100;
    uint64_t seed = 0;
    bool pin_cpu = true;
};

struct RtfEntry {
    int64_t block = 0;
    bool feasible = true;
    std::string note;
    int runs = 0;
    int warmup = 0;
    int measured = 0;
    double rtf_mean = 0;
    double rtf_std = 0;
    double rtf_min = 0;
    double rtf_max = 0;
};

struct RtfReport {
    std::string model;
    std::string host;
    bool pinned = false;
    std::vector<RtfEntry> entries;
};

// Strictly single threaded, on the calling thread.
RtfReport measure_rtf(const ModelInstance& inst, const RtfOptions& opt);

std::string host_description();

nlohmann::json to_json(const LatencyStats& s);
nlohmann::json to_json(const LatencyReport& r);
nlohmann::json to_json(const RtfEntry& e);
nlohmann::json to_json(const RtfReport& r);

// Deltas (b - a) of every statistic between two latency or two RTF report
// documents. Grids or block sets that differ are a ComparisonError.
nlohmann::json compare_reports(const nlohmann::json& a, const nlohmann::json& b);

// Flat tables built from the report documents, numbers formatted the same
// way the JSON serializer prints them.
std::string latency_csv(const nlohmann::json& report);
std::string rtf_csv(const nlohmann::json& report);

int resolve_threads(int requested);

} // namespace lowlat
