#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "lowlat/bench.hpp"
#include "lowlat/streamkernel.hpp"

namespace lowlat {

struct ProtocolOptions {
    int trials_per_spec = 500;
    uint64_t seed = 0;
    int threads = 1;
    int64_t block_samples = 0; // 0 selects the compression ratio
    RtfOptions rtf;
};

// analyze + measure-latency + bench-rtf for one model, with the
// architecture, latency and RTF tables. Non-causal models are reconfigured
// with delay lines first.
nlohmann::json run_protocol(const ModelInstance& inst, const ProtocolOptions& opt);

// The bundle with every wall-clock dependent value removed, for rerun
// comparisons.
nlohmann::json strip_timing(const nlohmann::json& bundle);

} // namespace lowlat
