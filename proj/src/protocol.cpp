#include "lowlat/protocol.hpp"

namespace lowlat {

nlohmann::json run_protocol(const ModelInstance& source, const ProtocolOptions& opt)
{
    const auto& spec = source.spec();
    const bool causal = is_causal(spec);
    const ModelInstance inst = causal ? ModelInstance(source) : reconfigure_noncausal(source);
    const int64_t block = opt.block_samples > 0 ? opt.block_samples : inst.compression_ratio();
    const auto analysis = analyze(spec, block);

    LatencyOptions lo;
    lo.trials_per_spec = opt.trials_per_spec;
    lo.master_seed = opt.seed;
    lo.threads = opt.threads;
    const auto latency = to_json(measure_latency(inst, excitation_grid(opt.seed), lo, block));

    RtfOptions ro = opt.rtf;
    ro.seed = opt.seed;
    const auto rtf = to_json(measure_rtf(inst, ro));

    nlohmann::json rtf_row = {{"model", spec.name}};
    for (const auto& e : rtf["entries"])
        rtf_row[std::to_string(e["block"].get<int64_t>())] = {{"mean", e["rtf_mean"]}, {"std", e["rtf_std"]}};

    nlohmann::json bundle = {
        {"schema", "lowlat.report_bundle/1"},
        {"model", spec.name},
        {"seed", opt.seed},
        {"reconfigured", !causal},
        {"stream_delay_samples", inst.stream_delay()},
        {"parameter_count", inst.parameter_count()},
        {"analysis", to_json(analysis)},
        {"latency", latency},
        {"rtf", rtf},
        {"tables",
         {{"architecture",
           nlohmann::json::array({{{"model", spec.name},
                                   {"compression_ratio", analysis.compression_ratio},
                                   {"rf_total_ms", analysis.total_rf_ms},
                                   {"attenuation_db", spec.filterbank.attenuation_db},
                                   {"parameters_millions", inst.parameter_count() / 1e6}}})},
          {"latency",
           nlohmann::json::array({{{"model", spec.name},
                                   {"block_samples", block},
                                   {"best_mean_ms", latency["selected_mean_ms"]},
                                   {"best_jitter_ms", latency["selected_jitter_ms"]},
                                   {"selected_spec", latency["selected_spec"]}}})},
          {"rtf", nlohmann::json::array({rtf_row})}}}};
    return bundle;
}

nlohmann::json strip_timing(const nlohmann::json& bundle)
{
    nlohmann::json b = bundle;
    for (auto& e : b["rtf"]["entries"])
        for (const char* k : {"rtf_mean", "rtf_std", "rtf_min", "rtf_max"})
            e.erase(k);
    b["tables"].erase("rtf");
    return b;
}

} // namespace lowlat
