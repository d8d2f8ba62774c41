#include "lowlat/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <sched.h>
#include <sys/utsname.h>

#include "lowlat/error.hpp"
#include "lowlat/rng.hpp"

namespace lowlat {

namespace {

std::string detector_name(OnsetDetector d)
{
    switch (d) {
    case OnsetDetector::First:
        return "first_onset";
    case OnsetDetector::AmpGate:
        return "ampgate";
    case OnsetDetector::Flux:
        return "flux";
    }
    return "?";
}

std::optional<int64_t> detect(const std::vector<float>& y, const LatencyOptions& opt, int64_t from)
{
    switch (opt.detector) {
    case OnsetDetector::AmpGate:
        return ampgate_onset(y, opt.onset.ampgate, from);
    case OnsetDetector::Flux:
        return flux_onset(y, opt.onset.flux, from);
    default:
        return first_onset(y, opt.onset, from);
    }
}

std::vector<float> stream(ModelInstance& inst, const std::vector<float>& x, int64_t block)
{
    inst.reset();
    const size_t n = (x.size() + block - 1) / block * block;
    std::vector<float> y;
    y.reserve(n);
    TensorBlock in(1, static_cast<int>(block));
    for (size_t pos = 0; pos < n; pos += block) {
        for (int64_t i = 0; i < block; ++i)
            in.data[i] = pos + i < x.size() ? x[pos + i] : 0.0f;
        const auto out = inst.process_block(in);
        y.insert(y.end(), out.data.begin(), out.data.end());
    }
    return y;
}

LatencyStats summarize(const ExcitationSpec& spec, const std::vector<std::optional<int64_t>>& lat, double sr,
                       bool keep)
{
    LatencyStats s;
    s.spec = spec;
    s.trials = static_cast<int>(lat.size());
    std::vector<int64_t> ok;
    for (const auto& v : lat) {
        if (v)
            ok.push_back(*v);
        else
            ++s.detect_failures;
    }
    if (keep)
        s.latencies_samples = ok;
    if (ok.empty()) {
        s.mean_ms = s.std_ms = s.min_ms = s.max_ms = s.jitter_ms = std::numeric_limits<double>::quiet_NaN();
        return s;
    }
    double sum = 0;
    for (auto v : ok)
        sum += static_cast<double>(v);
    const double mean = sum / ok.size();
    double ss = 0;
    for (auto v : ok)
        ss += (v - mean) * (v - mean);
    const double sd = ok.size() > 1 ? std::sqrt(ss / (ok.size() - 1)) : 0.0;
    s.min_samples = *std::min_element(ok.begin(), ok.end());
    s.max_samples = *std::max_element(ok.begin(), ok.end());
    s.mean_ms = mean / sr * 1000.0;
    s.std_ms = sd / sr * 1000.0;
    s.min_ms = samples_to_ms(s.min_samples, sr);
    s.max_ms = samples_to_ms(s.max_samples, sr);
    s.jitter_ms = s.max_ms - s.min_ms;
    return s;
}

} // namespace

int resolve_threads(int requested)
{
    if (const char* env = std::getenv("LOWLAT_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0)
            return v;
    }
    if (requested > 0)
        return requested;
    return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<LatencyReport> measure_latency_batch(const std::vector<LatencyJob>& jobs,
                                                 const std::vector<ExcitationSpec>& grid, const LatencyOptions& opt)
{
    validate(opt.onset);
    if (opt.trials_per_spec < 1)
        throw ValidationError("measure_latency: trials_per_spec must be at least 1");
    if (grid.empty())
        throw ValidationError("measure_latency: empty excitation grid");
    std::vector<int64_t> blocks;
    for (const auto& j : jobs) {
        if (!j.instance)
            throw ValidationError("measure_latency: null instance");
        if (!j.instance->streamable())
            throw ValidationError("measure_latency: '" + j.instance->spec().name +
                                  "' has lookahead and must be reconfigured first");
        const int64_t cr = j.instance->compression_ratio();
        const int64_t b = j.block_samples > 0 ? j.block_samples : cr;
        if (b % cr != 0)
            throw InfeasibleBlockError("measure_latency: block " + std::to_string(b) +
                                       " is not a multiple of the compression ratio " + std::to_string(cr));
        blocks.push_back(b);
    }
    std::vector<CoreSignal> cores;
    for (const auto& s : grid)
        cores.push_back(generate(s));

    const int T = opt.trials_per_spec;
    const size_t items = grid.size() * T;
    // lat[job][spec * T + trial]
    std::vector<std::vector<std::optional<int64_t>>> lat(jobs.size(), std::vector<std::optional<int64_t>>(items));
    const int workers = static_cast<int>(std::min<size_t>(std::max(1, opt.threads), items));
    std::exception_ptr failure;
    std::mutex fail_mu;

    auto work = [&](int w) {
        try {
            std::vector<std::unique_ptr<ModelInstance>> local;
            for (const auto& j : jobs)
                local.push_back(std::make_unique<ModelInstance>(*j.instance));
            for (size_t i = w; i < items; i += workers) {
                const size_t s = i / T;
                const size_t t = i % T;
                Rng rng(derive_seed(splitmix64(opt.master_seed ^ 0x6c61746eULL), s, t));
                const auto trial = assemble_trial(cores[s], rng);
                for (size_t j = 0; j < jobs.size(); ++j) {
                    const auto y = stream(*local[j], trial.samples, blocks[j]);
                    auto onset = detect(y, opt, trial.onset_index);
                    if (onset)
                        lat[j][i] = *onset - trial.onset_index + 2 * blocks[j];
                }
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(fail_mu);
            if (!failure)
                failure = std::current_exception();
        }
    };
    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back(work, w);
        for (auto& th : pool)
            th.join();
    }
    if (failure)
        std::rethrow_exception(failure);

    const std::string host = host_description();
    std::vector<LatencyReport> reports;
    for (size_t j = 0; j < jobs.size(); ++j) {
        const auto& inst = *jobs[j].instance;
        LatencyReport r;
        r.model = inst.spec().name;
        r.host = host;
        r.sample_rate = inst.spec().sample_rate;
        r.block_samples = blocks[j];
        r.trials_per_spec = T;
        r.master_seed = opt.master_seed;
        r.detector = detector_name(opt.detector);
        r.onset = opt.onset;
        double best = std::numeric_limits<double>::infinity();
        for (size_t s = 0; s < grid.size(); ++s) {
            std::vector<std::optional<int64_t>> v(lat[j].begin() + s * T, lat[j].begin() + (s + 1) * T);
            r.per_spec.push_back(summarize(grid[s], v, r.sample_rate, opt.keep_trials));
            const auto& st = r.per_spec.back();
            if (st.detect_failures < st.trials && st.mean_ms < best) {
                best = st.mean_ms;
                r.selected = static_cast<int>(s);
            }
        }
        if (r.selected < 0)
            throw MeasurementError("measure_latency: no onset detected in any trial of '" + r.model + "'");
        r.selected_mean_ms = r.per_spec[r.selected].mean_ms;
        r.selected_jitter_ms = r.per_spec[r.selected].jitter_ms;
        reports.push_back(std::move(r));
    }
    return reports;
}

LatencyReport measure_latency(const ModelInstance& inst, const std::vector<ExcitationSpec>& grid,
                              const LatencyOptions& opt, int64_t block_samples)
{
    return measure_latency_batch({{&inst, block_samples}}, grid, opt).front();
}

RtfReport measure_rtf(const ModelInstance& source, const RtfOptions& opt)
{
    if (opt.runs <= opt.warmup || opt.warmup < 0)
        throw ValidationError("measure_rtf: runs must exceed warmup");
    if (!source.streamable())
        throw ValidationError("measure_rtf: '" + source.spec().name + "' has lookahead and must be reconfigured first");
    RtfReport rep;
    rep.model = source.spec().name;
    rep.host = host_description();

    cpu_set_t saved;
    bool restore = false;
    if (opt.pin_cpu && sched_getaffinity(0, sizeof(saved), &saved) == 0) {
        cpu_set_t one;
        CPU_ZERO(&one);
        for (int c = 0; c < CPU_SETSIZE; ++c)
            if (CPU_ISSET(c, &saved)) {
                CPU_SET(c, &one);
                break;
            }
        rep.pinned = sched_setaffinity(0, sizeof(one), &one) == 0;
        restore = rep.pinned;
    }

    ModelInstance inst(source);
    const int64_t cr = inst.compression_ratio();
    for (int64_t block : opt.blocks) {
        RtfEntry e;
        e.block = block;
        e.runs = opt.runs;
        e.warmup = opt.warmup;
        if (block <= 0 || block % cr != 0) {
            e.feasible = false;
            e.note = "infeasible: block must be a positive multiple of the compression ratio " + std::to_string(cr);
            rep.entries.push_back(e);
            continue;
        }
        inst.reset();
        Rng rng(derive_seed(opt.seed, static_cast<uint64_t>(block)));
        TensorBlock in(1, static_cast<int>(block));
        const double duration = static_cast<double>(block) / 44100.0;
        std::vector<double> rtf;
        rtf.reserve(opt.runs - opt.warmup);
        for (int r = 0; r < opt.runs; ++r) {
            for (auto& v : in.data)
                v = static_cast<float>(rng.uniform(-1.0, 1.0));
            const auto t0 = std::chrono::steady_clock::now();
            const auto out = inst.process_block(in);
            const auto t1 = std::chrono::steady_clock::now();
            if (r >= opt.warmup)
                rtf.push_back(std::chrono::duration<double>(t1 - t0).count() / duration);
            (void)out;
        }
        e.measured = static_cast<int>(rtf.size());
        double sum = 0;
        for (double v : rtf)
            sum += v;
        e.rtf_mean = sum / rtf.size();
        double ss = 0;
        for (double v : rtf)
            ss += (v - e.rtf_mean) * (v - e.rtf_mean);
        e.rtf_std = rtf.size() > 1 ? std::sqrt(ss / (rtf.size() - 1)) : 0.0;
        e.rtf_min = *std::min_element(rtf.begin(), rtf.end());
        e.rtf_max = *std::max_element(rtf.begin(), rtf.end());
        rep.entries.push_back(e);
    }
    if (restore)
        sched_setaffinity(0, sizeof(saved), &saved);
    return rep;
}

std::string host_description()
{
    std::string cpu = "unknown cpu";
    std::ifstream f("/proc/cpuinfo");
    for (std::string line; std::getline(f, line);) {
        if (line.rfind("model name", 0) == 0) {
            auto p = line.find(':');
            if (p != std::string::npos)
                cpu = line.substr(p + 2);
            break;
        }
    }
    std::ostringstream os;
    os << cpu << "; " << std::thread::hardware_concurrency() << " logical cores";
    utsname u{};
    if (uname(&u) == 0)
        os << "; " << u.sysname << " " << u.release << " " << u.machine;
    os << "; " << "gcc " << __VERSION__;
    return os.str();
}

namespace {
nlohmann::json num(double v)
{
    if (!std::isfinite(v))
        return nullptr;
    return v;
}
} // namespace

nlohmann::json to_json(const LatencyStats& s)
{
    nlohmann::json j = {{"spec", to_json(s.spec)},
                        {"trials", s.trials},
                        {"detect_failures", s.detect_failures},
                        {"mean_ms", num(s.mean_ms)},
                        {"std_ms", num(s.std_ms)},
                        {"min_ms", num(s.min_ms)},
                        {"max_ms", num(s.max_ms)},
                        {"jitter_ms", num(s.jitter_ms)},
                        {"min_samples", s.min_samples},
                        {"max_samples", s.max_samples}};
    if (!s.latencies_samples.empty())
        j["latencies_samples"] = s.latencies_samples;
    return j;
}

nlohmann::json to_json(const LatencyReport& r)
{
    nlohmann::json per = nlohmann::json::array();
    for (const auto& s : r.per_spec)
        per.push_back(to_json(s));
    return {{"type", "latency"},
            {"model", r.model},
            {"host", r.host},
            {"sample_rate", r.sample_rate},
            {"block_samples", r.block_samples},
            {"buffering_ms", samples_to_ms(2 * r.block_samples, r.sample_rate)},
            {"buffering_included", r.buffering_included},
            {"trials_per_spec", r.trials_per_spec},
            {"master_seed", r.master_seed},
            {"detector", r.detector},
            {"onset_params", to_json(r.onset)},
            {"per_spec", per},
            {"selected_index", r.selected},
            {"selected_spec", r.selected >= 0 ? to_json(r.per_spec[r.selected].spec) : nlohmann::json()},
            {"selected_mean_ms", num(r.selected_mean_ms)},
            {"selected_jitter_ms", num(r.selected_jitter_ms)}};
}

nlohmann::json to_json(const RtfEntry& e)
{
    nlohmann::json j = {{"block", e.block}, {"feasible", e.feasible}, {"runs", e.runs}, {"warmup", e.warmup}};
    if (!e.feasible) {
        j["note"] = e.note;
        j["measured"] = 0;
        j["rtf_mean"] = nullptr;
        j["rtf_std"] = nullptr;
        return j;
    }
    j["measured"] = e.measured;
    j["rtf_mean"] = e.rtf_mean;
    j["rtf_std"] = e.rtf_std;
    j["rtf_min"] = e.rtf_min;
    j["rtf_max"] = e.rtf_max;
    return j;
}

nlohmann::json to_json(const RtfReport& r)
{
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : r.entries)
        entries.push_back(to_json(e));
    return {{"type", "rtf"}, {"model", r.model}, {"host", r.host}, {"pinned", r.pinned}, {"entries", entries}};
}

namespace {

nlohmann::json delta(const nlohmann::json& a, const nlohmann::json& b, const char* key)
{
    if (!a.contains(key) || !b.contains(key) || !a[key].is_number() || !b[key].is_number())
        return nullptr;
    return b[key].get<double>() - a[key].get<double>();
}

bool same_spec(const nlohmann::json& a, const nlohmann::json& b)
{
    return a.value("kind", "") == b.value("kind", "") && a.value("length_samples", 0) == b.value("length_samples", 0) &&
           a.value("amplitude_db", 0.0) == b.value("amplitude_db", 0.0);
}

} // namespace

nlohmann::json compare_reports(const nlohmann::json& a, const nlohmann::json& b)
{
    const std::string ta = a.value("type", ""), tb = b.value("type", "");
    if (ta != tb)
        throw ComparisonError("compare: report types differ ('" + ta + "' vs '" + tb + "')");
    nlohmann::json out = {{"type", ta + "_delta"},
                          {"a", {{"model", a.value("model", "")}, {"host", a.value("host", "")}}},
                          {"b", {{"model", b.value("model", "")}, {"host", b.value("host", "")}}}};
    if (ta == "latency") {
        if (a.value("block_samples", -1) != b.value("block_samples", -1))
            throw ComparisonError("compare: block sizes differ");
        if (a.value("trials_per_spec", -1) != b.value("trials_per_spec", -1))
            throw ComparisonError("compare: trial counts differ");
        const auto &pa = a.at("per_spec"), &pb = b.at("per_spec");
        if (pa.size() != pb.size())
            throw ComparisonError("compare: excitation grids differ in size");
        nlohmann::json per = nlohmann::json::array();
        for (size_t i = 0; i < pa.size(); ++i) {
            if (!same_spec(pa[i].at("spec"), pb[i].at("spec")))
                throw ComparisonError("compare: excitation grids differ at entry " + std::to_string(i));
            nlohmann::json d = {{"spec", pa[i].at("spec")}};
            for (const char* k : {"mean_ms", "std_ms", "min_ms", "max_ms", "jitter_ms", "detect_failures"})
                d[k] = delta(pa[i], pb[i], k);
            per.push_back(d);
        }
        out["block_samples"] = a["block_samples"];
        out["per_spec"] = per;
        out["selected_mean_ms"] = delta(a, b, "selected_mean_ms");
        out["selected_jitter_ms"] = delta(a, b, "selected_jitter_ms");
        return out;
    }
    if (ta == "rtf") {
        const auto &ea = a.at("entries"), &eb = b.at("entries");
        if (ea.size() != eb.size())
            throw ComparisonError("compare: block sets differ");
        nlohmann::json entries = nlohmann::json::array();
        for (size_t i = 0; i < ea.size(); ++i) {
            if (ea[i].value("block", -1) != eb[i].value("block", -1))
                throw ComparisonError("compare: block sets differ at entry " + std::to_string(i));
            nlohmann::json d = {{"block", ea[i]["block"]}};
            for (const char* k : {"rtf_mean", "rtf_std"})
                d[k] = delta(ea[i], eb[i], k);
            entries.push_back(d);
        }
        out["entries"] = entries;
        return out;
    }
    throw ComparisonError("compare: unknown report type '" + ta + "'");
}

namespace {
std::string cell(const nlohmann::json& v)
{
    if (v.is_null())
        return "";
    if (v.is_string())
        return v.get<std::string>();
    return v.dump();
}
} // namespace

std::string latency_csv(const nlohmann::json& r)
{
    std::ostringstream os;
    os << "model,block_samples,kind,length_samples,amplitude_db,trials,detect_failures,mean_ms,std_ms,min_ms,max_"
          "ms,jitter_ms,selected\n";
    const int sel = r.value("selected_index", -1);
    const auto& per = r.at("per_spec");
    for (size_t i = 0; i < per.size(); ++i) {
        const auto& s = per[i];
        const auto& sp = s.at("spec");
        os << cell(r["model"]) << ',' << cell(r["block_samples"]) << ',' << cell(sp["kind"]) << ','
           << cell(sp["length_samples"]) << ',' << cell(sp["amplitude_db"]) << ',' << cell(s["trials"]) << ','
           << cell(s["detect_failures"]) << ',' << cell(s["mean_ms"]) << ',' << cell(s["std_ms"]) << ','
           << cell(s["min_ms"]) << ',' << cell(s["max_ms"]) << ',' << cell(s["jitter_ms"]) << ','
           << (static_cast<int>(i) == sel ? 1 : 0) << '\n';
    }
    return os.str();
}

std::string rtf_csv(const nlohmann::json& r)
{
    std::ostringstream os;
    os << "model,block,feasible,runs,warmup,measured,rtf_mean,rtf_std\n";
    for (const auto& e : r.at("entries"))
        os << cell(r["model"]) << ',' << cell(e["block"]) << ',' << (e.value("feasible", false) ? 1 : 0) << ','
           << cell(e["runs"]) << ',' << cell(e["warmup"]) << ',' << cell(e["measured"]) << ','
           << cell(e["rtf_mean"]) << ',' << cell(e["rtf_std"]) << '\n';
    return os.str();
}

} // namespace lowlat
