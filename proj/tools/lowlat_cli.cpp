#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "lowlat/archgraph.hpp"
#include "lowlat/bench.hpp"
#include "lowlat/error.hpp"
#include "lowlat/pqmf.hpp"
#include "lowlat/probes.hpp"
#include "lowlat/protocol.hpp"
#include "lowlat/streamkernel.hpp"
#include "lowlat/timbreval.hpp"
#include "lowlat/wav.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lowlat;

namespace {

constexpr uint64_t kDefaultSeed = 20240917;

struct ModelArgs {
    std::string arch;
    std::string weights;
    uint64_t seed = kDefaultSeed;
    bool seed_given = false;
};

void add_model_args(CLI::App* cmd, ModelArgs& m)
{
    cmd->add_option("--arch", m.arch, "architecture spec file")->required();
    cmd->add_option("--weights", m.weights, "weight manifest (.json) or blob (.bin)");
    cmd->add_option_function<uint64_t>(
        "--seed",
        [&m](uint64_t s) {
            m.seed = s;
            m.seed_given = true;
        },
        "seed for random weights and signals");
}

ModelInstance load_model(const ModelArgs& m)
{
    const auto spec = load_spec(m.arch);
    if (!m.weights.empty())
        return instantiate(spec, WeightSource::file(m.weights));
    if (!spec.fixture.empty() && !m.seed_given)
        return instantiate(spec, WeightSource::fixture());
    return instantiate(spec, WeightSource::seeded(m.seed));
}

void emit(const std::string& text, const std::string& out)
{
    if (out.empty()) {
        std::cout << text;
        if (!text.empty() && text.back() != '\n')
            std::cout << '\n';
        return;
    }
    std::ofstream f(out);
    if (!f)
        throw ValidationError("cannot write '" + out + "'");
    f << text;
    if (!text.empty() && text.back() != '\n')
        f << '\n';
}

void emit(const json& j, const std::string& out) { emit(j.dump(2), out); }

std::vector<int64_t> parse_blocks(const std::string& s)
{
    std::vector<int64_t> v;
    std::stringstream ss(s);
    for (std::string tok; std::getline(ss, tok, ',');) {
        try {
            size_t used = 0;
            v.push_back(std::stoll(tok, &used));
            if (used != tok.size())
                throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw ValidationError("bad block list '" + s + "'");
        }
    }
    if (v.empty())
        throw ValidationError("empty block list");
    return v;
}

std::vector<std::string> wav_files(const std::string& dir)
{
    if (!fs::is_directory(dir))
        throw ValidationError("'" + dir + "' is not a directory");
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        auto ext = e.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
        if (e.is_regular_file() && ext == ".wav")
            files.push_back(e.path().string());
    }
    std::sort(files.begin(), files.end());
    if (files.empty())
        throw ValidationError("no .wav files in '" + dir + "'");
    return files;
}

TextureWindowSet textures_of_dir(const std::string& dir)
{
    std::vector<TextureWindowSet> sets;
    for (const auto& f : wav_files(dir))
        sets.push_back(mfcc_textures(read_mono(f), f));
    return merge(sets, dir);
}

json read_json(const std::string& path)
{
    std::ifstream f(path);
    if (!f)
        throw ValidationError("cannot open '" + path + "'");
    try {
        return json::parse(f);
    } catch (const json::parse_error& e) {
        throw FormatError(path + ": " + e.what());
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"lowlat: latency analysis and measurement for streaming neural audio autoencoders"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "worker threads (LOWLAT_THREADS overrides)");

    // analyze
    auto* an = app.add_subcommand("analyze", "static latency analysis of an architecture");
    std::string an_arch, an_out;
    int64_t an_block = 0;
    bool an_csv = false;
    an->add_option("--arch,arch", an_arch, "architecture spec file")->required();
    an->add_option("--block", an_block, "block size in samples (default: compression ratio)");
    an->add_option("--out", an_out, "write the report here");
    an->add_flag("--csv", an_csv, "flat table instead of JSON");

    // pqmf-design
    auto* pq = app.add_subcommand("pqmf-design", "design a pseudo-QMF bank");
    int pq_bands = 16;
    double pq_atten = 100;
    std::string pq_out;
    bool pq_report = false;
    pq->add_option("--bands", pq_bands)->required();
    pq->add_option("--atten", pq_atten)->required();
    pq->add_option("--out", pq_out, "coefficient document");
    pq->add_flag("--report", pq_report, "print measured stopband, SNR and delay");

    // gen-excite
    auto* ge = app.add_subcommand("gen-excite", "write one padded excitation trial");
    std::string ge_kind = "white_noise", ge_out;
    int ge_len = 44100;
    double ge_amp = 0;
    uint64_t ge_seed = kDefaultSeed;
    ge->add_option("--kind", ge_kind, "white_noise | dense_sinusoid | harmonic");
    ge->add_option("--len", ge_len)->check(CLI::IsMember({4096, 44100}));
    ge->add_option("--amp", ge_amp, "peak level in dB (0 or -6)");
    ge->add_option("--seed", ge_seed);
    ge->add_option("--out", ge_out, "output wav; the sidecar goes next to it")->required();

    // measure-latency
    auto* ml = app.add_subcommand("measure-latency", "sound-to-sound latency over the excitation grid");
    ModelArgs ml_model;
    add_model_args(ml, ml_model);
    int ml_trials = 500;
    int64_t ml_block = 0;
    std::string ml_out, ml_detector = "first";
    bool ml_csv = false;
    ml->add_option("--trials", ml_trials, "trials per excitation spec");
    ml->add_option("--block", ml_block, "block size (default: compression ratio)");
    ml->add_option("--detector", ml_detector)->check(CLI::IsMember({"first", "ampgate", "flux"}));
    ml->add_option("--out", ml_out);
    ml->add_flag("--csv", ml_csv);

    // bench-rtf
    auto* br = app.add_subcommand("bench-rtf", "real-time factor per block size");
    ModelArgs br_model;
    add_model_args(br, br_model);
    std::string br_blocks = "128,256,512,2048", br_out;
    int br_runs = 1100, br_warmup = 100;
    bool br_csv = false;
    br->add_option("--blocks", br_blocks);
    br->add_option("--runs", br_runs);
    br->add_option("--warmup", br_warmup);
    br->add_option("--out", br_out);
    br->add_flag("--csv", br_csv);

    // resynth
    auto* rs = app.add_subcommand("resynth", "stream a wav file through a model");
    ModelArgs rs_model;
    add_model_args(rs, rs_model);
    std::string rs_in, rs_out;
    int64_t rs_block = 0;
    rs->add_option("--in", rs_in)->required();
    rs->add_option("--out", rs_out)->required();
    rs->add_option("--block", rs_block, "block size (default: compression ratio)");

    // eval
    auto* ev = app.add_subcommand("eval", "timbre transfer metrics");
    ev->require_subcommand(1);
    auto* ev_mmd = ev->add_subcommand("mmd", "MMD similarity protocol over three wav directories");
    std::string mmd_test, mmd_ref, mmd_tr, ev_out;
    uint64_t ev_seed = kDefaultSeed;
    ev_mmd->add_option("--test", mmd_test)->required();
    ev_mmd->add_option("--ref", mmd_ref)->required();
    ev_mmd->add_option("--transferred", mmd_tr)->required();
    ev_mmd->add_option("--seed", ev_seed);
    ev_mmd->add_option("--out", ev_out);
    auto* ev_loud = ev->add_subcommand("loudness", "A-weighted loudness L1 between two files");
    std::string ev_a, ev_b;
    ev_loud->add_option("--a", ev_a)->required();
    ev_loud->add_option("--b", ev_b)->required();
    ev_loud->add_option("--out", ev_out);
    auto* ev_pitch = ev->add_subcommand("pitch", "pitch accuracy between two tracks");
    bool ev_audio = false;
    double ev_conf = 0.85, ev_tol = 0.5;
    ev_pitch->add_option("--a", ev_a)->required();
    ev_pitch->add_option("--b", ev_b)->required();
    ev_pitch->add_flag("--audio", ev_audio, "inputs are wav files; track them with YIN");
    ev_pitch->add_option("--conf", ev_conf);
    ev_pitch->add_option("--tol", ev_tol, "tolerance in semitones");
    ev_pitch->add_option("--out", ev_out);

    // loudness-normalize
    auto* ln = app.add_subcommand("loudness-normalize", "apply one gain to reach a BS.1770 loudness");
    double ln_target = -18;
    std::string ln_in, ln_out;
    ln->add_option("--target", ln_target, "LUFS");
    ln->add_option("in", ln_in)->required();
    ln->add_option("out", ln_out)->required();

    // init-weights
    auto* iw = app.add_subcommand("init-weights", "write seeded random weights for a spec");
    std::string iw_arch, iw_out;
    uint64_t iw_seed = kDefaultSeed;
    bool iw_zero_bias = false;
    iw->add_option("--arch", iw_arch)->required();
    iw->add_option("--seed", iw_seed);
    iw->add_flag("--zero-bias", iw_zero_bias);
    iw->add_option("--out", iw_out, "manifest path (.json); the blob is written next to it")->required();

    // measure-rf
    auto* mr = app.add_subcommand("measure-rf", "empirical receptive field next to the analytic one");
    ModelArgs mr_model;
    add_model_args(mr, mr_model);
    int mr_cap = 0;
    std::string mr_out;
    mr->add_option("--cap-channels", mr_cap, "measure on a copy with widths capped (random weights)");
    mr->add_option("--out", mr_out);

    // protocol
    auto* pr = app.add_subcommand("protocol", "analyze + measure-latency + bench-rtf in one bundle");
    ModelArgs pr_model;
    add_model_args(pr, pr_model);
    int pr_trials = 500, pr_runs = 1100, pr_warmup = 100;
    int64_t pr_block = 0;
    std::string pr_blocks = "128,256,512,2048", pr_out;
    pr->add_option("--trials", pr_trials);
    pr->add_option("--block", pr_block);
    pr->add_option("--blocks", pr_blocks, "RTF block sizes");
    pr->add_option("--runs", pr_runs);
    pr->add_option("--warmup", pr_warmup);
    pr->add_option("--out", pr_out);

    // compare
    auto* cmp = app.add_subcommand("compare", "deltas between two latency or two RTF reports");
    std::string cmp_a, cmp_b, cmp_out;
    cmp->add_option("a", cmp_a)->required();
    cmp->add_option("b", cmp_b)->required();
    cmp->add_option("--out", cmp_out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        const int nthreads = resolve_threads(threads);
        if (*an) {
            const auto spec = load_spec(an_arch);
            const auto r = analyze(spec, an_block);
            const auto j = to_json(r);
            if (an_csv) {
                std::ostringstream os;
                os << "name,compression_ratio,rf_encoder_samples,rf_decoder_latents,rf_total_samples,rf_total_ms,"
                      "min_block_samples,parameter_count,block_samples,buffering_ms,representation_ms,cumulative_ms,"
                      "jitter_bound_ms\n";
                const auto& b = j["budget"];
                os << j["name"].get<std::string>() << ',' << j["compression_ratio"].dump() << ','
                   << j["rf_encoder_samples"].dump() << ',' << j["rf_decoder_latents"].dump() << ','
                   << j["rf_total_samples"].dump() << ',' << j["rf_total_ms"].dump() << ','
                   << j["min_block_samples"].dump() << ',' << j["parameter_count"].dump() << ','
                   << b["block_samples"].dump() << ',' << b["buffering_ms"].dump() << ','
                   << b["representation_ms"].dump() << ',' << b["cumulative_ms"].dump() << ','
                   << b["jitter_bound_ms"].dump() << '\n';
                emit(os.str(), an_out);
            } else {
                emit(j, an_out);
            }
        } else if (*pq) {
            const auto bank = design({pq_bands, pq_atten});
            auto doc = bank_to_json(bank);
            if (pq_report) {
                const auto r = measure_bank(bank);
                json rep = {{"bands", bank.bands},
                            {"attenuation_db", bank.attenuation_db},
                            {"prototype_length", bank.length()},
                            {"group_delay_samples", bank.group_delay_samples},
                            {"stopband_db", r.stopband_db},
                            {"roundtrip_snr_db", r.roundtrip_snr_db},
                            {"roundtrip_delay_samples", r.roundtrip_delay_samples},
                            {"energy_ratio_db", r.energy_ratio_db}};
                std::cout << rep.dump(2) << '\n';
            }
            if (!pq_out.empty())
                emit(doc, pq_out);
            else if (!pq_report)
                emit(doc, "");
        } else if (*ge) {
            ExcitationSpec s;
            s.kind = excitation_kind_from(ge_kind);
            s.length_samples = ge_len;
            s.amplitude_db = ge_amp;
            s.seed = ge_seed;
            const auto core = generate(s);
            Rng rng(derive_seed(ge_seed, 1));
            const auto trial = assemble_trial(core, rng);
            write_wav(ge_out, trial.samples);
            json side = {{"spec", to_json(s)},
                         {"onset_index", trial.onset_index},
                         {"front_pad", trial.front_pad},
                         {"back_pad", trial.back_pad},
                         {"total_samples", trial.samples.size()},
                         {"frequencies_hz", core.frequencies}};
            emit(side, fs::path(ge_out).replace_extension(".json").string());
        } else if (*ml) {
            const auto inst = load_model(ml_model);
            LatencyOptions o;
            o.trials_per_spec = ml_trials;
            o.master_seed = ml_model.seed;
            o.threads = nthreads;
            o.detector = ml_detector == "ampgate" ? OnsetDetector::AmpGate
                         : ml_detector == "flux"  ? OnsetDetector::Flux
                                                  : OnsetDetector::First;
            const auto run = inst.streamable() ? ModelInstance(inst) : reconfigure_noncausal(inst);
            const auto j = to_json(measure_latency(run, excitation_grid(ml_model.seed), o, ml_block));
            emit(ml_csv ? latency_csv(j) : j.dump(2), ml_out);
        } else if (*br) {
            const auto inst = load_model(br_model);
            RtfOptions o;
            o.blocks = parse_blocks(br_blocks);
            o.runs = br_runs;
            o.warmup = br_warmup;
            o.seed = br_model.seed;
            const auto run = inst.streamable() ? ModelInstance(inst) : reconfigure_noncausal(inst);
            const auto j = to_json(measure_rtf(run, o));
            emit(br_csv ? rtf_csv(j) : j.dump(2), br_out);
        } else if (*rs) {
            auto inst = load_model(rs_model);
            if (!inst.streamable())
                inst = reconfigure_noncausal(inst);
            const auto x = read_mono(rs_in);
            const int64_t block = rs_block > 0 ? rs_block : inst.compression_ratio();
            if (block % inst.compression_ratio() != 0)
                throw InfeasibleBlockError("block must be a multiple of the compression ratio " +
                                           std::to_string(inst.compression_ratio()));
            const size_t n = x.size() / block * block;
            std::vector<float> y;
            y.reserve(n);
            for (size_t pos = 0; pos < n; pos += block) {
                const auto o = inst.process(std::vector<float>(x.begin() + pos, x.begin() + pos + block));
                y.insert(y.end(), o.begin(), o.end());
            }
            write_wav(rs_out, y);
        } else if (*ev_mmd) {
            const auto test = textures_of_dir(mmd_test);
            const auto ref = textures_of_dir(mmd_ref);
            const auto tr = textures_of_dir(mmd_tr);
            emit(similarity_report(test, ref, tr, ev_seed), ev_out);
        } else if (*ev_loud) {
            const auto j = loudness_report(read_mono(ev_a), read_mono(ev_b));
            if (j["truncated"].get<bool>())
                std::cerr << "warning: inputs differ in length; compared up to the shorter one\n";
            emit(j, ev_out);
        } else if (*ev_pitch) {
            PitchTrack a, b;
            if (ev_audio) {
                a = yin_f0(read_mono(ev_a));
                b = yin_f0(read_mono(ev_b));
            } else {
                a = pitch_track_from_json(read_json(ev_a));
                b = pitch_track_from_json(read_json(ev_b));
            }
            emit(pitch_report(a, b, ev_conf, ev_tol), ev_out);
        } else if (*ln) {
            const auto x = read_mono(ln_in);
            const double before = integrated_lufs(x);
            const auto y = normalize_to_lufs(x, ln_target);
            write_wav(ln_out, y);
            std::cout << json{{"input_lufs", before}, {"target_lufs", ln_target}, {"output_lufs", integrated_lufs(y)}}
                             .dump(2)
                      << '\n';
        } else if (*iw) {
            const auto spec = load_spec(iw_arch);
            save_weights(seeded_weights(spec, iw_seed, iw_zero_bias), iw_out);
        } else if (*mr) {
            const auto spec = load_spec(mr_model.arch);
            ArchitectureSpec target = spec;
            WeightSet w;
            if (mr_cap > 0) {
                target = reduce_channels(spec, mr_cap);
                w = seeded_weights(target, mr_model.seed);
            } else {
                w = load_model(mr_model).weights();
            }
            const auto m = measure_receptive_field(target, w);
            const auto a = analyze(target);
            auto j = to_json(m);
            j["analytic"] = {{"rf_encoder_samples", a.encoder_rf_samples},
                             {"rf_decoder_latents", a.decoder_rf_latents},
                             {"rf_total_samples", a.total_rf_samples}};
            j["agree"] = a.encoder_rf_samples == m.encoder_rf_samples &&
                         a.decoder_rf_latents == m.decoder_rf_latents && a.total_rf_samples == m.total_rf_samples;
            emit(j, mr_out);
        } else if (*pr) {
            const auto inst = load_model(pr_model);
            ProtocolOptions o;
            o.trials_per_spec = pr_trials;
            o.seed = pr_model.seed;
            o.threads = nthreads;
            o.block_samples = pr_block;
            o.rtf.blocks = parse_blocks(pr_blocks);
            o.rtf.runs = pr_runs;
            o.rtf.warmup = pr_warmup;
            emit(run_protocol(inst, o), pr_out);
        } else if (*cmp) {
            emit(compare_reports(read_json(cmp_a), read_json(cmp_b)), cmp_out);
        }
    } catch (const CLI::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
