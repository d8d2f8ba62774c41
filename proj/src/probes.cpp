#include "lowlat/probes.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "lowlat/error.hpp"
#include "lowlat/fft.hpp"

namespace lowlat {

std::string to_string(ExcitationKind k)
{
    switch (k) {
    case ExcitationKind::WhiteNoise:
        return "white_noise";
    case ExcitationKind::DenseSinusoid:
        return "dense_sinusoid";
    case ExcitationKind::Harmonic:
        return "harmonic";
    }
    return "?";
}

ExcitationKind excitation_kind_from(const std::string& s)
{
    if (s == "white_noise" || s == "noise")
        return ExcitationKind::WhiteNoise;
    if (s == "dense_sinusoid" || s == "dense")
        return ExcitationKind::DenseSinusoid;
    if (s == "harmonic")
        return ExcitationKind::Harmonic;
    throw ValidationError("unknown excitation kind '" + s + "' (white_noise, dense_sinusoid, harmonic)");
}

void validate(const ExcitationSpec& s)
{
    if (s.length_samples <= 0)
        throw ValidationError("excitation length must be positive");
    if (!(s.amplitude_db <= 0.0))
        throw ValidationError("excitation amplitude_db must be <= 0");
    if (!(s.sample_rate > 0))
        throw ValidationError("excitation sample_rate must be positive");
}

void validate(const OnsetParams& p)
{
    if (!(p.ampgate.on_threshold_db > p.ampgate.off_threshold_db))
        throw ValidationError("ampgate: on threshold must exceed off threshold");
    if (p.ampgate.ramp_samples < 1)
        throw ValidationError("ampgate: ramp must be at least one sample");
    if (p.flux.hop < 1 || p.flux.hop > p.flux.fft_size)
        throw ValidationError("flux: hop must lie in [1, fft_size]");
    if (p.flux.mel_bands < 1 || p.flux.max_filter_width < 1)
        throw ValidationError("flux: mel_bands and max_filter_width must be positive");
}

std::vector<double> decay_envelope(int n)
{
    std::vector<double> e(n, 1.0);
    for (int i = 1; i < n; ++i)
        e[i] = std::pow(10.0, -3.0 * i / (n - 1));
    return e;
}

CoreSignal generate(const ExcitationSpec& spec)
{
    validate(spec);
    CoreSignal core;
    core.spec = spec;
    Rng rng(spec.seed);
    const int n = spec.length_samples;
    const double sr = spec.sample_rate;
    std::vector<double> x(n, 0.0);

    auto add_partials = [&]() {
        for (double f : core.frequencies) {
            const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
            const double w = 2.0 * std::numbers::pi * f / sr;
            for (int i = 0; i < n; ++i)
                x[i] += std::sin(w * i + phase);
        }
    };

    switch (spec.kind) {
    case ExcitationKind::WhiteNoise:
        for (auto& v : x)
            v = rng.normal();
        break;
    case ExcitationKind::DenseSinusoid: {
        const double lo = rng.uniform(80.0, 2000.0);
        const double top = 0.45 * sr;
        const double hi = top - (top - lo) * rng.uniform();
        const int count = static_cast<int>(std::floor(24.0 * std::log2(hi / lo))) + 1;
        for (int i = 0; i < count; ++i)
            core.frequencies.push_back(lo * std::exp2(i / 24.0));
        add_partials();
        break;
    }
    case ExcitationKind::Harmonic: {
        const double f0 = rng.uniform(60.0, 1000.0);
        const int h = static_cast<int>(rng.uniform_int(3, 20));
        for (int k = 1; k <= h && k * f0 < 0.5 * sr; ++k)
            core.frequencies.push_back(k * f0);
        add_partials();
        break;
    }
    }

    const auto env = decay_envelope(n);
    double peak = 0;
    for (int i = 0; i < n; ++i) {
        x[i] *= env[i];
        peak = std::max(peak, std::abs(x[i]));
    }
    const double g = peak > 0 ? std::pow(10.0, spec.amplitude_db / 20.0) / peak : 0.0;
    core.samples.resize(n);
    for (int i = 0; i < n; ++i)
        core.samples[i] = static_cast<float>(x[i] * g);
    return core;
}

TrialSignal assemble_trial(const CoreSignal& core, Rng& rng)
{
    TrialSignal t;
    t.spec = core.spec;
    t.front_pad = rng.uniform_int(kMinFrontPad, kMaxFrontPad);
    t.back_pad = kBackPad;
    t.onset_index = t.front_pad;
    t.samples.assign(t.front_pad + core.samples.size() + t.back_pad, 0.0f);
    std::copy(core.samples.begin(), core.samples.end(), t.samples.begin() + t.front_pad);
    return t;
}

std::vector<ExcitationSpec> excitation_grid(uint64_t master_seed)
{
    std::vector<ExcitationSpec> grid;
    for (auto kind : {ExcitationKind::WhiteNoise, ExcitationKind::DenseSinusoid, ExcitationKind::Harmonic})
        for (int len : {4096, 44100})
            for (double amp : {0.0, -6.0}) {
                ExcitationSpec s;
                s.kind = kind;
                s.length_samples = len;
                s.amplitude_db = amp;
                s.seed = derive_seed(master_seed, grid.size());
                grid.push_back(s);
            }
    return grid;
}

std::optional<int64_t> ampgate_onset(const std::vector<float>& x, const AmpGateParams& p, int64_t from)
{
    const double on = std::pow(10.0, p.on_threshold_db / 20.0);
    const double off = std::pow(10.0, p.off_threshold_db / 20.0);
    const double r = p.ramp_samples;
    double env = 0;
    bool gate = false;
    for (size_t n = 0; n < x.size(); ++n) {
        env += (std::abs(static_cast<double>(x[n])) - env) / r;
        if (!gate && env >= on) {
            gate = true;
            if (static_cast<int64_t>(n) >= from)
                return static_cast<int64_t>(n);
        } else if (gate && env < off) {
            gate = false;
        }
    }
    return std::nullopt;
}

std::optional<int64_t> flux_onset(const std::vector<float>& x, const FluxParams& p, int64_t from)
{
    const int nfft = p.fft_size, hop = p.hop, nm = p.mel_bands;
    if (static_cast<int64_t>(x.size()) < nfft)
        throw InsufficientLengthError("flux onset: signal shorter than one fft frame");
    const int64_t frames = (static_cast<int64_t>(x.size()) - nfft) / hop + 1;
    const int bins = nfft / 2 + 1;
    const auto win = hann_window(nfft);
    const auto fb = mel_filterbank(nm, nfft, p.sample_rate, 0.0, p.sample_rate / 2);
    RealFft fft(nfft);
    std::vector<double> buf(nfft);
    std::vector<std::complex<double>> spec(bins);
    std::vector<double> mag(bins);

    auto spectrum = [&](int64_t t, std::vector<double>& s) {
        s.assign(nm, 0.0);
        const float* f = x.data() + t * hop;
        if (std::all_of(f, f + nfft, [](float v) { return v == 0.0f; }))
            return;
        for (int i = 0; i < nfft; ++i)
            buf[i] = f[i] * win[i];
        fft.forward(buf.data(), spec.data());
        for (int k = 0; k < bins; ++k)
            mag[k] = std::abs(spec[k]);
        for (int m = 0; m < nm; ++m) {
            double acc = 0;
            const double* row = fb.data() + static_cast<size_t>(m) * bins;
            for (int k = 0; k < bins; ++k)
                acc += row[k] * mag[k];
            s[m] = std::log1p(acc);
        }
    };

    const int half = p.max_filter_width / 2;
    auto flux_of = [&](const std::vector<double>& prev, const std::vector<double>& cur) {
        double f = 0;
        for (int m = 0; m < nm; ++m) {
            double ref = 0;
            for (int j = std::max(0, m - half); j <= std::min(nm - 1, m + half); ++j)
                ref = std::max(ref, prev[j]);
            f += std::max(0.0, cur[m] - ref);
        }
        return f;
    };

    // frames whose last sample reaches `from`
    const int64_t first = std::max<int64_t>(0, (from - nfft + 1 + hop - 1) / hop);
    if (first >= frames)
        return std::nullopt;
    std::vector<double> prev(nm, 0.0), cur;
    if (first > 0)
        spectrum(first - 1, prev);

    std::vector<double> flux;
    double sum = 0;
    auto report = [&](int64_t c) -> std::optional<int64_t> {
        const double floor = 1e-9 * flux[c];
        int64_t b = c;
        while (b > 0 && flux[b - 1] > floor)
            --b;
        const int64_t t = first + b;
        // mid-hop of the first frame reaching the onset, never before `from`
        return std::max(from, t == 0 ? int64_t(0) : t * hop + nfft - 1 - hop / 2);
    };
    for (int64_t t = first; t < frames; ++t) {
        spectrum(t, cur);
        flux.push_back(flux_of(prev, cur));
        std::swap(prev, cur);
        // candidate is the previous frame, which now has both neighbours
        const int64_t c = static_cast<int64_t>(flux.size()) - 2;
        if (c >= 0) {
            const double fc = flux[c];
            const double before = c > 0 ? flux[c - 1] : 0.0;
            const double mean = c > 0 ? sum / c : 0.0;
            if (fc > 0 && fc > before && fc >= flux[c + 1] && fc > p.peak_threshold * mean)
                return report(c);
            sum += fc;
        }
    }
    const int64_t c = static_cast<int64_t>(flux.size()) - 1;
    if (c >= 0) {
        const double fc = flux[c];
        const double before = c > 0 ? flux[c - 1] : 0.0;
        const double mean = c > 0 ? sum / c : 0.0;
        if (fc > 0 && fc > before && fc > p.peak_threshold * mean)
            return report(c);
    }
    return std::nullopt;
}

std::optional<int64_t> first_onset(const std::vector<float>& x, const OnsetParams& p, int64_t from)
{
    auto a = ampgate_onset(x, p.ampgate, from);
    std::optional<int64_t> f;
    if (static_cast<int64_t>(x.size()) >= p.flux.fft_size)
        f = flux_onset(x, p.flux, from);
    if (a && f)
        return std::min(*a, *f);
    return a ? a : f;
}

nlohmann::json to_json(const ExcitationSpec& s)
{
    return {{"kind", to_string(s.kind)},
            {"length_samples", s.length_samples},
            {"amplitude_db", s.amplitude_db},
            {"sample_rate", s.sample_rate},
            {"seed", s.seed}};
}

nlohmann::json to_json(const OnsetParams& p)
{
    return {{"ampgate",
             {{"on_threshold_db", p.ampgate.on_threshold_db},
              {"off_threshold_db", p.ampgate.off_threshold_db},
              {"ramp_samples", p.ampgate.ramp_samples}}},
            {"flux",
             {{"fft_size", p.flux.fft_size},
              {"hop", p.flux.hop},
              {"mel_bands", p.flux.mel_bands},
              {"max_filter_width", p.flux.max_filter_width},
              {"peak_threshold", p.flux.peak_threshold}}}};
}

} // namespace lowlat
