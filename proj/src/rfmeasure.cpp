#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>

#include "lowlat/error.hpp"
#include "lowlat/rng.hpp"
#include "lowlat/streamkernel.hpp"

namespace lowlat {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// Prefix/suffix poisoning over an input axis of nin units. run(lo, hi)
// poisons units [lo, hi) and returns the NaN mask of the outputs.
class Prober {
public:
    using Run = std::function<std::vector<char>(long lo, long hi)>;

    Prober(long nin, Run run) : nin_(nin), run_(std::move(run)) {}

    // last poisoned output when units [0, p] are poisoned, -1 if none
    long prefix(long p)
    {
        auto it = pre_.find(p);
        if (it != pre_.end())
            return it->second;
        auto mask = run_(0, p + 1);
        ++runs_;
        long last = -1;
        for (long t = static_cast<long>(mask.size()) - 1; t >= 0; --t)
            if (mask[t]) {
                last = t;
                break;
            }
        nout_ = static_cast<long>(mask.size());
        return pre_[p] = last;
    }

    // first poisoned output when units [p, nin) are poisoned, nout if none
    long suffix(long p)
    {
        auto it = suf_.find(p);
        if (it != suf_.end())
            return it->second;
        auto mask = run_(p, nin_);
        ++runs_;
        long first = static_cast<long>(mask.size());
        for (long t = 0; t < static_cast<long>(mask.size()); ++t)
            if (mask[t]) {
                first = t;
                break;
            }
        nout_ = static_cast<long>(mask.size());
        return suf_[p] = first;
    }

    // min p in [a, b] with prefix(p) >= t; prefix(b) >= t must hold
    long lower(long a, long b, long t)
    {
        while (a < b) {
            long m = a + (b - a) / 2;
            if (prefix(m) >= t)
                b = m;
            else
                a = m + 1;
        }
        return a;
    }

    // max p in [a, b] with suffix(p) <= t; suffix(a) <= t must hold
    long upper(long a, long b, long t)
    {
        while (a < b) {
            long m = a + (b - a + 1) / 2;
            if (suffix(m) <= t)
                a = m;
            else
                b = m - 1;
        }
        return a;
    }

    // Earliest and latest input unit each output in [t0, t0 + w) depends on.
    void spans(long t0, long w, std::vector<long>& lo, std::vector<long>& hi)
    {
        lo.assign(w, -1);
        hi.assign(w, -1);
        const long tend = t0 + w;
        long t = t0;
        long p = lower(0, nin_ - 1, t);
        while (true) {
            const long tp = prefix(p);
            for (long u = t; u <= std::min(tp, tend - 1); ++u)
                lo[u - t0] = p;
            t = tp + 1;
            if (t >= tend)
                break;
            long a = p + 1, step = 1, b = a;
            while (b < nin_ - 1 && prefix(b) < t) {
                a = b + 1;
                b = std::min(nin_ - 1, b + step);
                step *= 2;
            }
            p = lower(a, b, t);
        }

        t = t0;
        p = upper(0, nin_ - 1, t);
        while (true) {
            const long next = p + 1 < nin_ ? suffix(p + 1) : std::numeric_limits<long>::max();
            for (long u = t; u < std::min(next, tend); ++u)
                hi[u - t0] = p;
            if (next >= tend)
                break;
            t = next;
            long a = p + 1, step = 1, b = a;
            while (b < nin_ - 1 && suffix(b + 1) <= t) {
                a = b + 1;
                b = std::min(nin_ - 1, b + step);
                step *= 2;
            }
            p = upper(a, b, t);
        }
    }

    int runs() const { return runs_; }
    long nout() const { return nout_; }

private:
    long nin_;
    long nout_ = 0;
    Run run_;
    std::map<long, long> pre_, suf_;
    int runs_ = 0;
};

std::vector<char> nan_mask(const std::vector<double>& y)
{
    std::vector<char> m(y.size());
    for (size_t i = 0; i < y.size(); ++i)
        m[i] = std::isnan(y[i]) ? 1 : 0;
    return m;
}

std::vector<char> nan_mask_frames(const Signal& y)
{
    std::vector<char> m(y.frames, 0);
    for (int c = 0; c < y.channels; ++c)
        for (long f = 0; f < y.frames; ++f)
            if (std::isnan(y.at(c, f)))
                m[f] = 1;
    return m;
}

struct Window {
    long nin = 0;
    long t0 = 0;
    long width = 0;
};

// Grow the buffer until poisoning the outer eighths leaves the window clean,
// then measure the maximal span over the window.
template <class MakeProber>
int64_t measure(long first_units, long max_units, MakeProber make, int& runs, int& positions)
{
    for (long nin = first_units; nin <= max_units; nin *= 2) {
        Window win;
        auto prober = make(nin, win);
        const long guard = nin / 8;
        const long tend = win.t0 + win.width - 1;
        if (prober.prefix(nin - 1) < tend || prober.suffix(0) > win.t0) {
            runs += prober.runs();
            throw DegenerateWeightsError("receptive field: some outputs do not depend on the input");
        }
        if (prober.prefix(guard) >= win.t0 || prober.suffix(nin - guard) <= tend) {
            runs += prober.runs();
            continue;
        }
        std::vector<long> lo, hi;
        prober.spans(win.t0, win.width, lo, hi);
        runs += prober.runs();
        int64_t best = 0;
        for (long i = 0; i < win.width; ++i)
            best = std::max<int64_t>(best, hi[i] - lo[i] + 1);
        positions = static_cast<int>(win.width);
        return best;
    }
    throw MeasurementError("receptive field: exceeded the maximum probe length");
}

} // namespace

RfMeasurement measure_receptive_field(const ArchitectureSpec& spec, const WeightSet& w)
{
    validate(spec);
    check_weights(spec, w);
    const long cr = static_cast<long>(compression_ratio(spec));
    const long max_samples = 1L << 24;
    RfMeasurement m;
    Rng rng(0x7f4a7c15ULL);
    auto noise = [&](long n) {
        std::vector<double> x(n);
        for (auto& v : x)
            v = rng.normal();
        return x;
    };
    int pos = 0;

    // encoder: audio samples -> latent frames
    {
        auto make = [&](long n, Window& win) {
            auto base = std::make_shared<std::vector<double>>(noise(n));
            win = {n, (n / cr) / 2, 8};
            return Prober(n, [&, base](long lo, long hi) {
                auto x = *base;
                std::fill(x.begin() + lo, x.begin() + hi, kNan);
                return nan_mask_frames(offline_encode(spec, w, x));
            });
        };
        m.encoder_rf_samples = measure(std::max(64L, 8192 / cr) * cr, max_samples, make, m.offline_runs, pos);
    }

    // decoder: latent frames -> audio samples
    {
        auto make = [&](long nz, Window& win) {
            auto base = std::make_shared<Signal>(spec.latent_dim, nz);
            for (auto& v : base->data)
                v = rng.normal();
            win = {nz, (nz / 2) * cr, std::max(cr, 8L)};
            return Prober(nz, [&, base](long lo, long hi) {
                Signal z = *base;
                for (int c = 0; c < z.channels; ++c)
                    for (long f = lo; f < hi; ++f)
                        z.at(c, f) = kNan;
                return nan_mask(offline_decode(spec, w, z));
            });
        };
        m.decoder_rf_latents = measure(64, max_samples / cr, make, m.offline_runs, pos);
    }

    // whole model: audio -> audio
    {
        auto make = [&](long n, Window& win) {
            auto base = std::make_shared<std::vector<double>>(noise(n));
            win = {n, (n / 2) / cr * cr, std::max(cr, 8L)};
            return Prober(n, [&, base](long lo, long hi) {
                auto x = *base;
                std::fill(x.begin() + lo, x.begin() + hi, kNan);
                return nan_mask(process_offline(spec, w, x));
            });
        };
        const long first = std::max(16 * cr, 4096L);
        m.total_rf_samples = measure(first, max_samples, make, m.offline_runs, pos);
        m.positions = pos;
    }
    return m;
}

RfMeasurement measure_receptive_field(const ModelInstance& inst)
{
    return measure_receptive_field(inst.spec(), inst.weights());
}

ArchitectureSpec reduce_channels(const ArchitectureSpec& spec, int cap)
{
    validate(spec);
    ArchitectureSpec s = spec;
    auto f = [&](int c) { return std::min(c, cap); };
    const bool head = encoder_output_channels(spec) == 2 * spec.latent_dim;
    s.latent_dim = f(spec.latent_dim);
    int ch = s.filterbank.bands;
    for (size_t i = 0; i < s.encoder.size(); ++i) {
        auto& l = s.encoder[i];
        l.channels_in = ch;
        if (l.kind == LayerKind::Activation) {
            l.channels_out = ch;
            continue;
        }
        bool last_conv = true;
        for (size_t k = i + 1; k < s.encoder.size(); ++k)
            last_conv = last_conv && s.encoder[k].kind != LayerKind::Conv;
        l.channels_out = last_conv ? (head ? 2 * s.latent_dim : s.latent_dim) : f(l.channels_out);
        ch = l.channels_out;
    }
    ch = s.latent_dim;
    for (size_t i = 0; i < s.decoder.size(); ++i) {
        auto& l = s.decoder[i];
        l.channels_in = ch;
        if (l.kind == LayerKind::Activation || l.kind == LayerKind::ResidualStack) {
            l.channels_out = ch;
            continue;
        }
        l.channels_out = i + 1 == s.decoder.size() ? s.filterbank.bands : f(l.channels_out);
        bool later_changes = false;
        for (size_t k = i + 1; k < s.decoder.size(); ++k)
            later_changes = later_changes || s.decoder[k].kind == LayerKind::Conv ||
                            s.decoder[k].kind == LayerKind::TransposedConv;
        if (!later_changes)
            l.channels_out = s.filterbank.bands;
        ch = l.channels_out;
    }
    s.name = spec.name + "_reduced";
    validate(s);
    return s;
}

nlohmann::json to_json(const RfMeasurement& m)
{
    return {{"rf_encoder_samples", m.encoder_rf_samples},
            {"rf_decoder_latents", m.decoder_rf_latents},
            {"rf_total_samples", m.total_rf_samples},
            {"positions", m.positions},
            {"offline_runs", m.offline_runs}};
}

} // namespace lowlat
