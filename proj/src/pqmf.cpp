#include "lowlat/pqmf.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <random>

#include "lowlat/error.hpp"
#include "lowlat/rng.hpp"
#include "lowlat/stages.hpp"

namespace lowlat {

namespace pqmf_detail {

double kaiser_beta(double a)
{
    if (a > 50.0)
        return 0.1102 * (a - 8.7);
    if (a > 21.0)
        return 0.5842 * std::pow(a - 21.0, 0.4) + 0.07886 * (a - 21.0);
    return 0.0;
}

int kaiser_taps(double atten_db, double width)
{
    double n = (atten_db - 7.95) / 2.285 / (std::numbers::pi * width) + 1.0;
    int taps = static_cast<int>(std::ceil(n));
    return 2 * (taps / 2) + 1;
}

std::vector<double> kaiser_window(int n, double beta)
{
    std::vector<double> w(n, 1.0);
    if (n == 1)
        return w;
    const double alpha = 0.5 * (n - 1);
    const double denom = std::cyl_bessel_i(0.0, beta);
    for (int i = 0; i < n; ++i) {
        double r = (i - alpha) / alpha;
        w[i] = std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / denom;
    }
    return w;
}

std::vector<double> kaiser_lowpass(int n, double cutoff, double beta)
{
    const double c = cutoff / std::numbers::pi;
    const double alpha = 0.5 * (n - 1);
    auto w = kaiser_window(n, beta);
    std::vector<double> h(n);
    for (int i = 0; i < n; ++i) {
        double x = c * (i - alpha);
        double s = x == 0.0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
        h[i] = c * s * w[i];
    }
    return h;
}

double reconstruction_loss(const std::vector<double>& h, int bands)
{
    const int n = static_cast<int>(h.size());
    double worst = 0.0;
    for (int lag = 2 * bands; lag <= n - 1; lag += 2 * bands) {
        double acc = 0.0;
        for (int i = lag; i < n; ++i)
            acc += h[i] * h[i - lag];
        worst = std::max(worst, std::abs(acc));
    }
    return worst;
}

ScalarMinimum nelder_mead(const std::function<double(double)>& f, double x0, double xatol, double fatol,
                          int maxiter, int maxfun)
{
    const double rho = 1.0, chi = 2.0, psi = 0.5, sigma = 0.5;
    int calls = 0;
    auto eval = [&](double x) {
        ++calls;
        return f(x);
    };
    double sim[2] = {x0, x0 != 0.0 ? 1.05 * x0 : 0.00025};
    double fs[2] = {eval(sim[0]), eval(sim[1])};
    auto order = [&]() {
        if (fs[1] < fs[0]) {
            std::swap(fs[0], fs[1]);
            std::swap(sim[0], sim[1]);
        }
    };
    order();
    int iterations = 1;
    while (calls < maxfun && iterations < maxiter) {
        if (std::abs(sim[1] - sim[0]) <= xatol && std::abs(fs[0] - fs[1]) <= fatol)
            break;
        const double xbar = sim[0];
        const double xr = (1 + rho) * xbar - rho * sim[1];
        if (calls >= maxfun)
            break;
        const double fxr = eval(xr);
        bool shrink = false;
        if (fxr < fs[0]) {
            if (calls >= maxfun)
                break;
            const double xe = (1 + rho * chi) * xbar - rho * chi * sim[1];
            const double fxe = eval(xe);
            if (fxe < fxr) {
                sim[1] = xe;
                fs[1] = fxe;
            } else {
                sim[1] = xr;
                fs[1] = fxr;
            }
        } else {
            // with two vertices the second-worst is the best one, so a plain
            // reflection is never accepted here
            if (fxr < fs[1]) {
                if (calls >= maxfun)
                    break;
                const double xc = (1 + psi * rho) * xbar - psi * rho * sim[1];
                const double fxc = eval(xc);
                if (fxc <= fxr) {
                    sim[1] = xc;
                    fs[1] = fxc;
                } else {
                    shrink = true;
                }
            } else {
                if (calls >= maxfun)
                    break;
                const double xcc = (1 - psi) * xbar + psi * sim[1];
                const double fxcc = eval(xcc);
                if (fxcc < fs[1]) {
                    sim[1] = xcc;
                    fs[1] = fxcc;
                } else {
                    shrink = true;
                }
            }
            if (shrink) {
                if (calls >= maxfun)
                    break;
                sim[1] = sim[0] + sigma * (sim[1] - sim[0]);
                fs[1] = eval(sim[1]);
            }
        }
        order();
        ++iterations;
    }
    return {sim[0], fs[0], iterations, calls};
}

} // namespace pqmf_detail

namespace {

using namespace pqmf_detail;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

void check_fb(const FilterbankSpec& fb)
{
    if (!is_pow2(fb.bands))
        throw ValidationError("filterbank: bands must be a power of two");
    if (!(fb.attenuation_db >= 30.0 && fb.attenuation_db <= 120.0))
        throw DesignRangeError("filterbank: attenuation_db must lie in [30, 120] dB");
}

std::vector<double> optimize_prototype(double atten, int bands, int fixed_taps, double beta, double& wc_out)
{
    auto taps_for = [&](double w) { return fixed_taps > 0 ? fixed_taps : kaiser_taps(atten, w / std::numbers::pi); };
    auto loss = [&](double w) {
        if (!(w > 1e-6) || w >= std::numbers::pi)
            return 1e9;
        auto h = kaiser_lowpass(taps_for(w), w, beta);
        if (fixed_taps == 0)
            return reconstruction_loss(h, bands);
        // at a fixed length the raw loss is minimized by shrinking the
        // filter towards zero, so compare against the zero-lag tap
        double e = 0;
        for (double v : h)
            e += v * v;
        return reconstruction_loss(h, bands) / e;
    };
    auto best = nelder_mead(loss, 1.0 / bands);
    wc_out = best.x;
    return kaiser_lowpass(taps_for(best.x), best.x, beta);
}

PqmfBank build(const FilterbankSpec& fb)
{
    check_fb(fb);
    PqmfBank bank;
    bank.bands = fb.bands;
    bank.attenuation_db = fb.attenuation_db;
    if (fb.bands == 1) {
        bank.prototype = {1.0};
        bank.analysis = {1.0};
        bank.synthesis = {1.0};
        bank.design_taps = 1;
        bank.group_delay_samples = 0;
        return bank;
    }
    const int M = fb.bands;
    const double A = fb.attenuation_db;
    double beta = kaiser_beta(A);
    double wc = 0;
    auto h = optimize_prototype(A, M, 0, beta, wc);
    const int n0 = static_cast<int>(h.size());
    // The Kaiser estimate can fall slightly short of the requested
    // attenuation at low orders. Widen the window at fixed length until the
    // measured stopband is within 1 dB of the target.
    for (int step = 1; stopband_attenuation_db(h, M) < A - 1.0 && step <= 80; ++step) {
        beta = kaiser_beta(A + 0.5 * step);
        h = optimize_prototype(A, M, n0, beta, wc);
    }
    int len = 1;
    while (len < n0)
        len *= 2;
    len += 1;
    const int pad = (len - n0) / 2;
    bank.prototype.assign(len, 0.0);
    std::copy(h.begin(), h.end(), bank.prototype.begin() + pad);
    bank.cutoff = wc;
    bank.beta = beta;
    bank.design_taps = n0;
    bank.group_delay_samples = (len - 1) / 2;

    bank.analysis.assign(static_cast<size_t>(M) * len, 0.0);
    bank.synthesis.assign(static_cast<size_t>(M) * len, 0.0);
    const double gain = 2.0 * std::sqrt(static_cast<double>(M));
    const double mid = 0.5 * (len - 1);
    for (int k = 0; k < M; ++k) {
        const double phase = (k % 2 == 0 ? 1.0 : -1.0) * std::numbers::pi / 4.0;
        for (int n = pad; n < pad + n0; ++n) {
            const double t = n - mid;
            const double a = gain * bank.prototype[n] *
                             std::cos((2 * k + 1) * std::numbers::pi / (2.0 * M) * t + phase);
            bank.analysis[static_cast<size_t>(k) * len + n] = a;
            bank.synthesis[static_cast<size_t>(k) * len + (len - 1 - n)] = a;
        }
    }
    return bank;
}

struct Cache {
    std::mutex mu;
    std::map<std::pair<int, double>, std::shared_ptr<const PqmfBank>> banks;
};

Cache& cache()
{
    static Cache c;
    return c;
}

} // namespace

std::shared_ptr<const PqmfBank> design_shared(const FilterbankSpec& fb)
{
    check_fb(fb);
    auto key = std::make_pair(fb.bands, fb.bands == 1 ? 0.0 : fb.attenuation_db);
    auto& c = cache();
    {
        std::lock_guard<std::mutex> lock(c.mu);
        auto it = c.banks.find(key);
        if (it != c.banks.end())
            return it->second;
    }
    auto bank = std::make_shared<const PqmfBank>(build(fb));
    std::lock_guard<std::mutex> lock(c.mu);
    return c.banks.emplace(key, bank).first->second;
}

PqmfBank design(const FilterbankSpec& fb) { return *design_shared(fb); }

double stopband_attenuation_db(const std::vector<double>& h, int bands, int points)
{
    auto response = [&](double w) {
        double re = 0, im = 0;
        for (size_t n = 0; n < h.size(); ++n) {
            re += h[n] * std::cos(w * n);
            im -= h[n] * std::sin(w * n);
        }
        return std::hypot(re, im);
    };
    const double dc = response(0.0);
    const double lo = std::numbers::pi / bands;
    double worst = 0;
    for (int i = 0; i < points; ++i) {
        double w = lo + (std::numbers::pi - lo) * i / (points - 1);
        worst = std::max(worst, response(w));
    }
    if (worst <= 0)
        return kSnrCapDb;
    return std::min(kSnrCapDb, -20.0 * std::log10(worst / dc));
}

std::vector<double> prototype_response_db(const PqmfBank& bank, double omega_lo, int points)
{
    const auto& h = bank.prototype;
    auto response = [&](double w) {
        double re = 0, im = 0;
        for (size_t n = 0; n < h.size(); ++n) {
            re += h[n] * std::cos(w * n);
            im -= h[n] * std::sin(w * n);
        }
        return std::hypot(re, im);
    };
    const double dc = response(0.0);
    std::vector<double> out(points);
    for (int i = 0; i < points; ++i) {
        double w = points == 1 ? omega_lo : omega_lo + (std::numbers::pi - omega_lo) * i / (points - 1);
        out[i] = 20.0 * std::log10(std::max(response(w) / dc, 1e-300));
    }
    return out;
}

TensorBlock analyze(const PqmfBank& bank, const std::vector<float>& audio)
{
    std::vector<float> x = audio;
    const size_t M = bank.bands;
    x.resize((x.size() + M - 1) / M * M, 0.0f);
    if (bank.passthrough())
        return TensorBlock::mono(x);
    auto conv = pqmf_detail::analysis_stage(bank);
    TensorBlock out;
    conv->process(TensorBlock::mono(x), out);
    return out;
}

std::vector<float> synthesize(const PqmfBank& bank, const TensorBlock& frames)
{
    if (frames.channels != bank.bands)
        throw ShapeError("synthesize: expected " + std::to_string(bank.bands) + " channels, got " +
                         std::to_string(frames.channels));
    if (bank.passthrough())
        return frames.data;
    auto tconv = pqmf_detail::synthesis_stage(bank);
    TensorBlock out;
    tconv->process(frames, out);
    return out.data;
}

BankReport measure_bank(const PqmfBank& bank)
{
    BankReport r;
    if (bank.passthrough()) {
        r.stopband_db = kSnrCapDb;
        r.roundtrip_snr_db = kSnrCapDb;
        r.roundtrip_delay_samples = 0;
        r.energy_ratio_db = 0;
        return r;
    }
    r.stopband_db = stopband_attenuation_db(bank.prototype, bank.bands, 16384);

    // delay from the impulse response peak
    const int L = bank.length();
    {
        std::vector<float> imp(static_cast<size_t>(4 * L) / bank.bands * bank.bands, 0.0f);
        imp[0] = 1.0f;
        auto y = synthesize(bank, analyze(bank, imp));
        size_t arg = 0;
        for (size_t i = 1; i < y.size(); ++i)
            if (std::abs(y[i]) > std::abs(y[arg]))
                arg = i;
        r.roundtrip_delay_samples = static_cast<int>(arg);
    }

    Rng rng(0x51f15eedULL);
    const size_t n = 1 << 16;
    std::vector<float> x(n);
    for (auto& v : x)
        v = static_cast<float>(rng.normal());
    auto frames = analyze(bank, x);
    double ein = 0, eband = 0;
    for (float v : x)
        ein += double(v) * v;
    for (float v : frames.data)
        eband += double(v) * v;
    r.energy_ratio_db = 10.0 * std::log10(eband / ein);
    auto y = synthesize(bank, frames);
    const size_t d = r.roundtrip_delay_samples;
    double es = 0, ee = 0;
    for (size_t t = d; t < n; ++t) {
        double ref = x[t - d];
        double err = y[t] - ref;
        es += ref * ref;
        ee += err * err;
    }
    r.roundtrip_snr_db = ee > 0 ? std::min(kSnrCapDb, 10.0 * std::log10(es / ee)) : kSnrCapDb;
    return r;
}

namespace pqmf_detail {

std::unique_ptr<stage::Conv> analysis_stage(const PqmfBank& bank)
{
    const int M = bank.bands, n0 = bank.design_taps, pad = bank.support_offset();
    std::vector<float> w(static_cast<size_t>(M) * n0);
    for (int k = 0; k < M; ++k)
        for (int j = 0; j < n0; ++j)
            w[static_cast<size_t>(k) * n0 + j] = static_cast<float>(bank.analysis_tap(k, pad + j));
    return std::make_unique<stage::Conv>(1, M, n0, M, 1, pad, w.data(), nullptr);
}

std::unique_ptr<stage::TransposedConv> synthesis_stage(const PqmfBank& bank)
{
    const int M = bank.bands, n0 = bank.design_taps, pad = bank.support_offset();
    std::vector<float> w(static_cast<size_t>(M) * n0);
    for (int k = 0; k < M; ++k)
        for (int j = 0; j < n0; ++j)
            w[static_cast<size_t>(k) * n0 + j] = static_cast<float>(bank.synthesis_tap(k, pad + j));
    return std::make_unique<stage::TransposedConv>(M, 1, n0, M, pad, w.data(), nullptr);
}

} // namespace pqmf_detail

nlohmann::json bank_to_json(const PqmfBank& bank)
{
    nlohmann::json j;
    j["bands"] = bank.bands;
    j["attenuation_db"] = bank.attenuation_db;
    j["cutoff_rad"] = bank.cutoff;
    j["kaiser_beta"] = bank.beta;
    j["prototype_length"] = bank.length();
    j["design_taps"] = bank.design_taps;
    j["support_offset"] = bank.support_offset();
    j["group_delay_samples"] = bank.group_delay_samples;
    j["prototype"] = bank.prototype;
    return j;
}

PqmfAnalyzer::PqmfAnalyzer(std::shared_ptr<const PqmfBank> bank) : bank_(std::move(bank))
{
    if (!bank_->passthrough())
        conv_ = pqmf_detail::analysis_stage(*bank_);
}
PqmfAnalyzer::~PqmfAnalyzer() = default;
PqmfAnalyzer::PqmfAnalyzer(PqmfAnalyzer&&) noexcept = default;
PqmfAnalyzer& PqmfAnalyzer::operator=(PqmfAnalyzer&&) noexcept = default;

TensorBlock PqmfAnalyzer::process(const std::vector<float>& samples)
{
    if (samples.size() % bank_->bands != 0)
        throw InfeasibleBlockError("pqmf analyzer: block must be a multiple of the band count");
    if (!conv_)
        return TensorBlock::mono(samples);
    TensorBlock out;
    conv_->process(TensorBlock::mono(samples), out);
    return out;
}

void PqmfAnalyzer::reset()
{
    if (conv_)
        conv_->reset();
}

PqmfSynthesizer::PqmfSynthesizer(std::shared_ptr<const PqmfBank> bank) : bank_(std::move(bank))
{
    if (!bank_->passthrough())
        tconv_ = pqmf_detail::synthesis_stage(*bank_);
}
PqmfSynthesizer::~PqmfSynthesizer() = default;
PqmfSynthesizer::PqmfSynthesizer(PqmfSynthesizer&&) noexcept = default;
PqmfSynthesizer& PqmfSynthesizer::operator=(PqmfSynthesizer&&) noexcept = default;

std::vector<float> PqmfSynthesizer::process(const TensorBlock& frames)
{
    if (frames.channels != bank_->bands)
        throw ShapeError("pqmf synthesizer: channel count must equal bands");
    if (!tconv_)
        return frames.data;
    TensorBlock out;
    tconv_->process(frames, out);
    return out.data;
}

void PqmfSynthesizer::reset()
{
    if (tconv_)
        tconv_->reset();
}

} // namespace lowlat
