#include "lowlat/timbreval.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>

#include <Eigen/Dense>

#include "lowlat/error.hpp"
#include "lowlat/fft.hpp"
#include "lowlat/rng.hpp"

namespace lowlat {

FeatureRows mfcc_frames(const std::vector<float>& audio, const TextureParams& p)
{
    const int n = p.fft_size, bins = n / 2 + 1, nm = p.mel_bands;
    if (static_cast<int64_t>(audio.size()) < n)
        throw InsufficientLengthError("mfcc: audio shorter than one fft frame");
    if (p.first_coefficient + p.coefficients > nm)
        throw ValidationError("mfcc: more coefficients than mel bands");
    const int64_t frames = (static_cast<int64_t>(audio.size()) - n) / p.hop + 1;
    const auto win = hann_window(n);
    const auto fb = mel_filterbank(nm, n, p.sample_rate, 0.0, p.sample_rate / 2);
    // orthonormal DCT-II rows for the kept coefficients
    Eigen::MatrixXd dct(p.coefficients, nm);
    for (int r = 0; r < p.coefficients; ++r) {
        const int k = p.first_coefficient + r;
        const double s = std::sqrt((k == 0 ? 1.0 : 2.0) / nm);
        for (int i = 0; i < nm; ++i)
            dct(r, i) = s * std::cos(std::numbers::pi * k * (2 * i + 1) / (2.0 * nm));
    }
    RealFft fft(n);
    std::vector<double> buf(n);
    std::vector<std::complex<double>> spec(bins);
    Eigen::VectorXd logmel(nm);
    FeatureRows out(frames);
    for (int64_t t = 0; t < frames; ++t) {
        const float* x = audio.data() + t * p.hop;
        for (int i = 0; i < n; ++i)
            buf[i] = x[i] * win[i];
        fft.forward(buf.data(), spec.data());
        for (int m = 0; m < nm; ++m) {
            const double* row = fb.data() + static_cast<size_t>(m) * bins;
            double acc = 0;
            for (int k = 0; k < bins; ++k)
                acc += row[k] * std::norm(spec[k]);
            logmel[m] = std::log(std::max(acc, 1e-10));
        }
        Eigen::VectorXd c = dct * logmel;
        out[t].assign(c.data(), c.data() + c.size());
    }
    return out;
}

TextureWindowSet mfcc_textures(const std::vector<float>& audio, const std::string& source_id, const TextureParams& p)
{
    if (static_cast<int64_t>(audio.size()) < static_cast<int64_t>(p.pool_frames) * p.hop + p.fft_size)
        throw InsufficientLengthError("mfcc_textures: need at least " +
                                      std::to_string(p.pool_frames * p.hop + p.fft_size) + " samples");
    const auto frames = mfcc_frames(audio, p);
    TextureWindowSet set;
    set.source_id = source_id;
    set.params = p;
    const int64_t count = (static_cast<int64_t>(frames.size()) - p.pool_frames) / p.pool_hop + 1;
    for (int64_t w = 0; w < count; ++w) {
        std::vector<double> v(p.coefficients, 0.0);
        for (int f = 0; f < p.pool_frames; ++f)
            for (int c = 0; c < p.coefficients; ++c)
                v[c] += frames[w * p.pool_hop + f][c];
        for (auto& x : v)
            x /= p.pool_frames;
        set.windows.push_back(std::move(v));
    }
    return set;
}

TextureWindowSet merge(const std::vector<TextureWindowSet>& sets, const std::string& source_id)
{
    TextureWindowSet out;
    out.source_id = source_id;
    if (!sets.empty())
        out.params = sets.front().params;
    for (const auto& s : sets)
        out.windows.insert(out.windows.end(), s.windows.begin(), s.windows.end());
    return out;
}

namespace {

Eigen::MatrixXd to_matrix(const FeatureRows& rows)
{
    const int d = rows.empty() ? 0 : static_cast<int>(rows.front().size());
    Eigen::MatrixXd m(rows.size(), d);
    for (size_t i = 0; i < rows.size(); ++i) {
        if (static_cast<int>(rows[i].size()) != d)
            throw ShapeError("feature rows have inconsistent dimension");
        for (int j = 0; j < d; ++j)
            m(i, j) = rows[i][j];
    }
    return m;
}

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
    const Eigen::VectorXd na = a.rowwise().squaredNorm();
    const Eigen::VectorXd nb = b.rowwise().squaredNorm();
    Eigen::MatrixXd d = (-2.0 * a * b.transpose()).colwise() + na;
    d.rowwise() += nb.transpose();
    return d.cwiseMax(0.0);
}

} // namespace

double median_pairwise_distance(const FeatureRows& pooled)
{
    const size_t n = pooled.size();
    if (n < 2)
        throw SampleSizeError("median distance needs at least two samples");
    std::vector<double> d;
    d.reserve(n * (n - 1) / 2);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) {
            double s = 0;
            for (size_t k = 0; k < pooled[i].size(); ++k) {
                const double e = pooled[i][k] - pooled[j][k];
                s += e * e;
            }
            d.push_back(std::sqrt(s));
        }
    const size_t mid = d.size() / 2;
    std::nth_element(d.begin(), d.begin() + mid, d.end());
    if (d.size() % 2 == 1)
        return d[mid];
    const double hi = d[mid];
    const double lo = *std::max_element(d.begin(), d.begin() + mid);
    return 0.5 * (lo + hi);
}

MmdResult mmd_squared(const FeatureRows& x, const FeatureRows& y, std::optional<double> sigma)
{
    if (x.size() < 2 || y.size() < 2)
        throw SampleSizeError("mmd needs at least two samples per set, got " + std::to_string(x.size()) + " and " +
                              std::to_string(y.size()));
    if (x.front().size() != y.front().size())
        throw ShapeError("mmd: feature dimensions differ");
    MmdResult r;
    r.n = static_cast<int>(x.size());
    r.m = static_cast<int>(y.size());
    if (sigma) {
        if (!(*sigma > 0))
            throw ValidationError("mmd: sigma must be positive");
        r.sigma = *sigma;
    } else {
        FeatureRows pooled = x;
        pooled.insert(pooled.end(), y.begin(), y.end());
        r.sigma = median_pairwise_distance(pooled);
        // all samples identical: every kernel value is 1 whatever sigma is
        if (!(r.sigma > 0))
            r.sigma = 1.0;
    }
    const auto X = to_matrix(x), Y = to_matrix(y);
    const double scale = -1.0 / (2.0 * r.sigma);
    auto kernel_sum = [&](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, bool skip_diag) {
        Eigen::MatrixXd k = (squared_distances(a, b) * scale).array().exp().matrix();
        double s = k.sum();
        if (skip_diag)
            s -= k.diagonal().sum();
        return s;
    };
    const double n = r.n, m = r.m;
    r.mmd2 = kernel_sum(X, X, true) / (n * (n - 1)) + kernel_sum(Y, Y, true) / (m * (m - 1)) -
             2.0 * kernel_sum(X, Y, false) / (n * m);
    return r;
}

SimilarityResult similarity_protocol(const FeatureRows& test, const FeatureRows& reference,
                                     const FeatureRows& transferred, uint64_t seed, int splits)
{
    if (test.size() < 4 || reference.size() < 4 || transferred.size() < 2)
        throw SampleSizeError("similarity protocol needs at least 4 windows in the test and reference sets");
    if (splits < 1)
        throw ValidationError("similarity protocol needs at least one split");
    SimilarityResult r;
    r.splits = splits;
    r.to_input = mmd_squared(transferred, test).mmd2;
    r.to_target = mmd_squared(transferred, reference).mmd2;
    r.cross = mmd_squared(test, reference).mmd2;
    auto self = [&](const FeatureRows& set, uint64_t stream) {
        double acc = 0;
        for (int s = 0; s < splits; ++s) {
            Rng rng(derive_seed(seed, stream, s));
            std::vector<size_t> idx(set.size());
            std::iota(idx.begin(), idx.end(), 0);
            for (size_t i = idx.size() - 1; i > 0; --i)
                std::swap(idx[i], idx[rng.uniform_int(0, static_cast<int64_t>(i))]);
            const size_t half = set.size() / 2;
            FeatureRows a, b;
            for (size_t i = 0; i < idx.size(); ++i)
                (i < half ? a : b).push_back(set[idx[i]]);
            acc += mmd_squared(a, b).mmd2;
        }
        return acc / splits;
    };
    r.self_test = self(test, 1);
    r.self_ref = self(reference, 2);
    return r;
}

double a_weighting_db(double f)
{
    if (f <= 0)
        return -std::numeric_limits<double>::infinity();
    const double f2 = f * f;
    const double ra = (12194.0 * 12194.0 * f2 * f2) /
                      ((f2 + 20.6 * 20.6) * std::sqrt((f2 + 107.7 * 107.7) * (f2 + 737.9 * 737.9)) *
                       (f2 + 12194.0 * 12194.0));
    return 20.0 * std::log10(ra) + 2.0;
}

LoudnessCurve loudness_curve(const std::vector<float>& audio, double sample_rate)
{
    if (audio.empty())
        throw InsufficientLengthError("loudness: empty audio");
    LoudnessCurve c;
    const int n = c.fft_size, bins = n / 2 + 1;
    std::vector<float> x = audio;
    if (static_cast<int>(x.size()) < n)
        x.resize(n, 0.0f);
    const int64_t frames = (static_cast<int64_t>(x.size()) - n) / c.hop + 1;
    std::vector<double> w(bins);
    for (int k = 0; k < bins; ++k)
        w[k] = k == 0 ? 0.0 : std::pow(10.0, a_weighting_db(k * sample_rate / n) / 10.0);
    const auto win = hann_window(n);
    RealFft fft(n);
    std::vector<double> buf(n);
    std::vector<std::complex<double>> spec(bins);
    c.db.resize(frames);
    for (int64_t t = 0; t < frames; ++t) {
        for (int i = 0; i < n; ++i)
            buf[i] = x[t * c.hop + i] * win[i];
        fft.forward(buf.data(), spec.data());
        double acc = 0;
        for (int k = 0; k < bins; ++k)
            acc += std::norm(spec[k]) * w[k];
        acc /= bins;
        c.db[t] = acc > 0 ? std::max(-120.0, 10.0 * std::log10(acc)) : -120.0;
    }
    return c;
}

double loudness_l1(const LoudnessCurve& a, const LoudnessCurve& b, bool* truncated)
{
    const size_t n = std::min(a.db.size(), b.db.size());
    if (n == 0)
        throw InsufficientLengthError("loudness L1: empty curve");
    if (truncated)
        *truncated = a.db.size() != b.db.size();
    double s = 0;
    for (size_t i = 0; i < n; ++i)
        s += std::abs(a.db[i] - b.db[i]);
    return s / n;
}

double pitch_accuracy(const PitchTrack& in, const PitchTrack& out, double conf_threshold, double tol_semitones)
{
    if (in.empty() || out.empty())
        throw InsufficientLengthError("pitch accuracy: empty track");
    const double lo = out.front().t, hi = out.back().t;
    const double half = 0.5 / 200.0;
    size_t j = 0, frames = 0, correct = 0;
    for (const auto& f : in) {
        if (f.t < lo - half || f.t > hi + half)
            continue;
        while (j + 1 < out.size() && std::abs(out[j + 1].t - f.t) <= std::abs(out[j].t - f.t))
            ++j;
        const auto& g = out[j];
        const bool vi = f.conf >= conf_threshold && f.f0 > 0;
        const bool vo = g.conf >= conf_threshold && g.f0 > 0;
        ++frames;
        if (vi != vo)
            continue;
        if (!vi || std::abs(1200.0 * std::log2(g.f0 / f.f0)) <= 100.0 * tol_semitones)
            ++correct;
    }
    if (frames == 0)
        throw InsufficientLengthError("pitch accuracy: tracks do not overlap in time");
    return static_cast<double>(correct) / frames;
}

PitchTrack yin_f0(const std::vector<float>& audio, const YinParams& p)
{
    const int W = p.window, L = p.max_lag;
    int nfft = 1;
    while (nfft < W + L)
        nfft *= 2;
    RealFft fft(nfft);
    const int bins = nfft / 2 + 1;
    std::vector<double> a(nfft), b(nfft), r(nfft);
    std::vector<std::complex<double>> fa(bins), fb(bins);
    std::vector<double> d(L), dn(L);
    const double step = p.sample_rate / p.frame_rate;
    const int64_t n = static_cast<int64_t>(audio.size());
    auto sample = [&](int64_t i) { return i < n ? static_cast<double>(audio[i]) : 0.0; };

    PitchTrack track;
    for (int64_t k = 0;; ++k) {
        const int64_t s = static_cast<int64_t>(std::floor(k * step));
        if (s >= n)
            break;
        PitchFrame fr;
        fr.t = k / p.frame_rate;
        std::fill(a.begin(), a.end(), 0.0);
        for (int i = 0; i < W; ++i)
            a[i] = sample(s + i);
        for (int i = 0; i < W + L; ++i)
            b[i] = sample(s + i);
        std::fill(b.begin() + W + L, b.end(), 0.0);
        // r[tau] = sum_j a[j] b[j + tau]
        fft.forward(a.data(), fa.data());
        fft.forward(b.data(), fb.data());
        for (int q = 0; q < bins; ++q)
            fb[q] *= std::conj(fa[q]);
        fft.inverse(fb.data(), r.data());
        double e0 = 0;
        for (int i = 0; i < W; ++i)
            e0 += b[i] * b[i];
        double et = e0;
        for (int tau = 0; tau < L; ++tau) {
            if (tau > 0)
                et += b[W + tau - 1] * b[W + tau - 1] - b[tau - 1] * b[tau - 1];
            d[tau] = std::max(0.0, e0 + et - 2.0 * r[tau] / nfft);
        }
        dn[0] = 1.0;
        double run = 0;
        for (int tau = 1; tau < L; ++tau) {
            run += d[tau];
            dn[tau] = run > 0 ? d[tau] * tau / run : 1.0;
        }
        int best = -1;
        for (int tau = 2; tau < L; ++tau)
            if (dn[tau] < p.threshold) {
                while (tau + 1 < L && dn[tau + 1] < dn[tau])
                    ++tau;
                best = tau;
                break;
            }
        if (best < 0) {
            best = 2;
            for (int tau = 3; tau < L; ++tau)
                if (dn[tau] < dn[best])
                    best = tau;
        }
        double lag = best;
        double val = dn[best];
        if (best > 1 && best + 1 < L) {
            const double y0 = dn[best - 1], y1 = dn[best], y2 = dn[best + 1];
            const double den = y0 - 2 * y1 + y2;
            if (den > 0) {
                const double off = 0.5 * (y0 - y2) / den;
                lag = best + off;
                val = y1 - 0.25 * (y0 - y2) * off;
            }
        }
        fr.conf = std::clamp(1.0 - val, 0.0, 1.0);
        fr.f0 = run > 0 ? p.sample_rate / lag : 0.0;
        if (run <= 0)
            fr.conf = 0.0;
        track.push_back(fr);
    }
    return track;
}

namespace {

struct Biquad {
    double b0, b1, b2, a1, a2;
    double z1 = 0, z2 = 0;
    double operator()(double x)
    {
        const double y = b0 * x + z1;
        z1 = b1 * x - a1 * y + z2;
        z2 = b2 * x - a2 * y;
        return y;
    }
};

// K-weighting for an arbitrary rate, from the analog prototypes.
std::pair<Biquad, Biquad> k_weighting(double fs)
{
    double f0 = 1681.974450955533, G = 3.999843853973347, Q = 0.7071752369554196;
    double K = std::tan(std::numbers::pi * f0 / fs);
    const double Vh = std::pow(10.0, G / 20.0);
    const double Vb = std::pow(Vh, 0.4996667741545416);
    double a0 = 1.0 + K / Q + K * K;
    Biquad shelf{(Vh + Vb * K / Q + K * K) / a0, 2.0 * (K * K - Vh) / a0, (Vh - Vb * K / Q + K * K) / a0,
                 2.0 * (K * K - 1.0) / a0, (1.0 - K / Q + K * K) / a0};
    f0 = 38.13547087602444;
    Q = 0.5003270373238773;
    K = std::tan(std::numbers::pi * f0 / fs);
    a0 = 1.0 + K / Q + K * K;
    Biquad hp{1.0, -2.0, 1.0, 2.0 * (K * K - 1.0) / a0, (1.0 - K / Q + K * K) / a0};
    return {shelf, hp};
}

} // namespace

double integrated_lufs(const std::vector<float>& audio, double fs)
{
    auto [shelf, hp] = k_weighting(fs);
    std::vector<double> z(audio.size());
    for (size_t i = 0; i < audio.size(); ++i) {
        const double y = hp(shelf(audio[i]));
        z[i] = y * y;
    }
    const int64_t block = std::llround(0.4 * fs);
    const int64_t step = std::llround(0.1 * fs);
    std::vector<double> power;
    std::vector<double> prefix(z.size() + 1, 0.0);
    for (size_t i = 0; i < z.size(); ++i)
        prefix[i + 1] = prefix[i] + z[i];
    for (int64_t s = 0; s + block <= static_cast<int64_t>(z.size()); s += step)
        power.push_back((prefix[s + block] - prefix[s]) / block);
    auto lufs = [](double p) { return -0.691 + 10.0 * std::log10(p); };
    double sum = 0;
    int count = 0;
    for (double p : power)
        if (p > 0 && lufs(p) > -70.0) {
            sum += p;
            ++count;
        }
    if (count == 0)
        throw UndefinedLoudnessError("integrated loudness undefined: every block is below the -70 LUFS gate");
    const double relative = lufs(sum / count) - 10.0;
    sum = 0;
    count = 0;
    for (double p : power)
        if (p > 0 && lufs(p) > -70.0 && lufs(p) > relative) {
            sum += p;
            ++count;
        }
    if (count == 0)
        throw UndefinedLoudnessError("integrated loudness undefined: every block is below the relative gate");
    return lufs(sum / count);
}

std::vector<float> normalize_to_lufs(const std::vector<float>& audio, double target, double fs)
{
    const double g = std::pow(10.0, (target - integrated_lufs(audio, fs)) / 20.0);
    std::vector<float> out(audio.size());
    for (size_t i = 0; i < audio.size(); ++i)
        out[i] = static_cast<float>(audio[i] * g);
    return out;
}

nlohmann::json similarity_report(const TextureWindowSet& test, const TextureWindowSet& reference,
                                 const TextureWindowSet& transferred, uint64_t seed)
{
    auto j = to_json(similarity_protocol(test.windows, reference.windows, transferred.windows, seed));
    j["windows"] = {{"test", test.windows.size()},
                    {"ref", reference.windows.size()},
                    {"transferred", transferred.windows.size()}};
    return j;
}

nlohmann::json loudness_report(const std::vector<float>& a, const std::vector<float>& b, double sample_rate)
{
    bool truncated = false;
    const double l1 = loudness_l1(loudness_curve(a, sample_rate), loudness_curve(b, sample_rate), &truncated);
    return {{"loudness_l1_db", l1}, {"truncated", truncated}};
}

nlohmann::json pitch_report(const PitchTrack& a, const PitchTrack& b, double conf_threshold, double tol_semitones)
{
    return {{"pitch_accuracy", pitch_accuracy(a, b, conf_threshold, tol_semitones)},
            {"conf_threshold", conf_threshold},
            {"tol_semitones", tol_semitones}};
}

nlohmann::json to_json(const MmdResult& r)
{
    return {{"mmd2", r.mmd2}, {"sigma", r.sigma}, {"n", r.n}, {"m", r.m}};
}

nlohmann::json to_json(const SimilarityResult& r)
{
    return {{"to_input", r.to_input}, {"to_target", r.to_target}, {"cross", r.cross},
            {"self_test", r.self_test}, {"self_ref", r.self_ref}, {"splits", r.splits}};
}

nlohmann::json to_json(const PitchTrack& t)
{
    nlohmann::json a = nlohmann::json::array();
    for (const auto& f : t)
        a.push_back({{"t", f.t}, {"f0", f.f0}, {"conf", f.conf}});
    return a;
}

PitchTrack pitch_track_from_json(const nlohmann::json& j)
{
    const auto& a = j.is_object() && j.contains("frames") ? j.at("frames") : j;
    if (!a.is_array())
        throw FormatError("pitch track must be an array of {t, f0, conf}");
    PitchTrack t;
    try {
        for (const auto& f : a)
            t.push_back({f.at("t").get<double>(), f.at("f0").get<double>(), f.at("conf").get<double>()});
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("pitch track: ") + e.what());
    }
    for (size_t i = 1; i < t.size(); ++i)
        if (!(t[i].t > t[i - 1].t))
            throw FormatError("pitch track times must be strictly increasing");
    return t;
}

} // namespace lowlat
