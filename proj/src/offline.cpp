#include <algorithm>
#include <cmath>

#include "lowlat/error.hpp"
#include "lowlat/streamkernel.hpp"

namespace lowlat {

namespace {

// y[o][n] = b[o] + sum_{i,j} W[o][i][j] x[i][n*s + la - j*d]
Signal conv(const Signal& x, const WeightTensor& w, const WeightTensor& b, int rows, int kernel, int stride,
            int dilation, int la)
{
    const int cin = x.channels;
    const long nin = x.frames;
    const long nout = nin / stride;
    Signal y(rows, nout);
    for (int o = 0; o < rows; ++o) {
        double* yr = y.row(o);
        std::fill(yr, yr + nout, double(b.values[o]));
        for (int i = 0; i < cin; ++i) {
            const double* xr = x.row(i);
            for (int j = 0; j < kernel; ++j) {
                const double wv = w.values[(static_cast<size_t>(o) * cin + i) * kernel + j];
                const long off = la - long(j) * dilation;
                // valid n: 0 <= n*s + off < nin
                long n0 = off >= 0 ? 0 : (-off + stride - 1) / stride;
                long n1 = nin - off <= 0 ? 0 : (nin - off - 1) / stride + 1;
                n1 = std::min(n1, nout);
                if (stride == 1) {
                    for (long n = n0; n < n1; ++n)
                        yr[n] += wv * xr[n + off];
                } else {
                    for (long n = n0; n < n1; ++n)
                        yr[n] += wv * xr[n * stride + off];
                }
            }
        }
    }
    return y;
}

// y[o][(m - la)*s + j] += W[i][o][j] x[i][m]
Signal tconv(const Signal& x, const WeightTensor& w, const WeightTensor& b, int cout, int kernel, int stride, int la)
{
    const int cin = x.channels;
    const long nin = x.frames;
    const long nout = nin * stride;
    Signal y(cout, nout);
    for (int o = 0; o < cout; ++o)
        std::fill(y.row(o), y.row(o) + nout, double(b.values[o]));
    for (int i = 0; i < cin; ++i) {
        const double* xr = x.row(i);
        for (int o = 0; o < cout; ++o) {
            double* yr = y.row(o);
            for (int j = 0; j < kernel; ++j) {
                const double wv = w.values[(static_cast<size_t>(i) * cout + o) * kernel + j];
                for (long m = 0; m < nin; ++m) {
                    const long t = (m - la) * stride + j;
                    if (t >= 0 && t < nout)
                        yr[t] += wv * xr[m];
                }
            }
        }
    }
    return y;
}

void act(Signal& x, ActivationFn fn)
{
    if (fn == ActivationFn::Tanh) {
        for (auto& v : x.data)
            v = std::tanh(v);
    } else {
        for (auto& v : x.data)
            v = v > 0.0 ? v : kLeakySlope * v;
    }
}

Signal residual(Signal x, const LayerSpec& l, const WeightSet& ws, const std::string& prefix)
{
    for (size_t s = 0; s < l.dilations.size(); ++s) {
        const int d = l.dilations[s];
        const std::string q = prefix + "." + std::to_string(s);
        Signal a = x;
        act(a, ActivationFn::LeakyRelu);
        Signal c1 = conv(a, ws.get(q + ".dilated.weight"), ws.get(q + ".dilated.bias"), x.channels, l.kernel, 1, d,
                         l.lookahead * d);
        act(c1, ActivationFn::LeakyRelu);
        Signal c2 = conv(c1, ws.get(q + ".pointwise.weight"), ws.get(q + ".pointwise.bias"), x.channels, l.kernel, 1, 1,
                         l.lookahead);
        for (size_t i = 0; i < x.data.size(); ++i)
            x.data[i] += c2.data[i];
    }
    return x;
}

Signal analysis(const PqmfBank& bank, const std::vector<double>& audio)
{
    const int M = bank.bands;
    if (bank.passthrough()) {
        Signal s(1, static_cast<long>(audio.size()));
        s.data = audio;
        return s;
    }
    const int n0 = bank.design_taps, pad = bank.support_offset();
    const long frames = static_cast<long>(audio.size()) / M;
    Signal y(M, frames);
    for (int k = 0; k < M; ++k) {
        double* yr = y.row(k);
        for (long n = 0; n < frames; ++n) {
            double acc = 0.0;
            const long base = n * M - pad;
            for (int j = 0; j < n0; ++j) {
                const long idx = base - j;
                if (idx < 0)
                    break;
                acc += bank.analysis_tap(k, pad + j) * audio[idx];
            }
            yr[n] = acc;
        }
    }
    return y;
}

std::vector<double> synthesis(const PqmfBank& bank, const Signal& frames)
{
    const int M = bank.bands;
    if (bank.passthrough())
        return frames.data;
    const int n0 = bank.design_taps, pad = bank.support_offset();
    const long len = frames.frames * M;
    std::vector<double> out(len, 0.0);
    for (int k = 0; k < M; ++k) {
        const double* yr = frames.row(k);
        for (long m = 0; m < frames.frames; ++m) {
            const long base = m * M + pad;
            const double v = yr[m];
            for (int j = 0; j < n0 && base + j < len; ++j)
                out[base + j] += bank.synthesis_tap(k, pad + j) * v;
        }
    }
    return out;
}

int head_index(const ArchitectureSpec& spec)
{
    if (encoder_output_channels(spec) != 2 * spec.latent_dim)
        return -1;
    for (int i = static_cast<int>(spec.encoder.size()) - 1; i >= 0; --i)
        if (spec.encoder[i].kind == LayerKind::Conv)
            return i;
    return -1;
}

} // namespace

Signal offline_encode(const ArchitectureSpec& spec, const WeightSet& w, const std::vector<double>& audio)
{
    validate(spec);
    const int64_t cr = compression_ratio(spec);
    if (audio.size() % cr != 0)
        throw InfeasibleBlockError("offline_encode: length must be a multiple of the compression ratio");
    auto bank = design_shared(spec.filterbank);
    Signal x = analysis(*bank, audio);
    const int head = head_index(spec);
    for (int i = 0; i < static_cast<int>(spec.encoder.size()); ++i) {
        const auto& l = spec.encoder[i];
        if (l.kind == LayerKind::Activation) {
            act(x, l.function);
            continue;
        }
        const std::string p = "encoder." + std::to_string(i);
        const int rows = i == head ? spec.latent_dim : l.channels_out;
        x = conv(x, w.get(p + ".weight"), w.get(p + ".bias"), rows, l.kernel, l.stride, l.dilation(), l.lookahead);
    }
    return x;
}

std::vector<double> offline_decode(const ArchitectureSpec& spec, const WeightSet& w, const Signal& latents)
{
    validate(spec);
    if (latents.channels != spec.latent_dim)
        throw ShapeError("offline_decode: expected latent_dim channels");
    auto bank = design_shared(spec.filterbank);
    Signal x = latents;
    for (int i = 0; i < static_cast<int>(spec.decoder.size()); ++i) {
        const auto& l = spec.decoder[i];
        const std::string p = "decoder." + std::to_string(i);
        switch (l.kind) {
        case LayerKind::Activation:
            act(x, l.function);
            break;
        case LayerKind::Conv:
            x = conv(x, w.get(p + ".weight"), w.get(p + ".bias"), l.channels_out, l.kernel, 1, l.dilation(),
                     l.lookahead);
            break;
        case LayerKind::TransposedConv:
            x = tconv(x, w.get(p + ".weight"), w.get(p + ".bias"), l.channels_out, l.kernel, l.stride, l.lookahead);
            break;
        case LayerKind::ResidualStack:
            x = residual(std::move(x), l, w, p);
            break;
        }
    }
    return synthesis(*bank, x);
}

std::vector<double> process_offline(const ArchitectureSpec& spec, const WeightSet& w, const std::vector<double>& signal)
{
    const int64_t cr = compression_ratio(spec);
    std::vector<double> x = signal;
    x.resize((x.size() + cr - 1) / cr * cr, 0.0);
    auto y = offline_decode(spec, w, offline_encode(spec, w, x));
    y.resize(signal.size());
    return y;
}

} // namespace lowlat
