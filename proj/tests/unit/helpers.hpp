#pragma once

#include <string>
#include <vector>

#include "lowlat/archgraph.hpp"
#include "lowlat/rng.hpp"

namespace unit {

inline const std::string kRoot = LOWLAT_SOURCE_DIR;

inline lowlat::ArchitectureSpec config(const std::string& name)
{
    return lowlat::load_spec(kRoot + "/configs/" + name + ".json");
}

inline lowlat::LayerSpec conv(int k, int cin, int cout, int stride = 1, int lookahead = 0)
{
    lowlat::LayerSpec l;
    l.kind = lowlat::LayerKind::Conv;
    l.kernel = k;
    l.stride = stride;
    l.channels_in = cin;
    l.channels_out = cout;
    l.lookahead = lookahead;
    return l;
}

inline lowlat::LayerSpec tconv(int k, int cin, int cout, int stride)
{
    auto l = conv(k, cin, cout, stride);
    l.kind = lowlat::LayerKind::TransposedConv;
    return l;
}

inline lowlat::LayerSpec residual(int k, int ch, std::vector<int> dilations)
{
    auto l = conv(k, ch, ch);
    l.kind = lowlat::LayerKind::ResidualStack;
    l.dilations = std::move(dilations);
    return l;
}

inline lowlat::LayerSpec act(int ch, lowlat::ActivationFn f = lowlat::ActivationFn::LeakyRelu)
{
    lowlat::LayerSpec l;
    l.kind = lowlat::LayerKind::Activation;
    l.function = f;
    l.channels_in = l.channels_out = ch;
    return l;
}

// Strided encoder convs (kernel 2s+1) mirrored by transposed convs.
inline lowlat::ArchitectureSpec strided_spec(int bands, const std::vector<int>& strides, double atten = 100.0)
{
    lowlat::ArchitectureSpec s;
    s.name = "strided";
    s.filterbank = {bands, atten};
    s.latent_dim = 2;
    int ch = bands;
    for (int st : strides) {
        s.encoder.push_back(conv(2 * st + 1, ch, 2, st));
        ch = 2;
    }
    if (strides.empty())
        s.encoder.push_back(conv(1, bands, 2));
    s.decoder.push_back(conv(1, 2, 2));
    for (int st : strides)
        s.decoder.push_back(st > 1 ? tconv(2 * st, 2, 2, st) : conv(1, 2, 2));
    s.decoder.push_back(conv(1, 2, bands));
    return s;
}

inline std::vector<float> noise(size_t n, uint64_t seed, double amp = 0.5)
{
    lowlat::Rng rng(seed);
    std::vector<float> x(n);
    for (auto& v : x)
        v = static_cast<float>(amp * rng.uniform(-1.0, 1.0));
    return x;
}

} // namespace unit
