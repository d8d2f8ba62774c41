#pragma once

#include <cstddef>
#include <vector>

namespace lowlat {

// channels x frames, channel-major (each channel's frames are contiguous)
struct TensorBlock {
    int channels = 0;
    int frames = 0;
    std::vector<float> data;

    TensorBlock() = default;
    TensorBlock(int c, int f) : channels(c), frames(f), data(static_cast<size_t>(c) * f, 0.0f) {}

    static TensorBlock mono(const std::vector<float>& x)
    {
        TensorBlock t(1, static_cast<int>(x.size()));
        t.data = x;
        return t;
    }

    float* row(int c) { return data.data() + static_cast<size_t>(c) * frames; }
    const float* row(int c) const { return data.data() + static_cast<size_t>(c) * frames; }
    float& at(int c, int f) { return data[static_cast<size_t>(c) * frames + f]; }
    float at(int c, int f) const { return data[static_cast<size_t>(c) * frames + f]; }

    void resize(int c, int f)
    {
        channels = c;
        frames = f;
        data.assign(static_cast<size_t>(c) * f, 0.0f);
    }
};

// Double precision counterpart used by the offline reference path.
struct Signal {
    int channels = 0;
    long frames = 0;
    std::vector<double> data;

    Signal() = default;
    Signal(int c, long f) : channels(c), frames(f), data(static_cast<size_t>(c) * f, 0.0) {}

    double* row(int c) { return data.data() + static_cast<size_t>(c) * frames; }
    const double* row(int c) const { return data.data() + static_cast<size_t>(c) * frames; }
    double& at(int c, long f) { return data[static_cast<size_t>(c) * frames + f]; }
    double at(int c, long f) const { return data[static_cast<size_t>(c) * frames + f]; }
};

} // namespace lowlat
