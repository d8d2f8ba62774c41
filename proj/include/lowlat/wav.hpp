#pragma once

#include <string>
#include <vector>

namespace lowlat {

enum class WavEncoding { Pcm16, Pcm24, Float32 };

struct WavData {
    int sample_rate = 44100;
    int channels = 1;
    WavEncoding encoding = WavEncoding::Float32;
    // interleaved, full scale = 1
    std::vector<float> samples;
};

WavData read_wav(const std::string& path);
// Mono at the given rate or a FormatError naming what differs.
std::vector<float> read_mono(const std::string& path, int sample_rate = 44100);
void write_wav(const std::string& path, const std::vector<float>& mono, int sample_rate = 44100,
               WavEncoding encoding = WavEncoding::Float32);

} // namespace lowlat
