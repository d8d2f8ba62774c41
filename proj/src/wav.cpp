#include "lowlat/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "lowlat/error.hpp"

namespace lowlat {

namespace {

uint32_t le32(const uint8_t* p) { return p[0] | (p[1] << 8) | (p[2] << 16) | (uint32_t(p[3]) << 24); }
uint16_t le16(const uint8_t* p) { return static_cast<uint16_t>(p[0] | (p[1] << 8)); }

void put32(std::string& s, uint32_t v)
{
    for (int i = 0; i < 4; ++i)
        s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put16(std::string& s, uint16_t v)
{
    s.push_back(static_cast<char>(v & 0xff));
    s.push_back(static_cast<char>(v >> 8));
}

} // namespace

WavData read_wav(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw FormatError("cannot open '" + path + "'");
    std::vector<uint8_t> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 || std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
        throw FormatError(path + ": not a RIFF/WAVE file");

    WavData w;
    int fmt_tag = 0, bits = 0, block_align = 0;
    bool have_fmt = false;
    const uint8_t* data = nullptr;
    size_t data_len = 0;
    size_t pos = 12;
    while (pos + 8 <= buf.size()) {
        const uint8_t* ck = buf.data() + pos;
        const size_t len = le32(ck + 4);
        const size_t body = pos + 8;
        if (body + len > buf.size() && std::memcmp(ck, "data", 4) != 0)
            throw FormatError(path + ": truncated chunk");
        if (std::memcmp(ck, "fmt ", 4) == 0) {
            if (len < 16)
                throw FormatError(path + ": short fmt chunk");
            fmt_tag = le16(ck + 8);
            w.channels = le16(ck + 10);
            w.sample_rate = static_cast<int>(le32(ck + 12));
            block_align = le16(ck + 20);
            bits = le16(ck + 22);
            if (fmt_tag == 0xFFFE && len >= 40)
                fmt_tag = le16(ck + 8 + 24);
            have_fmt = true;
        } else if (std::memcmp(ck, "data", 4) == 0) {
            data = buf.data() + body;
            data_len = std::min(len, buf.size() - body);
        }
        pos = body + len + (len & 1);
    }
    if (!have_fmt || !data)
        throw FormatError(path + ": missing fmt or data chunk");
    if (w.channels < 1)
        throw FormatError(path + ": zero channels");

    if (fmt_tag == 1 && bits == 16)
        w.encoding = WavEncoding::Pcm16;
    else if (fmt_tag == 1 && bits == 24)
        w.encoding = WavEncoding::Pcm24;
    else if (fmt_tag == 3 && bits == 32)
        w.encoding = WavEncoding::Float32;
    else
        throw FormatError(path + ": unsupported encoding (format " + std::to_string(fmt_tag) + ", " +
                          std::to_string(bits) + " bits); use 16/24-bit PCM or 32-bit float");
    const int bytes = bits / 8;
    if (block_align != bytes * w.channels)
        throw FormatError(path + ": inconsistent block alignment");

    const size_t n = data_len / bytes;
    w.samples.resize(n - n % w.channels);
    for (size_t i = 0; i < w.samples.size(); ++i) {
        const uint8_t* p = data + i * bytes;
        switch (w.encoding) {
        case WavEncoding::Pcm16:
            w.samples[i] = static_cast<int16_t>(le16(p)) / 32768.0f;
            break;
        case WavEncoding::Pcm24: {
            int32_t v = p[0] | (p[1] << 8) | (p[2] << 16);
            if (v & 0x800000)
                v -= 1 << 24;
            w.samples[i] = v / 8388608.0f;
            break;
        }
        case WavEncoding::Float32: {
            uint32_t u = le32(p);
            float v;
            std::memcpy(&v, &u, 4);
            w.samples[i] = v;
            break;
        }
        }
    }
    return w;
}

std::vector<float> read_mono(const std::string& path, int sample_rate)
{
    auto w = read_wav(path);
    if (w.channels != 1)
        throw FormatError(path + ": mono input required, file has " + std::to_string(w.channels) + " channels");
    if (w.sample_rate != sample_rate)
        throw FormatError(path + ": sample rate " + std::to_string(w.sample_rate) + " Hz, resample to " +
                          std::to_string(sample_rate) + " Hz first");
    return std::move(w.samples);
}

void write_wav(const std::string& path, const std::vector<float>& x, int sample_rate, WavEncoding enc)
{
    const int bits = enc == WavEncoding::Pcm16 ? 16 : enc == WavEncoding::Pcm24 ? 24 : 32;
    const int bytes = bits / 8;
    const uint32_t data_len = static_cast<uint32_t>(x.size() * bytes);
    std::string s;
    s.reserve(44 + data_len);
    s += "RIFF";
    put32(s, 36 + data_len);
    s += "WAVEfmt ";
    put32(s, 16);
    put16(s, enc == WavEncoding::Float32 ? 3 : 1);
    put16(s, 1);
    put32(s, sample_rate);
    put32(s, sample_rate * bytes);
    put16(s, bytes);
    put16(s, bits);
    s += "data";
    put32(s, data_len);
    for (float v : x) {
        if (enc == WavEncoding::Float32) {
            uint32_t u;
            std::memcpy(&u, &v, 4);
            put32(s, u);
            continue;
        }
        const double c = std::clamp(static_cast<double>(v), -1.0, 1.0);
        if (enc == WavEncoding::Pcm16) {
            put16(s, static_cast<uint16_t>(static_cast<int16_t>(std::lround(std::clamp(c * 32768.0, -32768.0, 32767.0)))));
        } else {
            int32_t q = static_cast<int32_t>(std::lround(std::clamp(c * 8388608.0, -8388608.0, 8388607.0)));
            for (int i = 0; i < 3; ++i)
                s.push_back(static_cast<char>((q >> (8 * i)) & 0xff));
        }
    }
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw FormatError("cannot write '" + path + "'");
    f.write(s.data(), static_cast<std::streamsize>(s.size()));
}

} // namespace lowlat
