#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "lowlat/error.hpp"
#include "lowlat/rng.hpp"
#include "lowlat/streamkernel.hpp"

namespace lowlat {

namespace fs = std::filesystem;

const WeightTensor* WeightSet::find(const std::string& name) const
{
    for (const auto& t : tensors)
        if (t.name == name)
            return &t;
    return nullptr;
}

const WeightTensor& WeightSet::get(const std::string& name) const
{
    const auto* t = find(name);
    if (!t)
        throw ManifestError("missing weight tensor '" + name + "'");
    return *t;
}

int64_t WeightSet::count() const
{
    int64_t n = 0;
    for (const auto& t : tensors)
        n += static_cast<int64_t>(t.values.size());
    return n;
}

std::vector<WeightTensor> expected_tensors(const ArchitectureSpec& spec)
{
    std::vector<WeightTensor> out;
    auto add = [&](std::string name, std::vector<int> shape) {
        size_t n = 1;
        for (int d : shape)
            n *= d;
        out.push_back({std::move(name), std::move(shape), std::vector<float>(n, 0.0f)});
    };
    for (size_t i = 0; i < spec.encoder.size(); ++i) {
        const auto& l = spec.encoder[i];
        if (l.kind != LayerKind::Conv)
            continue;
        const std::string p = "encoder." + std::to_string(i);
        add(p + ".weight", {l.channels_out, l.channels_in, l.kernel});
        add(p + ".bias", {l.channels_out});
    }
    for (size_t i = 0; i < spec.decoder.size(); ++i) {
        const auto& l = spec.decoder[i];
        const std::string p = "decoder." + std::to_string(i);
        switch (l.kind) {
        case LayerKind::Conv:
            add(p + ".weight", {l.channels_out, l.channels_in, l.kernel});
            add(p + ".bias", {l.channels_out});
            break;
        case LayerKind::TransposedConv:
            add(p + ".weight", {l.channels_in, l.channels_out, l.kernel});
            add(p + ".bias", {l.channels_out});
            break;
        case LayerKind::ResidualStack:
            for (size_t s = 0; s < l.dilations.size(); ++s) {
                const std::string q = p + "." + std::to_string(s);
                add(q + ".dilated.weight", {l.channels_in, l.channels_in, l.kernel});
                add(q + ".dilated.bias", {l.channels_in});
                add(q + ".pointwise.weight", {l.channels_in, l.channels_in, l.kernel});
                add(q + ".pointwise.bias", {l.channels_in});
            }
            break;
        case LayerKind::Activation:
            break;
        }
    }
    return out;
}

WeightSet seeded_weights(const ArchitectureSpec& spec, uint64_t seed, bool zero_bias)
{
    validate(spec);
    WeightSet w;
    w.tensors = expected_tensors(spec);
    Rng rng(seed);
    // fan-in of a bias is taken from the weight tensor right before it
    double bound = 1.0;
    for (auto& t : w.tensors) {
        const bool is_bias = t.name.size() > 5 && t.name.compare(t.name.size() - 5, 5, ".bias") == 0;
        if (!is_bias) {
            // conv: [out, in, k]; transposed: [in, out, k]
            const bool transposed = t.name.rfind("decoder.", 0) == 0 && [&] {
                size_t idx = std::stoul(t.name.substr(8));
                return spec.decoder[idx].kind == LayerKind::TransposedConv;
            }();
            const int cin = transposed ? t.shape[0] : t.shape[1];
            bound = 1.0 / std::sqrt(double(cin) * t.shape[2]);
        }
        if (is_bias && zero_bias)
            continue;
        for (auto& v : t.values)
            v = static_cast<float>(rng.uniform(-bound, bound));
    }
    return w;
}

WeightSet fixture_weights(const ArchitectureSpec& spec)
{
    validate(spec);
    WeightSet w;
    w.tensors = expected_tensors(spec);
    if (spec.fixture == "identity") {
        if (!w.tensors.empty())
            throw ValidationError("identity fixture must not contain weighted layers");
        return w;
    }
    if (spec.fixture == "delay") {
        if (spec.encoder.size() != 1 || !spec.decoder.empty() || spec.encoder[0].kind != LayerKind::Conv ||
            spec.encoder[0].channels_in != 1 || spec.encoder[0].channels_out != 1)
            throw ValidationError("delay fixture must be a single 1x1 conv");
        auto& wt = w.tensors[0];
        wt.values.back() = 1.0f;
        return w;
    }
    throw ValidationError("spec '" + spec.name + "' is not a fixture");
}

namespace {

struct PathPair {
    std::string manifest, blob;
};

PathPair resolve(const std::string& path)
{
    fs::path p(path);
    fs::path stem = p;
    if (p.extension() == ".json" || p.extension() == ".bin")
        stem = p.parent_path() / p.stem();
    return {stem.string() + ".json", stem.string() + ".bin"};
}

uint32_t to_le(uint32_t v)
{
    if constexpr (std::endian::native == std::endian::big)
        return ((v & 0xff) << 24) | ((v & 0xff00) << 8) | ((v >> 8) & 0xff00) | (v >> 24);
    return v;
}

} // namespace

void save_weights(const WeightSet& w, const std::string& path)
{
    auto pp = resolve(path);
    nlohmann::json m;
    m["format"] = "lowlat-weights";
    m["version"] = 1;
    m["dtype"] = "float32";
    m["endianness"] = "little";
    m["blob"] = fs::path(pp.blob).filename().string();
    m["tensors"] = nlohmann::json::array();
    std::ofstream blob(pp.blob, std::ios::binary);
    if (!blob)
        throw ValidationError("cannot write '" + pp.blob + "'");
    uint64_t offset = 0;
    for (const auto& t : w.tensors) {
        m["tensors"].push_back({{"name", t.name}, {"shape", t.shape}, {"offset", offset}, {"count", t.values.size()}});
        for (float v : t.values) {
            uint32_t u;
            std::memcpy(&u, &v, 4);
            u = to_le(u);
            blob.write(reinterpret_cast<const char*>(&u), 4);
        }
        offset += 4 * t.values.size();
    }
    std::ofstream mf(pp.manifest);
    if (!mf)
        throw ValidationError("cannot write '" + pp.manifest + "'");
    mf << m.dump(2) << "\n";
}

WeightSet load_weights(const std::string& path)
{
    auto pp = resolve(path);
    std::ifstream mf(pp.manifest);
    if (!mf)
        throw ManifestError("cannot open weight manifest '" + pp.manifest + "'");
    nlohmann::json m;
    try {
        mf >> m;
    } catch (const nlohmann::json::exception& e) {
        throw ManifestError("weight manifest '" + pp.manifest + "': " + e.what());
    }
    std::string blob_path = pp.blob;
    if (m.contains("blob"))
        blob_path = (fs::path(pp.manifest).parent_path() / m["blob"].get<std::string>()).string();
    std::ifstream blob(blob_path, std::ios::binary | std::ios::ate);
    if (!blob)
        throw ManifestError("cannot open weight blob '" + blob_path + "'");
    const uint64_t blob_size = static_cast<uint64_t>(blob.tellg());
    WeightSet w;
    try {
        for (const auto& t : m.at("tensors")) {
            WeightTensor wt;
            wt.name = t.at("name").get<std::string>();
            wt.shape = t.at("shape").get<std::vector<int>>();
            uint64_t count = 1;
            for (int d : wt.shape)
                count *= static_cast<uint64_t>(d);
            const uint64_t offset = t.at("offset").get<uint64_t>();
            if (offset + 4 * count > blob_size)
                throw ManifestError("tensor '" + wt.name + "' extends past the end of the blob");
            wt.values.resize(count);
            blob.seekg(static_cast<std::streamoff>(offset));
            for (auto& v : wt.values) {
                uint32_t u;
                blob.read(reinterpret_cast<char*>(&u), 4);
                u = to_le(u);
                std::memcpy(&v, &u, 4);
            }
            w.tensors.push_back(std::move(wt));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ManifestError("weight manifest '" + pp.manifest + "': " + e.what());
    }
    return w;
}

void check_weights(const ArchitectureSpec& spec, const WeightSet& w)
{
    std::vector<std::string> problems;
    auto shape_str = [](const std::vector<int>& s) {
        std::string r = "[";
        for (size_t i = 0; i < s.size(); ++i)
            r += (i ? "," : "") + std::to_string(s[i]);
        return r + "]";
    };
    const auto expected = expected_tensors(spec);
    for (const auto& e : expected) {
        const auto* t = w.find(e.name);
        if (!t)
            problems.push_back(e.name + " (missing, expected " + shape_str(e.shape) + ")");
        else if (t->shape != e.shape)
            problems.push_back(e.name + " (shape " + shape_str(t->shape) + ", expected " + shape_str(e.shape) + ")");
    }
    for (const auto& t : w.tensors) {
        bool known = std::any_of(expected.begin(), expected.end(), [&](const auto& e) { return e.name == t.name; });
        if (!known)
            problems.push_back(t.name + " (not used by the architecture)");
    }
    if (!problems.empty()) {
        std::string msg = "weight/spec mismatch:";
        for (const auto& p : problems)
            msg += "\n  " + p;
        throw ManifestError(msg);
    }
}

} // namespace lowlat
