#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "helpers.hpp"
#include "lowlat/error.hpp"
#include "lowlat/stages.hpp"
#include "lowlat/streamkernel.hpp"
#include "random_specs.hpp"

using namespace lowlat;
using namespace unit;
namespace fs = std::filesystem;

namespace {

std::vector<float> stream(ModelInstance& inst, const std::vector<float>& x, Rng& rng, int max_mult = 6)
{
    const int64_t cr = inst.compression_ratio();
    std::vector<float> y;
    size_t pos = 0;
    while (pos < x.size()) {
        const size_t len = std::min<size_t>(x.size() - pos, cr * rng.uniform_int(1, max_mult));
        const auto o = inst.process(std::vector<float>(x.begin() + pos, x.begin() + pos + len));
        y.insert(y.end(), o.begin(), o.end());
        pos += len;
    }
    return y;
}

double max_diff(const std::vector<float>& a, const std::vector<double>& b)
{
    double e = 0;
    for (size_t i = 0; i < a.size(); ++i)
        e = std::max(e, std::abs(a[i] - b[i]));
    return e;
}

fs::path scratch(const std::string& name)
{
    auto d = fs::temp_directory_path() / "lowlat_unit";
    fs::create_directories(d);
    return d / name;
}

}

TEST_SUITE("streamkernel") {

TEST_CASE("seeded weights")
{
    const auto spec = config("brave");
    const auto a = seeded_weights(spec, 11), b = seeded_weights(spec, 11), c = seeded_weights(spec, 12);
    REQUIRE(a.tensors.size() == b.tensors.size());
    for (size_t i = 0; i < a.tensors.size(); ++i)
        CHECK(a.tensors[i].values == b.tensors[i].values);
    CHECK(a.tensors.front().values != c.tensors.front().values);
    // uniform in [-a, a], a = 1 / sqrt(channels_in * kernel)
    const auto& w = a.get("encoder.0.weight");
    const double bound = 1.0 / std::sqrt(double(w.shape[1]) * w.shape[2]);
    double peak = 0;
    for (float v : w.values)
        peak = std::max(peak, double(std::abs(v)));
    CHECK(peak <= bound);
    CHECK(peak > 0.9 * bound);
    CHECK(a.count() == parameter_count(spec));
}

TEST_CASE("zero input, zero bias gives zero output")
{
    const auto spec = testing::random_spec(3);
    auto inst = instantiate(spec, WeightSource::seeded(1, true));
    const auto y = inst.process(std::vector<float>(compression_ratio(spec) * 16, 0.0f));
    for (float v : y)
        CHECK(v == 0.0f);
}

TEST_CASE("block concatenation equals offline")
{
    for (uint64_t seed : {21, 22, 23, 24}) {
        const auto spec = testing::random_spec(seed);
        auto inst = instantiate(spec, WeightSource::seeded(seed));
        const int64_t cr = inst.compression_ratio();
        const auto x = noise(cr * (20000 / cr + 1), seed);
        Rng rng(seed);
        const auto ys = stream(inst, x, rng);
        const auto yo = process_offline(spec, inst.weights(), std::vector<double>(x.begin(), x.end()));
        REQUIRE(ys.size() == x.size());
        CHECK(max_diff(ys, yo) <= 1e-5);
    }
}

TEST_CASE("pure delay and identity fixtures")
{
    for (int d : {0, 1, 37}) {
        auto inst = instantiate(make_delay_spec(d), WeightSource::fixture());
        std::vector<float> imp(128, 0.0f);
        imp[5] = 1.0f;
        const auto y = inst.process(imp);
        for (int i = 0; i < 128; ++i)
            CHECK(y[i] == (i == 5 + d ? 1.0f : 0.0f));
        const auto yo = process_offline(inst.spec(), inst.weights(), std::vector<double>(imp.begin(), imp.end()));
        CHECK(max_diff(y, yo) == 0.0);
    }
    auto id = instantiate(make_identity_spec(), WeightSource::fixture());
    const auto x = noise(300, 1);
    CHECK(id.process(x) == x);
}

TEST_CASE("state isolation")
{
    const auto spec = testing::random_spec(30);
    auto inst = instantiate(spec, WeightSource::seeded(2));
    const auto x = noise(compression_ratio(spec) * 64, 3);
    const auto a = inst.process(x);
    inst.reset();
    const auto b = inst.process(x);
    CHECK(a == b);
    ModelInstance copy = inst;
    copy.reset();
    CHECK(copy.process(x) == a);
}

TEST_CASE("block must be a multiple of the compression ratio")
{
    auto inst = instantiate(config("brave"), WeightSource::seeded(1));
    CHECK_THROWS_AS(inst.process(std::vector<float>(100)), InfeasibleBlockError);
    CHECK_NOTHROW(inst.process(std::vector<float>(256)));
}

TEST_CASE("latent rate")
{
    for (uint64_t seed : {40, 41, 42}) {
        const auto spec = testing::random_spec(seed);
        const auto w = seeded_weights(spec, seed);
        const int64_t cr = compression_ratio(spec);
        const auto z = offline_encode(spec, w, std::vector<double>(cr * 13, 0.1));
        CHECK(z.frames == 13);
        CHECK(z.channels == spec.latent_dim);
    }
}

TEST_CASE("transposed conv matches zero stuffing")
{
    const int cin = 2, cout = 3, k = 7, s = 3;
    Rng rng(8);
    std::vector<float> w(cin * cout * k), b(cout);
    for (auto& v : w)
        v = static_cast<float>(rng.uniform(-1, 1));
    for (auto& v : b)
        v = static_cast<float>(rng.uniform(-1, 1));
    stage::TransposedConv tc(cin, cout, k, s, 0, w.data(), b.data());
    const int n = 50;
    std::vector<std::vector<double>> x(cin, std::vector<double>(n));
    for (auto& row : x)
        for (auto& v : row)
            v = static_cast<float>(rng.uniform(-1, 1));

    TensorBlock out_all(cout, 0);
    std::vector<std::vector<float>> got(cout);
    for (int start = 0; start < n;) {
        const int len = std::min<int>(n - start, static_cast<int>(rng.uniform_int(1, 9)));
        TensorBlock in(cin, len), out;
        for (int c = 0; c < cin; ++c)
            for (int f = 0; f < len; ++f)
                in.at(c, f) = static_cast<float>(x[c][start + f]);
        tc.process(in, out);
        CHECK(out.frames == len * s);
        for (int c = 0; c < cout; ++c)
            got[c].insert(got[c].end(), out.row(c), out.row(c) + out.frames);
        start += len;
    }
    for (int o = 0; o < cout; ++o) {
        for (int t = 0; t < n * s; ++t) {
            double acc = b[o];
            for (int j = 0; j < k; ++j) {
                const int src = t - j;
                if (src < 0 || src % s)
                    continue;
                for (int c = 0; c < cin; ++c)
                    acc += w[(c * cout + o) * k + j] * x[c][src / s];
            }
            CHECK(std::abs(got[o][t] - acc) <= 1e-6);
        }
    }
}

TEST_CASE("reconfiguration")
{
    // causal spec: no-op with warning
    auto causal = instantiate(make_delay_spec(3), WeightSource::fixture());
    const auto same = reconfigure_noncausal(causal);
    CHECK(same.noop_warning());
    CHECK(same.stream_delay() == 0);

    // single audio-rate layer with lookahead L: streamed output is offline delayed by L
    ArchitectureSpec s;
    s.name = "look";
    s.filterbank = {1, 100.0};
    s.latent_dim = 1;
    s.encoder = {conv(9, 1, 1, 1, 5)};
    const auto inst = instantiate(s, WeightSource::seeded(3));
    CHECK_FALSE(inst.streamable());
    auto rec = reconfigure_noncausal(inst);
    CHECK(rec.reconfigured());
    CHECK(rec.stream_delay() == 5);
    const auto x = noise(400, 9);
    const auto ys = rec.process(x);
    const auto yo = process_offline(s, inst.weights(), std::vector<double>(x.begin(), x.end()));
    for (size_t n = 0; n + 5 < x.size(); ++n)
        CHECK(std::abs(ys[n + 5] - yo[n]) <= 1e-6);
    for (int n = 0; n < 5; ++n)
        CHECK(ys[n] == 0.0f);
}

TEST_CASE("receptive field measurement")
{
    for (int d : {0, 10, 100}) {
        const auto spec = make_delay_spec(d);
        const auto m = measure_receptive_field(spec, fixture_weights(spec));
        CHECK(m.total_rf_samples == d + 1);
        CHECK(m.positions >= 8);
    }
    const auto brave = reduce_channels(config("brave"), 4);
    const auto m = measure_receptive_field(brave, seeded_weights(brave, 1));
    const auto a = analyze(config("brave"));
    CHECK(m.encoder_rf_samples == a.encoder_rf_samples);
    CHECK(m.decoder_rf_latents == a.decoder_rf_latents);
    CHECK(m.total_rf_samples == a.total_rf_samples);

    // the span is structural: zero weights still show every tap
    const auto spec = make_delay_spec(4);
    auto w = fixture_weights(spec);
    for (auto& t : w.tensors)
        std::fill(t.values.begin(), t.values.end(), 0.0f);
    CHECK(measure_receptive_field(spec, w).total_rf_samples == 5);
}

TEST_CASE("reduced channels keep the graph")
{
    const auto full = config("rave_v1");
    const auto r = reduce_channels(full, 4);
    CHECK(r.encoder.size() == full.encoder.size());
    CHECK(r.decoder.size() == full.decoder.size());
    CHECK(analyze(r).total_rf_samples == analyze(full).total_rf_samples);
    CHECK(cumulative_delay(r) == cumulative_delay(full));
    CHECK(parameter_count(r) < parameter_count(full) / 100);
}

TEST_CASE("weight files")
{
    const auto spec = testing::random_spec(50);
    const auto w = seeded_weights(spec, 5);
    const auto path = scratch("w50.json").string();
    save_weights(w, path);
    const auto back = load_weights(scratch("w50.bin").string());
    REQUIRE(back.tensors.size() == w.tensors.size());
    for (size_t i = 0; i < w.tensors.size(); ++i) {
        CHECK(back.tensors[i].name == w.tensors[i].name);
        CHECK(back.tensors[i].shape == w.tensors[i].shape);
        CHECK(back.tensors[i].values == w.tensors[i].values);
    }
    auto a = instantiate(spec, WeightSource::file(path));
    auto b = instantiate(spec, WeightSource::seeded(5));
    const auto x = noise(compression_ratio(spec) * 8, 2);
    CHECK(a.process(x) == b.process(x));

    // shape mismatch names the tensor
    auto other = spec;
    other.encoder.front().kernel += 2;
    CHECK_THROWS_WITH_AS(instantiate(other, WeightSource::file(path)), doctest::Contains("encoder.0.weight"),
                         ManifestError);
    auto missing = w;
    missing.tensors.pop_back();
    CHECK_THROWS_WITH_AS(check_weights(spec, missing), doctest::Contains(w.tensors.back().name.c_str()), ManifestError);
    CHECK_THROWS_AS(load_weights(scratch("does_not_exist.json").string()), ManifestError);
}

TEST_CASE("posterior mean only")
{
    const auto spec = config("brave");
    CHECK(encoder_output_channels(spec) == 2 * spec.latent_dim);
    auto inst = instantiate(reduce_channels(spec, 4), WeightSource::seeded(2));
    const auto x = noise(128 * 8, 1);
    const auto a = inst.process(x);
    inst.reset();
    CHECK(inst.process(x) == a);
}

}
