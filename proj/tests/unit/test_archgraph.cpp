#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "lowlat/error.hpp"
#include "lowlat/pqmf.hpp"
#include "lowlat/streamkernel.hpp"
#include "random_specs.hpp"

using namespace lowlat;
using namespace unit;

TEST_SUITE("archgraph") {

TEST_CASE("compression ratio")
{
    CHECK(compression_ratio(strided_spec(16, {4, 4, 4, 2})) == 2048);
    CHECK(compression_ratio(strided_spec(1, {1})) == 1);
    CHECK(compression_ratio(strided_spec(16, {2, 2, 2, 1})) == 128);
    CHECK(compression_ratio(config("rave_v1")) == 2048);
    CHECK(compression_ratio(config("brave")) == 128);
    // multiplicative in strides
    CHECK(compression_ratio(strided_spec(4, {2, 4})) == 4 * compression_ratio(strided_spec(4, {2})));
}

TEST_CASE("encoder receptive field")
{
    ArchitectureSpec one;
    one.filterbank = {1, 100.0};
    one.encoder = {conv(3, 1, 1)};
    CHECK(encoder_receptive_field(one) == 3);

    ArchitectureSpec two;
    two.filterbank = {1, 100.0};
    two.encoder = {conv(3, 1, 1, 2), conv(3, 1, 1)};
    two.decoder = {tconv(2, 1, 1, 2)};
    CHECK(encoder_receptive_field(two) == 7);
    // impulse-span oracle on random weights
    const auto m = measure_receptive_field(two, seeded_weights(two, 3));
    CHECK(m.encoder_rf_samples == 7);

    ArchitectureSpec bad = two;
    bad.encoder.push_back(residual(3, 1, {1}));
    CHECK_THROWS_AS(encoder_receptive_field(bad), UnsupportedLayoutError);
}

TEST_CASE("decoder receptive field")
{
    ArchitectureSpec s;
    s.filterbank = {1, 100.0};
    s.encoder = {conv(1, 1, 1)};
    s.decoder = {residual(1, 1, {1})};
    CHECK(decoder_receptive_field(s) == 1);
    CHECK(decoder_receptive_field(config("rave_v1")) == 16);

    // D=[3,9,27,36], kernel 5, strides [2,2,2,1]: perturbation oracle
    ArchitectureSpec d = strided_spec(16, {2, 2, 2, 1}, 40.0);
    std::vector<LayerSpec> dec = {conv(3, 2, 2)};
    for (int st : {2, 2, 2, 1}) {
        dec.push_back(st > 1 ? tconv(2 * st, 2, 2, st) : conv(3, 2, 2));
        dec.push_back(residual(5, 2, {3, 9, 27, 36}));
    }
    dec.push_back(conv(1, 2, 16));
    d.decoder = dec;
    const auto m = measure_receptive_field(d, seeded_weights(d, 9));
    CHECK(decoder_receptive_field(d) == m.decoder_rf_latents);
    CHECK(total_receptive_field(encoder_receptive_field(d), decoder_receptive_field(d), 128) == m.total_rf_samples);
}

TEST_CASE("total receptive field")
{
    CHECK(total_receptive_field(15449, 16, 2048) == 46169);
    CHECK(total_receptive_field(1, 1, 77) == 1);
    CHECK(std::lround(samples_to_ms(46169, 44100.0)) == 1047);
    const auto a = analyze(config("rave_v1"));
    CHECK(a.encoder_rf_samples == 15449);
    CHECK(a.total_rf_samples == 46169);
    CHECK(analyze(config("brave")).total_rf_ms == doctest::Approx(517.0).epsilon(0.001));
}

TEST_CASE("cumulative delay")
{
    CHECK(cumulative_delay(strided_spec(16, {4, 4, 4, 2})) == 0);
    // lookahead 2 on a layer consuming latents at C_r = 2048
    auto s = strided_spec(16, {4, 4, 4, 2});
    s.decoder.front() = conv(3, 2, 2, 1, 2);
    CHECK(cumulative_delay(s) == 4096);
    // the same, streamed: output aligns with offline at that lag
    const auto inst = instantiate(s, WeightSource::seeded(4));
    auto rec = reconfigure_noncausal(inst);
    CHECK(rec.stream_delay() == 4096);
    const auto x = noise(2048 * 12, 5);
    const auto ys = rec.process(x);
    const auto yo = process_offline(s, inst.weights(), std::vector<double>(x.begin(), x.end()));
    double err = 0;
    for (size_t n = 0; n + 4096 < x.size(); ++n)
        err = std::max(err, std::abs(ys[n + 4096] - yo[n]));
    CHECK(err < 1e-5);

    const double ms = samples_to_ms(cumulative_delay(config("rave_v1")), 44100.0);
    CHECK(ms == doctest::Approx(566.0).epsilon(0.1));
}

TEST_CASE("representation delay")
{
    CHECK(representation_delay({16, 100.0}) == 512);
    CHECK(representation_delay({1, 100.0}) == 0);
    // one shared prototype: total is its length minus one
    for (double att : {40.0, 70.0}) {
        const auto bank = design({16, att});
        CHECK(representation_delay({16, att}) == bank.length() - 1);
        CHECK(representation_delay({16, att}) == measure_bank(bank).roundtrip_delay_samples);
    }
}

TEST_CASE("jitter bound and budget")
{
    CHECK(jitter_bound(128, 44100.0) == doctest::Approx(2.9).epsilon(0.01));
    CHECK(jitter_bound(1, 44100.0) == doctest::Approx(0.023).epsilon(0.02));
    CHECK(jitter_bound(2048, 44100.0) == doctest::Approx(46.4).epsilon(0.001));

    const auto b = latency_budget(config("rave_v1"), 2048);
    CHECK(b.buffering_samples == 4096);
    CHECK(b.buffering_ms == doctest::Approx(92.9).epsilon(0.001));
    CHECK(latency_budget(config("brave"), 128).buffering_ms == doctest::Approx(5.8).epsilon(0.002));

    const auto id = latency_budget(make_identity_spec(), 1);
    CHECK(id.buffering_samples == 2);
    CHECK(id.representation_samples == 0);
    CHECK(id.cumulative_samples == 0);

    CHECK_THROWS_AS(latency_budget(config("brave"), 64), InfeasibleBlockError);
    CHECK_THROWS_AS(latency_budget(config("brave"), 192), InfeasibleBlockError);
    CHECK(analyze(config("brave")).min_block_samples == 128);
}

TEST_CASE("properties over random specs")
{
    for (uint64_t seed = 0; seed < 40; ++seed) {
        const bool nc = seed % 2;
        const auto s = testing::random_spec(seed, nc);
        const auto a = analyze(s, compression_ratio(s));
        CHECK(a.total_rf_samples == a.encoder_rf_samples + (a.decoder_rf_latents - 1) * a.compression_ratio);
        CHECK((cumulative_delay(s) == 0) == is_causal(s));
        CHECK(is_causal(s) == !nc);
        const auto& bu = a.budget;
        CHECK(bu.buffering_samples == 2 * bu.block_samples);
        CHECK(bu.block_ms == bu.block_samples / s.sample_rate * 1000.0);
        CHECK(bu.buffering_ms == bu.buffering_samples / s.sample_rate * 1000.0);
        CHECK(bu.cumulative_ms == bu.cumulative_samples / s.sample_rate * 1000.0);
        CHECK(a.total_rf_ms == a.total_rf_samples / s.sample_rate * 1000.0);
    }
}

TEST_CASE("parameter counts of the bundled variants")
{
    CHECK(parameter_count(config("brave")) == doctest::Approx(4.9e6).epsilon(0.1));
    CHECK(parameter_count(config("rave_v1")) == doctest::Approx(17.6e6).epsilon(0.1));
    // weights plus biases, including the unused variance half of the head
    ArchitectureSpec s;
    s.filterbank = {1, 100.0};
    s.latent_dim = 1;
    s.encoder = {conv(3, 1, 2)};
    CHECK(parameter_count(s) == 3 * 2 + 2);
}

TEST_CASE("validation")
{
    auto s = strided_spec(16, {2, 2});
    s.filterbank.bands = 12;
    CHECK_THROWS_WITH_AS(validate(s), doctest::Contains("power of two"), ValidationError);
    s = strided_spec(16, {2, 2});
    s.filterbank.attenuation_db = 20;
    CHECK_THROWS_AS(validate(s), ValidationError);
    s = strided_spec(16, {2, 2});
    s.encoder.front().lookahead = s.encoder.front().kernel;
    CHECK_THROWS_WITH_AS(validate(s), doctest::Contains("lookahead"), ValidationError);
    s = strided_spec(16, {2, 2});
    s.decoder[1].stride = 4;
    CHECK_THROWS_WITH_AS(validate(s), doctest::Contains("rate symmetry"), ValidationError);
    s = strided_spec(16, {2, 2});
    s.decoder.push_back(residual(3, 16, {}));
    CHECK_THROWS_AS(validate(s), ValidationError);
    s = strided_spec(16, {2, 2});
    s.latent_dim = 0;
    CHECK_THROWS_AS(validate(s), ValidationError);
}

TEST_CASE("spec documents")
{
    const auto s = config("rave_v1");
    const auto back = spec_from_json(spec_to_json(s));
    CHECK(spec_to_json(back) == spec_to_json(s));
    CHECK_THROWS_WITH_AS(parse_spec("{\n  \"name\": \"x\",\n  oops\n}", "f.json"), doctest::Contains("f.json:3:"),
                         FormatError);
    CHECK_THROWS_WITH_AS(parse_spec(R"({"name": "x", "filterbank": {"bands": 1, "attenuation_db": 100},
        "latent_dim": 1, "encoder": [{"kind": "conv", "kernel": 1, "channels": [1, 1], "speed": 2}], "decoder": []})"),
                         doctest::Contains("speed"), ValidationError);
    const auto j = to_json(analyze(s, 2048));
    for (const char* k : {"compression_ratio", "rf_encoder_samples", "rf_decoder_latents", "rf_total_samples", "budget"})
        CHECK(j.contains(k));
}

}
