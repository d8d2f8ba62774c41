#include <doctest.h>

#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "lowlat/error.hpp"
#include "lowlat/pqmf.hpp"
#include "oracles.hpp"

using namespace lowlat;
using namespace unit;

namespace {

std::vector<float> roundtrip(const PqmfBank& bank, const std::vector<float>& x)
{
    return synthesize(bank, analyze(bank, x));
}

}

TEST_SUITE("pqmf") {

TEST_CASE("100 dB, 16 bands")
{
    const auto bank = design({16, 100.0});
    CHECK(bank.length() == 513);
    CHECK(bank.group_delay_samples == 256);
    for (int n = 0; n < bank.length(); ++n)
        CHECK(std::abs(bank.prototype[n] - bank.prototype[bank.length() - 1 - n]) <= 1e-12);
    const auto rep = measure_bank(bank);
    CHECK(rep.stopband_db >= 99.0);
    CHECK(rep.roundtrip_delay_samples == 512);
    CHECK(std::abs(rep.roundtrip_delay_samples - (bank.length() - 1)) == 0);
}

TEST_CASE("group delay follows the designed length")
{
    for (double att : {40.0, 70.0}) {
        const auto bank = design({16, att});
        CHECK(bank.group_delay_samples == (bank.length() - 1) / 2);
        CHECK(measure_bank(bank).stopband_db >= att - 1.0);
    }
    const auto b40 = design({16, 40.0});
    CHECK(measure_bank(b40).roundtrip_delay_samples == 2 * b40.group_delay_samples);
}

TEST_CASE("passthrough")
{
    const auto bank = design({1, 60.0});
    CHECK(bank.passthrough());
    CHECK(bank.group_delay_samples == 0);
    const auto rep = measure_bank(bank);
    CHECK(rep.roundtrip_snr_db == kSnrCapDb);
    CHECK(rep.roundtrip_delay_samples == 0);
    const auto x = noise(64, 1);
    CHECK(roundtrip(bank, x) == x);
}

TEST_CASE("design range")
{
    CHECK_THROWS_AS(design({16, 20.0}), DesignRangeError);
    CHECK_THROWS_AS(design({16, 130.0}), DesignRangeError);
}

TEST_CASE("cosine modulation")
{
    const auto bank = design({8, 70.0});
    const int L = bank.length(), M = bank.bands;
    const double mid = 0.5 * (L - 1);
    const double g = 2.0 * std::sqrt(double(M));
    for (int k = 0; k < M; ++k)
        for (int n = 0; n < L; n += 7) {
            const double phase = (k % 2 ? -1.0 : 1.0) * std::numbers::pi / 4;
            const double expect = g * bank.prototype[n] * std::cos((2 * k + 1) * std::numbers::pi / (2 * M) * (n - mid) + phase);
            CHECK(bank.analysis_tap(k, n) == doctest::Approx(expect).epsilon(1e-12));
            CHECK(bank.synthesis_tap(k, L - 1 - n) == bank.analysis_tap(k, n));
        }
}

TEST_CASE("kaiser window against the Bessel definition")
{
    const int n = 31;
    const double beta = 5.0;
    const auto w = pqmf_detail::kaiser_window(n, beta);
    for (int i = 0; i < n; ++i) {
        const double r = 2.0 * i / (n - 1) - 1.0;
        const double expect = std::cyl_bessel_i(0.0, beta * std::sqrt(1 - r * r)) / std::cyl_bessel_i(0.0, beta);
        CHECK(w[i] == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("analysis of zeros and impulses")
{
    const auto bank = design({4, 70.0});
    const int M = bank.bands, L = bank.length();
    const auto z = analyze(bank, std::vector<float>(256, 0.0f));
    for (float v : z.data)
        CHECK(v == 0.0f);
    CHECK(synthesize(bank, z) == std::vector<float>(256, 0.0f));

    // band k frame m is the full convolution sampled at m * M
    std::vector<float> imp(4 * L, 0.0f);
    imp[0] = 1.0f;
    const auto y = analyze(bank, imp);
    REQUIRE(y.channels == M);
    REQUIRE(y.frames == static_cast<int>(imp.size()) / M);
    for (int k = 0; k < M; ++k)
        for (int m = 0; m < y.frames; ++m) {
            const double expect = m * M < L ? bank.analysis_tap(k, m * M) : 0.0;
            CHECK(std::abs(y.at(k, m) - expect) <= 1e-6);
        }
}

TEST_CASE("round trip delay on noise")
{
    for (double att : {40.0, 100.0}) {
        const auto bank = design({16, att});
        auto x = noise(1 << 14, 2);
        x.resize(x.size() + 2048, 0.0f);
        const auto y = roundtrip(bank, x);
        const auto lag = testing::xcorr_lag(std::vector<double>(x.begin(), x.end()),
                                            std::vector<double>(y.begin(), y.end()), 4096);
        CHECK(lag == bank.length() - 1);
    }
}

TEST_CASE("band energy matches input energy")
{
    const auto bank = design({16, 100.0});
    const auto x = noise(1 << 16, 3);
    const auto y = analyze(bank, x);
    double ein = 0, eout = 0;
    for (float v : x)
        ein += double(v) * v;
    for (float v : y.data)
        eout += double(v) * v;
    CHECK(std::abs(10 * std::log10(eout / ein)) < 1.0);
}

TEST_CASE("streaming partitions match one-shot processing")
{
    const auto bank = design_shared({16, 70.0});
    const auto x = noise(16 * 700, 4);
    const auto whole_a = analyze(*bank, x);
    const auto whole = synthesize(*bank, whole_a);
    PqmfAnalyzer an(bank);
    PqmfSynthesizer syn(bank);
    Rng rng(5);
    std::vector<float> y;
    size_t pos = 0;
    while (pos < x.size()) {
        const size_t len = std::min<size_t>(x.size() - pos, 16 * rng.uniform_int(1, 40));
        const auto a = an.process(std::vector<float>(x.begin() + pos, x.begin() + pos + len));
        const auto o = syn.process(a);
        y.insert(y.end(), o.begin(), o.end());
        pos += len;
    }
    REQUIRE(y.size() == whole.size());
    double err = 0;
    for (size_t i = 0; i < y.size(); ++i)
        err = std::max(err, double(std::abs(y[i] - whole[i])));
    CHECK(err <= 1e-6);

    an.reset();
    const auto again = an.process(x);
    CHECK(again.data == whole_a.data);
}

TEST_CASE("synthesis channel check")
{
    const auto bank = design({4, 70.0});
    CHECK_THROWS_AS(synthesize(bank, TensorBlock(3, 8)), ShapeError);
}

TEST_CASE("scalar search")
{
    const auto r = pqmf_detail::nelder_mead([](double x) { return (x - 0.3) * (x - 0.3) + 1.0; }, 1.0, 1e-8, 1e-12,
                                            500, 500);
    CHECK(r.x == doctest::Approx(0.3).epsilon(1e-4));
    CHECK(r.fx == doctest::Approx(1.0));
}

TEST_CASE("bank document")
{
    const auto j = bank_to_json(design({16, 40.0}));
    CHECK(j["bands"] == 16);
    CHECK(j["attenuation_db"] == 40.0);
    CHECK(j["prototype"].size() == design({16, 40.0}).prototype.size());
}

}
