#include <doctest.h>

#include <cstdlib>
#include <sstream>

#include "helpers.hpp"
#include "lowlat/bench.hpp"
#include "lowlat/error.hpp"

using namespace lowlat;
using namespace unit;

namespace {

std::vector<ExcitationSpec> small_grid()
{
    const auto g = excitation_grid(3);
    return {g[0], g[3], g[6], g[11]};
}

LatencyOptions opts(int trials)
{
    LatencyOptions o;
    o.trials_per_spec = trials;
    o.master_seed = 3;
    o.keep_trials = true;
    o.threads = 1;
    return o;
}

std::vector<std::string> csv_rows(const std::string& csv)
{
    std::vector<std::string> rows;
    std::istringstream in(csv);
    for (std::string line; std::getline(in, line);)
        rows.push_back(line);
    return rows;
}

}

TEST_SUITE("bench") {

TEST_CASE("pure delay latency")
{
    for (int d : {0, 250}) {
        const auto inst = instantiate(make_delay_spec(d), WeightSource::fixture());
        const auto r = measure_latency(inst, small_grid(), opts(6), 128);
        CHECK(r.block_samples == 128);
        for (const auto& s : r.per_spec) {
            CHECK(s.detect_failures == 0);
            CHECK(s.trials == 6);
            CHECK(s.min_ms <= s.mean_ms);
            CHECK(s.mean_ms <= s.max_ms);
            CHECK(s.jitter_ms >= 0);
            for (auto v : s.latencies_samples)
                CHECK(std::abs(v - (d + 256)) <= 128);
            CHECK(s.min_samples >= 256);
        }
        CHECK(r.selected >= 0);
        CHECK(r.selected_mean_ms == r.per_spec[r.selected].mean_ms);
    }
}

TEST_CASE("identity at block 1 is buffering plus detector tolerance")
{
    const auto inst = instantiate(make_identity_spec(), WeightSource::fixture());
    auto o = opts(3);
    o.detector = OnsetDetector::AmpGate;
    o.onset.ampgate.ramp_samples = 1;
    const auto r = measure_latency(inst, small_grid(), o, 1);
    for (const auto& s : r.per_spec)
        for (auto v : s.latencies_samples) {
            CHECK(v >= 2);
            CHECK(v <= 2 + 128);
        }
}

TEST_CASE("reproducible across seeds and threads")
{
    const auto inst = instantiate(make_delay_spec(40), WeightSource::fixture());
    auto o = opts(4);
    const auto a = to_json(measure_latency(inst, small_grid(), o, 128));
    o.threads = 3;
    auto b = to_json(measure_latency(inst, small_grid(), o, 128));
    b["host"] = a["host"];
    CHECK(a == b);
}

TEST_CASE("batch jobs see the same trials")
{
    const auto i1 = instantiate(make_delay_spec(10), WeightSource::fixture());
    const auto i2 = instantiate(make_delay_spec(20), WeightSource::fixture());
    // the gate is shift invariant, so the extra delay shows up exactly
    auto o = opts(3);
    o.detector = OnsetDetector::AmpGate;
    const auto reps = measure_latency_batch({{&i1, 128}, {&i2, 128}}, small_grid(), o);
    REQUIRE(reps.size() == 2);
    for (size_t s = 0; s < reps[0].per_spec.size(); ++s) {
        const auto& a = reps[0].per_spec[s].latencies_samples;
        const auto& b = reps[1].per_spec[s].latencies_samples;
        REQUIRE(a.size() == b.size());
        for (size_t t = 0; t < a.size(); ++t)
            CHECK(b[t] - a[t] == 10);
    }
}

TEST_CASE("failures")
{
    auto spec = make_delay_spec(5);
    auto w = fixture_weights(spec);
    for (auto& t : w.tensors)
        std::fill(t.values.begin(), t.values.end(), 0.0f);
    const ModelInstance silent(spec, w);
    CHECK_THROWS_AS(measure_latency(silent, small_grid(), opts(2), 128), MeasurementError);

    const auto inst = instantiate(config("brave"), WeightSource::seeded(1));
    CHECK_THROWS_AS(measure_latency(inst, small_grid(), opts(1), 100), InfeasibleBlockError);
    CHECK_THROWS_AS(measure_latency(inst, small_grid(), opts(0), 128), ValidationError);
}

TEST_CASE("rtf protocol")
{
    const auto inst = instantiate(make_delay_spec(3), WeightSource::fixture());
    RtfOptions o;
    o.blocks = {128, 2048};
    const auto r = measure_rtf(inst, o);
    REQUIRE(r.entries.size() == 2);
    for (const auto& e : r.entries) {
        CHECK(e.feasible);
        CHECK(e.runs == 1100);
        CHECK(e.warmup == 100);
        CHECK(e.measured == 1000);
        CHECK(e.rtf_std >= 0);
        CHECK(e.rtf_mean < 0.5);
        CHECK(e.rtf_min <= e.rtf_mean);
    }
    const auto brave = instantiate(config("brave"), WeightSource::seeded(1));
    RtfOptions bad;
    bad.blocks = {64};
    bad.runs = 3;
    bad.warmup = 1;
    const auto rb = measure_rtf(brave, bad);
    CHECK_FALSE(rb.entries[0].feasible);
    CHECK_FALSE(rb.entries[0].note.empty());
}

TEST_CASE("comparison")
{
    const auto inst = instantiate(make_delay_spec(40), WeightSource::fixture());
    const auto a = to_json(measure_latency(inst, small_grid(), opts(2), 128));
    const auto same = compare_reports(a, a);
    for (const auto& d : same["per_spec"])
        for (const char* k : {"mean_ms", "std_ms", "min_ms", "max_ms", "jitter_ms"})
            CHECK(d[k].get<double>() == 0.0);

    auto b = a;
    b["host"] = "elsewhere";
    for (auto& s : b["per_spec"])
        for (const char* k : {"mean_ms", "min_ms", "max_ms"})
            s[k] = s[k].get<double>() + 1.0;
    b["selected_mean_ms"] = b["selected_mean_ms"].get<double>() + 1.0;
    const auto d = compare_reports(a, b);
    for (const auto& e : d["per_spec"]) {
        CHECK(e["mean_ms"].get<double>() == doctest::Approx(1.0));
        CHECK(e["jitter_ms"].get<double>() == 0.0);
    }
    CHECK(d["selected_mean_ms"].get<double>() == doctest::Approx(1.0));
    CHECK(d["a"]["host"] == a["host"]);
    CHECK(d["b"]["host"] == "elsewhere");

    auto c = a;
    c["per_spec"].erase(0);
    CHECK_THROWS_AS(compare_reports(a, c), ComparisonError);
    auto e = a;
    e["per_spec"][1]["spec"]["length_samples"] = 123;
    CHECK_THROWS_AS(compare_reports(a, e), ComparisonError);
    RtfOptions o;
    o.runs = 3;
    o.warmup = 1;
    CHECK_THROWS_AS(compare_reports(a, to_json(measure_rtf(inst, o))), ComparisonError);
}

TEST_CASE("csv mirrors json")
{
    const auto inst = instantiate(make_delay_spec(40), WeightSource::fixture());
    const auto j = to_json(measure_latency(inst, small_grid(), opts(2), 128));
    const auto rows = csv_rows(latency_csv(j));
    REQUIRE(rows.size() == j["per_spec"].size() + 1);
    for (size_t i = 0; i < j["per_spec"].size(); ++i)
        CHECK(rows[i + 1].find(j["per_spec"][i]["mean_ms"].dump()) != std::string::npos);

    RtfOptions o;
    o.blocks = {128};
    o.runs = 5;
    o.warmup = 1;
    const auto rj = to_json(measure_rtf(inst, o));
    const auto rr = csv_rows(rtf_csv(rj));
    REQUIRE(rr.size() == 2);
    CHECK(rr[1].find(rj["entries"][0]["rtf_mean"].dump()) != std::string::npos);
}

TEST_CASE("thread count override")
{
    CHECK(resolve_threads(3) == 3);
    setenv("LOWLAT_THREADS", "2", 1);
    CHECK(resolve_threads(5) == 2);
    unsetenv("LOWLAT_THREADS");
    CHECK(resolve_threads(0) >= 1);
}

}
