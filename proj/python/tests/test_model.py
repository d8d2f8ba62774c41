import jsonschema
import numpy as np
import pytest

import lowlat


def test_analyze_brave(config):
    r = lowlat.analyze(config("brave"))
    assert r["compression_ratio"] == 128
    assert r["causal"]
    assert r["rf_total_ms"] == pytest.approx(517.0, rel=1e-3)
    assert lowlat.latency_budget(config("brave"), 128)["buffering_ms"] == pytest.approx(5.8, rel=2e-3)


def test_spec_dict_round_trip(config):
    spec = lowlat.load_spec(config("rave_v1"))
    assert lowlat.analyze(spec) == lowlat.analyze(config("rave_v1"))
    spec["filterbank"]["bands"] = 3
    with pytest.raises(lowlat.ValidationError):
        lowlat.validate(spec)
    with pytest.raises(ValueError):
        lowlat.analyze(spec)


def test_delay_fixture_moves_an_impulse(root):
    m = lowlat.Model(str(root / "configs" / "fixtures" / "delay_100.json"))
    x = np.zeros(1024, dtype=np.float32)
    x[10] = 1.0
    y = np.concatenate([m.process(x[i : i + 128]) for i in range(0, len(x), 128)])
    assert int(np.argmax(np.abs(y))) == 110
    assert y[110] == pytest.approx(1.0)


def test_streaming_matches_offline(config):
    m = lowlat.Model(config("c128_r05_p40"), seed=3)
    cr = m.compression_ratio
    rng = np.random.default_rng(0)
    x = rng.uniform(-0.5, 0.5, 40 * cr).astype(np.float32)
    ref = lowlat.process_offline(m, x.astype(np.float64))
    sizes = [cr, 3 * cr, 7 * cr, cr, 28 * cr]
    out, pos = [], 0
    for n in sizes:
        out.append(m.process(x[pos : pos + n]))
        pos += n
    np.testing.assert_allclose(np.concatenate(out), ref, atol=1e-5)
    with pytest.raises(lowlat.ValidationError):
        m.process(x[: cr + 1])


def test_receptive_field(root):
    m = lowlat.Model(str(root / "configs" / "fixtures" / "delay_100.json"))
    assert lowlat.measure_receptive_field(m)["rf_total_samples"] == 101


def test_latency_of_pure_delay(root):
    m = lowlat.Model(str(root / "configs" / "fixtures" / "delay_1000.json"))
    r = lowlat.measure_latency(m, block=128, trials=3, seed=4, detector="ampgate")
    expect = (1000 + 2 * 128) / 44.1
    assert abs(r["selected_mean_ms"] - expect) <= 128 / 44.1


def test_protocol_bundle_schema(root, schema):
    m = lowlat.Model(str(root / "configs" / "fixtures" / "delay_100.json"))
    bundle = lowlat.run_protocol(m, trials=2, seed=1, block=128, rtf_runs=30, rtf_warmup=10)
    jsonschema.Draft202012Validator(schema("report_bundle")).validate(bundle)
    again = lowlat.run_protocol(m, trials=2, seed=1, block=128, rtf_runs=30, rtf_warmup=10)
    assert lowlat.strip_timing(again) == lowlat.strip_timing(bundle)


def test_rtf(config):
    r = lowlat.measure_rtf(lowlat.Model(config("c128_r05_p40"), seed=1), blocks=[128, 100], runs=20, warmup=5)
    feasible = [e for e in r["entries"] if e["feasible"]]
    assert [e["block"] for e in feasible] == [128]
    assert feasible[0]["measured"] == 15 and feasible[0]["rtf_mean"] > 0


def test_mmd_against_brute_force():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(20, 4))
    y = rng.normal(0.5, 1.0, size=(25, 4))
    sigma = 1.7

    def k(a, b):
        d2 = ((a[:, None, :] - b[None, :, :]) ** 2).sum(-1)
        return np.exp(-d2 / (2 * sigma))

    kxx, kyy, kxy = k(x, x), k(y, y), k(x, y)
    n, m = len(x), len(y)
    expect = (
        (kxx.sum() - np.trace(kxx)) / (n * (n - 1))
        + (kyy.sum() - np.trace(kyy)) / (m * (m - 1))
        - 2 * kxy.mean()
    )
    r = lowlat.mmd(x, y, sigma)
    assert r["mmd2"] == pytest.approx(expect, rel=1e-10)


def test_textures_and_eval_schema(validate_def):
    a = lowlat.excitation("harmonic", 44100, -6.0, 1)
    b = lowlat.excitation("white_noise", 44100, -6.0, 2)
    t = lowlat.mfcc_textures(a)
    assert t.ndim == 2 and t.shape[1] == 12
    validate_def(lowlat.loudness_report(a, b), "eval_report", "loudness")
    validate_def(lowlat.pitch_report(a, a), "eval_report", "pitch")
    assert lowlat.pitch_report(a, a)["pitch_accuracy"] == 1.0
    long = [lowlat.excitation(k, 44100, -6.0, s) for k, s in (("harmonic", 4), ("white_noise", 5), ("harmonic", 6))]
    test, ref, tr = (lowlat.mfcc_textures(np.tile(x, 4)) for x in long)
    sim = lowlat.similarity(test, ref, tr, seed=1)
    assert sim["splits"] == 10 and sim["cross"] > 0


def test_lufs_of_full_scale_sine():
    t = np.arange(441000) / 44100.0
    x = np.sin(2 * np.pi * 1000.0 * t).astype(np.float32)
    assert lowlat.integrated_lufs(x) == pytest.approx(-3.01, abs=0.1)
    assert lowlat.integrated_lufs(lowlat.normalize_to_lufs(x, -23.0)) == pytest.approx(-23.0, abs=0.05)
