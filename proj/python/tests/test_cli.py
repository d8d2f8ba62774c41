import json

import jsonschema
import numpy as np
import pytest


def test_analyze(cli, config):
    r = cli("analyze", config("rave_v1"))
    assert r.returncode == 0, r.stderr
    doc = json.loads(r.stdout)
    assert doc["compression_ratio"] == 2048
    assert doc["rf_total_samples"] == 46169


def test_usage_error(cli):
    assert cli("analyze").returncode == 1
    assert cli("no-such-command").returncode == 1


def test_validation_error(cli, config, tmp_path):
    spec = json.load(open(config("brave")))
    spec["filterbank"]["bands"] = 3
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(spec))
    assert cli("analyze", bad).returncode == 2
    assert cli("analyze", tmp_path / "missing.json").returncode == 2
    assert cli("pqmf-design", "--bands", 16, "--atten", 10).returncode == 2


def test_measurement_error(cli, tmp_path, root):
    from scipy.io import wavfile

    silent = tmp_path / "silent.wav"
    wavfile.write(silent, 44100, np.zeros(44100, dtype=np.float32))
    r = cli("loudness-normalize", "--target", -23, silent, tmp_path / "out.wav")
    assert r.returncode == 3, r.stderr


def test_protocol_bundle(cli, root, schema, tmp_path):
    out = tmp_path / "bundle.json"
    r = cli(
        "protocol",
        "--arch", root / "configs" / "fixtures" / "delay_100.json",
        "--trials", 2, "--block", 128, "--runs", 30, "--warmup", 10,
        "--out", out,
    )
    assert r.returncode == 0, r.stderr
    bundle = json.load(open(out))
    jsonschema.Draft202012Validator(schema("report_bundle")).validate(bundle)
    assert bundle["latency"]["selected_mean_ms"] == pytest.approx((100 + 256) / 44.1, abs=128 / 44.1)


def test_eval_reports(cli, tmp_path, validate_def):
    from scipy.io import wavfile

    t = np.arange(88200) / 44100.0
    a = 0.5 * np.sin(2 * np.pi * 220.0 * t)
    wavfile.write(tmp_path / "a.wav", 44100, a.astype(np.float32))
    wavfile.write(tmp_path / "b.wav", 44100, (0.25 * a).astype(np.float32))
    for kind, args in (("loudness", []), ("pitch", ["--audio"])):
        out = tmp_path / f"{kind}.json"
        r = cli("eval", kind, "--a", tmp_path / "a.wav", "--b", tmp_path / "b.wav", *args, "--out", out)
        assert r.returncode == 0, r.stderr
        doc = json.load(open(out))
        validate_def(doc, "eval_report", kind)
    assert json.load(open(tmp_path / "loudness.json"))["loudness_l1_db"] == pytest.approx(20 * np.log10(4), abs=0.05)
    assert json.load(open(tmp_path / "pitch.json"))["pitch_accuracy"] == 1.0


def test_compare_mismatch(cli, root, tmp_path):
    arch = root / "configs" / "fixtures" / "delay_0.json"
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert cli("measure-latency", "--arch", arch, "--trials", 1, "--out", a).returncode == 0
    assert cli("bench-rtf", "--arch", arch, "--blocks", "128", "--runs", 12, "--warmup", 2, "--out", b).returncode == 0
    assert cli("compare", a, b).returncode == 2
    assert cli("compare", a, a).returncode == 0
