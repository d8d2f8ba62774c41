import numpy as np
import pytest
from scipy import optimize, signal

import lowlat


def scipy_prototype(bands, atten):
    # kaiserord takes the transition width relative to Nyquist
    def taps(wc):
        n, _ = signal.kaiserord(atten, wc / np.pi)
        return 2 * (n // 2) + 1

    beta = signal.kaiser_beta(atten)

    def lowpass(wc):
        return signal.firwin(taps(wc), wc / np.pi, window=("kaiser", beta), scale=False)

    def loss(w):
        wc = float(np.atleast_1d(w)[0])
        if not wc > 1e-6 or wc >= np.pi:
            return 1e9
        h = lowpass(wc)
        r = np.correlate(h, h, mode="full")[len(h) - 1 :]
        return np.max(np.abs(r[2 * bands :: 2 * bands]), initial=0.0)

    wc = optimize.fmin(loss, 1.0 / bands, xtol=1e-4, ftol=1e-4, disp=False)[0]
    return lowpass(wc), wc, beta


@pytest.mark.parametrize("bands,atten", [(16, 100.0), (16, 70.0), (4, 100.0), (8, 70.0)])
def test_prototype_matches_scipy(bands, atten):
    bank = lowlat.design_bank(bands, atten)
    h, wc, beta = scipy_prototype(bands, atten)
    assert bank["kaiser_beta"] == pytest.approx(beta, rel=1e-12)
    assert bank["cutoff_rad"] == pytest.approx(wc, abs=1e-9)
    proto = np.asarray(lowlat.bank_prototype(bands, atten))
    pad = (len(proto) - len(h)) // 2
    assert len(h) == bank["design_taps"]
    np.testing.assert_allclose(proto[pad : pad + len(h)], h, atol=1e-12)
    assert not proto[:pad].any() and not proto[pad + len(h) :].any()


def test_stopband_and_roundtrip():
    low, high = lowlat.measure_bank(16, 40.0), lowlat.measure_bank(16, 100.0)
    assert high["stopband_db"] > low["stopband_db"]
    assert high["roundtrip_snr_db"] > low["roundtrip_snr_db"]
    assert lowlat.measure_bank(16, 100.0)["stopband_db"] >= 99.0


def test_prototype_response_via_scipy():
    for atten in (40.0, 70.0, 100.0):
        h = np.asarray(lowlat.bank_prototype(16, atten))
        w, resp = signal.freqz(h, worN=np.linspace(np.pi / 16, np.pi, 4096))
        stop = -20 * np.log10(np.max(np.abs(resp)) / np.abs(np.sum(h)))
        assert stop >= atten - 1.0
