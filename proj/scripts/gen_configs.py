#!/usr/bin/env python3
"""Regenerate the bundled architecture configs under configs/."""
import json
import pathlib

ROOT = pathlib.Path(__file__).resolve().parent.parent
LATENT = 128
BANDS = 16

VARIANTS = [
    # name, hidden sizes, strides, dilations, attenuation, causal
    ("rave_v1", [64, 128, 256, 512], [4, 4, 4, 2], [1, 3, 5], 100, False),
    ("c2048_r10", [64, 128, 256, 512], [4, 4, 4, 2], [1, 3, 5], 100, True),
    ("c1024_r10", [64, 128, 256, 512], [4, 4, 2, 2], [3, 9, 27], 100, True),
    ("c512_r10", [64, 128, 256, 512], [4, 2, 2, 2], [3, 9, 18, 36], 100, True),
    ("c256_r10", [64, 128, 256, 512], [2, 2, 2, 2], [3, 9, 27, 36], 100, True),
    ("c128_r10", [64, 128, 256, 512], [2, 2, 2, 1], [3, 9, 27, 45, 63], 100, True),
    ("c128_r10_p70", [64, 128, 256, 512], [2, 2, 2, 1], [3, 9, 27, 45, 63], 70, True),
    ("c128_r10_p40", [64, 128, 256, 512], [2, 2, 2, 1], [3, 9, 27, 45, 63], 40, True),
    ("c128_r05_p40", [64, 128, 256, 512], [2, 2, 2, 1], [3, 9, 27, 36], 40, True),
    ("brave", [32, 64, 128, 256], [2, 2, 2, 1], [3, 9, 27, 36], 40, True),
]


def act(fn="leaky_relu"):
    return {"kind": "activation", "function": fn}


def conv(k, cin, cout, stride=1, la=0):
    return {"kind": "conv", "kernel": k, "stride": stride, "channels": [cin, cout], "lookahead": la}


def variant(name, hidden, strides, dilations, atten, causal):
    la = (lambda v: 0) if causal else (lambda v: v)
    enc = [conv(7, BANDS, hidden[0], la=la(3))]
    cin = hidden[0]
    for h, s in zip(hidden, strides):
        enc += [act(), conv(2 * s + 1, cin, 2 * h, stride=s, la=la(s))]
        cin = 2 * h
    enc += [act(), conv(5, cin, 2 * LATENT, la=la(2))]

    top = 2 * hidden[-1]
    dec = [conv(6, LATENT, top, la=la(3))]
    cin = top
    for h, s in zip(reversed(hidden), strides):
        dec.append(act())
        if s > 1:
            dec.append({"kind": "transposed-conv", "kernel": 2 * s, "stride": s,
                        "channels": [cin, h], "lookahead": la(1)})
        else:
            dec.append(conv(3, cin, h, la=la(1)))
        dec.append({"kind": "residual-stack", "kernel": 3, "dilations": dilations,
                    "channels": [h, h], "lookahead": la(1)})
        cin = h
    dec += [act(), conv(7, cin, BANDS, la=la(3)), act("tanh")]
    return {
        "name": name,
        "sample_rate": 44100,
        "filterbank": {"bands": BANDS, "attenuation_db": atten},
        "encoder": enc,
        "latent_dim": LATENT,
        "decoder": dec,
    }


def delay_fixture(d):
    return {
        "name": f"delay_{d}",
        "sample_rate": 44100,
        "filterbank": {"bands": 1, "attenuation_db": 100},
        "encoder": [conv(d + 1, 1, 1)],
        "latent_dim": 1,
        "decoder": [],
        "fixture": "delay",
    }


def write(path, doc):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2) + "\n")


def main():
    for v in VARIANTS:
        write(ROOT / "configs" / f"{v[0]}.json", variant(*v))
    write(ROOT / "configs" / "fixtures" / "identity.json", {
        "name": "identity", "sample_rate": 44100,
        "filterbank": {"bands": 1, "attenuation_db": 100},
        "encoder": [], "latent_dim": 1, "decoder": [], "fixture": "identity",
    })
    for d in (0, 100, 1000, 5000):
        write(ROOT / "configs" / "fixtures" / f"delay_{d}.json", delay_fixture(d))


if __name__ == "__main__":
    main()
