"""Smoke test for the pyfcm extension module.

Build first:  cargo build -p fcm-python --features extension-module
Then run:     python3 python/smoke_test.py
"""

import importlib
import math
import os
import shutil
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def import_pyfcm():
    try:
        return importlib.import_module("pyfcm")
    except ImportError:
        pass
    for profile in ("release", "debug"):
        for name in ("libpyfcm.so", "libpyfcm.dylib", "pyfcm.dll"):
            built = os.path.join(ROOT, "target", profile, name)
            if os.path.exists(built):
                tmp = tempfile.mkdtemp()
                ext = ".pyd" if name.endswith(".dll") else ".so"
                shutil.copy(built, os.path.join(tmp, "pyfcm" + ext))
                sys.path.insert(0, tmp)
                return importlib.import_module("pyfcm")
    sys.exit("pyfcm not built; run: cargo build -p fcm-python --features extension-module")


def pyramid(frames):
    out = []
    for t in range(frames):
        big = [((i * 7 + t) % 50) / 25.0 - 1.0 for i in range(4 * 8 * 8)]
        small = [((i * 3 + t) % 20) / 10.0 for i in range(2 * 4 * 4)]
        out.append([(4, 8, 8, big), (2, 4, 4, small)])
    return out


def main():
    fcm = import_pyfcm()

    fs = fcm.FeatureSet(pyramid(3), fps=25.0)
    assert fs.frame_count == 3 and fs.fps == 25.0
    assert fs.layer_shapes == [(4, 8, 8), (2, 4, 4)]
    assert fcm.FeatureSet.from_bytes(fs.to_bytes()) == fs

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "x.fts")
        fs.save(path)
        assert fcm.FeatureSet.load(path) == fs

    stream = fcm.encode(fs, {"codec": "lossless", "qp": "27"})
    info = fcm.inspect(stream)
    assert info["reducer"] == "s2d" and info["codec"] == "lossless"
    assert info["frames"] == 3 and info["layers"] == [(4, 8, 8), (2, 4, 4)]
    back = fcm.decode(stream)
    assert back.layer_shapes == fs.layer_shapes
    psnr = fcm.quality_metric(fs, back)
    assert 40.0 < psnr < 999.0, psnr

    exact = fcm.decode(fcm.encode(fs, {"bypass_quantization": "on"}))
    assert exact == fs and fcm.quality_metric(fs, exact) == 999.0

    codes, lo, hi = fcm.quantize([0.0, 0.5, 1.0], 10)
    assert codes == [0, 511, 1023] and (lo, hi) == (0.0, 1.0)
    assert fcm.dequantize([0, 1023], lo, hi, 10) == [0.0, 1.0]

    assert fcm.pack_grid(8) == (3, 3)
    assert fcm.pack_grid(87040) == (295, 296)

    a = [(100.0, 30.0), (200.0, 33.0), (400.0, 36.0), (800.0, 39.0)]
    assert fcm.bd_rate(a, a) == (0.0, "identical")
    pct, _ = fcm.bd_rate(a, [(r * 2, q) for r, q in a])
    assert math.isclose(pct, 100.0, abs_tol=0.1), pct

    enc, dec, enc_ok, dec_ok = fcm.complexity_ratios(11.86, 0.31, 1.0, 1.0)
    assert (round(enc, 2), round(dec, 2), enc_ok, dec_ok) == (11.86, 0.31, False, True)

    try:
        fcm.decode(b"FCMB")
    except fcm.FcmError as e:
        assert "truncated" in str(e), e
    else:
        raise AssertionError("truncated stream decoded")

    print("pyfcm smoke test: ok")


if __name__ == "__main__":
    main()
