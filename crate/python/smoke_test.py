"""Smoke test of the Python bindings.

Imports `llcorr` if it is installed; otherwise builds the extension with cargo and loads it
from a temporary directory.
"""

import importlib
import math
import pathlib
import shutil
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load():
    try:
        return importlib.import_module("llcorr")
    except ImportError:
        pass
    subprocess.run(
        ["cargo", "build", "-p", "llcorr-py", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    built = ROOT / "target" / "debug" / "libllcorr_py.so"
    where = pathlib.Path(tempfile.mkdtemp())
    shutil.copy(built, where / "llcorr.so")
    sys.path.insert(0, str(where))
    return importlib.import_module("llcorr")


def main():
    ll = load()

    th = ll.thermo("inf", 1.0, 1.0)
    assert th["residual"] < 1e-12, th

    # free-fermion poles solve λ² − h = iπT(2m+1)·(±1), one per quadrant and level
    for label, r in ll.poles("inf", 1.0, 1.0, m_max=1):
        m = int(label[2:]) - 1
        j = (r * r - 1.0) / (1j * math.pi)
        assert abs(abs(j.real) - (2 * m + 1)) < 1e-10 and abs(j.imag) < 1e-10, (label, r)
        assert (r.imag > 0) == (label[0] == "+") and (r.real > 0) == (label[1] == "R"), (label, r)

    # leading length from the pressure difference at h and h_α
    alpha = complex(0.1, 0.0)
    p0 = ll.length(10.0, 4.0, 2.0, "", alpha)
    shifted = ll.thermo(10.0, 4.0, 2.0, alpha)["pressure"]
    base = ll.thermo(10.0, 4.0, 2.0)["pressure"]
    assert abs(p0 - (base - shifted) / 2.0) < 1e-9, (p0, base, shifted)

    p = ll.length(10, 4.0, 2.0, "+R1;-R1")
    assert p.real > 0 and abs(p.imag) < 1e-8, p
    q = ll.length(10, 4.0, 2.0, "+L1;-L1")
    assert abs(p - q) < 1e-8, (p, q)

    _, b = ll.amplitude(10, 4.0, 2.0, "")
    assert abs(b - 1.0) < 1e-6, b

    assert ll.free_fermion_determinant(1.0, 1.0, 0.0, 5.0) == 1.0

    try:
        ll.length(10, 4.0, 2.0, "+R1")
    except ll.LlcorrError as e:
        assert "parse" in str(e), e
    else:
        raise AssertionError("malformed selection accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
