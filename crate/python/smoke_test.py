"""Smoke test for the pyinterlace extension module.

Build and stage the module first:

    cargo build --release -p interlace-py
    cp target/release/libpyinterlace.so python/pyinterlace.so
    python3 python/smoke_test.py
"""

import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import pyinterlace  # noqa: E402


def main():
    g = pyinterlace.graph_summary("path2")
    assert g["vertices"] == 2, g

    # two vertices joined by a unit edge, unit kill at each end
    eq = pyinterlace.equilibrium("path2", "0")
    assert abs(eq["capacity"] - 1.5) < 1e-12, eq
    eq = pyinterlace.equilibrium("path2", "0;1")
    assert abs(eq["capacity"] - 2.0) < 1e-12, eq

    h = pyinterlace.hinge("biased_z:3", "-1..1")
    assert all(abs(h[(x, y)] - h[(y, x)]) < 1e-12 for (x, y) in h), h
    cap = pyinterlace.equilibrium("biased_z:3", "-1..1")["capacity"]
    assert abs(sum(h.values()) - cap) < 1e-12

    exact, bound = pyinterlace.poisson_shift_tv(1.0)
    assert abs(exact - math.exp(-1.0)) < 1e-12 and exact <= bound

    out = pyinterlace.run("vacancy", graph="path2", window="0;1", samples=20000, seed=5)
    assert out["passed"], out["reports"]
    r = out["reports"][0]
    assert abs(r["reference"] - math.exp(-2.0)) < 1e-12, r

    again = pyinterlace.run("vacancy", graph="path2", window="0;1", samples=20000, seed=5)
    assert again["reports"][0]["estimate"] == r["estimate"]

    try:
        pyinterlace.run("no_such_operation")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown operation accepted")

    print("pyinterlace smoke test passed")


if __name__ == "__main__":
    main()
