"""Smoke test for the adhesion extension module."""

import math
import tempfile
from pathlib import Path

import adhesion

CASE_II1 = """
[model]
alpha = 0.9
beta = 1.0
initial = { kind = "bump", base = 0.0269, amplitude = 0.4231, power = 8 }
[grid]
cells = 64
[laminate]
r1 = 0.098
r2 = 0.0995
seeds = [1, 2]
"""


def main():
    p = adhesion.FluxParams(0.9, 1.0)
    assert p.classify() == "FDBDF"
    assert adhesion.classify(0.6, 0.6) == "FDB"
    assert abs(p.rho(0.6) - 0.1464) < 1e-12
    assert abs(p.sigma(0.6) + 0.188) < 1e-12

    c = adhesion.critical_points(0.9, 1.0)
    assert c["model_type"] == "TypeII"
    assert abs(c["s0_minus"] - 0.39450) < 1e-5
    assert abs(p.sigma(c["s0_plus"])) < 1e-12

    s = adhesion.invert_branch(0.9, 1.0, 0.0985, "plus")
    assert abs(p.rho(s) - 0.0985) < 1e-12 and s > c["s0_plus"]
    assert abs(p.invert(0.0985, "minus") - 0.124776) < 1e-6
    try:
        p.invert(0.5, "minus")
    except ValueError:
        pass
    else:
        raise AssertionError("out-of-range flux level accepted")

    m = adhesion.ModifiedFlux.two_sided(p, 0.098, 0.0995)
    a, b = m.window
    assert m.theta0 > 0
    assert m.rho(a - 0.01) == p.rho(a - 0.01)
    assert all(m.sigma(a + (b - a) * k / 100) >= m.theta0 for k in range(101))

    n = 32
    u0 = [0.6 + 0.2 * math.cos(math.pi * (i + 0.5) / n) for i in range(n)]
    times, values = m.solve(u0, 0.01, dt=1e-4)
    assert len(times) == len(values) and abs(times[-1] - 0.01) < 1e-12
    assert abs(sum(values[-1]) - sum(u0)) < 1e-10

    with tempfile.TemporaryDirectory() as d:
        report = adhesion.run_scenario(CASE_II1, out=d)
        assert report["case"] == "ii-1"
        assert report["pass"], [i for i in report["items"] if not i["pass"]]
        assert (Path(d) / "report.json").exists()
        assert (Path(d) / "fields" / "laminate_stage1_seed2.csv").exists()

    print("smoke test passed")


if __name__ == "__main__":
    main()
