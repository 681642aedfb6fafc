"""Smoke test for the convac Python extension.

Build and install with `pip install --no-build-isolation -e crates/py`, then
run `python python/smoke_test.py`.
"""

import math

import convac


def main():
    sigma, rho, theta0 = convac.profile()
    assert abs(sigma - 2 * math.sqrt(2) / 3) < 1e-8, sigma
    mid = len(rho) // 2
    assert rho[mid] == 0.0 and theta0[mid] == 0.0

    c = convac.Curve.circle((0.5, 0.5), 0.25)
    assert abs(c.area() - math.pi / 16) < 1e-12
    assert abs(c.curvature(0.3) - 4.0) < 1e-8
    # distance is positive inside, where c_A -> +1
    r, s = c.signed_distance((0.8, 0.5), 0.1)
    assert abs(r + 0.05) < 1e-12 and abs(s) < 1e-12

    cfg = convac.Config('[expansion]\nt_final = 0.05\n[residual]\ntime_nodes = 2\n')
    assert "[study]" in cfg.to_toml()
    exp = convac.Expansion(cfg)
    t, h1, h2, b = exp.tables(exp.slices() - 1)
    assert len(h1) == 128 and t > 0

    sol = exp.approximate(0.12)
    assert sol.value((0.5, 0.5), 0.0) == 1.0
    assert sol.value((0.02, 0.02), 0.0) == -1.0
    assert len(sol.sample(20, 0.0)) == 21 * 21
    assert math.isfinite(sol.min_eigenvalue(0.0))
    assert exp.residual(0.12) > 0.0

    slope, pairwise = convac.fit_order([0.1, 0.05, 0.025], [x**2.5 for x in (0.1, 0.05, 0.025)])
    assert abs(slope - 2.5) < 1e-12 and len(pairwise) == 2

    try:
        convac.fit_order([0.1], [1.0])
    except convac.ConvacError as e:
        assert "degenerate" in str(e)
    else:
        raise AssertionError("single eps must fail")

    print("python smoke test passed")


if __name__ == "__main__":
    main()
