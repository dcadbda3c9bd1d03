"""Smoke test of the compiled extension: python python/smoke_test.py"""

import math

import rosenblatt as rb


def main():
    p = rb.Params(H=0.75, n=16, bm_mesh=512, output_grid_size=9)
    assert abs(p.epsilon - 16 ** (-0.44 / (1 - 0.75 / 2))) < 1e-12, p.epsilon

    c_h, rel = rb.normalizing_constant(p)
    assert c_h > 0 and rel <= 1e-4

    run = rb.simulate(p, seed=3, with_reference=True)
    assert run["t"][0] == 0.0 and run["X"][0] == 0.0
    for x1, x2, x3, x in zip(run["X1"], run["X2"], run["X3"], run["X"]):
        assert x == x1 + 2 * x2 + x3
    assert len(run["Xref"]) == len(run["t"])
    assert run == rb.simulate(p, seed=3, with_reference=True)

    t, v = rb.simulate_transport(8, 0.0, 1.0, seed=1)
    assert t[0] == 0.0 and t[-1] == 1.0 and v[0] == 0.0
    for k in range(len(t) - 1):
        assert math.isclose(abs(v[k + 1] - v[k]), 8 * (t[k + 1] - t[k]), rel_tol=1e-9, abs_tol=1e-12)

    report = rb.verify("constants", p)
    assert report["pass"], report["checks"]
    report = rb.verify("coupling", p, reps=20, ns=[8, 16, 32])
    assert len(report["rows"]) == 3

    assert rb.config_hash({"a": 1, "b": 2}) == rb.config_hash({"b": 2, "a": 1})

    try:
        rb.Params(beta=0.3)
    except rb.ConfigError as e:
        assert "ERR_BETA" in str(e)
    else:
        raise AssertionError("beta=0.3 accepted")

    print("smoke test ok")


if __name__ == "__main__":
    main()
