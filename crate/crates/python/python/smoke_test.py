"""Smoke test for the pyvarcycle extension module."""

import math

import pyvarcycle as vc


def main():
    p = vc.ModelParams(3, 0.1, 0.9, a=[0.2, 0.3, 0.5], b=[0.4, 0.4, 0.2])
    dec = p.decompose()
    assert dec.regime == "diagonalizable_real"
    mq, ident, ok = dec.verify()
    assert ok and mq < 1e-12 and ident < 1e-12
    tau_minus, tau_plus, tau_tilde = dec.tau
    assert abs(tau_minus - 7.384168123405) < 1e-9

    rec = vc.simulate(p, 100, 5, method="recursive")
    exp = vc.simulate(p, 100, 5, method="explicit")
    dev = max(abs(u - v) for zr, ze in zip(rec, exp) for u, v in zip(zr, ze))
    assert len(rec) == 101 and dev < 1e-10

    cov = vc.cross_covariance(p, 5, 2)
    assert len(cov) == 6
    assert vc.stationarity_gap(p, [2, 5, 10], [0, 1]) > 1e-3
    mean, ma, claimed, gap = vc.limiting_moments(p, mu=[1.0] * 6)
    assert gap > 0

    try:
        vc.ModelParams(2, 0.0, 0.0)
    except vc.VarcycleError:
        pass
    else:
        raise AssertionError("forbidden pair accepted")

    m = vc.CycleModel(1.09804, 0.7)
    assert m.regime == "complex_oscillatory" and m.invertible
    assert abs(m.period - 4.324059715) < 1e-6
    c1, c2 = m.fit_constants(0.3, -0.2)
    sol = m.homogeneous_solution(c1, c2, 10)
    assert abs(sol[0] - 0.3) < 1e-12 and abs(sol[1] + 0.2) < 1e-12

    x, h = m.simulate(700, 0)
    freq, period, prominence, stable = vc.dominant_period(x)
    assert abs(period / m.period - 1) < 0.1 and stable
    assert abs(freq * period - 1) < 1e-12 and math.isfinite(prominence)
    print(f"ok: regime={dec.regime} period={period:.3f} predicted={m.period:.3f}")


if __name__ == "__main__":
    main()
