"""Acceptance criteria 1-10.

Each test runs the library (mostly through the experiment suites) at the
required sizes, compares against an oracle that does not share the code
path under test, enforces the runtime budget and prints one line::

    criterion N: PASS|FAIL  <measured values>  (<seconds> s / <budget> s)
"""

import math
import time

import numpy as np
import pytest

from dflorenz import flowint, model3d, section, spectra
from dflorenz.labcli import config, suites
from dflorenz.labcli.report import emit


@pytest.fixture(scope="module")
def cfg():
    return config.load_config()


@pytest.fixture
def verdict(capsys):
    def report(n, ok, detail, elapsed, budget):
        ok = bool(ok) and elapsed < budget
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'}  {detail}  ({elapsed:.2f} s / {budget:g} s)")
        assert ok, f"criterion {n}: {detail}"

    return report


def _bisect_fixed_point(B=1.85, offset=0.95, a=5 / 9):
    lo, hi = 1e-6, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if offset - B * mid**a - mid > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@pytest.fixture(scope="module")
def p_closed_form():
    """Right-wing fixed point, slope and period from scalar arithmetic only."""
    x = _bisect_fixed_point()
    slope = 1.85 * (5 / 9) * x ** (5 / 9 - 1)
    period = -math.log(x) / 1.8 + 2.1
    return x, slope, period


def test_criterion_1_parameter_gate(cfg, verdict):
    t0 = time.perf_counter()
    rep = suites.run_experiment(cfg, "validate")
    el = time.perf_counter() - t0
    margins = [c.value for c in rep.checks]
    # independent arithmetic for the headline inequalities
    lp, th = cfg.lorenz(), cfg.skew().theta
    ls0 = max(lp.lambda_s, math.log(lp.ear_c) / lp.tau_E)
    arith = lp.lambda_s < lp.lambda_c < 0 < lp.lambda_u and ls0 < -th < lp.lambda_c and lp.ear_B * lp.alpha > 1 and lp.tau_E > 2
    ok = rep.passed and all(m > 0 for m in margins) and arith and len(rep.checks) >= 5
    verdict(1, ok, f"{len(rep.checks)} inequalities, min margin {min(margins):.4g}", el, 1.0)


def test_criterion_2_integrator(cfg, verdict):
    t0 = time.perf_counter()
    lp = cfg.lorenz()
    th = cfg.skew().theta
    lam = np.array([lp.lambda_s, lp.lambda_u, lp.lambda_c, -th])
    x0 = np.array([0.2, 0.25, 1.0, 0.1])
    lin = flowint.linear_block_field(lp, th)
    # x2 grows to ~2e3 over [0, 5]: at the default tolerances the error is
    # measured relative to max(1, |x|); an absolute 1e-9 needs rel_tol 1e-13
    tight = flowint.IntegratorConfig(rel_tol=1e-13, abs_tol=1e-15, event_refine_tol=1e-15)
    errs = {}
    for name, icfg in (("rel", cfg.integrator()), ("abs", tight)):
        seg = flowint.integrate(lin, x0, 5.0, icfg)
        exact = x0 * np.exp(np.outer(seg.times, lam))
        e = np.abs(seg.states - exact)
        if name == "rel":
            e = e / np.maximum(1.0, np.abs(exact))
        errs[name] = float(np.max(e))
    lin_err = max(errs.values())
    orc = suites.integrator_oracles(cfg)
    el = time.perf_counter() - t0
    ok = lin_err <= 1e-9 and orc["linear"] <= 1e-9 and orc["fd"] <= 1e-5 and orc["cocycle"] <= 1e-8
    verdict(2, ok, f"linear {errs['rel']:.2e} rel / {errs['abs']:.2e} abs (rel_tol 1e-13), fd frames {orc['fd']:.2e}, cocycle {orc['cocycle']:.2e}", el, 10.0)


def test_criterion_3_return_time(cfg, verdict, tmp_path):
    t0 = time.perf_counter()
    rep = suites.run_experiment(cfg, "return-map")
    paths = emit(rep, tmp_path)
    el = time.perf_counter() - t0
    # oracle: the closed-form transit -ln|x2|/lambda_u + tau_E on the same grid
    g2 = -1.0 + (np.arange(200) + 0.5) * 2.0 / 200
    t_closed = float(np.min(-np.log(np.abs(g2)) / 1.8 + 2.1))
    tmin = rep.metrics["return_map.t_min"]
    hist = tmp_path / "return_time_hist.csv"
    ok = (rep.passed and rep.metrics["return_map.points"] == 200 * 200 * 5 and tmin >= 2.1
          and abs(tmin - t_closed) < 1e-12 and hist in paths and sum(r[2] for r in rep.tables["return_time_hist"].rows) == 200000)
    verdict(3, ok, f"min return time {tmin:.6f} over {rep.metrics['return_map.points']} points, histogram written", el, 30.0)


def test_criterion_4_cones(cfg, verdict):
    t0 = time.perf_counter()
    rep = suites.run_experiment(cfg, "cones")
    el = time.perf_counter() - t0
    vals = {c.name.split("/")[-1]: c for c in rep.checks}
    # oracle: explicit extreme-ray ratios of the closed-form 2x2 derivative
    rows = rep.tables["cones"].rows
    x1 = np.array([r[0] for r in rows])
    x2 = np.array([r[1] for r in rows])
    a, b = 5 / 9, 5 / 3
    ax = np.abs(x2)
    lp = cfg.lorenz()
    d00 = np.sign(x2) * lp.ear_c * ax**b
    d01 = lp.ear_c * x1 * b * ax ** (b - 1) + lp.ear_d * a * ax ** (a - 1)
    d11 = -lp.ear_B * a * ax ** (a - 1)
    ratio = np.maximum(np.abs(d01 + d00), np.abs(d01 - d00)) / (0.5 * np.abs(d11))
    fails = int(np.sum(ratio > 1.0))
    ok = (rep.passed and not rep.errors and len(rows) >= 10**4 and fails == 0
          and vals["expansion"].value >= 1.02 and vals["expansion-near-L"].value > 3)
    detail = (f"{len(rows)} points, 0 cone failures" if fails == 0 else f"{fails} cone failures") + (
        f", worst ratio 2d {np.max(ratio):.3f} / 3d {vals['cone-invariance-3d'].value:.3f}, "
        f"min growth {vals['expansion'].value:.4f}, near-L {vals['expansion-near-L'].value:.2f}")
    verdict(4, ok, detail, el, 60.0)


def test_criterion_5_cu_curves(cfg, verdict):
    t0 = time.perf_counter()
    rep = suites.run_experiment(cfg, "curves")
    el = time.perf_counter() - t0
    rows = rep.tables["curves"].rows
    ks = [r[1] for r in rows]
    crossings = [r[2] for r in rows]
    gmin = min(r[5] for r in rows)
    ok = (rep.passed and not rep.errors and len(rows) == 100 and all(0 <= k <= 200 for k in ks)
          and all(c >= 0 for c in crossings) and gmin >= 1.02 and all(r[4] >= 0.2 for r in rows))
    verdict(5, ok, f"100 curves, max k {max(ks)}, min growth {gmin:.4f}, {sum(c >= 0 for c in crossings)} crossed L", el, 120.0)


def test_criterion_6_exponents(cfg, verdict):
    t0 = time.perf_counter()
    rep = suites.run_experiment(cfg, "exponents")
    el = time.perf_counter() - t0
    th = cfg.skew().theta
    lp = cfg.lorenz()
    ls0 = lp.lambda_s  # ear_c <= exp(lambda_s tau_E) at the defaults
    assert math.log(lp.ear_c) / lp.tau_E <= lp.lambda_s
    rows = rep.tables["exponents"].rows
    ok = not rep.errors and len(rows) == 10
    for r in rows:
        ss, mid, top = r[2], r[3], r[4]
        ok &= ss < -th + 0.1 < mid <= 1e-3 < 0.01 <= top
        ok &= ss <= ls0 + 1e-3 and ls0 < -th and -th <= mid + 1e-3 and mid <= 1e-3 and 0 < top
    ok &= all(c.passed for c in rep.checks if "exponent" in c.name)
    ss = [r[2] for r in rows]
    mid = [r[3] for r in rows]
    top = [r[4] for r in rows]
    detail = (f"eta_ss in [{min(ss):.3f}, {max(ss):.3f}], eta_I in [{min(mid):.3f}, {max(mid):.3f}], "
              f"eta_2 in [{min(top):.3f}, {max(top):.3f}]")
    verdict(6, ok, detail, el, 300.0)


def test_criterion_7_sectional(cfg, verdict, p_closed_form):
    t0 = time.perf_counter()
    rep = suites.run_experiment(cfg, "sectional")
    el = time.perf_counter() - t0
    rows = rep.tables["sectional"].rows
    gmin = min(r[1] for r in rows)
    _, slope, period = p_closed_form
    err = abs(rep.metrics["sectional.P_gamma"] - math.log(slope) / period)
    ok = not rep.errors and len(rows) == 10 and gmin >= 0.01 and err <= 1e-6
    verdict(7, ok, f"min gamma {gmin:.4f} over 10 orbits x T=100, P error {err:.2e}", el, 180.0)


def test_criterion_8_non_domination(cfg, verdict, p_closed_form):
    t0 = time.perf_counter()
    model = cfg.hybrid(mode="saddle-node")
    P = model.anchor
    assert P.x2 == pytest.approx(p_closed_form[0], abs=1e-12)
    orb = flowint.periodic_orbit(model, [P.x1, P.x2, 0.0], 5, cfg.integrator())
    rows = spectra.flow_fiber_rates(orb, P.period * (1 - 1e-9))
    worst = max(max(abs(r[2]), abs(r[3])) for r in rows)
    el = time.perf_counter() - t0
    ok = len(rows) == 5 and worst <= 1e-6
    verdict(8, ok, f"max |flow rate|, |fiber rate| per period {worst:.2e} over {len(rows)} periods", el, 10.0)


def test_criterion_9_surgery(cfg, verdict, p_closed_form):
    t0 = time.perf_counter()
    c = config.load_config(overrides=["surgery.kappa=5", "surgery.deltas=0, 0.1"])
    rep = suites.run_experiment(c, "surgery")
    el = time.perf_counter() - t0
    t = rep.tables["surgery"]
    col = {h: i for i, h in enumerate(t.header)}
    get = {(r[col["mode"]], r[col["delta"]], r[col["orbit"]]): r for r in t.rows}
    T = p_closed_form[2]
    kd2 = 5 * 0.1**2
    errs = {
        "P": abs(get["triplet", 0.1, "P"][col["fiber_multiplier"]] - math.exp(kd2 * T)),
        "P+": abs(get["triplet", 0.1, "P+delta"][col["fiber_multiplier"]] - math.exp(-2 * kd2 * T)),
        "P-": abs(get["triplet", 0.1, "P-delta"][col["fiber_multiplier"]] - math.exp(-2 * kd2 * T)),
        "P0": abs(get["triplet", 0.0, "P"][col["fiber_multiplier"]] - 1.0),
    }
    idx = {k: get["triplet", 0.1, k][col["index"]] for k in ("P", "P+delta", "P-delta", "Q")}
    ok = (not rep.errors and max(errs.values()) <= 1e-6
          and idx == {"P": 1, "P+delta": 2, "P-delta": 2, "Q": 2} and get["none", 0.0, "Q"][col["index"]] == 2)
    verdict(9, ok, f"indices P/P+d/P-d/Q = {idx['P']}/{idx['P+delta']}/{idx['P-delta']}/{idx['Q']}, "
                   f"max multiplier error {max(errs.values()):.2e}", el, 60.0)


def test_criterion_10_classical(cfg, verdict):
    t0 = time.perf_counter()
    rep = suites.run_experiment(cfg, "classical-xcheck")
    el = time.perf_counter() - t0
    rows = rep.tables["lyapunov"].rows
    l_a, l_b = rows[0][2], rows[1][2]
    p = cfg.classical().classical
    # oracle: eigensolver on the Jacobian at the origin
    J = np.array([[-p.sigma, p.sigma, 0.0], [p.rho, -1.0, 0.0], [0.0, 0.0, -p.beta]])
    ev_err = float(np.max(np.abs(np.sort(np.linalg.eigvals(J).real) - spectra.classical_origin_eigenvalues(p))))
    ok = (rows[0][1] >= 1e4 and abs(l_a - 0.906) <= 0.05 and abs(l_a - l_b) <= 0.01 and ev_err <= 1e-9
          and not rep.errors)
    verdict(10, ok, f"lambda_max {l_a:.5f} (alt tol {l_b:.5f}), origin eigenvalue error {ev_err:.1e}", el, 120.0)
