"""Experiment suites.  Each returns a :class:`ReportBundle`."""

from __future__ import annotations

import math
import zlib
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .. import flowint, model3d, section, spectra
from ..errors import DFLorenzError
from ..skew4d import Mode
from .config import SUITES, ExperimentConfig
from .report import ReportBundle


def item_rng(seed: int, suite: str, index: int) -> np.random.Generator:
    """Counter-based stream keyed by ``(seed, suite, index)``."""
    sid = zlib.crc32(suite.encode("utf-8"))
    return np.random.Generator(np.random.Philox(key=[int(seed) & (2**64 - 1), (sid << 32) | int(index)]))


def _map_items(fn, cfg: ExperimentConfig, n: int):
    """Run ``fn(cfg, i)`` for ``i < n``; results come back in index order."""
    jobs = max(1, int(cfg.get("run", "jobs")))
    if jobs == 1 or n < 2:
        return [_guard(fn, cfg, i) for i in range(n)]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(_guard, [fn] * n, [cfg] * n, range(n)))


def _guard(fn, cfg, i):
    try:
        return fn(cfg, i)
    except DFLorenzError as e:
        return {"error": f"{type(e).__name__}: {e}", "index": i}


def _split_errors(rep, suite, results):
    good = []
    for r in results:
        if isinstance(r, dict) and "error" in r:
            rep.errors.append({"suite": suite, "item": r["index"], "error": r["error"]})
        else:
            good.append(r)
    return good


# --- validate -------------------------------------------------------------


def run_validate(cfg: ExperimentConfig) -> ReportBundle:
    rep = ReportBundle()
    model = cfg.hybrid()
    vr = model.validate()
    vr.extend(model3d.validate_classical(cfg.classical().classical))
    t = rep.table("validate", ("name", "anchor", "inequality", "margin", "passed"))
    for c in vr.checks:
        rep.check(c.name, c.anchor, c.passed, c.margin, c.inequality)
        t.rows.append((c.name, c.anchor, c.inequality, c.margin, c.passed))
    return rep


# --- return map -----------------------------------------------------------


def run_return_map(cfg: ExperimentConfig) -> ReportBundle:
    rep = ReportBundle()
    o = cfg.section("return-map")
    model = cfg.hybrid()
    lp = model.lorenz
    g1 = -1.0 + (np.arange(o["n_x1"]) + 0.5) * 2.0 / o["n_x1"]
    g2 = -1.0 + (np.arange(o["n_x2"]) + 0.5) * 2.0 / o["n_x2"]
    g2 = g2[np.abs(g2) >= model3d.ON_LEAF_TOL]
    gs = np.linspace(-o["s_range"], o["s_range"], o["n_s"])
    X1, X2, S = np.meshgrid(g1, g2, gs, indexing="ij")
    Q = np.column_stack([X1.ravel(), X2.ravel(), S.ravel()])
    _, times, _, b = section.return_map_batch(model, Q, cfg.integrator())
    tmin = float(np.min(times))
    rep.check("return-time>=tau_E", "C1", tmin >= lp.tau_E, tmin, f">= {lp.tau_E}")
    rep.check("return-time>2", "C1", tmin > 2.0, tmin, "> 2")
    hi = float(np.quantile(times, 0.999))
    edges = np.linspace(lp.tau_E, max(hi, lp.tau_E + 1.0), o["bins"] + 1)
    counts, _ = np.histogram(np.minimum(times, edges[-1]), bins=edges)
    t = rep.table("return_time_hist", ("t_lo", "t_hi", "count"))
    t.rows.extend((float(a), float(c), int(n)) for a, c, n in zip(edges[:-1], edges[1:], counts))
    rep.metrics.update({"return_map.points": len(Q), "return_map.t_min": tmin, "return_map.t_max": float(np.max(times)),
                        "return_map.tube_fraction": float(np.mean(b > 0))})
    return rep


# --- cones ----------------------------------------------------------------


def run_cones(cfg: ExperimentConfig) -> ReportBundle:
    rep = ReportBundle()
    o = cfg.section("cones")
    model = cfg.hybrid()
    icfg = cfg.integrator()
    rng = item_rng(cfg.seed, "cones", 0)
    n = o["n_points"]
    x1 = rng.uniform(-1.0, 1.0, n)
    x2 = rng.uniform(-1.0, 1.0, n)
    x2 = np.where(np.abs(x2) < model3d.ON_LEAF_TOL, model3d.ON_LEAF_TOL * 10, x2)
    s = rng.uniform(-o["s_band"], o["s_band"], n)
    _, _, _, D0 = model3d.return_map0(model.lorenz, x1, x2)
    worst2, grow2 = section.cone_growth_batch(D0, o["alpha_in"], o["alpha_out"])
    n_fail = int(np.sum(~(worst2 <= 1.0)))
    rep.check("cone-invariance-2d", "P3", n_fail == 0, float(np.max(worst2)), "worst ratio <= 1 at every point")

    Q = np.column_stack([x1, x2, s])
    _, _, D, b = section.return_map_batch(model, Q, icfg)
    cone = section.Cone.standard(3, o["alpha_in"])
    w3 = np.empty(n)
    g3 = np.empty(n)
    for i in range(n):
        w3[i] = section.cone_check(D[i], o["alpha_in"], o["alpha_out"])[1]
        g3[i] = section.expansion_check(D[i], cone, o["lam_floor"])[1]
    rep.check("cone-invariance-3d", "Lemma5.5", bool(np.all(w3 <= 1.0)), float(np.max(w3)), "worst ratio <= 1 at every point")
    rep.check("expansion", "Lemma5.5", float(np.min(g3)) >= o["lam_floor"], float(np.min(g3)), f">= {o['lam_floor']}")

    rng = item_rng(cfg.seed, "cones", 1)
    m = o["n_near"]
    mag = np.exp(rng.uniform(math.log(10 * model3d.ON_LEAF_TOL), math.log(o["near_l"]), m))
    x2n = mag * rng.choice([-1.0, 1.0], m)
    Qn = np.column_stack([rng.uniform(-1.0, 1.0, m), x2n, rng.uniform(-o["s_band"], o["s_band"], m)])
    _, _, Dn, _ = section.return_map_batch(model, Qn, icfg)
    gn = np.array([section.expansion_check(Dk, cone, o["near_floor"])[1] for Dk in Dn])
    rep.check("expansion-near-L", "Lemma5.6", float(np.min(gn)) > o["near_floor"], float(np.min(gn)), f"> {o['near_floor']}")

    t = rep.table("cones", ("x1", "x2", "s", "tube", "ratio_2d", "ratio_3d", "growth"))
    t.rows.extend(zip(x1, x2, s, b > 0, worst2, w3, g3))
    rep.metrics.update({"cones.points": n, "cones.failures_2d": n_fail, "cones.min_growth_2d": float(np.min(grow2)),
                        "cones.near_points": m, "cones.near_min_growth": float(np.min(gn))})
    return rep


# --- cu-curves ------------------------------------------------------------


def _curve_item(cfg: ExperimentConfig, i: int):
    o = cfg.section("curves")
    rng = item_rng(cfg.seed, "curves", i)
    c = np.array([rng.uniform(-0.9, 0.9), rng.uniform(0.01, 0.99) * rng.choice([-1.0, 1.0]), rng.uniform(-0.5, 0.5)])
    J = section.CuCurve.segment(c, [0.0, 1.0, 0.0], o["length"])
    tr = section.iterate_cu_curve(cfg.hybrid(), J, o["eps0"], o["k_max"], until_crossing=True, cfg=cfg.integrator())
    return {"index": i, **tr.to_dict()}


def run_curves(cfg: ExperimentConfig) -> ReportBundle:
    rep = ReportBundle()
    o = cfg.section("curves")
    res = _split_errors(rep, "curves", _map_items(_curve_item, cfg, o["n_curves"]))
    t = rep.table("curves", ("index", "k", "first_crossing", "iterates", "final_length", "min_growth_unsplit"))
    for r in res:
        t.rows.append((r["index"], r["k"] if r["k"] is not None else -1, r["first_crossing"] if r["first_crossing"] is not None else -1,
                       r["iterates"], r["final_length"], r["min_growth_unsplit"]))
    ok = len(res) == o["n_curves"]
    ks = [r["k"] for r in res]
    reached = ok and all(k is not None and k <= o["k_max"] for k in ks)
    kmax = max((k for k in ks if k is not None), default=-1)
    rep.check("curves-reach-eps0", "Lemma5.8", reached, kmax, f"all reach {o['eps0']} within {o['k_max']}")
    gmin = min((r["min_growth_unsplit"] for r in res), default=math.nan)
    rep.check("curves-growth", "Lemma5.5", ok and gmin >= o["growth_floor"], gmin, f">= {o['growth_floor']}")
    n_cross = sum(r["first_crossing"] is not None for r in res)
    rep.check("curves-cross-L", "Lemma5.9", ok and n_cross == o["n_curves"], n_cross, f"= {o['n_curves']}")
    return rep


# --- exponents ------------------------------------------------------------


def _orbit_start(cfg, suite, i):
    rng = item_rng(cfg.seed, suite, i)
    return np.array([rng.uniform(-0.5, 0.5), rng.uniform(-0.9, 0.9), rng.uniform(-0.3, 0.3)])


def _exponent_item(cfg: ExperimentConfig, i: int):
    o = cfg.section("exponents")
    model = cfg.hybrid(mode=o["mode"])
    orb = flowint.hybrid_orbit(model, _orbit_start(cfg, "exponents", i), o["n_returns"], cfg.integrator(), transient=o["transient"])
    r = spectra.lpf_exponents(orb, orbit_id=f"orbit-{i}")
    m12 = spectra.domination_check(orb, (1, 2), o["t_window"])
    m21 = spectra.domination_check(orb, (2, 1), o["t_window"])
    return {"index": i, "exponents": r.exponents, "angles": r.subspace_angles, "fiber": r.fiber_exponent,
            "T": r.window_T, "dom12": m12, "dom21": m21}


def exponent_ordering(ex, theta, ls0, tol=1e-3):
    """Strict and chained orderings of ascending normal exponents."""
    ss, mid, top = ex
    strict = ss < -theta + 0.1 < mid <= 1e-3 < 0.01 <= top
    chain = ss <= ls0 + tol and ls0 < -theta and -theta <= mid + tol and mid <= tol and top > 0
    return strict, chain


def run_exponents(cfg: ExperimentConfig) -> ReportBundle:
    rep = ReportBundle()
    o = cfg.section("exponents")
    model = cfg.hybrid(mode=o["mode"])
    th = model.skew.theta
    ls0 = model3d.lambda_s0(model.lorenz)
    res = _split_errors(rep, "exponents", _map_items(_exponent_item, cfg, o["n_orbits"]))
    t = rep.table("exponents", ("index", "T", "eta_ss", "eta_I", "eta_2", "fiber", "angle_N2", "angle_N2I", "dom_1_2", "dom_2_1"))
    strict_all = chain_all = len(res) == o["n_orbits"]
    for r in res:
        ex = r["exponents"]
        s_ok, c_ok = exponent_ordering(ex, th, ls0)
        strict_all &= s_ok
        chain_all &= c_ok
        t.rows.append((r["index"], r["T"], *ex, r["fiber"], *r["angles"], r["dom12"], r["dom21"]))
    worst_gap = min((r["exponents"][1] - (-th + 0.1) for r in res), default=math.nan)
    rep.check("exponent-ordering", "Eq(6)", strict_all, worst_gap, "eta_ss < -theta+0.1 < eta_I <= 1e-3 < 0.01 <= eta_2")
    rep.check("exponent-chain", "Lemma4.2", chain_all, max((r["exponents"][0] for r in res), default=math.nan),
              "eta_ss <= lambda_s0 < -theta <= eta_I <= 0 < eta_2 (tol 1e-3)")
    d12 = min((r["dom12"] for r in res), default=math.nan)
    rep.check("domination-1|2", "Lemma4.3", d12 > 0, d12, "> 0")
    rep.metrics.update({"exponents.lambda_s0": ls0, "exponents.dom_2_1_min": min((r["dom21"] for r in res), default=math.nan)})

    # periodic orbit P: the fiber is neutral, as is the flow direction
    sn = cfg.hybrid(mode=Mode.SADDLE_NODE)
    P = sn.anchor
    orb = flowint.periodic_orbit(sn, [P.x1, P.x2, 0.0], o["n_periods"], cfg.integrator())
    rows = spectra.flow_fiber_rates(orb, P.period * (1 - 1e-9))
    worst = max(max(abs(r[2]), abs(r[3])) for r in rows)
    rep.check("neutral-P", "S3.3", worst <= 1e-6, worst, "|flow rate|, |fiber rate| <= 1e-6 per period")
    m21 = spectra.domination_check(orb, (2, 1), P.period * (1 - 1e-9))
    rep.check("P-unstable-dominates", "S3.3", m21 > 0, m21, "> 0")
    tp = rep.table("neutral_P", ("t0", "duration", "flow_rate", "fiber_rate"))
    tp.rows.extend(rows)
    return rep


# --- sectional expansion --------------------------------------------------


def _sectional_item(cfg: ExperimentConfig, i: int):
    o = cfg.section("sectional")
    model = cfg.hybrid()
    q0 = _orbit_start(cfg, "sectional", i)
    n_ret = o["burn_in"] + int(math.ceil(o["T"] / model.lorenz.tau_E)) + 1
    orb = flowint.hybrid_orbit(model, q0, n_ret, cfg.integrator(), transient=o["transient"])
    T_tot = orb.times[o["burn_in"]] + o["T"]
    rep = spectra.sectional_expansion_rate(orb, T=T_tot, w=o["w"], burn_in=o["burn_in"])
    return {"index": i, "gamma": rep.gamma, "t0": rep.worst_interval[0], "t1": rep.worst_interval[1]}


def run_sectional(cfg: ExperimentConfig) -> ReportBundle:
    rep = ReportBundle()
    o = cfg.section("sectional")
    model = cfg.hybrid()
    gam = model.lorenz.gamma
    res = _split_errors(rep, "sectional", _map_items(_sectional_item, cfg, o["n_orbits"]))
    t = rep.table("sectional", ("index", "gamma", "worst_t0", "worst_t1"))
    t.rows.extend((r["index"], r["gamma"], r["t0"], r["t1"]) for r in res)
    gmin = min((r["gamma"] for r in res), default=math.nan)
    rep.check("sectional-gamma", "Eq(1)", len(res) == o["n_orbits"] and gmin >= gam, gmin, f">= {gam}")

    P = model.anchor
    orb = flowint.periodic_orbit(model, [P.x1, P.x2, 0.0], o["n_periods"], cfg.integrator())
    sr = spectra.sectional_expansion_rate(orb, w=o["w"], burn_in=o["p_burn_in"])
    slope = float(model3d.quotient_map(model.lorenz, P.x2)[1])
    closed = math.log(abs(slope)) / P.period
    err = abs(sr.gamma - closed)
    rep.check("sectional-P", "Eq(5)", err <= 1e-6, err, "|gamma - log|f'|/T_P| <= 1e-6")
    rep.metrics.update({"sectional.P_gamma": sr.gamma, "sectional.P_closed_form": closed})
    return rep


# --- surgery --------------------------------------------------------------


def run_surgery(cfg: ExperimentConfig) -> ReportBundle:
    rep = ReportBundle()
    o = cfg.section("surgery")
    try:
        deltas = [float(v) for v in str(o["deltas"]).replace(";", ",").split(",") if v.strip()]
    except ValueError:
        from ..errors import ConfigError

        raise ConfigError(f"invalid value {o['deltas']!r} for config key 'surgery.deltas'", "surgery.deltas") from None
    icfg = cfg.integrator()
    t = rep.table("surgery", ("mode", "kappa", "delta", "orbit", "period", "index", "fiber_multiplier", "closed_form", "m1", "m2", "m3", "m4"))
    th = cfg.skew().theta
    kappa = o["kappa"]

    def add(mode, delta, label, f, closed):
        t.rows.append((mode, kappa, delta, label, f.period, f.index, f.fiber_multiplier, closed, *f.multipliers))

    base = cfg.hybrid(mode=Mode.NONE)
    for label, q in spectra.periodic_points(base).items():
        try:
            f = spectra.floquet(base, q, cfg=icfg, label=label)
        except DFLorenzError as e:
            rep.errors.append({"suite": "surgery", "item": f"none/{label}", "error": str(e)})
            continue
        add("none", 0.0, label, f, math.exp(-th * f.period))
        rep.check(f"index-{label}-none", "S3.4", f.index == 2, f.index, "= 2")

    for d in deltas:
        model = cfg.hybrid(mode=Mode.TRIPLET, kappa=kappa, delta=d)
        for label, q in spectra.periodic_points(model).items():
            try:
                f = spectra.floquet(model, q, cfg=icfg, label=label)
            except DFLorenzError as e:
                rep.errors.append({"suite": "surgery", "item": f"delta={d}/{label}", "error": str(e)})
                continue
            T = f.period
            if label == "P":
                closed = math.exp(kappa * d * d * T)
                want = 1 if d > 0 else None
            elif label == "Q":
                closed = math.exp(-th * T)
                want = 2
            else:
                closed = math.exp(-2.0 * kappa * d * d * T)
                want = 2
            add("triplet", d, label, f, closed)
            err = abs(f.fiber_multiplier - closed)
            tag = f"{label}@delta={d:g}"
            rep.check(f"fiber-multiplier-{tag}", "S3.4", err <= 1e-6, err, "|mu - closed form| <= 1e-6")
            if want is not None:
                rep.check(f"index-{tag}", "S3.4", f.index == want, f.index, f"= {want}")
    return rep


# --- classical cross-check ------------------------------------------------


def integrator_oracles(cfg: ExperimentConfig):
    """Closed-form, finite-difference and cocycle checks of the integrator."""
    icfg = cfg.integrator()
    lp = cfg.lorenz()
    th = cfg.skew().theta
    lin = flowint.linear_block_field(lp, th)
    x0 = np.array([0.2, 0.25, 1.0, 0.1])
    lam = np.array([lp.lambda_s, lp.lambda_u, lp.lambda_c, -th])
    seg = flowint.integrate_tangent(lin, x0, 5.0, icfg)
    exact = x0 * np.exp(np.outer(seg.times, lam))
    lin_err = float(np.max(np.abs(seg.states - exact) / np.maximum(1.0, np.abs(exact))))
    fr_err = float(np.max(np.abs(seg.frames[-1] - np.diag(np.exp(5.0 * lam)))))

    cm = cfg.classical()
    y0 = np.array([1.0, 1.0, 1.0, 0.1])
    s1 = flowint.integrate_tangent(cm.field, y0, 1.0, icfg)
    h = cfg.get("classical-xcheck", "fd_step")
    fd = np.empty((4, 4))
    for j in range(4):
        e = np.zeros(4)
        e[j] = h
        a = flowint.integrate(cm.field, y0 + e, 1.0, icfg).states[-1]
        b = flowint.integrate(cm.field, y0 - e, 1.0, icfg).states[-1]
        fd[:, j] = (a - b) / (2 * h)
    fd_err = float(np.max(np.abs(fd - s1.frames[-1])))

    s2 = flowint.integrate_tangent(cm.field, y0, 2.0, icfg)
    s12 = flowint.integrate_tangent(cm.field, s1.states[-1], 1.0, icfg)
    F = s2.frames[-1]
    coc_err = float(np.max(np.abs(F - s12.frames[-1] @ s1.frames[-1])) / max(1.0, float(np.max(np.abs(F)))))
    return {"linear": lin_err, "linear_frame": fr_err, "fd": fd_err, "cocycle": coc_err}


def run_classical_xcheck(cfg: ExperimentConfig) -> ReportBundle:
    rep = ReportBundle()
    o = cfg.section("classical-xcheck")
    orc = integrator_oracles(cfg)
    rep.check("integrator-linear", "S1.2", orc["linear"] <= 1e-9, orc["linear"], "<= 1e-9")
    rep.check("integrator-fd-frames", "S1.2", orc["fd"] <= 1e-5, orc["fd"], "<= 1e-5")
    rep.check("integrator-cocycle", "S1.2", orc["cocycle"] <= 1e-8, orc["cocycle"], "<= 1e-8")

    cm = cfg.classical()
    p = cm.classical
    icfg = cfg.integrator()
    a = spectra.lyapunov_spectrum(p, T=o["T"], t_sample=o["t_sample"], transient=o["transient"], cfg=icfg)
    b = spectra.lyapunov_spectrum(p, T=o["T"], t_sample=o["t_sample"], transient=o["transient"],
                                  cfg=cfg.integrator(rel_tol=o["rel_tol_alt"], abs_tol=max(icfg.abs_tol, o["rel_tol_alt"] * 1e-2)))
    t = rep.table("lyapunov", ("rel_tol", "T", "l1", "l2", "l3", "sum", "trace"))
    tr = -(p.sigma + 1.0 + p.beta)
    for r in (a, b):
        t.rows.append((r.rel_tol, r.T, *r.exponents[::-1], sum(r.exponents), tr))
    rep.check("classical-lyapunov", "S1.2", abs(a.largest - 0.906) <= 0.05, a.largest, "0.906 +- 0.05")
    rep.check("classical-lyapunov-tol", "S1.2", abs(a.largest - b.largest) <= 0.01, abs(a.largest - b.largest), "<= 0.01")
    ev = np.sort(np.linalg.eigvals(model3d.classical_field(p, np.zeros(3))[1]).real)
    err = float(np.max(np.abs(ev - spectra.classical_origin_eigenvalues(p))))
    rep.check("origin-eigenvalues", "S1.2", err <= 1e-9, err, "<= 1e-9")
    rep.metrics.update({"classical.lyapunov_max": a.largest, "classical.kernel": a.kernel})
    return rep


RUNNERS = {
    "validate": run_validate,
    "return-map": run_return_map,
    "cones": run_cones,
    "curves": run_curves,
    "exponents": run_exponents,
    "sectional": run_sectional,
    "surgery": run_surgery,
    "classical-xcheck": run_classical_xcheck,
}
assert tuple(RUNNERS) == SUITES


def run_experiment(cfg: ExperimentConfig, suite: str = "all") -> ReportBundle:
    names = SUITES if suite == "all" else (suite,)
    rep = ReportBundle(config_echo=cfg.to_ini())
    for name in names:
        try:
            part = RUNNERS[name](cfg)
        except DFLorenzError as e:
            if type(e).__name__ == "ConfigError":
                raise
            part = ReportBundle(errors=[{"suite": name, "item": "suite", "error": f"{type(e).__name__}: {e}"}])
        for c in part.checks:
            c.name = f"{name}/{c.name}"
        part.tables = {(k if suite != "all" else f"{name}.{k}"): v for k, v in part.tables.items()}
        rep.merge(part)
    return rep
