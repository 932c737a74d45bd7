"""Finite-time spectra along orbits.

Normal (linear Poincare flow) exponents by QR, window-wise domination
margins, area growth of the flow-plus-unstable plane, Floquet data of
periodic orbits and the full Lyapunov spectrum of the classical system.
The metric is the Euclidean product metric on ``(x1, x2, x3, s)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.linalg import subspace_angles

from . import core, flowint
from .errors import NearSingularityError, PeriodicityError
from .flowint import IntegratorConfig, OrbitSegment
from .model3d import ClassicalParams, classical_field
from .skew4d import HybridModel, Mode

SINGULAR_RADIUS = 1e-6


@dataclass
class ExponentReport:
    window_T: float
    exponents: List[float]
    subspace_angles: List[float] = field(default_factory=list)
    orbit_id: str = ""
    flow_exponent: float = 0.0
    fiber_exponent: Optional[float] = None

    def to_dict(self):
        return {
            "orbit_id": self.orbit_id,
            "window_T": self.window_T,
            "exponents": list(self.exponents),
            "subspace_angles": list(self.subspace_angles),
            "flow_exponent": self.flow_exponent,
            "fiber_exponent": self.fiber_exponent,
        }


@dataclass
class FloquetReport:
    period: float
    multipliers: List[float]
    index: int
    fiber_multiplier: float
    flow_multiplier: float = 1.0
    eigenvalues: List[complex] = field(default_factory=list)
    label: str = ""

    def to_dict(self):
        return {
            "label": self.label,
            "period": self.period,
            "multipliers": list(self.multipliers),
            "index": self.index,
            "fiber_multiplier": self.fiber_multiplier,
            "flow_multiplier": self.flow_multiplier,
        }


@dataclass
class _QRTrace:
    dt: np.ndarray  # (m,) step durations
    logr: np.ndarray  # (m, k) log diagonal of R per step
    logflow: np.ndarray  # (m,) log |X(next)| / |X(this)|
    logfiber: Optional[np.ndarray]  # (m,) growth of the transported fiber direction
    Q: np.ndarray  # final normal frame (n, k)
    x_end: np.ndarray
    flow_end: np.ndarray


def _check_clearance(orbit: OrbitSegment, radius=SINGULAR_RADIUS):
    clr = orbit.meta.get("min_clearance")
    if clr is None:
        clr = float(np.min(np.linalg.norm(orbit.states[:, :3], axis=1)))
    if clr < radius:
        raise NearSingularityError(f"orbit passes within {clr:.3g} of the singularity")


def _proj(X):
    X = np.asarray(X, dtype=float)
    return np.eye(X.size) - np.outer(X, X) / (X @ X)


def _reference(n, flow):
    """Reference normal directions ``(N2, N^I, N^ss)`` at a point with field ``flow``."""
    P = _proj(flow)
    cols = [P[:, 1]]
    if n == 4:
        cols.append(P[:, 3])
    cols.append(P[:, 0])
    return np.column_stack(cols)


def _qr_trace(orbit: OrbitSegment, burn_in: int = 0) -> _QRTrace:
    _check_clearance(orbit)
    steps = orbit.step_matrices()
    flows = orbit.flows
    if flows is None:
        raise ValueError("orbit carries no flow vectors")
    n = flows.shape[1]
    Q = np.linalg.qr(_reference(n, flows[0]))[0]
    m = len(steps)
    logr = np.empty((m, n - 1))
    logflow = np.empty(m)
    logfib = np.empty(m) if n == 4 else None
    for i in range(m):
        M = steps[i]
        P1 = _proj(flows[i + 1])
        Q, R = np.linalg.qr(P1 @ (M @ Q))
        d = np.sign(np.diag(R))
        d[d == 0] = 1.0
        Q = Q * d
        logr[i] = np.log(np.abs(np.diag(R)))
        logflow[i] = math.log(np.linalg.norm(flows[i + 1]) / np.linalg.norm(flows[i]))
        if logfib is not None:
            # the fiber line is invariant; restart from the reference each step
            # so that round-off cannot drift it towards the unstable direction
            f = _proj(flows[i])[:, 3]
            f /= np.linalg.norm(f)
            logfib[i] = math.log(np.linalg.norm(P1 @ (M @ f)))
    dt = np.diff(orbit.times)
    sl = slice(burn_in, None)
    return _QRTrace(dt[sl], logr[sl], logflow[sl], None if logfib is None else logfib[sl], Q, orbit.states[-1], flows[-1])


def lpf_exponents(orbit: OrbitSegment, T: Optional[float] = None, burn_in: int = 0, orbit_id: str = "") -> ExponentReport:
    """Finite-time normal exponents of the linear Poincare flow, ascending.

    ``T`` truncates the orbit to its first samples covering time ``T``.
    """
    orbit = _truncate(orbit, T)
    tr = _qr_trace(orbit, burn_in)
    dur = float(np.sum(tr.dt))
    if not dur > 0:
        raise ValueError("orbit has zero duration")
    ex = np.sort(np.sum(tr.logr, axis=0) / dur)
    n = tr.Q.shape[0]
    angles = []
    if n == 4:
        ref = _reference(4, tr.flow_end)
        for k in (1, 2):
            angles.append(float(np.max(subspace_angles(tr.Q[:, :k], ref[:, :k]))))
    fib = None if tr.logfiber is None else float(np.sum(tr.logfiber) / dur)
    return ExponentReport(dur, [float(v) for v in ex], angles, orbit_id, float(np.sum(tr.logflow) / dur), fib)


def _truncate(orbit: OrbitSegment, T):
    if T is None:
        return orbit
    t = orbit.times - orbit.times[0]
    k = int(np.searchsorted(t, T - 1e-12)) + 1
    k = min(max(k, 2), len(orbit))
    steps = orbit.step_matrices()[: k - 1]
    return OrbitSegment(orbit.times[:k], orbit.states[:k], steps=steps, flows=orbit.flows[:k], meta=dict(orbit.meta))


def _windows(dt, T_window):
    """``(i, j)`` index ranges ``[i, j)`` of minimal runs of steps with duration >= ``T_window``."""
    c = np.concatenate([[0.0], np.cumsum(dt)])
    out = []
    for i in range(len(dt)):
        j = int(np.searchsorted(c, c[i] + T_window - 1e-12))
        if j > len(dt):
            break
        out.append((i, max(j, i + 1)))
    return out, c


def domination_windows(orbit: OrbitSegment, dims=(1, 2), T_window: float = 5.0, burn_in: int = 0):
    """Per-window rows ``(t0, duration, margin)`` for the split ``dims = (dim E, dim F)``.

    The margin of a window is the slowest rate in ``F`` (the top block)
    minus the fastest rate in ``E`` (the bottom block).
    """
    tr = _qr_trace(orbit, burn_in)
    k = tr.logr.shape[1]
    e_dim, f_dim = dims
    if e_dim + f_dim != k or e_dim < 1 or f_dim < 1:
        raise ValueError(f"dims must split the {k}-dimensional normal space")
    wins, c = _windows(tr.dt, T_window)
    cs = np.vstack([np.zeros(k), np.cumsum(tr.logr, axis=0)])
    rows = []
    for i, j in wins:
        dur = c[j] - c[i]
        rates = (cs[j] - cs[i]) / dur
        rows.append((float(c[i]), float(dur), float(np.min(rates[:f_dim]) - np.max(rates[f_dim:]))))
    return rows


def domination_check(orbit: OrbitSegment, dims=(1, 2), T_window: float = 5.0, burn_in: int = 0) -> float:
    """Minimum window margin; positive is finite-time domination evidence."""
    rows = domination_windows(orbit, dims, T_window, burn_in)
    if not rows:
        raise ValueError("orbit shorter than one window")
    return min(r[2] for r in rows)


def flow_fiber_rates(orbit: OrbitSegment, T_window: float, burn_in: int = 0):
    """Per-window ``(t0, duration, flow_rate, fiber_rate)`` along a 4D orbit."""
    tr = _qr_trace(orbit, burn_in)
    if tr.logfiber is None:
        raise ValueError("orbit has no fiber direction")
    wins, c = _windows(tr.dt, T_window)
    cf = np.concatenate([[0.0], np.cumsum(tr.logflow)])
    cb = np.concatenate([[0.0], np.cumsum(tr.logfiber)])
    out = []
    for i, j in wins:
        dur = c[j] - c[i]
        out.append((float(c[i]), float(dur), float((cf[j] - cf[i]) / dur), float((cb[j] - cb[i]) / dur)))
    return out


def flow_fiber_margin(orbit: OrbitSegment, T_window: float, burn_in: int = 0) -> float:
    """Min over windows of (flow-direction rate - fiber rate)."""
    return min(r[2] - r[3] for r in flow_fiber_rates(orbit, T_window, burn_in))


@dataclass
class SectionalReport:
    gamma: float
    worst_interval: tuple
    window: float
    rates: np.ndarray


def sectional_expansion_rate(orbit: OrbitSegment, T: Optional[float] = None, w: float = 1.0, burn_in: int = 0) -> SectionalReport:
    """Minimal area growth rate of the plane ``flow + N2`` over windows of length ``>= w``.

    The N2 estimate is the leading column of the QR frame, so the plane is
    carried into itself and its area factor over a step is the flow-norm
    ratio times the leading diagonal of ``R``.
    """
    if w < 1.0:
        raise ValueError("window must be at least 1")
    orbit = _truncate(orbit, T)
    tr = _qr_trace(orbit, burn_in)
    logdet = tr.logflow + tr.logr[:, 0]
    wins, c = _windows(tr.dt, w)
    if not wins:
        raise ValueError("orbit shorter than one window")
    cl = np.concatenate([[0.0], np.cumsum(logdet)])
    rates = np.array([(cl[j] - cl[i]) / (c[j] - c[i]) for i, j in wins])
    k = int(np.argmin(rates))
    i, j = wins[k]
    return SectionalReport(float(rates[k]), (float(c[i]), float(c[j])), w, rates)


def normal_logdet(orbit: OrbitSegment) -> float:
    """``log |det|`` of the normal part of the tangent flow over the whole orbit."""
    tr = _qr_trace(orbit)
    return float(np.sum(tr.logr))


def singularity_spectrum(model) -> np.ndarray:
    """Eigenvalues of the field's Jacobian at the singularity, ascending by real part."""
    if isinstance(model, HybridModel):
        lp = model.lorenz
        J = np.diag([lp.lambda_s, lp.lambda_u, lp.lambda_c, -model.skew.theta])
    else:
        p = model.classical if hasattr(model, "classical") else model
        J = classical_field(p, np.zeros(3))[1]
    ev = np.linalg.eigvals(J)
    return ev[np.argsort(ev.real)]


def classical_origin_eigenvalues(p: ClassicalParams):
    """Closed form: ``-beta`` and the roots of ``l^2 + (sigma+1) l - sigma (rho-1)``."""
    a = p.sigma + 1.0
    disc = math.sqrt(a * a + 4.0 * p.sigma * (p.rho - 1.0))
    return np.sort(np.array([(-a - disc) / 2.0, -p.beta, (-a + disc) / 2.0]))


# --- periodic orbits ------------------------------------------------------


def floquet(model: HybridModel, q, mode=None, tol: float = 1e-9, cfg: IntegratorConfig = IntegratorConfig(), label: str = "") -> FloquetReport:
    """Floquet data of the period-one orbit through section point ``q``."""
    if mode is not None:
        model = model.with_skew(mode=Mode.parse(mode))
    q = np.asarray(q, dtype=float)
    ret = flowint.hybrid_return(model, q, cfg)
    res = float(np.max(np.abs(ret.point - q)))
    if res > tol:
        raise PeriodicityError(f"return residual {res:.3g} exceeds {tol:.1g}")
    M, X0, _ = flowint.return_tangent_map(model, q, ret)
    ev, V = np.linalg.eig(M)
    xhat = X0 / np.linalg.norm(X0)
    align = np.abs(np.conj(V).T @ xhat) / np.linalg.norm(V, axis=0)
    i_flow = int(np.argmax(align))
    rest = [i for i in range(len(ev)) if i != i_flow]
    fib_w = [abs(V[3, i]) / np.linalg.norm(V[:, i]) for i in rest]
    i_fib = rest[int(np.argmax(fib_w))]
    mods = np.abs(ev)
    index = int(sum(1 for i in rest if mods[i] < 1.0))
    return FloquetReport(
        period=ret.time,
        multipliers=sorted(float(m) for m in mods),
        index=index,
        fiber_multiplier=float(ev[i_fib].real) if abs(ev[i_fib].imag) < 1e-12 else float(mods[i_fib]),
        flow_multiplier=float(mods[i_flow]),
        eigenvalues=[complex(e) for e in ev],
        label=label,
    )


def periodic_points(model: HybridModel):
    """Section points of ``P``, ``Q`` and, in triplet mode, ``P_{+delta}``, ``P_{-delta}``."""
    P, Qr = model.anchor, model.other
    pts = {"P": np.array([P.x1, P.x2, 0.0]), "Q": np.array([Qr.x1, Qr.x2, 0.0])}
    if model.skew.mode == Mode.TRIPLET and model.skew.delta > 0:
        d = model.skew.delta
        pts["P+delta"] = np.array([P.x1, P.x2, d])
        pts["P-delta"] = np.array([P.x1, P.x2, -d])
    return pts


# --- classical Lyapunov spectrum -----------------------------------------


@dataclass
class SpectrumReport:
    exponents: List[float]  # ascending
    T: float
    rel_tol: float
    kernel: str

    @property
    def largest(self) -> float:
        return self.exponents[-1]


def lyapunov_spectrum(p: ClassicalParams = ClassicalParams(), x0=(1.0, 1.0, 1.0), T: float = 1e4, t_sample: float = 0.5,
                      transient: float = 100.0, cfg: IntegratorConfig = IntegratorConfig()) -> SpectrumReport:
    """Full Benettin spectrum of the classical Lorenz system."""
    x0 = np.asarray(x0, dtype=float)
    if transient > 0:
        n0 = max(1, int(round(transient / t_sample)))
        st, _, _ = core.lorenz_run(x0, t_sample, n0, p.sigma, p.rho, p.beta, cfg.rel_tol, cfg.abs_tol, cfg.max_step, False)
        x0 = st[-1]
    n = int(round(T / t_sample))
    st, props, _ = core.lorenz_run(x0, t_sample, n, p.sigma, p.rho, p.beta, cfg.rel_tol, cfg.abs_tol, cfg.max_step, True)
    if np.min(np.linalg.norm(st, axis=1)) < SINGULAR_RADIUS:
        raise NearSingularityError("orbit passes through the singularity")
    Q = np.eye(3)
    acc = np.zeros(3)
    for M in props:
        Q, R = np.linalg.qr(M @ Q)
        acc += np.log(np.abs(np.diag(R)))
    ex = np.sort(acc / (n * t_sample))
    return SpectrumReport([float(v) for v in ex], n * t_sample, cfg.rel_tol, core.BACKEND)
