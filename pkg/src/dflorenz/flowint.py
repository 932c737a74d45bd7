"""Flow and tangent-flow integration, section events and hybrid returns.

General fields go through :func:`integrate` / :func:`integrate_tangent`, a
Dormand-Prince 5(4) pair with PI step control and the standard quartic
dense output.  Long classical runs use the compiled sampler in
:mod:`dflorenz.core`.  The hybrid backend never integrates its base: the
linear block is closed form and only the one-dimensional fiber is stepped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import core, model3d
from .errors import (
    DegenerateInputError,
    EscapeError,
    OutOfDomainError,
    StableManifoldError,
    StiffnessError,
)
from .model3d import ON_LEAF_TOL
from .skew4d import ClassicalModel, HybridModel, Mode, fiber_terms


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = 0.5
    event_refine_tol: float = 1e-12
    max_steps: int = 10_000_000

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "max_step", "event_refine_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.event_refine_tol > self.abs_tol:
            raise ValueError("event_refine_tol must not exceed abs_tol")


@dataclass
class OrbitSegment:
    """Sampled trajectory.

    ``steps[i]`` is the tangent propagator from sample ``i`` to ``i + 1``.
    Cumulative ``frames`` (relative to the first sample) are kept only for
    short segments; long orbits carry ``steps`` to avoid overflow.
    ``flows[i]`` is the vector field at sample ``i``.
    """

    times: np.ndarray
    states: np.ndarray
    frames: Optional[np.ndarray] = None
    steps: Optional[np.ndarray] = None
    flows: Optional[np.ndarray] = None
    exit_event: Optional[dict] = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    def step_matrices(self):
        if self.steps is not None:
            return self.steps
        if self.frames is None:
            raise ValueError("orbit carries no tangent data")
        out = np.empty((len(self.frames) - 1,) + self.frames.shape[1:])
        for i in range(len(out)):
            out[i] = self.frames[i + 1] @ np.linalg.inv(self.frames[i])
        return out

    def frame_at(self, i: int):
        """Cumulative propagator from sample 0 to sample ``i``."""
        if self.frames is not None:
            return self.frames[i]
        n = self.states.shape[1]
        F = np.eye(n)
        for k in range(i):
            F = self.steps[k] @ F
        return F

    def to_rows(self):
        """Rows ``(t, x1, x2, x3, s)`` for the trajectory CSV."""
        st = self.states
        if st.shape[1] == 3:
            st = np.hstack([st, np.zeros((len(st), 1))])
        return [(float(t), *map(float, x)) for t, x in zip(self.times, st)]


# --- Dormand-Prince 5(4) with dense output --------------------------------

_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# quartic continuous extension (Shampine); row j, column p multiplies theta**(p+1)
_P = np.array(
    [
        [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)


@dataclass
class _Step:
    t0: float
    h: float
    y0: np.ndarray
    K: np.ndarray  # (7, n)

    def __call__(self, t):
        x = (t - self.t0) / self.h
        q = self.K.T @ (_P @ np.array([x, x * x, x**3, x**4]))
        return self.y0 + self.h * q


def _rms_norm(err, y, yn, cfg):
    sc = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(yn))
    return float(np.sqrt(np.mean((err / sc) ** 2)))


def _refine_root(g, a, b, ga, gb, tol):
    """Root of ``g`` in ``[a, b]`` by Illinois regula falsi with bisection fallback."""
    side = 0
    for _ in range(200):
        if abs(b - a) <= tol:
            break
        c = (a * gb - b * ga) / (gb - ga) if gb != ga else 0.5 * (a + b)
        # keep the secant point well inside the bracket, else bisect
        lo, hi = min(a, b), max(a, b)
        if not (lo + 0.01 * (hi - lo) < c < hi - 0.01 * (hi - lo)):
            c = 0.5 * (a + b)
        gc = g(c)
        if gc == 0.0:
            return c
        if (gc > 0) == (gb > 0):
            b, gb = c, gc
            if side == -1:
                ga *= 0.5
            side = -1
        else:
            a, ga = c, gc
            if side == 1:
                gb *= 0.5
            side = 1
    return 0.5 * (a + b)


def _dp5(rhs, y0, t_end, cfg: IntegratorConfig, event=None, domain=None, record=True):
    """Core driver.  ``rhs(y) -> dy``; integrates forward or backward.

    ``event = (g, direction)`` stops at the first root of ``g`` crossed in
    ``direction`` (+1 rising, -1 falling, 0 any).  ``domain(y) -> margin``
    stops where the margin turns negative.
    """
    y = np.array(y0, dtype=float)
    direction = 1.0 if t_end >= 0 else -1.0
    span = abs(t_end)
    ts = [0.0]
    ys = [y.copy()]
    hit = None
    if span == 0.0:
        return np.array(ts), np.array(ys), hit
    k1 = rhs(y)
    d0 = float(np.sqrt(np.mean((y / (cfg.abs_tol + cfg.rel_tol * np.abs(y))) ** 2)))
    d1 = float(np.sqrt(np.mean((k1 / (cfg.abs_tol + cfg.rel_tol * np.abs(y))) ** 2)))
    h = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h = min(h, cfg.max_step, span)
    t = 0.0
    facold = 1e-4
    rejected = False
    nsteps = 0
    g_prev = event[0](y) if event else None
    dm_prev = domain(y) if domain else None
    while t < span:
        nsteps += 1
        if nsteps > cfg.max_steps:
            raise StiffnessError("maximum number of steps exceeded")
        h = min(h, cfg.max_step)
        last = t + h >= span
        if last:
            h = span - t
        if h < 1e-14 * max(1.0, span):
            if last:
                break
            raise StiffnessError(f"step size underflow at t={direction * t:.6g}")
        hs = direction * h
        K = np.empty((7, y.size))
        K[0] = k1
        for i in range(1, 6):
            K[i] = rhs(y + hs * (np.array(_A[i]) @ K[:i]))
        yn = y + hs * (_B[:6] @ K[:6])
        K[6] = rhs(yn)
        err = hs * (_E @ K)
        en = _rms_norm(err, y, yn, cfg)
        fac11 = en**0.17
        if not np.isfinite(en):
            h *= 0.1
            rejected = True
            continue
        if en <= 1.0:
            fac = max(0.1, min(5.0, fac11 / facold**0.04 / 0.9))
            hnew = h / fac
            facold = max(en, 1e-4)
            if rejected:
                hnew = min(hnew, h)
            rejected = False
            stp = _Step(direction * t, hs, y.copy(), K.copy())
            t_new = span if last else t + h
            if event is not None:
                g_new = event[0](yn)
                dirn = event[1]
                crossed = (g_prev > 0 >= g_new and dirn <= 0) or (g_prev < 0 <= g_new and dirn >= 0)
                if crossed and g_prev != 0.0:
                    tr = _refine_root(
                        lambda tt: event[0](stp(tt)),
                        direction * t,
                        direction * t_new,
                        g_prev,
                        g_new,
                        cfg.event_refine_tol,
                    )
                    yr = stp(tr)
                    ts.append(tr)
                    ys.append(yr)
                    hit = {"kind": "event", "t": tr, "state": yr, "step": stp}
                    break
                g_prev = g_new
            if domain is not None:
                dm_new = domain(yn)
                if dm_new < 0 <= dm_prev:
                    tr = _refine_root(
                        lambda tt: domain(stp(tt)),
                        direction * t,
                        direction * t_new,
                        dm_prev,
                        dm_new,
                        cfg.event_refine_tol,
                    )
                    yr = stp(tr)
                    ts.append(tr)
                    ys.append(yr)
                    hit = {"kind": "domain-exit", "t": tr, "state": yr, "step": stp}
                    break
                dm_prev = dm_new
            t = t_new
            y = yn
            k1 = K[6]
            if record or t >= span:
                ts.append(direction * t)
                ys.append(y.copy())
            if not last or hnew < h:
                h = hnew
        else:
            h = h / min(5.0, fac11 / 0.9)
            rejected = True
    return np.array(ts), np.array(ys), hit


def _field_rhs(field):
    def rhs(y):
        v, _ = field(y)
        return np.asarray(v, dtype=float)

    return rhs


def _tangent_rhs(field, n):
    def rhs(y):
        v, J = field(y[:n])
        Phi = y[n:].reshape(n, n)
        return np.concatenate([np.asarray(v, dtype=float), (np.asarray(J) @ Phi).ravel()])

    return rhs


def integrate(field: Callable, x0, t_end: float, cfg: IntegratorConfig = IntegratorConfig(), domain=None, event=None):
    """Integrate ``x' = field(x)[0]`` from ``x0`` for time ``t_end`` (may be negative).

    ``domain(x) -> margin`` (non-negative inside) turns leaving the domain
    into a ``domain-exit`` event on the returned segment rather than an
    error.  ``field`` may raise :class:`OutOfDomainError` at points beyond
    the domain; trial stages are clipped by the step controller.
    """
    x0 = np.asarray(x0, dtype=float)
    rhs = _safe(_field_rhs(field))
    ts, ys, hit = _dp5(rhs, x0, t_end, cfg, event=event, domain=domain)
    seg = OrbitSegment(ts, ys)
    if hit is not None:
        seg.exit_event = {k: v for k, v in hit.items() if k != "step"}
    return seg


def integrate_tangent(field: Callable, x0, t_end: float, cfg: IntegratorConfig = IntegratorConfig(), domain=None, event=None):
    """As :func:`integrate`, also solving ``Phi' = DX(phi_t) Phi`` with ``Phi(0) = I``."""
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    y0 = np.concatenate([x0, np.eye(n).ravel()])
    rhs = _safe(_tangent_rhs(field, n))
    ts, ys, hit = _dp5(rhs, y0, t_end, cfg, event=event and (lambda y: event[0](y[:n]), event[1]),
                       domain=domain and (lambda y: domain(y[:n])))
    frames = ys[:, n:].reshape(-1, n, n)
    flows = np.array([np.asarray(field(y[:n])[0], dtype=float) for y in ys])
    seg = OrbitSegment(ts, ys[:, :n], frames=frames, flows=flows)
    if hit is not None:
        seg.exit_event = {"kind": hit["kind"], "t": hit["t"], "state": hit["state"][:n], "frame": hit["state"][n:].reshape(n, n)}
    return seg


def _safe(rhs):
    """Map out-of-domain trial stages to ``nan`` so the controller shrinks the step."""

    def wrapped(y):
        try:
            return rhs(y)
        except OutOfDomainError:
            return np.full(y.shape, np.nan)

    return wrapped


def linear_block_field(lp: model3d.LorenzParams, theta: float):
    """The diagonal field ``(lambda_s, lambda_u, lambda_c, -theta)`` of the linear block."""
    lam = np.array([lp.lambda_s, lp.lambda_u, lp.lambda_c, -theta])
    J = np.diag(lam)

    def field(q):
        return lam * np.asarray(q, dtype=float), J

    return field


def block_margin(x):
    """Non-negative inside the hybrid linear block."""
    return min(1.0 - abs(x[0]), 1.0 - abs(x[1]), x[2], 1.0 - x[2]) + 1e-12


def sample_classical(model: ClassicalModel, x0, t_sample: float, n_samples: int, cfg: IntegratorConfig = IntegratorConfig(), tangent=True):
    """Classical base sampled every ``t_sample`` with per-interval propagators.

    Uses the compiled sampler when available.  The fiber is not carried; its
    contribution ``exp(-theta t)`` is exact and decoupled.
    """
    p = model.classical
    states, props, nsteps = core.lorenz_run(
        np.asarray(x0, dtype=float)[:3], float(t_sample), int(n_samples), p.sigma, p.rho, p.beta,
        cfg.rel_tol, cfg.abs_tol, cfg.max_step, tangent,
    )
    times = np.arange(n_samples + 1) * t_sample
    flows = np.array([model.field3(x)[0] for x in states])
    seg = OrbitSegment(times, states, steps=props, flows=flows)
    seg.meta.update(backend="classical", kernel=core.BACKEND, nsteps=int(nsteps),
                    min_clearance=float(np.min(np.linalg.norm(states, axis=1))))
    return seg


# --- hybrid backend: closed-form base, integrated fiber -------------------


@dataclass(frozen=True)
class HybridReturn:
    point: np.ndarray  # (x1, x2, s)
    time: float
    deriv: np.ndarray  # 3x3 in section coordinates (x1, x2, s)
    base_factor: float
    fiber_steps: int

    @property
    def tube_hit(self) -> bool:
        return self.base_factor > 0.0


def _fiber_return(model: HybridModel, s0, b, t_p, cfg):
    sk = model.skew
    if sk.mode == Mode.NONE or b == 0.0:
        e = math.exp(-sk.theta * t_p)
        return s0 * e, e, 0.0, 0
    s, S, W, n = core.fiber_transit(
        float(s0), float(b), float(t_p), sk.mode_code, sk.theta, sk.kappa, sk.delta,
        sk.s_plateau, sk.s_max, cfg.rel_tol, cfg.abs_tol, cfg.max_step,
    )
    return s, S, W, n


def hybrid_return(model: HybridModel, q, cfg: IntegratorConfig = IntegratorConfig()) -> HybridReturn:
    """One return of the hybrid 4D flow to ``Sigma = Sigma0 x I``.

    ``q = (x1, x2, s)``.  The base goes through the closed-form linear exit
    and the ear; the fiber ODE runs over the whole transit with the tube's
    base factor frozen at its section value.
    """
    x1, x2, s = float(q[0]), float(q[1]), float(q[2])
    if abs(x2) < ON_LEAF_TOL:
        raise StableManifoldError(f"|x2| = {abs(x2):.3g} is on the stable manifold of the singularity")
    if abs(x1) > 1.0 or abs(x2) > 1.0 or abs(s) > 1.0:
        raise OutOfDomainError(f"section point {(x1, x2, s)} outside Sigma")
    lp = model.lorenz
    x1n, x2n, t_p, D2 = model3d.return_map0(lp, x1, x2)
    b, b1, b2 = model.base_factor(x1, x2)
    b, b1, b2 = float(b), float(b1), float(b2)
    sn, S, W, nst = _fiber_return(model, s, b, float(t_p), cfg)
    if not abs(sn) <= 1.0:
        raise EscapeError(f"fiber coordinate left I: s = {sn}")
    g_end = fiber_terms(model.skew, sn, b * _fib(model, sn))[0]
    dt2 = float(model3d.return_time_gradient(lp, x2))
    D = np.zeros((3, 3))
    D[:2, :2] = D2
    D[2, 0] = W * b1
    D[2, 1] = W * b2 + g_end * dt2
    D[2, 2] = S
    return HybridReturn(np.array([float(x1n), float(x2n), sn]), float(t_p), D, b, nst)


def hybrid_return_batch(model: HybridModel, Q, cfg: IntegratorConfig = IntegratorConfig()):
    """Vectorised :func:`hybrid_return` over rows ``(x1, x2, s)``.

    Returns ``(points, times, derivs, base_factors)``.  Only tube points go
    through the fiber integrator.
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    x1, x2, s = Q[:, 0], Q[:, 1], Q[:, 2]
    if np.any(np.abs(x2) < ON_LEAF_TOL):
        raise StableManifoldError("section point on L (|x2| below on-leaf tolerance)")
    lp, sk = model.lorenz, model.skew
    x1n, x2n, t_p, D2 = model3d.return_map0(lp, x1, x2)
    b, b1, b2 = model.base_factor(x1, x2)
    S = np.exp(-sk.theta * t_p)
    sn = s * S
    W = np.zeros_like(s)
    g_end = -sk.theta * sn
    if sk.mode != Mode.NONE:
        for i in np.flatnonzero(b > 0.0):
            sn[i], S[i], W[i], _ = _fiber_return(model, s[i], float(b[i]), float(t_p[i]), cfg)
            g_end[i] = fiber_terms(sk, sn[i], b[i] * _fib(model, sn[i]))[0]
    if np.any(~(np.abs(sn) <= 1.0)):
        raise EscapeError("fiber coordinate left I")
    dt2 = model3d.return_time_gradient(lp, x2)
    D = np.zeros((len(Q), 3, 3))
    D[:, :2, :2] = D2
    D[:, 2, 0] = W * b1
    D[:, 2, 1] = W * b2 + g_end * dt2
    D[:, 2, 2] = S
    return np.column_stack([x1n, x2n, sn]), t_p, D, b


def _fib(model, s):
    from .skew4d import fiber_profile

    if model.skew.mode == Mode.NONE:
        return 0.0
    return fiber_profile(model.skew, s)[0]


def hybrid_flow_vector(model: HybridModel, q, b=None):
    """Field at the section point ``(x1, x2, 1, s)`` with base factor ``b``."""
    x1, x2, s = float(q[0]), float(q[1]), float(q[2])
    lp = model.lorenz
    if b is None:
        b = float(model.base_factor(x1, x2)[0])
    sd = fiber_terms(model.skew, s, b * _fib(model, s))[0]
    return np.array([lp.lambda_s * x1, lp.lambda_u * x2, lp.lambda_c, sd])


def return_tangent_map(model: HybridModel, q, ret: HybridReturn):
    """4x4 tangent-flow map over one return, in coordinates ``(x1, x2, x3, s)``.

    Built from the section derivative and the return-time gradient so that
    the flow direction at ``q`` is carried to the flow direction at the image.
    """
    lp = model.lorenz
    X0 = hybrid_flow_vector(model, q, ret.base_factor)
    X1 = hybrid_flow_vector(model, ret.point, ret.base_factor)
    idx = [0, 1, 3]
    # v = v_sigma + a X0 with a = v3 / X0[2]
    P = np.eye(4) - np.outer(X0, np.eye(4)[2]) / X0[2]
    grad_t = np.zeros(4)
    grad_t[1] = float(model3d.return_time_gradient(lp, q[1]))
    E = np.zeros((4, 3))
    E[idx, [0, 1, 2]] = 1.0
    Ps = P[idx, :]
    A = E @ ret.deriv @ Ps
    a_row = np.eye(4)[2] / X0[2] - grad_t @ P
    return A + np.outer(X1, a_row), X0, X1


def hybrid_orbit(model: HybridModel, q0, n_returns: int, cfg: IntegratorConfig = IntegratorConfig(), transient: int = 0):
    """Orbit sampled at its section crossings with one 4x4 propagator per return."""
    q = np.asarray(q0, dtype=float)
    for _ in range(transient):
        q = hybrid_return(model, q, cfg).point
    times = [0.0]
    states = [np.array([q[0], q[1], 1.0, q[2]])]
    steps, flows, tube = [], [], []
    clearance = math.inf
    lp = model.lorenz
    expo = -lp.lambda_c / (lp.lambda_u - lp.lambda_c)
    for _ in range(n_returns):
        ret = hybrid_return(model, q, cfg)
        M, X0, X1 = return_tangent_map(model, q, ret)
        steps.append(M)
        flows.append(X0)
        tube.append(ret.base_factor)
        # closest approach to the singularity inside the block
        clearance = min(clearance, abs(q[1]) ** expo)
        q = ret.point
        times.append(times[-1] + ret.time)
        states.append(np.array([q[0], q[1], 1.0, q[2]]))
    flows.append(hybrid_flow_vector(model, q))
    seg = OrbitSegment(np.array(times), np.array(states), steps=np.array(steps), flows=np.array(flows))
    seg.meta.update(backend="hybrid", min_clearance=float(clearance), base_factors=np.array(tube))
    return seg


def periodic_orbit(model: HybridModel, q, n_periods: int, cfg: IntegratorConfig = IntegratorConfig(), tol: float = 1e-9):
    """``n_periods`` copies of the period-one orbit through ``q``.

    Iterating an unstable periodic point drifts off it at the rate of its
    largest multiplier; repeating the verified single return does not.
    """
    from .errors import PeriodicityError

    q = np.asarray(q, dtype=float)
    ret = hybrid_return(model, q, cfg)
    res = float(np.max(np.abs(ret.point - q)))
    if res > tol:
        raise PeriodicityError(f"return residual {res:.3g} exceeds {tol:.1g}")
    M, X0, _ = return_tangent_map(model, q, ret)
    x = np.array([q[0], q[1], 1.0, q[2]])
    seg = OrbitSegment(
        np.arange(n_periods + 1) * ret.time,
        np.tile(x, (n_periods + 1, 1)),
        steps=np.tile(M, (n_periods, 1, 1)),
        flows=np.tile(X0, (n_periods + 1, 1)),
    )
    seg.meta.update(backend="hybrid", period=ret.time, residual=res,
                    min_clearance=abs(q[1]) ** (-model.lorenz.lambda_c / (model.lorenz.lambda_u - model.lorenz.lambda_c)))
    return seg


# --- classical backend: section z = rho - 1, downward crossings -----------


def classical_return(model: ClassicalModel, q, cfg: IntegratorConfig = IntegratorConfig(), t_max: float = 50.0, bound: float = 1e3):
    """First downward return of the classical flow to ``{z = rho - 1}``.

    ``q = (x, y, s)``.  Returns ``(point, time, deriv)`` with ``deriv`` the
    3x3 section derivative in ``(x, y, s)``.
    """
    h = model.section_height
    x0 = np.array([float(q[0]), float(q[1]), h, float(q[2])])
    n = 4

    def g(y):
        return y[2] - h

    def dom(y):
        return bound - float(np.max(np.abs(y)))

    seg = integrate_tangent(model.field, x0, t_max, cfg, domain=dom, event=(g, -1))
    ev = seg.exit_event
    if ev is None:
        raise EscapeError(f"no return to the section within t = {t_max}")
    if ev["kind"] == "domain-exit":
        raise EscapeError("orbit left the bounding box before returning")
    xr = ev["state"]
    Phi = ev["frame"]
    X, _ = model.field(xr)
    grad = np.zeros(n)
    grad[2] = 1.0
    denom = float(grad @ X)
    if abs(denom) < 1e-14:
        raise DegenerateInputError("flow tangent to the section at the return point")
    proj = np.eye(n) - np.outer(X, grad) / denom
    Dfull = proj @ Phi
    idx = [0, 1, 3]
    D = Dfull[np.ix_(idx, idx)]
    return np.array([xr[0], xr[1], xr[3]]), float(ev["t"]), D


def advance_to_section(model, q, cfg: IntegratorConfig = IntegratorConfig()):
    """Next crossing of the global section: ``(point, time, deriv, events)``."""
    if isinstance(model, HybridModel):
        ret = hybrid_return(model, q, cfg)
        events = ["tube-entry"] if ret.tube_hit else []
        return ret.point, ret.time, ret.deriv, events
    if isinstance(model, ClassicalModel):
        pt, t, D = classical_return(model, q, cfg)
        return pt, t, D, ["section-crossing"]
    raise TypeError(f"unsupported model {type(model).__name__}")


def flow_det2(frames, plane, t=None) -> float:
    """Area growth ``|det(Phi_t|_S)|`` of the plane ``S = span(plane)``.

    ``frames`` is an :class:`OrbitSegment` (the frame at time ``t``, or the
    last one, is used) or a bare propagator matrix.
    """
    u, v = (np.asarray(w, dtype=float) for w in plane)
    G0 = np.array([[u @ u, u @ v], [v @ u, v @ v]])
    a0 = float(np.linalg.det(G0))
    if not a0 > 1e-24 * max(1.0, float(u @ u) * float(v @ v)):
        raise DegenerateInputError("plane vectors are (numerically) dependent")
    if isinstance(frames, OrbitSegment):
        if t is None:
            i = len(frames) - 1
        else:
            i = int(np.argmin(np.abs(frames.times - t)))
            if abs(frames.times[i] - t) > 1e-9 * max(1.0, abs(t)):
                raise ValueError(f"no frame at t = {t}")
        F = frames.frame_at(i)
    else:
        F = np.asarray(frames, dtype=float)
    U, V = F @ u, F @ v
    G1 = np.array([[U @ U, U @ V], [V @ U, V @ V]])
    return math.sqrt(max(float(np.linalg.det(G1)), 0.0) / a0)
