"""Skew-product extension ``X(x, s) = (X0(x), sdot(x, s))`` and its surgery modes.

The fiber field is ``-theta*s`` away from a tube around the periodic orbit
``P0``.  Inside the tube a bump ``eta`` switches the contraction off
(saddle-node) or, in triplet mode, replaces it by the cubic
``-kappa*s*(s^2 - delta^2)`` on a fiber plateau.

The tube is a flow box: a point of the linear block is pulled back along the
(exact) linear flow to its last crossing of ``Sigma0`` and the distance to the
section point of ``P0`` is measured there.  The base factor of ``eta`` is
therefore constant along each transit between two section crossings.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import model3d
from .model3d import ClassicalParams, LorenzParams, ValidationReport


class Mode(str, enum.Enum):
    NONE = "none"
    SADDLE_NODE = "saddle-node"
    TRIPLET = "triplet"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {"saddlenode": "saddle-node", "sn": "saddle-node"}
        return cls(aliases.get(key, key))


MODE_CODES = {Mode.NONE: 0, Mode.SADDLE_NODE: 1, Mode.TRIPLET: 2}


@dataclass(frozen=True)
class SkewParams:
    theta: float = 2.0
    tube_radius: float = 0.15
    s_plateau: float = 0.2
    s_max: float = 0.4
    kappa: float = 5.0
    delta: float = 0.1
    mode: Mode = Mode.SADDLE_NODE

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode.parse(self.mode))

    def to_dict(self):
        d = asdict(self)
        d["mode"] = self.mode.value
        return d

    @property
    def mode_code(self) -> int:
        return MODE_CODES[self.mode]


@dataclass(frozen=True)
class PeriodicOrbitRef:
    """Section point of a period-one orbit of the hybrid base."""

    lorenz: LorenzParams
    x1: float
    x2: float
    period: float
    label: str = "P"

    @classmethod
    def wing(cls, lp: LorenzParams, side: int = 1, label=None):
        pt = model3d.fixed_points0(lp, side)
        if pt is None:
            raise ValueError(f"no fixed point of the quotient map on side {side}")
        x1, x2 = pt
        period = -math.log(abs(x2)) / lp.lambda_u + lp.tau_E
        return cls(lp, x1, x2, period, label or ("P" if side > 0 else "Q"))


@dataclass(frozen=True)
class BumpValue:
    value: float
    grad: np.ndarray  # d eta / d(x1, x2, x3, s)


# --- C^2 quintic smoothstep profiles ------------------------------------


def _smooth_drop(u):
    """``1 - smoothstep5(u)`` clipped to [0, 1], and its derivative."""
    if u <= 0.0:
        return 1.0, 0.0
    if u >= 1.0:
        return 0.0, 0.0
    v = 1.0 - u * u * u * (10.0 + u * (-15.0 + 6.0 * u))
    dv = -30.0 * u * u * (1.0 - u) * (1.0 - u)
    return v, dv


def fiber_profile(p: SkewParams, s: float):
    """Fiber factor of ``eta`` and its derivative in ``s``."""
    a = abs(s)
    sg = 1.0 if s >= 0 else -1.0
    if p.mode == Mode.TRIPLET:
        if a <= p.s_plateau:
            return 1.0, 0.0
        w = p.s_max - p.s_plateau
        v, dv = _smooth_drop((a - p.s_plateau) / w)
        return v, sg * dv / w
    v, dv = _smooth_drop(a / p.s_max)
    return v, sg * dv / p.s_max


def base_factor(p: SkewParams, anchor: PeriodicOrbitRef, x1, x2):
    """Base factor of ``eta`` at section coordinates ``(x1, x2)``.

    Vectorised.  Returns ``(b, db_dx1, db_dx2)``.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if p.mode == Mode.NONE or anchor is None:
        z = np.zeros(np.broadcast(x1, x2).shape)
        return z, z.copy(), z.copy()
    r = p.tube_radius
    d1 = x1 - anchor.x1
    d2 = x2 - anchor.x2
    u = np.sqrt(d1 * d1 + d2 * d2) / r
    inside = u < 1.0
    uc = np.where(inside, u, 1.0)
    b = np.where(inside, 1.0 - uc**3 * (10.0 + uc * (-15.0 + 6.0 * uc)), 0.0)
    # chi'(u)/u = -30 u (1-u)^2 stays finite at the centre
    k = np.where(inside, -30.0 * uc * (1.0 - uc) ** 2 / (r * r), 0.0)
    return b, k * d1, k * d2


def pullback_to_section(lp: LorenzParams, x):
    """Last ``Sigma0`` crossing of a linear-block point and the Jacobian of that map.

    Returns ``(x1s, x2s, J)`` with ``J`` the 2x3 derivative with respect to
    ``(x1, x2, x3)``, or ``None`` when ``x3 <= 0``.
    """
    x1, x2, x3 = float(x[0]), float(x[1]), float(x[2])
    if x3 <= 0.0:
        return None
    ks = -lp.lambda_s / lp.lambda_c
    ku = -lp.lambda_u / lp.lambda_c
    e_s = x3**ks
    e_u = x3**ku
    x1s = x1 * e_s
    x2s = x2 * e_u
    J = np.array(
        [
            [e_s, 0.0, ks * x1 * x3 ** (ks - 1.0)],
            [0.0, e_u, ku * x2 * x3 ** (ku - 1.0)],
        ]
    )
    return x1s, x2s, J


def bump(p: SkewParams, q, anchor: PeriodicOrbitRef) -> BumpValue:
    q = np.asarray(q, dtype=float)
    zero = BumpValue(0.0, np.zeros(4))
    if p.mode == Mode.NONE or anchor is None:
        return zero
    pb = pullback_to_section(anchor.lorenz, q[:3])
    if pb is None:
        return zero
    x1s, x2s, J = pb
    b, b1, b2 = base_factor(p, anchor, x1s, x2s)
    b = float(b)
    if b == 0.0:
        return zero
    fv, fd = fiber_profile(p, float(q[3]))
    gb = np.array([float(b1), float(b2)]) @ J
    grad = np.empty(4)
    grad[:3] = fv * gb
    grad[3] = b * fd
    return BumpValue(b * fv, grad)


def fiber_terms(p: SkewParams, s: float, eta: float):
    """``sdot`` and its partials in ``s`` (at fixed ``eta``) and in ``eta``."""
    th = p.theta
    if p.mode == Mode.NONE:
        return -th * s, -th, 0.0
    sd = -th * s * (1.0 - eta)
    ds = -th * (1.0 - eta)
    de = th * s
    if p.mode == Mode.TRIPLET:
        cub = p.kappa * s * (s * s - p.delta * p.delta)
        sd -= eta * cub
        ds -= eta * p.kappa * (3.0 * s * s - p.delta * p.delta)
        de -= cub
    return sd, ds, de


def fiber_field(p: SkewParams, q, eta: BumpValue):
    """Fourth component of the field and its exact ``s``-derivative."""
    s = float(q[3])
    sd, ds, de = fiber_terms(p, s, eta.value)
    return sd, ds + de * float(eta.grad[3])


def eval_field4(p: SkewParams, lp, q, anchor: PeriodicOrbitRef | None = None):
    """Full 4D field and Jacobian.

    ``lp`` selects the base: :class:`LorenzParams` (hybrid, linear block only)
    or :class:`ClassicalParams` (no tube; the fiber is ``-theta*s``).
    """
    q = np.asarray(q, dtype=float)
    if isinstance(lp, ClassicalParams):
        v3, J3 = model3d.classical_field(lp, q[:3])
        eta = BumpValue(0.0, np.zeros(4))
        sp = SkewParams(**{**p.to_dict(), "mode": Mode.NONE})
    else:
        v3, J3 = model3d.eval_field3(lp, q[:3])
        eta = bump(p, q, anchor) if anchor is not None else BumpValue(0.0, np.zeros(4))
        sp = p
    sd, ds, de = fiber_terms(sp, float(q[3]), eta.value)
    v = np.empty(4)
    v[:3] = v3
    v[3] = sd
    J = np.zeros((4, 4))
    J[:3, :3] = J3
    J[3, :3] = de * eta.grad[:3]
    J[3, 3] = ds + de * eta.grad[3]
    return v, J


def validate_theta(p: SkewParams, lp: LorenzParams) -> ValidationReport:
    """Check ``lambda_s0 < -theta < lambda_c`` and report both margins."""
    rep = ValidationReport()
    ls0 = model3d.lambda_s0(lp)
    rep.add("lambda_s0<-theta", "Eq(2)", "lambda_s0 < -theta", -p.theta - ls0)
    rep.add("-theta<lambda_c", "Eq(2)", "-theta < lambda_c", lp.lambda_c + p.theta)
    return rep


def validate_surgery(p: SkewParams, anchor: PeriodicOrbitRef, other: PeriodicOrbitRef) -> ValidationReport:
    """Tube and fiber-profile constraints around ``P0`` (``other`` is ``Q0``)."""
    rep = ValidationReport()
    rep.add("theta>0", "Eq(2)", "theta > 0", p.theta)
    dist_pq = math.hypot(anchor.x1 - other.x1, anchor.x2 - other.x2)
    rep.add("tube_excludes_Q", "S3.2", "tube_radius < dist(P0, Q0)/2", dist_pq / 2.0 - p.tube_radius)
    rep.add("tube_excludes_L", "S3.2", "tube_radius < |x2(P0)|", abs(anchor.x2) - p.tube_radius)
    rep.add("0<s_plateau", "S3.4", "0 < s_plateau", p.s_plateau)
    rep.add("s_plateau<s_max", "S3.4", "s_plateau < s_max", p.s_max - p.s_plateau)
    rep.add("s_max<=1", "S3.4", "s_max <= 1", 1.0 - p.s_max + 1e-15)
    rep.add("kappa>0", "S3.4", "kappa > 0", p.kappa)
    rep.add("delta<s_plateau", "S3.4", "0 <= delta < s_plateau", min(p.s_plateau - p.delta, p.delta + 1e-15))
    return rep


@dataclass(frozen=True)
class HybridModel:
    """Hybrid geometric base with the skew-product fiber and its surgery."""

    lorenz: LorenzParams = LorenzParams()
    skew: SkewParams = SkewParams()

    @property
    def anchor(self) -> PeriodicOrbitRef:
        return _wing_cached(self.lorenz, 1)

    @property
    def other(self) -> PeriodicOrbitRef:
        return _wing_cached(self.lorenz, -1)

    def with_skew(self, **kw) -> "HybridModel":
        return HybridModel(self.lorenz, SkewParams(**{**self.skew.to_dict(), **kw}))

    def field(self, q):
        return eval_field4(self.skew, self.lorenz, q, self.anchor)

    def base_factor(self, x1, x2):
        return base_factor(self.skew, self.anchor, x1, x2)

    def validate(self) -> ValidationReport:
        rep = model3d.validate_params(self.lorenz)
        rep.extend(validate_theta(self.skew, self.lorenz))
        rep.extend(validate_surgery(self.skew, self.anchor, self.other))
        return rep


@dataclass(frozen=True)
class ClassicalModel:
    """Classical Lorenz base times a purely contracting fiber ``sdot = -theta*s``."""

    classical: ClassicalParams = ClassicalParams()
    theta: float = 2.0

    @property
    def skew(self) -> SkewParams:
        return SkewParams(theta=self.theta, mode=Mode.NONE)

    @property
    def section_height(self) -> float:
        return self.classical.rho - 1.0

    def field(self, q):
        return eval_field4(self.skew, self.classical, q)

    def field3(self, x):
        return model3d.classical_field(self.classical, x)


_WING_CACHE: dict = {}


def _wing_cached(lp: LorenzParams, side: int) -> PeriodicOrbitRef:
    key = (lp, side)
    ref = _WING_CACHE.get(key)
    if ref is None:
        ref = PeriodicOrbitRef.wing(lp, side)
        _WING_CACHE[key] = ref
    return ref
