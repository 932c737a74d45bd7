"""Three-dimensional Lorenz fields: the hybrid geometric model and the classical ODE.

The hybrid backend is an exact linear saddle on the block
``{|x1| <= 1, |x2| <= 1, 0 <= x3 <= 1}`` glued to two affine "ear" maps that
carry the exit faces ``{x2 = +-1}`` back onto the top face ``Sigma0 = {x3 = 1}``
after a fixed transit time.  Everything here is closed form; numerical
integration lives in :mod:`dflorenz.flowint`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import OutOfDomainError, StableManifoldError

# |x2| below this is treated as lying on the stable manifold L0.
ON_LEAF_TOL = 1e-10
_BLOCK_SLACK = 1e-12


@dataclass(frozen=True)
class LorenzParams:
    lambda_s: float = -3.0
    lambda_c: float = -1.0
    lambda_u: float = 1.8
    ear_B: float = 1.85
    ear_offset: float = 0.95
    ear_c: float = 1e-3
    ear_d: float = 0.05
    tau_E: float = 2.1
    gamma: float = 0.01

    @property
    def alpha(self) -> float:
        """Exponent of the cusp, ``-lambda_c / lambda_u``."""
        return -self.lambda_c / self.lambda_u

    @property
    def beta(self) -> float:
        return -self.lambda_s / self.lambda_u

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ClassicalParams:
    sigma: float = 10.0
    rho: float = 28.0
    beta: float = 8.0 / 3.0

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class Check:
    name: str
    anchor: str
    inequality: str
    passed: bool
    margin: float


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def add(self, name, anchor, inequality, margin):
        self.checks.append(Check(name, anchor, inequality, bool(margin > 0), float(margin)))

    def extend(self, other: "ValidationReport"):
        self.checks.extend(other.checks)
        return self

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def validate_params(p: LorenzParams) -> ValidationReport:
    """Check every inequality the hybrid model relies on.

    Each check carries a margin; it passes iff the margin is strictly
    positive.  Validation never raises.
    """
    rep = ValidationReport()
    rep.add("lambda_s<lambda_c", "P1", "lambda_s < lambda_c", p.lambda_c - p.lambda_s)
    rep.add("lambda_c<0", "P1", "lambda_c < 0", -p.lambda_c)
    rep.add("lambda_u>0", "P1", "0 < lambda_u", p.lambda_u)
    rep.add("lambda_c+lambda_u>0", "P1", "lambda_c + lambda_u > 0", p.lambda_c + p.lambda_u)
    if p.lambda_u > 0:
        a = p.alpha
        rep.add("ear_B*alpha>1", "P5", "ear_B * alpha > 1", p.ear_B * a - 1.0)
        if p.ear_B > 0 and a > 0:
            # sup of |D12 + D11| / |D22| over the block, see cone_bound()
            rep.add(
                "cone_P3",
                "P3",
                "ear_d/ear_B + ear_c*(1+beta)/(ear_B*alpha) < 1/2",
                0.5 - cone_bound(p),
            )
        else:
            rep.add("cone_P3", "P3", "ear_d/ear_B + ear_c*(1+beta)/(ear_B*alpha) < 1/2", -1.0)
    else:
        rep.add("ear_B*alpha>1", "P5", "ear_B * alpha > 1", -1.0)
        rep.add("cone_P3", "P3", "ear_d/ear_B + ear_c*(1+beta)/(ear_B*alpha) < 1/2", -1.0)
    rep.add("image_in_Sigma0", "P2", "ear_B - ear_offset < 1", 1.0 - (p.ear_B - p.ear_offset))
    rep.add("x1_image_in_Sigma0", "P2", "ear_c + ear_d < 1", 1.0 - (p.ear_c + p.ear_d))
    rep.add("offset<1", "P2", "ear_offset < 1", 1.0 - p.ear_offset)
    rep.add("tau_E>2", "C1", "tau_E > 2", p.tau_E - 2.0)
    rep.add("gamma>0", "P5", "gamma > 0", p.gamma)
    return rep


def lambda_s0(p: LorenzParams) -> float:
    """Weakest strong-stable rate on the attractor.

    The linear block contracts ``x1`` at ``lambda_s``; the ear contracts it by
    ``ear_c`` over ``tau_E``, spread uniformly over the transit.
    """
    return max(p.lambda_s, math.log(p.ear_c) / p.tau_E) if p.ear_c > 0 else p.lambda_s


def cone_bound(p: LorenzParams) -> float:
    """Upper bound of ``|v1'| / |v2'|`` for images of the unit cone under ``DR0``."""
    a = p.alpha
    return p.ear_d / p.ear_B + p.ear_c * (1.0 + p.beta) / (p.ear_B * a)


def in_block(x, slack=_BLOCK_SLACK) -> bool:
    return (
        abs(x[0]) <= 1.0 + slack
        and abs(x[1]) <= 1.0 + slack
        and -slack <= x[2] <= 1.0 + slack
    )


def eval_field3(p: LorenzParams, x):
    """Linear-block field ``(lambda_s x1, lambda_u x2, lambda_c x3)`` and its Jacobian."""
    x = np.asarray(x, dtype=float)
    if not in_block(x):
        raise OutOfDomainError(f"point {x.tolist()} is outside the linear block")
    lam = np.array([p.lambda_s, p.lambda_u, p.lambda_c])
    return lam * x, np.diag(lam)


def linear_flow(p: LorenzParams, x, t):
    """Closed-form flow of the linear block (valid while the orbit stays inside)."""
    lam = np.array([p.lambda_s, p.lambda_u, p.lambda_c])
    return np.asarray(x, dtype=float) * np.exp(lam * t)


@dataclass(frozen=True)
class ExitState:
    exit_point: np.ndarray
    exit_time: float
    exit_deriv: np.ndarray
    side: int


def linear_exit(p: LorenzParams, entry) -> ExitState:
    x1, x2 = float(entry[0]), float(entry[1])
    if len(entry) > 2 and abs(float(entry[2]) - 1.0) > 1e-9:
        raise OutOfDomainError("entry point must lie on Sigma0 (x3 = 1)")
    if abs(x1) > 1.0 + _BLOCK_SLACK or abs(x2) > 1.0 + _BLOCK_SLACK:
        raise OutOfDomainError(f"entry ({x1}, {x2}) outside Sigma0")
    if x2 == 0.0:
        raise StableManifoldError("x2 = 0: the orbit converges to the singularity")
    a2 = min(abs(x2), 1.0)
    side = 1 if x2 > 0 else -1
    t = -math.log(a2) / p.lambda_u
    pt = np.array([x1 * a2 ** p.beta, float(side), a2 ** p.alpha])
    deriv = np.diag(np.exp(np.array([p.lambda_s, p.lambda_u, p.lambda_c]) * t))
    return ExitState(pt, t, deriv, side)


def ear_map(p: LorenzParams, e: ExitState):
    """Carry an exit-face point back to Sigma0.

    Returns the image ``(x1', x2')``, the derivative with respect to the exit
    coordinates ``(x1, x3)`` and the transit time.
    """
    x1, x3 = float(e.exit_point[0]), float(e.exit_point[2])
    s = float(e.side)
    img = np.array([s * (p.ear_c * x1 + p.ear_d * x3), s * (p.ear_offset - p.ear_B * x3)])
    jac = s * np.array([[p.ear_c, p.ear_d], [0.0, -p.ear_B]])
    return img, jac, p.tau_E


def quotient_map(p: LorenzParams, x2):
    """One-dimensional quotient ``f`` of the return map and ``f'`` (vectorised)."""
    x2 = np.asarray(x2, dtype=float)
    a = p.alpha
    ax = np.abs(x2)
    f = np.sign(x2) * (p.ear_offset - p.ear_B * ax ** a)
    df = -p.ear_B * a * ax ** (a - 1.0)
    return f, df


def return_map0(p: LorenzParams, x1, x2):
    """Closed-form return map ``R0`` of the base, vectorised over arrays.

    Returns ``(x1', x2', t_p, D)`` with ``D[..., i, j] = d(x_i')/d(x_j)`` in
    section coordinates ``(x1, x2)``.  Points with ``|x2| < ON_LEAF_TOL`` raise.
    """
    x1, x2 = np.broadcast_arrays(np.asarray(x1, dtype=float), np.asarray(x2, dtype=float))
    ax = np.abs(x2)
    if np.any(ax < ON_LEAF_TOL):
        raise StableManifoldError("section point on L (|x2| below on-leaf tolerance)")
    a, b = p.alpha, p.beta
    s = np.sign(x2)
    pa = ax ** a
    pb = ax ** b
    x1n = s * (p.ear_c * x1 * pb + p.ear_d * pa)
    x2n = s * (p.ear_offset - p.ear_B * pa)
    t = -np.log(ax) / p.lambda_u + p.tau_E
    D = np.zeros(x1.shape + (2, 2))
    # d|x2|/dx2 = s, and s*s = 1
    D[..., 0, 0] = s * p.ear_c * pb
    D[..., 0, 1] = p.ear_c * x1 * b * ax ** (b - 1.0) + p.ear_d * a * ax ** (a - 1.0)
    D[..., 1, 0] = 0.0
    D[..., 1, 1] = -p.ear_B * a * ax ** (a - 1.0)
    return x1n, x2n, t, D


def return_time_gradient(p: LorenzParams, x2):
    """``d t_p / d x2``; the return time does not depend on ``x1`` or ``s``."""
    return -1.0 / (p.lambda_u * np.asarray(x2, dtype=float))


def classical_field(p: ClassicalParams, x):
    x = np.asarray(x, dtype=float)
    X, Y, Z = x[0], x[1], x[2]
    v = np.array([p.sigma * (Y - X), X * (p.rho - Z) - Y, X * Y - p.beta * Z])
    J = np.array(
        [
            [-p.sigma, p.sigma, 0.0],
            [p.rho - Z, -1.0, -X],
            [Y, X, -p.beta],
        ]
    )
    return v, J


def classical_equilibria(p: ClassicalParams):
    """The origin and the two wing equilibria ``C+-`` (``rho > 1``)."""
    r = math.sqrt(p.beta * (p.rho - 1.0))
    return (
        np.zeros(3),
        np.array([r, r, p.rho - 1.0]),
        np.array([-r, -r, p.rho - 1.0]),
    )


def validate_classical(p: ClassicalParams) -> ValidationReport:
    rep = ValidationReport()
    rep.add("sigma>0", "classical", "sigma > 0", p.sigma)
    rep.add("beta>0", "classical", "beta > 0", p.beta)
    rep.add("rho>1", "classical", "rho > 1", p.rho - 1.0)
    return rep


def fixed_points0(p: LorenzParams, side: int, tol: float = 1e-12):
    """Fixed point of the quotient map ``f`` on one wing.

    Bisection on ``f(x) - x`` brackets the root, Newton polishes it.  Returns
    ``None`` when the wing has no sign change.
    """
    sgn = 1.0 if side > 0 else -1.0

    def g(t):
        return float(quotient_map(p, sgn * t)[0]) * sgn - t

    lo, hi = 1e-14, 1.0
    glo, ghi = g(lo), g(hi)
    if glo * ghi > 0:
        return None
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if (gm > 0) == (glo > 0):
            lo, glo = mid, gm
        else:
            hi = mid
        if hi - lo < 1e-10:
            break
    t = 0.5 * (lo + hi)
    for _ in range(50):
        _, df = quotient_map(p, sgn * t)
        # d/dt [sgn f(sgn t) - t] = f'(sgn t) - 1
        step = g(t) / (float(df) - 1.0)
        t -= step
        if abs(step) < tol * 1e-2:
            break
    x2 = sgn * t
    # x1 solves x1 = s (c x1 |x2|^beta + d |x2|^alpha)
    pb, pa = t ** p.beta, t ** p.alpha
    x1 = sgn * p.ear_d * pa / (1.0 - sgn * p.ear_c * pb)
    return x1, x2
