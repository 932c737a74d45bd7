"""Global cross-section engine: returns, fixed points, cones and cu-curves."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import flowint, model3d
from .errors import ConeViolationError, DegenerateInputError, OutOfDomainError
from .flowint import IntegratorConfig
from .model3d import ON_LEAF_TOL
from .skew4d import HybridModel

AXIS = 1  # x2 is the expanding direction on the section


@dataclass(frozen=True)
class SectionPoint:
    x1: float
    x2: float
    s: float = 0.0

    def __post_init__(self):
        for name in ("x1", "x2", "s"):
            v = getattr(self, name)
            if not -1.0 <= v <= 1.0:
                raise OutOfDomainError(f"{name} = {v} outside [-1, 1]")

    @classmethod
    def of(cls, q):
        if isinstance(q, cls):
            return q
        q = [float(v) for v in q]
        return cls(q[0], q[1], q[2] if len(q) > 2 else 0.0)

    @property
    def on_leaf(self) -> bool:
        return abs(self.x2) < ON_LEAF_TOL

    def as_array(self):
        return np.array([self.x1, self.x2, self.s])


@dataclass(frozen=True)
class ReturnResult:
    image: np.ndarray
    time: float
    deriv: np.ndarray
    tube_hit: bool = False

    def to_dict(self):
        return {
            "image": [float(v) for v in self.image],
            "time": float(self.time),
            "deriv": np.asarray(self.deriv).tolist(),
            "tube_hit": bool(self.tube_hit),
        }


def _coords(q):
    if isinstance(q, SectionPoint):
        return q.as_array()
    return np.asarray(q, dtype=float)


def return_map(model, q, cfg: IntegratorConfig = IntegratorConfig()) -> ReturnResult:
    """First return of ``q = (x1, x2, s)`` to the global section."""
    pt, t, D, events = flowint.advance_to_section(model, _coords(q), cfg)
    return ReturnResult(pt, t, D, "tube-entry" in events)


def return_map_batch(model: HybridModel, Q, cfg: IntegratorConfig = IntegratorConfig()):
    """Vectorised hybrid return; see :func:`flowint.hybrid_return_batch`."""
    return flowint.hybrid_return_batch(model, Q, cfg)


@dataclass(frozen=True)
class FixedPoint:
    x2: float
    side: int
    slope: float
    x1: float = 0.0
    period: float = 0.0


def find_fixed_points(model, n_grid: int = 4096, tol: float = 1e-12) -> List[FixedPoint]:
    """All fixed points of the quotient map ``f``, right wing first.

    Sign changes of ``f(x) - x`` on a grid are bisected and then Newton
    polished.  A wing without a root contributes nothing.
    """
    lp = model.lorenz if isinstance(model, HybridModel) else model
    out = []
    for side in (1, -1):
        t = np.linspace(ON_LEAF_TOL * 10, 1.0, n_grid)
        g = side * model3d.quotient_map(lp, side * t)[0] - t
        for i in np.flatnonzero(np.sign(g[:-1]) * np.sign(g[1:]) <= 0):
            if g[i] == 0.0 and i > 0 and g[i - 1] == 0.0:
                continue
            x2 = side * _polish(lp, side, t[i], t[i + 1], tol)
            pa, pb = abs(x2) ** lp.alpha, abs(x2) ** lp.beta
            x1 = side * lp.ear_d * pa / (1.0 - side * lp.ear_c * pb)
            slope = float(model3d.quotient_map(lp, x2)[1])
            period = -math.log(abs(x2)) / lp.lambda_u + lp.tau_E
            out.append(FixedPoint(x2, side, slope, x1, period))
    return out


def _polish(lp, side, lo, hi, tol):
    def g(t):
        return side * float(model3d.quotient_map(lp, side * t)[0]) - t

    glo = g(lo)
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
        df = float(model3d.quotient_map(lp, side * t)[1])
        step = g(t) / (df - 1.0)
        t -= step
        if abs(step) < tol:
            break
    return t


# --- cones ---------------------------------------------------------------


@dataclass(frozen=True)
class Cone:
    """``{v : |v_perp| <= width * |v . axis|}``."""

    axis: np.ndarray
    width: float = 1.0

    def __post_init__(self):
        a = np.asarray(self.axis, dtype=float)
        n = np.linalg.norm(a)
        if not self.width > 0 or n == 0:
            raise ValueError("cone needs a nonzero axis and positive width")
        object.__setattr__(self, "axis", a / n)

    @classmethod
    def standard(cls, dim: int = 3, width: float = 1.0):
        return cls(np.eye(dim)[AXIS], width)

    def split(self, v):
        v = np.asarray(v, dtype=float)
        a = v @ self.axis
        perp = v - np.multiply.outer(a, self.axis)
        return a, np.linalg.norm(perp, axis=-1)

    def ratio(self, v):
        a, p = self.split(v)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return np.where(a != 0, p / (self.width * np.abs(a)), np.where(p == 0, 0.0, np.inf))

    def contains(self, v, slack: float = 1e-12):
        return self.ratio(v) <= 1.0 + slack

    def norm(self, v):
        """Cone-adapted norm; equals ``|v . axis|`` inside the cone."""
        a, p = self.split(v)
        return np.maximum(np.abs(a), p / self.width)

    def rays(self, n_rays: int = 64, rings: int = 1):
        """Unit-axis vectors on the boundary (and ``rings - 1`` inner rings) plus the axis."""
        dim = self.axis.size
        basis = _complement(self.axis)
        vecs = [self.axis]
        for k in range(1, rings + 1):
            rad = self.width * k / rings
            if dim == 2:
                for sg in (1.0, -1.0):
                    vecs.append(self.axis + sg * rad * basis[0])
            else:
                phi = 2 * np.pi * np.arange(n_rays) / n_rays
                for c, s in zip(np.cos(phi), np.sin(phi)):
                    vecs.append(self.axis + rad * (c * basis[0] + s * basis[1]))
        return np.array(vecs)


def _complement(axis):
    dim = axis.size
    M = np.linalg.qr(np.column_stack([axis, np.eye(dim)]))[0]
    return [M[:, k] for k in range(1, dim)]


def _as_cone(axis, width, dim):
    if axis is None:
        return Cone.standard(dim, width)
    return Cone(axis, width)


def _check_deriv(D):
    D = np.asarray(D, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise DegenerateInputError("derivative must be square")
    if not np.all(np.isfinite(D)):
        raise DegenerateInputError("non-finite derivative")
    # strongly anisotropic but invertible matrices occur near L; only exact
    # rank loss is rejected
    if np.linalg.svd(D, compute_uv=False)[-1] == 0.0:
        raise DegenerateInputError("singular derivative")
    return D


def cone_check(deriv, alpha_in: float = 1.0, alpha_out: float = 0.5, axis_in=None, axis_out=None, n_rays: int = 64):
    """Does ``deriv`` map the input cone into the output cone?

    Returns ``(passed, worst_ratio)`` with ``worst_ratio`` the largest
    ``|w_perp| / (alpha_out |w . axis|)`` over images of boundary rays.
    In two dimensions the two extreme rays decide exactly (the ratio is a
    ratio of linear functions of the slope), provided the image axis
    component does not vanish inside the cone, which is checked.
    """
    D = _check_deriv(deriv)
    dim = D.shape[0]
    cin = _as_cone(axis_in, alpha_in, dim)
    cout = _as_cone(axis_out, alpha_out, dim)
    rays = cin.rays(n_rays)
    imgs = rays @ D.T
    a, _ = cout.split(imgs)
    if dim == 2:
        a_lo, a_hi = a[1], a[2]
        if a_lo == 0 or a_hi == 0 or (a_lo > 0) != (a_hi > 0):
            return False, math.inf
        worst = float(np.max(cout.ratio(imgs[1:])))
    else:
        if np.any(a == 0) or not (np.all(a > 0) or np.all(a < 0)):
            return False, math.inf
        worst = float(np.max(cout.ratio(imgs)))
    return worst <= 1.0, worst


def expansion_check(deriv, cone: Optional[Cone] = None, lam_floor: float = 1.0, n_rays: int = 64, rings: int = 4):
    """Minimum growth of cone vectors in the cone-adapted norm.

    Samples vectors of unit axis component across the cone (boundary and
    inner rings) and returns ``(passed, min_growth)``.
    """
    D = _check_deriv(deriv)
    cone = cone or Cone.standard(D.shape[0], 1.0)
    if cone.axis.size != D.shape[0]:
        raise DegenerateInputError("cone and derivative dimensions differ")
    if cone.axis.size == 2:
        t = np.linspace(-1.0, 1.0, 2 * 64 * rings + 1) * cone.width
        basis = _complement(cone.axis)[0]
        vecs = cone.axis + np.outer(t, basis)
    else:
        vecs = cone.rays(n_rays, rings)
    growth = cone.norm(vecs @ D.T) / cone.norm(vecs)
    g = float(np.min(growth))
    return g >= lam_floor, g


def cone_growth_batch(D, alpha_in=1.0, alpha_out=0.5):
    """Exact 2D cone ratio and adapted growth for a stack of base derivatives.

    For ``D = [[a, b], [0, d]]`` (the hybrid base structure) with axis ``e2``.
    Returns ``(worst_ratio, min_growth)`` arrays.
    """
    D = np.asarray(D, dtype=float)
    a, b, c, d = D[..., 0, 0], D[..., 0, 1], D[..., 1, 0], D[..., 1, 1]
    ratios, axes = [], []
    for t in (-alpha_in, alpha_in):
        w1 = a * t + b
        w2 = c * t + d
        ratios.append(np.abs(w1) / (alpha_out * np.abs(w2)))
        axes.append(w2)
    same = np.sign(axes[0]) == np.sign(axes[1])
    worst = np.where(same & (axes[0] != 0), np.maximum(*ratios), np.inf)
    cone = Cone.standard(2, alpha_in)
    tt = np.linspace(-alpha_in, alpha_in, 129)
    vecs = np.stack([tt, np.ones_like(tt)], axis=-1)
    img = np.einsum("...ij,kj->...ki", D, vecs)
    growth = np.min(cone.norm(img), axis=-1)
    return worst, growth


# --- cu-curves -----------------------------------------------------------


@dataclass
class CuCurve:
    """Piecewise-linear curve on the section, nodes ``(x1, x2, s)``."""

    nodes: np.ndarray

    def __post_init__(self):
        self.nodes = np.atleast_2d(np.asarray(self.nodes, dtype=float))
        if len(self.nodes) < 2:
            raise DegenerateInputError("a curve needs at least two nodes")

    @classmethod
    def segment(cls, center, direction, length: float, n: int = 33):
        d = np.asarray(direction, dtype=float)
        d = d / np.linalg.norm(d)
        t = np.linspace(-0.5, 0.5, n) * length
        return cls(np.asarray(center, dtype=float) + np.outer(t, d))

    @property
    def length(self) -> float:
        return float(np.sum(np.linalg.norm(np.diff(self.nodes, axis=0), axis=1)))

    def tangents(self):
        return np.diff(self.nodes, axis=0)

    def respects(self, cone: Cone, slack: float = 1e-9) -> bool:
        return bool(np.all(cone.contains(self.tangents(), slack)))

    def crosses_leaf(self) -> bool:
        x2 = self.nodes[:, 1]
        return bool(np.any(np.sign(x2[:-1]) * np.sign(x2[1:]) < 0))


@dataclass
class CurveTrace:
    lengths: List[float] = field(default_factory=list)
    growth: List[float] = field(default_factory=list)
    split: List[bool] = field(default_factory=list)
    tube: List[bool] = field(default_factory=list)
    piece_lengths: List[tuple] = field(default_factory=list)
    k: Optional[int] = None  # iterates needed to exceed eps0
    first_crossing: Optional[int] = None
    final: Optional[CuCurve] = None

    @property
    def reached(self) -> bool:
        return self.k is not None

    @property
    def crossed(self) -> bool:
        return self.first_crossing is not None

    @property
    def n_iterates(self) -> int:
        return len(self.growth)

    def min_growth_unsplit(self) -> float:
        g = [g for g, s in zip(self.growth, self.split) if not s]
        return min(g) if g else math.inf

    def to_dict(self):
        return {
            "k": self.k,
            "first_crossing": self.first_crossing,
            "iterates": self.n_iterates,
            "final_length": self.lengths[-1] if self.lengths else None,
            "min_growth_unsplit": self.min_growth_unsplit(),
        }


def split_at_leaf(curve: CuCurve, gap: float = 1e-9):
    """Cut a curve at every crossing of ``{x2 = 0}``.

    Crossing points are located by linear interpolation on the chord and
    belong to both neighbouring pieces, pulled ``gap`` off the leaf so that
    they can be mapped.  Returns the list of pieces.
    """
    P = curve.nodes
    pieces, cur = [], [P[0]]
    for i in range(len(P) - 1):
        a, b = P[i], P[i + 1]
        if a[1] * b[1] < 0:
            lam = a[1] / (a[1] - b[1])
            c = a + lam * (b - a)
            pa, pb = c.copy(), c.copy()
            pa[1] = math.copysign(gap, a[1])
            pb[1] = math.copysign(gap, b[1])
            cur.append(pa)
            pieces.append(np.array(cur))
            cur = [pb]
        cur.append(b)
    pieces.append(np.array(cur))
    return [CuCurve(_drop_on_leaf(p)) for p in pieces if len(_drop_on_leaf(p)) >= 2]


def _drop_on_leaf(P):
    keep = np.abs(P[:, 1]) >= ON_LEAF_TOL
    return P[keep]


def _map_refined(model, nodes, cfg, chord_tol, max_nodes):
    """Map nodes and insert preimage midpoints until image chords are within ``chord_tol``."""
    img, _, _, b = return_map_batch(model, nodes, cfg)
    tube = bool(np.any(b > 0))
    pre, post = nodes, img
    for _ in range(60):
        mids = 0.5 * (pre[:-1] + pre[1:])
        mimg, _, _, mb = return_map_batch(model, mids, cfg)
        tube = tube or bool(np.any(mb > 0))
        err = np.linalg.norm(mimg - 0.5 * (post[:-1] + post[1:]), axis=1)
        bad = err > chord_tol
        if not np.any(bad) or len(pre) >= max_nodes:
            break
        n = len(pre)
        idx = np.flatnonzero(bad)
        new_pre = np.insert(pre, idx + 1, mids[idx], axis=0)
        new_post = np.insert(post, idx + 1, mimg[idx], axis=0)
        pre, post = new_pre, new_post
        if len(pre) == n:
            break
    return post, tube


def _thin(nodes, chord_tol, min_nodes=32):
    """Drop nodes whose removal keeps the polyline within ``chord_tol``."""
    if len(nodes) <= min_nodes:
        return nodes
    keep = [0]
    i = 0
    n = len(nodes)
    while i < n - 1:
        j = i + 1
        while j + 1 < n:
            a, c = nodes[i], nodes[j + 1]
            seg = c - a
            L2 = seg @ seg
            mid = nodes[i + 1 : j + 1]
            if L2 == 0:
                break
            lam = np.clip((mid - a) @ seg / L2, 0, 1)
            dev = np.linalg.norm(mid - a - np.outer(lam, seg), axis=1)
            if np.max(dev) > chord_tol:
                break
            j += 1
        keep.append(j)
        i = j
    out = nodes[keep]
    if len(out) < min_nodes:
        return _resample(out, min_nodes)
    return out


def _resample(nodes, n):
    seg = np.linalg.norm(np.diff(nodes, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    t = np.linspace(0, s[-1], n)
    return np.column_stack([np.interp(t, s, nodes[:, k]) for k in range(nodes.shape[1])])


def iterate_cu_curve(
    model: HybridModel,
    J: CuCurve,
    eps0: float = 0.2,
    k_max: int = 200,
    cone: Optional[Cone] = None,
    until_crossing: bool = False,
    chord_tol: float = 1e-6,
    max_nodes: int = 20000,
    cfg: IntegratorConfig = IntegratorConfig(),
) -> CurveTrace:
    """Iterate a cu-curve under the return map.

    A curve straddling ``L`` is split there and the longer piece kept.  The
    iteration stops once a piece exceeds ``eps0``; with ``until_crossing``
    it goes on (up to ``k_max``) until an ``L``-crossing has been seen.
    """
    cone = cone or Cone.standard(J.nodes.shape[1], 1.0)
    if not J.respects(cone):
        raise ConeViolationError("curve tangents leave the cone")
    if np.all(np.abs(J.nodes[:, 1]) < ON_LEAF_TOL):
        raise DegenerateInputError("curve lies inside the on-leaf band")
    tr = CurveTrace()
    cur = J
    tr.lengths.append(cur.length)
    if cur.length >= eps0:
        tr.k = 0
    for it in range(k_max):
        if tr.reached and (not until_crossing or tr.crossed):
            break
        split = cur.crosses_leaf()
        if split:
            pieces = split_at_leaf(cur)
            lens = [p.length for p in pieces]
            tr.piece_lengths.append(tuple(lens))
            cur = pieces[int(np.argmax(lens))]
            if tr.first_crossing is None:
                tr.first_crossing = it
        else:
            cur = CuCurve(_drop_on_leaf(cur.nodes)) if np.any(np.abs(cur.nodes[:, 1]) < ON_LEAF_TOL) else cur
        base_len = cur.length
        img, tube = _map_refined(model, cur.nodes, cfg, chord_tol, max_nodes)
        img = _thin(img, chord_tol)
        nxt = CuCurve(img)
        tr.growth.append(nxt.length / base_len)
        tr.split.append(split)
        tr.tube.append(tube)
        tr.lengths.append(nxt.length)
        cur = nxt
        if tr.k is None and cur.length >= eps0:
            tr.k = it + 1
    tr.final = cur
    return tr
