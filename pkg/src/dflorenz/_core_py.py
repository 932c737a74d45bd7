"""Pure-Python twin of the compiled kernels in ``_core.pyx``.

Same tableau, same controller, same step sequence; used when the extension
is not built and as the reference side of the kernel benchmark.
"""

from __future__ import annotations

import math

import numpy as np

A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = (
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
)
B1, B3, B4, B5, B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
E1, E3, E4, E5, E6, E7 = (
    71.0 / 57600.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
)


class _Ctrl:
    __slots__ = ("rtol", "atol", "max_step", "h", "facold", "nsteps", "nreject")

    def __init__(self, rtol, atol, max_step):
        self.rtol = rtol
        self.atol = atol
        self.max_step = max_step
        self.h = -1.0
        self.facold = 1e-4
        self.nsteps = 0
        self.nreject = 0


def _err_norm(y, yn, er, rtol, atol):
    acc = 0.0
    for a, b, e in zip(y, yn, er):
        r = e / (atol + rtol * max(abs(a), abs(b)))
        acc += r * r
    return math.sqrt(acc / len(y))


def _initial_step(f, y, k1, rtol, atol, max_step):
    n = len(y)
    d0 = d1 = d2 = 0.0
    for yi, ki in zip(y, k1):
        sc = atol + rtol * abs(yi)
        d0 += (yi / sc) ** 2
        d1 += (ki / sc) ** 2
    d0 = math.sqrt(d0 / n)
    d1 = math.sqrt(d1 / n)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, max_step)
    f1 = f([yi + h0 * ki for yi, ki in zip(y, k1)])
    for yi, ki, fi in zip(y, k1, f1):
        sc = atol + rtol * abs(yi)
        d2 += ((fi - ki) / sc) ** 2
    d2 = math.sqrt(d2 / n) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100.0 * h0, h1, max_step)


def _dp5_advance(f, y, k1, t_span, c, max_steps):
    """Advance list ``y`` by ``t_span``; returns ``(y, k1)``."""
    if t_span <= 0.0:
        return y, k1
    if c.h <= 0.0:
        c.h = _initial_step(f, y, k1, c.rtol, c.atol, c.max_step)
    n = len(y)
    rng = range(n)
    t = 0.0
    rejected = False
    count = 0
    while t < t_span:
        count += 1
        if count > max_steps:
            raise RuntimeError("maximum number of steps exceeded")
        h = min(c.h, c.max_step)
        last = False
        if t + h >= t_span:
            h = t_span - t
            last = True
        if h < 1e-14 * max(1.0, abs(t_span)):
            if last:
                break
            raise FloatingPointError("step size underflow")
        k2 = f([y[i] + h * A21 * k1[i] for i in rng])
        k3 = f([y[i] + h * (A31 * k1[i] + A32 * k2[i]) for i in rng])
        k4 = f([y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]) for i in rng])
        k5 = f([y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]) for i in rng])
        k6 = f(
            [y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]) for i in rng]
        )
        yn = [y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]) for i in rng]
        k7 = f(yn)
        er = [h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]) for i in rng]
        err = _err_norm(y, yn, er, c.rtol, c.atol)
        fac11 = err**0.17
        if err <= 1.0:
            fac = fac11 / c.facold**0.04
            fac = max(0.1, min(5.0, fac / 0.9))
            hnew = h / fac
            c.facold = max(err, 1e-4)
            if rejected:
                hnew = min(hnew, h)
            rejected = False
            t = t_span if last else t + h
            y, k1 = yn, k7
            c.nsteps += 1
            if not last or hnew < c.h:
                c.h = min(hnew, c.max_step)
        else:
            c.h = h / min(5.0, fac11 / 0.9)
            rejected = True
            c.nreject += 1
    return y, k1


def _lorenz_rhs(sg, rh, be, tangent):
    def f(y):
        x, yy, z = y[0], y[1], y[2]
        out = [sg * (yy - x), x * (rh - z) - yy, x * yy - be * z]
        if tangent:
            for j in range(3):
                v0, v1, v2 = y[3 + 3 * j], y[4 + 3 * j], y[5 + 3 * j]
                out.append(-sg * v0 + sg * v1)
                out.append((rh - z) * v0 - v1 - x * v2)
                out.append(yy * v0 + x * v1 - be * v2)
        return out

    return f


def lorenz_run(x0, t_sample, n_samples, sigma, rho, beta, rtol, atol, max_step, tangent=True, max_steps=100_000_000):
    f = _lorenz_rhs(sigma, rho, beta, tangent)
    c = _Ctrl(rtol, atol, max_step)
    states = np.empty((n_samples + 1, 3))
    props = np.empty((n_samples, 3, 3)) if tangent else None
    y = [float(v) for v in x0[:3]]
    states[0] = y
    for i in range(n_samples):
        if tangent:
            y = y[:3] + [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]
        k1 = f(y)
        y, _ = _dp5_advance(f, y, k1, t_sample, c, max_steps)
        states[i + 1] = y[:3]
        if tangent:
            # columns were stored one after another
            props[i] = np.array(y[3:12]).reshape(3, 3).T
    return states, props, c.nsteps


def fiber_g(s, b, mode, theta, kappa, delta, s_plateau, s_max):
    """Fiber field ``g(s, b)`` with partials in ``s`` and ``b``."""
    if mode == 0:
        return -theta * s, -theta, 0.0
    a = abs(s)
    sgn = 1.0 if s >= 0 else -1.0
    if mode == 2 and a <= s_plateau:
        chi, dchi = 1.0, 0.0
    else:
        w = (s_max - s_plateau) if mode == 2 else s_max
        u = (a - s_plateau) / w if mode == 2 else a / w
        if u >= 1.0:
            chi, dchi = 0.0, 0.0
        else:
            chi = 1.0 - u * u * u * (10.0 + u * (-15.0 + 6.0 * u))
            dchi = sgn * (-30.0 * u * u * (1.0 - u) * (1.0 - u)) / w
    eta = b * chi
    eta_s = b * dchi
    g = -theta * s * (1.0 - eta)
    gs = -theta * (1.0 - eta) + theta * s * eta_s
    gb = theta * s * chi
    if mode == 2:
        cub = kappa * s * (s * s - delta * delta)
        g -= eta * cub
        gs -= eta_s * cub + eta * kappa * (3.0 * s * s - delta * delta)
        gb -= chi * cub
    return g, gs, gb


def fiber_transit(s0, b, t_end, mode, theta, kappa, delta, s_plateau, s_max, rtol, atol, max_step=0.5, max_steps=1_000_000):
    def f(y):
        g, gs, gb = fiber_g(y[0], b, mode, theta, kappa, delta, s_plateau, s_max)
        return [g, gs * y[1], gs * y[2] + gb]

    c = _Ctrl(rtol, atol, max_step)
    y = [float(s0), 1.0, 0.0]
    y, _ = _dp5_advance(f, y, f(y), t_end, c, max_steps)
    return y[0], y[1], y[2], c.nsteps
