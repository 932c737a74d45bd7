# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: Dormand-Prince 5(4) with PI step control.

Mirrors :mod:`dflorenz._core_py` step for step; the two must agree to
rounding.  Only the inner loops live here.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt, pow, fmin, fmax

cnp.import_array()

cdef double A21 = 1.0 / 5.0
cdef double A31 = 3.0 / 40.0, A32 = 9.0 / 40.0
cdef double A41 = 44.0 / 45.0, A42 = -56.0 / 15.0, A43 = 32.0 / 9.0
cdef double A51 = 19372.0 / 6561.0, A52 = -25360.0 / 2187.0, A53 = 64448.0 / 6561.0, A54 = -212.0 / 729.0
cdef double A61 = 9017.0 / 3168.0, A62 = -355.0 / 33.0, A63 = 46732.0 / 5247.0, A64 = 49.0 / 176.0, A65 = -5103.0 / 18656.0
cdef double B1 = 35.0 / 384.0, B3 = 500.0 / 1113.0, B4 = 125.0 / 192.0, B5 = -2187.0 / 6784.0, B6 = 11.0 / 84.0
cdef double E1 = 71.0 / 57600.0, E3 = -71.0 / 16695.0, E4 = 71.0 / 1920.0, E5 = -17253.0 / 339200.0, E6 = 22.0 / 525.0, E7 = -1.0 / 40.0

DEF NMAX = 16

ctypedef void (*rhs_t)(double* y, double* dy, double* prm) noexcept nogil

cdef struct Ctrl:
    double rtol
    double atol
    double max_step
    double h
    double facold
    long nsteps
    long nreject


cdef void lorenz_rhs(double* y, double* dy, double* prm) noexcept nogil:
    cdef double sg = prm[0], rh = prm[1], be = prm[2]
    cdef double x = y[0], yy = y[1], z = y[2]
    cdef int j
    cdef double v0, v1, v2
    dy[0] = sg * (yy - x)
    dy[1] = x * (rh - z) - yy
    dy[2] = x * yy - be * z
    if prm[3] > 0.5:
        # tangent columns stored column-major after the state
        for j in range(3):
            v0 = y[3 + 3 * j]
            v1 = y[4 + 3 * j]
            v2 = y[5 + 3 * j]
            dy[3 + 3 * j] = -sg * v0 + sg * v1
            dy[4 + 3 * j] = (rh - z) * v0 - v1 - x * v2
            dy[5 + 3 * j] = yy * v0 + x * v1 - be * v2


cdef inline void fiber_g(double s, double b, double* prm, double* g, double* gs, double* gb) noexcept nogil:
    # prm: mode, theta, kappa, delta, s_plateau, s_max
    cdef int mode = <int>prm[0]
    cdef double th = prm[1], ka = prm[2], de = prm[3], sp = prm[4], sm = prm[5]
    cdef double a = fabs(s), sgn = 1.0 if s >= 0 else -1.0
    cdef double u, w, chi, dchi, eta, eta_s, cub
    if mode == 0:
        g[0] = -th * s
        gs[0] = -th
        gb[0] = 0.0
        return
    if mode == 2:
        if a <= sp:
            chi = 1.0
            dchi = 0.0
        else:
            w = sm - sp
            u = (a - sp) / w
            if u >= 1.0:
                chi = 0.0
                dchi = 0.0
            else:
                chi = 1.0 - u * u * u * (10.0 + u * (-15.0 + 6.0 * u))
                dchi = sgn * (-30.0 * u * u * (1.0 - u) * (1.0 - u)) / w
    else:
        u = a / sm
        if u >= 1.0:
            chi = 0.0
            dchi = 0.0
        else:
            chi = 1.0 - u * u * u * (10.0 + u * (-15.0 + 6.0 * u))
            dchi = sgn * (-30.0 * u * u * (1.0 - u) * (1.0 - u)) / sm
    eta = b * chi
    eta_s = b * dchi
    g[0] = -th * s * (1.0 - eta)
    gs[0] = -th * (1.0 - eta) + th * s * eta_s
    gb[0] = th * s * chi
    if mode == 2:
        cub = ka * s * (s * s - de * de)
        g[0] -= eta * cub
        gs[0] -= eta_s * cub + eta * ka * (3.0 * s * s - de * de)
        gb[0] -= chi * cub


cdef void fiber_rhs(double* y, double* dy, double* prm) noexcept nogil:
    # y = (s, ds/ds0, ds/db); prm[6] = b
    cdef double g, gs, gb
    fiber_g(y[0], prm[6], prm, &g, &gs, &gb)
    dy[0] = g
    dy[1] = gs * y[1]
    dy[2] = gs * y[2] + gb


cdef double err_norm(int n, double* y, double* yn, double* err, double rtol, double atol) noexcept nogil:
    cdef double acc = 0.0, sc, r
    cdef int i
    for i in range(n):
        sc = atol + rtol * fmax(fabs(y[i]), fabs(yn[i]))
        r = err[i] / sc
        acc += r * r
    return sqrt(acc / n)


cdef double initial_step(rhs_t f, int n, double* y, double* k1, double* prm, double rtol, double atol, double max_step) noexcept nogil:
    cdef double d0 = 0.0, d1 = 0.0, d2 = 0.0, sc, h0, h1
    cdef double y1[NMAX]
    cdef double f1[NMAX]
    cdef int i
    for i in range(n):
        sc = atol + rtol * fabs(y[i])
        d0 += (y[i] / sc) ** 2
        d1 += (k1[i] / sc) ** 2
    d0 = sqrt(d0 / n)
    d1 = sqrt(d1 / n)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    h0 = fmin(h0, max_step)
    for i in range(n):
        y1[i] = y[i] + h0 * k1[i]
    f(y1, f1, prm)
    for i in range(n):
        sc = atol + rtol * fabs(y[i])
        d2 += ((f1[i] - k1[i]) / sc) ** 2
    d2 = sqrt(d2 / n) / h0
    if fmax(d1, d2) <= 1e-15:
        h1 = fmax(1e-6, h0 * 1e-3)
    else:
        h1 = pow(0.01 / fmax(d1, d2), 0.2)
    return fmin(fmin(100.0 * h0, h1), max_step)


cdef int dp5_advance(rhs_t f, int n, double* y, double* k1, double t_span, double* prm, Ctrl* c, long max_steps) noexcept nogil:
    """Advance y by t_span > 0 in place.  k1 holds f(y) on entry and exit."""
    cdef double k2[NMAX]
    cdef double k3[NMAX]
    cdef double k4[NMAX]
    cdef double k5[NMAX]
    cdef double k6[NMAX]
    cdef double k7[NMAX]
    cdef double yt[NMAX]
    cdef double yn[NMAX]
    cdef double er[NMAX]
    cdef double t = 0.0, h, err, fac11, fac, hnew
    cdef int i, last
    cdef bint rejected = False
    cdef long count = 0
    if t_span <= 0.0:
        return 0
    if c.h <= 0.0:
        c.h = initial_step(f, n, y, k1, prm, c.rtol, c.atol, c.max_step)
    while t < t_span:
        count += 1
        if count > max_steps:
            return -2
        h = fmin(c.h, c.max_step)
        last = 0
        if t + h >= t_span:
            h = t_span - t
            last = 1
        if h < 1e-14 * fmax(1.0, fabs(t_span)):
            if last:
                break
            return -1
        for i in range(n):
            yt[i] = y[i] + h * A21 * k1[i]
        f(yt, k2, prm)
        for i in range(n):
            yt[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i])
        f(yt, k3, prm)
        for i in range(n):
            yt[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
        f(yt, k4, prm)
        for i in range(n):
            yt[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
        f(yt, k5, prm)
        for i in range(n):
            yt[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
        f(yt, k6, prm)
        for i in range(n):
            yn[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i])
        f(yn, k7, prm)
        for i in range(n):
            er[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
        err = err_norm(n, y, yn, er, c.rtol, c.atol)
        fac11 = pow(err, 0.17)
        if err <= 1.0:
            fac = fac11 / pow(c.facold, 0.04)
            fac = fmax(0.1, fmin(5.0, fac / 0.9))
            hnew = h / fac
            c.facold = fmax(err, 1e-4)
            if rejected:
                hnew = fmin(hnew, h)
            rejected = False
            t = t_span if last else t + h
            for i in range(n):
                y[i] = yn[i]
                k1[i] = k7[i]
            c.nsteps += 1
            if not last or hnew < c.h:
                c.h = fmin(hnew, c.max_step)
        else:
            c.h = h / fmin(5.0, fac11 / 0.9)
            rejected = True
            c.nreject += 1
    return 0


def lorenz_run(x0, double t_sample, long n_samples, double sigma, double rho, double beta,
               double rtol, double atol, double max_step, bint tangent=True, long max_steps=100000000):
    """Sample the classical Lorenz flow every ``t_sample`` for ``n_samples`` intervals.

    Returns ``(states, props, nsteps)``: ``states`` is ``(n+1, 3)``;
    ``props[i]`` is the tangent propagator over interval ``i`` (restarted at
    the identity each interval) or ``None`` without tangents.
    """
    cdef int n = 12 if tangent else 3
    cdef double y[NMAX]
    cdef double k1[NMAX]
    cdef double prm[4]
    cdef Ctrl c
    cdef long i, j
    cdef int rc
    cdef cnp.ndarray[cnp.float64_t, ndim=2] states = np.empty((n_samples + 1, 3))
    cdef cnp.ndarray[cnp.float64_t, ndim=3] props
    if tangent:
        props = np.empty((n_samples, 3, 3))
    prm[0] = sigma
    prm[1] = rho
    prm[2] = beta
    prm[3] = 1.0 if tangent else 0.0
    c.rtol = rtol
    c.atol = atol
    c.max_step = max_step
    c.h = -1.0
    c.facold = 1e-4
    c.nsteps = 0
    c.nreject = 0
    for j in range(3):
        y[j] = float(x0[j])
        states[0, j] = y[j]
    for i in range(n_samples):
        if tangent:
            for j in range(9):
                y[3 + j] = 0.0
            y[3] = 1.0
            y[7] = 1.0
            y[11] = 1.0
        lorenz_rhs(y, k1, prm)
        with nogil:
            rc = dp5_advance(lorenz_rhs, n, y, k1, t_sample, prm, &c, max_steps)
        if rc == -1:
            raise FloatingPointError("step size underflow")
        if rc == -2:
            raise RuntimeError("maximum number of steps exceeded")
        for j in range(3):
            states[i + 1, j] = y[j]
        if tangent:
            for j in range(3):
                props[i, 0, j] = y[3 + 3 * j]
                props[i, 1, j] = y[4 + 3 * j]
                props[i, 2, j] = y[5 + 3 * j]
    return states, (props if tangent else None), c.nsteps


def fiber_transit(double s0, double b, double t_end, int mode, double theta, double kappa,
                  double delta, double s_plateau, double s_max, double rtol, double atol,
                  double max_step=0.5, long max_steps=1000000):
    """Integrate ``sdot = g(s, b)`` with its variations over ``[0, t_end]``.

    Returns ``(s, ds/ds0, ds/db, nsteps)``.
    """
    cdef double y[3]
    cdef double k1[3]
    cdef double prm[7]
    cdef Ctrl c
    cdef int rc
    prm[0] = mode
    prm[1] = theta
    prm[2] = kappa
    prm[3] = delta
    prm[4] = s_plateau
    prm[5] = s_max
    prm[6] = b
    y[0] = s0
    y[1] = 1.0
    y[2] = 0.0
    c.rtol = rtol
    c.atol = atol
    c.max_step = max_step
    c.h = -1.0
    c.facold = 1e-4
    c.nsteps = 0
    c.nreject = 0
    fiber_rhs(y, k1, prm)
    with nogil:
        rc = dp5_advance(fiber_rhs, 3, y, k1, t_end, prm, &c, max_steps)
    if rc == -1:
        raise FloatingPointError("step size underflow")
    if rc == -2:
        raise RuntimeError("maximum number of steps exceeded")
    return y[0], y[1], y[2], c.nsteps
