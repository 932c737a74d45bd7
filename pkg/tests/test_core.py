import math
import os
import subprocess
import sys

import numpy as np
import pytest

from dflorenz import _core_py, core

try:
    from dflorenz import _core
except ImportError:
    _core = None

needs_ext = pytest.mark.skipif(_core is None, reason="compiled extension not built")
ARGS = dict(theta=2.0, kappa=5.0, delta=0.1, s_plateau=0.2, s_max=0.4)


def transit(mod, s0, b, t, mode, rtol=1e-10, atol=1e-12):
    a = ARGS
    return mod.fiber_transit(s0, b, t, mode, a["theta"], a["kappa"], a["delta"], a["s_plateau"], a["s_max"], rtol, atol)


def test_backend_reported():
    assert core.BACKEND in ("compiled", "python")


def test_pure_python_forced():
    env = dict(os.environ, DFLORENZ_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from dflorenz import core; print(core.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@needs_ext
def test_lorenz_run_parity():
    x0 = np.array([1.0, 1.0, 1.0])
    a = _core.lorenz_run(x0, 0.5, 10, 10.0, 28.0, 8.0 / 3.0, 1e-10, 1e-12, 0.5, True)
    b = _core_py.lorenz_run(x0, 0.5, 10, 10.0, 28.0, 8.0 / 3.0, 1e-10, 1e-12, 0.5, True)
    np.testing.assert_allclose(a[0], b[0], rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(a[1], b[1], rtol=1e-11, atol=1e-11)
    assert a[2] == b[2]


@needs_ext
@pytest.mark.parametrize("mode", [0, 1, 2])
@pytest.mark.parametrize("s0", [-0.35, -0.1, 0.0, 0.05, 0.15, 0.3])
def test_fiber_transit_parity(mode, s0):
    for b in (0.0, 0.4, 1.0):
        a = transit(_core, s0, b, 3.0, mode)
        p = transit(_core_py, s0, b, 3.0, mode)
        np.testing.assert_allclose(a[:3], p[:3], rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("mod", [_core_py] + ([_core] if _core else []))
def test_fiber_transit_linear(mod):
    s, S, W, _ = transit(mod, 0.1, 1.0, 2.5, 0)
    assert s == pytest.approx(0.1 * math.exp(-5.0), rel=1e-9)
    assert S == pytest.approx(math.exp(-5.0), rel=1e-9)
    assert W == 0.0


@pytest.mark.parametrize("mod", [_core_py] + ([_core] if _core else []))
def test_fiber_transit_variations(mod):
    h = 1e-6
    for mode in (1, 2):
        s, S, W, _ = transit(mod, 0.25, 0.6, 3.0, mode, 1e-12, 1e-14)
        ds = (transit(mod, 0.25 + h, 0.6, 3.0, mode, 1e-12, 1e-14)[0] - transit(mod, 0.25 - h, 0.6, 3.0, mode, 1e-12, 1e-14)[0]) / (2 * h)
        db = (transit(mod, 0.25, 0.6 + h, 3.0, mode, 1e-12, 1e-14)[0] - transit(mod, 0.25, 0.6 - h, 3.0, mode, 1e-12, 1e-14)[0]) / (2 * h)
        assert S == pytest.approx(ds, abs=1e-7)
        assert W == pytest.approx(db, abs=1e-7)


def test_triplet_plateau_zeros():
    # s = +-delta and 0 are rest points of the fiber field on the plateau
    for s in (-0.1, 0.0, 0.1):
        assert _core_py.fiber_g(s, 1.0, 2, **ARGS)[0] == pytest.approx(0.0, abs=1e-15)
    assert _core_py.fiber_g(0.0, 1.0, 2, **ARGS)[1] == pytest.approx(5.0 * 0.01)
    assert _core_py.fiber_g(0.1, 1.0, 2, **ARGS)[1] == pytest.approx(-2 * 5.0 * 0.01)
