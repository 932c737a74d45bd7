import math

import numpy as np
import pytest

from dflorenz import flowint
from dflorenz.errors import DegenerateInputError, StableManifoldError, StiffnessError
from dflorenz.flowint import IntegratorConfig
from dflorenz.model3d import ClassicalParams, LorenzParams
from dflorenz.skew4d import ClassicalModel

LAM = np.array([-3.0, 1.8, -1.0, -2.0])


@pytest.fixture(scope="module")
def lin():
    return flowint.linear_block_field(LorenzParams(), 2.0)


@pytest.fixture(scope="module")
def classical():
    return ClassicalModel(ClassicalParams())


def test_config_invariants():
    with pytest.raises(ValueError):
        IntegratorConfig(rel_tol=-1)
    with pytest.raises(ValueError):
        IntegratorConfig(abs_tol=1e-12, event_refine_tol=1e-10)


def test_linear_closed_form(lin):
    x0 = np.array([0.2, 0.25, 1.0, 0.1])
    seg = flowint.integrate(lin, x0, 0.5)
    np.testing.assert_allclose(seg.states[-1], x0 * np.exp(0.5 * LAM), rtol=0, atol=1e-9)
    assert np.all(np.diff(seg.times) > 0)


def test_zero_time(lin):
    x0 = np.array([0.2, 0.25, 1.0, 0.1])
    seg = flowint.integrate(lin, x0, 0.0)
    assert len(seg) == 1
    np.testing.assert_array_equal(seg.states[0], x0)


def test_forward_backward(classical):
    # the backward leg amplifies forward truncation error by ~1e4, hence 1e-12
    cfg = IntegratorConfig(rel_tol=1e-12, abs_tol=1e-14, event_refine_tol=1e-14)
    x0 = np.array([1.0, 1.0, 1.0, 0.0])
    fwd = flowint.integrate(classical.field, x0, 1.0, cfg)
    back = flowint.integrate(classical.field, fwd.states[-1], -1.0, cfg)
    np.testing.assert_allclose(back.states[-1], x0, atol=1e-6)
    assert back.times[-1] == pytest.approx(-1.0)


def test_linear_frames(lin):
    seg = flowint.integrate_tangent(lin, [0.2, 0.25, 1.0, 0.1], 1.3)
    np.testing.assert_array_equal(seg.frames[0], np.eye(4))
    np.testing.assert_allclose(seg.frames[-1], np.diag(np.exp(1.3 * LAM)), atol=1e-9)
    # trace rule
    assert np.linalg.det(seg.frames[-1]) == pytest.approx(math.exp(1.3 * LAM.sum()), rel=1e-9)


def test_frames_vs_finite_differences(classical):
    y0 = np.array([1.0, 1.0, 1.0, 0.1])
    F = flowint.integrate_tangent(classical.field, y0, 1.0).frames[-1]
    h = 1e-6
    for j in range(4):
        e = np.zeros(4)
        e[j] = h
        a = flowint.integrate(classical.field, y0 + e, 1.0).states[-1]
        b = flowint.integrate(classical.field, y0 - e, 1.0).states[-1]
        np.testing.assert_allclose((a - b) / (2 * h), F[:, j], atol=1e-5)


def test_cocycle(classical):
    y0 = np.array([1.0, 1.0, 1.0, 0.1])
    s01 = flowint.integrate_tangent(classical.field, y0, 1.0)
    s12 = flowint.integrate_tangent(classical.field, s01.states[-1], 1.0)
    s02 = flowint.integrate_tangent(classical.field, y0, 2.0)
    F = s02.frames[-1]
    err = np.max(np.abs(F - s12.frames[-1] @ s01.frames[-1])) / max(1.0, np.max(np.abs(F)))
    assert err < 1e-8
    assert all(np.linalg.det(f) > 0 for f in s02.frames)


def test_domain_exit_is_an_event(lin):
    x0 = np.array([0.2, 0.25, 1.0, 0.1])
    seg = flowint.integrate(lin, x0, 5.0, domain=flowint.block_margin)
    ev = seg.exit_event
    assert ev is not None and ev["kind"] == "domain-exit"
    assert ev["t"] == pytest.approx(-math.log(0.25) / 1.8, abs=1e-9)


def test_event_direction(classical):
    # downward crossings of z = 27 only
    x0 = np.array([-5.0, -5.0, 27.0, 0.0])
    ev = flowint.integrate(classical.field, x0, 10.0, event=(lambda y: y[2] - 27.0, -1)).exit_event
    assert ev is not None
    v = classical.field(ev["state"])[0]
    assert v[2] < 0
    assert ev["state"][2] == pytest.approx(27.0, abs=1e-9)


def test_step_underflow():
    def blowup(y):
        return np.array([y[0] ** 2]), np.array([[2 * y[0]]])

    with pytest.raises(StiffnessError):
        flowint.integrate(blowup, [1.0], 2.0)


def test_hybrid_return_time_example(model):
    q, t, D, ev = flowint.advance_to_section(model, [0.2, 0.25, 0.0])
    assert t == pytest.approx(-math.log(0.25) / 1.8 + 2.1, abs=1e-12)
    assert t == pytest.approx(0.7702 + 2.1, abs=5e-5)


def test_hybrid_minimal_return_time(model):
    for x2 in (1.0, -1.0):
        assert flowint.advance_to_section(model, [0.3, x2, 0.0])[1] == pytest.approx(2.1)


def test_hybrid_on_leaf(model):
    with pytest.raises(StableManifoldError):
        flowint.advance_to_section(model, [0.1, 1e-12, 0.0])


def test_hybrid_return_derivative_fd(model, rng):
    P = model.anchor
    h = 1e-6
    pts = [np.array([P.x1 + 0.02, P.x2 + 0.03, 0.1])]
    pts += [np.array([rng.uniform(-1, 1), rng.uniform(0.05, 1) * rng.choice([-1, 1]), rng.uniform(-0.5, 0.5)]) for _ in range(10)]
    for q in pts:
        r = flowint.hybrid_return(model, q)
        for j in range(3):
            e = np.zeros(3)
            e[j] = h
            fd = (flowint.hybrid_return(model, q + e).point - flowint.hybrid_return(model, q - e).point) / (2 * h)
            np.testing.assert_allclose(fd, r.deriv[:, j], atol=1e-6)


def test_return_tangent_map_carries_flow(model):
    P = model.anchor
    q = np.array([P.x1 + 0.02, P.x2 + 0.03, 0.1])
    r = flowint.hybrid_return(model, q)
    M, X0, X1 = flowint.return_tangent_map(model, q, r)
    np.testing.assert_allclose(M @ X0, X1, atol=1e-14)


def test_batch_matches_scalar(model, rng):
    Q = np.column_stack([rng.uniform(-1, 1, 50), rng.uniform(-1, 1, 50), rng.uniform(-0.4, 0.4, 50)])
    P = model.anchor
    Q[:5, :2] = [P.x1, P.x2]
    pts, ts, Ds, _ = flowint.hybrid_return_batch(model, Q)
    for i in range(len(Q)):
        r = flowint.hybrid_return(model, Q[i])
        np.testing.assert_allclose(pts[i], r.point, rtol=1e-14, atol=1e-16)
        np.testing.assert_allclose(Ds[i], r.deriv, rtol=1e-13, atol=1e-16)
        assert ts[i] == r.time


def test_classical_return_derivative_fd(classical):
    q = np.array([-5.0, -5.0, 0.1])
    pt, t, D = flowint.classical_return(classical, q)
    h = 1e-6
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        fd = (flowint.classical_return(classical, q + e)[0] - flowint.classical_return(classical, q - e)[0]) / (2 * h)
        np.testing.assert_allclose(fd, D[:, j], atol=1e-5)
    assert pt[2] == pytest.approx(0.1 * math.exp(-2 * t), rel=1e-8)


def test_flow_det2_linear(lin):
    seg = flowint.integrate_tangent(lin, [0.2, 0.25, 1.0, 0.1], 2.0)
    e2, e3 = np.eye(4)[1], np.eye(4)[2]
    assert flowint.flow_det2(seg, (e2, e3)) == pytest.approx(math.exp(0.8 * 2.0), rel=1e-9)
    assert flowint.flow_det2(seg, (e2, e3), t=0.0) == 1.0


def test_flow_det2_vs_qr(classical, rng):
    y0 = np.array([1.0, 1.0, 20.0, 0.1])
    seg = flowint.integrate_tangent(classical.field, y0, 5.0)
    X = classical.field(y0)[0]
    n = rng.normal(size=4)
    n -= (n @ X) / (X @ X) * X
    F = seg.frames[-1]
    r1 = np.abs(np.diag(np.linalg.qr(F @ np.column_stack([X, n]))[1]))
    r0 = np.abs(np.diag(np.linalg.qr(np.column_stack([X, n]))[1]))
    val = flowint.flow_det2(seg, (X, n))
    assert val > 0
    assert val == pytest.approx(np.prod(r1) / np.prod(r0), rel=1e-6)


def test_flow_det2_degenerate():
    with pytest.raises(DegenerateInputError):
        flowint.flow_det2(np.eye(4), (np.eye(4)[0], 2 * np.eye(4)[0]))


def test_hybrid_orbit_shapes(model):
    orb = flowint.hybrid_orbit(model, [0.1, 0.5, 0.1], 20)
    assert orb.states.shape == (21, 4)
    assert orb.steps.shape == (20, 4, 4)
    assert orb.flows.shape == (21, 4)
    assert np.all(np.diff(orb.times) >= 2.1)
    rows = orb.to_rows()
    assert len(rows[0]) == 5


def test_sample_classical_kernel(classical):
    seg = flowint.sample_classical(classical, [1.0, 1.0, 1.0], 0.5, 4)
    ref = flowint.integrate_tangent(lambda x: classical.field3(x), np.array([1.0, 1.0, 1.0]), 2.0)
    np.testing.assert_allclose(seg.states[-1], ref.states[-1], atol=1e-7)
    F = np.eye(3)
    for M in seg.steps:
        F = M @ F
    np.testing.assert_allclose(F, ref.frames[-1], rtol=1e-6, atol=1e-6)
