import numpy as np
import pytest

from dflorenz import skew4d
from dflorenz.model3d import ClassicalParams, LorenzParams
from dflorenz.skew4d import HybridModel, Mode, SkewParams


def _on_p(model, s=0.0):
    P = model.anchor
    return np.array([P.x1, P.x2, 1.0, s])


def test_mode_parse():
    assert Mode.parse("SaddleNode") == Mode.SADDLE_NODE
    assert Mode.parse("triplet") == Mode.TRIPLET
    assert Mode.parse(Mode.NONE) is Mode.NONE
    with pytest.raises(ValueError):
        Mode.parse("pitchfork")


def test_bump_on_p_is_one(model):
    bv = skew4d.bump(model.skew, _on_p(model), model.anchor)
    assert bv.value == pytest.approx(1.0, abs=1e-15)
    np.testing.assert_allclose(bv.grad, 0.0, atol=1e-12)


def test_bump_outside_tube(model):
    P = model.anchor
    q = np.array([P.x1, P.x2 + 2 * model.skew.tube_radius, 1.0, 0.0])
    bv = skew4d.bump(model.skew, q, model.anchor)
    assert bv.value == 0.0
    assert np.all(bv.grad == 0.0)


def test_bump_gradient_fd(model, rng):
    P = model.anchor
    h = 1e-6
    for _ in range(10):
        q = np.array([P.x1 + rng.uniform(-0.05, 0.05), P.x2 + rng.uniform(-0.05, 0.05), rng.uniform(0.3, 1.0), rng.uniform(-0.3, 0.3)])
        g = skew4d.bump(model.skew, q, model.anchor).grad
        for j in range(4):
            e = np.zeros(4)
            e[j] = h
            fd = (skew4d.bump(model.skew, q + e, model.anchor).value - skew4d.bump(model.skew, q - e, model.anchor).value) / (2 * h)
            assert fd == pytest.approx(g[j], abs=1e-6)


def test_fiber_field_saddle_node_on_p(model):
    bv = skew4d.bump(model.skew, _on_p(model), model.anchor)
    sd, ds = skew4d.fiber_field(model.skew, _on_p(model), bv)
    assert sd == 0.0 and ds == pytest.approx(0.0, abs=1e-12)


def test_fiber_field_triplet_repels_at_zero(model):
    sk = SkewParams(mode=Mode.TRIPLET)
    bv = skew4d.BumpValue(1.0, np.zeros(4))
    sd, ds = skew4d.fiber_field(sk, [0, 0, 1, 0.0], bv)
    assert sd == 0.0
    assert ds == pytest.approx(sk.kappa * sk.delta**2)


def test_triplet_invariant_heights(model):
    sk = model.with_skew(mode=Mode.TRIPLET)
    for s in (0.0, sk.skew.delta, -sk.skew.delta):
        v, _ = sk.field(_on_p(sk, s))
        assert v[3] == pytest.approx(0.0, abs=1e-15)


def test_field4_at_singularity(model):
    v, J = skew4d.eval_field4(model.skew, model.lorenz, [0.0, 0.0, 0.0, 0.0], model.anchor)
    assert np.all(v == 0)
    ev = np.sort(np.linalg.eigvals(J).real)
    np.testing.assert_allclose(ev, sorted([-3.0, 1.8, -1.0, -2.0]))


def test_field4_off_tube(model):
    v, _ = skew4d.eval_field4(model.skew, model.lorenz, [0.5, -0.5, 1.0, 0.5], model.anchor)
    assert v[3] == pytest.approx(-1.0)


def test_field4_jacobian_fd(model, rng):
    P = model.anchor
    h = 1e-7
    for _ in range(10):
        q = np.array([P.x1 + rng.uniform(-0.1, 0.1), P.x2 + rng.uniform(-0.1, 0.1), rng.uniform(0.3, 0.9), rng.uniform(-0.3, 0.3)])
        _, J = model.field(q)
        for j in range(4):
            e = np.zeros(4)
            e[j] = h
            fd = (model.field(q + e)[0] - model.field(q - e)[0]) / (2 * h)
            np.testing.assert_allclose(fd, J[:, j], atol=2e-6)


def test_saddle_node_keeps_base_layer(model, rng):
    for _ in range(20):
        q = np.array([rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0.01, 1), 0.0])
        v, J = model.field(q)
        assert v[3] == 0.0
        assert -model.skew.theta - 1e-12 <= J[3, 3] <= 1e-12


def test_validate_theta_examples():
    lp = LorenzParams()
    rep = skew4d.validate_theta(SkewParams(theta=2.0), lp)
    assert rep.passed
    assert rep["lambda_s0<-theta"].margin == pytest.approx(1.0)
    assert rep["-theta<lambda_c"].margin == pytest.approx(1.0)
    assert not skew4d.validate_theta(SkewParams(theta=0.5), lp)["-theta<lambda_c"].passed
    assert not skew4d.validate_theta(SkewParams(theta=3.5), lp)["lambda_s0<-theta"].passed


def test_default_model_validates(model):
    rep = model.validate()
    assert rep.passed, rep.failures()


def test_classical_model_fiber_contracts():
    from dflorenz.skew4d import ClassicalModel

    cm = ClassicalModel(ClassicalParams())
    v, J = cm.field([1.0, 2.0, 3.0, 0.5])
    assert v[3] == pytest.approx(-1.0)
    assert J[3, 3] == -2.0
