import math

import numpy as np
import pytest

from dflorenz import model3d
from dflorenz.errors import OutOfDomainError, StableManifoldError
from dflorenz.model3d import ClassicalParams, LorenzParams


def test_defaults_validate():
    rep = model3d.validate_params(LorenzParams())
    assert rep.passed, rep.failures()
    assert all(c.margin > 0 for c in rep.checks)


def test_wide_ear_example_validates(wide_ear):
    assert model3d.validate_params(wide_ear).passed


def test_weak_unstable_fails_sectional_condition():
    rep = model3d.validate_params(LorenzParams(lambda_s=-3, lambda_c=-1, lambda_u=0.5))
    assert not rep["lambda_c+lambda_u>0"].passed


def test_misordered_stable_eigenvalues_fail():
    rep = model3d.validate_params(LorenzParams(lambda_s=-1, lambda_c=-3, lambda_u=2))
    assert not rep["lambda_s<lambda_c"].passed


def test_exponents_alpha_beta():
    p = LorenzParams()
    assert p.alpha == pytest.approx(5 / 9)
    assert p.beta == pytest.approx(5 / 3)
    assert p.ear_B * p.alpha == pytest.approx(1.0277777777777777)


def test_field3_examples():
    p = LorenzParams()
    v, J = model3d.eval_field3(p, [0.0, 0.0, 0.0])
    assert np.all(v == 0)
    v, J = model3d.eval_field3(p, [0.2, 0.25, 1.0])
    np.testing.assert_allclose(v, [-0.6, 0.45, -1.0])
    np.testing.assert_array_equal(J, np.diag([-3.0, 1.8, -1.0]))


def test_field3_outside_block():
    with pytest.raises(OutOfDomainError):
        model3d.eval_field3(LorenzParams(), [0.0, 1.5, 0.5])


def test_linear_exit_example():
    p = LorenzParams()
    e = model3d.linear_exit(p, [0.2, 0.25, 1.0])
    t = -math.log(0.25) / 1.8
    assert e.exit_time == pytest.approx(t, abs=1e-12)
    assert e.exit_time == pytest.approx(0.7702, abs=5e-5)
    np.testing.assert_allclose(e.exit_point, [0.2 * math.exp(-3 * t), 1.0, math.exp(-t)], rtol=1e-12)
    np.testing.assert_allclose(e.exit_point, [0.0198, 1.0, 0.4629], atol=5e-5)


def test_linear_exit_on_face_and_left_side():
    p = LorenzParams()
    e = model3d.linear_exit(p, [0.0, 1.0, 1.0])
    assert e.exit_time == 0.0
    np.testing.assert_allclose(e.exit_point, [0.0, 1.0, 1.0])
    e = model3d.linear_exit(p, [0.5, -0.5, 1.0])
    assert e.side == -1
    assert e.exit_time == pytest.approx(math.log(2) / 1.8, rel=1e-14)


def test_linear_exit_on_stable_manifold():
    with pytest.raises(StableManifoldError):
        model3d.linear_exit(LorenzParams(), [0.3, 0.0, 1.0])


def test_linear_exit_matches_flow():
    p = LorenzParams()
    e = model3d.linear_exit(p, [0.2, 0.25, 1.0])
    np.testing.assert_allclose(model3d.linear_flow(p, [0.2, 0.25, 1.0], e.exit_time), e.exit_point, rtol=1e-13)


def test_ear_map_example(wide_ear):
    e = model3d.linear_exit(wide_ear, [0.2, 0.25, 1.0])
    img, jac, tau = model3d.ear_map(wide_ear, e)
    x1e, _, x3e = e.exit_point
    assert img[1] == pytest.approx(0.95 - 1.85 * x3e, rel=1e-14)
    assert img[0] == pytest.approx(0.1 * x1e + 0.2 * x3e, rel=1e-14)
    assert img[1] == pytest.approx(0.0936, abs=2e-4)
    assert img[0] == pytest.approx(0.0946, abs=2e-4)
    assert tau == 2.1


def test_ear_leaf_preservation():
    p = LorenzParams()
    a = model3d.ear_map(p, model3d.linear_exit(p, [0.1, 0.3, 1.0]))[0]
    b = model3d.ear_map(p, model3d.linear_exit(p, [-0.7, 0.3, 1.0]))[0]
    assert a[1] == b[1]


def test_ear_cusp_tip():
    p = LorenzParams()
    x1, x2, _, _ = model3d.return_map0(p, 0.5, 1e-9)
    assert abs(x1) < 1e-5
    assert x2 == pytest.approx(0.95, abs=1e-4)


def test_quotient_map_expands(rng):
    p = LorenzParams()
    x = rng.uniform(1e-8, 1.0, 1000) * rng.choice([-1, 1], 1000)
    f, df = model3d.quotient_map(p, x)
    assert np.all(np.abs(df) >= p.ear_B * p.alpha - 1e-14)
    assert np.all(np.abs(f) < 1.0)


def test_return_map0_derivative_fd(rng):
    p = LorenzParams(ear_c=0.1, ear_d=0.2)
    h = 1e-7
    for _ in range(20):
        x1, x2 = rng.uniform(-1, 1), rng.uniform(0.05, 1) * rng.choice([-1, 1])
        D = model3d.return_map0(p, x1, x2)[3]
        for j, (a, b) in enumerate([((x1 + h, x2), (x1 - h, x2)), ((x1, x2 + h), (x1, x2 - h))]):
            ya = np.array(model3d.return_map0(p, *a)[:2])
            yb = np.array(model3d.return_map0(p, *b)[:2])
            np.testing.assert_allclose((ya - yb) / (2 * h), D[:, j], atol=1e-6)


def test_return_map0_composes_exit_and_ear(rng):
    p = LorenzParams()
    for _ in range(10):
        x1, x2 = rng.uniform(-1, 1), rng.uniform(-1, 1)
        e = model3d.linear_exit(p, [x1, x2, 1.0])
        img = model3d.ear_map(p, e)[0]
        r = model3d.return_map0(p, x1, x2)
        np.testing.assert_allclose([r[0], r[1]], img, rtol=1e-13, atol=1e-15)
        assert r[2] == pytest.approx(e.exit_time + p.tau_E)


def test_classical_field_examples():
    p = ClassicalParams()
    v, J = model3d.classical_field(p, [0.0, 0.0, 0.0])
    assert np.all(v == 0)
    ev = np.sort(np.linalg.eigvals(J).real)
    a = p.sigma + 1
    disc = math.sqrt(a * a + 4 * p.sigma * (p.rho - 1))
    np.testing.assert_allclose(ev, sorted([(-a - disc) / 2, -p.beta, (-a + disc) / 2]), atol=1e-10)
    np.testing.assert_allclose(ev, [-22.8277, -8 / 3, 11.8277], atol=1e-4)
    c = math.sqrt(p.beta * (p.rho - 1))
    v, _ = model3d.classical_field(p, [c, c, p.rho - 1])
    np.testing.assert_allclose(v, 0, atol=1e-12)


def test_classical_divergence(rng):
    p = ClassicalParams()
    for x in rng.normal(0, 10, (20, 3)):
        assert np.trace(model3d.classical_field(p, x)[1]) == pytest.approx(-(p.sigma + 1 + p.beta))


def test_fixed_points0():
    p = LorenzParams()
    x1, x2 = model3d.fixed_points0(p, 1)
    f = float(model3d.quotient_map(p, x2)[0])
    assert f == pytest.approx(x2, abs=1e-12)
    assert x2 == pytest.approx(0.197, abs=1e-3)
    r = model3d.return_map0(p, x1, x2)
    assert float(r[0]) == pytest.approx(x1, abs=1e-12)
    x1m, x2m = model3d.fixed_points0(p, -1)
    assert x2m == pytest.approx(-x2, abs=1e-12)
    # x1' = s(c x1 |x2|^beta + d |x2|^alpha) is not odd in x1, so only x2 mirrors
    r = model3d.return_map0(p, x1m, x2m)
    assert float(r[0]) == pytest.approx(x1m, abs=1e-12)
