import numpy as np
import pytest

from d2oc.dynamics import LtiModel, build_lifted, double_integrator, make_quadcopter_model, relative_degree
from d2oc.errors import DimensionMismatch, NoRelativeDegree


def impulse_delay(model: LtiModel, max_steps: int = 20) -> int:
    """First step at which a unit input at k=0 shows up in the output."""
    first = []
    for ch in range(model.m):
        x = np.zeros(model.n)
        u = np.zeros(model.m)
        u[ch] = 1.0
        x = model.step(x, u)
        for k in range(1, max_steps + 1):
            if np.any(np.abs(model.output(x)) > 1e-12):
                first.append(k)
                break
            x = model.step(x, np.zeros(model.m))
    return min(first)


def simulate_stack(model: LtiModel, x, U, H):
    """Outputs y(k+r)..y(k+r+H-1) by direct simulation (inputs zero past the horizon)."""
    U = U.reshape(H, model.m)
    ys = []
    for k in range(model.r + H):
        u = U[k] if k < H else np.zeros(model.m)
        x = model.step(x, u)
        if k + 1 >= model.r:
            ys.append(model.output(x))
    return np.concatenate(ys[:H])


def test_double_integrator_relative_degree():
    m = double_integrator(0.1)
    assert m.r == 2
    assert impulse_delay(m) == 2


def test_feedthrough_chain():
    m = LtiModel(np.eye(2), np.array([[1.0], [0.0]]), np.array([[1.0, 0.0]]), 1.0)
    assert m.r == 1


def test_quadcopter_structure():
    m = make_quadcopter_model(0.1, 9.81, 0.5)
    assert m.A.shape == (8, 8)
    np.testing.assert_array_equal(m.A[:4, :4], m.A[4:, 4:])
    assert not np.any(m.A[:4, 4:]) and not np.any(m.A[4:, :4])
    assert not np.any(m.C @ m.B)
    assert m.r == 4
    assert impulse_delay(m) == 4
    ctrb = np.hstack([np.linalg.matrix_power(m.A, i) @ m.B for i in range(8)])
    assert np.linalg.matrix_rank(ctrb) == 8


def test_quadcopter_pure_drift():
    m = make_quadcopter_model(0.1, 9.81, 0.5)
    x = np.zeros(8)
    x[1] = 1.0
    x1 = m.step(x, np.zeros(2))
    assert x1[0] == pytest.approx(0.1)
    assert x1[1] == pytest.approx(1.0)


def test_quadcopter_rejects_bad_params():
    with pytest.raises(ValueError):
        make_quadcopter_model(0.0)


def test_no_relative_degree():
    A = np.eye(2)
    B = np.array([[0.0], [1.0]])
    C = np.array([[1.0, 0.0]])
    with pytest.raises(NoRelativeDegree):
        relative_degree(A, B, C, max_probe=5)
    with pytest.raises(NoRelativeDegree):
        LtiModel(A, B, C, 1.0)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        LtiModel(np.eye(2), np.ones((3, 1)), np.ones((1, 2)), 1.0)


def test_scalar_lifted():
    m = LtiModel(np.eye(1), np.eye(1), np.eye(1), 1.0)
    L1 = build_lifted(m, 1)
    np.testing.assert_array_equal(L1.theta, [[1.0]])
    np.testing.assert_array_equal(L1.phi, [[1.0]])
    L2 = build_lifted(m, 2)
    np.testing.assert_array_equal(L2.theta, [[1.0, 0.0], [1.0, 1.0]])
    np.testing.assert_array_equal(L2.phi, [[1.0], [1.0]])


def test_double_integrator_lifted_matches_rollouts(rng):
    m = double_integrator(0.1)
    L = build_lifted(m, 2)
    for _ in range(10):
        x = rng.standard_normal(2)
        U = rng.standard_normal(2)
        assert np.max(np.abs(L.predict(x, U) - simulate_stack(m, x, U, 2))) <= 1e-12


def random_model(rng):
    while True:
        n = int(rng.integers(1, 9))
        m = int(rng.integers(1, 3))
        d = int(rng.integers(1, 3))
        A = rng.standard_normal((n, n))
        A /= max(1.0, np.max(np.abs(np.linalg.eigvals(A))))
        B = rng.standard_normal((n, m))
        C = rng.standard_normal((d, n))
        if rng.random() < 0.3 and n > 1:
            C[:, :] = 0
            C[0, 0] = 1.0
            B[0, :] = 0.0
        try:
            return LtiModel(A, B, C, 0.1)
        except NoRelativeDegree:
            continue


def test_lifted_equivalence_random(rng):
    worst = 0.0
    for _ in range(100):
        model = random_model(rng)
        H = int(rng.integers(1, 16))
        L = build_lifted(model, H)
        x = rng.standard_normal(model.n)
        U = rng.standard_normal(model.m * H)
        worst = max(worst, np.max(np.abs(L.predict(x, U) - simulate_stack(model, x, U, H))))
    assert worst <= 1e-10


def test_relative_degree_minimality(rng):
    for _ in range(50):
        model = random_model(rng)
        tol = 1e-9 * (1 + np.linalg.norm(model.C, np.inf) * np.linalg.norm(model.B, np.inf))
        for l in range(1, model.r):
            assert np.max(np.abs(model.C @ np.linalg.matrix_power(model.A, l - 1) @ model.B)) <= tol
        assert np.max(np.abs(model.C @ np.linalg.matrix_power(model.A, model.r - 1) @ model.B)) > tol


def test_theta_block_structure():
    m = make_quadcopter_model()
    H = 6
    L = build_lifted(m, H)
    d, mm, r = m.d, m.m, m.r
    for h in range(H):
        for l in range(H):
            blk = L.theta[h * d:(h + 1) * d, l * mm:(l + 1) * mm]
            if l > h:
                assert not np.any(blk)
            else:
                expect = m.C @ np.linalg.matrix_power(m.A, r + h - l - 1) @ m.B
                np.testing.assert_allclose(blk, expect, rtol=1e-12, atol=1e-15)
        np.testing.assert_allclose(L.phi[h * d:(h + 1) * d], m.C @ np.linalg.matrix_power(m.A, r + h),
                                   rtol=1e-12, atol=1e-15)
