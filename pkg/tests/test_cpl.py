import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from resilient_mas.cpl import (RegulatorError, compensation_signal, control_input,
                               pack_delta, regulator_direct_solve, regulator_flow_rhs,
                               regulator_flow_solve, rho_rhs, tracking_error,
                               unpack_delta)
from resilient_mas.dynamics import FollowerModel, regulator_phi

FM = FollowerModel(A=[[0.0, 1.0], [-1.0, -1.0]], B=[[0.0], [1.0]], C=[[1.0, 0.0]])
S2 = np.array([[0.0, 1.0], [-0.6, 0.0]])
R2 = np.array([[1.0, 0.0]])


def test_direct_solve_scalar_identity():
    fm = FollowerModel(A=[[0.0]], B=[[1.0]], C=[[1.0]])
    pi, gamma = regulator_direct_solve(np.array([[0.0]]), np.array([[1.0]]), fm)
    assert pi[0, 0] == pytest.approx(1.0, abs=1e-12)
    assert gamma[0, 0] == pytest.approx(0.0, abs=1e-12)


def test_direct_solve_residuals():
    pi, gamma = regulator_direct_solve(S2, R2, FM)
    assert np.linalg.norm(FM.A @ pi + FM.B @ gamma - pi @ S2) < 1e-12
    assert np.linalg.norm(FM.C @ pi - R2) < 1e-12


def test_direct_solve_singular_raises():
    fm = FollowerModel(A=[[0.0]], B=[[1.0]], C=[[0.0]])
    with pytest.raises(RegulatorError):
        regulator_direct_solve(np.array([[0.0]]), np.array([[1.0]]), fm)


@settings(deadline=None, max_examples=50)
@given(seed=st.integers(0, 2**32 - 1))
def test_pack_unpack_roundtrip(seed):
    rng = np.random.default_rng(seed)
    n, m, q = (int(rng.integers(1, 5)) for _ in range(3))
    fm = FollowerModel(A=np.zeros((n, n)), B=np.zeros((n, m)), C=np.zeros((1, n)))
    pi = rng.normal(size=(n, q))
    gamma = rng.normal(size=(m, q))
    pi2, gamma2 = unpack_delta(pack_delta(pi, gamma), fm, q)
    np.testing.assert_array_equal(pi, pi2)
    np.testing.assert_array_equal(gamma, gamma2)


def test_unpack_wrong_length():
    with pytest.raises(RegulatorError):
        unpack_delta(np.zeros(5), FM, 2)


def test_flow_rhs_matches_kronecker_gradient():
    rng = np.random.default_rng(2)
    q = S2.shape[0]
    delta = rng.normal(size=(FM.n + FM.m) * q)
    mu3 = 3.0
    phi = regulator_phi(FM, S2)
    rvec = np.vstack([np.zeros((FM.n, q)), R2]).flatten("F")
    expected = -mu3 * phi.T @ (phi @ delta - rvec)
    got = regulator_flow_rhs(delta, S2, R2, FM, mu3)
    np.testing.assert_allclose(got, expected, atol=1e-12)


def test_flow_converges_to_direct():
    pi, gamma = regulator_direct_solve(S2, R2, FM)
    pi_f, gamma_f = regulator_flow_solve(S2, R2, FM, mu3=6.0)
    assert np.linalg.norm(pi - pi_f) + np.linalg.norm(gamma - gamma_f) < 1e-6


def test_flow_warm_start():
    pi, gamma = regulator_direct_solve(S2, R2, FM)
    pi_f, gamma_f = regulator_flow_solve(S2, R2, FM, mu3=6.0,
                                         delta0=pack_delta(pi, gamma))
    np.testing.assert_allclose(pi_f, pi, atol=1e-9)
    np.testing.assert_allclose(gamma_f, gamma, atol=1e-9)


def test_tracking_error_and_control_input():
    x = np.array([1.0, 2.0])
    pi = np.array([[1.0, 0.0], [0.0, 1.0]])
    z = np.array([0.5, 0.5])
    eps = tracking_error(x, pi, z)
    np.testing.assert_allclose(eps, [0.5, 1.5])
    u = control_input(eps, z, np.array([[1.0, 1.0]]), np.array([[-1.0, -1.0]]),
                      np.array([0.25]))
    assert u[0] == pytest.approx(0.5 + 0.5 - 0.5 - 1.5 - 0.25)


@settings(deadline=None, max_examples=60)
@given(seed=st.integers(0, 2**32 - 1), rho=st.floats(0.0, 100.0))
def test_compensation_never_exceeds_rho(seed, rho):
    rng = np.random.default_rng(seed)
    n, m = 3, 2
    eps = rng.normal(size=n)
    P = np.eye(n) + 0.1 * rng.normal(size=(n, n))
    P = P @ P.T
    B = rng.normal(size=(n, m))
    chi = compensation_signal(eps, P, B, rho, omega=0.01)
    assert np.linalg.norm(chi) <= rho + 1e-12


@settings(deadline=None, max_examples=60)
@given(seed=st.integers(0, 2**32 - 1))
def test_rho_rhs_nonnegative(seed):
    rng = np.random.default_rng(seed)
    eps = rng.normal(size=3)
    P = np.eye(3)
    B = rng.normal(size=(3, 1))
    assert rho_rhs(eps, P, B, dbar=0.1, omega=0.01) >= 0.0


def test_rho_rhs_branch_continuity():
    dbar, omega = 0.03, 0.01
    # construct eps with ||eps' P B|| exactly at the branch boundary
    P = np.eye(2)
    B = np.array([[1.0], [0.0]])
    eps = np.array([dbar, 0.0])
    w = float(np.linalg.norm(eps @ P @ B))
    assert w == dbar
    upper = w + 2.0 * omega
    lower = w + 2.0 * omega * w / dbar
    assert abs(upper - lower) < 1e-15
    assert rho_rhs(eps, P, B, dbar, omega) == pytest.approx(upper, abs=1e-15)
