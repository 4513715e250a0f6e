import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qpscatter.background import BackgroundOperator, DirichletData, build_background
from qpscatter.errors import BranchPoint, InvalidInput
from qpscatter.scattering import _surface

P2 = (-1.3, -0.3, 0.3, 1.3)
G2 = (-1.5, -0.5, 0.2, 0.9, 1.4, 2.0)


@pytest.fixture(scope="module")
def op2():
    return BackgroundOperator(_surface(G2), DirichletData([-0.2, 1.1], [1, -1]), 30)


def test_free_background_constant():
    op = build_background(_surface((-1.0, 1.0)), DirichletData([], []), 20)
    assert np.allclose(op.a_q, 0.5, atol=1e-14) and np.allclose(op.b_q, 0, atol=1e-14)


def test_dirichlet_rejections():
    sd = _surface(P2)
    with pytest.raises(InvalidInput):
        BackgroundOperator(sd, DirichletData([0.5], [1]), 5)
    with pytest.raises(InvalidInput):
        BackgroundOperator(sd, DirichletData([0.3], [1]), 5)  # band edge
    with pytest.raises(InvalidInput):
        DirichletData([0.0], [2])


def test_period_two_recursion():
    op = BackgroundOperator(_surface(P2), DirichletData([0.0], [-1]), 20)
    n = op.n_window
    assert np.allclose(op.a_q, np.where(n % 2 == 0, 0.5, 0.8), atol=1e-12)
    assert np.allclose(op.b_q, 0, atol=1e-12)


def test_theta_formula_matches_recursion(op2):
    n = np.arange(-8, 9)
    a, b = op2.theta_coefficients(n)
    assert np.allclose(a, op2.a(n), atol=1e-10) and np.allclose(b, op2.b(n), atol=1e-10)
    rng = np.random.default_rng(3)
    for _ in range(10):
        z = complex(rng.uniform(-2, 2), rng.uniform(0.1, 1))
        k = int(rng.integers(-4, 5))
        side = int(rng.choice([-1, 1]))
        tab = op2.psi(np.array([z]), min(k, 0), max(k, 0), side)[0]
        assert abs(op2.psi_theta(z, side, k) - tab[k - min(k, 0)]) < 1e-7 * max(1, abs(tab[k - min(k, 0)]))


def test_shift_covariance(op2):
    shifted = BackgroundOperator(op2.surface, DirichletData(op2.mu(1), op2.sigma(1)), 10)
    n = np.arange(-5, 6)
    assert np.allclose(shifted.a(n), op2.a(n + 1), atol=1e-8)
    assert np.allclose(shifted.b(n), op2.b(n + 1), atol=1e-8)


def test_phi_free_case():
    op = BackgroundOperator(_surface((-1.0, 1.0)), DirichletData([], []), 5)
    z = np.array([0.3 + 0.4j, 2.0 + 0j, -3 - 1j])
    assert np.allclose(op.phi(z, 0, 1) * op.phi(z, 0, -1), 1, atol=1e-14)
    with pytest.raises(BranchPoint):
        op.phi(np.array([1.0 + 0j]))


def test_phi_large_z_and_band_symmetry(op2):
    z = np.array([1e4j])
    a0 = op2.a(0)[0]
    assert abs(op2.phi(z, 0, -1)[0] / (z[0] / a0) - 1) < 1e-3
    assert abs(abs(op2.phi(z, 0, 1)[0] * z[0] / a0) - 1) < 1e-3
    lam = np.array([-1.0, 0.5, 1.7]) + 0j
    assert np.allclose(op2.phi(lam, 0, -1), np.conj(op2.phi(lam, 0, 1)), atol=1e-13)


@settings(max_examples=25, deadline=None)
@given(x=st.floats(-3, 3), y=st.floats(-2, 2).filter(lambda v: abs(v) > 1e-3), side=st.sampled_from([1, -1]))
def test_psi_recurrence_and_wronskian(op2, x, y, side):
    z = complex(x, y)
    u = op2.psi_q(z, side, (-10, 10))
    assert u.values[10] == 1
    assert op2.recurrence_residual(u.values, z, -10) < 1e-9
    tp = op2.psi(np.array([z]), -10, 10, 1)[0]
    tm = op2.psi(np.array([z]), -10, 10, -1)[0]
    n = np.arange(-10, 10)
    W = op2.a(n) * (tm[:-1] * tp[1:] - tp[:-1] * tm[1:])
    ref = op2.wronskian_q(z)
    assert np.max(np.abs(W - ref)) < 1e-9 * max(1, abs(ref))


def test_band_edge_dependence(op2):
    for E in op2.curve.E:
        tp = op2.psi(np.array([E + 0j]), 0, 1, 1, limit=True)[0]
        tm = op2.psi(np.array([E + 0j]), 0, 1, -1, limit=True)[0]
        assert abs(op2.a(0)[0] * (tm[0] * tp[1] - tp[0] * tm[1])) < 1e-8


def test_s_q():
    op = BackgroundOperator(_surface((-1.0, 1.0)), DirichletData([], []), 5)
    assert np.allclose(op.s_q(1.0, -5, 12), np.arange(-5, 13), atol=1e-12)
    op2 = BackgroundOperator(_surface(P2), DirichletData([0.0], [-1]), 5)
    z = 0.4 + 0.2j
    assert abs(op2.s_q(z, 0, 2)[2] - (z - op2.b(1)[0]) / op2.a(1)[0]) < 1e-14
    for E in op2.curve.E:
        s = op2.s_q(E, -40, 40)
        psi = op2.psi(np.array([E + 0j]), -40, 40, 1, limit=True)[0]
        n = np.arange(-40, 41)
        ratio = np.abs(s[np.abs(n) > 0]) / (np.abs(n[np.abs(n) > 0]) * np.abs(psi[np.abs(n) > 0]))
        assert np.max(ratio) < 10


def test_orthonormality(op2):
    rule = op2.circle_rule(64)
    tp = op2.psi(rule.lam + 0j, -8, 8, 1, rule.lip)
    tm = op2.psi(rule.lam + 0j, -8, 8, -1, rule.lip)
    G = (rule.nu[:, None] * tp).T @ tm
    assert np.max(np.abs(G - np.eye(17))) < 1e-8


def test_report_and_csv(op2):
    rep = op2.report()
    assert len(rep["a_q"]) == 2 * op2.window + 1
    assert op2.to_csv().splitlines()[0] == "n,a_q,b_q"
