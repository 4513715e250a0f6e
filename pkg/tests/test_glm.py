import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qpscatter import glm
from qpscatter.errors import InvalidInput, NotPositive, TailTruncationTooLarge
from qpscatter.jost import Perturbation, kernel
from qpscatter.scattering import _background, corrupt, scattering_data

FREE = ((-1.0, 1.0), (), (), 30)
P2 = ((-1.3, -0.3, 0.3, 1.3), (0.0,), (-1,), 30)


def _data(bg, sites, npb=128):
    op = _background(*bg)
    pert = Perturbation.from_sites(sites)
    return op, pert, scattering_data(op, pert, nodes_per_band=npb)


def test_zero_data_gives_identity_kernel():
    op, _, d = _data(P2, [], 32)
    res, sols, kers = glm.invert(d, (-3, 3))
    assert np.allclose(res.a, op.a(res.n), atol=1e-13) and np.allclose(res.b, op.b(res.n), atol=1e-13)
    for s in (1, -1):
        assert np.max(np.abs(kers[s].F)) < 1e-13
        assert np.allclose(sols[s].diag(), 1, atol=1e-13)


@pytest.mark.parametrize("bg", [FREE, P2])
def test_kernel_matches_quadrature(bg):
    op, pert, d = _data(bg, [(0, 0.15, 0.6), (1, 0.0, -0.3)])
    _, sols, _ = glm.invert(d, (-4, 4))
    for side in (1, -1):
        K = kernel(op, pert, side, window=12)
        sol = sols[side]
        for n in range(-4, 5):
            for j in range(4):
                m = n + side * j
                assert abs(sol.K(n, m) - K(n, m)) < 1e-10


def test_F_symmetric_and_compact():
    op, pert, d = _data(P2, [(0, 0.1, 0.4)])
    ker = glm.assemble_F(d, op, 1, -6, 20)
    assert np.max(np.abs(ker.F - ker.F.T)) < 1e-14
    assert ker.presym_residual < 1e-12 and ker.imag_residual < 1e-12
    rep = glm.verify_F_decay(ker, pert)
    assert rep.passed
    assert np.isfinite(glm.diagonal_difference_sum(ker, (-5, 15)))
    s, env = ker.envelope()
    assert s.size == env.size == 2 * ker.F.shape[0] - 1


def test_block_range_checked():
    op, _, d = _data(FREE, [(0, 0.0, 0.5)], 32)
    ker = glm.assemble_F(d, op, 1, 0, 10)
    with pytest.raises(InvalidInput):
        ker.block(5, 8)
    assert ker.block(2, 8)[0].shape == (9, 9)


def test_negated_norming_constant_rejected():
    op, _, d = _data(FREE, [(0, 0.0, 1.0)], 64)
    ker = glm.assemble_F(corrupt(d, "negate_gamma"), op, 1, -3, 30)
    assert glm.check_positivity(ker, 0, 20) < 0
    with pytest.raises(NotPositive):
        glm.solve_glm(ker, (-2, 2), 20)


def test_positivity_and_quadratic_form():
    op, _, d = _data(P2, [(0, 0.0, 0.8)])
    ker = glm.assemble_F(d, op, -1, -30, 3)
    assert glm.check_positivity(ker, 0, 25) > 0
    assert glm.quadratic_form_gap(ker, 0, 25) > -1e-10


def test_one_sided_reconstruction_and_csv():
    op, pert, d = _data(FREE, [(0, 0.2, 0.0), (1, 0.0, -0.4)], 256)
    res, _, _ = glm.invert(d, (-3, 3), sides=(1,))
    a_true = op.a(res.n) + pert.da(res.n)
    assert np.allclose(res.a, a_true, atol=1e-10)
    assert np.all(np.isnan(res.a_minus))
    with pytest.raises(InvalidInput):
        glm.reconstruct(None, None, op)
    full, _, _ = glm.invert(d, (-3, 3))
    lines = full.to_csv().splitlines()
    assert lines[0].startswith("n,a_q,b_q") and len(lines) == 8
    assert full.consistency() < 1e-10


def test_solution_to_kernel():
    op, pert, d = _data(FREE, [(0, 0.0, 0.5)])
    _, sols, _ = glm.invert(d, (-3, 3))
    K = sols[1].to_kernel()
    assert K.triangularity() == 0.0
    assert K(0, 0) == pytest.approx(sols[1].K(0, 0))


@settings(max_examples=8, deadline=None)
@given(vals=st.lists(st.floats(-0.3, 0.3), min_size=4, max_size=4),
       genus=st.sampled_from([0, 1]))
def test_roundtrip_random_perturbations(vals, genus):
    # weak perturbations carry states next to the circle whose Fourier tails the grid cannot
    # resolve; the inverse must then refuse instead of returning an aliased answer
    bg = FREE if genus == 0 else P2
    sites = [(0, vals[0], vals[1]), (1, vals[2], vals[3])]
    op, pert, d = _data(bg, sites, 256)
    try:
        res, _, _ = glm.invert(d, (-3, 4))
    except TailTruncationTooLarge:
        return
    assert np.max(np.abs(res.a - op.a(res.n) - pert.da(res.n))) < 1e-8
    assert np.max(np.abs(res.b - op.b(res.n) - pert.db(res.n))) < 1e-8


@pytest.mark.parametrize("bg", [FREE, P2])
@pytest.mark.parametrize("sites", [[(0, 0.1, 0.5), (1, -0.05, -0.3)], [(-1, 0.2, 0.0), (0, 0.0, -0.8)]])
def test_roundtrip_resolved_cases(bg, sites):
    op, pert, d = _data(bg, sites, 256)
    res, _, _ = glm.invert(d, (-3, 4))
    assert np.max(np.abs(res.a - op.a(res.n) - pert.da(res.n))) < 1e-8
    assert np.max(np.abs(res.b - op.b(res.n) - pert.db(res.n))) < 1e-8


def test_weak_perturbation_refused_on_coarse_grid():
    # a virtual state just outside the circle: its Fourier tail aliases on 512 nodes
    _, _, d = _data(FREE, [(0, -0.0136, 0.0153), (1, 0.0017, -0.0084)], 256)
    assert d.bound_states == []
    with pytest.raises(TailTruncationTooLarge):
        glm.invert(d, (-3, 4))


def test_coarse_grid_refused_for_slow_bound_state():
    # x = 0.883: the bound-state term needs about 185 sites, 256 nodes alias beyond about 64
    _, _, d = _data(FREE, [(1, 0.0, 0.125)], 128)
    with pytest.raises(TailTruncationTooLarge):
        glm.invert(d, (-3, 4))
    op, pert, fine = _data(FREE, [(1, 0.0, 0.125)], 512)
    res, _, _ = glm.invert(fine, (-3, 4))
    assert np.max(np.abs(res.b - pert.db(res.n))) < 1e-8
