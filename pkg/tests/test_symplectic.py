import warnings

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st

from imqed import dynamics as dy
from imqed import netlist as nl
from imqed import symplectic as sy
from imqed.errors import PerturbativeWarning, ResonantPair


def random_sym(rng, n, scale=1.0):
    a = rng.normal(size=(n, n)) * scale
    return 0.5 * (a + a.T)


def two_sector_h(rng, w_a, w_b, k, intra=0.0):
    """x/p-balanced two-sector form with coupling block of size k."""
    na, nb = len(w_a), len(w_b)
    d = np.concatenate([w_a, w_a, w_b, w_b])
    h = np.diag(d).astype(float)
    n = 2 * (na + nb)
    off = rng.normal(size=(2 * na, 2 * nb)) * k
    h[: 2 * na, 2 * na :] = off
    h[2 * na :, : 2 * na] = off.T
    if intra:
        for sl in (slice(0, 2 * na), slice(2 * na, n)):
            blk = random_sym(rng, sl.stop - sl.start, intra)
            np.fill_diagonal(blk, 0.0)
            h[sl, sl] += blk
    return h


def test_zero_generator_leaves_h():
    rng = np.random.default_rng(0)
    h = random_sym(rng, 6)
    assert np.array_equal(sy.anticommutator_series(h, np.zeros((6, 6)), 5), h)


def test_first_anticommutator_definition():
    rng = np.random.default_rng(1)
    h, a = random_sym(rng, 4), random_sym(rng, 4)
    j = sy.canonical_j(2)
    ja = j @ a
    assert np.allclose(sy.t_anticommutator(ja, h), ja @ h + h @ ja.T, rtol=0, atol=1e-14)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_series_matches_exponential(seed):
    rng = np.random.default_rng(seed)
    h = random_sym(rng, 6)
    a = random_sym(rng, 6, 0.05)
    j = sy.canonical_j(3)
    s = sla.expm(j @ a)
    exact = s @ h @ s.T
    series = sy.anticommutator_series(h, a, 10, j)
    assert np.linalg.norm(series - exact) < 1e-9 * np.linalg.norm(exact)


def test_zero_coupling_gives_identity():
    d = np.array([5.0, 5.0, 7.0, 7.0])
    m = sy.sw_generator(d, np.zeros((2, 2)), 1)
    assert np.all(m.generator == 0)
    assert np.allclose(m.s, np.eye(4))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), k=st.floats(1e-3, 0.2))
def test_generator_solves_first_order_equation_and_is_symplectic(seed, k):
    rng = np.random.default_rng(seed)
    h = two_sector_h(rng, [5.0, 5.6], [7.3], k)
    sp_ = sy.block_split(h, 2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PerturbativeWarning)
        m = sy.sw_generator(np.diag(sp_.h0), sp_.k_block, 2)
    j = sla.block_diag(sy.canonical_j(2), sy.canonical_j(1))
    lhs = sy.t_anticommutator(j @ m.generator, sp_.h0)
    assert np.linalg.norm(lhs + sp_.hnd) < 1e-12 * max(np.linalg.norm(sp_.hnd), 1e-300)
    assert m.defect(j) < 1e-10


def test_worked_example_matches_matrix_result():
    ex = sy.ThreeOscillatorExample((5.0, 5.3), 7.0, 0.02, (0.03, 0.05), (0.04, 0.02), (0.01, 0.03))
    res = sy.sw_block_diagonalize(ex.system(), order=2)
    assert np.linalg.norm(res.h_eff_a - ex.printed_h_eff_a()) < 1e-12


def test_pure_flux_coupling_formula():
    rng = np.random.default_rng(3)
    wa, wb = np.array([5.0, 5.4]), np.array([7.1, 8.2])
    kxx = rng.normal(size=(2, 2)) * 0.05
    k = np.zeros((4, 4))
    k[:2, :2] = kxx
    d = np.concatenate([wa, wa, wb, wb])
    corr = sy.second_order_closed_form(d, k, 2)
    theta = np.subtract.outer(wa**2, wb**2)
    expect = np.zeros((2, 2))
    for a in range(2):
        for a2 in range(2):
            expect[a, a2] = 0.5 * sum(
                wb[b] * kxx[a, b] * kxx[a2, b] * (1 / theta[a, b] + 1 / theta[a2, b]) for b in range(2)
            )
    assert np.allclose(corr[:2, :2], expect, rtol=1e-13, atol=0)
    assert np.allclose(corr[2:, 2:], 0.0)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_closed_form_second_order_matches_matrix_product(seed):
    rng = np.random.default_rng(seed)
    wa = rng.uniform(4.0, 6.0, 2)
    wb = rng.uniform(7.0, 9.0, 2)
    d = np.concatenate([wa, rng.uniform(4.0, 6.0, 2), wb, rng.uniform(7.0, 9.0, 2)])
    k = rng.normal(size=(4, 4)) * 0.05
    h = np.diag(d)
    h[:4, 4:] = k
    h[4:, :4] = k.T
    sp_ = sy.block_split(h, 2)
    m = sy.sw_generator(d, k, 2, warn=False)
    j = sla.block_diag(sy.canonical_j(2), sy.canonical_j(2))
    matrix = 0.5 * sy.t_anticommutator(j @ m.generator, sp_.hnd)[:4, :4]
    closed = sy.second_order_closed_form(d, k, 2)
    assert np.linalg.norm(closed - matrix) < 1e-12 * np.linalg.norm(matrix)
    if np.allclose(d[:2], d[2:4]) and np.allclose(d[4:6], d[6:]):
        assert np.allclose(np.diag(closed[:2, 2:]), 0.0)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_diagonal_xp_corrections_vanish_for_reciprocal_coupling(seed):
    rng = np.random.default_rng(seed)
    wa, wb = rng.uniform(4.0, 6.0, 2), rng.uniform(7.0, 9.0, 3)
    d = np.concatenate([wa, wa, wb, wb])
    k = np.zeros((4, 6))
    k[:2, :3] = rng.normal(size=(2, 3)) * 0.05  # flux-flux
    k[2:, 3:] = rng.normal(size=(2, 3)) * 0.05  # charge-charge
    corr = sy.second_order_closed_form(d, k, 2)
    assert np.max(np.abs(np.diag(corr[:2, 2:]))) < 1e-15


def test_gyrator_coupling_gives_diagonal_xp_correction():
    """With x-p cross couplings the diagonal xp entries are nonzero in general."""
    wa, wb = 5.0, 7.0
    d = np.array([wa, wa, wb, wb])
    k = np.array([[0.0, 0.03], [-0.04, 0.02]])  # [[K_xx, K_xp], [K_px, K_pp]]
    corr = sy.second_order_closed_form(d, k, 1)
    theta = wa**2 - wb**2
    expect = (wb * k[0, 0] * k[1, 0] + wb * k[0, 1] * k[1, 1]) / theta
    assert corr[0, 1] == pytest.approx(expect, rel=1e-12)
    assert corr[0, 1] != 0.0


def test_dressed_splitting_error_is_fourth_order():
    wa, wb = 5.0, 6.0
    errs = []
    for g in (0.04, 0.02, 0.01):
        h = np.diag([wa, wa, wb, wb])
        h[0, 2] = h[2, 0] = g
        exact = sy.normal_modes(h, sla.block_diag(sy.canonical_j(1), sy.canonical_j(1)))
        res = sy.sw_block_diagonalize(sy.two_sector_system(h, 1, 1))
        wa_eff = sy.normal_modes(res.h_eff_a)[0]
        wb_eff = sy.normal_modes(res.h_eff_b)[0]
        errs.append(abs((wb_eff - wa_eff) - (exact[1] - exact[0])))
    slopes = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(slopes > 3.7)


def test_residual_scales_quadratically():
    rng = np.random.default_rng(7)
    base = two_sector_h(rng, [5.0, 5.7], [7.2, 8.1], 1.0, intra=1.0)
    d = np.diag(np.diag(base))
    ks = np.geomspace(1e-3, 1e-1, 7) * 1.5
    res = []
    for k in ks:
        h = d + k * (base - d)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", PerturbativeWarning)
            out = sy.sw_block_diagonalize(sy.two_sector_system(h, 2, 2))
        res.append(sy.offdiagonal_residual(out.h_transformed, 2))
    slope = np.polyfit(np.log(ks), np.log(res), 1)[0]
    assert abs(slope - 2.0) < 0.1


def test_resonant_pair_rejected():
    with pytest.raises(ResonantPair):
        sy.sw_generator(np.array([5.0, 5.0, 5.0, 5.0]), np.array([[0.1, 0.0], [0.0, 0.0]]), 1)


def test_perturbative_warning():
    with pytest.warns(PerturbativeWarning):
        sy.sw_generator(np.array([5.0, 5.0, 5.5, 5.5]), np.array([[0.4, 0.0], [0.0, 0.0]]), 1)


def test_uncoupled_normal_modes():
    assert np.allclose(sy.normal_modes(np.diag([3.0, 3.0])), [3.0])


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_normal_modes_invariant_under_symplectic_maps(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(6, 6))
    h = a @ a.T + 6 * np.eye(6)
    j = sy.canonical_j(3)
    m = sy.map_from_generator(random_sym(rng, 6, 0.3), j)
    assert m.defect(j) < 1e-10
    w1 = sy.normal_modes(h, j)
    w2 = sy.normal_modes(m.apply(h), j)
    assert np.allclose(w1, w2, rtol=1e-10, atol=0)


def gyrator_resonator(r=50.0, c=0.1):
    elems = (nl.Gyrator(("a", "gnd"), ("b", "gnd"), r), nl.Capacitor("a", "gnd", c), nl.Capacitor("b", "gnd", c))
    return nl.Circuit(elems, ())


def test_gyrator_resonator_keeps_one_mode():
    r, c = 50.0, 0.1
    cq = dy.circuit_quadratic_system(gyrator_resonator(r, c), junctions=[])
    red = sy.eliminate_nondynamical(cq.system)
    assert red.removed == 1
    assert np.allclose(sy.normal_modes(red.system), [1.0 / (r * c)], rtol=1e-10)


def test_no_gyrator_no_reduction(g1):
    cq = dy.circuit_quadratic_system(g1.circuit)
    red = sy.eliminate_nondynamical(cq.system)
    assert red.removed == 0


def test_exact_and_approximate_elimination_agree(g4):
    cq = dy.circuit_quadratic_system(g4.circuit)
    exact = sy.eliminate_nondynamical(cq.system, exact=True)
    approx = sy.eliminate_nondynamical(cq.system, exact=False)
    assert exact.removed == approx.removed > 0
    assert np.allclose(sy.normal_modes(exact.system), sy.normal_modes(approx.system), rtol=1e-9)
    # the full system still holds the defective zero modes; skip them
    assert np.allclose(sy.normal_modes(exact.system), sy.normal_modes(cq.system, zero_tol=1e-5), rtol=1e-9)


def test_ladder_modes_are_canonical():
    rng = np.random.default_rng(5)
    a = rng.normal(size=(6, 6))
    h = a @ a.T + 6 * np.eye(6)
    j = sy.canonical_j(3)
    lm = sy.ladder_modes(h, j)
    u = lm.functionals
    # {a_k, a_l^*} = -i delta_kl and {a_k, a_l} = 0 with {X_i, X_j} = J_ij
    assert np.allclose(u.T @ j @ u.conj(), -1j * np.eye(3), atol=1e-12)
    assert np.allclose(u.T @ j @ u, 0.0, atol=1e-12)
    assert np.allclose(lm.frequencies, sy.normal_modes(h, j), rtol=1e-10)
