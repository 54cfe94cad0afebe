import math
import warnings

import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from imqed import dissipation as ds
from imqed import dynamics as dy
from imqed import effective as ef
from imqed import netlist as nl
from imqed import scenarios as sc
from imqed import symplectic as sy
from imqed.errors import ImqedError, TruncationInsufficient
from imqed.immittance import Kind, PoleResidueResponse

LC_CKT = "C a gnd 20fF; L a gnd 5nH; port J a gnd EJ=20GHz CJ=80fF"
TWO_MODE_CKT = "C p r 5fF; C r gnd 400fF; L r gnd 1.2nH; port J p gnd EJ=15GHz CJ=60fF"
LOSSY_CKT = "C q d 2fF; C d gnd 100fF; port J1 q gnd EJ=16GHz CJ=77fF; port D d gnd Z0=50"


def _uncoupled_model(freqs=(30.0, 31.0)):
    n = len(freqs)
    resp = PoleResidueResponse(Kind.ADMITTANCE, n, ind_dc=np.zeros((n, n)), cap_dc=np.eye(n) * 1e-4, nr_dc=np.zeros((n, n)))
    ports = [ef.JunctionPortParams(ef.ej_for_frequency(1e-4, w), 1e-4) for w in freqs]
    return ef.build_effective_model(resp, ports)


# ---------------------------------------------------------------------------
# trajectory


def test_trajectory_csv_round_trip():
    t = np.linspace(0, 1, 5)
    p = np.column_stack([t, 1 - t])
    traj = dy.Trajectory(t, p)
    text = traj.to_csv()
    assert text.splitlines()[0] == "t_ns,P_1,P_2"
    back = dy.Trajectory.from_csv(text)
    np.testing.assert_allclose(back.populations, p)
    assert traj.to_json()["schema"] == "trajectory.v1"


def test_trajectory_rejects_bad_grid():
    with pytest.raises(ImqedError):
        dy.Trajectory(np.array([0.0, 1.0, 1.0]), np.zeros((3, 1)))
    with pytest.raises(ImqedError):
        dy.Trajectory(np.array([0.0, 1.0]), np.zeros((3, 1)))


# ---------------------------------------------------------------------------
# secular grouping


def test_separated_qubits_are_singletons():
    assert dy.secular_groups([30.0, 31.0, 32.0], [1e-3, 1e-3, 1e-3]) == [[0], [1], [2]]


def test_degenerate_pair_grouped():
    assert dy.secular_groups([30.0, 30.0, 35.0], [1e-3, 2e-3, 1e-3]) == [[0, 1], [2]]


def test_grouping_is_transitive():
    # 0~1 and 1~2 but |w0 - w2| exceeds the window
    assert dy.secular_groups([30.0, 30.008, 30.016], [1e-3] * 3) == [[0, 1, 2]]


def test_zero_rate_never_groups_distinct_frequencies():
    assert dy.secular_groups([30.0, 30.0 + 1e-9], [0.0, 1.0]) == [[0], [1]]


def test_secular_gamma_drops_cross_group_terms():
    g = np.array([[1.0, 0.5], [0.5, 1.0]], dtype=complex) * 1e-3
    np.testing.assert_array_equal(dy.secular_gamma(g, [30.0, 31.0]), np.diag(np.diag(g)))
    np.testing.assert_array_equal(dy.secular_gamma(g, [30.0, 30.0]), g)


@pytest.fixture(scope="module")
def isolator():
    return sc.isolator(n_t=201)


def test_isolator_qubits_share_a_group(isolator):
    assert isolator.summary["secular_groups"] == [[0, 1]]


# ---------------------------------------------------------------------------
# Fock-space operators


def test_displacement_matches_exponential():
    alpha = 0.3 - 0.2j
    big = 60
    a = np.diag(np.sqrt(np.arange(1, big)), 1)
    full = sla.expm(alpha * a.T - np.conj(alpha) * a)
    np.testing.assert_allclose(dy.displacement(alpha, 10), full[:10, :10], atol=1e-12)


@given(re=st.floats(-0.6, 0.6), im=st.floats(-0.6, 0.6))
@settings(max_examples=30, deadline=None)
def test_displacement_nearly_unitary_in_large_space(re, im):
    d = dy.displacement(complex(re, im), 40)
    np.testing.assert_allclose((d.conj().T @ d)[:20, :20], np.eye(20), atol=1e-10)


def _padded_phi4(beta, levels, pad, rwa):
    """phi^4 computed in a larger space and projected back (exact for pad >= 4)."""
    small = dy.FockSpace(levels)
    big = dy.FockSpace([lv + pad for lv in levels])
    lower = sum(beta[k] * big.a(k) for k in range(len(levels)))
    phi = (lower + lower.conj().T).toarray()
    p4 = np.linalg.matrix_power(phi, 4)
    iso = small.embed(big).toarray()
    out = iso.T @ p4 @ iso
    if rwa:
        n = small.occupations().sum(axis=1)
        out = out * (n[:, None] == n[None, :])
    return out


@pytest.mark.parametrize("rwa", [True, False])
def test_normal_ordered_quartic_matches_padded(rwa):
    beta = np.array([0.21 + 0.05j, -0.13])
    space = dy.FockSpace([4, 3])
    ham = dy.FockHamiltonian(np.zeros((2, 2), dtype=complex), junctions=(dy.JunctionTerm(1.0, beta),), rwa=rwa)
    np.testing.assert_allclose(ham.operator(space).toarray(), _padded_phi4(beta, [4, 3], 4, rwa), atol=1e-14)


def test_cosine_term_matches_dense_cosine():
    beta = np.array([0.35])
    space = dy.FockSpace([6])
    ham = dy.FockHamiltonian(np.zeros((1, 1), dtype=complex), junctions=(dy.JunctionTerm(2.0, beta, "cosine"),))
    big = 120
    a = np.diag(np.sqrt(np.arange(1, big)), 1)
    phi = beta[0] * a + beta[0] * a.T
    dense = -2.0 * (sla.cosm(phi) + 0.5 * phi @ phi)
    np.testing.assert_allclose(ham.operator(space).toarray(), dense[:6, :6], atol=1e-12)


def test_fock_index_and_truncation():
    space = dy.FockSpace([3, 4])
    assert space.index([1, 2]) == 6
    with pytest.raises(TruncationInsufficient):
        space.index([3, 0])
    with pytest.raises(ImqedError):
        dy.FockSpace([0])


def test_operator_is_hermitian():
    modes = dy.circuit_modes(dy.circuit_quadratic_system(nl.parse(TWO_MODE_CKT)))
    for nonlin in ("quartic", "cosine"):
        h = dy.circuit_hamiltonian(modes, nonlinearity=nonlin).operator(dy.FockSpace([4, 4]))
        assert abs(h - h.conj().T).max() == 0


# ---------------------------------------------------------------------------
# closed evolution


def test_single_mode_phase():
    w = 31.7
    ham = dy.FockHamiltonian(np.array([[w]], dtype=complex))
    t = np.linspace(0.0, 3.0, 31)
    traj = dy.closed_evolve(ham, [1], t, n_ph=3, frame=0.0)
    np.testing.assert_allclose(traj.expectations[:, 0], np.exp(-1j * w * t), atol=1e-12)
    np.testing.assert_allclose(traj.populations, 1.0, atol=1e-12)


def test_closed_evolve_needs_headroom():
    ham = dy.FockHamiltonian(np.array([[30.0]], dtype=complex))
    with pytest.raises(TruncationInsufficient):
        dy.closed_evolve(ham, [2], [0.0, 1.0], n_ph=3)


def test_closed_energy_conserved():
    modes = dy.circuit_modes(dy.circuit_quadratic_system(nl.parse(TWO_MODE_CKT)))
    ham = dy.circuit_hamiltonian(modes)
    space = dy.FockSpace([4, 4])
    h = ham.operator(space).toarray()
    e, v = np.linalg.eigh(h)
    psi0 = np.zeros(space.dim, complex)
    psi0[space.index([1, 0])] = 1.0
    for t in (0.0, 5.0, 50.0):
        psi = v @ (np.exp(-1j * e * t) * (v.conj().T @ psi0))
        assert np.vdot(psi, h @ psi).real == pytest.approx(np.vdot(psi0, h @ psi0).real, rel=1e-12)
        assert np.linalg.norm(psi) == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------------------
# master equation


def test_uncoupled_lossless_populations_constant():
    model = _uncoupled_model()
    t = np.linspace(0.0, 50.0, 26)
    traj = dy.lindblad_evolve(model, [1, 0], t, n_ph=3)
    np.testing.assert_allclose(traj.populations[:, 0], 1.0, atol=1e-9)
    np.testing.assert_allclose(traj.populations[:, 1], 0.0, atol=1e-9)


def test_lindblad_without_loss_matches_closed():
    _, model = sc.chiral_model()
    period = 2 * math.pi / (math.sqrt(3) * abs(model.j_matrix[0, 1]))
    t = np.linspace(0.0, period, 61)
    lind = dy.lindblad_evolve(model, [1, 0, 0], t, n_ph=3)
    closed = dy.closed_evolve(dy.effective_hamiltonian(model), [1, 0, 0], t, n_ph=3)
    np.testing.assert_allclose(lind.populations, closed.populations, atol=1e-6)


def test_single_qubit_decay_rate():
    circuit = nl.parse(LOSSY_CKT)
    resp = nl.extract_pole_residue(circuit, "Admittance")
    model = ef.build_effective_model(resp, ef.junctions_from_circuit(circuit, resp), junction_ports=[0], drive_ports=[1], direct_mode="none")
    model = ds.with_dissipation(model, ds.DrivePortParams((50.0,)))
    g = model.gamma[0, 0].real
    t = np.linspace(0.0, 2.0 / g, 21)
    traj = dy.lindblad_evolve(model, [1], t, n_ph=3)
    np.testing.assert_allclose(traj.populations[:, 0], np.exp(-g * t), rtol=1e-7)


def test_lindblad_invariants_hold_on_isolator(isolator):
    for key in ("forward", "reverse"):
        traj = isolator.trajectories[key]
        assert traj.meta["integrator"] == "lindblad"
        p = traj.populations
        assert p.min() >= -1e-8 and p.sum(axis=1).max() <= 1.0 + 1e-8
        # total excitation only decays
        assert np.all(np.diff(p.sum(axis=1)) <= 1e-9)


def test_isolator_classical_overlay(isolator):
    s = isolator.summary
    assert s["classical_energy_monotone"]
    assert max(s["max_deviation_forward"] + s["max_deviation_reverse"]) < 0.05


# ---------------------------------------------------------------------------
# classical Kirchhoff equations


def test_lossless_lc_energy_constant():
    circuit = nl.parse(LC_CKT)
    w = sy.normal_modes(dy.circuit_quadratic_system(circuit).system)[0]
    t = np.linspace(0.0, 1000 * 2 * math.pi / w, 2001)
    traj = dy.kirchhoff_evolve(circuit, t, initial=[1e-2], nonlinear=False, rtol=1e-12, atol=1e-12)
    e = np.asarray(traj.meta["energy"])
    assert np.max(np.abs(e / e[0] - 1.0)) < 1e-9


def test_linear_frequencies_match_normal_modes():
    circuit = nl.parse(TWO_MODE_CKT)
    cq = dy.circuit_quadratic_system(circuit)
    modes = dy.circuit_modes(cq)
    for k, w in enumerate(modes.frequencies):
        x0 = cq.to_physical(2.0 * (modes.coefficients[:, k] * 1e-2).real)
        t = np.linspace(0.0, 200 * 2 * math.pi / w, 4001)
        traj = dy.kirchhoff_evolve(circuit, t, x0=x0, modes=modes, nonlinear=False, rtol=1e-12, atol=1e-12)
        assert dy.mode_frequency_from_phase(t, traj.expectations[:, 0]) == pytest.approx(w, rel=1e-8)


def test_resistor_drains_energy():
    circuit = nl.parse(LOSSY_CKT)
    t = np.linspace(0.0, 200.0, 401)
    traj = dy.kirchhoff_evolve(circuit, t, initial=[1e-2])
    e = np.asarray(traj.meta["energy"])
    assert np.all(np.diff(e) <= 1e-9 * e[0])
    assert e[-1] < e[0]


def test_kirchhoff_needs_initial_point():
    with pytest.raises(ImqedError):
        dy.kirchhoff_evolve(nl.parse(LC_CKT), [0.0, 1.0])


def test_classical_initial_state_round_trip():
    circuit = nl.parse(TWO_MODE_CKT)
    cq = dy.circuit_quadratic_system(circuit)
    modes = dy.circuit_modes(cq)
    x0 = dy.classical_initial_state(modes, [0.02 + 0.01j])
    b = dy._local_amplitudes(modes, cq.to_canonical(x0))
    np.testing.assert_allclose(b, [0.02 + 0.01j], atol=1e-12)


def test_nonlinear_junction_lowers_frequency():
    circuit = nl.parse(LC_CKT)
    modes = dy.circuit_modes(dy.circuit_quadratic_system(circuit))
    t = np.linspace(0.0, 100.0, 4001)
    lin = dy.kirchhoff_evolve(circuit, t, initial=[3.0], modes=modes, nonlinear=False)
    non = dy.kirchhoff_evolve(circuit, t, initial=[3.0], modes=modes, nonlinear=True)
    assert dy.mode_frequency_from_phase(t, non.expectations[:, 0]) < dy.mode_frequency_from_phase(t, lin.expectations[:, 0])


def test_no_capacitance_node_rejected():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        circuit = nl.parse("L a b 5nH; C b gnd 10fF; L a gnd 4nH; port J b gnd EJ=20GHz CJ=80fF")
    with pytest.raises(ImqedError):
        dy.circuit_quadratic_system(circuit)
