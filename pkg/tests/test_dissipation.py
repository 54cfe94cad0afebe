import math
import warnings

import numpy as np
import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st

from imqed import acceptance as acc
from imqed import dissipation as ds
from imqed import dynamics as dy
from imqed import effective as ef
from imqed import netlist as nl
from imqed import scenarios as sc
from imqed.errors import ImqedError, Nonphysical, ZeroDenominator
from imqed.immittance import Kind, PoleResidueResponse, ac_part, dc_part
from imqed.units import HBAR

# one transmon on a capacitively coupled drive line
SINGLE_CKT = "C q d 0.5fF; C d gnd 100fF; port J1 q gnd EJ=16GHz CJ=77fF; port D d gnd Z0=50"
# second junction has no path to the drive line
DECOUPLED_CKT = (
    "C a gnd 1fF; C b d 0.5fF; C d gnd 100fF; port J1 a gnd EJ=16GHz CJ=80fF; "
    "port J2 b gnd EJ=18GHz CJ=80fF; port D d gnd Z0=50"
)
# mirror-symmetric pair, each qubit with its own line
SYMMETRIC_CKT = (
    "C a b 2fF; C a da 0.5fF; C b db 0.5fF; C da gnd 100fF; C db gnd 100fF; "
    "port J1 a gnd EJ=16GHz CJ=80fF; port J2 b gnd EJ=16GHz CJ=80fF; "
    "port D1 da gnd Z0=50; port D2 db gnd Z0=50"
)


def _model(circuit, n_j, direct="none"):
    resp = nl.extract_pole_residue(circuit, "Admittance")
    jp = list(range(n_j))
    dp = list(range(n_j, len(circuit.ports)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        model = ef.build_effective_model(
            resp, ef.junctions_from_circuit(circuit, resp), junction_ports=jp, drive_ports=dp, direct_mode=direct
        )
    params = ds.DrivePortParams(tuple(float(circuit.ports[k].z0) for k in dp))
    return model, params


# ---------------------------------------------------------------------------
# drive filter


def test_params_validation():
    with pytest.raises(ImqedError):
        ds.DrivePortParams((50.0, 0.0))
    with pytest.raises(ImqedError):
        ds.DriveTone(0, 1e-6, -1.0)
    assert ds.DrivePortParams.uniform(50.0, 2).z0 == (50.0, 50.0)


def test_filter_without_dc_is_termination():
    resp = PoleResidueResponse(
        Kind.ADMITTANCE, 2, ind_dc=np.zeros((2, 2)), cap_dc=np.diag([1e-4, 0.0]), nr_dc=np.zeros((2, 2))
    )
    np.testing.assert_allclose(ds.drive_filter(resp, [1], ds.DrivePortParams((50.0,)), 30.0), [[1 / 50.0]])


def test_purcell_chain_drive_ports_decoupled():
    ex = nl.build_example(nl.ExampleSpec.default("PurcellChain3Port"))
    resp = nl.extract_pole_residue(ex.circuit, "Admittance")
    for w in (20.0, 47.0, 80.0):
        f = ds.drive_filter(resp, [1, 2], ds.DrivePortParams((50.0, 50.0)), w)
        assert abs(f[0, 1]) <= 1e-12 * abs(f[0, 0])


@given(w=st.floats(1.0, 200.0), seed=st.integers(0, 2**16))
@settings(max_examples=40, deadline=None)
def test_filter_inverse_real_part_psd(w, seed):
    circuit, _, dp = acc.random_dissipative_circuit(np.random.default_rng(seed))
    resp = nl.extract_pole_residue(circuit, "Admittance")
    params = ds.DrivePortParams(tuple(float(circuit.ports[k].z0) for k in dp))
    h = np.linalg.inv(ds.drive_filter(resp, dp, params, w)).real
    ev = np.linalg.eigvalsh(0.5 * (h + h.T))
    assert ev.min() >= -1e-12 * abs(ev).max()


# ---------------------------------------------------------------------------
# decay matrix


def test_decoupled_qubit_has_zero_row():
    model, params = _model(nl.parse(DECOUPLED_CKT), 2)
    g = ds.decay_matrix(model, params)
    assert np.all(g[0] == 0) and np.all(g[:, 0] == 0)
    assert g[1, 1].real > 0
    assert ds.t1_times(g)[0] is None


def test_zero_rates_have_no_t1():
    assert ds.t1_times(np.zeros((2, 2))) == [None, None]


def test_single_port_rate_matches_mna():
    circuit = nl.parse(SINGLE_CKT)
    model, params = _model(circuit, 1)
    w = float(model.omegabar[0])
    y = nl.mna_immittance(circuit, w)
    resp = model.response
    y_drive = 1 / 50.0 + dc_part(resp, w)[1, 1]
    expected = (1 / y_drive).real * abs(y[0, 1]) ** 2 / model.capacitances[0]
    gamma = ds.decay_matrix(model, params)[0, 0].real
    assert gamma == pytest.approx(expected, rel=1e-9)
    # weak-coupling closed form for a capacitive line
    closed = ds.drive_port_rate(w, model.capacitances[0], 0.5e-6, 100e-6, 50.0)
    assert gamma == pytest.approx(closed, rel=0.02)


def test_split_rates_sum_to_diagonal():
    ex = nl.build_example(nl.ExampleSpec.default("PurcellChain3Port"))
    model, params = _model(ex.circuit, 1)
    parts = ds.port_resolved_rates(model, params)
    assert parts.sum() == pytest.approx(ds.decay_matrix(model, params)[0, 0].real, rel=1e-12)


@given(seed=st.integers(0, 2**16))
@example(seed=6826)  # strongly damped pair grouped as secular; min eig -7e-6 trace
@settings(max_examples=40, deadline=None)
def test_gamma_hermitian_and_secular_psd(seed):
    gamma, model, _ = acc.random_gamma(np.random.default_rng(seed))
    scale = max(np.abs(gamma).max(), 1e-300)
    assert np.abs(gamma - gamma.conj().T).max() <= 1e-12 * scale
    g_sec = dy.secular_gamma(gamma, model.omegas)
    tr = max(np.trace(gamma).real, 1e-300)
    assert np.linalg.eigvalsh(g_sec).min() >= -1e-12 * tr


@given(seed=st.integers(0, 2**16))
@settings(max_examples=40, deadline=None)
def test_gamma_psd_for_single_junction_and_degenerate_pairs(seed):
    # chain (one qubit) and isolator (equal frequencies); the raw matrix of
    # detuned pairs is not PSD, see the acceptance suite
    rng = np.random.default_rng(seed)
    while True:
        circuit, jp, _ = acc.random_dissipative_circuit(rng)
        if len(jp) == 1 or circuit.ports[0].ej_ghz == circuit.ports[1].ej_ghz:
            break
    model, params = _model(circuit, len(jp))
    gamma = ds.decay_matrix(model, params, check_psd=False)
    tr = max(np.trace(gamma).real, 1e-300)
    assert np.linalg.eigvalsh(gamma).min() >= -1e-12 * tr


def test_check_psd_raises():
    with pytest.raises(Nonphysical):
        ds.check_psd(np.array([[1.0, 2.0], [2.0, 1.0]]))
    ds.check_psd(np.eye(2))


def test_rate_decomposition_identity(g4_y):
    # |Y|^2 = |Y^R|^2 + |Y^NR|^2 entrywise for a lossless response
    for w in (10.0, 24.0, 40.0):
        y = ac_part(g4_y, w) + dc_part(g4_y, w)
        yr = 0.5 * (y + y.T)
        ynr = 0.5 * (y - y.T)
        np.testing.assert_allclose(np.abs(y) ** 2, np.abs(yr) ** 2 + np.abs(ynr) ** 2, rtol=1e-10)


def test_with_dissipation_records_response_kind():
    circuit = nl.parse(SINGLE_CKT)
    model, params = _model(circuit, 1, direct="numeric")
    out = ds.with_dissipation(model, params)
    assert out.meta["gamma_response"] == "dressed"
    model, params = _model(circuit, 1, direct="none")
    assert ds.with_dissipation(model, params).meta["gamma_response"] == "bare"


# ---------------------------------------------------------------------------
# Purcell filter chain


@pytest.fixture(scope="module")
def purcell():
    return sc.purcell()


def test_readout_rate_matches_weak_coupling_form(purcell):
    assert purcell.summary["max_rel_error_readout_weak"] < 0.05
    assert purcell.summary["max_rel_error_drive_weak"] < 0.05


def test_readout_rate_grows_with_coupling(purcell):
    rates = [r["rate_readout"] for r in purcell.table]
    assert all(b > a for a, b in zip(rates, rates[1:]))


def test_bath_probed_at_qubit_frequency(purcell):
    assert abs(purcell.summary["kappa_ratio"] - 1.0) > 0.01


# ---------------------------------------------------------------------------
# drives and crosstalk


def test_zero_voltage_gives_zero_drive():
    model, params = _model(nl.parse(SINGLE_CKT), 1)
    amp = ds.drive_amplitudes(model, params, [ds.DriveTone(0, 0.0, 30.0)])
    assert np.all(amp(1.3) == 0)


def test_drive_amplitude_is_real_signal():
    model, params = _model(nl.parse(SINGLE_CKT), 1)
    amp = ds.drive_amplitudes(model, params, [ds.DriveTone(0, 1e-6, 29.0), ds.DriveTone(0, 2e-6, 31.0)])
    for t in (0.0, 0.37, 5.1):
        e = amp.per_qubit(t)
        assert abs(e.imag) <= 1e-12 * max(abs(e.real), 1e-30)


def test_drive_phase_from_line_filter():
    circuit = nl.parse(SINGLE_CKT)
    model, params = _model(circuit, 1)
    wd = 29.0
    alpha = ds.alpha_matrix(model, params, wd)[0, 0]
    resp = model.response
    row = (ac_part(resp, float(model.omegabar[0])) + dc_part(resp, wd))[0, 1] * model.frame[0, 0]
    phase = math.atan(50.0 * dc_part(resp, wd)[1, 1].imag)
    assert np.angle(alpha / row) == pytest.approx(-phase, abs=1e-12)


def test_rabi_frequency():
    circuit = nl.parse(SINGLE_CKT)
    model, params = _model(circuit, 1)
    wd = float(model.omegas[0])
    # choose the voltage for a 5 MHz co-rotating amplitude
    unit = abs(ds.drive_amplitudes(model, params, [ds.DriveTone(0, 1.0, wd)]).rwa()[0])
    v = 2 * math.pi * 5e-3 / unit
    amp = ds.drive_amplitudes(model, params, [ds.DriveTone(0, v, wd)])
    eps = abs(amp.rwa()[0])
    t_pi = math.pi / (2 * eps)
    t = np.linspace(0.0, 1.4 * t_pi, 281)
    traj = dy.lindblad_evolve(model, [0], t, n_ph=2, gamma=np.zeros((1, 1)), drive=amp.per_qubit, rtol=1e-9)
    p1 = traj.populations[:, 0]
    k = int(np.argmax(p1))
    # parabola through the peak
    a, b, _ = np.polyfit(t[k - 2 : k + 3], p1[k - 2 : k + 3], 2)
    assert -b / (2 * a) == pytest.approx(t_pi, rel=0.01)
    assert p1.max() > 0.98


def test_crosstalk_diagonal_alpha():
    x = ds.crosstalk(np.diag([0.3 + 0.1j, 0.2]), [0, 1])
    np.testing.assert_array_equal(np.diag(x), 0.0)
    assert x[0, 1] == ds.CROSSTALK_FLOOR_DB and x[1, 0] == ds.CROSSTALK_FLOOR_DB


def test_crosstalk_zero_denominator():
    with pytest.raises(ZeroDenominator):
        ds.crosstalk(np.array([[0.0, 1.0], [1.0, 0.0]]), [0, 1])


def test_crosstalk_symmetric_pair():
    model, params = _model(nl.parse(SYMMETRIC_CKT), 2)
    alpha = ds.alpha_matrix(model, params, float(model.omegas[0]))
    x = ds.crosstalk(alpha, [0, 1])
    np.testing.assert_allclose(np.diag(x), 0.0, atol=1e-12)
    assert x[0, 1] == pytest.approx(x[1, 0], abs=1e-6)
    assert x[0, 1] < -10.0


def test_amplitude_scale_uses_hbar():
    # the drive prefactor carries 1/sqrt(hbar) in package units
    model, params = _model(nl.parse(SINGLE_CKT), 1)
    a = ds.drive_amplitudes(model, params, [ds.DriveTone(0, 1.0, 29.0)]).c_plus[0][0, 0]
    alpha = ds.alpha_matrix(model, params, 29.0)[0, 0]
    expected = -1j / (2 * math.sqrt(2) * 50.0) / math.sqrt(model.omegabar[0]) / math.sqrt(HBAR) * alpha
    assert a == pytest.approx(expected, rel=1e-14)
