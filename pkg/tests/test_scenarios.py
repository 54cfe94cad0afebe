import math

import numpy as np
import pytest

from imqed import dynamics as dy
from imqed import netlist as nl
from imqed import scenarios as sc


@pytest.fixture(scope="module")
def chiral():
    return sc.chiral()


def test_chiral_phase_and_period(chiral):
    s = chiral.summary
    assert abs(s["theta_12"]) == pytest.approx(math.pi / 6, abs=1e-6)
    assert s["theta_12_minus"] == pytest.approx(-s["theta_12"], abs=1e-9)
    assert s["period_rel_error"] <= 0.02
    # the effective model itself circulates at the predicted period
    assert s["period_effective_ns"] == pytest.approx(s["period_predicted_ns"], rel=1e-6)


def test_chiral_order_reverses_with_phase(chiral):
    s = chiral.summary
    assert s["order_effective"] == s["order_exact"] == "123"
    assert s["order_effective_minus"] == s["order_exact_minus"] == "132"


def test_chiral_trajectories_are_physical(chiral):
    for traj in chiral.trajectories.values():
        assert traj.populations.min() >= -1e-6
        assert traj.populations.sum(axis=1).max() <= 1 + 1e-6


def test_circulation_order_on_synthetic_data():
    t = np.linspace(0, 3, 301)
    pops = np.column_stack([np.cos(t) ** 2, np.exp(-((t - 2.0) ** 2)), np.exp(-((t - 1.0) ** 2))])
    assert sc.circulation_order(dy.Trajectory(t, pops), 2.5) == "132"


def test_period_refines_revival():
    t = np.linspace(0, 20, 2001)
    p1 = np.cos(math.pi * t / 7.3) ** 2
    assert sc._period(t, p1, 7.0) == pytest.approx(7.3, rel=1e-4)


def test_resonator_model_tunes_phase():
    ex, model = sc.resonator_model()
    assert model.theta[0, 1] == pytest.approx(-math.pi / 6, abs=1e-9)
    assert 12.0 < ex.circuit.ports[0].ej_ghz < 20.0


def test_isolator_blocks_reverse_transfer():
    s = sc.isolator(n_t=201, classical=False).summary
    assert s["max_P1_reverse"] < 0.01
    assert s["peak_P2_forward"] > 0.5
    assert s["Z0_ohm"] == pytest.approx(3 * s["R_ohm"])


def test_purcell_summary_keys():
    r = sc.purcell(couplings=(0.5,))
    row = r.table[0]
    assert row["T1_readout_ns"] == pytest.approx(1 / row["rate_readout"])
    assert r.summary["omega_f"] == pytest.approx(2 * math.pi * nl.DEFAULT_PARAMS[nl.ExampleName.PURCELL_CHAIN_3PORT]["f_f"])


def test_scattering_optimum_near_caption():
    s = sc.scattering().summary
    assert s["omega_c_over_omega_rf"] == pytest.approx(0.977, rel=0.005)
    assert s["unitarity_error"] < 1e-12
    assert s["nodal_mismatch"] < 1e-8
