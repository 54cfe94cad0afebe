import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from imqed import immittance as im
from imqed import netlist as nl
from imqed.errors import DslSyntaxError, MissingParam, SemanticError
from imqed.units import TWO_PI, ff

G4_TEXT = """
# circulator with capacitive filters
C p1 c1 10fF
C c1 gnd 150fF
C p2 c2 10fF
C c2 gnd 150fF
C p3 c3 10fF
C c3 gnd 150fF
CIRC c1 c2 c3 gnd phi=pi/3 R=50
port J1 p1 gnd EJ=11.37GHz CJ=100fF
port J2 p2 gnd EJ=11.37GHz CJ=100fF
port J3 p3 gnd EJ=11.37GHz CJ=100fF
"""


def _rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def test_minimal_netlist():
    c = nl.parse("C n1 gnd 100fF; port J1 n1 gnd EJ=11.37GHz")
    assert c.nodes == ("n1",)
    assert c.n_ports == 1
    assert c.ports[0].ej_ghz == pytest.approx(11.37)
    assert c.elements[0].value == pytest.approx(1e-4)


def test_g4_text_matches_builder(g4):
    c = nl.parse(G4_TEXT)
    assert len(c.junction_indices) == 3
    assert any(isinstance(e, nl.Circulator3) and e.phi == pytest.approx(math.pi / 3) for e in c.elements)
    for w in (20.0, 70.0, 150.0):
        assert _rel(nl.mna_immittance(c, w), nl.mna_immittance(g4.circuit, w)) < 1e-12


@pytest.mark.parametrize("name", [n.value for n in nl.ExampleName])
def test_text_roundtrip(name):
    c = nl.build_example(nl.ExampleSpec.default(name)).circuit
    assert nl.parse(nl.to_text(c)) == c


def test_self_loop_rejected():
    with pytest.raises(SemanticError) as err:
        nl.parse("C n1 gnd 1fF\nC n1 n1 1fF\nport J n1 gnd EJ=10GHz")
    assert err.value.line == 2


@pytest.mark.parametrize(
    "text, line, col",
    [
        ("C n1 gnd", 1, 1),
        ("C n1 gnd 1fF\nL n1 gnd 3xH", 2, 10),
        ("FOO a b 1", 1, 1),
        ("C n1 gnd 1fF\nport J n1 gnd EJ=1GHz Z0=50", 2, 1),
    ],
)
def test_syntax_errors_carry_position(text, line, col):
    with pytest.raises(DslSyntaxError) as err:
        nl.parse(text)
    assert (err.value.line, err.value.col) == (line, col)


@pytest.mark.parametrize("phi", ["0", "pi"])
def test_circulator_rejects_trivial_phase(phi):
    text = f"C a gnd 1fF; C b gnd 1fF; C c gnd 1fF\nCIRC a b c gnd phi={phi} R=50\nport J a gnd EJ=1GHz"
    with pytest.raises(SemanticError):
        nl.parse(text)


def test_dangling_node_rejected():
    with pytest.raises(SemanticError):
        nl.parse("C n1 gnd 1fF; C n1 n2 1fF; port J n1 gnd EJ=1GHz")


def test_single_shunt_capacitor():
    c = nl.parse("C n1 gnd 100fF; port J1 n1 gnd EJ=11.37GHz")
    for w in (1.0, 30.0):
        assert np.allclose(nl.mna_immittance(c, w), [[1j * w * 1e-4]], rtol=1e-14)


def test_mna_duality(g4):
    for w in (5.0, 33.0, 180.0):
        y = nl.mna_immittance(g4.circuit, w)
        z = nl.mna_impedance(g4.circuit, w)
        assert np.linalg.norm(y @ z - np.eye(3)) < 1e-9


def test_single_lc_pole():
    c = nl.parse("C a gnd 1fF; C a b 0.2pF; L b gnd 2nH; port J a gnd CJ=50fF")
    resp = nl.extract_pole_residue(c, "Admittance")
    (pole,) = resp.ac_poles
    assert pole.omega == pytest.approx(1 / math.sqrt(2.0 * (0.2e-3 + 0.0)), rel=1e-9)
    assert pole.reciprocal


def test_g4_pole_at_omega_y(g4, g4_y):
    (pole,) = g4_y.ac_poles
    assert pole.omega == pytest.approx(abs(g4.derived["omega_y"]), rel=1e-9)


def test_g4_caption_omega_y(g4):
    assert g4.derived["omega_y"] / TWO_PI == pytest.approx(11.5, rel=0.02)


def test_extraction_reproduces_mna(g4, g4_y, rng):
    wy = g4_y.ac_poles[0].omega
    for w in rng.uniform(0.02, 5.0, 50) * wy:
        if abs(w / wy - 1) < 1e-4:
            continue
        assert _rel(im.evaluate(g4_y, w), nl.mna_immittance(g4.circuit, w)) < 1e-7


def test_g2_impedance_dc_rank_deficient():
    ex = nl.build_example(nl.ExampleSpec.default("InductiveCoupling2Port"))
    z = nl.extract_pole_residue(ex.circuit, "Impedance")
    ev = np.linalg.eigvalsh(z.ind_dc)
    assert np.sum(np.abs(ev) > 1e-8 * np.max(np.abs(ev))) == 1


def test_junction_energy_does_not_enter_response(g4):
    other = nl.build_example(nl.ExampleSpec.default("CirculatorCapacitive", E_J=3.0))
    for w in (10.0, 60.0):
        assert np.array_equal(nl.mna_immittance(other.circuit, w), nl.mna_immittance(g4.circuit, w))


def test_lossless_symmetric_part_is_reactive(g4):
    for w in (10.0, 60.0, 90.0):
        y = nl.mna_immittance(g4.circuit, w)
        sym = 0.5 * (y + y.T)
        assert np.max(np.abs(sym.real)) < 1e-12 * np.max(np.abs(sym))


def test_missing_parameter():
    spec = nl.ExampleSpec(nl.ExampleName.CIRCULATOR_CAPACITIVE, {"C_J": 100.0})
    with pytest.raises(MissingParam):
        nl.build_example(spec)


def test_isolator_matched_impedance_solves_condition():
    d = nl.build_example(nl.ExampleSpec.default("Isolator", Z0_over_R=0.0)).derived
    z0 = d["Z0"]
    assert z0 == d["Z0_matched"]
    cd_eff = d["C_D"] + d["C_c"] * d["C_g"] / (d["C_c"] + d["C_g"])
    lhs = math.sqrt(3) / (d["omega_y"] * d["C_c"])
    assert lhs == pytest.approx(z0 / (1 + (d["omega_bar"] * cd_eff * z0) ** 2), rel=1e-10)
    assert d["omega_bar"] / d["omega_y"] == pytest.approx(10.0)


@settings(max_examples=20, deadline=None)
@given(
    cc=st.floats(1.0, 20.0),
    cj=st.floats(40.0, 120.0),
    fr=st.floats(5.0, 9.0),
)
def test_random_two_port_duality_and_extraction(cc, cj, fr):
    spec = nl.ExampleSpec.default("TlResonator2Port", C_c=cc, C_J=cj, f_r=fr)
    c = nl.build_example(spec).circuit
    y = nl.extract_pole_residue(c, "Admittance")
    z = nl.extract_pole_residue(c, "Impedance")
    for w in (0.31, 0.77, 1.9):
        w = w * TWO_PI * fr
        assert np.linalg.norm(im.evaluate(y, w) @ im.evaluate(z, w) - np.eye(2)) < 1e-8
        assert _rel(im.evaluate(y, w), nl.mna_immittance(c, w)) < 1e-7
