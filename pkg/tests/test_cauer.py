import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from imqed import cauer
from imqed import immittance as im
from imqed import netlist as nl
from imqed.errors import DegenerateResidue, SingularDcResidue


def mode_pole(rng, n, omega, reciprocal):
    """Residue of one lossless mode: complex residue u u^dagger."""
    if reciprocal:
        r = rng.normal(size=n)
        return im.Pole(omega, np.outer(r, r), np.zeros((n, n)))
    u = rng.normal(size=n) + 1j * rng.normal(size=n)
    k = np.outer(u, u.conj())
    return im.Pole(omega, 2 * k.real, -2 * omega * k.imag)


def random_valid_response(seed, kind=im.Kind.ADMITTANCE):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 5))
    omegas = np.sort(rng.uniform(2.0, 80.0, int(rng.integers(1, 5))))
    poles = tuple(mode_pole(rng, n, w, bool(rng.integers(0, 2))) for w in omegas)
    a = rng.normal(size=(n, n))
    pd = a @ a.T + 0.5 * np.eye(n)
    if kind is im.Kind.IMPEDANCE:
        return im.PoleResidueResponse(kind, n, pd, ac_poles=poles)
    b = rng.normal(size=(n, 1))
    e = rng.normal(size=(n, n))
    return im.PoleResidueResponse(kind, n, b @ b.T, pd, e - e.T, poles)


def _max_rel(r1, r2):
    out = 0.0
    for name in ("ind_dc", "cap_dc", "nr_dc"):
        a, b = getattr(r1, name), getattr(r2, name)
        out = max(out, np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300) if np.any(b) else np.linalg.norm(a))
    for p, q in zip(r1.ac_poles, r2.ac_poles):
        assert p.omega == q.omega
        out = max(out, np.linalg.norm(p.res_sym - q.res_sym) / np.linalg.norm(q.res_sym))
        out = max(out, np.linalg.norm(p.res_anti - q.res_anti) / max(np.linalg.norm(q.res_sym) * q.omega, 1e-300))
    return out


def test_reciprocal_ratio_recovered_up_to_sign():
    r = np.array([1.0, 2.0])
    resp = im.PoleResidueResponse("Admittance", 2, np.zeros((2, 2)), np.eye(2), None, (im.Pole(4.0, np.outer(r, r), np.zeros((2, 2))),))
    (sec,) = cauer.synthesize(resp).reciprocal_stage
    assert np.allclose(sec.ratio, r) or np.allclose(sec.ratio, -r)
    assert sec.ratio[np.argmax(np.abs(sec.ratio))] > 0


def test_g4_section_reproduces_closed_form(g4):
    resp = g4.closed_form
    syn = cauer.synthesize(resp)
    assert syn.reciprocal_stage == ()
    (g,) = syn.nonreciprocal_stage
    (pole,) = resp.ac_poles
    sym = np.outer(g.n_left, g.n_left) + np.outer(g.n_right, g.n_right)
    anti = g.omega_g * (np.outer(g.n_left, g.n_right) - np.outer(g.n_right, g.n_left))
    assert np.linalg.norm(sym - pole.res_sym) < 1e-10 * np.linalg.norm(pole.res_sym)
    assert np.linalg.norm(anti - pole.res_anti) < 1e-10 * np.linalg.norm(pole.res_anti)
    assert np.array_equal(syn.nr_dc, resp.nr_dc)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), kind=st.sampled_from([im.Kind.ADMITTANCE, im.Kind.IMPEDANCE]))
def test_roundtrip_random_responses(seed, kind):
    resp = random_valid_response(seed, kind)
    back = cauer.reconstruct(cauer.synthesize(resp))
    assert _max_rel(back, resp) < 1e-10


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_synthesis_is_a_fixed_point(seed):
    syn = cauer.synthesize(random_valid_response(seed))
    again = cauer.synthesize(cauer.reconstruct(syn))
    for a, b in zip(syn.nonreciprocal_stage, again.nonreciprocal_stage):
        assert np.allclose(a.n_left, b.n_left, atol=1e-12 * np.linalg.norm(a.n_left))
        assert np.allclose(a.n_right, b.n_right, atol=1e-12 * np.linalg.norm(a.n_right))
        assert abs(a.omega_g - b.omega_g) <= 1e-12 * abs(a.omega_g)
    for a, b in zip(syn.reciprocal_stage, again.reciprocal_stage):
        assert np.allclose(a.ratio, b.ratio, atol=1e-12 * np.linalg.norm(a.ratio))


def test_empty_synthesis_is_zero():
    syn = cauer.CauerSynthesis(im.Kind.ADMITTANCE, 2, None, None, np.zeros((2, 2)))
    resp = cauer.reconstruct(syn)
    assert np.all(im.evaluate(resp, 3.0) == 0)


def test_g1_impedance_section(g1):
    syn = cauer.synthesize(g1.closed_form_z)
    (sec,) = syn.reciprocal_stage
    a1 = np.outer(sec.ratio, sec.ratio)
    assert np.allclose(a1, g1.closed_form_z.ac_poles[0].res_sym, rtol=1e-12)
    assert sec.ratio[0] == pytest.approx(sec.ratio[1])


def test_singular_impedance_dc_rejected():
    ex = nl.build_example(nl.ExampleSpec.default("InductiveCoupling2Port"))
    z = nl.extract_pole_residue(ex.circuit, "Impedance")
    with pytest.raises(SingularDcResidue, match="A_0 singular"):
        cauer.synthesize(z)


def test_multi_mode_residue_rejected():
    # two independent modes at one frequency: complex residue of rank two
    u = np.array([1.0, 1j, 0.0])
    v = np.array([0.0, 1.0, 1.0])
    k = np.outer(u, u.conj()) + np.outer(v, v.conj())
    pole = im.Pole(3.0, 2 * k.real, -6.0 * k.imag)
    resp = im.PoleResidueResponse("Admittance", 3, np.zeros((3, 3)), np.eye(3), None, (pole,))
    with pytest.raises(DegenerateResidue):
        cauer.synthesize(resp)


def test_json_dump(g4_y):
    doc = json.loads(json.dumps(cauer.to_json(cauer.synthesize(g4_y))))
    assert doc["schema"] == "cauer.v1"
    assert len(doc["nonreciprocal_stage"]) == 1
    assert doc["nonreciprocal_stage"][0]["omega_g"] > 0
