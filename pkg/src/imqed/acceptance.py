"""Figure-level acceptance checks.

Every check returns :class:`Check` records carrying the measured value and
the limit it is held to.  ``imqed check`` and ``tests/test_acceptance.py``
both run these functions; nothing here relaxes a limit when a check fails.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import cauer
from . import dissipation as ds
from . import dynamics as dy
from . import effective as ef
from . import netlist as nl
from . import scenarios as sc
from . import symplectic as sy
from .errors import ImqedError, Nonphysical, SingularAtFrequency, SingularDcResidue
from .immittance import Kind


@dataclass(frozen=True)
class Check:
    criterion: int
    label: str
    value: float
    limit: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        extra = f"  [{self.detail}]" if self.detail else ""
        return f"{tag}  {self.criterion}{self.label:<3} value={self.value:.6g}  limit: {self.limit}{extra}"


def _quiet(fn: Callable, *args, **kwargs):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return fn(*args, **kwargs)


# ---------------------------------------------------------------------------
# 1 chiral circulation


def criterion_1(nonlinearity: str = "quartic") -> list[Check]:
    r = sc.chiral(nonlinearity=nonlinearity)
    s = r.summary
    theta_err = abs(abs(s["theta_12"]) - math.pi / 6)
    dev = max(s["max_deviation"] + s["max_deviation_minus"])
    reversed_ok = s["order_exact"] == "123" and s["order_exact_minus"] == "132"
    reversed_ok = reversed_ok and s["order_effective"] == "123" and s["order_effective_minus"] == "132"
    return [
        Check(1, "a", theta_err, "||theta_12| - pi/6| <= 1e-6", theta_err <= 1e-6),
        Check(1, "b", s["period_rel_error"], "|T_exact/T - 1| <= 0.02", s["period_rel_error"] <= 0.02),
        Check(1, "c", dev, "max_t |P_eff - P_exact| < 0.05", dev < 0.05, f"exact model: {nonlinearity}"),
        Check(
            1,
            "d",
            float(reversed_ok),
            "order 123 at +phi and 132 at -phi",
            reversed_ok,
            f"+phi {s['order_exact']}, -phi {s['order_exact_minus']}",
        ),
    ]


# ---------------------------------------------------------------------------
# 2 isolator


def criterion_2() -> list[Check]:
    s = sc.isolator().summary
    dev = max(s["max_deviation_forward"] + s["max_deviation_reverse"])
    return [
        Check(2, "a", s["max_P1_reverse"], "reverse max P1 < 0.01", s["max_P1_reverse"] < 0.01),
        Check(2, "b", s["peak_P2_forward"], "forward peak P2 > 0.5", s["peak_P2_forward"] > 0.5),
        Check(2, "c", dev, "master equation vs classical < 0.05", dev < 0.05),
    ]


# ---------------------------------------------------------------------------
# 3 phase law


PHASES = (math.pi / 6, math.pi / 4, math.pi / 3, math.pi / 2, 2 * math.pi / 3, 5 * math.pi / 6)


def phase_law_errors(phases=PHASES) -> list[float]:
    out = []
    for phi in phases:
        ex, model = sc.chiral_model(phi)
        wy = ex.derived["omega_y"]
        tan_theta = math.tan(model.theta[0, 1])
        target = -math.sqrt(3.0) * model.omegabar[0] / wy
        out.append(abs(tan_theta / target - 1.0))
    return out


def criterion_3() -> list[Check]:
    errs = phase_law_errors()
    worst = max(errs)
    return [Check(3, "", worst, "tan(theta) vs -sqrt(3) wbar/omega_y, rel <= 1e-9", worst <= 1e-9)]


# ---------------------------------------------------------------------------
# 4 Purcell chain


def criterion_4() -> list[Check]:
    s = sc.purcell().summary
    return [
        Check(4, "a", s["max_rel_error_readout_weak"], "readout rate vs closed form <= 5% (C_c <= 1 fF)", s["max_rel_error_readout_weak"] <= 0.05),
        Check(4, "b", abs(s["kappa_ratio"] - 1.0), "|kappa(wbar)/kappa(w_f) - 1| > 0.01", abs(s["kappa_ratio"] - 1.0) > 0.01),
    ]


# ---------------------------------------------------------------------------
# 5 Schrieffer-Wolff


def _example_scaled(lam: float, w_a=(5.0, 5.3), w_b=7.0) -> sy.ThreeOscillatorExample:
    k = lam * (w_b - w_a[1])
    return sy.ThreeOscillatorExample(w_a, w_b, k, (k, 0.7 * k), (0.5 * k, 0.9 * k), (0.8 * k, 0.3 * k))


def sw_scaling_exponent(lams=None) -> float:
    """Slope of log ||H_AB after the transform|| against log(k/Delta).

    Every coupling, including the intra-sector one, scales with k so the
    leading residual is the commutator of A1 with H'_D, of order k^2.
    """
    lams = np.logspace(-3, -1, 9) if lams is None else lams
    res = []
    for lam in lams:
        ex = _example_scaled(lam)
        r = _quiet(sy.sw_block_diagonalize, ex.system(), order=2)
        res.append(sy.offdiagonal_residual(r.h_transformed, 2))
    return float(np.polyfit(np.log(lams), np.log(res), 1)[0])


def criterion_5(seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    defects = []
    for order in (2, 3):
        for lam in (1e-3, 1e-2, 1e-1):
            ex = _example_scaled(lam)
            r = _quiet(sy.sw_block_diagonalize, ex.system(), order=order)
            defects.append(r.map.defect(ex.system().j_form))
    for _ in range(20):
        n_a, n_b = int(rng.integers(1, 3)), int(rng.integers(1, 3))
        wa = rng.uniform(1.0, 2.0, 2 * n_a)
        wb = rng.uniform(3.0, 4.0, 2 * n_b)
        h = np.diag(np.concatenate([wa, wb]))
        k = 0.05 * rng.normal(size=(2 * n_a, 2 * n_b))
        h[: 2 * n_a, 2 * n_a :] = k
        h[2 * n_a :, : 2 * n_a] = k.T
        sysq = sy.two_sector_system(h, n_a, n_b)
        r = _quiet(sy.sw_block_diagonalize, sysq, order=2)
        defects.append(r.map.defect(sysq.j_form))
    slope = sw_scaling_exponent()
    ex = _example_scaled(0.05)
    r = _quiet(sy.sw_block_diagonalize, ex.system(), order=2)
    term = float(np.max(np.abs(r.h_eff_a - ex.printed_h_eff_a())))
    worst = max(defects)
    return [
        Check(5, "a", worst, "||S J S^T - J|| < 1e-10", worst < 1e-10),
        Check(5, "b", slope, "off-diagonal residual exponent 2.0 +- 0.1", abs(slope - 2.0) <= 0.1),
        Check(5, "c", term, "worked example term by term <= 1e-12", term <= 1e-12),
    ]


# ---------------------------------------------------------------------------
# 6 singular impedance routing


def g2_mode_errors(scales=(1.0, 0.5, 0.25, 0.125, 0.0625), direct: str = "numeric") -> list[float]:
    """Worst relative gap between effective and exact linear qubit frequencies.

    Both couplings shrink together: C_c -> s C_c and L_c -> L_c / s.
    """
    base = nl.DEFAULT_PARAMS[nl.ExampleName.INDUCTIVE_COUPLING_2PORT]
    out = []
    for s in scales:
        ex = nl.build_example(nl.ExampleSpec.default("InductiveCoupling2Port", C_c=base["C_c"] * s, L_c=base["L_c"] / s))
        resp = nl.extract_pole_residue(ex.circuit, "Admittance")
        model = _quiet(ef.build_effective_model, resp, ef.junctions_from_circuit(ex.circuit, resp), direct_mode=direct, linear=True)
        w_eff = np.linalg.eigvalsh(ef.hamiltonian_matrix(model))
        w_exact = dy.circuit_modes(dy.circuit_quadratic_system(ex.circuit)).frequencies
        out.append(max(float(np.min(np.abs(w_exact - w)) / w) for w in w_eff))
    return out


def criterion_6() -> list[Check]:
    ex = nl.build_example(nl.ExampleSpec.default("InductiveCoupling2Port"))
    raised, msg = False, ""
    try:
        z = nl.extract_pole_residue(ex.circuit, "Impedance")
        ef.build_effective_model(z, ef.junctions_from_circuit(ex.circuit, z))
    except SingularDcResidue as exc:
        raised, msg = True, str(exc)
    y_ok = True
    try:
        y = nl.extract_pole_residue(ex.circuit, "Admittance")
        _quiet(ef.build_effective_model, y, ef.junctions_from_circuit(ex.circuit, y))
    except ImqedError:
        y_ok = False
    scales = (1.0, 0.5, 0.25, 0.125, 0.0625)
    errs = g2_mode_errors(scales)
    slope = float(np.polyfit(np.log(scales), np.log(errs), 1)[0])
    monotone = all(b < a for a, b in zip(errs, errs[1:]))
    return [
        Check(6, "a", float(raised), "impedance route raises SingularDcResidue", raised, msg[:40]),
        Check(6, "b", float(y_ok), "admittance route builds a model", y_ok),
        Check(6, "c", slope, "monotone decrease, log-log slope >= 2", monotone and slope >= 2.0),
    ]


# ---------------------------------------------------------------------------
# 7 duality and reconstruction


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def duality_error(circuit, n: int = 50, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    scale = nl._natural_scale(circuit)
    worst, done = 0.0, 0
    while done < n:
        w = scale * 10 ** rng.uniform(-1.5, 1.5)
        try:
            y = nl.mna_immittance(circuit, w)
            z = nl.mna_impedance(circuit, w)
        except SingularAtFrequency:
            continue
        worst = max(worst, float(np.linalg.norm(y @ z - np.eye(y.shape[0]))))
        done += 1
    return worst


def roundtrip_error(resp) -> float:
    back = cauer.reconstruct(cauer.synthesize(resp))
    errs = [_rel(back.ind_dc, resp.ind_dc) if np.any(resp.ind_dc) else float(np.linalg.norm(back.ind_dc))]
    if resp.kind is Kind.ADMITTANCE:
        errs.append(_rel(back.cap_dc, resp.cap_dc))
    ref = max(np.linalg.norm(p.res_sym) for p in resp.ac_poles) if resp.ac_poles else 1.0
    for p, q in zip(resp.ac_poles, back.ac_poles):
        errs.append(abs(p.omega - q.omega) / p.omega)
        errs.append(float(np.linalg.norm(p.res_sym - q.res_sym)) / ref)
        errs.append(float(np.linalg.norm(p.res_anti - q.res_anti)) / ref)
    if len(resp.ac_poles) != len(back.ac_poles):
        errs.append(math.inf)
    return max(errs)


def criterion_7() -> list[Check]:
    dual, trip, names = 0.0, 0.0, []
    for name in nl.ExampleName:
        ex = _quiet(nl.build_example, nl.ExampleSpec.default(name))
        dual = max(dual, duality_error(ex.circuit))
        for kind in (Kind.ADMITTANCE, Kind.IMPEDANCE):
            try:
                resp = nl.extract_pole_residue(ex.circuit, kind)
                trip = max(trip, roundtrip_error(resp))
            except SingularDcResidue:
                names.append(f"{name.value}/{kind.value} singular")
    return [
        Check(7, "a", dual, "||Y Z - I|| < 1e-8 at 50 frequencies, all examples", dual < 1e-8),
        Check(7, "b", trip, "Cauer round trip <= 1e-10", trip <= 1e-10, "; ".join(names)),
    ]


# ---------------------------------------------------------------------------
# 8 open-system sanity


def random_dissipative_circuit(rng: np.random.Generator):
    """A valid circuit with junctions and resistive drive ports, drawn at random."""
    kind = int(rng.integers(3))
    if kind == 0:
        ex = nl.build_example(
            nl.ExampleSpec.default(
                "PurcellChain3Port",
                C_c=float(rng.uniform(0.1, 5.0)),
                C_k=float(rng.uniform(2.0, 40.0)),
                C_d=float(rng.uniform(20.0, 200.0)),
                f_r=float(rng.uniform(6.5, 8.5)),
                f_f=float(rng.uniform(6.5, 8.5)),
                Z0=float(rng.uniform(25.0, 100.0)),
            )
        )
        return ex.circuit, [0], [1, 2]
    if kind == 1:
        ex = nl.build_example(
            nl.ExampleSpec.default(
                "Isolator",
                C_c=float(rng.uniform(0.5, 5.0)),
                C_g=float(rng.uniform(0.005, 0.5)),
                C_D=float(rng.uniform(0.005, 0.5)),
                phi=float(rng.uniform(0.2, 2.9)),
                Z0_over_R=float(rng.uniform(0.5, 5.0)),
            )
        )
        return ex.circuit, [0, 1], [2]
    # circulator with one junction replaced by a resistive line, random values
    cj, cc, cg = rng.uniform(50, 150) * 1e-6, rng.uniform(1, 20) * 1e-6, rng.uniform(5, 200) * 1e-6
    phi, r = float(rng.uniform(-2.9, 2.9)), float(rng.uniform(20, 200))
    elems = nl._circulator_core(["p1", "p2", "p3"], cc, cg, phi, r)
    elems.append(nl.Capacitor("p3", nl.GROUND, float(rng.uniform(1, 100)) * 1e-6))
    ports = (
        nl.JunctionPort("J1", "p1", nl.GROUND, float(rng.uniform(8, 20)), cj),
        nl.JunctionPort("J2", "p2", nl.GROUND, float(rng.uniform(8, 20)), cj * float(rng.uniform(0.8, 1.2))),
        nl.DrivePort("D3", "p3", nl.GROUND, float(rng.uniform(25, 1000))),
    )
    return nl.Circuit(tuple(elems), ports), [0, 1], [2]


def random_gamma(rng: np.random.Generator) -> tuple[np.ndarray, ef.EffectiveModel, ds.DrivePortParams]:
    circuit, jp, dp = random_dissipative_circuit(rng)
    resp = nl.extract_pole_residue(circuit, "Admittance")
    junctions = ef.junctions_from_circuit(circuit, resp)
    model = _quiet(ef.build_effective_model, resp, junctions, junction_ports=jp, drive_ports=dp, direct_mode="none")
    params = ds.DrivePortParams(tuple(float(circuit.ports[k].z0) for k in dp))
    gamma = ds.decay_matrix(model, params, check_psd=False)
    return gamma, model, params


def criterion_8(n: int = 100, n_lindblad: int = 10, seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    herm, psd, psd_sec = 0.0, 0.0, 0.0
    models = []
    for _ in range(n):
        g, model, params = random_gamma(rng)
        scale = max(float(np.max(np.abs(g))), 1e-300)
        tr = max(float(np.trace(g).real), 1e-300)
        herm = max(herm, float(np.max(np.abs(g - g.conj().T))) / scale)
        psd = min(psd, float(np.linalg.eigvalsh(0.5 * (g + g.conj().T)).min()) / tr)
        g_sec = dy.secular_gamma(g, model.omegas)
        psd_sec = min(psd_sec, float(np.linalg.eigvalsh(0.5 * (g_sec + g_sec.conj().T)).min()) / tr)
        if len(models) < n_lindblad:
            models.append(ds.with_dissipation(model, params))
    failures = 0
    for model in models:
        t_end = 3.0 / max(float(np.max(np.real(np.diag(model.gamma)))), 1e-3)
        t = np.linspace(0.0, min(t_end, 500.0), 41)
        try:
            dy.lindblad_evolve(model, [1] + [0] * (model.n - 1), t, n_ph=3)
        except Nonphysical:
            failures += 1
    return [
        Check(8, "a", herm, "gamma Hermitian (rel) <= 1e-12, 100 random circuits", herm <= 1e-12),
        Check(8, "b", psd, "min eig(gamma) >= -1e-12 trace (formula as built)", psd >= -1e-12),
        Check(8, "c", psd_sec, "min eig(secular gamma) >= -1e-12 trace (as used)", psd_sec >= -1e-12),
        Check(8, "d", float(failures), "Lindblad runs: trace 1e-8, rho PSD -1e-8", failures == 0, f"{len(models)} runs"),
    ]


# ---------------------------------------------------------------------------
# 9 scattering


def criterion_9() -> list[Check]:
    s = sc.scattering().summary
    x = s["omega_c_over_omega_rf"]
    return [
        Check(9, "a", x, "omega_c/omega_rf = 0.977 +- 0.5%", abs(x / 0.977 - 1.0) <= 0.005),
        Check(9, "b", s["transmission"], "circulating |S| > 0.99", s["transmission"] > 0.99),
        Check(9, "c", s["reflection"], "reflection < 0.1", s["reflection"] < 0.1),
    ]


CRITERIA: dict[int, Callable[[], list[Check]]] = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
}


def run_all(selected=None) -> list[Check]:
    out: list[Check] = []
    for k, fn in CRITERIA.items():
        if selected is None or k in selected:
            out.extend(fn())
    return out
