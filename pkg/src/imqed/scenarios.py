"""Reference scenarios built on the example circuits.

Each function returns a :class:`ScenarioResult` with plot-ready trajectories
or tables and a flat summary of figure-level metrics.  The CLI and the
acceptance suite both go through here, so the numbers they report agree.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import dissipation as ds
from . import dynamics as dy
from . import effective as ef
from . import netlist as nl
from .immittance import Kind, scattering as s_matrix
from .units import TWO_PI, ff, ghz_to_rad


@dataclass
class ScenarioResult:
    name: str
    summary: dict
    trajectories: dict[str, dy.Trajectory] = field(default_factory=dict)
    table: list[dict] = field(default_factory=list)


def _response(circuit, route: str) -> object:
    kind = "Impedance" if route == "z" else "Admittance"
    return nl.extract_pole_residue(circuit, kind)


# ---------------------------------------------------------------------------
# chiral transfer


def chiral_model(phi: float = math.pi / 3, route: str = "y", direct: str = "none"):
    """Capacitive-filter circulator with omegabar = omega_y(phi)/3.

    Returns (example, effective model).  E_J is solved so that the dressed
    junction frequency hits the target.
    """
    ex0 = nl.build_example(nl.ExampleSpec.default("CirculatorCapacitive", phi=phi))
    wy = abs(ex0.derived["omega_y"])
    c_dc = nl.extract_pole_residue(ex0.circuit, "Admittance").cap_dc[0, 0]
    ej = ef.ej_for_frequency(c_dc, wy / 3.0)
    ex = nl.build_example(nl.ExampleSpec.default("CirculatorCapacitive", phi=phi, E_J=ej))
    resp = _response(ex.circuit, route)
    model = ef.build_effective_model(resp, ef.junctions_from_circuit(ex.circuit, resp), direct_mode=direct)
    return ex, model


def _period(times: np.ndarray, p1: np.ndarray, guess: float) -> float:
    """Time of the first revival of P_1 near ``guess``, refined by a parabola."""
    win = np.flatnonzero((times > 0.5 * guess) & (times < 1.5 * guess))
    if win.size < 3:
        return math.nan
    k = win[np.argmax(p1[win])]
    if 0 < k < times.size - 1:
        y0, y1, y2 = p1[k - 1 : k + 2]
        den = y0 - 2 * y1 + y2
        shift = 0.5 * (y0 - y2) / den if den != 0 else 0.0
        return float(times[k] + shift * (times[1] - times[0]))
    return float(times[k])


def circulation_order(traj: dy.Trajectory, period: float) -> str:
    """Order in which the other modes reach their first maximum, e.g. '123'."""
    t = traj.times
    win = t < period
    first = [float(t[win][np.argmax(traj.populations[win, j])]) for j in range(1, traj.populations.shape[1])]
    order = [1] + [j + 2 for j in np.argsort(first)]
    return "".join(str(x) for x in order)


def _qubit_cutoffs(modes: dy.CircuitModes, n_ph: int, n_inner: int) -> list[int]:
    weight = np.max(np.abs(modes.local), axis=0)
    return [n_ph if w >= 0.1 else n_inner for w in weight]


def _exact_run(circuit, t, n_ph, n_inner, nonlinearity, rwa, initial):
    modes = dy.circuit_modes(dy.circuit_quadratic_system(circuit))
    ham = dy.circuit_hamiltonian(modes, rwa=rwa, nonlinearity=nonlinearity)
    return dy.closed_evolve(ham, initial, t, n_ph=_qubit_cutoffs(modes, n_ph, n_inner))


def _chiral_metrics(model, circuit, phi_label, *, periods, n_t, n_ph, n_inner, nonlinearity, rwa):
    j = model.j_matrix[0, 1]
    period = TWO_PI / (math.sqrt(3.0) * abs(j))
    t = np.linspace(0.0, periods * period, n_t)
    initial = [1] + [0] * (model.n - 1)
    eff = dy.lindblad_evolve(model, initial, t, n_ph=n_ph)
    exact = _exact_run(circuit, t, n_ph, n_inner, nonlinearity, rwa, initial)
    dev = np.max(np.abs(eff.populations - exact.populations), axis=0)
    summary = {
        f"theta_12{phi_label}": float(model.theta[0, 1]),
        f"abs_J{phi_label}": float(abs(j)),
        f"period_predicted_ns{phi_label}": period,
        f"period_exact_ns{phi_label}": _period(t, exact.populations[:, 0], period),
        f"period_effective_ns{phi_label}": _period(t, eff.populations[:, 0], period),
        f"max_deviation{phi_label}": dev.tolist(),
        f"order_effective{phi_label}": circulation_order(eff, period),
        f"order_exact{phi_label}": circulation_order(exact, period),
    }
    return summary, eff, exact


def chiral(
    phi: float = math.pi / 3,
    periods: float = 2.0,
    n_t: int = 801,
    n_ph: int = 4,
    nonlinearity: str = "quartic",
    rwa: bool = True,
    route: str = "y",
    direct: str = "none",
    reverse: bool = True,
) -> ScenarioResult:
    """Effective vs exact three-qubit circulation from |100>, optionally also at -phi."""
    ex, model = chiral_model(phi, route, direct)
    summary, eff, exact = _chiral_metrics(
        model, ex.circuit, "", periods=periods, n_t=n_t, n_ph=n_ph, n_inner=n_ph, nonlinearity=nonlinearity, rwa=rwa
    )
    summary.update(
        {
            "phi": phi,
            "omega_y": ex.derived["omega_y"],
            "omega_bar": float(model.omegabar[0]),
            "E_J_GHz": float(ex.circuit.ports[0].ej_ghz),
            "nonlinearity": nonlinearity,
            "rwa": rwa,
        }
    )
    period_rel = abs(summary["period_exact_ns"] / summary["period_predicted_ns"] - 1.0)
    summary["period_rel_error"] = period_rel
    trajs = {"effective": eff, "exact": exact}
    if reverse:
        ex_m, model_m = chiral_model(-phi, route, direct)
        s_m, eff_m, exact_m = _chiral_metrics(
            model_m, ex_m.circuit, "_minus", periods=periods, n_t=n_t, n_ph=n_ph, n_inner=n_ph, nonlinearity=nonlinearity, rwa=rwa
        )
        summary.update(s_m)
        trajs.update({"effective_minus": eff_m, "exact_minus": exact_m})
    return ScenarioResult("chiral", summary, trajs)


def resonator_model(target: float = -math.pi / 6, route: str = "y", direct: str = "none", bracket=(12.0, 20.0)):
    """Resonator-filter circulator with E_J tuned so that theta_12 = target."""

    def build(ej):
        ex = nl.build_example(nl.ExampleSpec.default("CirculatorResonator", E_J=ej))
        resp = _response(ex.circuit, route)
        return ex, ef.build_effective_model(resp, ef.junctions_from_circuit(ex.circuit, resp), direct_mode=direct)

    ej = brentq(lambda e: build(e)[1].theta[0, 1] - target, *bracket, xtol=1e-12)
    return build(ej)


def chiral_resonator(
    periods: float = 2.0,
    n_t: int = 801,
    n_ph: int = 3,
    n_inner: int = 2,
    nonlinearity: str = "quartic",
    rwa: bool = True,
    route: str = "y",
    direct: str = "none",
) -> ScenarioResult:
    """Resonator-filter version of :func:`chiral`; inner modes keep ``n_inner`` photons."""
    ex, model = resonator_model(route=route, direct=direct)
    summary, eff, exact = _chiral_metrics(
        model, ex.circuit, "", periods=periods, n_t=n_t, n_ph=n_ph, n_inner=n_inner, nonlinearity=nonlinearity, rwa=rwa
    )
    summary["period_rel_error"] = abs(summary["period_exact_ns"] / summary["period_predicted_ns"] - 1.0)
    summary.update({"E_J_GHz": float(ex.circuit.ports[0].ej_ghz), "omega_bar": float(model.omegabar[0])})
    return ScenarioResult("chiral-resonator", summary, {"effective": eff, "exact": exact})


# ---------------------------------------------------------------------------
# isolator


def isolator(
    z0_over_r: float = 3.0,
    n_t: int = 401,
    n_ph: int = 3,
    amplitude: float = 1e-2,
    classical: bool = True,
) -> ScenarioResult:
    """Two qubits and a resistive port on the circulator; both initial excitations.

    The classical run starts from local amplitude ``amplitude`` (in quanta^1/2),
    small enough that the junctions stay in their linear regime, matching the
    single-excitation quantum dynamics.
    """
    ex = nl.build_example(nl.ExampleSpec.default("Isolator", Z0_over_R=z0_over_r))
    d, c = ex.derived, ex.circuit
    resp = nl.extract_pole_residue(c, "Admittance")
    model = ef.build_effective_model(
        resp, ef.junctions_from_circuit(c, resp), junction_ports=[0, 1], drive_ports=[2], direct_mode="none"
    )
    model = ds.with_dissipation(model, ds.DrivePortParams((d["Z0"],)))
    t_d = 20.0 * d["R"] * d["C_J"]
    t = np.linspace(0.0, t_d, n_t)
    fwd = dy.lindblad_evolve(model, [1, 0], t, n_ph=n_ph)
    rev = dy.lindblad_evolve(model, [0, 1], t, n_ph=n_ph)
    g, j = model.gamma, model.j_matrix
    summary = {
        "R_ohm": d["R"],
        "Z0_ohm": d["Z0"],
        "Z0_matched_over_R": d["Z0_matched"] / d["R"],
        "omega_bar": float(model.omegabar[0]),
        "omega_y": d["omega_y"],
        "T_D_ns": t_d,
        "isolation_residual": float(abs(1j * j[1, 0] + 0.5 * g[0, 1])),
        "gamma_11": float(g[0, 0].real),
        "max_P1_reverse": float(rev.populations[:, 0].max()),
        "peak_P2_forward": float(fwd.populations[:, 1].max()),
        "secular_groups": fwd.meta["secular_groups"],
    }
    trajs = {"forward": fwd, "reverse": rev}
    if classical:
        modes = dy.circuit_modes(dy.circuit_quadratic_system(c))
        cf = dy.kirchhoff_evolve(c, t, initial=[amplitude, 0.0], modes=modes)
        cr = dy.kirchhoff_evolve(c, t, initial=[0.0, amplitude], modes=modes)
        trajs.update({"forward_classical": cf, "reverse_classical": cr})
        summary.update(
            {
                "max_deviation_forward": np.max(np.abs(fwd.populations - cf.populations), axis=0).tolist(),
                "max_deviation_reverse": np.max(np.abs(rev.populations - cr.populations), axis=0).tolist(),
                "max_P1_reverse_classical": float(cr.populations[:, 0].max()),
                "classical_energy_monotone": bool(
                    all(np.all(np.diff(np.asarray(x.meta["energy"])) <= 1e-9 * x.meta["energy"][0]) for x in (cf, cr))
                ),
            }
        )
    return ScenarioResult("isolator", summary, trajs)


# ---------------------------------------------------------------------------
# Purcell chain


def purcell(couplings=(0.25, 0.5, 1.0, 2.0), route: str = "y") -> ScenarioResult:
    """Full readout and drive-line rates vs the weak-coupling closed forms."""
    p = nl.DEFAULT_PARAMS[nl.ExampleName.PURCELL_CHAIN_3PORT]
    rows = []
    for cc in couplings:
        ex = nl.build_example(nl.ExampleSpec.default("PurcellChain3Port", C_c=cc))
        d, c = ex.derived, ex.circuit
        resp = _response(c, route)
        junctions = ef.junctions_from_circuit(c, resp)
        model = ef.build_effective_model(resp, junctions, junction_ports=[0], drive_ports=[1, 2], direct_mode="none")
        rates = ds.port_resolved_rates(model, ds.DrivePortParams((p["Z0"], p["Z0"])))[0]
        w = float(model.omegabar[0])
        c_total = nl.extract_pole_residue(c, "Admittance").cap_dc[0, 0]
        crp, ck, cd = ff(p["C_rp"]), ff(p["C_k"]), ff(p["C_d"])
        loaded = ds.loaded_chain_parameters(d["L_r"], d["C_r"], d["L_p"], d["C_p"], d["C_jr"], crp, ck)
        closed_ro = ds.readout_rate(
            w,
            c_j=c_total,
            c_jr=d["C_jr"],
            c_r=loaded["c_r"],
            c_rp=crp,
            c_p=loaded["c_p"],
            c_k=ck,
            c_d=cd,
            omega_r=loaded["omega_r"],
            omega_f=loaded["omega_f"],
            z0=p["Z0"],
        )
        closed_d = ds.drive_port_rate(w, c_total, d["C_jd"], cd, p["Z0"])
        k_q = ds.filter_kappa(w, ck, loaded["c_p"], cd, p["Z0"])
        k_f = ds.filter_kappa(loaded["omega_f"], ck, loaded["c_p"], cd, p["Z0"])
        rows.append(
            {
                "C_c_fF": cc,
                "omega_bar": w,
                "rate_readout": float(rates[0]),
                "rate_readout_closed": closed_ro,
                "ratio_readout": float(rates[0] / closed_ro),
                "rate_drive": float(rates[1]),
                "rate_drive_closed": closed_d,
                "ratio_drive": float(rates[1] / closed_d),
                "T1_readout_ns": float(1.0 / rates[0]),
                "T1_drive_ns": float(1.0 / rates[1]),
                "kappa_at_qubit": k_q,
                "kappa_at_filter": k_f,
                "kappa_ratio": k_q / k_f,
            }
        )
    weak = [r for r in rows if r["C_c_fF"] <= 1.0]
    summary = {
        "max_rel_error_readout_weak": max(abs(r["ratio_readout"] - 1.0) for r in weak) if weak else math.nan,
        "max_rel_error_drive_weak": max(abs(r["ratio_drive"] - 1.0) for r in weak) if weak else math.nan,
        "kappa_ratio": rows[0]["kappa_ratio"],
        "omega_f": ghz_to_rad(p["f_f"]),
    }
    return ScenarioResult("purcell", summary, table=rows)


# ---------------------------------------------------------------------------
# classical scattering


def _circulation(s: np.ndarray) -> tuple[float, float, str]:
    """(worst circulating transmission, worst reflection, direction) of a 3x3 S."""
    fwd = min(abs(s[(k + 1) % 3, k]) for k in range(3))
    bwd = min(abs(s[k, (k + 1) % 3]) for k in range(3))
    refl = float(np.max(np.abs(np.diag(s))))
    return (fwd, refl, "1->2->3") if fwd >= bwd else (bwd, refl, "1->3->2")


def scattering(r0: float = 50.0, span: tuple[float, float] = (0.9, 1.1), n: int = 4001, route: str = "z") -> ScenarioResult:
    """|S(omega)| of the resonator-filter circulator with the scattering caption values.

    S is built from the synthesized pole-residue response (impedance route by
    default) and cross-checked against the nodal solve at the optimum.
    """
    p = nl.fig9_params()
    ex = nl.build_example(nl.ExampleSpec.default("CirculatorResonator", **p))
    w_rf = ghz_to_rad(p["f_r"])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        resp = _response(ex.circuit, route)
    rows, best = [], None
    for x in np.linspace(span[0], span[1], n):
        try:
            s = s_matrix(resp, r0, x * w_rf)
        except Exception:  # exactly on a pole of the response
            continue
        tr, refl, direction = _circulation(s)
        row = {"omega_over_omega_rf": float(x)}
        row.update({f"abs_S{i + 1}{j + 1}": float(abs(s[i, j])) for i in range(3) for j in range(3)})
        rows.append(row)
        if best is None or tr > best[1]:
            best = (float(x), tr, refl, direction, s)
    x, tr, refl, direction, s = best
    z = nl.mna_impedance(ex.circuit, x * w_rf)
    s_nodal = np.linalg.solve(z + r0 * np.eye(3), z - r0 * np.eye(3))
    summary = {
        "phi_over_pi": p["phi"] / math.pi,
        "omega_rf": w_rf,
        "omega_c_over_omega_rf": x,
        "transmission": tr,
        "reflection": refl,
        "direction": direction,
        "unitarity_error": float(np.linalg.norm(s @ s.conj().T - np.eye(3))),
        "nodal_mismatch": float(np.max(np.abs(s - s_nodal))),
        "response_kind": resp.kind.value if isinstance(resp.kind, Kind) else str(resp.kind),
    }
    return ScenarioResult("scattering", summary, table=rows)


SCENARIOS = {
    "chiral": chiral,
    "isolator": isolator,
    "purcell": purcell,
    "scattering": scattering,
    "chiral-resonator": chiral_resonator,
}
