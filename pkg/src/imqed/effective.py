"""Effective dispersive qubit model from an immittance response.

The qubit modes live on the junction ports.  Starting from the port response
(admittance or impedance) and the junction parameters this module computes

* the dressed junction frequencies omegabar_i (closed form including the
  shunt-inductance ratio zeta_i and the quartic renormalization),
* Lamb-shifted frequencies omega_i,
* complex hoppings J_ij with their phases theta_ij = arg J_ij,
* anharmonicities and qubit/inner-mode cross-Kerr shifts.

Hamiltonian convention: ``H = sum_i omega_i b_i^dag b_i + sum_{i != j} J_ij
b_j^dag b_i + Kerr terms``.  Hermiticity means ``J_ji = conj(J_ij)``; the
single-excitation matrix returned by :func:`hamiltonian_matrix` therefore has
``H[i, j] = J_ji``.

Direct coupling between junction ports (off-diagonal dc response) is handled in
one of three ways, selected by ``direct_mode``:

``numeric``
    the dc part of the junction sector is diagonalized exactly and the
    response is conjugated into the resulting normal-mode frame;
``perturbative``
    the off-diagonal dc couplings are added to J at first order;
``none``
    the reciprocal dc couplings between ports are ignored.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.optimize import brentq, linear_sum_assignment

from .errors import ImqedError, NonLocalFrame, NonTransmonRegime, PerturbativeWarning, ResonantPair, SingularDcResidue
from .immittance import Kind, PoleResidueResponse, ac_part, dc_part, evaluate, to_json as response_to_json
from .units import HBAR, PHI0, TWO_PI, charging_energy, ghz_to_rad, josephson_inductance

NON_TRANSMON_RATIO = 0.2
PERTURBATIVE_WARN = 0.3
LOCALITY_WARN = 0.5


class Route(str, enum.Enum):
    Y = "y"
    Z = "z"


class DirectMode(str, enum.Enum):
    NUMERIC = "numeric"
    PERTURBATIVE = "perturbative"
    NONE = "none"


# ---------------------------------------------------------------------------
# single junction


@dataclass(frozen=True)
class JunctionPortParams:
    """A Josephson junction sitting on a port.

    ``e_j`` is E_J/h in GHz, ``c_shunt`` the total shunt capacitance in nF
    and ``zeta`` the ratio L~_J / L_s to a parallel (shunt) inductance.
    """

    e_j: float
    c_shunt: float
    zeta: float = 0.0

    def __post_init__(self):
        if not self.e_j > 0:
            raise ImqedError(f"E_J must be positive, got {self.e_j}")
        if not self.c_shunt > 0:
            raise ImqedError(f"shunt capacitance must be positive, got {self.c_shunt}")
        if self.zeta < 0:
            raise ImqedError(f"zeta must be non-negative, got {self.zeta}")

    @property
    def l_tilde(self) -> float:
        """Linear junction inductance phi0^2/E_J in nH."""
        return josephson_inductance(self.e_j)

    @property
    def omega_tilde(self) -> float:
        """Plasma frequency 1/sqrt(L~_J C) in rad/ns."""
        return 1.0 / math.sqrt(self.l_tilde * self.c_shunt)

    @property
    def e_c(self) -> float:
        """Charging energy e^2/2C in rad/ns."""
        return charging_energy(self.c_shunt)

    @property
    def omega_ej(self) -> float:
        """E_J/hbar in rad/ns."""
        return ghz_to_rad(self.e_j)

    def with_shunt(self, c_shunt: float | None = None, zeta: float | None = None) -> "JunctionPortParams":
        return replace(
            self,
            c_shunt=self.c_shunt if c_shunt is None else c_shunt,
            zeta=self.zeta if zeta is None else zeta,
        )


def _renormalize(w_lin: float, omega_tilde: float, e_c: float) -> float:
    """Quartic renormalization of a linear frequency w = omega~ sqrt(1+zeta)."""
    x = e_c / omega_tilde
    if x >= 1.0:
        raise ImqedError(f"E_C/omega~ = {x:.3g} >= 1: no transmon mode")
    if x > NON_TRANSMON_RATIO:
        warnings.warn(f"E_C/omega~ = {x:.3g} exceeds {NON_TRANSMON_RATIO}", NonTransmonRegime, stacklevel=3)
    r3 = (w_lin / omega_tilde) ** 3
    if r3 <= x:
        raise ImqedError("(1+zeta)^(3/2) <= E_C/omega~: quartic correction diverges")
    return w_lin * (1.0 - x / (r3 - x))


def dressed_frequency(port: JunctionPortParams, response: PoleResidueResponse | None = None, index: int = 0) -> float:
    """omegabar = omega~ sqrt(1+zeta) (1 - x / ((1+zeta)^(3/2) - x)), x = E_C/omega~.

    With a response, zeta is taken from its inductive dc residue at ``index``
    (admittances only); otherwise ``port.zeta`` is used.
    """
    zeta = port.zeta if response is None else shunt_zeta(response, index, port)
    return _renormalize(port.omega_tilde * math.sqrt(1.0 + zeta), port.omega_tilde, port.e_c)


def self_consistency_residual(port: JunctionPortParams, omegabar: float) -> float:
    """omegabar^2 - omega~^2 (1 + zeta - 2 E_C/omegabar), relative to omegabar^2."""
    w = port.omega_tilde
    return (omegabar**2 - w**2 * (1.0 + port.zeta - 2.0 * port.e_c / omegabar)) / omegabar**2


def anharmonicity(port: JunctionPortParams, omegabar: float) -> float:
    """Self-Kerr delta = -E_C (omega~/omegabar)^2 in rad/ns."""
    return -port.e_c * (port.omega_tilde / omegabar) ** 2


def shunt_zeta(response: PoleResidueResponse, index: int, port: JunctionPortParams) -> float:
    """zeta = L~_J / L_s with 1/L_s the inductive dc residue of Y_ii."""
    if response.kind is not Kind.ADMITTANCE:
        return port.zeta
    return float(port.l_tilde * response.ind_dc[index, index])


def transmon_for_anharmonicity(c_nf: float, ratio: float) -> tuple[float, float]:
    """Junction energy giving delta/omegabar = ``ratio`` for a shunt capacitance.

    Returns (E_J/h in GHz, omegabar in rad/ns) for zeta = 0.
    """
    if not -0.5 < ratio < 0:
        raise ImqedError("anharmonicity ratio must lie in (-0.5, 0)")
    e_c = charging_energy(c_nf)

    def f(x):
        return -x * ((1 - x) / (1 - 2 * x)) ** 3 - ratio

    x = brentq(f, 1e-9, 0.3)
    w_tilde = e_c / x
    l_tilde = 1.0 / (w_tilde**2 * c_nf)
    ej_ghz = PHI0**2 / (HBAR * l_tilde) / TWO_PI
    port = JunctionPortParams(ej_ghz, c_nf)
    return ej_ghz, dressed_frequency(port)


def ej_for_frequency(c_nf: float, omegabar: float, zeta: float = 0.0) -> float:
    """E_J/h (GHz) whose dressed frequency equals ``omegabar`` (rad/ns)."""

    def f(log_ej):
        return dressed_frequency(JunctionPortParams(math.exp(log_ej), c_nf, zeta)) - omegabar

    e_c_ghz = charging_energy(c_nf) / TWO_PI
    lo, hi = math.log(e_c_ghz * 8.0), math.log(e_c_ghz * 1e6)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonTransmonRegime)
        return math.exp(brentq(f, lo, hi, xtol=1e-14, rtol=1e-14))


# ---------------------------------------------------------------------------
# frames


@dataclass(frozen=True)
class Frame:
    """Linear map from normalized mode coordinates to junction port fluxes.

    For the admittance route the normalized response is Ybar = T^T Y T; for
    the impedance route Zbar = T^-1 Z T^-T.  ``dc_sub`` removes the part of the
    dc response that the frame has already absorbed.
    """

    route: Route
    mode: DirectMode
    t: np.ndarray
    capacitance: np.ndarray  # per-mode C_i used for E_C and L-bar
    linear: np.ndarray  # linear mode frequency (before quartic correction)
    omegabar: np.ndarray
    omega_tilde: np.ndarray
    e_c: np.ndarray
    zeta: np.ndarray
    participation: np.ndarray | None = None  # weight of mode k on junction k (numeric mode)

    @property
    def t_inv(self) -> np.ndarray:
        return np.linalg.inv(self.t)

    def bar(self, m: np.ndarray) -> np.ndarray:
        """Normalize a junction-block matrix."""
        if self.route is Route.Y:
            return self.t.T @ m @ self.t
        ti = self.t_inv
        return ti @ m @ ti.T

    def bar_rows(self, m: np.ndarray) -> np.ndarray:
        """Normalize the junction rows of a junction x drive block."""
        if self.route is Route.Y:
            return self.t.T @ m
        return self.t_inv @ m


def _sign_columns(t: np.ndarray) -> np.ndarray:
    out = t.copy()
    for k in range(out.shape[1]):
        if out[k, k] < 0:
            out[:, k] *= -1
    return out


def _assign_modes(t: np.ndarray, weight: np.ndarray) -> np.ndarray:
    """Column permutation so that mode k lives mostly on junction k."""
    score = np.abs(t) ** 2 * weight[:, None]
    rows, cols = linear_sum_assignment(-score)
    order = np.empty_like(cols)
    order[rows] = cols
    return order


def build_frame(
    junction_response: PoleResidueResponse,
    ports: Sequence[JunctionPortParams],
    route: Route,
    mode: DirectMode,
    linear: bool = False,
) -> Frame:
    n = junction_response.n_ports
    if len(ports) != n:
        raise ImqedError(f"{len(ports)} junction parameter sets for {n} junction ports")
    l_tilde = np.array([p.l_tilde for p in ports])
    if route is Route.Y:
        if junction_response.kind is not Kind.ADMITTANCE:
            raise ImqedError("admittance route needs an admittance response")
        cmat = junction_response.cap_dc
        kmat = junction_response.ind_dc
        if np.any(np.diag(cmat) <= 0):
            raise ImqedError("every junction port needs a positive shunt capacitance in D_inf")
    else:
        if junction_response.kind is not Kind.IMPEDANCE:
            raise ImqedError("impedance route needs an impedance response")
        if any(p.zeta > 0 for p in ports):
            raise ImqedError(
                "shunt inductance with the impedance route: extract the shunting "
                "inductance out of the response and use the admittance route"
            )
        a0 = junction_response.ind_dc
        ev = np.linalg.eigvalsh(a0)
        if ev.min() <= 1e-10 * max(ev.max(), 1e-300):
            raise SingularDcResidue(
                "A_0 singular: use admittance route (direct inductive coupling between "
                "ports has no impedance dc residue)"
            )
        cmat = np.linalg.inv(a0)
        kmat = np.zeros((n, n))
    kinv = np.diag(1.0 / l_tilde)

    participation = None
    if mode is DirectMode.NUMERIC:
        c_diag = np.diag(cmat).copy()
        cbar, o_c = np.linalg.eigh(0.5 * (cmat + cmat.T))
        if cbar.min() <= 0:
            raise ImqedError("capacitance matrix of the junction sector is not positive definite")
        s = o_c @ np.diag(cbar**-0.5)
        m = s.T @ (kmat + kinv) @ s
        w2, o_w = np.linalg.eigh(0.5 * (m + m.T))
        if w2.min() <= 0:
            raise ImqedError("junction sector has a non-positive linear frequency")
        t = s @ o_w
        order = _assign_modes(t, c_diag)
        t = _sign_columns(t[:, order])
        w_lin = np.sqrt(w2[order])
        cap = c_diag
        weight = t**2 * c_diag[:, None]
        participation = np.diag(weight) / weight.sum(axis=0)
        if participation.min() < LOCALITY_WARN:
            warnings.warn(
                f"numeric frame is not local (junction participation {participation.min():.2f}); "
                "near-resonant junctions with direct coupling hybridize, use the perturbative mode",
                NonLocalFrame,
                stacklevel=3,
            )
    elif mode is DirectMode.PERTURBATIVE:
        if route is Route.Y:
            cap = 1.0 / np.diag(np.linalg.inv(cmat))
        else:
            cap = 1.0 / np.diag(junction_response.ind_dc)
        t = np.diag(cap**-0.5)
        w_lin = np.sqrt((np.diag(kmat) + 1.0 / l_tilde) / cap)
    else:
        cap = np.diag(cmat).copy() if route is Route.Y else 1.0 / np.diag(junction_response.ind_dc)
        t = np.diag(cap**-0.5)
        w_lin = np.sqrt((np.diag(kmat) + 1.0 / l_tilde) / cap)

    e_c = np.array([charging_energy(c) for c in cap])
    w_tilde = 1.0 / np.sqrt(l_tilde * cap)
    zeta = np.array([l_tilde[i] * kmat[i, i] for i in range(n)]) if route is Route.Y else np.zeros(n)
    if linear:
        wbar = w_lin.copy()
    else:
        wbar = np.array([_renormalize(w_lin[i], w_tilde[i], e_c[i]) for i in range(n)])
    return Frame(route, mode, t, cap, w_lin, wbar, w_tilde, e_c, zeta, participation)


# ---------------------------------------------------------------------------
# response pieces in a frame


def _sigma(resp: PoleResidueResponse, omega: float) -> np.ndarray:
    """Response without its reciprocal dc part (Y) or without the diagonal dc part (Z)."""
    full_dc = dc_part(resp, omega)
    ac = ac_part(resp, omega)
    if resp.kind is Kind.ADMITTANCE:
        return ac + 0.5 * (full_dc - full_dc.T)
    return ac


def _bar_sigma(frame: Frame, resp: PoleResidueResponse, omega: float) -> np.ndarray:
    if frame.route is Route.Y:
        return frame.bar(_sigma(resp, omega))
    if frame.mode is DirectMode.NUMERIC:
        return frame.bar(ac_part(resp, omega))
    # perturbative and none: off-diagonal dc couplings enter through the full Z
    full = frame.bar(evaluate(resp, omega))
    dc = frame.bar(dc_part(resp, omega))
    if frame.mode is DirectMode.NONE:
        return full - dc
    return full - np.diag(np.diag(dc))


def lamb_shifted_frequency(
    omegabar: float, response: PoleResidueResponse, index: int, capacitance: float
) -> float:
    """omega_i = omegabar - Im Y^ac_ii/(2C) (Y) or omegabar - Im Z^ac_ii C omegabar^2/2 (Z)."""
    ac = ac_part(response, omegabar)[index, index]
    if response.kind is Kind.ADMITTANCE:
        return omegabar - ac.imag / (2.0 * capacitance)
    return omegabar - ac.imag * capacitance * omegabar**2 / 2.0


def hopping(
    omegabar_i: float,
    omegabar_j: float,
    response: PoleResidueResponse,
    i: int,
    j: int,
    c_i: float,
    c_j: float,
) -> tuple[complex, float]:
    """Complex hopping J_ij and its phase, using the response without reciprocal dc parts."""
    if i == j:
        raise ImqedError("hopping needs two distinct ports")
    wi, wj = omegabar_i, omegabar_j
    if response.kind is Kind.ADMITTANCE:
        si = _sigma(response, wi)[i, j]
        sj = _sigma(response, wj)[i, j]
        val = 0.25j * math.sqrt(wi * wj / (c_i * c_j)) * (si / wi + sj / wj)
    else:
        zi = evaluate(response, wi)[i, j]
        zj = evaluate(response, wj)[i, j]
        val = 0.25j * math.sqrt(wi * wj * c_i * c_j) * (wj * zi + wi * zj)
    return complex(val), float(np.angle(val))


def _j_matrix(frame: Frame, resp: PoleResidueResponse) -> np.ndarray:
    n = resp.n_ports
    w = frame.omegabar
    sig = [_bar_sigma(frame, resp, float(w[k])) for k in range(n)]
    jm = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            if frame.route is Route.Y:
                jm[i, j] = 0.25j * math.sqrt(w[i] * w[j]) * (sig[i][i, j] / w[i] + sig[j][i, j] / w[j])
            else:
                jm[i, j] = 0.25j * math.sqrt(w[i] * w[j]) * (w[j] * sig[i][i, j] + w[i] * sig[j][i, j])
    return jm


def _direct_terms(frame: Frame, resp: PoleResidueResponse) -> tuple[np.ndarray, np.ndarray]:
    """First-order direct-coupling additions (real symmetric) and diagonal shifts."""
    n = resp.n_ports
    w = frame.omegabar
    add = np.zeros((n, n))
    shift = np.zeros(n)
    sq = np.sqrt(np.outer(w, w))
    if frame.route is Route.Y and frame.mode is not DirectMode.NONE:
        yg = frame.bar(resp.nr_dc)
        g2 = yg.T @ yg
        add += g2 / (8.0 * sq)
        shift += np.diag(g2) / (8.0 * w)
    if frame.mode is DirectMode.PERTURBATIVE and frame.route is Route.Y:
        c = frame.capacitance
        cinv = np.linalg.inv(resp.cap_dc)
        c_chi = cinv - np.diag(np.diag(cinv))
        l_chi = resp.ind_dc - np.diag(np.diag(resp.ind_dc))
        sc = np.sqrt(np.outer(c, c))
        omega_c = sq * sc * c_chi
        omega_l = l_chi / (sc * sq)
        ratio = max(np.max(np.abs(omega_c)), np.max(np.abs(omega_l))) / max(np.min(w), 1e-300)
        if ratio > PERTURBATIVE_WARN:
            warnings.warn(f"direct coupling ratio {ratio:.2f} is large for the perturbative mode", PerturbativeWarning, stacklevel=3)
        add += 0.5 * (omega_c + omega_l)
    np.fill_diagonal(add, 0.0)
    return add, shift


# ---------------------------------------------------------------------------
# nonlinear corrections


def cross_kerr(
    omegabar: float,
    delta: float,
    e_c: float,
    omega_mu: float,
    coupling: float,
    route: Route | str = Route.Y,
) -> float:
    """Dispersive shift chi between a qubit and an inner mode.

    ``coupling`` is the squared transformer ratio seen by the qubit in the
    normalized frame: (r_i^2)/C_i for a reciprocal admittance pole (or
    ((n_L)_i^2 + (n_R)_i^2)/C_i for a gyrator section), r_i^2 C_i for the
    impedance.  This equals the diagonal of the normalized symmetric residue.
    """
    theta = omega_mu**2 - omegabar**2
    if abs(theta) < 1e-9 * max(omega_mu, omegabar) ** 2:
        raise ResonantPair(f"qubit at {omegabar:.6g} resonant with inner mode at {omega_mu:.6g}")
    if Route(route) is Route.Y:
        g2 = omegabar / omega_mu * coupling
    else:
        g2 = omegabar * omega_mu * coupling
    return 2.0 * delta * (1.0 - 2.0 * e_c / omegabar) * (omega_mu / theta) ** 2 * g2


# ---------------------------------------------------------------------------
# model


@dataclass(frozen=True)
class InnerMode:
    omega: float
    chi: np.ndarray
    reciprocal: bool


@dataclass(frozen=True)
class EffectiveModel:
    omegas: np.ndarray
    omegabar: np.ndarray
    anharmonicities: np.ndarray
    j_matrix: np.ndarray
    inner_modes: tuple[InnerMode, ...]
    route: Route
    direct_mode: DirectMode
    capacitances: np.ndarray
    e_c: np.ndarray
    frame: np.ndarray
    junction_ports: tuple[int, ...]
    drive_ports: tuple[int, ...] = ()
    gamma: np.ndarray | None = None
    drives: np.ndarray | None = None
    drive_frequency: float | None = None
    crosstalk: np.ndarray | None = None
    response: PoleResidueResponse | None = field(default=None, repr=False, compare=False)
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.omegas)

    @property
    def theta(self) -> np.ndarray:
        return np.angle(self.j_matrix)

    def hamiltonian_matrix(self) -> np.ndarray:
        return hamiltonian_matrix(self)


def hamiltonian_matrix(model: EffectiveModel) -> np.ndarray:
    """Single-excitation Hamiltonian: H[i, j] is the coefficient of b_i^dag b_j."""
    h = model.j_matrix.T.copy()
    h[np.diag_indices(model.n)] = model.omegas
    return h


def _inner_modes(frame: Frame, resp: PoleResidueResponse, deltas: np.ndarray) -> tuple[InnerMode, ...]:
    out = []
    for p in resp.ac_poles:
        rbar = frame.bar(p.res_sym)
        chi = np.array(
            [
                cross_kerr(frame.omegabar[i], deltas[i], frame.e_c[i], p.omega, rbar[i, i], frame.route)
                for i in range(resp.n_ports)
            ]
        )
        out.append(InnerMode(p.omega, chi, bool(np.linalg.norm(p.res_anti) <= 1e-10 * np.linalg.norm(p.res_sym))))
    return tuple(out)


def build_effective_model(
    response: PoleResidueResponse,
    junctions: Sequence[JunctionPortParams],
    junction_ports: Sequence[int] | None = None,
    drive_ports: Sequence[int] | None = None,
    direct_mode: DirectMode | str = DirectMode.NUMERIC,
    linear: bool = False,
) -> EffectiveModel:
    """Assemble omega_i, delta_i, J_ij and chi_imu.

    ``response`` covers every port (junction and drive); ``junction_ports``
    selects the junction ports (default: the first ``len(junctions)``).  The
    route follows the response kind.  The junction shunt capacitances are read
    from the response; ``c_shunt`` of the parameters is not used.  With
    ``linear`` the junctions are treated as linear inductors (no quartic
    renormalization), which is the model to compare against the exact
    normal modes of the linearized circuit.
    """
    mode = DirectMode(direct_mode)
    route = Route.Y if response.kind is Kind.ADMITTANCE else Route.Z
    jp = tuple(range(len(junctions))) if junction_ports is None else tuple(junction_ports)
    dp = tuple(k for k in range(response.n_ports) if k not in jp) if drive_ports is None else tuple(drive_ports)
    rj = response.restrict(jp)
    frame = build_frame(rj, junctions, route, mode, linear)
    jm = _j_matrix(frame, rj)
    add, shift = _direct_terms(frame, rj)
    jm = jm + add
    w = frame.omegabar
    omegas = np.empty(rj.n_ports)
    for i in range(rj.n_ports):
        ac = frame.bar(ac_part(rj, float(w[i])))[i, i]
        if route is Route.Y:
            omegas[i] = w[i] - ac.imag / 2.0
        else:
            omegas[i] = w[i] - ac.imag * w[i] ** 2 / 2.0
    omegas = omegas + shift
    deltas = np.array([-frame.e_c[i] * (frame.omega_tilde[i] / w[i]) ** 2 for i in range(rj.n_ports)])
    return EffectiveModel(
        omegas=omegas,
        omegabar=w.copy(),
        anharmonicities=deltas,
        j_matrix=jm,
        inner_modes=_inner_modes(frame, rj, deltas),
        route=route,
        direct_mode=mode,
        capacitances=frame.capacitance.copy(),
        e_c=frame.e_c.copy(),
        frame=frame.t.copy(),
        junction_ports=jp,
        drive_ports=dp,
        response=response,
        meta={
            "omega_tilde": frame.omega_tilde.tolist(),
            "zeta": frame.zeta.tolist(),
            **({} if frame.participation is None else {"participation": frame.participation.tolist()}),
        },
    )


def junctions_from_circuit(circuit, response: PoleResidueResponse | None = None) -> list[JunctionPortParams]:
    """Junction parameters for every junction port of a netlist circuit."""
    from .netlist import JunctionPort

    out = []
    for p in circuit.ports:
        if isinstance(p, JunctionPort):
            if p.ej_ghz is None:
                raise ImqedError(f"junction port {p.name} has no E_J")
            out.append(JunctionPortParams(p.ej_ghz, p.cj if p.cj else 1.0))
    return out


# ---------------------------------------------------------------------------
# JSON (model.v1)


def _cplx(m) -> list:
    a = np.asarray(m)
    if a.ndim == 0:
        return [float(a.real), float(a.imag)]
    return [_cplx(x) for x in a]


def _cplx_back(x):
    a = np.asarray(x, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


def to_json(model: EffectiveModel, include_response: bool = True) -> dict:
    out = {
        "schema": "model.v1",
        "units": {"frequency": "GHz (omega/2pi)", "rates": "GHz (gamma/2pi)", "capacitance": "nF", "crosstalk": "dB"},
        "route": model.route.value,
        "direct_mode": model.direct_mode.value,
        "junction_ports": list(model.junction_ports),
        "drive_ports": list(model.drive_ports),
        "omega_ghz": (model.omegas / TWO_PI).tolist(),
        "omegabar_ghz": (model.omegabar / TWO_PI).tolist(),
        "anharmonicity_ghz": (model.anharmonicities / TWO_PI).tolist(),
        "J_ghz": _cplx(model.j_matrix / TWO_PI),
        "theta_rad": model.theta.tolist(),
        "capacitance_nf": model.capacitances.tolist(),
        "frame": model.frame.tolist(),
        "inner_modes": [
            {"omega_ghz": m.omega / TWO_PI, "chi_ghz": (m.chi / TWO_PI).tolist(), "reciprocal": m.reciprocal}
            for m in model.inner_modes
        ],
        "gamma_ghz": None if model.gamma is None else _cplx(model.gamma / TWO_PI),
        "drives": None if model.drives is None else _cplx(model.drives),
        "drive_frequency_ghz": None if model.drive_frequency is None else model.drive_frequency / TWO_PI,
        "crosstalk_db": None if model.crosstalk is None else model.crosstalk.tolist(),
        "meta": model.meta,
    }
    if include_response and model.response is not None:
        out["response"] = response_to_json(model.response)
    return out


def from_json(data: dict) -> EffectiveModel:
    if data.get("schema") != "model.v1":
        raise ImqedError("not a model.v1 document")
    from .immittance import from_json as response_from_json

    inner = tuple(
        InnerMode(m["omega_ghz"] * TWO_PI, np.array(m["chi_ghz"]) * TWO_PI, m["reciprocal"]) for m in data["inner_modes"]
    )
    return EffectiveModel(
        omegas=np.array(data["omega_ghz"]) * TWO_PI,
        omegabar=np.array(data["omegabar_ghz"]) * TWO_PI,
        anharmonicities=np.array(data["anharmonicity_ghz"]) * TWO_PI,
        j_matrix=_cplx_back(data["J_ghz"]) * TWO_PI,
        inner_modes=inner,
        route=Route(data["route"]),
        direct_mode=DirectMode(data["direct_mode"]),
        capacitances=np.array(data["capacitance_nf"]),
        e_c=np.array([charging_energy(c) for c in data["capacitance_nf"]]),
        frame=np.array(data["frame"]),
        junction_ports=tuple(data["junction_ports"]),
        drive_ports=tuple(data["drive_ports"]),
        gamma=None if data.get("gamma_ghz") is None else _cplx_back(data["gamma_ghz"]) * TWO_PI,
        drives=None if data.get("drives") is None else _cplx_back(data["drives"]),
        drive_frequency=None if data.get("drive_frequency_ghz") is None else data["drive_frequency_ghz"] * TWO_PI,
        crosstalk=None if data.get("crosstalk_db") is None else np.array(data["crosstalk_db"]),
        response=response_from_json(data["response"]) if "response" in data else None,
        meta=data.get("meta", {}),
    )
