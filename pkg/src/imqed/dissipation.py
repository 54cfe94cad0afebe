"""Correlated decay, Purcell rates, drive amplitudes and crosstalk.

Everything here is read off the junction-drive blocks of the port response
evaluated at the dressed qubit frequencies.  Drive ports are terminated by
transmission lines of characteristic impedance Z0; their own dc response
(capacitances / inductances at the drive ports) filters that termination.

Amplitudes use volts for the drive voltage and return rad/ns.  In the
package units (nF, nH, ns, ohm) hbar carries the factor HBAR, so amplitudes
are divided by sqrt(HBAR).

The coherent (Lamb-shift) part of the bath is not included: in the regime of
interest it is cancelled by the renormalization of the qubit frequencies.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .effective import DirectMode, EffectiveModel, Route
from .errors import ImqedError, Nonphysical, ZeroDenominator
from .immittance import Kind, PoleResidueResponse, ac_part, dc_part
from .units import HBAR

CROSSTALK_FLOOR_DB = -300.0
PSD_TOL = 1e-12


@dataclass(frozen=True)
class DrivePortParams:
    """Termination of the drive ports: one characteristic impedance per port."""

    z0: tuple[float, ...]

    def __post_init__(self):
        z = tuple(float(v) for v in np.atleast_1d(self.z0))
        if any(not v > 0 for v in z):
            raise ImqedError("Z0 must be positive on every drive port")
        object.__setattr__(self, "z0", z)

    @staticmethod
    def uniform(z0: float, n: int) -> "DrivePortParams":
        return DrivePortParams(tuple([z0] * n))


@dataclass(frozen=True)
class DriveTone:
    """V_d(t) = amplitude * sin(omega * t) on drive port ``port`` (index among drive ports)."""

    port: int
    amplitude: float
    omega: float

    def __post_init__(self):
        if not self.omega > 0:
            raise ImqedError("drive frequency must be positive")


def _blocks(model: EffectiveModel) -> tuple[list[int], list[int]]:
    if model.response is None:
        raise ImqedError("model carries no response")
    return list(model.junction_ports), list(model.drive_ports)


def drive_filter(
    response: PoleResidueResponse, drive_ports: Sequence[int], params: DrivePortParams, omega: float
) -> np.ndarray:
    """Y^drive = Z0^-1 + Y^dc_D(omega) or Z^drive = Z0 + Z^dc_D(omega).

    Negative ``omega`` is allowed (used for the counter-rotating sideband).
    """
    d = list(drive_ports)
    if len(params.z0) != len(d):
        raise ImqedError(f"{len(params.z0)} Z0 values for {len(d)} drive ports")
    dc = dc_part(response, omega)[np.ix_(d, d)]
    z0 = np.diag(params.z0)
    if response.kind is Kind.ADMITTANCE:
        return np.linalg.inv(z0) + dc
    return z0 + dc


def _frame_rows(model: EffectiveModel, m: np.ndarray) -> np.ndarray:
    """Normalized junction rows: T^T M (Y) or T^-1 M (Z)."""
    t = model.frame
    if model.route is Route.Y:
        return t.T @ m
    return np.linalg.solve(t, m)


def decay_matrix(model: EffectiveModel, params: DrivePortParams, check_psd: bool = True) -> np.ndarray:
    """Correlated decay rates gamma_ij (rad/ns).

    Admittance: gamma = sum_dd' Re[Ydrive^-1_dd'(wbar_ij)] Ybar_id(wbar_i) conj(Ybar_jd'(wbar_j)),
    with Ybar = T^T Y_JD.  Without direct coupling T = diag(C^-1/2).  Impedance:
    the same with Z^drive and Zbar = T^-1 Z_JD, times wbar_i wbar_j.
    """
    jp, dp = _blocks(model)
    resp = model.response
    n = len(jp)
    if not dp:
        return np.zeros((n, n), dtype=complex)
    w = model.omegabar
    rows = []
    for i in range(n):
        full = ac_part(resp, float(w[i])) + dc_part(resp, float(w[i]))
        rows.append(_frame_rows(model, full[np.ix_(jp, dp)])[i])
    gamma = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for j in range(i, n):
            wij = 0.5 * (w[i] + w[j])
            h = np.linalg.inv(drive_filter(resp, dp, params, wij)).real
            val = rows[i] @ h @ rows[j].conj()
            if model.route is Route.Z:
                val *= w[i] * w[j]
            gamma[i, j] = val
            gamma[j, i] = np.conj(val)
    if check_psd:
        ev = np.linalg.eigvalsh(gamma)
        tr = max(float(np.trace(gamma).real), 1e-300)
        if ev.min() < -1e-8 * tr:
            warnings.warn(f"decay matrix has eigenvalue {ev.min():.3g} (trace {tr:.3g})", RuntimeWarning, stacklevel=2)
    return gamma


def purcell_rates(gamma: np.ndarray) -> list[float]:
    return [float(g.real) for g in np.diag(gamma)]


def t1_times(gamma: np.ndarray) -> list[float | None]:
    """T1 = 1/gamma_ii in ns, None when the rate vanishes."""
    return [1.0 / g if g > 0 else None for g in purcell_rates(gamma)]


def with_dissipation(
    model: EffectiveModel,
    params: DrivePortParams,
    tones: Sequence[DriveTone] = (),
    line_map: Sequence[int] | None = None,
) -> EffectiveModel:
    """Copy of ``model`` with gamma, drive coefficients and crosstalk filled in."""
    gamma = decay_matrix(model, params)
    meta = dict(model.meta)
    meta["gamma_response"] = "dressed" if model.direct_mode is DirectMode.NUMERIC else "bare"
    meta["z0"] = list(params.z0)
    out = replace(model, gamma=gamma, meta=meta)
    if tones:
        w = tones[0].omega
        alpha = alpha_matrix(model, params, w)
        xt = None
        if line_map is not None:
            xt = crosstalk(alpha, line_map)
        out = replace(out, drives=alpha, drive_frequency=w, crosstalk=xt)
    return out


# ---------------------------------------------------------------------------
# drives


def alpha_matrix(model: EffectiveModel, params: DrivePortParams, omega_d: float) -> np.ndarray:
    """n x n_D coefficients alpha_jd[omega_d]; negative omega_d gives alpha[-omega]."""
    jp, dp = _blocks(model)
    resp = model.response
    n = len(jp)
    w = model.omegabar
    fil_inv = np.linalg.inv(drive_filter(resp, dp, params, omega_d))
    dc = _frame_rows(model, dc_part(resp, omega_d)[np.ix_(jp, dp)])
    alpha = np.zeros((n, len(dp)), dtype=complex)
    for j in range(n):
        ac = _frame_rows(model, ac_part(resp, float(w[j]))[np.ix_(jp, dp)])[j]
        if model.route is Route.Y:
            row = ac + dc[j]
        else:
            row = ac + (omega_d / w[j]) * dc[j]
        alpha[j] = row @ fil_inv
    return alpha


@dataclass(frozen=True)
class DriveAmplitude:
    """eps_jd(t) = sum over tones of c_plus e^{i w t} + c_minus e^{-i w t}."""

    omegas: tuple[float, ...]
    c_plus: tuple[np.ndarray, ...]  # n x n_D per tone
    c_minus: tuple[np.ndarray, ...]

    def __call__(self, t: float) -> np.ndarray:
        """Matrix eps_jd(t) (rad/ns)."""
        out = 0
        for w, cp, cm in zip(self.omegas, self.c_plus, self.c_minus):
            out = out + cp * np.exp(1j * w * t) + cm * np.exp(-1j * w * t)
        return out

    def per_qubit(self, t: float) -> np.ndarray:
        """Total amplitude on each qubit, summed over drive ports."""
        return np.asarray(self(t)).sum(axis=1)

    def rwa(self) -> np.ndarray:
        """Co-rotating coefficient (the one multiplying e^{+i w t}) per qubit, first tone."""
        return self.c_plus[0].sum(axis=1)


def drive_amplitudes(model: EffectiveModel, params: DrivePortParams, tones: Sequence[DriveTone]) -> DriveAmplitude:
    """Two-sideband drive amplitudes for sinusoidal voltages on the drive ports."""
    _, dp = _blocks(model)
    n = model.n
    w = model.omegabar
    omegas, cps, cms = [], [], []
    for tone in tones:
        if not 0 <= tone.port < len(dp):
            raise ImqedError(f"tone port {tone.port} is not a drive port index")
        a_p = alpha_matrix(model, params, tone.omega)[:, tone.port]
        a_m = alpha_matrix(model, params, -tone.omega)[:, tone.port]
        cp = np.zeros((n, len(dp)), dtype=complex)
        cm = np.zeros((n, len(dp)), dtype=complex)
        z0 = params.z0[tone.port]
        if model.route is Route.Y:
            pref = -1j * tone.amplitude / (2 * math.sqrt(2) * z0) / np.sqrt(w)
        else:
            pref = -tone.amplitude / (2 * math.sqrt(2)) * np.sqrt(w)
        pref = pref / math.sqrt(HBAR)
        cp[:, tone.port] = pref * a_p
        cm[:, tone.port] = -pref * a_m
        omegas.append(tone.omega)
        cps.append(cp)
        cms.append(cm)
    return DriveAmplitude(tuple(omegas), tuple(cps), tuple(cms))


def crosstalk(alpha: np.ndarray, line_map: Sequence[int]) -> np.ndarray:
    """X_ij = 20 log10 |alpha_{i d(j)} / alpha_{j d(j)}| in dB with a -300 dB floor."""
    n = alpha.shape[0]
    if len(line_map) != n:
        raise ImqedError("line_map needs one drive line per qubit")
    x = np.zeros((n, n))
    for j in range(n):
        den = abs(alpha[j, line_map[j]])
        if den == 0.0:
            raise ZeroDenominator(f"qubit {j} does not couple to its own line {line_map[j]}")
        for i in range(n):
            num = abs(alpha[i, line_map[j]])
            x[i, j] = CROSSTALK_FLOOR_DB if num == 0.0 else max(20 * math.log10(num / den), CROSSTALK_FLOOR_DB)
    return x


# ---------------------------------------------------------------------------
# Purcell-filter chain: weak-coupling closed forms


def drive_port_rate(omegabar: float, c_total: float, c_jd: float, c_d: float, z0: float) -> float:
    """1/T1 through a capacitively coupled drive line (weak coupling)."""
    return z0 * omegabar**2 * c_jd**2 / (c_total * (1 + z0**2 * omegabar**2 * (c_d + c_jd) ** 2))


def filter_kappa(omega: float, c_k: float, c_p: float, c_d: float, z0: float) -> float:
    """Decay rate of the filter mode into the readout line, probed at ``omega``."""
    return omega**2 * c_k**2 * z0 / (c_p * (1 + omega**2 * z0**2 * (c_d + c_k) ** 2))


def readout_rate(
    omegabar: float,
    *,
    c_j: float,
    c_jr: float,
    c_r: float,
    c_rp: float,
    c_p: float,
    c_k: float,
    c_d: float,
    omega_r: float,
    omega_f: float,
    z0: float,
) -> float:
    """1/T1 through the resonator and Purcell filter into the readout line (weak coupling)."""
    w = omegabar
    num = z0 * c_rp**2 * c_jr**2 * c_k**2 * w**10
    den = (1 + w**2 * (c_d + c_k) ** 2 * z0**2) * c_j * c_p**2 * c_r**2 * (omega_r**2 - w**2) ** 2 * (omega_f**2 - w**2) ** 2
    return num / den


def loaded_chain_parameters(
    l_r: float, c_r: float, l_p: float, c_p: float, c_jr: float, c_rp: float, c_k: float
) -> dict[str, float]:
    """Node-loaded resonator and filter values for :func:`readout_rate`.

    The weak-coupling formula wants each island's total capacitance to ground
    with the coupling capacitors included, and the frequencies that follow from
    it.  Feeding the bare LC values instead leaves a ~14% error on the
    Purcell-chain example because C_k is a few percent of C_p.
    """
    cr = c_r + c_jr + c_rp
    cp = c_p + c_rp + c_k
    return {
        "c_r": cr,
        "c_p": cp,
        "omega_r": 1.0 / np.sqrt(l_r * cr),
        "omega_f": 1.0 / np.sqrt(l_p * cp),
    }


def check_psd(gamma: np.ndarray, tol: float = 1e-8) -> None:
    ev = np.linalg.eigvalsh(0.5 * (gamma + gamma.conj().T))
    tr = max(float(np.trace(gamma).real), 1e-300)
    if ev.min() < -tol * tr:
        raise Nonphysical(f"decay matrix not positive semidefinite: {ev.min():.3g}")


def z0_map(model: EffectiveModel, z0: float | Mapping[int, float]) -> DrivePortParams:
    n = len(model.drive_ports)
    if isinstance(z0, Mapping):
        return DrivePortParams(tuple(float(z0[k]) for k in range(n)))
    return DrivePortParams.uniform(float(z0), n)


def port_resolved_rates(model: EffectiveModel, params: DrivePortParams) -> np.ndarray:
    """Diagonal decay rate of each qubit split by drive port (n x n_D).

    Exact decomposition of gamma_ii when Y^drive (Z^drive) is diagonal, i.e.
    when the drive ports have no dc coupling among themselves.
    """
    jp, dp = _blocks(model)
    resp = model.response
    w = model.omegabar
    out = np.zeros((len(jp), len(dp)))
    for i in range(len(jp)):
        full = ac_part(resp, float(w[i])) + dc_part(resp, float(w[i]))
        row = _frame_rows(model, full[np.ix_(jp, dp)])[i]
        h = np.linalg.inv(drive_filter(resp, dp, params, float(w[i]))).real
        scale = w[i] ** 2 if model.route is Route.Z else 1.0
        out[i] = scale * np.abs(row) ** 2 * np.diag(h)
    return out
