"""Lossless multiport immittances in pole-residue form.

An admittance is stored as

    Y(s) = D0/s + s*Dinf + Einf + sum_b (D_b s + E_b) / (w_b^2 + s^2)

and an impedance as

    Z(s) = A0/s + sum_b (A_b s + B_b) / (w_b^2 + s^2).

Symmetric matrices (D, A) carry the reciprocal response and antisymmetric
matrices (E, B) the nonreciprocal one.  All quantities use the internal unit
system of :mod:`imqed.units` (rad/ns, nF, nH, ohm).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    DegeneratePole,
    HigherOrderPole,
    ImqedError,
    NonFinite,
    NotAPole,
    PoleProximity,
    SingularConversion,
)
from .units import TWO_PI

POLE_GUARD = 1e-6
MIN_POLE_GAP = 1e-9
PSD_TOL = 1e-10
RECIPROCAL_TOL = 1e-10
SYM_TOL = 1e-10


class Kind(str, enum.Enum):
    ADMITTANCE = "Admittance"
    IMPEDANCE = "Impedance"


@dataclass(frozen=True)
class Pole:
    """A finite-frequency pole pair at s = +-i*omega."""

    omega: float
    res_sym: np.ndarray
    res_anti: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "res_sym", np.array(self.res_sym, dtype=float))
        object.__setattr__(self, "res_anti", np.array(self.res_anti, dtype=float))
        self.res_sym.setflags(write=False)
        self.res_anti.setflags(write=False)

    @property
    def reciprocal(self) -> bool:
        return is_reciprocal(self)


def is_reciprocal(pole: Pole, tol: float = RECIPROCAL_TOL) -> bool:
    """True when the antisymmetric residue is negligible against the symmetric one."""
    scale = np.linalg.norm(pole.res_sym)
    return bool(np.linalg.norm(pole.res_anti) <= tol * max(scale, 1e-300))


def _frozen(m) -> np.ndarray:
    a = np.array(m, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PoleResidueResponse:
    """Immutable pole-residue description of Y(s) or Z(s).

    ``cap_dc`` is D_inf (admittance only, zero for impedances), ``ind_dc`` is
    D_0 or A_0 and ``nr_dc`` is E_inf (forced zero for impedances).
    """

    kind: Kind
    n_ports: int
    ind_dc: np.ndarray
    cap_dc: np.ndarray | None = None
    nr_dc: np.ndarray | None = None
    ac_poles: tuple[Pole, ...] = ()
    min_gap: float = MIN_POLE_GAP

    def __post_init__(self):
        n = int(self.n_ports)
        if n <= 0:
            raise ImqedError("n_ports must be positive")
        kind = Kind(self.kind)
        object.__setattr__(self, "kind", kind)
        zeros = np.zeros((n, n))
        ind = _frozen(self.ind_dc)
        cap = _frozen(zeros if self.cap_dc is None else self.cap_dc)
        nr = _frozen(zeros if self.nr_dc is None else self.nr_dc)
        for name, m in (("ind_dc", ind), ("cap_dc", cap), ("nr_dc", nr)):
            if m.shape != (n, n):
                raise ImqedError(f"{name} has shape {m.shape}, expected {(n, n)}")
        if kind is Kind.IMPEDANCE:
            if np.any(nr != 0.0):
                raise ImqedError("impedance responses carry no antisymmetric dc term")
            if np.any(cap != 0.0):
                raise ImqedError("impedance responses have no pole at infinity")
        object.__setattr__(self, "ind_dc", ind)
        object.__setattr__(self, "cap_dc", cap)
        object.__setattr__(self, "nr_dc", nr)
        poles = tuple(p if isinstance(p, Pole) else Pole(**p) for p in self.ac_poles)
        for p in poles:
            if p.res_sym.shape != (n, n) or p.res_anti.shape != (n, n):
                raise ImqedError("residue shape does not match n_ports")
            if not p.omega > 0.0 or not np.isfinite(p.omega):
                raise ImqedError(f"pole frequency must be positive, got {p.omega}")
        for a, b in zip(poles, poles[1:]):
            if b.omega <= a.omega:
                raise ImqedError("pole frequencies must be strictly increasing")
            if b.omega - a.omega < self.min_gap * b.omega:
                raise DegeneratePole(
                    f"poles at {a.omega:.12g} and {b.omega:.12g} rad/ns are closer "
                    "than the minimum gap; degenerate poles are not merged"
                )
        object.__setattr__(self, "ac_poles", poles)

    @property
    def is_admittance(self) -> bool:
        return self.kind is Kind.ADMITTANCE

    def with_poles(self, poles: Sequence[Pole]) -> "PoleResidueResponse":
        return PoleResidueResponse(
            self.kind, self.n_ports, self.ind_dc, self.cap_dc, self.nr_dc, tuple(poles), self.min_gap
        )

    def restrict(self, ports: Sequence[int]) -> "PoleResidueResponse":
        """Sub-block of the response on the given port indices."""
        ix = np.ix_(list(ports), list(ports))
        poles = [Pole(p.omega, p.res_sym[ix], p.res_anti[ix]) for p in self.ac_poles]
        return PoleResidueResponse(
            self.kind,
            len(ports),
            self.ind_dc[ix],
            self.cap_dc[ix] if self.is_admittance else None,
            self.nr_dc[ix] if self.is_admittance else None,
            tuple(poles),
            self.min_gap,
        )


def _check_guard(resp: PoleResidueResponse, omega: float, guard: float) -> None:
    for p in resp.ac_poles:
        if abs(omega - p.omega) < guard * p.omega:
            raise PoleProximity(
                f"omega={omega:.10g} rad/ns is within {guard:g} (relative) of the pole "
                f"at {p.omega:.10g} rad/ns"
            )


def dc_part(resp: PoleResidueResponse, omega: float) -> np.ndarray:
    """Sum of the poles at zero and infinity evaluated at s = i*omega."""
    s = 1j * omega
    out = resp.nr_dc.astype(complex) + s * resp.cap_dc
    if np.any(resp.ind_dc != 0.0):
        if omega == 0.0:
            raise NonFinite("dc pole evaluated at omega = 0")
        out = out + resp.ind_dc / s
    return out


def ac_part(resp: PoleResidueResponse, omega: float, guard: float = POLE_GUARD) -> np.ndarray:
    _check_guard(resp, omega, guard)
    s = 1j * omega
    out = np.zeros((resp.n_ports, resp.n_ports), dtype=complex)
    for p in resp.ac_poles:
        out += (p.res_sym * s + p.res_anti) / (p.omega**2 - omega**2)
    return out


def evaluate(resp: PoleResidueResponse, omega: float, guard: float = POLE_GUARD) -> np.ndarray:
    """Evaluate the response at s = i*omega (omega >= 0, rad/ns)."""
    if omega < 0.0:
        raise ImqedError("omega must be non-negative")
    out = dc_part(resp, omega) + ac_part(resp, omega, guard)
    if not np.all(np.isfinite(out)):
        raise NonFinite(f"non-finite response at omega={omega}")
    return out


def _sym(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def _anti(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m - m.T)


@dataclass(frozen=True)
class ResponseParts:
    """Component functions of a response, each mapping omega to an n x n matrix."""

    resp: PoleResidueResponse
    guard: float = POLE_GUARD

    def dc(self, omega: float) -> np.ndarray:
        return dc_part(self.resp, omega)

    def ac(self, omega: float) -> np.ndarray:
        return ac_part(self.resp, omega, self.guard)

    def full(self, omega: float) -> np.ndarray:
        return evaluate(self.resp, omega, self.guard)

    def reciprocal(self, omega: float) -> np.ndarray:
        return _sym(self.full(omega))

    def nonreciprocal(self, omega: float) -> np.ndarray:
        return _anti(self.full(omega))

    def ac_reciprocal(self, omega: float) -> np.ndarray:
        return _sym(self.ac(omega))

    def ac_nonreciprocal(self, omega: float) -> np.ndarray:
        return _anti(self.ac(omega))

    def dc_reciprocal(self, omega: float) -> np.ndarray:
        return _sym(self.dc(omega))

    def dc_nonreciprocal(self, omega: float) -> np.ndarray:
        return _anti(self.dc(omega))

    def sigma(self, omega: float) -> np.ndarray:
        """Response without its reciprocal dc part: ac,R + NR (incl. E_inf)."""
        return self.ac_reciprocal(omega) + self.nonreciprocal(omega)


def split(resp: PoleResidueResponse, guard: float = POLE_GUARD) -> ResponseParts:
    return ResponseParts(resp, guard)


# ---------------------------------------------------------------------------
# residues


RESIDUE_OFFSETS = (1e-3, 3e-4, 1e-4, 3e-5, 1e-5, 3e-6, 1e-6, 3e-7, 1e-7)


def residue_at(
    evaluator: Callable[[float], np.ndarray],
    omega0: float,
    offsets: Sequence[float] = RESIDUE_OFFSETS,
    conv_tol: float = 1e-4,
    zero_tol: float = 1e-9,
):
    """Residue lim_{s -> i w0} (s - i w0) F(s) of ``evaluator(omega) = F(i omega)``.

    The product g(d) = i d F(w0 + d) is averaged over +-d, which cancels the
    odd powers of d.  The remaining series in d^2 is extrapolated to d = 0
    with a Neville table (repeated order-2 Richardson steps).  The estimate
    whose neighbour in the table differs least is returned, which balances
    truncation error at large offsets against round-off at small ones.
    """
    if omega0 <= 0:
        raise ImqedError("omega0 must be positive")
    deltas = [o * omega0 for o in offsets]
    evens, odds = [], []
    for d in deltas:
        gp = 1j * d * np.asarray(evaluator(omega0 + d), dtype=complex)
        gm = -1j * d * np.asarray(evaluator(omega0 - d), dtype=complex)
        evens.append(0.5 * (gp + gm))
        odds.append(0.5 * (gp - gm))
    h2 = [d * d for d in deltas]
    n = len(deltas)
    table = [list(evens)]
    for level in range(1, min(n, 4)):
        prev = table[-1]
        row = []
        for k in range(n - level):
            a, b = h2[k], h2[k + level]
            row.append((a * prev[k + 1] - b * prev[k]) / (a - b))
        table.append(row)
    best, best_diff = None, np.inf
    for row in table[1:]:
        for k in range(len(row) - 1):
            diff = np.linalg.norm(np.atleast_1d(row[k + 1] - row[k]))
            if diff < best_diff:
                best, best_diff = 0.5 * (row[k] + row[k + 1]), diff
    res = best
    res_norm = np.linalg.norm(np.atleast_1d(res))

    far = 0.5 * (
        np.linalg.norm(np.atleast_1d(evaluator(1.01 * omega0)))
        + np.linalg.norm(np.atleast_1d(evaluator(0.99 * omega0)))
    )
    # A double pole shows up as an odd part growing like 1/d.
    odd_first = np.linalg.norm(np.atleast_1d(odds[0]))
    odd_last = np.linalg.norm(np.atleast_1d(odds[-1]))
    if odd_last > 10.0 * odd_first and odd_last > 1e-3 * max(res_norm, far * deltas[-1]):
        raise HigherOrderPole(f"response behaves like a higher-order pole at {omega0:.10g}")
    # |F| near a pole of residue R is about |R| / (0.01 w0); compare against it.
    if res_norm == 0.0 or res_norm < zero_tol * 0.01 * omega0 * far:
        raise NotAPole(f"no pole at omega={omega0:.10g} rad/ns (|Res|={res_norm:.3g})")
    if best_diff > conv_tol * res_norm:
        raise HigherOrderPole(
            f"residue extrapolation did not converge at {omega0:.10g} "
            f"(spread {best_diff / res_norm:.2e})"
        )
    return res


def pole_from_residue(res: np.ndarray, omega0: float, symmetrize: bool = True) -> Pole:
    """Convert a complex residue at i*omega0 into (A, B) = (2 Re Res, -2 w Im Res)."""
    a = 2.0 * np.real(res)
    b = -2.0 * omega0 * np.imag(res)
    if symmetrize:
        a, b = _sym(a), _anti(b)
    return Pole(omega0, a, b)


def pole_residue(pole: Pole) -> np.ndarray:
    """Complex residue of the pole at +i*omega: A/2 - i B / (2 omega)."""
    return 0.5 * pole.res_sym - 0.5j * pole.res_anti / pole.omega


# ---------------------------------------------------------------------------
# conversions


def inverse_at(resp: PoleResidueResponse, omega: float) -> np.ndarray:
    m = evaluate(resp, omega)
    if np.linalg.cond(m) > 1e14:
        raise SingularConversion(f"response not invertible at omega={omega:.6g}")
    return np.linalg.inv(m)


def scattering(imp: PoleResidueResponse, r0: float, omega: float) -> np.ndarray:
    """S = (Z + r0)^-1 (Z - r0); admittances are inverted first."""
    z = evaluate(imp, omega) if imp.kind is Kind.IMPEDANCE else inverse_at(imp, omega)
    eye = np.eye(imp.n_ports)
    lhs = z + r0 * eye
    if np.linalg.cond(lhs) > 1e14:
        raise SingularConversion("Z + r0 is singular")
    return np.linalg.solve(lhs, z - r0 * eye)


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    what: str
    magnitude: float
    where: str = ""

    def __str__(self) -> str:
        loc = f" [{self.where}]" if self.where else ""
        return f"{self.what}{loc}: {self.magnitude:.3e}"


def _psd_violation(m: np.ndarray, tol: float = PSD_TOL) -> float:
    """How far below -tol*trace the smallest eigenvalue sits (0 when fine)."""
    if m.size == 0:
        return 0.0
    ev = np.linalg.eigvalsh(_sym(m))
    scale = max(abs(np.trace(m)), np.max(np.abs(ev)), 1e-300)
    return float(max(0.0, -ev.min() - tol * scale))


def validate(resp: PoleResidueResponse) -> list[Violation]:
    """Report (never raise) every violated invariant."""
    out: list[Violation] = []

    def rel(x, y):
        return float(np.linalg.norm(x) / max(np.linalg.norm(y), 1e-300))

    mats = [("ind_dc", resp.ind_dc), ("cap_dc", resp.cap_dc)]
    for name, m in mats:
        if not np.all(np.isfinite(m)):
            out.append(Violation("non-finite entries", np.inf, name))
            continue
        if rel(m - m.T, m) > SYM_TOL:
            out.append(Violation("dc matrix not symmetric", rel(m - m.T, m), name))
        v = _psd_violation(m)
        if v > 0:
            out.append(Violation("dc matrix not PSD", v, name))
    if rel(resp.nr_dc + resp.nr_dc.T, resp.nr_dc) > SYM_TOL:
        out.append(Violation("nr_dc not antisymmetric", rel(resp.nr_dc + resp.nr_dc.T, resp.nr_dc), "nr_dc"))
    for k, p in enumerate(resp.ac_poles):
        where = f"pole {k} @ {p.omega / TWO_PI:.6g} GHz"
        if not (np.all(np.isfinite(p.res_sym)) and np.all(np.isfinite(p.res_anti))):
            out.append(Violation("non-finite residue", np.inf, where))
            continue
        if rel(p.res_sym - p.res_sym.T, p.res_sym) > SYM_TOL:
            out.append(Violation("res_sym not symmetric", rel(p.res_sym - p.res_sym.T, p.res_sym), where))
        if np.linalg.norm(p.res_anti) > 0 and rel(p.res_anti + p.res_anti.T, p.res_anti) > SYM_TOL:
            out.append(Violation("res_anti not antisymmetric", rel(p.res_anti + p.res_anti.T, p.res_anti), where))
        v = _psd_violation(p.res_sym)
        if v > 0:
            out.append(Violation("residue not PSD", v, where))
    return out


def classify_poles(resp: PoleResidueResponse, tol: float = RECIPROCAL_TOL) -> list[bool]:
    """Reciprocal flag for each ac pole."""
    return [is_reciprocal(p, tol) for p in resp.ac_poles]


# ---------------------------------------------------------------------------
# JSON (response.v1)


def units_header(kind: Kind) -> dict:
    if kind is Kind.ADMITTANCE:
        return {
            "omega": "GHz (ordinary frequency, omega/2pi)",
            "cap_dc": "nF",
            "ind_dc": "1/nH",
            "nr_dc": "S",
            "res_sym": "1/nH",
            "res_anti": "S*(rad/ns)^2",
        }
    return {
        "omega": "GHz (ordinary frequency, omega/2pi)",
        "cap_dc": "unused",
        "ind_dc": "1/nF",
        "nr_dc": "unused (zero)",
        "res_sym": "1/nF",
        "res_anti": "ohm*(rad/ns)^2",
    }


def to_json(resp: PoleResidueResponse) -> dict:
    return {
        "schema": "response.v1",
        "kind": resp.kind.value,
        "n_ports": resp.n_ports,
        "units": units_header(resp.kind),
        "cap_dc": resp.cap_dc.tolist(),
        "ind_dc": resp.ind_dc.tolist(),
        "nr_dc": resp.nr_dc.tolist(),
        "poles": [
            {
                "omega_ghz": p.omega / TWO_PI,
                "res_sym": p.res_sym.tolist(),
                "res_anti": p.res_anti.tolist(),
            }
            for p in resp.ac_poles
        ],
    }


def from_json(data: dict) -> PoleResidueResponse:
    if "units" not in data:
        raise ImqedError("response.v1 requires a 'units' header")
    kind = Kind(data["kind"])
    n = int(data["n_ports"])
    poles = tuple(
        Pole(TWO_PI * float(p["omega_ghz"]), np.array(p["res_sym"]), np.array(p["res_anti"]))
        for p in data.get("poles", [])
    )
    adm = kind is Kind.ADMITTANCE
    return PoleResidueResponse(
        kind,
        n,
        np.array(data["ind_dc"], dtype=float),
        np.array(data["cap_dc"], dtype=float) if adm else None,
        np.array(data["nr_dc"], dtype=float) if adm else None,
        poles,
    )
