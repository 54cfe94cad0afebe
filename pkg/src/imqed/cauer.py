"""Canonical Cauer synthesis of lossless pole-residue responses.

Every finite pole is realized by one section.  A reciprocal pole needs a
single transformer ratio vector r (residue r r^T); a nonreciprocal pole needs
a gyrator section with two ratio vectors (n_L, n_R) and a gyration frequency
omega_g:

    res_sym  = n_L n_L^T + n_R n_R^T
    res_anti = omega_g (n_R n_L^T - n_L n_R^T)      (impedance orientation)
    res_anti = omega_g (n_L n_R^T - n_R n_L^T)      (admittance orientation)

The dc stages are eigen-decompositions of the dc matrices.  The
antisymmetric dc term E_inf of an admittance is carried through unchanged;
no gyrator realization is attempted for it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateResidue, SingularDcResidue
from .immittance import Kind, Pole, PoleResidueResponse, is_reciprocal

RANK_TOL = 1e-10


@dataclass(frozen=True)
class DcStage:
    """Orthogonal transformer ``rot`` and diagonal element values.

    For the capacitive stage ``values`` are the capacitances C-bar; for the
    inductive stage they are inverse inductances (zero means open).
    """

    rot: np.ndarray
    values: np.ndarray


@dataclass(frozen=True)
class ReciprocalSection:
    omega: float
    ratio: np.ndarray

    def elements(self, kind: Kind) -> dict:
        w2 = self.omega**2
        if kind is Kind.IMPEDANCE:
            return {"C": 1.0, "L": 1.0 / w2}
        return {"L": 1.0, "C": 1.0 / w2}


@dataclass(frozen=True)
class GyratorSection:
    omega: float
    n_left: np.ndarray
    n_right: np.ndarray
    omega_g: float

    def elements(self, kind: Kind) -> dict:
        if kind is Kind.IMPEDANCE:
            return {"C": 1.0, "R": 1.0 / self.omega_g}
        return {"L": 1.0, "C": 1.0 / self.omega**2, "R": self.omega_g}


@dataclass(frozen=True)
class CauerSynthesis:
    kind: Kind
    n_ports: int
    cap_stage: DcStage | None
    ind_stage: DcStage | None
    nr_dc: np.ndarray
    reciprocal_stage: tuple[ReciprocalSection, ...] = ()
    nonreciprocal_stage: tuple[GyratorSection, ...] = field(default_factory=tuple)


def _sign_fix(v: np.ndarray) -> np.ndarray:
    """Make the entry of largest magnitude positive (deterministic gauge)."""
    k = int(np.argmax(np.abs(v)))
    return -v if v[k] < 0 else v


def _eig_stage(m: np.ndarray) -> DcStage:
    w, v = np.linalg.eigh(0.5 * (m + m.T))
    v = np.column_stack([_sign_fix(v[:, k]) for k in range(v.shape[1])])
    scale = max(np.max(np.abs(w)), 1e-300)
    w = np.where(np.abs(w) < RANK_TOL * scale, 0.0, w)
    return DcStage(v, w)


def _rank(ev: np.ndarray) -> int:
    top = np.max(np.abs(ev)) if ev.size else 0.0
    if top == 0.0:
        return 0
    return int(np.sum(np.abs(ev) > RANK_TOL * top))


def _antisym(kind: Kind, n_l, n_r, omega_g) -> np.ndarray:
    if kind is Kind.IMPEDANCE:
        return omega_g * (np.outer(n_r, n_l) - np.outer(n_l, n_r))
    return omega_g * (np.outer(n_l, n_r) - np.outer(n_r, n_l))


def _gyrator_section(kind: Kind, pole: Pole) -> GyratorSection:
    """Rank-1 Hermitian factorization of the pole residue.

    The complex residue K = A/2 - i B/(2w) of a simple lossless mode is
    Hermitian of rank one, K = u u^dagger.  Writing u = x + i y with the
    phase chosen so that x is orthogonal to y, sqrt(2) x and sqrt(2) y are
    the eigenvector ratios of A.  This also handles the case where the two
    eigenvalues of A coincide, in which the eigenvectors of A alone do not
    determine the section.
    """
    herm = 0.5 * pole.res_sym - 0.5j * pole.res_anti / pole.omega
    herm = 0.5 * (herm + herm.conj().T)
    ev, vecs = np.linalg.eigh(herm)
    if _rank(ev) != 1 or ev[-1] <= 0:
        raise DegenerateResidue(
            f"pole at {pole.omega:.9g} rad/ns: residue is not a single mode "
            f"(eigenvalues {np.round(ev / max(abs(ev).max(), 1e-300), 12)})"
        )
    sym_ev = np.linalg.eigvalsh(pole.res_sym)
    if _rank(sym_ev) != 2:
        raise DegenerateResidue(f"nonreciprocal pole at {pole.omega:.9g} rad/ns needs a rank-2 symmetric residue")
    u = np.sqrt(ev[-1]) * vecs[:, -1]
    z = u @ u
    if abs(z) > 1e-9 * np.vdot(u, u).real:
        u = u * np.sqrt(np.conj(z) / abs(z))
    else:
        k = int(np.argmax(np.abs(u)))
        u = u * np.conj(u[k]) / abs(u[k])
    x, y = np.sqrt(2.0) * u.real, np.sqrt(2.0) * u.imag
    if kind is Kind.IMPEDANCE:
        n_r, n_l = _sign_fix(x), _sign_fix(y)
    else:
        n_l, n_r = _sign_fix(x), _sign_fix(y)
    basis = _antisym(kind, n_l, n_r, 1.0)
    omega_g = float(np.sum(basis * pole.res_anti) / np.sum(basis * basis))
    if omega_g < 0:
        n_l, n_r = n_r, n_l
        omega_g = -omega_g
    return GyratorSection(pole.omega, n_l, n_r, omega_g)


def synthesize(resp: PoleResidueResponse) -> CauerSynthesis:
    kind = resp.kind
    if kind is Kind.IMPEDANCE:
        a0 = resp.ind_dc
        ev = np.linalg.eigvalsh(a0)
        if _rank(ev) < resp.n_ports:
            raise SingularDcResidue(
                "A_0 singular: use admittance route (direct inductive coupling "
                "between ports cannot be synthesized from the impedance)"
            )
        st = _eig_stage(a0)
        cap_stage = DcStage(st.rot, 1.0 / st.values)  # C-bar from 1/eigenvalues of A_0
        ind_stage = None
    else:
        cap_stage = _eig_stage(resp.cap_dc)
        ind_stage = _eig_stage(resp.ind_dc)
    rec: list[ReciprocalSection] = []
    nonrec: list[GyratorSection] = []
    for p in resp.ac_poles:
        if is_reciprocal(p):
            ev, vecs = np.linalg.eigh(p.res_sym)
            if _rank(ev) != 1 or ev[-1] <= 0:
                raise DegenerateResidue(f"reciprocal pole at {p.omega:.9g} rad/ns is not rank one")
            rec.append(ReciprocalSection(p.omega, _sign_fix(np.sqrt(ev[-1]) * vecs[:, -1])))
        else:
            nonrec.append(_gyrator_section(kind, p))
    return CauerSynthesis(kind, resp.n_ports, cap_stage, ind_stage, resp.nr_dc.copy(), tuple(rec), tuple(nonrec))


def reconstruct(syn: CauerSynthesis) -> PoleResidueResponse:
    n = syn.n_ports
    zero = np.zeros((n, n))
    poles = []
    for s in syn.reciprocal_stage:
        poles.append(Pole(s.omega, np.outer(s.ratio, s.ratio), zero))
    for g in syn.nonreciprocal_stage:
        sym = np.outer(g.n_left, g.n_left) + np.outer(g.n_right, g.n_right)
        poles.append(Pole(g.omega, sym, _antisym(syn.kind, g.n_left, g.n_right, g.omega_g)))
    poles.sort(key=lambda p: p.omega)
    if syn.kind is Kind.IMPEDANCE:
        st = syn.cap_stage
        a0 = zero if st is None else st.rot @ np.diag(1.0 / st.values) @ st.rot.T
        return PoleResidueResponse(Kind.IMPEDANCE, n, a0, ac_poles=tuple(poles))
    cap = zero if syn.cap_stage is None else syn.cap_stage.rot @ np.diag(syn.cap_stage.values) @ syn.cap_stage.rot.T
    ind = zero if syn.ind_stage is None else syn.ind_stage.rot @ np.diag(syn.ind_stage.values) @ syn.ind_stage.rot.T
    return PoleResidueResponse(Kind.ADMITTANCE, n, ind, cap, syn.nr_dc, tuple(poles))


def to_json(syn: CauerSynthesis) -> dict:
    def stage(st: DcStage | None):
        if st is None:
            return None
        return {"rot": st.rot.tolist(), "values": st.values.tolist()}

    return {
        "schema": "cauer.v1",
        "kind": syn.kind.value,
        "n_ports": syn.n_ports,
        "cap_stage": stage(syn.cap_stage),
        "ind_stage": stage(syn.ind_stage),
        "nr_dc_unsynthesized": syn.nr_dc.tolist(),
        "reciprocal_stage": [
            {"omega": s.omega, "ratio": s.ratio.tolist(), "elements": s.elements(syn.kind)}
            for s in syn.reciprocal_stage
        ],
        "nonreciprocal_stage": [
            {
                "omega": g.omega,
                "n_L": g.n_left.tolist(),
                "n_R": g.n_right.tolist(),
                "omega_g": g.omega_g,
                "elements": g.elements(syn.kind),
            }
            for g in syn.nonreciprocal_stage
        ],
    }
