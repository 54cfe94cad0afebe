"""Quadratic phase-space forms, symplectic maps and Schrieffer-Wolff.

A quadratic Hamiltonian is H = X^T h X / 2 with Poisson structure given by
``j_form``; the equations of motion are dX/dt = J h X.  Coordinates are
grouped in sectors, each laid out as (x_1..x_n, p_1..p_n), and J is block
diagonal over the sectors.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .errors import NotBlockStructured, PerturbativeWarning, ResonantPair, UnstableSystem

SYMPLECTIC_TOL = 1e-10
RESONANCE_TOL = 1e-9
PERTURBATIVE_WARN = 0.3
SECTOR_TAGS = ("qubit", "reciprocal-inner", "nonreciprocal-inner", "nondynamical", "A", "B", "circuit")


def canonical_j(n_pairs: int) -> np.ndarray:
    """J = [[0, 1], [-1, 0]] for one sector of n conjugate pairs."""
    eye = np.eye(n_pairs)
    zero = np.zeros((n_pairs, n_pairs))
    return np.block([[zero, eye], [-eye, zero]])


@dataclass(frozen=True)
class Sector:
    tag: str
    n_pairs: int
    labels: tuple[str, ...] = ()


@dataclass(frozen=True)
class QuadraticSystem:
    h: np.ndarray
    sectors: tuple[Sector, ...]
    j_form: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        h = np.array(self.h, dtype=float)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise NotBlockStructured("h must be square")
        if np.linalg.norm(h - h.T) > 1e-12 * max(np.linalg.norm(h), 1e-300):
            raise NotBlockStructured("h must be symmetric")
        dim = 2 * sum(s.n_pairs for s in self.sectors)
        if dim != h.shape[0]:
            raise NotBlockStructured(f"sectors cover {dim} coordinates, h has {h.shape[0]}")
        h = 0.5 * (h + h.T)
        h.setflags(write=False)
        object.__setattr__(self, "h", h)
        j = sla.block_diag(*[canonical_j(s.n_pairs) for s in self.sectors]) if self.sectors else np.zeros((0, 0))
        if self.j_form is not None and not np.allclose(self.j_form, j):
            raise NotBlockStructured("j_form does not match the sector layout")
        j.setflags(write=False)
        object.__setattr__(self, "j_form", j)

    @property
    def dim(self) -> int:
        return self.h.shape[0]

    def offsets(self) -> list[int]:
        out, k = [], 0
        for s in self.sectors:
            out.append(k)
            k += 2 * s.n_pairs
        return out

    def sector_slice(self, index: int) -> slice:
        o = self.offsets()[index]
        return slice(o, o + 2 * self.sectors[index].n_pairs)

    def labels(self) -> list[str]:
        out = []
        for s in self.sectors:
            if s.labels and len(s.labels) == 2 * s.n_pairs:
                out += list(s.labels)
            else:
                out += [f"{s.tag}.x{k}" for k in range(s.n_pairs)] + [f"{s.tag}.p{k}" for k in range(s.n_pairs)]
        return out


def two_sector_system(h: np.ndarray, n_a: int, n_b: int) -> QuadraticSystem:
    return QuadraticSystem(h, (Sector("A", n_a), Sector("B", n_b)))


@dataclass(frozen=True)
class SymplecticMap:
    s: np.ndarray
    generator: np.ndarray | None = None

    def defect(self, j: np.ndarray) -> float:
        """||S J S^T - J|| / ||J||."""
        return float(np.linalg.norm(self.s @ j @ self.s.T - j) / np.linalg.norm(j))

    def apply(self, h: np.ndarray) -> np.ndarray:
        """Quadratic form in the new coordinates X~ = S X: S^-T h S^-1."""
        si = np.linalg.inv(self.s)
        return si.T @ h @ si


def map_from_generator(a: np.ndarray, j: np.ndarray) -> SymplecticMap:
    """S = exp(A J) for a symmetric generator A."""
    a = 0.5 * (a + a.T)
    return SymplecticMap(sla.expm(a @ j), a)


# ---------------------------------------------------------------------------
# transpose anticommutator


def t_anticommutator(d: np.ndarray, b: np.ndarray) -> np.ndarray:
    """{D, B}_T = D B + B^T D^T."""
    return d @ b + b.T @ d.T


def nested_anticommutator(d: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    out = b
    for _ in range(n):
        out = t_anticommutator(d, out)
    return out


def anticommutator_series(h: np.ndarray, a_gen: np.ndarray, order: int, j: np.ndarray | None = None) -> np.ndarray:
    """sum_{n <= order} {JA, H}_T^(n) / n!  (the transform exp(JA) H exp(-AJ))."""
    if order < 1:
        raise ValueError("order must be >= 1")
    if j is None:
        j = canonical_j(h.shape[0] // 2)
    d = j @ a_gen
    out = np.array(h, dtype=float)
    term = np.array(h, dtype=float)
    for n in range(1, order + 1):
        term = t_anticommutator(d, term) / n
        out = out + term
    return out


# ---------------------------------------------------------------------------
# first-order generator


@dataclass(frozen=True)
class BlockSplit:
    """H = H0 + H'_D + H_ND with respect to a two-sector split."""

    h0: np.ndarray
    hd: np.ndarray
    hnd: np.ndarray
    n_a: int
    n_b: int

    @property
    def k_block(self) -> np.ndarray:
        return self.hnd[: 2 * self.n_a, 2 * self.n_a :]


def block_split(h: np.ndarray, n_a: int) -> BlockSplit:
    h = np.asarray(h, dtype=float)
    na2 = 2 * n_a
    n_b = h.shape[0] // 2 - n_a
    diag_blocks = np.zeros_like(h)
    diag_blocks[:na2, :na2] = h[:na2, :na2]
    diag_blocks[na2:, na2:] = h[na2:, na2:]
    h0 = np.diag(np.diag(h))
    return BlockSplit(h0, diag_blocks - h0, h - diag_blocks, n_a, n_b)


def _theta(wa_x, wa_p, wb_x, wb_p):
    return np.outer(wa_x * wa_p, np.ones_like(wb_x)) - np.outer(np.ones_like(wa_x), wb_x * wb_p)


def _check_resonance(theta: np.ndarray, wa2: np.ndarray, wb2: np.ndarray) -> None:
    scale = np.maximum.outer(np.abs(wa2), np.abs(wb2))
    bad = np.argwhere(np.abs(theta) < RESONANCE_TOL * scale)
    if bad.size:
        a, b = (int(v) for v in bad[0])
        raise ResonantPair(f"sector modes A{a} and B{b} are resonant (Theta = {theta[a, b]:.3g})", (a, b))


def perturbative_ratio(split: BlockSplit) -> float:
    """k / Delta_ab: largest entry of H - H0 over the smallest bare gap."""
    d = np.diag(split.h0)
    na, nb = split.n_a, split.n_b
    wa = np.sqrt(np.abs(d[:na] * d[na : 2 * na]))
    wb = np.sqrt(np.abs(d[2 * na : 2 * na + nb] * d[2 * na + nb :]))
    if na == 0 or nb == 0:
        return 0.0
    gap = np.min(np.abs(np.subtract.outer(wa, wb)))
    k = np.max(np.abs(split.hd + split.hnd))
    return float(k / gap) if gap > 0 else math.inf


def sw_generator(h0_diag: np.ndarray, k_block: np.ndarray, n_a: int, warn: bool = True) -> SymplecticMap:
    """First-order generator A^(1) solving {JA, H0}_T = -H_ND in closed form.

    ``h0_diag`` holds the diagonal of H0 in the layout (x_a, p_a, x_b, p_b);
    ``k_block`` is the 2n_a x 2n_b coupling block H_AB.
    """
    d = np.asarray(h0_diag, dtype=float)
    k = np.asarray(k_block, dtype=float)
    na = n_a
    nb = d.size // 2 - na
    if k.shape != (2 * na, 2 * nb):
        raise NotBlockStructured(f"coupling block has shape {k.shape}, expected {(2 * na, 2 * nb)}")
    wax, wap = d[:na], d[na : 2 * na]
    wbx, wbp = d[2 * na : 2 * na + nb], d[2 * na + nb :]
    theta = _theta(wax, wap, wbx, wbp)
    _check_resonance(theta, wax * wap, wbx * wbp)
    kxx, kxp = k[:na, :nb], k[:na, nb:]
    kpx, kpp = k[na:, :nb], k[na:, nb:]
    ax = wax[:, None]
    apa = wap[:, None]
    bx = wbx[None, :]
    bp = wbp[None, :]
    a_xx = (apa * kxp - bp * kpx) / theta
    a_xp = (-apa * kxx - bx * kpp) / theta
    a_px = (ax * kpp + bp * kxx) / theta
    a_pp = (-ax * kpx + bx * kxp) / theta
    a_ab = np.block([[a_xx, a_xp], [a_px, a_pp]])
    n = 2 * (na + nb)
    a = np.zeros((n, n))
    a[: 2 * na, 2 * na :] = a_ab
    a[2 * na :, : 2 * na] = a_ab.T
    if warn and na and nb:
        wa = np.sqrt(np.abs(wax * wap))
        wb = np.sqrt(np.abs(wbx * wbp))
        gap = np.min(np.abs(np.subtract.outer(wa, wb)))
        ratio = np.max(np.abs(k)) / gap if gap > 0 else math.inf
        if ratio > PERTURBATIVE_WARN:
            warnings.warn(f"k/Delta = {ratio:.3g} exceeds {PERTURBATIVE_WARN}", PerturbativeWarning, stacklevel=2)
        # the generator itself scales as k w / Theta with squared-frequency gaps
        sq_gap = np.min(np.abs(np.subtract.outer(wa**2, wb**2)))
        ratio2 = np.max(np.abs(k)) * max(wa.max(), wb.max()) / sq_gap if sq_gap > 0 else math.inf
        if ratio2 > PERTURBATIVE_WARN:
            warnings.warn(f"k w/Theta = {ratio2:.3g} exceeds {PERTURBATIVE_WARN}", PerturbativeWarning, stacklevel=2)
    j = sla.block_diag(canonical_j(na), canonical_j(nb))
    return map_from_generator(a, j)


def _solve_generator(h0: np.ndarray, rhs: np.ndarray, n_a: int) -> np.ndarray:
    """Off-diagonal symmetric A with {JA, H0}_T = rhs (rhs block off-diagonal).

    The AB block satisfies J_A X H_B - H_A X J_B = rhs_AB, a Sylvester
    equation solved by vectorization.
    """
    na2 = 2 * n_a
    nb2 = h0.shape[0] - na2
    ja, jb = canonical_j(n_a), canonical_j(nb2 // 2)
    ha, hb = h0[:na2, :na2], h0[na2:, na2:]
    # vec(J_A X H_B) = (H_B^T kron J_A) vec X ; vec(H_A X J_B) = (J_B^T kron H_A) vec X
    m = np.kron(hb.T, ja) - np.kron(jb.T, ha)
    x = np.linalg.solve(m, rhs[:na2, na2:].reshape(-1, order="F")).reshape((na2, nb2), order="F")
    a = np.zeros_like(h0)
    a[:na2, na2:] = x
    a[na2:, :na2] = x.T
    return a


@dataclass(frozen=True)
class SwResult:
    h_eff_a: np.ndarray
    h_eff_b: np.ndarray
    h_transformed: np.ndarray
    map: SymplecticMap
    generators: tuple[np.ndarray, ...]


def sw_block_diagonalize(sys: QuadraticSystem, order: int = 2, n_a: int | None = None) -> SwResult:
    """Block-diagonalize a two-sector quadratic form perturbatively.

    ``order=2`` keeps H0 + H'_D + {JA1, H_ND}_T / 2.  ``order=3`` also solves
    {JA2, H0}_T = -{JA1, H'_D}_T and adds the third-order block-diagonal term
    {JA2, H_ND}_T / 2.  The returned ``map`` is exp((A1 + A2) J) and
    ``h_transformed`` the exact transform of h by it.
    """
    if order not in (2, 3):
        raise ValueError("order must be 2 or 3")
    if n_a is None:
        if len(sys.sectors) != 2:
            raise NotBlockStructured("sw_block_diagonalize needs exactly two sectors")
        n_a = sys.sectors[0].n_pairs
    sp = block_split(sys.h, n_a)
    j = sys.j_form
    m1 = sw_generator(np.diag(sp.h0), sp.k_block, n_a)
    a1 = m1.generator
    ja1 = j @ a1
    h_eff = sp.h0 + sp.hd + 0.5 * t_anticommutator(ja1, sp.hnd)
    gens = [a1]
    a_tot = a1
    if order == 3 and np.linalg.norm(sp.hd) > 0:
        a2 = _solve_generator(sp.h0, -t_anticommutator(ja1, sp.hd), n_a)
        h_eff = h_eff + 0.5 * t_anticommutator(j @ a2, sp.hnd)
        gens.append(a2)
        a_tot = a1 + a2
    na2 = 2 * n_a
    mp = map_from_generator(a_tot, j)
    return SwResult(
        h_eff[:na2, :na2].copy(),
        h_eff[na2:, na2:].copy(),
        mp.apply(sys.h),
        mp,
        tuple(gens),
    )


def offdiagonal_residual(h: np.ndarray, n_a: int) -> float:
    return float(np.linalg.norm(h[: 2 * n_a, 2 * n_a :]))


def second_order_closed_form(h0_diag: np.ndarray, k_block: np.ndarray, n_a: int) -> np.ndarray:
    """Sector-A correction {JA1, H_ND}_T / 2 from explicit entry formulas.

    Returns the 2n_a x 2n_a correction [[H_xx, H_xp], [H_xp^T, H_pp]].  The
    expressions are the element-wise expansion of the matrix product using
    the closed-form generator; see the decision log for the two printed
    misprints this corrects.
    """
    d = np.asarray(h0_diag, dtype=float)
    k = np.asarray(k_block, dtype=float)
    na = n_a
    nb = d.size // 2 - na
    wax, wap = d[:na], d[na : 2 * na]
    wbx, wbp = d[2 * na : 2 * na + nb], d[2 * na + nb :]
    th = _theta(wax, wap, wbx, wbp)
    kxx, kxp = k[:na, :nb], k[:na, nb:]
    kpx, kpp = k[na:, :nb], k[na:, nb:]
    hxx = np.zeros((na, na))
    hxp = np.zeros((na, na))
    hpp = np.zeros((na, na))
    for a in range(na):
        for a2 in range(na):
            for b in range(nb):
                sym = 1.0 / th[a, b] + 1.0 / th[a2, b]
                hxx[a, a2] += 0.5 * (
                    (wbp[b] * kxx[a, b] * kxx[a2, b] + wbx[b] * kxp[a, b] * kxp[a2, b]) * sym
                    + wax[a] / th[a, b] * (kpp[a, b] * kxx[a2, b] - kpx[a, b] * kxp[a2, b])
                    + wax[a2] / th[a2, b] * (kpp[a2, b] * kxx[a, b] - kpx[a2, b] * kxp[a, b])
                )
                hxp[a, a2] += 0.5 * (
                    (wbp[b] * kxx[a, b] * kpx[a2, b] + wbx[b] * kxp[a, b] * kpp[a2, b]) * sym
                    + wax[a] / th[a, b] * (kpp[a, b] * kpx[a2, b] - kpx[a, b] * kpp[a2, b])
                    + wap[a2] / th[a2, b] * (kxx[a2, b] * kxp[a, b] - kxp[a2, b] * kxx[a, b])
                )
                hpp[a, a2] += 0.5 * (
                    (wbp[b] * kpx[a, b] * kpx[a2, b] + wbx[b] * kpp[a, b] * kpp[a2, b]) * sym
                    + wap[a] / th[a, b] * (kxx[a, b] * kpp[a2, b] - kxp[a, b] * kpx[a2, b])
                    + wap[a2] / th[a2, b] * (kxx[a2, b] * kpp[a, b] - kxp[a2, b] * kpx[a, b])
                )
    return np.block([[hxx, hxp], [hxp.T, hpp]])


# ---------------------------------------------------------------------------
# worked example: two oscillators coupled to a third through gyrators


@dataclass(frozen=True)
class ThreeOscillatorExample:
    w_a: tuple[float, float]
    w_b: float
    k_q: float
    k_phi_q: tuple[float, float]  # k^{i,1}_{phi_a q_b}
    k_q_phi: tuple[float, float]  # k^{i,1}_{q_a phi_b}
    k_q_q: tuple[float, float]  # k^{i,1}_{q_a q_b}

    def system(self) -> QuadraticSystem:
        w1, w2 = self.w_a
        h_a = np.array([[w1, 0, 0, 0], [0, w2, 0, 0], [0, 0, w1, self.k_q], [0, 0, self.k_q, w2]], dtype=float)
        h_b = self.w_b * np.eye(2)
        h_ab = np.array(
            [
                [0.0, self.k_phi_q[0]],
                [0.0, self.k_phi_q[1]],
                [-self.k_q_phi[0], self.k_q_q[0]],
                [-self.k_q_phi[1], self.k_q_q[1]],
            ]
        )
        h = np.block([[h_a, h_ab], [h_ab.T, h_b]])
        return QuadraticSystem(h, (Sector("A", 2, ("phiA1", "phiA2", "qA1", "qA2")), Sector("B", 1, ("phiB", "qB"))))

    def printed_h_eff_a(self) -> np.ndarray:
        """Sector-A effective form from the explicit entry formulas of the example.

        The omega_A terms carry the opposite sign to the printed example (the
        printed signs correspond to +k_{q_a phi_b} in H_AB), and the last
        omega_A term of H_qq has its factor 1/2 restored; see the decision log.
        """
        wa, wb = self.w_a, self.w_b
        th = [wa[i] ** 2 - wb**2 for i in range(2)]
        kfq, kqf, kqq = self.k_phi_q, self.k_q_phi, self.k_q_q
        hff = np.zeros((2, 2))
        hfq = np.zeros((2, 2))
        hqq = np.zeros((2, 2))
        for i in range(2):
            for j in range(2):
                sym = 1.0 / th[i] + 1.0 / th[j]
                hff[i, j] = (
                    0.5 * wb * kfq[i] * kfq[j] * sym
                    + wa[i] / (2 * th[i]) * kqf[i] * kfq[j]
                    + wa[j] / (2 * th[j]) * kqf[j] * kfq[i]
                )
                hfq[i, j] = 0.5 * wb * kfq[i] * kqq[j] * sym + wa[i] / (2 * th[i]) * (
                    kqf[i] * kqq[j] - kqq[i] * kqf[j]
                )
                hqq[i, j] = (
                    0.5 * wb * (kqf[i] * kqf[j] + kqq[i] * kqq[j]) * sym
                    + wa[i] / (2 * th[i]) * kfq[i] * kqf[j]
                    + wa[j] / (2 * th[j]) * kfq[j] * kqf[i]
                    + self.k_q * (i != j)
                )
        h0 = np.diag([wa[0], wa[1], wa[0], wa[1]])
        return h0 + np.block([[hff, hfq], [hfq.T, hqq]])


# ---------------------------------------------------------------------------
# normal modes and elimination of nondynamical modes


def normal_modes(sys: QuadraticSystem | np.ndarray, j: np.ndarray | None = None, zero_tol: float = 1e-9) -> np.ndarray:
    """Positive oscillation frequencies: |Im| of the eigenvalues of J h."""
    if isinstance(sys, QuadraticSystem):
        h, j = sys.h, sys.j_form
    else:
        h = np.asarray(sys, dtype=float)
        j = canonical_j(h.shape[0] // 2) if j is None else j
    ev = np.linalg.eigvals(j @ h)
    scale = max(np.max(np.abs(ev)), 1e-300)
    if np.any(np.abs(ev.real) > 1e-7 * scale):
        raise UnstableSystem(f"eigenvalue with real part {np.max(np.abs(ev.real)):.3g}")
    w = np.sort(np.abs(ev.imag))
    w = w[w > zero_tol * scale]
    # each frequency appears twice (+-i w)
    return w[::2] if len(w) % 2 == 0 else _dedupe(w)


def _dedupe(w: np.ndarray) -> np.ndarray:
    out = []
    used = np.zeros(len(w), bool)
    for k in range(len(w)):
        if used[k]:
            continue
        used[k] = True
        for m in range(k + 1, len(w)):
            if not used[m] and abs(w[m] - w[k]) <= 1e-8 * w[k]:
                used[m] = True
                break
        out.append(w[k])
    return np.array(out)


def _canonical_basis(omega: np.ndarray) -> np.ndarray:
    """B with B^T omega B = inv(J) for a nondegenerate antisymmetric 2-form."""
    n2 = omega.shape[0]
    t, z = sla.schur(omega, output="real")
    xs, ps = [], []
    k = 0
    while k < n2:
        a = t[k, k + 1]
        u, v = z[:, k], z[:, k + 1]
        # u^T omega v = a ; target x^T omega p = -1 (inv(J) = -J)
        s = math.sqrt(abs(a))
        if a > 0:
            xs.append(v / s)
            ps.append(u / s)
        else:
            xs.append(u / s)
            ps.append(v / s)
        k += 2
    return np.column_stack(xs + ps)


@dataclass(frozen=True)
class Reduction:
    """Reduced system with X = basis @ Y on the constraint surface."""

    system: QuadraticSystem
    basis: np.ndarray
    removed: int


def eliminate_nondynamical(sys: QuadraticSystem, exact: bool = True, rtol: float = 1e-10) -> Reduction:
    """Remove zero-frequency (nondynamical) modes of a quadratic system.

    exact: constrain to the level set of the conserved functionals W = J ker h
    and take the quotient by the degenerate directions of the restricted
    symplectic form.  approximate: keep the span of the eigenvectors of J h
    with nonzero frequency and drop the rest.
    """
    if not sys.sectors:
        raise NotBlockStructured("system has no sector tags")
    h, j = sys.h, sys.j_form
    n2 = h.shape[0]
    if exact:
        v = sla.null_space(h, rcond=rtol)
        if v.shape[1] == 0:
            return Reduction(sys, np.eye(n2), 0)
        w = j @ v
        nsub = sla.null_space(w.T, rcond=rtol)
        omega_form = -j  # inv(J)
        om_n = nsub.T @ omega_form @ nsub
        u, s, _ = np.linalg.svd(om_n)
        keep = s > rtol * max(s.max(), 1e-300) * 1e2
        q = nsub @ u[:, keep]
    else:
        ev, vec = np.linalg.eig(j @ h)
        scale = max(np.max(np.abs(ev)), 1e-300)
        # zero modes form Jordan blocks, whose eigenvalues split by about
        # sqrt(eps) * scale in floating point
        dyn = np.abs(ev) > 1e-5 * scale
        if np.all(dyn):
            return Reduction(sys, np.eye(n2), 0)
        sub = vec[:, dyn]
        q = sla.orth(np.hstack([sub.real, sub.imag]))
        omega_form = -j
    om_r = q.T @ omega_form @ q
    b = _canonical_basis(0.5 * (om_r - om_r.T))
    basis = q @ b
    h_r = basis.T @ h @ basis
    n_pairs = basis.shape[1] // 2
    red = QuadraticSystem(0.5 * (h_r + h_r.T), (Sector("reduced", n_pairs),))
    return Reduction(red, basis, (n2 - basis.shape[1]) // 2)


# ---------------------------------------------------------------------------
# ladder decomposition


@dataclass(frozen=True)
class LadderModes:
    """X = sum_k (c_k a_k + conj(c_k) a_k^dag) with [a_k, a_l^dag] = delta_kl.

    ``functionals[:, k]`` is u_k with a_k = u_k^T X (X in sqrt(hbar) units),
    ``coefficients[:, k]`` is c_k.
    """

    frequencies: np.ndarray
    functionals: np.ndarray
    coefficients: np.ndarray


def ladder_modes(h: np.ndarray, j: np.ndarray, zero_tol: float = 1e-9) -> LadderModes:
    """Normal-mode annihilation functionals of a positive quadratic form.

    u solves h J u = i w u with w > 0 and i u^T J conj(u) = 1, which makes
    {a, a*} = -i.  Zero-frequency directions are skipped.
    """
    ev, vec = np.linalg.eig(h @ j)
    scale = max(np.max(np.abs(ev)), 1e-300)
    if np.any(np.abs(ev.real) > 1e-7 * scale):
        raise UnstableSystem("quadratic form is not stable")
    idx = [k for k in range(len(ev)) if ev[k].imag > zero_tol * scale]
    idx.sort(key=lambda k: ev[k].imag)
    ws, us = [], []
    # group degenerate eigenvalues and orthonormalize within the group
    groups: list[list[int]] = []
    for k in idx:
        if groups and abs(ev[k].imag - ev[groups[-1][0]].imag) <= 1e-8 * ev[k].imag:
            groups[-1].append(k)
        else:
            groups.append([k])
    for g in groups:
        sub = vec[:, g]
        gram = 1j * sub.T @ j @ sub.conj()  # Hermitian positive for annihilation modes
        gram = 0.5 * (gram + gram.conj().T)
        gv, gq = np.linalg.eigh(gram)
        if np.any(gv <= 0):
            raise UnstableSystem("normal mode with negative symplectic norm")
        sub = sub @ gq.conj() @ np.diag(gv**-0.5)
        for m in range(sub.shape[1]):
            ws.append(float(np.mean([ev[k].imag for k in g])))
            us.append(sub[:, m])
    u = np.column_stack(us) if us else np.zeros((h.shape[0], 0), complex)
    c = 1j * j @ u.conj()
    return LadderModes(np.array(ws), u, c)
