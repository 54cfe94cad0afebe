"""Time evolution: effective master equation, exact circuit Hamiltonian, classical Kirchhoff.

All three integrators report a :class:`Trajectory` of per-qubit populations.

* :func:`lindblad_evolve` integrates the effective model of the qubit sector
  with the decay matrix restricted to secular groups.
* :func:`closed_evolve` propagates a truncated Fock-space Hamiltonian.  The
  circuit version comes from :func:`circuit_hamiltonian`: the exact quadratic
  circuit Hamiltonian in normal modes plus the quartic junction terms.
* :func:`kirchhoff_evolve` integrates the classical nonlinear node equations
  with drive-port resistors as real dissipation.

Populations of the classical run are normalized actions |b_j|^2 / |b(0)|^2 of
the local qubit modes, read with the same ladder functionals as the quantum
run.  This mapping is a convention: it is what makes a classical curve
comparable with a single-excitation quantum population.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp

from .effective import EffectiveModel, JunctionPortParams, hamiltonian_matrix
from .errors import ImqedError, Nonphysical, StiffnessFailure, TruncationInsufficient
from .symplectic import QuadraticSystem, Sector, eliminate_nondynamical, ladder_modes
from .units import HBAR, PHASE_SCALE, PHI0, TWO_PI

LEAKAGE_TOL = 1e-3
TRACE_TOL = 1e-8
PSD_TOL = 1e-8
SECULAR_C = 10.0
DENSE_LIMIT = 6000


# ---------------------------------------------------------------------------
# trajectory


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray  # ns
    populations: np.ndarray  # (n_times, n_modes)
    expectations: np.ndarray | None = None  # complex <b_j>(t) or vacuum amplitudes
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        p = np.asarray(self.populations, dtype=float)
        if p.ndim != 2 or p.shape[0] != t.size:
            raise ImqedError("populations must be (n_times, n_modes)")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ImqedError("time grid must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "populations", p)

    @property
    def n_modes(self) -> int:
        return self.populations.shape[1]

    def population(self, j: int) -> np.ndarray:
        return self.populations[:, j]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(["t_ns"] + [f"P_{k + 1}" for k in range(self.n_modes)]) + "\n")
        for t, row in zip(self.times, self.populations):
            buf.write(",".join([f"{t:.10g}"] + [f"{x:.10g}" for x in row]) + "\n")
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())

    def to_json(self) -> dict:
        return {
            "schema": "trajectory.v1",
            "times_ns": self.times.tolist(),
            "populations": self.populations.tolist(),
            "meta": self.meta,
        }

    @staticmethod
    def from_csv(text: str) -> "Trajectory":
        data = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1, ndmin=2)
        return Trajectory(data[:, 0], data[:, 1:])


def _check_populations(p: np.ndarray, label: str) -> None:
    if p.size and (p.min() < -1e-6 or p.max() > 1.0 + 1e-6):
        raise Nonphysical(f"{label}: population outside [0, 1] ({p.min():.3g}, {p.max():.3g})")


# ---------------------------------------------------------------------------
# secular grouping


def secular_groups(omegas: Sequence[float], gamma_diag: Sequence[float], c: float = SECULAR_C) -> list[list[int]]:
    """Partition qubits into classes with |w_i - w_j| <= c min(gamma_ii, gamma_jj), closed transitively."""
    w = np.asarray(omegas, dtype=float)
    g = np.asarray(gamma_diag, dtype=float)
    n = w.size
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i in range(n):
        for j in range(i + 1, n):
            if abs(w[i] - w[j]) <= c * min(g[i], g[j]):
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values(), key=lambda grp: grp[0])


def secular_gamma(gamma: np.ndarray, omegas: Sequence[float], c: float = SECULAR_C) -> np.ndarray:
    """gamma with entries between different secular groups set to zero."""
    out = np.zeros_like(gamma)
    for grp in secular_groups(omegas, np.real(np.diag(gamma)), c):
        ix = np.ix_(grp, grp)
        out[ix] = gamma[ix]
    return out


# ---------------------------------------------------------------------------
# Fock space


class FockSpace:
    """Tensor product of truncated oscillators; ``levels[k]`` = cutoff + 1."""

    def __init__(self, levels: Sequence[int]):
        self.levels = tuple(int(x) for x in levels)
        if any(x < 1 for x in self.levels):
            raise ImqedError("every mode needs at least one level")
        self.dim = int(np.prod(self.levels)) if self.levels else 1
        self._ops = [self._lowering(k) for k in range(len(self.levels))]

    def _lowering(self, k: int) -> sp.csr_matrix:
        mats = []
        for m, n in enumerate(self.levels):
            if m == k:
                mats.append(sp.diags(np.sqrt(np.arange(1, n)), 1, shape=(n, n), format="csr"))
            else:
                mats.append(sp.identity(n, format="csr"))
        out = mats[0]
        for m in mats[1:]:
            out = sp.kron(out, m, format="csr")
        return out

    def a(self, k: int) -> sp.csr_matrix:
        return self._ops[k]

    def index(self, occupation: Sequence[int]) -> int:
        if len(occupation) != len(self.levels):
            raise ImqedError(f"occupation has {len(occupation)} entries for {len(self.levels)} modes")
        idx = 0
        for n, lv in zip(occupation, self.levels):
            if not 0 <= n < lv:
                raise TruncationInsufficient(f"occupation {n} outside cutoff {lv - 1}")
            idx = idx * lv + int(n)
        return idx

    def occupations(self) -> np.ndarray:
        """(dim, n_modes) table of Fock numbers of every basis state."""
        grids = np.meshgrid(*[np.arange(n) for n in self.levels], indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def top_level_projectors(self) -> list[np.ndarray]:
        occ = self.occupations()
        return [occ[:, k] == (lv - 1) for k, lv in enumerate(self.levels)]

    def embed(self, other: "FockSpace") -> sp.csr_matrix:
        """Isometry from this space into a larger one with the same modes."""
        occ = self.occupations()
        rows = [other.index(o) for o in occ]
        return sp.csr_matrix((np.ones(self.dim), (rows, np.arange(self.dim))), shape=(other.dim, self.dim))


@dataclass(frozen=True)
class JunctionTerm:
    """Nonlinear part of one junction with phase phi = sum_k beta_k a_k + h.c.

    kind ``quartic``: coef * phi^4.  kind ``cosine``: -coef * (cos phi - 1 + phi^2/2),
    the full junction potential minus the quadratic part already inside the
    normal modes (coef = E_J/hbar).
    """

    coef: float
    beta: np.ndarray
    kind: str = "quartic"


def displacement(alpha: complex, levels: int) -> np.ndarray:
    """Matrix of exp(alpha a^dag - conj(alpha) a) on the lowest ``levels`` Fock states.

    Entries come from the Laguerre closed form, so they are exact inside the
    cutoff rather than those of the exponential of a truncated generator.
    """
    from scipy.special import eval_genlaguerre, gammaln

    x = abs(alpha) ** 2
    out = np.zeros((levels, levels), dtype=complex)
    for m in range(levels):
        for n in range(levels):
            lo, hi = min(m, n), max(m, n)
            pref = math.exp(0.5 * (gammaln(lo + 1) - gammaln(hi + 1)) - 0.5 * x)
            z = alpha if m >= n else -np.conj(alpha)
            out[m, n] = pref * z ** (hi - lo) * eval_genlaguerre(lo, hi - lo, x)
    return out


@dataclass(frozen=True)
class FockHamiltonian:
    """H = sum_kl quadratic[k, l] a_k^dag a_l + sum_k kerr_k/2 a_k^dag^2 a_k^2 + junction terms.

    ``local`` holds the rows of the local (qubit) annihilation operators
    b_i = sum_k local[i, k] a_k used for initial states and populations.
    """

    quadratic: np.ndarray
    kerr: np.ndarray | None = None
    junctions: tuple[JunctionTerm, ...] = ()
    local: np.ndarray | None = None
    rwa: bool = False
    labels: tuple[str, ...] = ()

    @property
    def n_modes(self) -> int:
        return self.quadratic.shape[0]

    def local_rows(self) -> np.ndarray:
        return np.eye(self.n_modes, dtype=complex) if self.local is None else np.asarray(self.local, dtype=complex)

    def operator(self, space: FockSpace, frame: float = 0.0) -> sp.csr_matrix:
        """Sparse matrix of H - frame * N on ``space``."""
        m = self.n_modes
        if len(space.levels) != m:
            raise ImqedError("Fock space does not match the Hamiltonian")
        a = [space.a(k) for k in range(m)]
        h = sp.csr_matrix((space.dim, space.dim), dtype=complex)
        q = np.asarray(self.quadratic, dtype=complex) - frame * np.eye(m)
        for k in range(m):
            for l in range(m):
                if q[k, l] != 0:
                    h = h + q[k, l] * (a[k].T @ a[l])
        if self.kerr is not None:
            for k in range(m):
                if self.kerr[k] != 0:
                    h = h + 0.5 * self.kerr[k] * (a[k].T @ a[k].T @ a[k] @ a[k])
        if self.junctions:
            # normal-ordered forms: (A^k)^dag A^j only lowers inside the
            # cutoff, so every retained matrix element is exact
            eye = sp.identity(space.dim, dtype=complex, format="csr")
            for term in self.junctions:
                beta = np.asarray(term.beta, dtype=complex)
                s = float(np.sum(np.abs(beta) ** 2))
                lower = sp.csr_matrix((space.dim, space.dim), dtype=complex)
                for k in range(m):
                    if beta[k] != 0:
                        lower = lower + beta[k] * a[k]
                powers = [eye, lower]
                for _ in range(3):
                    powers.append(powers[-1] @ lower)

                def normal(k: int, j: int) -> sp.csr_matrix:
                    return powers[k].conj().T @ powers[j]

                if term.kind == "cosine":
                    ep = np.ones((1, 1), dtype=complex)
                    for k, lv in enumerate(space.levels):
                        ep = np.kron(ep, displacement(1j * np.conj(beta[k]), lv))
                    cos_phi = sp.csr_matrix(0.5 * (ep + ep.conj().T))
                    phi2 = normal(0, 2) + normal(2, 0) + 2 * normal(1, 1) + s * eye
                    h = h - term.coef * (cos_phi + 0.5 * phi2)
                    continue
                if term.kind != "quartic":
                    raise ImqedError(f"unknown junction term kind {term.kind!r}")
                if self.rwa:
                    quart = 6 * normal(2, 2) + 12 * s * normal(1, 1) + 3 * s * s * eye
                else:
                    quart = (
                        normal(0, 4) + 4 * normal(1, 3) + 6 * normal(2, 2) + 4 * normal(3, 1) + normal(4, 0)
                        + 6 * s * (normal(0, 2) + normal(2, 0) + 2 * normal(1, 1))
                        + 3 * s * s * eye
                    )
                h = h + term.coef * quart
        h = 0.5 * (h + h.conj().T)
        return sp.csr_matrix(h)


def effective_hamiltonian(model: EffectiveModel) -> FockHamiltonian:
    """Qubit-sector Hamiltonian of an effective model (inner modes in their ground state)."""
    return FockHamiltonian(
        quadratic=hamiltonian_matrix(model),
        kerr=np.asarray(model.anharmonicities, dtype=float),
        labels=tuple(f"q{k + 1}" for k in range(model.n)),
    )


def _initial_state(space: FockSpace, ham: FockHamiltonian, initial: Sequence[int]) -> np.ndarray:
    """prod_i (b_i^dag)^{n_i} / sqrt(n_i!) |0> with b_i the local operators."""
    rows = ham.local_rows()
    if len(initial) != rows.shape[0]:
        raise ImqedError(f"initial state lists {len(initial)} qubits, model has {rows.shape[0]}")
    n_max = max(initial) if len(initial) else 0
    # modes carrying qubit weight need room for the excitation plus two
    carriers = np.max(np.abs(rows), axis=0) >= 0.1
    if any(lv - 1 < n_max + 2 for lv, c in zip(space.levels, carriers) if c):
        raise TruncationInsufficient(f"truncation must be at least {n_max + 2} photons for this initial state")
    psi = np.zeros(space.dim, dtype=complex)
    psi[0] = 1.0
    for i, n in enumerate(initial):
        bdag = sum((np.conj(rows[i, k]) * space.a(k).T for k in range(ham.n_modes)), sp.csr_matrix((space.dim, space.dim)))
        for _ in range(int(n)):
            psi = bdag @ psi
        psi /= math.sqrt(math.factorial(int(n)))
    nrm = np.linalg.norm(psi)
    if nrm < 0.5:
        raise TruncationInsufficient("initial state does not fit the truncated space")
    return psi / nrm


def _local_ops(space: FockSpace, ham: FockHamiltonian) -> list[sp.csr_matrix]:
    rows = ham.local_rows()
    return [
        sum((rows[i, k] * space.a(k) for k in range(ham.n_modes)), sp.csr_matrix((space.dim, space.dim)))
        for i in range(rows.shape[0])
    ]


def _levels(n_modes: int, n_ph: int | Sequence[int]) -> list[int]:
    if isinstance(n_ph, (int, np.integer)):
        return [int(n_ph) + 1] * n_modes
    if len(n_ph) != n_modes:
        raise ImqedError(f"{len(n_ph)} cutoffs for {n_modes} modes")
    return [int(x) + 1 for x in n_ph]


# ---------------------------------------------------------------------------
# closed evolution


def closed_evolve(
    ham: FockHamiltonian,
    initial: Sequence[int],
    t_grid: Sequence[float],
    n_ph: int | Sequence[int] = 4,
    frame: float | None = None,
) -> Trajectory:
    """Schroedinger evolution; P_j(t) = |<0| b_j |psi(t)>|^2 with |0> the Fock vacuum."""
    t = np.asarray(t_grid, dtype=float)
    space = FockSpace(_levels(ham.n_modes, n_ph))
    w0 = float(np.mean(np.real(np.diag(ham.quadratic)))) if frame is None else frame
    h = ham.operator(space, frame=0.0)
    psi0 = _initial_state(space, ham, initial)
    if space.dim <= DENSE_LIMIT:
        e, v = np.linalg.eigh(h.toarray())
        c0 = v.conj().T @ psi0
        states = v @ (np.exp(-1j * np.outer(e, t - t[0])) * c0[:, None])
        states = states.T
    else:
        from scipy.sparse.linalg import expm_multiply

        states = np.empty((t.size, space.dim), dtype=complex)
        states[0] = psi0
        for k in range(1, t.size):
            states[k] = expm_multiply(-1j * (t[k] - t[k - 1]) * h, states[k - 1])
    norms = np.linalg.norm(states, axis=1)
    if np.max(np.abs(norms - 1.0)) > 1e-10:
        raise Nonphysical(f"norm drift {np.max(np.abs(norms - 1.0)):.3g}")
    tops = space.top_level_projectors()
    leak = max(float(np.max(np.sum(np.abs(states[:, m]) ** 2, axis=1))) for m in tops)
    if leak > LEAKAGE_TOL:
        raise TruncationInsufficient(f"population {leak:.3g} in the top Fock level")
    # <0| b_j |psi>: the vacuum is basis state 0
    amps = np.stack([(b @ states.T)[0] for b in _local_ops(space, ham)], axis=1)
    # rotate the vacuum amplitudes into the frame of w0 for readability
    amps = amps * np.exp(1j * w0 * (t - t[0]))[:, None]
    pops = np.abs(amps) ** 2
    _check_populations(pops, "closed evolution")
    return Trajectory(
        t,
        pops,
        amps,
        {"integrator": "closed", "truncation": list(space.levels), "dim": space.dim, "leakage": leak, "rwa": ham.rwa},
    )


# ---------------------------------------------------------------------------
# master equation


def lindblad_evolve(
    model: EffectiveModel,
    initial: Sequence[int],
    t_grid: Sequence[float],
    n_ph: int | Sequence[int] = 4,
    gamma: np.ndarray | None = None,
    secular_c: float = SECULAR_C,
    drive: Callable[[float], np.ndarray] | None = None,
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> Trajectory:
    """Effective master equation with dissipator sum_ij gamma_ij D(b_i, b_j).

    D(b_i, b_j) rho = b_j rho b_i^dag - {b_i^dag b_j, rho}/2.  ``gamma``
    defaults to the model's decay matrix (zero when absent) and is restricted
    to secular groups.  ``drive(t)`` returns per-qubit complex amplitudes
    e_i of H_v = sum_i e_i b_i + h.c. in the lab frame, the convention of
    :class:`~imqed.dissipation.DriveAmplitude`.  The integration
    runs in a frame rotating at the mean qubit frequency.
    """
    t = np.asarray(t_grid, dtype=float)
    ham = effective_hamiltonian(model)
    n = model.n
    space = FockSpace(_levels(n, n_ph))
    g = model.gamma if gamma is None else gamma
    g = np.zeros((n, n), dtype=complex) if g is None else np.asarray(g, dtype=complex)
    g = secular_gamma(0.5 * (g + g.conj().T), model.omegas, secular_c)
    w0 = float(np.mean(model.omegas))
    h = ham.operator(space, frame=w0).toarray()
    b = [space.a(k).toarray() for k in range(n)]
    lam, vec = np.linalg.eigh(g)
    if lam.size and lam.min() < -PSD_TOL * max(abs(lam).max(), 1e-300):
        raise Nonphysical(f"decay matrix has a negative eigenvalue {lam.min():.3g}")
    jumps = []
    for m in range(lam.size):
        if lam[m] > 0:
            c = sum(np.conj(vec[j, m]) * b[j] for j in range(n))
            jumps.append(math.sqrt(lam[m]) * c)
    heff = h - 0.5j * sum((jm.conj().T @ jm for jm in jumps), np.zeros_like(h))
    d = space.dim

    def rhs(tt: float, y: np.ndarray) -> np.ndarray:
        rho = y.reshape(d, d)
        hh = heff
        if drive is not None:
            e = np.asarray(drive(tt), dtype=complex) * np.exp(-1j * w0 * tt)
            hv = sum((e[i] * b[i] for i in range(n)), np.zeros_like(h))
            hh = hh + hv + hv.conj().T
        out = -1j * (hh @ rho - rho @ hh.conj().T)
        for jm in jumps:
            out += jm @ rho @ jm.conj().T
        return out.ravel()

    psi0 = _initial_state(space, ham, initial)
    rho0 = np.outer(psi0, psi0.conj())
    sol = solve_ivp(rhs, (t[0], t[-1]), rho0.ravel(), method="DOP853", t_eval=t, rtol=rtol, atol=atol)
    if not sol.success:
        raise StiffnessFailure(sol.message)
    rhos = sol.y.T.reshape(t.size, d, d)
    nops = [np.real(np.diag(bk.conj().T @ bk)) for bk in b]
    pops = np.empty((t.size, n))
    amps = np.empty((t.size, n), dtype=complex)
    tops = space.top_level_projectors()
    leak = 0.0
    for k in range(t.size):
        rho = 0.5 * (rhos[k] + rhos[k].conj().T)
        tr = np.trace(rho).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise Nonphysical(f"trace drifted to {tr:.12f} at t={t[k]:.4g} ns")
        ev = np.linalg.eigvalsh(rho)
        if ev.min() < -PSD_TOL:
            raise Nonphysical(f"density matrix eigenvalue {ev.min():.3g} at t={t[k]:.4g} ns")
        diag = np.real(np.diag(rho))
        pops[k] = [float(diag @ nk) for nk in nops]
        amps[k] = [np.trace(bk @ rho) for bk in b]
        leak = max(leak, max(float(diag[m].sum()) for m in tops))
    if leak > LEAKAGE_TOL:
        raise TruncationInsufficient(f"population {leak:.3g} in the top Fock level")
    return Trajectory(
        t,
        pops,
        amps,
        {
            "integrator": "lindblad",
            "method": "DOP853",
            "rtol": rtol,
            "atol": atol,
            "truncation": list(space.levels),
            "leakage": leak,
            "secular_groups": secular_groups(model.omegas, np.real(np.diag(g)), secular_c),
        },
    )


# ---------------------------------------------------------------------------
# exact circuit Hamiltonian


@dataclass(frozen=True)
class CircuitQuadratic:
    """Linearized lossless circuit in balanced canonical coordinates.

    Physical coordinates X = (Phi, q) relate to the canonical ones Y by
    X = sqrt(hbar) * diag(s, 1/s) Y.
    """

    system: QuadraticSystem
    scale: np.ndarray
    cap: np.ndarray
    half_gnr: np.ndarray
    stiffness: np.ndarray
    junction_incidence: np.ndarray  # (n_nodes, n_junctions)
    drive_incidence: np.ndarray  # (n_nodes, n_drives)
    junctions: tuple[JunctionPortParams, ...]
    drive_z0: tuple[float, ...]

    @property
    def n_nodes(self) -> int:
        return self.cap.shape[0]

    def _d(self, ndim: int) -> np.ndarray:
        d = math.sqrt(HBAR) * np.concatenate([self.scale, 1.0 / self.scale])
        return d if ndim == 1 else d[:, None]

    def to_physical(self, y: np.ndarray) -> np.ndarray:
        return self._d(y.ndim) * y

    def to_canonical(self, x: np.ndarray) -> np.ndarray:
        return x / self._d(x.ndim)


def circuit_quadratic_system(circuit, junctions: Sequence[JunctionPortParams] | None = None) -> CircuitQuadratic:
    """h for H = (q - B Phi)^T C^-1 (q - B Phi)/2 + Phi^T K Phi/2 with B = G_nr/2.

    K holds the circuit inductors plus the linearized junctions; drive ports
    are left open.  Coordinates are rescaled per node so that the flux and
    charge diagonals of h are balanced, which keeps the kernel detection of
    the nondynamical elimination well conditioned.
    """
    from .effective import junctions_from_circuit
    from .netlist import DrivePort, JunctionPort, nodal_system

    sys = nodal_system(circuit)
    if junctions is None:
        junctions = junctions_from_circuit(circuit)
    jports = [k for k, p in enumerate(circuit.ports) if isinstance(p, JunctionPort)]
    dports = [k for k, p in enumerate(circuit.ports) if isinstance(p, DrivePort)]
    if len(junctions) != len(jports):
        raise ImqedError(f"{len(junctions)} junction parameter sets for {len(jports)} junction ports")
    ej = sys.ports[:, jports]
    ed = sys.ports[:, dports]
    cap = sys.cap
    try:
        cinv = np.linalg.inv(cap)
    except np.linalg.LinAlgError as exc:
        raise ImqedError("kinetic matrix is singular: every node needs a capacitance") from exc
    if np.linalg.cond(cap) > 1e14:
        raise ImqedError("kinetic matrix is singular: every node needs a capacitance")
    bmat = 0.5 * sys.gnr
    k = sys.inv_ind + sum((np.outer(ej[:, m], ej[:, m]) / junctions[m].l_tilde for m in range(len(jports))), np.zeros_like(cap))
    hxx = k + bmat.T @ cinv @ bmat
    hxp = -bmat.T @ cinv
    hpp = cinv
    dxx, dpp = np.diag(hxx).copy(), np.diag(hpp)
    s = np.ones_like(dpp)
    ok = dxx > 0
    s[ok] = (dpp[ok] / dxx[ok]) ** 0.25
    s[~ok] = dpp[~ok] ** 0.5
    h = np.block([[s[:, None] * hxx * s[None, :], s[:, None] * hxp / s[None, :]], [hxp.T / s[:, None] * s[None, :], hpp / s[:, None] / s[None, :]]])
    h = 0.5 * (h + h.T)
    n = cap.shape[0]
    labels = tuple(f"Phi_{x}" for x in sys.nodes[:n]) + tuple(f"q_{x}" for x in sys.nodes[:n]) if sys.proj.shape[1] == len(sys.nodes) else ()
    qs = QuadraticSystem(h, (Sector("circuit", n, labels),))
    z0 = tuple(float(circuit.ports[k].z0) for k in dports)
    return CircuitQuadratic(qs, s, cap, bmat, k, ej, ed, tuple(junctions), z0)


@dataclass(frozen=True)
class CircuitModes:
    """Normal modes of the reduced circuit and their coupling to the junction phases."""

    frequencies: np.ndarray
    coefficients: np.ndarray  # (2 n_nodes, M): canonical Y = sum_k c_k a_k + c.c.
    functionals: np.ndarray  # (2 n_nodes, M): a_k = sum_i functionals[i, k] Y_i
    beta: np.ndarray  # (n_junctions, M)
    local: np.ndarray  # (n_junctions, M) Loewdin-orthonormalized rows
    quadratic: CircuitQuadratic


def circuit_modes(cq: CircuitQuadratic, max_frequency: float | None = None) -> CircuitModes:
    """Ladder decomposition of the nondynamically reduced circuit.

    ``max_frequency`` drops modes above the given frequency (rad/ns), for
    example very fast modes of the filter network that are never excited.
    """
    red = eliminate_nondynamical(cq.system)
    lad = ladder_modes(red.system.h, red.system.j_form)
    coef = red.basis @ lad.coefficients
    # functionals on the full canonical vector: a = u^T basis^+ Y, with
    # basis^+ the left inverse restricted to the constraint surface
    pinv = np.linalg.pinv(red.basis)
    func = pinv.T @ lad.functionals
    freqs = lad.frequencies
    keep = np.ones(freqs.size, bool) if max_frequency is None else freqs <= max_frequency
    coef, func, freqs = coef[:, keep], func[:, keep], freqs[keep]
    n = cq.n_nodes
    phi = cq.scale[:, None] * coef[:n]  # physical flux per sqrt(hbar)
    beta = math.sqrt(PHASE_SCALE) * (cq.junction_incidence.T @ phi)
    gram = beta @ beta.conj().T
    ev, vec = np.linalg.eigh(gram)
    if ev.min() <= 0:
        raise ImqedError("junction phases are linearly dependent across the kept modes")
    local = vec @ np.diag(ev**-0.5) @ vec.conj().T @ beta
    return CircuitModes(freqs, coef, func, beta, local, cq)


def circuit_hamiltonian(modes: CircuitModes, rwa: bool = True, nonlinearity: str = "quartic") -> FockHamiltonian:
    """Normal-mode Hamiltonian plus the junction nonlinearity.

    phi_j = sum_k beta_jk a_k + h.c.; the quadratic part of the cosine is
    already inside the normal modes.  ``nonlinearity``:

    * ``quartic``: -(E_J/24) phi_j^4.  With ``rwa`` only the
      excitation-conserving part is kept.  Without it the truncated quartic is
      unbounded below and its low levels drift with the cutoff, so the RWA
      form is the default.
    * ``cosine``: the full -E_J cos phi_j (``rwa`` is ignored).
    * ``none``: linear circuit only.
    """
    terms: tuple[JunctionTerm, ...] = ()
    junctions = modes.quadratic.junctions
    if nonlinearity == "quartic":
        terms = tuple(JunctionTerm(-p.omega_ej / 24.0, modes.beta[m]) for m, p in enumerate(junctions))
    elif nonlinearity == "cosine":
        terms = tuple(JunctionTerm(p.omega_ej, modes.beta[m], "cosine") for m, p in enumerate(junctions))
    elif nonlinearity != "none":
        raise ImqedError(f"unknown nonlinearity {nonlinearity!r}")
    return FockHamiltonian(
        quadratic=np.diag(modes.frequencies).astype(complex),
        junctions=terms,
        local=modes.local,
        rwa=rwa and nonlinearity == "quartic",
        labels=tuple(f"m{k}" for k in range(modes.frequencies.size)),
    )


# ---------------------------------------------------------------------------
# classical Kirchhoff equations


def _local_amplitudes(modes: CircuitModes, y: np.ndarray) -> np.ndarray:
    """b_i = sum_k local_ik a_k with a_k read from the canonical vector(s) y."""
    a = modes.functionals.T @ y
    return modes.local @ a


def classical_initial_state(modes: CircuitModes, amplitudes: Sequence[complex]) -> np.ndarray:
    """Physical (Phi, q) point whose local qubit amplitudes are ``amplitudes``."""
    b = np.asarray(amplitudes, dtype=complex)
    a = modes.local.conj().T @ b
    y = modes.coefficients @ a
    y = 2.0 * y.real
    return modes.quadratic.to_physical(y)


def kirchhoff_evolve(
    circuit,
    t_grid: Sequence[float],
    initial: Sequence[complex] | None = None,
    junctions: Sequence[JunctionPortParams] | None = None,
    modes: CircuitModes | None = None,
    x0: np.ndarray | None = None,
    nonlinear: bool = True,
    rtol: float = 1e-9,
    atol: float = 1e-12,
    max_step: float | None = None,
) -> Trajectory:
    """Classical node equations C Phi'' + (G_nr + G_D) Phi' + K Phi + I_J(Phi) = 0.

    Junction currents are (phi0/L_J) sin(Phi/phi0) (linearized when
    ``nonlinear`` is false) and drive ports are resistors Z0 to their return
    node.  The initial point is either ``x0`` = (Phi, q) or the point whose
    local qubit amplitudes equal ``initial`` (|b|^2 counts quanta).
    Populations are |b_j(t)|^2 / sum_i |b_i(0)|^2.  ``atol`` is relative to
    the initial flux and node-velocity amplitudes.
    """
    t = np.asarray(t_grid, dtype=float)
    cq = circuit_quadratic_system(circuit, junctions) if modes is None else modes.quadratic
    modes = circuit_modes(cq) if modes is None else modes
    n = cq.n_nodes
    if x0 is None:
        if initial is None:
            raise ImqedError("kirchhoff_evolve needs an initial point")
        x0 = classical_initial_state(modes, initial)
    x0 = np.asarray(x0, dtype=float)
    cinv = np.linalg.inv(cq.cap)
    gd = sum(
        (np.outer(cq.drive_incidence[:, m], cq.drive_incidence[:, m]) / cq.drive_z0[m] for m in range(len(cq.drive_z0))),
        np.zeros((n, n)),
    )
    gnr = 2.0 * cq.half_gnr
    k_lin = cq.stiffness - sum(
        (np.outer(cq.junction_incidence[:, m], cq.junction_incidence[:, m]) / cq.junctions[m].l_tilde for m in range(len(cq.junctions))),
        np.zeros((n, n)),
    )
    inc = cq.junction_incidence
    lt = np.array([p.l_tilde for p in cq.junctions])
    damp = gnr + gd

    def current(phi: np.ndarray) -> np.ndarray:
        v = inc.T @ phi
        if nonlinear:
            i_j = PHI0 / lt * np.sin(v / PHI0)
        else:
            i_j = v / lt
        return inc @ i_j

    def rhs(_t: float, z: np.ndarray) -> np.ndarray:
        phi, vdot = z[:n], z[n:]
        acc = -cinv @ (damp @ vdot + k_lin @ phi + current(phi))
        return np.concatenate([vdot, acc])

    phi0 = x0[:n]
    v0 = cinv @ (x0[n:] - cq.half_gnr @ phi0)
    # atol is relative to the initial amplitude of each block: package-unit
    # fluxes are ~1e-9, so an absolute floor would swamp rtol
    w_max = float(np.max(modes.frequencies)) if modes.frequencies.size else 1.0
    s_phi = max(float(np.max(np.abs(phi0))), float(np.max(np.abs(v0))) / w_max)
    s_v = max(float(np.max(np.abs(v0))), s_phi * w_max)
    if s_phi == 0.0:
        s_phi, s_v = 1.0, w_max
    atol_vec = atol * np.concatenate([np.full(n, s_phi), np.full(n, s_v)])
    kwargs = {} if max_step is None else {"max_step": max_step}
    sol = solve_ivp(rhs, (t[0], t[-1]), np.concatenate([phi0, v0]), method="DOP853", t_eval=t, rtol=rtol, atol=atol_vec, **kwargs)
    if not sol.success:
        raise StiffnessFailure(sol.message)
    phi, vdot = sol.y[:n], sol.y[n:]
    q = cq.cap @ vdot + cq.half_gnr @ phi
    y = cq.to_canonical(np.vstack([phi, q]))
    b = _local_amplitudes(modes, y).T
    b0 = _local_amplitudes(modes, cq.to_canonical(x0))
    norm = float(np.sum(np.abs(b0) ** 2))
    if norm <= 0:
        raise ImqedError("initial point has no weight on the qubit modes")
    pops = np.abs(b) ** 2 / norm
    energy = 0.5 * np.einsum("it,ij,jt->t", vdot, cq.cap, vdot) + 0.5 * np.einsum("it,ij,jt->t", phi, k_lin, phi)
    v = inc.T @ phi
    if nonlinear:
        energy = energy + np.sum((PHI0**2 / lt)[:, None] * (1.0 - np.cos(v / PHI0)), axis=0)
    else:
        energy = energy + 0.5 * np.sum(v**2 / lt[:, None], axis=0)
    return Trajectory(
        t,
        pops,
        b,
        {
            "integrator": "kirchhoff",
            "method": "DOP853",
            "rtol": rtol,
            "atol": atol,
            "nonlinear": nonlinear,
            "population": "normalized classical action |b_j|^2/|b(0)|^2",
            "initial_action": norm,
            "energy": energy.tolist(),
        },
    )


def energy_to_quanta(energy: float, omega: float) -> float:
    return energy / (HBAR * omega)


def mode_frequency_from_phase(times: np.ndarray, amplitude: np.ndarray) -> float:
    """Angular frequency from the unwrapped phase slope of a complex amplitude."""
    ph = np.unwrap(np.angle(amplitude))
    return float(-np.polyfit(times, ph, 1)[0])


__all__ = [
    "Trajectory",
    "secular_groups",
    "secular_gamma",
    "FockSpace",
    "FockHamiltonian",
    "JunctionTerm",
    "displacement",
    "effective_hamiltonian",
    "closed_evolve",
    "lindblad_evolve",
    "CircuitQuadratic",
    "circuit_quadratic_system",
    "CircuitModes",
    "circuit_modes",
    "circuit_hamiltonian",
    "classical_initial_state",
    "kirchhoff_evolve",
    "mode_frequency_from_phase",
    "TWO_PI",
]
