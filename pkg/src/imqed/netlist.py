"""Lumped-element netlists: DSL parser, nodal analysis and example circuits.

The DSL is line oriented; ``;`` separates statements on one line and ``#``
starts a comment::

    C   n1 gnd 100fF
    L   r  gnd 1.2nH
    GY  a gnd b gnd 50            # gyrator: left pair, right pair, R
    CIRC c1 c2 c3 gnd phi=pi/3 R=50
    XFMR p gnd s gnd n=2          # ideal transformer, v_p = n v_s
    port J1 n1 gnd EJ=11.37GHz CJ=100fF
    port D1 n3 gnd Z0=50

``gnd`` (or ``0``) is the reference node.  Element values are stored in the
internal unit system (nF, nH, ohm, GHz for E_J/h).
"""

from __future__ import annotations

import ast
import enum
import math
import operator
import re
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence, Union

import numpy as np
import scipy.linalg as sla

from .errors import (
    DegeneratePole,
    DslSyntaxError,
    ImqedError,
    MissingParam,
    NonFinite,
    NotAPole,
    SemanticError,
    SingularAtFrequency,
)
from .immittance import (
    Kind,
    Pole,
    PoleResidueResponse,
    evaluate,
    pole_from_residue,
    residue_at,
)
from .units import TWO_PI, ff, ghz_to_rad, parse_quantity

GROUND = "gnd"
_GROUND_ALIASES = {"gnd", "0", "GND"}

# ---------------------------------------------------------------------------
# circuit model


@dataclass(frozen=True)
class Capacitor:
    a: str
    b: str
    value: float  # nF


@dataclass(frozen=True)
class Inductor:
    a: str
    b: str
    value: float  # nH


@dataclass(frozen=True)
class Gyrator:
    left: tuple[str, str]
    right: tuple[str, str]
    resistance: float  # ohm


@dataclass(frozen=True)
class Circulator3:
    terminals: tuple[str, str, str]
    ref: str
    phi: float
    resistance: float


@dataclass(frozen=True)
class Transformer:
    primary: tuple[str, str]
    secondary: tuple[str, str]
    ratio: float


@dataclass(frozen=True)
class JunctionPort:
    name: str
    a: str
    b: str
    ej_ghz: float | None = None
    cj: float | None = None  # shunt capacitance in nF, stamped into the network


@dataclass(frozen=True)
class DrivePort:
    name: str
    a: str
    b: str
    z0: float = 50.0


Element = Union[Capacitor, Inductor, Gyrator, Circulator3, Transformer]
Port = Union[JunctionPort, DrivePort]


def circulator_s(phi: float) -> np.ndarray:
    """Rotation-type scattering matrix of the three-port element."""
    r = 1.0 + 2.0 * math.cos(phi)
    t = 1.0 - math.cos(phi)
    c = math.sqrt(3.0) * math.sin(phi)
    return np.array(
        [[r, t - c, t + c], [t + c, r, t - c], [t - c, t + c, r]], dtype=float
    ) / 3.0


def circulator_admittance(phi: float, resistance: float) -> np.ndarray:
    """Y = (1/R)(1 - S)(1 + S)^-1, real antisymmetric for phi not in {0, pi}."""
    s = circulator_s(phi)
    eye = np.eye(3)
    return (eye - s) @ np.linalg.inv(eye + s) / resistance


@dataclass(frozen=True)
class Circuit:
    elements: tuple[Element, ...]
    ports: tuple[Port, ...]

    @property
    def nodes(self) -> tuple[str, ...]:
        """Non-ground nodes in order of first appearance."""
        seen: dict[str, None] = {}
        for n in _all_terminals(self):
            if n not in _GROUND_ALIASES:
                seen.setdefault(n, None)
        return tuple(seen)

    @property
    def junction_indices(self) -> list[int]:
        return [k for k, p in enumerate(self.ports) if isinstance(p, JunctionPort)]

    @property
    def drive_indices(self) -> list[int]:
        return [k for k, p in enumerate(self.ports) if isinstance(p, DrivePort)]

    @property
    def n_ports(self) -> int:
        return len(self.ports)


def _element_terminals(e) -> list[str]:
    if isinstance(e, (Capacitor, Inductor)):
        return [e.a, e.b]
    if isinstance(e, Gyrator):
        return [*e.left, *e.right]
    if isinstance(e, Circulator3):
        return [*e.terminals, e.ref]
    if isinstance(e, Transformer):
        return [*e.primary, *e.secondary]
    if isinstance(e, (JunctionPort, DrivePort)):
        return [e.a, e.b]
    raise TypeError(e)


def _all_terminals(c: Circuit):
    for e in c.elements:
        yield from _element_terminals(e)
    for p in c.ports:
        yield from _element_terminals(p)


def _canon(node: str) -> str:
    return GROUND if node in _GROUND_ALIASES else node


def validate_circuit(c: Circuit, lines: Mapping[int, int] | None = None) -> None:
    """Check the structural invariants; raise SemanticError on the first failure."""
    lines = lines or {}
    names = set()
    pairs = set()
    for k, p in enumerate(c.ports):
        if p.name in names:
            raise SemanticError(f"duplicate port {p.name!r}", lines.get(("port", k)))
        names.add(p.name)
        pair = frozenset((_canon(p.a), _canon(p.b)))
        if len(pair) < 2:
            raise SemanticError(f"port {p.name!r} has identical terminals", lines.get(("port", k)))
        if pair in pairs:
            raise SemanticError(f"port {p.name!r} reuses a terminal pair", lines.get(("port", k)))
        pairs.add(pair)
        if isinstance(p, JunctionPort):
            if p.ej_ghz is not None and not p.ej_ghz > 0:
                raise SemanticError(f"E_J of port {p.name!r} must be positive")
            if p.cj is not None and not p.cj > 0:
                raise SemanticError(f"C_J of port {p.name!r} must be positive")
        elif not p.z0 > 0:
            raise SemanticError(f"Z0 of port {p.name!r} must be positive")
    for k, e in enumerate(c.elements):
        where = lines.get(("elem", k))
        if isinstance(e, (Capacitor, Inductor)):
            if _canon(e.a) == _canon(e.b):
                raise SemanticError(f"self-loop on node {e.a!r}", where)
            if not e.value > 0:
                raise SemanticError("element values must be positive", where)
        elif isinstance(e, Gyrator):
            if _canon(e.left[0]) == _canon(e.left[1]) or _canon(e.right[0]) == _canon(e.right[1]):
                raise SemanticError("gyrator port shorted on itself", where)
            if not e.resistance > 0:
                raise SemanticError("gyration resistance must be positive", where)
        elif isinstance(e, Circulator3):
            t = [_canon(x) for x in (*e.terminals, e.ref)]
            if len(set(t)) != 4:
                raise SemanticError("circulator terminals must be distinct", where)
            if not e.resistance > 0:
                raise SemanticError("circulator R must be positive", where)
            if not (-math.pi < e.phi <= math.pi):
                raise SemanticError("circulator phase must lie in (-pi, pi]", where)
            if abs(math.sin(e.phi)) < 1e-12:
                raise SemanticError("circulator phase 0 or pi is not allowed", where)
        elif isinstance(e, Transformer):
            if _canon(e.primary[0]) == _canon(e.primary[1]) or _canon(e.secondary[0]) == _canon(e.secondary[1]):
                raise SemanticError("transformer winding shorted on itself", where)
            if not e.ratio > 0:
                raise SemanticError("transformer ratio must be positive", where)

    # connectivity: every node must reach ground or a port through elements
    parent: dict[str, str] = {}

    def find(x):
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b):
        parent[find(a)] = find(b)

    degree: dict[str, int] = {}
    for e in list(c.elements) + list(c.ports):
        ts = [_canon(t) for t in _element_terminals(e)]
        for t in ts:
            degree[t] = degree.get(t, 0) + 1
            find(t)
        for t in ts[1:]:
            union(ts[0], t)
    for n, d in degree.items():
        if n != GROUND and d < 2:
            raise SemanticError(f"dangling node {n!r}")
    if degree:
        roots = {find(n) for n in degree}
        if len(roots) > 1:
            raise SemanticError("circuit graph is not connected")


# ---------------------------------------------------------------------------
# parser

_TOKEN = re.compile(r"\S+")

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}


def _safe_expr(text: str) -> float:
    """Evaluate a numeric expression that may use ``pi`` (e.g. ``pi/3``)."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        raise ValueError(f"unsupported expression {text!r}")

    return ev(ast.parse(text, mode="eval"))


def _statements(text: str):
    """Yield (line_no, col_offset, statement_text) with comments stripped."""
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        col = 0
        for part in line.split(";"):
            if part.strip():
                yield ln, col + (len(part) - len(part.lstrip())), part.strip()
            col += len(part) + 1


def _quantity(tok: str, unit: str, ln: int, col: int, to_prefix: str = "") -> float:
    try:
        return parse_quantity(tok, unit, to_prefix)
    except ValueError as exc:
        raise DslSyntaxError(f"bad value {tok!r} ({exc})", ln, col + 1) from None


def _kv(tokens, ln: int, cols) -> dict[str, tuple[str, int]]:
    out = {}
    for tok, col in zip(tokens, cols):
        if "=" not in tok:
            raise DslSyntaxError(f"expected key=value, got {tok!r}", ln, col + 1)
        k, v = tok.split("=", 1)
        out[k.strip().lower()] = (v.strip(), col)
    return out


def parse(text: str) -> Circuit:
    """Parse netlist text into a validated :class:`Circuit`."""
    elements: list[Element] = []
    ports: list[Port] = []
    lines: dict = {}
    for ln, col0, stmt in _statements(text):
        toks, cols = [], []
        for m in _TOKEN.finditer(stmt):
            toks.append(m.group())
            cols.append(col0 + m.start())
        head = toks[0].upper()

        def need(n):
            if len(toks) != n:
                raise DslSyntaxError(
                    f"{toks[0]} expects {n - 1} fields, got {len(toks) - 1}", ln, cols[0] + 1
                )

        if head in ("C", "L"):
            need(4)
            if head == "C":
                val = _quantity(toks[3], "F", ln, cols[3], "n")
                elements.append(Capacitor(toks[1], toks[2], val))
            else:
                val = _quantity(toks[3], "H", ln, cols[3], "n")
                elements.append(Inductor(toks[1], toks[2], val))
        elif head == "GY":
            need(6)
            r = _quantity(toks[5], "Ohm", ln, cols[5])
            elements.append(Gyrator((toks[1], toks[2]), (toks[3], toks[4]), r))
        elif head == "CIRC":
            if len(toks) != 7:
                raise DslSyntaxError("CIRC expects 4 nodes, phi= and R=", ln, cols[0] + 1)
            kv = _kv(toks[5:], ln, cols[5:])
            if "phi" not in kv or "r" not in kv:
                raise DslSyntaxError("CIRC needs phi= and R=", ln, cols[0] + 1)
            try:
                phi = _safe_expr(kv["phi"][0])
            except (ValueError, SyntaxError, ZeroDivisionError):
                raise DslSyntaxError(f"bad phase {kv['phi'][0]!r}", ln, kv["phi"][1] + 1) from None
            r = _quantity(kv["r"][0], "Ohm", ln, kv["r"][1])
            elements.append(Circulator3((toks[1], toks[2], toks[3]), toks[4], phi, r))
        elif head == "XFMR":
            need(6)
            kv = _kv(toks[5:], ln, cols[5:])
            if "n" not in kv:
                raise DslSyntaxError("XFMR needs n=", ln, cols[5] + 1)
            try:
                n = _safe_expr(kv["n"][0])
            except (ValueError, SyntaxError, ZeroDivisionError):
                raise DslSyntaxError(f"bad ratio {kv['n'][0]!r}", ln, kv["n"][1] + 1) from None
            elements.append(Transformer((toks[1], toks[2]), (toks[3], toks[4]), n))
        elif head == "PORT":
            if len(toks) < 5:
                raise DslSyntaxError("port expects a name, two nodes and parameters", ln, cols[0] + 1)
            name, a, b = toks[1:4]
            kv = _kv(toks[4:], ln, cols[4:])
            unknown = set(kv) - {"ej", "cj", "z0"}
            if unknown:
                k = sorted(unknown)[0]
                raise DslSyntaxError(f"unknown port parameter {k!r}", ln, kv[k][1] + 1)
            if "z0" in kv:
                if "ej" in kv or "cj" in kv:
                    raise DslSyntaxError("a port is either a junction (EJ/CJ) or a drive (Z0)", ln, cols[0] + 1)
                ports.append(DrivePort(name, a, b, _quantity(kv["z0"][0], "Ohm", ln, kv["z0"][1])))
            else:
                ej = _quantity(kv["ej"][0], "Hz", ln, kv["ej"][1], "G") if "ej" in kv else None
                cj = _quantity(kv["cj"][0], "F", ln, kv["cj"][1], "n") if "cj" in kv else None
                ports.append(JunctionPort(name, a, b, ej, cj))
            lines[("port", len(ports) - 1)] = ln
            continue
        else:
            raise DslSyntaxError(f"unknown element {toks[0]!r}", ln, cols[0] + 1)
        lines[("elem", len(elements) - 1)] = ln
    circuit = Circuit(tuple(elements), tuple(ports))
    validate_circuit(circuit, lines)
    return circuit


def _fmt(x: float) -> str:
    return repr(float(x))


def to_text(c: Circuit) -> str:
    """Serialize a circuit back to DSL text (lossless for ``parse``)."""
    out = []
    for e in c.elements:
        if isinstance(e, Capacitor):
            out.append(f"C {e.a} {e.b} {_fmt(e.value)}nF")
        elif isinstance(e, Inductor):
            out.append(f"L {e.a} {e.b} {_fmt(e.value)}nH")
        elif isinstance(e, Gyrator):
            out.append(f"GY {e.left[0]} {e.left[1]} {e.right[0]} {e.right[1]} {_fmt(e.resistance)}")
        elif isinstance(e, Circulator3):
            t = e.terminals
            out.append(f"CIRC {t[0]} {t[1]} {t[2]} {e.ref} phi={_fmt(e.phi)} R={_fmt(e.resistance)}")
        elif isinstance(e, Transformer):
            out.append(
                f"XFMR {e.primary[0]} {e.primary[1]} {e.secondary[0]} {e.secondary[1]} n={_fmt(e.ratio)}"
            )
    for p in c.ports:
        if isinstance(p, DrivePort):
            out.append(f"port {p.name} {p.a} {p.b} Z0={_fmt(p.z0)}")
        else:
            extra = ""
            if p.ej_ghz is not None:
                extra += f" EJ={_fmt(p.ej_ghz)}GHz"
            if p.cj is not None:
                extra += f" CJ={_fmt(p.cj)}nF"
            if not extra:
                raise ImqedError("junction port needs EJ or CJ to be written as text")
            out.append(f"port {p.name} {p.a} {p.b}{extra}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# nodal matrices


@dataclass(frozen=True)
class NodalSystem:
    """Reduced nodal description  C phi'' + G phi' + Gamma phi = E i_port.

    Node fluxes are phi = P xi, where the columns of P span the subspace
    allowed by the ideal transformers.  All matrices act on xi.
    """

    nodes: tuple[str, ...]
    proj: np.ndarray
    cap: np.ndarray
    inv_ind: np.ndarray
    gnr: np.ndarray
    ports: np.ndarray  # (n_xi, n_ports) incidence of the ports


def _incidence(index: Mapping[str, int], a: str, b: str, n: int) -> np.ndarray:
    v = np.zeros(n)
    if _canon(a) != GROUND:
        v[index[a]] += 1.0
    if _canon(b) != GROUND:
        v[index[b]] -= 1.0
    return v


def nodal_system(c: Circuit, include_junction_caps: bool = True) -> NodalSystem:
    nodes = c.nodes
    idx = {n: k for k, n in enumerate(nodes)}
    n = len(nodes)
    cap = np.zeros((n, n))
    inv_ind = np.zeros((n, n))
    gnr = np.zeros((n, n))
    cons = []
    for e in c.elements:
        if isinstance(e, Capacitor):
            v = _incidence(idx, e.a, e.b, n)
            cap += e.value * np.outer(v, v)
        elif isinstance(e, Inductor):
            v = _incidence(idx, e.a, e.b, n)
            inv_ind += np.outer(v, v) / e.value
        elif isinstance(e, Gyrator):
            vl = _incidence(idx, *e.left, n)
            vr = _incidence(idx, *e.right, n)
            gnr += (np.outer(vl, vr) - np.outer(vr, vl)) / e.resistance
        elif isinstance(e, Circulator3):
            inc = np.stack([_incidence(idx, t, e.ref, n) for t in e.terminals], axis=1)
            gnr += inc @ circulator_admittance(e.phi, e.resistance) @ inc.T
        elif isinstance(e, Transformer):
            vp = _incidence(idx, *e.primary, n)
            vs = _incidence(idx, *e.secondary, n)
            cons.append(vp - e.ratio * vs)
    for p in c.ports:
        if include_junction_caps and isinstance(p, JunctionPort) and p.cj is not None:
            v = _incidence(idx, p.a, p.b, n)
            cap += p.cj * np.outer(v, v)
    proj = sla.null_space(np.array(cons)) if cons else np.eye(n)
    e = np.stack([_incidence(idx, p.a, p.b, n) for p in c.ports], axis=1) if c.ports else np.zeros((n, 0))
    return NodalSystem(
        nodes,
        proj,
        proj.T @ cap @ proj,
        proj.T @ inv_ind @ proj,
        proj.T @ gnr @ proj,
        proj.T @ e,
    )


def _nodal_matrix(sys: NodalSystem, omega: float) -> np.ndarray:
    if omega <= 0.0:
        raise SingularAtFrequency("nodal matrix evaluated at omega <= 0")
    s = 1j * omega
    return s * sys.cap + sys.inv_ind / s + sys.gnr


def _checked_solve(m: np.ndarray, rhs: np.ndarray, omega: float) -> np.ndarray:
    scale = np.max(np.abs(m), axis=1)
    if np.any(scale == 0.0):
        raise SingularAtFrequency(f"floating node at omega={omega:.8g} rad/ns")
    dm = m / scale[:, None]
    if np.linalg.cond(dm) > 1e15:
        raise SingularAtFrequency(f"network resonance at omega={omega:.10g} rad/ns")
    out = np.linalg.solve(dm, rhs / scale[:, None])
    if not np.all(np.isfinite(out)):
        raise SingularAtFrequency(f"non-finite nodal solution at omega={omega:.8g}")
    return out


def mna_impedance(c: Circuit, omega: float, sys: NodalSystem | None = None) -> np.ndarray:
    """Port impedance Z(i omega) with every port open (current driven)."""
    sys = sys or nodal_system(c)
    m = _nodal_matrix(sys, omega)
    return sys.ports.T @ _checked_solve(m, sys.ports.astype(complex), omega)


def mna_immittance(c: Circuit, omega: float, sys: NodalSystem | None = None) -> np.ndarray:
    """Port admittance Y(i omega), from a voltage-driven augmented nodal solve."""
    sys = sys or nodal_system(c)
    m = _nodal_matrix(sys, omega)
    nx, npt = sys.ports.shape
    aug = np.zeros((nx + npt, nx + npt), dtype=complex)
    aug[:nx, :nx] = m
    aug[:nx, nx:] = -sys.ports
    aug[nx:, :nx] = sys.ports.T
    rhs = np.zeros((nx + npt, npt), dtype=complex)
    rhs[nx:, :] = np.eye(npt)
    sol = _checked_solve(aug, rhs, omega)
    return sol[nx:, :]


mna_admittance = mna_immittance


# ---------------------------------------------------------------------------
# pole-residue extraction


def internal_frequencies(c: Circuit, kind: Kind, sys: NodalSystem | None = None, rel_tol: float = 1e-8) -> np.ndarray:
    """Positive frequencies of the lossless internal dynamics.

    For an admittance the ports are shorted, for an impedance they are open.
    Frequencies come from the quadratic pencil s^2 C + s G + Gamma, linearized
    to a generalized eigenproblem.
    """
    sys = sys or nodal_system(c)
    if Kind(kind) is Kind.ADMITTANCE and sys.ports.shape[1]:
        q = sla.null_space(sys.ports.T)
    else:
        q = np.eye(sys.cap.shape[0])
    m = q.T @ sys.cap @ q
    g = q.T @ sys.gnr @ q
    k = q.T @ sys.inv_ind @ q
    n = m.shape[0]
    if n == 0:
        return np.zeros(0), np.zeros(0, dtype=int)
    a = np.block([[np.zeros((n, n)), np.eye(n)], [-k, -g]])
    b = np.block([[np.eye(n), np.zeros((n, n))], [np.zeros((n, n)), m]])
    alpha, beta = sla.eig(a, b, homogeneous_eigvals=True)[0]
    finite = np.abs(beta) > 1e-12 * np.abs(alpha)
    s = alpha[finite] / beta[finite]
    scale = np.max(np.abs(s)) if s.size else 1.0
    out = []
    for lam in s:
        if lam.imag <= rel_tol * scale:
            continue
        if abs(lam.real) > 1e-6 * abs(lam):
            raise ImqedError(f"internal mode at s={lam} is not lossless")
        out.append(lam.imag)
    out = np.sort(np.array(out))
    # collapse numerically coincident eigenvalues (multiplicity kept in counts)
    uniq: list[list[float]] = []
    for w in out:
        if uniq and abs(w - uniq[-1][0]) <= 1e-9 * w:
            uniq[-1].append(w)
        else:
            uniq.append([w])
    return np.array([np.mean(u) for u in uniq]), np.array([len(u) for u in uniq])


def _rank(m: np.ndarray, tol: float = 1e-8) -> int:
    ev = np.abs(np.linalg.eigvalsh(0.5 * (m + m.T)))
    return int(np.sum(ev > tol * max(ev.max(), 1e-300))) if ev.size else 0


def extract_pole_residue(
    c: Circuit,
    kind: Kind | str = Kind.ADMITTANCE,
    min_gap: float = 1e-9,
) -> PoleResidueResponse:
    """Pole-residue form of the port admittance (default) or impedance."""
    kind = Kind(kind)
    sys = nodal_system(c)
    npt = sys.ports.shape[1]
    if npt == 0:
        raise ImqedError("circuit has no ports")
    fn: Callable[[float], np.ndarray]
    if kind is Kind.ADMITTANCE:
        fn = lambda w: mna_immittance(c, w, sys)  # noqa: E731
    else:
        fn = lambda w: mna_impedance(c, w, sys)  # noqa: E731
    freqs, mult = internal_frequencies(c, kind, sys)
    poles: list[Pole] = []
    for w, m in zip(freqs, mult):
        try:
            res = residue_at(fn, float(w))
        except NotAPole:
            continue  # mode invisible from the ports
        pole = pole_from_residue(res, float(w))
        if m > 1:
            limit = 1 if np.linalg.norm(pole.res_anti) <= 1e-8 * np.linalg.norm(pole.res_sym) else 2
            if _rank(pole.res_sym) > limit:
                raise DegeneratePole(
                    f"{m} coincident internal modes at {w / TWO_PI:.9g} GHz give a rank "
                    f"{_rank(pole.res_sym)} residue"
                )
        poles.append(pole)
    skeleton = PoleResidueResponse(
        kind, npt, np.zeros((npt, npt)), ac_poles=tuple(poles), min_gap=min_gap
    )
    return _fit_dc(c, kind, fn, skeleton, freqs)


def _sample_grid(ref: float, poles: Sequence[float], n: int = 31) -> np.ndarray:
    grid = ref * np.logspace(-3, 3, n)
    keep = [w for w in grid if all(abs(w - p) > 0.03 * p for p in poles)]
    return np.array(keep)


def _fit_dc(c, kind, fn, skeleton: PoleResidueResponse, freqs) -> PoleResidueResponse:
    from .immittance import ac_part

    npt = skeleton.n_ports
    pole_w = [p.omega for p in skeleton.ac_poles]
    ref = float(np.exp(np.mean(np.log(freqs)))) if len(freqs) else _natural_scale(c)
    grid = _sample_grid(ref, list(freqs))
    rem = np.array([fn(w) - ac_part(skeleton, w) for w in grid])
    x = grid / ref
    wts = 1.0 / (x + 1.0 / x)
    if kind is Kind.ADMITTANCE:
        design = np.stack([x, -1.0 / x], axis=1) * wts[:, None]
        coef, *_ = np.linalg.lstsq(design, (rem.imag * wts[:, None, None]).reshape(len(grid), -1), rcond=None)
        cap = coef[0].reshape(npt, npt) / ref
        ind = coef[1].reshape(npt, npt) * ref
        nr = np.mean(rem.real, axis=0)
        cap, ind = 0.5 * (cap + cap.T), 0.5 * (ind + ind.T)
        nr = 0.5 * (nr - nr.T)
        size = max(np.linalg.norm(cap) * ref, 1e-300)
        if np.linalg.norm(ind) / ref < 1e-9 * size:
            ind = np.zeros_like(ind)
        if np.linalg.norm(nr) < 1e-9 * size:
            nr = np.zeros_like(nr)
        cap[np.abs(cap) < 1e-12 * np.max(np.abs(cap))] = 0.0
        if np.any(ind):
            ind[np.abs(ind) < 1e-12 * np.max(np.abs(ind))] = 0.0
        resp = PoleResidueResponse(kind, npt, ind, cap, nr, skeleton.ac_poles, skeleton.min_gap)
    else:
        design = (-1.0 / x * wts)[:, None]
        coef, *_ = np.linalg.lstsq(design, (rem.imag * wts[:, None, None]).reshape(len(grid), -1), rcond=None)
        ind = coef[0].reshape(npt, npt) * ref
        ind = 0.5 * (ind + ind.T)
        ind[np.abs(ind) < 1e-12 * max(np.max(np.abs(ind)), 1e-300)] = 0.0
        resp = PoleResidueResponse(kind, npt, ind, None, None, skeleton.ac_poles, skeleton.min_gap)
    # the fit must reproduce the network everywhere on the grid
    err = max(
        np.linalg.norm(evaluate(resp, w) - fn(w)) / max(np.linalg.norm(fn(w)), 1e-300) for w in grid
    )
    if err > 1e-6:
        what = "impedance (ports not capacitively shunted?)" if kind is Kind.IMPEDANCE else "admittance"
        raise NonFinite(f"pole-residue fit of the {what} is inaccurate (rel. err {err:.2e})")
    return resp


def _natural_scale(c: Circuit) -> float:
    sys = nodal_system(c)
    cs = np.trace(sys.cap) / max(sys.cap.shape[0], 1)
    ls = np.trace(sys.inv_ind) / max(sys.cap.shape[0], 1)
    if cs > 0 and ls > 0:
        return float(np.sqrt(ls / cs))
    gs = np.max(np.abs(sys.gnr)) if sys.gnr.size else 0.0
    if cs > 0 and gs > 0:
        return float(gs / cs)
    return 1.0


# ---------------------------------------------------------------------------
# example circuits


class ExampleName(str, enum.Enum):
    TL_RESONATOR_2PORT = "TlResonator2Port"
    INDUCTIVE_COUPLING_2PORT = "InductiveCoupling2Port"
    PURCELL_CHAIN_3PORT = "PurcellChain3Port"
    CIRCULATOR_CAPACITIVE = "CirculatorCapacitive"
    CIRCULATOR_RESONATOR = "CirculatorResonator"
    ISOLATOR = "Isolator"


# Capacitances in fF, frequencies in GHz (ordinary), resistances in ohm,
# E_J/h in GHz, phases in rad.
DEFAULT_PARAMS: dict[ExampleName, dict[str, float]] = {
    ExampleName.TL_RESONATOR_2PORT: {
        "C_J": 51.0,
        "C_c": 5.1,
        "C_k": 0.0,
        "f_J": 5.57,
        "f_r": 7.07,
        "z_r": 50.0,
    },
    ExampleName.INDUCTIVE_COUPLING_2PORT: {
        "C_J": 100.0,
        "C_c": 10.0,
        "E_J1": 20.4,
        "E_J2": 12.6,
        "f_r": 7.8,
        "z_r": 50.0,
        "L_c": 80.0,  # nH
    },
    ExampleName.PURCELL_CHAIN_3PORT: {
        "C_J": 77.0,
        "L_J": 10.0,  # nH
        "C_c": 1.0,  # C_jr; C_jd = 0.1 C_c
        "C_rp": 2.0,
        "C_k": 20.0,
        "C_d": 100.0,
        "f_r": 7.50,
        "f_f": 7.51,
        "z_r": 50.0,
        "z_f": 50.0,
        "Z0": 50.0,
    },
    ExampleName.CIRCULATOR_CAPACITIVE: {
        "C_J": 100.0,
        "C_c": 10.0,
        "C_g": 150.0,
        "R": 50.0,
        "phi": math.pi / 3,
        "E_J": 11.37,
    },
    ExampleName.CIRCULATOR_RESONATOR: {
        "C_J": 100.0,
        "C_jr": 10.0,
        "C_g": 10.0,
        "C_rs": 100.0,
        "f_r": 7.0,
        "z_r": 50.0,
        "R": 50.0,
        "phi": math.pi / 3,
        "E_J": 14.51,
    },
    ExampleName.ISOLATOR: {
        "C_J": 100.0,
        "C_c": 1.0,
        "C_g": 0.01,
        "C_D": 0.01,
        "phi": math.pi / 3,
        "omega_ratio": 10.0,  # omegabar / omega_y; R and E_J follow from it
        "Z0_over_R": 3.0,
    },
}


@dataclass(frozen=True)
class ExampleSpec:
    name: ExampleName
    params: dict = field(default_factory=dict)

    @staticmethod
    def default(name: ExampleName | str, **overrides) -> "ExampleSpec":
        name = ExampleName(name)
        p = dict(DEFAULT_PARAMS[name])
        p.update(overrides)
        return ExampleSpec(name, p)


@dataclass(frozen=True)
class Example:
    circuit: Circuit
    closed_form: PoleResidueResponse | None = None
    closed_form_z: PoleResidueResponse | None = None
    derived: dict = field(default_factory=dict)


def _require(spec: ExampleSpec, keys: Sequence[str]) -> dict:
    missing = [k for k in keys if k not in spec.params or spec.params[k] is None]
    if missing:
        raise MissingParam(f"{spec.name.value} needs parameters {missing}")
    return {k: float(spec.params[k]) for k in keys}


def build_example(spec: ExampleSpec) -> Example:
    builders = {
        ExampleName.TL_RESONATOR_2PORT: _g1,
        ExampleName.INDUCTIVE_COUPLING_2PORT: _g2,
        ExampleName.PURCELL_CHAIN_3PORT: _g3,
        ExampleName.CIRCULATOR_CAPACITIVE: _g4,
        ExampleName.CIRCULATOR_RESONATOR: _g5,
        ExampleName.ISOLATOR: _isolator,
    }
    return builders[ExampleName(spec.name)](spec)


def _lc_from(f_ghz: float, z: float) -> tuple[float, float]:
    """(L in nH, C in nF) of a resonator with frequency f and impedance z."""
    w = ghz_to_rad(f_ghz)
    return z / w, 1.0 / (w * z)


def _ej_from_plasma(f_ghz: float, c_nf: float) -> float:
    """E_J/h in GHz such that 1/sqrt(L_J C) equals 2 pi f."""
    from .units import josephson_energy_from_inductance

    w = ghz_to_rad(f_ghz)
    return josephson_energy_from_inductance(1.0 / (w * w * c_nf))


def _g1(spec: ExampleSpec) -> Example:
    p = _require(spec, ["C_J", "C_c", "C_k", "f_J", "f_r", "z_r"])
    cj, cc, ck = ff(p["C_J"]), ff(p["C_c"]), ff(p["C_k"])
    lr, cr = _lc_from(p["f_r"], p["z_r"])
    ej = _ej_from_plasma(p["f_J"], cj)
    elems: list[Element] = [
        Capacitor("p1", "r", cc),
        Capacitor("p2", "r", cc),
        Capacitor("r", GROUND, cr),
        Inductor("r", GROUND, lr),
    ]
    if ck > 0:
        elems.append(Capacitor("p1", "p2", ck))
    ports = (JunctionPort("J1", "p1", GROUND, ej, cj), JunctionPort("J2", "p2", GROUND, ej, cj))
    circuit = Circuit(tuple(elems), ports)
    cy, cz, derived = _g1_closed_forms(cj, cc, cr, lr)
    return Example(circuit, cy if ck == 0 else None, cz if ck == 0 else None, derived)


def _g1_closed_forms(cj, cc, cr, lr):
    r_cj, r_cr = cc / cj, cc / cr
    w_r = 1.0 / math.sqrt(lr * cr)
    ct_j = cc + cj
    w_rz = w_r * math.sqrt(r_cj + 1.0) / math.sqrt(2 * r_cr + r_cj + 1.0)
    r_z2 = r_cj**2 / cr
    cbar_j = ct_j * (1.0 - r_cj * r_cr)
    # The mutual term of D_inf is negative: the floating resonator node
    # removes charge shared between the two ports.
    cbar = -cc * r_cr
    w_ry = w_rz * (1.0 - r_cj * r_cr)
    r_y2 = r_cr**2 / lr
    ones = np.ones((2, 2))
    zero = np.zeros((2, 2))
    cz = PoleResidueResponse(Kind.IMPEDANCE, 2, np.eye(2) / ct_j, ac_poles=(Pole(w_rz, r_z2 * ones, zero),))
    cy = PoleResidueResponse(
        Kind.ADMITTANCE,
        2,
        zero,
        np.array([[cbar_j, cbar], [cbar, cbar_j]]),
        zero,
        (Pole(w_ry, r_y2 * ones, zero),),
    )
    derived = {"r_cj": r_cj, "r_cr": r_cr, "omega_rz": w_rz, "omega_ry": w_ry, "Cbar_J": cbar_j, "Cbar": cbar}
    return cy, cz, derived


def _g2(spec: ExampleSpec) -> Example:
    p = _require(spec, ["C_J", "C_c", "E_J1", "E_J2", "f_r", "z_r", "L_c"])
    cj, cc = ff(p["C_J"]), ff(p["C_c"])
    lr, cr = _lc_from(p["f_r"], p["z_r"])
    elems = (
        Capacitor("p1", "r", cc),
        Capacitor("p2", "r", cc),
        Capacitor("r", GROUND, cr),
        Inductor("r", GROUND, lr),
        Inductor("p1", "p2", p["L_c"]),
    )
    ports = (
        JunctionPort("J1", "p1", GROUND, p["E_J1"], cj),
        JunctionPort("J2", "p2", GROUND, p["E_J2"], cj),
    )
    cy, _, derived = _g1_closed_forms(cj, cc, cr, lr)
    d0 = (np.eye(2) - np.array([[0.0, 1.0], [1.0, 0.0]])) / p["L_c"]
    cy = PoleResidueResponse(Kind.ADMITTANCE, 2, d0, cy.cap_dc, None, cy.ac_poles)
    return Example(Circuit(elems, ports), cy, None, derived)


def _g3(spec: ExampleSpec) -> Example:
    p = _require(spec, ["C_J", "L_J", "C_c", "C_rp", "C_k", "C_d", "f_r", "f_f", "z_r", "z_f", "Z0"])
    from .units import josephson_energy_from_inductance

    cj, cjr = ff(p["C_J"]), ff(p["C_c"])
    cjd = 0.1 * cjr
    lr, cr = _lc_from(p["f_r"], p["z_r"])
    lf, cf = _lc_from(p["f_f"], p["z_f"])
    elems = (
        Capacitor("q", "d", cjd),
        Capacitor("d", GROUND, ff(p["C_d"])),
        Capacitor("q", "r", cjr),
        Capacitor("r", GROUND, cr),
        Inductor("r", GROUND, lr),
        Capacitor("r", "f", ff(p["C_rp"])),
        Capacitor("f", GROUND, cf),
        Inductor("f", GROUND, lf),
        Capacitor("f", "o", ff(p["C_k"])),
        Capacitor("o", GROUND, ff(p["C_d"])),
    )
    ports = (
        JunctionPort("J1", "q", GROUND, josephson_energy_from_inductance(p["L_J"]), cj),
        DrivePort("RO", "o", GROUND, p["Z0"]),
        DrivePort("D", "d", GROUND, p["Z0"]),
    )
    derived = {"C_jr": cjr, "C_jd": cjd, "C_r": cr, "C_p": cf, "L_r": lr, "L_p": lf}
    return Example(Circuit(elems, ports), None, None, derived)


def omega_y(phi: float, resistance: float, c_series: float, c_ground: float) -> float:
    """Admittance ac pole of the circulator with capacitive filters (rad/ns)."""
    return math.tan(phi / 2.0) / (resistance * (c_series + c_ground))


def _circulator_core(prefix_nodes, c_series, c_ground, phi, resistance):
    elems: list[Element] = []
    for k, pn in enumerate(prefix_nodes, start=1):
        elems.append(Capacitor(pn, f"c{k}", c_series))
        if c_ground > 0:
            elems.append(Capacitor(f"c{k}", GROUND, c_ground))
    elems.append(Circulator3(("c1", "c2", "c3"), GROUND, phi, resistance))
    return elems


def _g4(spec: ExampleSpec) -> Example:
    p = _require(spec, ["C_J", "C_c", "C_g", "R", "phi", "E_J"])
    cj, cc, cg = ff(p["C_J"]), ff(p["C_c"]), ff(p["C_g"])
    elems = _circulator_core(["p1", "p2", "p3"], cc, cg, p["phi"], p["R"])
    ports = tuple(JunctionPort(f"J{k}", f"p{k}", GROUND, p["E_J"], cj) for k in (1, 2, 3))
    cy, cz, derived = g4_closed_forms(cj, cc, cg, p["R"], p["phi"])
    return Example(Circuit(tuple(elems), ports), cy, cz, derived)


def _skew3() -> np.ndarray:
    """S(2 pi/3) - S(-2 pi/3)."""
    return circulator_s(2 * math.pi / 3) - circulator_s(-2 * math.pi / 3)


def g4_closed_forms(cj, cc, cg, resistance, phi):
    """Second-order closed forms for the circulator with capacitive filters."""
    r_cg, r_cj = cc / cg, cc / cj
    tan = math.tan(phi / 2.0)
    wy = omega_y(phi, resistance, cc, cg)
    cbar_j = cj * (1 + r_cj) - cg * r_cg**2
    g = tan * r_cg**2 / (math.sqrt(3.0) * resistance)
    alpha = tan**2 * r_cg**2 / (3 * resistance**2 * cg)
    k = _skew3()
    ssum = circulator_s(2 * math.pi / 3) + circulator_s(-2 * math.pi / 3)
    eye = np.eye(3)
    cy = PoleResidueResponse(
        Kind.ADMITTANCE,
        3,
        np.zeros((3, 3)),
        cbar_j * eye,
        -g * k,
        (Pole(abs(wy), alpha * (2 * eye - ssum), math.sqrt(3.0) * wy * alpha * k),),
    )
    ck = cc * r_cg / 3
    ct_j = cbar_j + 2 * ck
    wz = wy * (1 - r_cg * r_cj)
    beta = r_cj**2 / (3 * cg)
    # A_0 is printed with the capacitances themselves; it multiplies 1/s as an
    # inverse capacitance, so the matrix is inverted here.
    a0 = np.linalg.inv(ct_j * eye - ck * ssum)
    cz = PoleResidueResponse(
        Kind.IMPEDANCE,
        3,
        a0,
        ac_poles=(Pole(abs(wz), beta * (2 * eye - ssum), math.sqrt(3.0) * wz * beta * k),),
    )
    derived = {"omega_y": wy, "omega_z": wz, "Cbar_J": cbar_j, "G": g, "alpha": alpha, "beta": beta}
    return cy, cz, derived


def g4_exact_admittance(cj, cc, cg, resistance, phi) -> PoleResidueResponse:
    """Exact admittance of the circulator with capacitive filters.

    Each circulator terminal sees C_t = C_c + C_g; eliminating those nodes gives
    Y(s) = s (C_J + C_c) - s^2 C_c^2 (s C_t + Y_c)^-1, which is split on the
    eigenvectors of the circulant Y_c.
    """
    ct = cc + cg
    yc = circulator_admittance(phi, resistance)
    wy = omega_y(phi, resistance, cc, cg)
    cap = (cj + cc * cg / ct) * np.eye(3)
    nr = (cc / ct) ** 2 * yc
    # pole part: -(C_c^2/C_t) (Y_c/C_t)^2 (s + Y_c/C_t)^-1 on the k = +-1 modes
    m = yc / ct
    # (s + m)^-1 m^2 = (s m^2 - m^3) / (s^2 + wy^2)  since m^2 = -wy^2 P_perp
    res_sym = -(cc**2 / ct) * (m @ m)
    res_anti = (cc**2 / ct) * (m @ m @ m)
    res_sym = 0.5 * (res_sym + res_sym.T)
    res_anti = 0.5 * (res_anti - res_anti.T)
    # phi < 0 gives omega_y < 0: the pole sits at |omega_y|, the antisymmetric
    # residue carries the sign
    return PoleResidueResponse(Kind.ADMITTANCE, 3, np.zeros((3, 3)), cap, nr, (Pole(abs(wy), res_sym, res_anti),))


def _g5(spec: ExampleSpec) -> Example:
    p = _require(spec, ["C_J", "C_jr", "C_g", "C_rs", "f_r", "z_r", "R", "phi", "E_J"])
    cj, cjr, cg, crs = ff(p["C_J"]), ff(p["C_jr"]), ff(p["C_g"]), ff(p["C_rs"])
    lr, cr = _lc_from(p["f_r"], p["z_r"])
    elems: list[Element] = []
    for k in (1, 2, 3):
        elems += [
            Capacitor(f"p{k}", f"r{k}", cjr),
            Capacitor(f"r{k}", GROUND, cr),
            Inductor(f"r{k}", GROUND, lr),
        ]
    elems += _circulator_core(["r1", "r2", "r3"], crs, cg, p["phi"], p["R"])
    ej = p["E_J"] if p["E_J"] > 0 else None
    ports = tuple(JunctionPort(f"J{k}", f"p{k}", GROUND, ej, cj) for k in (1, 2, 3))
    derived = {"omega_y": omega_y(p["phi"], p["R"], crs, cg), "L_r": lr, "C_r": cr}
    return Example(Circuit(tuple(elems), ports), None, None, derived)


def fig9_params() -> dict:
    """Scattering example parameters: phase chosen so that omega_y/3 = 2 pi 12.08 GHz."""
    crs, r = 5.6, 100.0
    target = 3 * ghz_to_rad(12.08)
    phi = 2 * math.atan(target * r * ff(crs))
    return {
        "C_J": 10.0,
        "C_jr": 10.0,
        "C_g": 0.0,
        "C_rs": crs,
        "f_r": 12.08,
        "z_r": 50.0,
        "R": r,
        "phi": phi,
        "E_J": 0.0,
    }


def isolator_design(params: Mapping[str, float]) -> dict:
    """Element values of the isolator from its dimensionless design targets.

    C_J fixes E_C; the junction frequency is then chosen so that
    delta = -0.05 omegabar, and R so that omegabar = ratio * omega_y.
    ``Z0_over_R`` <= 0 selects the exactly matched port impedance
    ``Z0_matched`` (NaN when no isolating Z0 exists).
    """
    from .effective import transmon_for_anharmonicity

    cj = ff(params["C_J"])
    cc = ff(params["C_c"])
    cg = ff(params["C_g"])
    cd = ff(params["C_D"])
    phi = params["phi"]
    ct_j = cj + cc * cg / (cc + cg)
    ej_ghz, wbar = transmon_for_anharmonicity(ct_j, -0.05)
    wy = wbar / params["omega_ratio"]
    resistance = math.tan(phi / 2) / (wy * (cc + cg))
    # isolation requires sqrt(3)/(omega_y C_c) = Z0/(1 + (omegabar C_D' Z0)^2);
    # the smaller root is the one continuous with C_D -> 0
    lhs = math.sqrt(3.0) / (wy * cc)
    b2 = (wbar * (cd + cc * cg / (cc + cg))) ** 2
    disc = 1.0 - 4.0 * lhs * lhs * b2
    z0_matched = (1.0 - math.sqrt(disc)) / (2.0 * lhs * b2) if disc >= 0 and b2 > 0 else (lhs if b2 == 0 else math.nan)
    ratio = params["Z0_over_R"]
    return {
        "C_J": cj,
        "C_c": cc,
        "C_g": cg,
        "C_D": cd,
        "phi": phi,
        "R": resistance,
        "E_J": ej_ghz,
        "omega_bar": wbar,
        "omega_y": wy,
        "Z0": ratio * resistance if ratio > 0 else z0_matched,
        "Z0_matched": z0_matched,
    }


def isolator_circuit(design: Mapping[str, float], z0: float | None = None) -> Circuit:
    d = design
    elems = _circulator_core(["p1", "p2", "p3"], d["C_c"], d["C_g"], d["phi"], d["R"])
    elems.append(Capacitor("p3", GROUND, d["C_D"]))
    ports = (
        JunctionPort("J1", "p1", GROUND, d["E_J"], d["C_J"]),
        JunctionPort("J2", "p2", GROUND, d["E_J"], d["C_J"]),
        DrivePort("D3", "p3", GROUND, d["Z0"] if z0 is None else z0),
    )
    return Circuit(tuple(elems), ports)


def _isolator(spec: ExampleSpec) -> Example:
    p = _require(spec, ["C_J", "C_c", "C_g", "C_D", "phi", "omega_ratio", "Z0_over_R"])
    design = isolator_design(p)
    return Example(isolator_circuit(design), None, None, design)
