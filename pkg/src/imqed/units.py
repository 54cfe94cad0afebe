"""Unit conventions used throughout the package.

Internal working units form a consistent set: time in ns, inductance in nH,
capacitance in nF, resistance in ohm.  Angular frequencies are therefore in
rad/ns.  Energies divided by hbar are also reported in rad/ns.

A quadratic Hamiltonian written in these units keeps the same matrix after the
rescaling x -> x / sqrt(hbar), p -> p / sqrt(hbar), so canonical pairs with
[x, p] = i can be read off directly once the matrix is known.
"""

from __future__ import annotations

import math

E_CHARGE_SI = 1.602176634e-19  # C
HBAR_SI = 1.054571817e-34  # J s

# Internal units: charge nC, flux V*ns, energy 1e-9 J, action 1e-18 J s.
E_CHARGE = E_CHARGE_SI * 1e9
HBAR = HBAR_SI * 1e18
PHI0 = HBAR / (2.0 * E_CHARGE)  # reduced flux quantum, V*ns

#: (Phi/phi0)^2 = PHASE_SCALE * x'^2 for a canonical flux x' with [x', p'] = i.
PHASE_SCALE = 4.0 * E_CHARGE**2 / HBAR

TWO_PI = 2.0 * math.pi

_PREFIX = {
    "": 1.0,
    "a": 1e-18,
    "f": 1e-15,
    "p": 1e-12,
    "n": 1e-9,
    "u": 1e-6,
    "µ": 1e-6,
    "m": 1e-3,
    "k": 1e3,
    "K": 1e3,
    "M": 1e6,
    "meg": 1e6,
    "G": 1e9,
    "T": 1e12,
}


def farad(value_si: float) -> float:
    """Convert a capacitance in farad to internal nF."""
    return value_si * 1e9


def henry(value_si: float) -> float:
    """Convert an inductance in henry to internal nH."""
    return value_si * 1e9


def ff(value: float) -> float:
    """Capacitance given in fF, returned in nF."""
    return value * 1e-6


def ghz_to_rad(f_ghz: float) -> float:
    """Ordinary frequency in GHz to angular frequency in rad/ns."""
    return TWO_PI * f_ghz


def rad_to_ghz(omega: float) -> float:
    return omega / TWO_PI


def charging_energy(c_nf: float) -> float:
    """E_C = e^2 / (2 C hbar) in rad/ns for a capacitance in nF."""
    return E_CHARGE**2 / (2.0 * c_nf * HBAR)


def josephson_inductance(ej_ghz: float) -> float:
    """Linear junction inductance phi0^2 / E_J in nH for E_J/h given in GHz."""
    return PHI0**2 / (HBAR * ghz_to_rad(ej_ghz))


def josephson_energy_from_inductance(l_nh: float) -> float:
    """Inverse of :func:`josephson_inductance`, returning E_J/h in GHz."""
    return rad_to_ghz(PHI0**2 / (HBAR * l_nh))


def parse_quantity(text: str, unit: str, to_prefix: str = "") -> float:
    """Parse strings like ``100fF``, ``11.37GHz``, ``50`` or ``2.5e-3nH``.

    The value is returned in units of ``to_prefix + unit`` (SI by default).
    A bare number is taken as SI.  When the text already uses the target
    prefix no floating-point rescaling happens, so values round-trip exactly.
    Raises ``ValueError`` on junk.
    """
    s = text.strip()
    if s.lower().endswith(unit.lower()):
        s = s[: -len(unit)]
    elif unit == "Ohm" and s.endswith("Ω"):
        s = s[:-1]
    # split number and prefix
    idx = len(s)
    while idx > 0 and not (s[idx - 1].isdigit() or s[idx - 1] == "."):
        idx -= 1
    number, prefix = s[:idx], s[idx:]
    if prefix not in _PREFIX:
        raise ValueError(f"unknown unit prefix {prefix!r} in {text!r}")
    if to_prefix not in _PREFIX:
        raise ValueError(f"unknown target prefix {to_prefix!r}")
    value = float(number)
    if prefix == to_prefix:
        return value
    return value * _PREFIX[prefix] / _PREFIX[to_prefix]
