"""Weierstrass elliptic function for a lattice ``omega1 Z + omega2 Z``.

Evaluation uses the q-expansion over the normalized lattice ``Z + tau Z``
after reducing ``z`` into the fundamental cell centred at the origin, so
the series converges geometrically.  The leading pole is split off as
``pi^2 / sin^2(pi z)`` which lets callers evaluate the pole-free
combinations ``z^2 P(z)`` and ``z^3 P'(z)`` straight through lattice points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_TWO_PI_I = 2j * np.pi


class LatticePointError(ValueError):
    """Raised when ``P`` is evaluated directly at a lattice point."""


@dataclass(frozen=True)
class Lattice:
    omega1: complex
    omega2: complex

    def __post_init__(self):
        tau = self.omega2 / self.omega1
        if abs(tau.imag) < 1e-12:
            raise ValueError("degenerate lattice: periods are real-collinear")

    @property
    def tau(self) -> complex:
        tau = complex(self.omega2 / self.omega1)
        return tau if tau.imag > 0 else -tau

    @classmethod
    def rectangular(cls, a: float, b: float) -> "Lattice":
        return cls(complex(a), complex(0.0, b))


def _normalize(z, lattice):
    """Map z to u = z / omega1 reduced into the cell centred at 0."""
    tau = lattice.tau
    u = np.asarray(z, dtype=complex) / lattice.omega1
    n = np.round(u.imag / tau.imag)
    u = u - n * tau
    m = np.round(u.real)
    return u - m


def _series_terms(u, tau, nmax):
    x = np.exp(_TWO_PI_I * u)
    q = np.exp(_TWO_PI_I * tau)
    rest = np.zeros_like(u)
    drest = np.zeros_like(u)
    for n in range(1, nmax + 1):
        qn = q**n
        y1 = qn * x
        y2 = qn / x
        rest = rest + y1 / (1 - y1) ** 2 + y2 / (1 - y2) ** 2 - 2 * qn / (1 - qn) ** 2
        drest = drest + y1 * (1 + y1) / (1 - y1) ** 3 - y2 * (1 + y2) / (1 - y2) ** 3
        if abs(qn) < 1e-18:
            break
    # (2 pi i)^2 [1/12 + rest] is P - pi^2/sin^2 ; derivative likewise
    return _TWO_PI_I**2 * (1.0 / 12.0 + rest), _TWO_PI_I**3 * drest


def _nterms(tau):
    return int(np.ceil(40.0 / (2 * np.pi * tau.imag))) + 2


def wp_regular(z, lattice: Lattice):
    """Pole-free parts near the origin of the reduced argument.

    Returns ``(u, z2p, z3dp)`` where ``u`` is the reduced argument scaled
    back by ``omega1`` and ``z2p = u^2 P(u)``, ``z3dp = u^3 P'(u)``; both
    are smooth through ``u = 0`` where they equal 1 and -2.
    """
    tau = lattice.tau
    u = _normalize(z, lattice)
    rest, drest = _series_terms(u, tau, _nterms(tau))
    w = lattice.omega1
    s = np.pi * u
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(np.abs(s) < 1e-8, 1.0 + s**2 / 6.0, s / np.sin(s))
    # u^2 pi^2/sin^2(pi u) and u^3 d/du[...] = -2 (pi u/sin)^3 cos(pi u)
    z2p = ratio**2 + u**2 * rest
    z3dp = -2.0 * ratio**3 * np.cos(s) + u**3 * drest
    # back to the original lattice scaling: P(z) = P(u)/w^2, P'(z) = P'(u)/w^3
    return u * w, z2p, z3dp


def weierstrass_p(z, lattice: Lattice):
    """``(P(z), P'(z))``; raises :class:`LatticePointError` at lattice points."""
    zloc, z2p, z3dp = wp_regular(z, lattice)
    zloc = np.asarray(zloc)
    if np.any(np.abs(zloc) < 1e-12 * abs(lattice.omega1)):
        raise LatticePointError("P has a double pole at lattice points")
    return z2p / zloc**2, z3dp / zloc**3


def invariants(lattice: Lattice):
    """``(g2, g3)`` from the Eisenstein q-series of the normalized lattice."""
    tau = lattice.tau
    q = np.exp(_TWO_PI_I * tau)
    n = np.arange(1, 4 * _nterms(tau) + 1)
    qn = q**n
    e4 = 1 + 240 * np.sum(n**3 * qn / (1 - qn))
    e6 = 1 - 504 * np.sum(n**5 * qn / (1 - qn))
    w = lattice.omega1
    g2 = (4 * np.pi**4 / 3) * e4 / w**4
    g3 = (8 * np.pi**6 / 27) * e6 / w**6
    return complex(g2), complex(g3)
