"""Mean curvature sphere congruence, Hopf fields and the Willmore functional.

Endomorphism fields are stored in the complex 4x4 form of
:mod:`wtorus.quatlin`, shape ``(n1, n2, 4, 4)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import surface as sf
from .surface import Immersion, TorusGrid

# Willmore energy is 2 * sum <A ^ *A> with <X, Y> = PAIRING * Re tr_C(X Y);
# PAIRING = 1/2 is the real part of the quaternionic trace and reproduces
# 2 pi^2 on the Clifford torus.
PAIRING = 0.5

CONFORMALITY_GATE = 1e-3


def _h(m):
    return np.conj(np.swapaxes(m, -1, -2))


def _blocks(m11, m12, m21, m22):
    top = np.concatenate([m11, m12], axis=-1)
    bot = np.concatenate([m21, m22], axis=-1)
    return np.concatenate([top, bot], axis=-2)


def _fro(m):
    return np.linalg.norm(m, axis=(-2, -1))


@dataclass(frozen=True)
class SphereField:
    grid: TorusGrid
    S: np.ndarray
    method: str = "central"

    def __neg__(self) -> "SphereField":
        return SphereField(self.grid, -self.S, self.method)

    def dual(self) -> "SphereField":
        """``S*`` on ``V*``, identified with ``V`` through the hermitian form."""
        return SphereField(self.grid, _h(self.S), self.method)

    def square_defect(self) -> float:
        eye = np.eye(4)
        return float(np.max(_fro(self.S @ self.S + eye)))


@dataclass(frozen=True)
class HopfField:
    """End(V)-valued 1-form ``x dx + y dy``; ``kind`` is ``"A"`` or ``"Q"``."""

    grid: TorusGrid
    x: np.ndarray
    y: np.ndarray
    kind: str

    def scaled(self, c) -> "HopfField":
        return HopfField(self.grid, c * self.x, c * self.y, self.kind)

    def star(self):
        return sf.hodge(self.x, self.y)

    def pointwise_norm(self) -> np.ndarray:
        return np.sqrt(_fro(self.x) ** 2 + _fro(self.y) ** 2)

    def max_norm(self) -> float:
        return float(np.max(self.pointwise_norm()))


@dataclass(frozen=True)
class CongruenceDiagnostics:
    """Per-sample bookkeeping from the sphere construction."""

    left_normal: np.ndarray
    right_normal: np.ndarray
    b: np.ndarray
    b_mismatch: np.ndarray
    conformality: np.ndarray


def _qinv(m):
    return sf._qinv(m)


def _unit_imag(m):
    return sf._unit_imaginary(m)


def mean_curvature_sphere(imm: Immersion, method: str = "central", *, diagnostics: bool = False):
    """Mean curvature sphere congruence of a sampled immersion.

    Each sample is handled in an affine chart adapted by a quaternionic
    unitary ``G`` with ``f(p) = 0``.  There ``S`` has the frame form
    ``S e = e N + psi b``, ``S psi = psi R`` with ``*df = N df = df R``
    and ``2 b df R = *dR - R dR`` (the condition ``Q|_L = 0``), evaluated
    on ``d/dx`` and ``d/dy`` and averaged.  ``N`` and ``R`` are projected
    to unit imaginary quaternions and ``b`` onto ``R b + b N = 0`` so
    that ``S^2 = -1`` holds to rounding.
    """
    g = sf.adapted_unitary(imm)
    cj = sf.chart_jets(imm, g, method)
    bad = sf._check_immersed(cj.fx, cj.fy)
    if np.any(bad):
        raise sf.DegenerateDerivativeError(f"not immersed at {int(bad.sum())} samples")
    fxi = _qinv(cj.fx)
    fyi = _qinv(cj.fy)
    r_raw = fxi @ cj.fy
    n_raw = cj.fy @ fxi
    r_x = -fxi @ cj.fxx @ r_raw + fxi @ cj.fxy
    r_y = -fxi @ cj.fxy @ r_raw + fxi @ cj.fyy
    n = _unit_imag(n_raw)
    r = _unit_imag(r_raw)
    b_from_x = 0.5 * (r_y - r @ r_x) @ (-r) @ fxi
    b_from_y = 0.5 * (-r_x - r @ r_y) @ (-r) @ fyi
    b = 0.5 * (b_from_x + b_from_y)
    b = 0.5 * (b + r @ b @ n)
    zero = np.zeros_like(n)
    s_chart = _blocks(n, zero, b, r)
    S = _h(g) @ s_chart @ g
    # one Newton step for S^2 = -1 removes the rounding amplified by |b|
    S = 0.5 * (S - np.linalg.inv(S))
    field = SphereField(imm.grid, S, method)
    if not diagnostics:
        return field
    diag = CongruenceDiagnostics(
        left_normal=n,
        right_normal=r,
        b=b,
        b_mismatch=np.sqrt(sf._qabs2(b_from_x - b_from_y)),
        conformality=sf.conformality_from_jets(cj.fx, cj.fy),
    )
    return field, diag


def sphere_derivative(S: SphereField, method: str | None = None):
    """``dS`` with its ``S``-commuting discretization error removed.

    A smooth ``S`` with ``S^2 = -1`` has ``S dS = -dS S``; the central
    difference only satisfies this to ``O(h^2)``, so the anticommuting
    part ``(X + S X S)/2`` is kept.
    """
    method = method or S.method
    sx, sy = sf.gradient(S.S, S.grid, method)
    s = S.S
    return 0.5 * (sx + s @ sx @ s), 0.5 * (sy + s @ sy @ s)


def hopf_fields(S: SphereField, method: str | None = None):
    """``A = (S dS + *dS)/4`` and ``Q = (S dS - *dS)/4``."""
    sx, sy = sphere_derivative(S, method)
    star_x, star_y = sf.hodge(sx, sy)
    s = S.S
    a = HopfField(S.grid, 0.25 * (s @ sx + star_x), 0.25 * (s @ sy + star_y), "A")
    q = HopfField(S.grid, 0.25 * (s @ sx - star_x), 0.25 * (s @ sy - star_y), "Q")
    return a, q


def reconstruct_dS(A: HopfField, Q: HopfField):
    """``2 (*Q - *A)``, which must return ``dS``."""
    qx, qy = Q.star()
    ax, ay = A.star()
    return 2 * (qx - ax), 2 * (qy - ay)


def type_residual(field: HopfField, S: SphereField) -> float:
    """Max violation of ``*A = SA = -AS`` (kind A) or ``*Q = -SQ = QS`` (kind Q)."""
    s = S.S
    star_x, star_y = field.star()
    sign = 1.0 if field.kind == "A" else -1.0
    out = 0.0
    for w, sw in ((field.x, star_x), (field.y, star_y)):
        out = max(out, float(np.max(_fro(sw - sign * s @ w))))
        out = max(out, float(np.max(_fro(sw + sign * w @ s))))
    return out


def pairing(x, y):
    return PAIRING * np.real(np.trace(x @ y, axis1=-2, axis2=-1))


def energy_density(A: HopfField) -> np.ndarray:
    """``2 <A ^ *A>`` as a density against ``dx dy``."""
    star_x, star_y = A.star()
    return 2.0 * (pairing(A.x, star_y) - pairing(A.y, star_x))


def willmore_energy(A: HopfField) -> float:
    return float(np.sum(energy_density(A)) * A.grid.cell_area)


def _edge_integrals(w, axis, h, method):
    """Integral of ``w`` along each grid edge in direction ``axis``."""
    if method != "spectral":
        return 0.5 * h * (w + np.roll(w, -1, axis=axis))
    # exact for the trigonometric interpolant along the grid line
    n = w.shape[axis]
    k = 2j * np.pi * np.fft.fftfreq(n, d=h)
    shape = [1] * w.ndim
    shape[axis] = n
    k = k.reshape(shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        weight = np.where(k == 0, h, (np.exp(k * h) - 1) / np.where(k == 0, 1, k))
    if n % 2 == 0:
        nyq = [slice(None)] * w.ndim
        nyq[axis] = n // 2
        weight = weight.copy()
        weight[tuple(nyq)] = 0.0
    spec = np.fft.fft(w, axis=axis)
    return np.fft.ifft(spec * weight, axis=axis)


def plaquette_curl(wx, wy, grid: TorusGrid, method: str = "central") -> np.ndarray:
    """Circulation of ``wx dx + wy dy`` around each cell, per unit area.

    Edge integrals use the trapezoid rule, or the exact integral of the
    trigonometric interpolant for ``method="spectral"``.
    """
    ix = _edge_integrals(wx, 0, grid.h1, method)
    iy = _edge_integrals(wy, 1, grid.h2, method)
    bottom = ix
    top = np.roll(ix, -1, axis=1)
    left = iy
    right = np.roll(iy, -1, axis=0)
    return (bottom + right - top - left) / grid.cell_area


def el_residual(field: HopfField, method: str = "central") -> float:
    """Max plaquette norm of ``d*A`` (trivial connection) per unit area."""
    star_x, star_y = field.star()
    return float(np.max(_fro(plaquette_curl(star_x, star_y, field.grid, method))))


def relative_el_residual(A: HopfField, Q: HopfField, method: str = "central") -> float:
    """Scale-free EL residual from the larger Hopf field.

    ``d*A = 0`` and ``d*Q = 0`` are equivalent; the larger field gives
    the better conditioned test.  Normalized by ``max|F| / sqrt(area)``.
    """
    f = A if A.max_norm() >= Q.max_norm() else Q
    scale = f.max_norm()
    if scale == 0.0:
        return 0.0
    return el_residual(f, method) * np.sqrt(f.grid.area) / scale


@dataclass(frozen=True)
class AQProduct:
    values: np.ndarray
    max_norm: float
    relative: float
    vanishes: bool


def product_AQ(A: HopfField, Q: HopfField, tol: float = 1e-8) -> AQProduct:
    """``A(d/dx) Q(d/dx)``, the coefficient of the ``K^2``-valued product."""
    vals = A.x @ Q.x
    mx = float(np.max(_fro(vals)))
    scale = float(np.max(_fro(A.x))) * float(np.max(_fro(Q.x)))
    rel = mx / scale if scale > 0 else 0.0
    return AQProduct(vals, mx, rel, bool(mx <= tol or rel <= tol))


@dataclass(frozen=True)
class EnergyReport:
    willmore_energy: float
    el_residual_A: float
    el_residual_Q: float
    AQ_max_norm: float
    energy_Q: float


def energy_report(A: HopfField, Q: HopfField, method: str = "central") -> EnergyReport:
    return EnergyReport(
        willmore_energy=willmore_energy(A),
        el_residual_A=el_residual(A, method),
        el_residual_Q=el_residual(Q, method),
        AQ_max_norm=product_AQ(A, Q).max_norm,
        energy_Q=willmore_energy(Q),
    )


@dataclass(frozen=True)
class SphereResiduals:
    """Max residuals of the three defining properties of the sphere congruence."""

    passes_through: float
    tangent: float
    mean_curvature: float


def sphere_residuals(imm: Immersion, S: SphereField, Q: HopfField | None = None) -> SphereResiduals:
    method = S.method
    p = sf.line_projector(imm)
    eye = np.eye(4)
    perp = eye - p
    s = S.S
    res_i = float(np.max(_fro(perp @ s @ p)))
    px, py = sf.gradient(p, imm.grid, method)
    dx = perp @ px @ p
    dy = perp @ py @ p
    scale = np.maximum(_fro(dx), 1e-300)
    s_quot = perp @ s @ perp
    s_sub = p @ s @ p
    res_ii = float(max(np.max(_fro(s_quot @ dx - dy) / scale), np.max(_fro(dx @ s_sub - dy) / scale)))
    if Q is None:
        _, Q = hopf_fields(S)
    sx, sy = sphere_derivative(S)
    dscale = np.maximum(np.sqrt(_fro(sx) ** 2 + _fro(sy) ** 2), 1e-300)
    res_iii = float(np.max(np.sqrt(_fro(Q.x @ p) ** 2 + _fro(Q.y @ p) ** 2) / dscale))
    return SphereResiduals(res_i, res_ii, res_iii)
