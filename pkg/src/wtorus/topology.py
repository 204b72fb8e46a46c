"""Degrees of complex line and plane fields over the sampled torus.

Degrees come from plaquette products of link overlaps: each cell
contributes the argument of the product of the four edge overlaps, the
total divided by ``2 pi`` is an integer for any gauge.  Zero counts of
sections use the same bookkeeping, with the section's own phase added
edge by edge, so a section of a bundle ``E`` with isolated zeros has
total order ``deg E`` on the torus.

Sign convention: a holomorphic section has positive zero count, so the
tautological line ``[1 : P(z)]`` of a degree two map has degree ``-2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import quatlin as ql
from . import surface as sf
from .congruence import HopfField, SphereField
from .surface import Immersion, TorusGrid

TWO_PI = 2.0 * np.pi
SNAP_TOL = 1e-6
MIN_OVERLAP = 1e-3
# relative size below which a field sample counts as a zero
ZERO_THRESHOLD = 1e-6
# relative max norm below which a Hopf field is treated as identically zero
HOPF_ZERO_TOL = 1e-4
DEG_K = 0


class DegreeError(ValueError):
    """Overlaps too small or a degree that does not snap to an integer."""


class TwistorBranch(Exception):
    """Raised for a Bäcklund transform of an identically vanishing Hopf field."""


def _unit(v):
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    return v / n


def _snap(total, what):
    k = int(np.round(total))
    if abs(total - k) > SNAP_TOL:
        raise DegreeError(f"{what}: {total} is not an integer")
    return k


@dataclass(frozen=True)
class ComplexLineField:
    """Unit vectors in ``C^4`` spanning a complex line at each sample."""

    grid: TorusGrid
    vectors: np.ndarray

    def __post_init__(self):
        if self.vectors.shape != self.grid.shape + (4,):
            raise ValueError("line field must have shape (n1, n2, 4)")
        n = np.linalg.norm(self.vectors, axis=-1)
        if np.any(n < 1e-12):
            raise ValueError("line field vanishes somewhere")
        object.__setattr__(self, "vectors", self.vectors / n[..., None])

    def links(self):
        return line_links(self.vectors)

    def regauged(self, phases) -> "ComplexLineField":
        return ComplexLineField(self.grid, self.vectors * phases[..., None])


def line_links(v):
    """Edge overlaps ``<v(p), v(p + e)>`` in the x and y directions."""
    ux = np.sum(np.conj(v) * np.roll(v, -1, axis=0), axis=-1)
    uy = np.sum(np.conj(v) * np.roll(v, -1, axis=1), axis=-1)
    return ux, uy


def frame_links(b):
    """``det(B(p)^* B(p + e))`` for orthonormal frames ``B`` of shape ``(..., 4, r)``."""
    bh = np.conj(np.swapaxes(b, -1, -2))
    ux = np.linalg.det(bh @ np.roll(b, -1, axis=0))
    uy = np.linalg.det(bh @ np.roll(b, -1, axis=1))
    return ux, uy


def plaquette_flux(ux, uy):
    """Wrapped phase of the counterclockwise link product around each cell."""
    loop = ux * np.roll(uy, -1, axis=0) * np.conj(np.roll(ux, -1, axis=1)) * np.conj(uy)
    return np.angle(loop)


def degree_from_links(ux, uy, what="degree") -> int:
    small = min(float(np.min(np.abs(ux))), float(np.min(np.abs(uy))))
    if small < MIN_OVERLAP:
        raise DegreeError(f"{what}: edge overlap {small:.2e} too small, refine the grid")
    return _snap(-np.sum(plaquette_flux(ux, uy)) / TWO_PI, what)


def chern_degree(line: ComplexLineField) -> int:
    return degree_from_links(*line.links(), what="line degree")


def qwz_line(grid: TorusGrid, m: float = 1.0) -> ComplexLineField:
    """Lower band of the two-band model ``d(k) . sigma`` padded into ``C^4``.

    ``d = (sin kx, sin ky, m + cos kx + cos ky)``; the band has degree
    ``+-1`` for ``0 < |m| < 2`` and ``0`` for ``|m| > 2``.
    """
    x, y = grid.coords()
    kx = TWO_PI * x / grid.a
    ky = TWO_PI * y / grid.b
    d1, d2, d3 = np.sin(kx), np.sin(ky), m + np.cos(kx) + np.cos(ky)
    h = np.empty(grid.shape + (2, 2), dtype=complex)
    h[..., 0, 0] = d3
    h[..., 1, 1] = -d3
    h[..., 0, 1] = d1 - 1j * d2
    h[..., 1, 0] = d1 + 1j * d2
    _, vecs = np.linalg.eigh(h)
    v = np.zeros(grid.shape + (4,), dtype=complex)
    v[..., :2] = vecs[..., :, 0]
    return ComplexLineField(grid, v)


# --- eigenbundles of S -----------------------------------------------------------

def eigen_projector(S: SphereField, sign: int = 1):
    """``(1 - sign i S)/2``, the projector onto the ``sign * i`` eigenspace."""
    return 0.5 * (np.eye(4) - sign * 1j * S.S)


def eigen_frame(S: SphereField, sign: int = 1):
    """Orthonormal frame ``(n1, n2, 4, 2)`` of the ``sign * i`` eigenspace of ``S``."""
    u, s, _ = np.linalg.svd(eigen_projector(S, sign))
    if np.any(s[..., 2] > 1e-6 * s[..., 0]):
        raise DegreeError("S is not a complex structure (eigenspace rank != 2)")
    return u[..., :, :2]


def degree_V(S: SphereField) -> int:
    """Degree of ``V`` with complex structure ``S``, i.e. of its ``+i`` eigenspace."""
    return degree_from_links(*frame_links(eigen_frame(S, 1)), what="deg V")


def plus_line(imm: Immersion, S: SphereField) -> ComplexLineField:
    """``L_+``: the ``+i`` eigenline of ``S`` inside ``L``."""
    v = sf.normalized_cvec(imm)
    p = eigen_projector(S, 1)
    a = np.einsum("...ab,...b->...a", p, v)
    b = np.einsum("...ab,...b->...a", p, ql.right_mul_j(v))
    use_a = np.linalg.norm(a, axis=-1) >= np.linalg.norm(b, axis=-1)
    return ComplexLineField(imm.grid, np.where(use_a[..., None], a, b))


def degree_L(imm: Immersion, S: SphereField) -> int:
    return chern_degree(plus_line(imm, S))


def complement_in(frame, line):
    """Unit vector of ``span(frame)`` orthogonal to ``line`` (rank 2 frames)."""
    c = np.einsum("...ak,...a->...k", np.conj(frame), line)
    perp = np.stack([-np.conj(c[..., 1]), np.conj(c[..., 0])], axis=-1)
    return _unit(np.einsum("...ak,...k->...a", frame, perp))


# --- zero counting ---------------------------------------------------------------

@dataclass(frozen=True)
class VanishingOrder:
    order: int
    indices: np.ndarray
    mixed_signs: bool

    @property
    def zero_cells(self):
        return np.argwhere(self.indices != 0)


def vanishing_order(values, links_x=None, links_y=None, periodic=True,
                    threshold=ZERO_THRESHOLD) -> VanishingOrder:
    """Zero count of a section given by its frame coefficients ``values``.

    ``links_*`` are the frame overlaps (default trivial frames).  Each
    cell gets the index ``(sum of edge phases - frame flux) / 2 pi``.
    A value below ``threshold * max|values|`` on a cell corner means
    the zero sits on the grid; that is reported as an error.
    """
    s = np.asarray(values, dtype=complex)
    ux = np.ones_like(s) if links_x is None else links_x
    uy = np.ones_like(s) if links_y is None else links_y
    scale = float(np.max(np.abs(s)))
    if scale == 0.0:
        raise DegreeError("section vanishes identically")
    if np.any(np.abs(s) < threshold * scale):
        raise DegreeError("zero on a grid node; shift the grid and retry")
    ex = np.angle(np.conj(s) * np.roll(s, -1, axis=0) * ux)
    ey = np.angle(np.conj(s) * np.roll(s, -1, axis=1) * uy)
    circ = ex + np.roll(ey, -1, axis=0) - np.roll(ex, -1, axis=1) - ey
    idx = (circ - plaquette_flux(ux, uy)) / TWO_PI
    if not periodic:
        idx = idx[:-1, :-1]
    k = np.round(idx)
    if np.max(np.abs(idx - k)) > SNAP_TOL:
        raise DegreeError("cell index is not an integer")
    k = k.astype(int)
    return VanishingOrder(int(k.sum()), k, bool(np.any(k > 0) and np.any(k < 0)))


def hom_links(target, source):
    """Links of ``Hom(source, target)`` from the two unit frames."""
    tx, ty = line_links(target)
    sx, sy = line_links(source)
    return tx * np.conj(sx), ty * np.conj(sy)


def delta_section(imm: Immersion, S: SphereField):
    """Coefficients and links of ``delta(d/dx)`` in ``Hom_+(L, V/L)``.

    ``delta = (1 - P) dP`` on ``L``; ``(V/L)_+`` is represented by the
    unit vector of ``V_+`` orthogonal to ``L_+``.
    """
    p = sf.line_projector(imm)
    px, _ = sf.gradient(p, imm.grid, S.method)
    ell = plus_line(imm, S).vectors
    e = complement_in(eigen_frame(S, 1), ell)
    w = np.einsum("...ab,...b->...a", (np.eye(4) - p) @ px, ell)
    w = np.einsum("...ab,...b->...a", eigen_projector(S, 1), w)
    vals = np.sum(np.conj(e) * w, axis=-1)
    return vals, hom_links(e, ell), e


# --- Bäcklund transforms ----------------------------------------------------------

@dataclass(frozen=True)
class BacklundField:
    """Line ``ker A`` (kind A) or ``Im Q`` (kind Q) with a validity mask.

    ``line`` spans the ``-i`` eigenline of ``S`` inside the quaternionic
    line; ``other`` is the complementary unit vector in the source
    eigenspace, used as the frame of the quotient.
    """

    grid: TorusGrid
    kind: str
    line: np.ndarray
    other: np.ndarray
    mask: np.ndarray
    singular_values: np.ndarray

    @property
    def full(self) -> bool:
        return bool(np.all(self.mask))

    def quaternionic_line(self):
        """Orthonormal complex basis ``(line, line j)`` of the H-line."""
        return np.stack([self.line, ql.right_mul_j(self.line)], axis=-1)


def hopf_is_zero(field: HopfField, other: HopfField, tol=HOPF_ZERO_TOL) -> bool:
    ref = max(field.max_norm(), other.max_norm())
    return ref == 0.0 or field.max_norm() <= tol * ref


def backlund(field: HopfField, S: SphereField, other: HopfField | None = None,
             tol=HOPF_ZERO_TOL) -> BacklundField:
    """Forward (``ker A``) or backward (``Im Q``) Bäcklund line field.

    ``A`` maps ``V_-`` to ``V_+`` and ``Q`` maps ``V_+`` to ``V_-``, both
    with rank one away from zeros.  Raises :class:`TwistorBranch` if the
    field is identically zero.
    """
    ref = field.max_norm() if other is None else max(field.max_norm(), other.max_norm())
    if ref == 0.0 or field.max_norm() <= tol * ref:
        raise TwistorBranch(f"{field.kind} vanishes identically: twistor branch, no Bäcklund transform")
    src = eigen_frame(S, -1 if field.kind == "A" else 1)
    m = field.x @ src
    u, s, wh = np.linalg.svd(m)
    w = np.conj(np.swapaxes(wh, -1, -2))
    top = np.einsum("...ak,...k->...a", src, w[..., :, 0])
    if field.kind == "A":
        line = np.einsum("...ak,...k->...a", src, w[..., :, 1])
        other_vec = top
    else:
        line = u[..., :, 0]
        other_vec = top
    mask = s[..., 0] > ZERO_THRESHOLD * float(np.max(s[..., 0]))
    return BacklundField(field.grid, field.kind, line, other_vec, mask, s)


# --- the report ------------------------------------------------------------------

@dataclass
class DegreeReport:
    deg_L: int
    deg_V: int
    v: int
    ord_delta: int
    ord_A: int | None = None
    ord_Q: int | None = None
    ord_AQ: int | None = None
    deg_Ltilde: int | None = None
    deg_Lhat: int | None = None
    deg_K: int = DEG_K
    vanishing: str | None = None
    aq_vanishes: bool = False
    aq_hypothesis: bool = False
    identity_residuals: list = field(default_factory=list)

    def failed(self):
        return [r for r in self.identity_residuals if r[1] != r[2]]

    def to_dict(self):
        return {
            "deg_L": self.deg_L,
            "deg_V": self.deg_V,
            "v": self.v,
            "deg_K": self.deg_K,
            "ord_delta": self.ord_delta,
            "ord_A": self.ord_A,
            "ord_Q": self.ord_Q,
            "ord_AQ": self.ord_AQ,
            "deg_Ltilde": self.deg_Ltilde,
            "deg_Lhat": self.deg_Lhat,
            "vanishing_hopf_field": self.vanishing,
            "AQ_vanishes": self.aq_vanishes,
            "AQ_theorem_hypothesis": self.aq_hypothesis,
            "identities": [
                {"name": n, "lhs": lhs, "rhs": rhs, "holds": lhs == rhs}
                for n, lhs, rhs in self.identity_residuals
            ],
        }


def _ord_map(target, source, values):
    return vanishing_order(values, *hom_links(target, source)).order


def degree_identities(imm: Immersion, S: SphereField, A: HopfField, Q: HopfField,
                      willmore: bool = True, tol=HOPF_ZERO_TOL) -> DegreeReport:
    """Degrees of ``L``, ``V``, the Bäcklund lines and the zero orders.

    Zero orders of ``A``, ``Q`` and ``AQ`` are counted directly from the
    sections; identities relying on holomorphicity are only evaluated
    when ``willmore`` is set.  ``deg_Ltilde`` and ``deg_Lhat`` are taken
    with the complex structure ``S`` restricted to the (S-stable) lines.
    """
    deg_l = degree_L(imm, S)
    deg_v = degree_V(S)
    dvals, dlinks, e_plus = delta_section(imm, S)
    ord_d = vanishing_order(dvals, *dlinks).order
    rep = DegreeReport(deg_L=deg_l, deg_V=deg_v, v=deg_v, ord_delta=ord_d)
    rep.aq_hypothesis = abs(rep.v) > 2 * DEG_K
    ids = rep.identity_residuals
    ids.append(("normalbundle_degree: v = deg V", rep.v, deg_v))
    ids.append(("ord_delta: ord delta = deg K + deg V - 2 deg L", ord_d, DEG_K + deg_v - 2 * deg_l))
    if ord_d == 0:
        ids.append(("degV: deg V = 2 deg L - deg K", deg_v, 2 * deg_l - DEG_K))
    a_zero = hopf_is_zero(A, Q, tol)
    q_zero = hopf_is_zero(Q, A, tol)
    rep.vanishing = "A" if a_zero else ("Q" if q_zero else None)
    ell = plus_line(imm, S).vectors
    aq = A.x @ Q.x
    scale = max(A.max_norm() * Q.max_norm(), 1e-300)
    rep.aq_vanishes = bool(a_zero or q_zero or np.max(np.linalg.norm(aq, axis=(-2, -1))) <= tol * scale)
    if not willmore:
        return rep
    if not a_zero:
        bt = backlund(A, S, Q, tol)
        if bt.full:
            rep.deg_Ltilde = chern_degree(ComplexLineField(imm.grid, ql.right_mul_j(bt.line)))
            vals = np.sum(np.conj(ell) * np.einsum("...ab,...b->...a", A.x, bt.other), axis=-1)
            rep.ord_A = _ord_map(ell, bt.other, vals)
            ids.append(("ord_A: ord A = 3 deg L - deg Ltilde + ord delta",
                        rep.ord_A, 3 * deg_l - rep.deg_Ltilde + ord_d))
    if not q_zero:
        bh = backlund(Q, S, A, tol)
        if bh.full:
            rep.deg_Lhat = chern_degree(ComplexLineField(imm.grid, ql.right_mul_j(bh.line)))
            vals = np.sum(np.conj(bh.line) * np.einsum("...ab,...b->...a", Q.x, e_plus), axis=-1)
            rep.ord_Q = _ord_map(bh.line, e_plus, vals)
            ids.append(("ord_Q: ord Q = 2 deg K - deg L - deg Lhat - ord delta",
                        rep.ord_Q, 2 * DEG_K - deg_l - rep.deg_Lhat - ord_d))
    if not rep.aq_vanishes:
        vals = np.sum(np.conj(ell) * np.einsum("...ab,...b->...a", aq, e_plus), axis=-1)
        rep.ord_AQ = _ord_map(ell, e_plus, vals)
        ids.append(("ord_AQ: ord AQ = 3 deg K - ord delta", rep.ord_AQ, 3 * DEG_K - ord_d))
        if rep.deg_Ltilde is not None and rep.deg_Lhat is not None:
            ids.append(("deg Ltilde = 3 deg L", rep.deg_Ltilde, 3 * deg_l))
            ids.append(("deg Lhat = -deg L", rep.deg_Lhat, -deg_l))
    return rep
