"""Sampled conformal tori in HP^1 and finite-difference calculus on them.

Grids are rectangular: ``omega1 = (a, 0)``, ``omega2 = (0, b)``.  Sample
arrays are shaped ``(n1, n2, ...)`` with axis 0 along ``x`` and axis 1
along ``y``.

Orientation convention: the Hodge star is ``*w = w o J`` with
``J d/dx = d/dy``, i.e. ``(*w)(d/dx) = w(d/dy)`` and
``(*w)(d/dy) = -w(d/dx)``.  With it, ``*df = N df = df R`` holds for
``N = f_y f_x^-1`` and ``R = f_x^-1 f_y``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import quatlin as ql
from .elliptic import Lattice, wp_regular

MIN_SAMPLES = 8


class DegenerateDerivativeError(ValueError):
    """The sampled map is not immersed somewhere (``f_x`` vanishes)."""


@dataclass(frozen=True)
class TorusGrid:
    omega1: tuple
    omega2: tuple
    n1: int
    n2: int

    @property
    def a(self) -> float:
        return float(self.omega1[0])

    @property
    def b(self) -> float:
        return float(self.omega2[1])

    @property
    def h1(self) -> float:
        return self.a / self.n1

    @property
    def h2(self) -> float:
        return self.b / self.n2

    @property
    def shape(self):
        return (self.n1, self.n2)

    @property
    def cell_area(self) -> float:
        return self.h1 * self.h2

    @property
    def area(self) -> float:
        return self.a * self.b

    def coords(self):
        x = np.arange(self.n1) * self.h1
        y = np.arange(self.n2) * self.h2
        return np.meshgrid(x, y, indexing="ij")

    def refined(self, n1: int, n2: int | None = None) -> "TorusGrid":
        return make_grid(self.omega1, self.omega2, n1, n2 if n2 is not None else n1)


def make_grid(omega1, omega2, n1: int, n2: int) -> TorusGrid:
    w1 = np.asarray(omega1, dtype=float)
    w2 = np.asarray(omega2, dtype=float)
    if w1.shape != (2,) or w2.shape != (2,):
        raise ValueError("lattice generators must be 2-vectors")
    if abs(w1[0] * w2[1] - w1[1] * w2[0]) < 1e-12 * (np.linalg.norm(w1) * np.linalg.norm(w2) + 1e-300):
        raise ValueError("degenerate lattice: generators are linearly dependent")
    if w1[1] != 0.0 or w2[0] != 0.0 or w1[0] <= 0 or w2[1] <= 0:
        raise ValueError("only axis-aligned rectangular lattices ((a,0),(0,b)) are supported")
    if int(n1) < MIN_SAMPLES or int(n2) < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples per direction")
    return TorusGrid((float(w1[0]), 0.0), (0.0, float(w2[1])), int(n1), int(n2))


@dataclass(frozen=True)
class Immersion:
    """Homogeneous lift ``psi`` of ``f = [psi]``, shape ``(n1, n2, 2, 4)``."""

    grid: TorusGrid
    lift: np.ndarray

    def __post_init__(self):
        if self.lift.shape != self.grid.shape + (2, 4):
            raise ValueError(f"lift shape {self.lift.shape} does not match grid {self.grid.shape}")
        if np.any(ql.quat_norm2(self.lift).sum(axis=-1) == 0.0):
            raise ValueError("lift vanishes at some sample")

    @property
    def chart(self) -> np.ndarray:
        """1 where the first coordinate normalizes the lift, else 2."""
        n1 = ql.quat_norm2(self.lift[..., 0, :])
        n2 = ql.quat_norm2(self.lift[..., 1, :])
        # ties (|psi_1| = |psi_2|) go to chart 2 regardless of rounding
        return np.where(n2 >= n1 * (1 - 1e-9), 2, 1)

    def cvec(self) -> np.ndarray:
        return ql.qvec_to_cvec(self.lift)

    def regauged(self, q) -> "Immersion":
        """``psi -> psi q`` with ``q`` of shape ``(n1, n2, 4)``."""
        return Immersion(self.grid, ql.quat_mul(self.lift, np.asarray(q)[..., None, :]))


@dataclass(frozen=True)
class DerivativeField:
    psi_x: np.ndarray
    psi_y: np.ndarray


# --- grid calculus -------------------------------------------------------------

def d_axis(field, axis: int, h: float, method: str = "central"):
    """Periodic first derivative along ``axis`` (0 = x, 1 = y)."""
    if method == "central":
        return (np.roll(field, -1, axis=axis) - np.roll(field, 1, axis=axis)) / (2 * h)
    if method == "spectral":
        n = field.shape[axis]
        k = 2 * np.pi * np.fft.fftfreq(n, d=h)
        if n % 2 == 0:
            k[n // 2] = 0.0
        shape = [1] * field.ndim
        shape[axis] = n
        out = np.fft.ifft(1j * k.reshape(shape) * np.fft.fft(field, axis=axis), axis=axis)
        return out if np.iscomplexobj(field) else out.real
    raise ValueError(f"unknown derivative method {method!r}")


def d2_axis(field, axis: int, h: float, method: str = "central"):
    if method == "central":
        return (np.roll(field, -1, axis=axis) - 2 * field + np.roll(field, 1, axis=axis)) / h**2
    if method == "spectral":
        n = field.shape[axis]
        k = 2 * np.pi * np.fft.fftfreq(n, d=h)
        shape = [1] * field.ndim
        shape[axis] = n
        out = np.fft.ifft(-(k.reshape(shape) ** 2) * np.fft.fft(field, axis=axis), axis=axis)
        return out if np.iscomplexobj(field) else out.real
    raise ValueError(f"unknown derivative method {method!r}")


def gradient(field, grid: TorusGrid, method: str = "central"):
    return d_axis(field, 0, grid.h1, method), d_axis(field, 1, grid.h2, method)


def jets(field, grid: TorusGrid, method: str = "central"):
    """First and second derivatives ``(fx, fy, fxx, fxy, fyy)``."""
    fx = d_axis(field, 0, grid.h1, method)
    fy = d_axis(field, 1, grid.h2, method)
    fxx = d2_axis(field, 0, grid.h1, method)
    fyy = d2_axis(field, 1, grid.h2, method)
    fxy = d_axis(fx, 1, grid.h2, method)
    return fx, fy, fxx, fxy, fyy


def hodge(wx, wy):
    """Coefficients of ``*w`` for ``w = wx dx + wy dy``."""
    return wy, -wx


def derivative(imm: Immersion, method: str = "central") -> DerivativeField:
    px, py = gradient(imm.lift, imm.grid, method)
    return DerivativeField(px, py)


# --- projective quantities -----------------------------------------------------

def normalized_cvec(imm: Immersion) -> np.ndarray:
    v = imm.cvec()
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def line_projector(imm: Immersion) -> np.ndarray:
    """Orthogonal projector of ``C^4`` onto the quaternionic line ``L``.

    Independent of the lift gauge, smooth wherever ``f`` is.
    """
    v = normalized_cvec(imm)
    vj = ql.right_mul_j(v)
    return np.einsum("...a,...b->...ab", v, v.conj()) + np.einsum("...a,...b->...ab", vj, vj.conj())


def adapted_unitary(imm: Immersion) -> np.ndarray:
    """Per-sample quaternionic unitary ``G`` with ``G psi_hat = (0, 1)``.

    Rows of ``G`` are ``e^*`` and ``psi_hat^*`` where ``e`` is a unit
    vector hermitian-orthogonal to ``L``.  Returned in complex form.
    """
    lift = imm.lift / np.sqrt(ql.quat_norm2(imm.lift).sum(axis=-1))[..., None, None]
    p1, p2 = lift[..., 0, :], lift[..., 1, :]
    n1 = np.sqrt(ql.quat_norm2(p1))
    n2 = np.sqrt(ql.quat_norm2(p2))
    big1 = (n1 >= n2)[..., None]
    safe1 = np.where(n1 > 0, n1, 1.0)[..., None]
    safe2 = np.where(n2 > 0, n2, 1.0)[..., None]
    # |p1| >= |p2|: e = (-p1 conj(p2) / |p1|, |p1|) else (|p2|, -p2 conj(p1) / |p2|)
    e1 = np.where(big1, -ql.quat_mul(p1, ql.quat_conj(p2)) / safe1, n2[..., None] * ql.ONE)
    e2 = np.where(big1, n1[..., None] * ql.ONE, -ql.quat_mul(p2, ql.quat_conj(p1)) / safe2)
    g = np.empty(lift.shape[:-2] + (2, 2, 4))
    g[..., 0, 0, :] = ql.quat_conj(e1)
    g[..., 0, 1, :] = ql.quat_conj(e2)
    g[..., 1, 0, :] = ql.quat_conj(p1)
    g[..., 1, 1, :] = ql.quat_conj(p2)
    return ql.qmat_to_cmat(g)


def chart_unitary(imm: Immersion) -> np.ndarray:
    """Coordinate permutation realizing the stored chart flag per sample."""
    swap = np.zeros((4, 4), dtype=complex)
    swap[0:2, 2:4] = np.eye(2)
    swap[2:4, 0:2] = np.eye(2)
    ident = np.eye(4, dtype=complex)
    return np.where((imm.chart == 2)[..., None, None], ident, swap)


@dataclass(frozen=True)
class ChartJets:
    """Affine-chart jets of ``f`` as complex 2x2 quaternion matrices."""

    f: np.ndarray
    fx: np.ndarray
    fy: np.ndarray
    fxx: np.ndarray
    fxy: np.ndarray
    fyy: np.ndarray


def chart_jets(imm: Immersion, g: np.ndarray, method: str = "central") -> ChartJets:
    """Jets of ``f = P'_12 / P'_22`` with ``P' = G P G^*`` in each sample's chart.

    ``P`` is the line projector, so everything here is gauge invariant.
    """
    proj = line_projector(imm)
    ders = (proj,) + jets(proj, imm.grid, method)
    gh = np.conj(np.swapaxes(g, -1, -2))
    rot = [g @ d @ gh for d in ders]
    c = [r[..., 0:2, 2:4] for r in rot]
    d = [r[..., 2, 2].real for r in rot]
    p, px, py, pxx, pxy, pyy = c
    q, qx, qy, qxx, qxy, qyy = d
    if np.any(q < 1e-8):
        raise DegenerateDerivativeError("chart normalization failed (point at infinity)")
    inv = (1.0 / q)[..., None, None]

    def s(a):
        return a[..., None, None]

    f = p * inv
    fx = (px - p * s(qx) * inv) * inv
    fy = (py - p * s(qy) * inv) * inv
    fxx = (pxx - 2 * px * s(qx) * inv - p * s(qxx) * inv + 2 * p * s(qx**2) * inv**2) * inv
    fyy = (pyy - 2 * py * s(qy) * inv - p * s(qyy) * inv + 2 * p * s(qy**2) * inv**2) * inv
    fxy = (
        pxy - (px * s(qy) + py * s(qx)) * inv - p * s(qxy) * inv + 2 * p * s(qx * qy) * inv**2
    ) * inv
    return ChartJets(f, fx, fy, fxx, fxy, fyy)


def _qabs2(m):
    # |q|^2 from the complex 2x2 form of q
    return np.abs(m[..., 0, 0]) ** 2 + np.abs(m[..., 1, 0]) ** 2


def _qinv(m):
    adj = np.empty_like(m)
    adj[..., 0, 0] = m[..., 1, 1]
    adj[..., 1, 1] = m[..., 0, 0]
    adj[..., 0, 1] = -m[..., 0, 1]
    adj[..., 1, 0] = -m[..., 1, 0]
    return adj / _qabs2(m)[..., None, None]


def _check_immersed(fx, fy, rel=1e-8):
    scale = np.sqrt(_qabs2(fx) + _qabs2(fy))
    bad = scale <= rel * max(float(np.max(scale)), 1e-300)
    return bad


def conformality_from_jets(fx, fy):
    nx = _qabs2(fx)
    ny = _qabs2(fy)
    # <fx, fy> = Re(conj(fx) fy) = Re tr of the 2x2 form / 2
    inner = 0.5 * np.real(np.trace(np.conj(np.swapaxes(fx, -1, -2)) @ fy, axis1=-2, axis2=-1))
    return np.sqrt((nx - ny) ** 2 + 4 * inner**2) / (nx + ny)


def conformality_residual(imm: Immersion, method: str = "central") -> np.ndarray:
    """Relative failure of ``|f_x| = |f_y|, <f_x, f_y> = 0`` per sample.

    Invariant under Moebius transformations, hence chart independent.
    """
    cj = chart_jets(imm, chart_unitary(imm), method)
    return conformality_from_jets(cj.fx, cj.fy)


def _unit_imaginary(m):
    # project the quaternion (complex 2x2 form) onto the unit imaginary sphere
    im = 0.5 * (m - np.conj(np.swapaxes(m, -1, -2)))
    return im / np.sqrt(_qabs2(im))[..., None, None]


@dataclass(frozen=True)
class Normals:
    """Left/right normals in the active charts, quaternion arrays ``(n1, n2, 4)``."""

    left: np.ndarray
    right: np.ndarray
    left_residual: np.ndarray
    right_residual: np.ndarray


def left_right_normals(imm: Immersion, method: str = "central") -> Normals:
    """``N = f_y f_x^-1`` and ``R = f_x^-1 f_y`` in each sample's stored chart.

    Samples where ``f_x`` degenerates are retried in the other chart
    before :class:`DegenerateDerivativeError` is raised.
    """
    g = chart_unitary(imm)
    cj = chart_jets(imm, g, method)
    fx, fy = cj.fx, cj.fy
    bad = _check_immersed(fx, fy)
    if np.any(bad):
        swap = np.roll(np.eye(4, dtype=complex), 2, axis=0)
        other = chart_jets(imm, swap @ g, method)
        still = bad & _check_immersed(other.fx, other.fy)
        if np.any(still):
            raise DegenerateDerivativeError(
                f"f_x vanishes at {int(np.sum(still))} samples (map not immersed)"
            )
        fx = np.where(bad[..., None, None], other.fx, fx)
        fy = np.where(bad[..., None, None], other.fy, fy)
    n = fy @ _qinv(fx)
    r = _qinv(fx) @ fy
    eye = np.eye(2)
    res_n = np.sqrt(_qabs2(n @ n + eye))
    res_r = np.sqrt(_qabs2(r @ r + eye))
    return Normals(ql.matrix_to_quat(n), ql.matrix_to_quat(r), res_n, res_r)


# --- example surfaces ------------------------------------------------------------

def clifford_torus(grid: TorusGrid) -> Immersion:
    """``psi = (q, 1)`` with ``q = (e^{ix} + j e^{iy}) / sqrt 2`` on ``(2 pi Z)^2``."""
    if not (np.isclose(grid.a, 2 * np.pi) and np.isclose(grid.b, 2 * np.pi)):
        raise ValueError("the Clifford torus lives on the lattice (2 pi Z)^2")
    x, y = grid.coords()
    s = 1.0 / np.sqrt(2.0)
    lift = np.zeros(grid.shape + (2, 4))
    lift[..., 0, :] = ql.pair_to_quat(s * np.exp(1j * x), s * np.exp(1j * y))
    lift[..., 1, 0] = 1.0
    return Immersion(grid, lift)


# Frame applied to (1, P', P, P^2).  Any invertible frame gives a twistor
# projection of the same elliptic curve; this one spreads the curvature
# evenly enough that N = 96 spectral differences resolve the Hopf fields
# on the square lattice of unit period.
TWISTOR_FRAME = np.array(
    [
        [1.3, -0.4 - 0.4j, -0.9 + 0.3j, 0.0],
        [0.2 - 0.2j, 1.0 - 0.1j, 1.2 - 0.4j, 0.0],
        [-15.3 + 0.4j, -0.1 - 0.4j, 6.0 + 0.6j, 0.6],
        [5.9 + 0.2j, 1.1, -4.9 - 0.1j, 1.0],
    ]
)


def twistor_curve(z, lattice: Lattice, frame=None):
    """Nowhere-zero ``C^4`` representative of ``frame @ [1 : P' : P : P^2]``.

    All components are multiplied by ``u^4`` where ``u`` is ``z`` reduced
    to the cell around the nearest lattice point, so the curve is smooth
    through lattice points.
    """
    frame = TWISTOR_FRAME if frame is None else np.asarray(frame, dtype=complex)
    u, z2p, z3dp = wp_regular(z, lattice)
    basis = np.stack([u**4, u * z3dp, u**2 * z2p, z2p**2], axis=-1)
    return basis @ frame.T


def twistor_elliptic(grid: TorusGrid, lattice: Lattice | None = None, frame=None) -> Immersion:
    """Twistor projection ``C^4 -> HP^1``, ``(z1,z2,z3,z4) -> (z1 + j z2, z3 + j z4)``.

    The curve is :func:`twistor_curve` on the grid's lattice; the lift is
    normalized to unit length.
    """
    if lattice is None:
        lattice = Lattice.rectangular(grid.a, grid.b)
    if not (np.isclose(lattice.omega1, grid.a) and np.isclose(lattice.omega2, 1j * grid.b)):
        raise ValueError("grid lattice must equal the elliptic curve lattice")
    x, y = grid.coords()
    phi = twistor_curve(x + 1j * y, lattice, frame)
    phi = phi / np.linalg.norm(phi, axis=-1, keepdims=True)
    return Immersion(grid, ql.cvec_to_qvec(phi))


def perturb(imm: Immersion, amplitude: float, seed: int) -> Immersion:
    """``psi -> (1 + amplitude X(p)) psi`` with a smooth low-frequency ``X``.

    ``X`` is a random quaternionic 2x2 matrix field built from the four
    lowest Fourier modes; acting on the left keeps the result a
    well-defined map regardless of the lift's gauge.
    """
    if amplitude < 0:
        raise ValueError("amplitude must be nonnegative")
    if amplitude == 0:
        return Immersion(imm.grid, imm.lift.copy())
    rng = np.random.default_rng(seed)
    grid = imm.grid
    x, y = grid.coords()
    field = np.zeros(grid.shape + (2, 2, 4))
    for kx, ky in ((1, 0), (0, 1), (1, 1), (1, -1)):
        theta = 2 * np.pi * (kx * x / grid.a + ky * y / grid.b)
        cmat, smat = rng.normal(size=(2, 2, 2, 4))
        field += np.cos(theta)[..., None, None, None] * cmat + np.sin(theta)[..., None, None, None] * smat
    field /= np.max(np.sqrt(ql.quat_norm2(field).sum(axis=(-1, -2))))
    lift = imm.lift + amplitude * ql.qmat_vec(field, imm.lift)
    return Immersion(grid, lift)


# --- file format -------------------------------------------------------------------

def immersion_to_dict(imm: Immersion) -> dict:
    g = imm.grid
    # row-major: row = y index, col = x index, flat = row * n1 + col
    flat = np.swapaxes(imm.lift, 0, 1).reshape(g.n1 * g.n2, 8)
    return {
        "lattice": [[g.a, 0.0], [0.0, g.b]],
        "dims": [g.n1, g.n2],
        "lift": flat.tolist(),
    }


def immersion_from_dict(data: dict) -> Immersion:
    (a, a2), (b1, b) = data["lattice"]
    n1, n2 = (int(v) for v in data["dims"])
    grid = make_grid((a, a2), (b1, b), n1, n2)
    flat = np.asarray(data["lift"], dtype=float)
    if flat.shape != (n1 * n2, 8):
        raise ValueError(f"lift has shape {flat.shape}, expected {(n1 * n2, 8)}")
    lift = np.swapaxes(flat.reshape(n2, n1, 2, 4), 0, 1).copy()
    return Immersion(grid, lift)


def save_immersion(imm: Immersion, path, source: dict | None = None) -> Path:
    """Write the JSON immersion file; ``source`` is an optional descriptor."""
    path = Path(path)
    data = immersion_to_dict(imm)
    if source is not None:
        data["source"] = source
    path.write_text(json.dumps(data))
    return path


def load_immersion(path) -> Immersion:
    return immersion_from_dict(json.loads(Path(path).read_text()))
