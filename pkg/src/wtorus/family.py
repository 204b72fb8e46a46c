"""Associated family of flat connections, monodromy and classification.

``V = C^4`` carries the trivial connection ``d``; the family is
``d + omega_mu`` with ``omega_mu = (mu P_+ + mu^-1 P_- - 1) A`` where
``P_+ = (1 - iS)/2`` and ``P_- = (1 + iS)/2`` (``I`` is scalar ``i``
in the complex form).  Parallel sections solve ``psi' = -omega psi``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from . import quatlin as ql
from .congruence import HopfField, SphereField
from .surface import TorusGrid

EYE = np.eye(4, dtype=complex)
RK4_SUBSTEPS = 4
UPSAMPLE = 2 * RK4_SUBSTEPS

VERDICTS = ("Trivial", "Translational", "SpectralCurve", "NotWillmore", "Indeterminate")


@dataclass(frozen=True)
class ConnectionForm:
    """``omega = x dx + y dy`` in complex 4x4 form; ``mu`` is informational."""

    grid: TorusGrid
    x: np.ndarray
    y: np.ndarray
    mu: complex = 1.0

    def component(self, axis):
        return self.x if axis == 0 else self.y

    def dual(self) -> "ConnectionForm":
        """Dual connection on ``V*``: ``-omega^T``."""
        t = lambda m: -np.swapaxes(m, -1, -2)
        return ConnectionForm(self.grid, t(self.x), t(self.y), self.mu)


def _projectors(S: SphereField):
    i_s = 1j * S.S
    return 0.5 * (EYE - i_s), 0.5 * (EYE + i_s)


def _mu_check(mu):
    mu = complex(mu)
    if mu == 0:
        raise ValueError("mu must be nonzero")
    return mu


def _family_form(field: HopfField, S: SphereField, mu, swap: bool) -> ConnectionForm:
    mu = _mu_check(mu)
    p_plus, p_minus = _projectors(S)
    a, b = (1.0 / mu, mu) if swap else (mu, 1.0 / mu)
    coef = a * p_plus + b * p_minus - EYE
    return ConnectionForm(field.grid, coef @ field.x, coef @ field.y, mu)


def connection_form(A: HopfField, S: SphereField, mu) -> ConnectionForm:
    """``(mu (1 - IS)/2 + mu^-1 (1 + IS)/2 - 1) A``."""
    return _family_form(A, S, mu, swap=False)


def q_connection_form(Q: HopfField, S: SphereField, mu) -> ConnectionForm:
    """Gauge-equivalent family ``(mu^-1 (1 - IS)/2 + mu (1 + IS)/2 - 1) Q``."""
    return _family_form(Q, S, mu, swap=True)


def dual_connection_form(Q: HopfField, S: SphereField, mu) -> ConnectionForm:
    """Family of the dual surface on ``V*``: ``A^perp = -Q^T`` with ``S^T``."""
    t = lambda m: np.swapaxes(m, -1, -2)
    a_perp = HopfField(Q.grid, -t(Q.x), -t(Q.y), "A")
    return connection_form(a_perp, SphereField(S.grid, t(S.S), S.method), mu)


def zero_form(grid: TorusGrid) -> ConnectionForm:
    z = np.zeros(grid.shape + (4, 4), dtype=complex)
    return ConnectionForm(grid, z, z.copy())


def synthetic_nilpotent(grid: TorusGrid, B1, B2, tol=1e-12) -> ConnectionForm:
    """``d - B1 dx - B2 dy`` for constant nilpotent ``B_i``.

    ``B_i`` are quaternionic 2x2 matrices ``(2, 2, 4)`` or complex 4x4.
    Its monodromy along generator ``i`` is ``Id + period_i B_i``.
    """
    bs = []
    for b in (B1, B2):
        b = np.asarray(b)
        bs.append(ql.qmat_to_cmat(b) if b.shape == (2, 2, 4) else b.astype(complex))
    b1, b2 = bs
    scale = max(1.0, np.linalg.norm(b1), np.linalg.norm(b2)) ** 2
    for name, m in (("B1^2", b1 @ b1), ("B2^2", b2 @ b2), ("B1 B2", b1 @ b2), ("B2 B1", b2 @ b1)):
        if np.linalg.norm(m) > tol * scale:
            raise ValueError(f"not a translational form: {name} != 0")
    ones = np.ones(grid.shape + (1, 1))
    return ConnectionForm(grid, -b1 * ones, -b2 * ones)


# --- flatness ----------------------------------------------------------------------

def _cayley(a):
    """Second-order transport ``(1 + a/2)^-1 (1 - a/2)`` for the edge integral ``a``."""
    return np.linalg.solve(EYE + 0.5 * a, EYE - 0.5 * a)


def plaquette_holonomy(form: ConnectionForm) -> np.ndarray:
    """Counterclockwise holonomy ``T4 T3 T2 T1`` around every cell."""
    g = form.grid
    wx, wy = form.x, form.y
    ax = 0.5 * g.h1 * (wx + np.roll(wx, -1, axis=0))
    ay = 0.5 * g.h2 * (wy + np.roll(wy, -1, axis=1))
    tx = _cayley(ax)
    ty = _cayley(ay)
    tx_inv = _cayley(-ax)
    ty_inv = _cayley(-ay)
    t1 = tx
    t2 = np.roll(ty, -1, axis=0)
    t3 = np.roll(tx_inv, -1, axis=1)
    t4 = ty_inv
    return t4 @ t3 @ t2 @ t1


def flatness_residual(form: ConnectionForm) -> float:
    hol = plaquette_holonomy(form)
    return float(np.max(np.linalg.norm(hol - EYE, axis=(-2, -1)))) / form.grid.cell_area


# --- transport ----------------------------------------------------------------------

class TransportError(RuntimeError):
    pass


def _upsample(values, factor):
    """Trigonometric interpolation of periodic samples along axis 0."""
    n = values.shape[0]
    spec = np.fft.fft(values, axis=0)
    m = n * factor
    out = np.zeros((m,) + values.shape[1:], dtype=complex)
    half = n // 2
    out[:half] = spec[:half]
    out[m - half + (n % 2 == 0):] = spec[half + (n % 2 == 0):]
    if n % 2 == 0:
        # split the Nyquist coefficient symmetrically
        out[half] = 0.5 * spec[half]
        out[m - half] = 0.5 * spec[half]
    return np.fft.ifft(out, axis=0) * factor


def _line(form: ConnectionForm, axis: int, index: int):
    comp = form.component(axis)
    line = comp[:, index] if axis == 0 else comp[index, :]
    return _upsample(line, UPSAMPLE)


def transport(form: ConnectionForm, start, axis: int, steps: int, line=None) -> np.ndarray:
    """RK4 transport along grid line ``axis`` from node ``start`` over ``steps`` edges.

    Negative ``steps`` runs backwards.  Returns ``T`` with ``psi(end) = T psi(start)``.
    """
    g = form.grid
    h = (g.h1, g.h2)[axis]
    if line is None:
        line = _line(form, axis, start[1 - axis])
    m = line.shape[0]
    pos = start[axis] * UPSAMPLE
    sign = 1 if steps >= 0 else -1
    dt = sign * h / RK4_SUBSTEPS
    half = sign * UPSAMPLE // (2 * RK4_SUBSTEPS)
    psi = EYE.copy()
    for _ in range(abs(steps) * RK4_SUBSTEPS):
        w0 = line[pos % m]
        w1 = line[(pos + half) % m]
        w2 = line[(pos + 2 * half) % m]
        k1 = -w0 @ psi
        k2 = -w1 @ (psi + 0.5 * dt * k1)
        k3 = -w1 @ (psi + 0.5 * dt * k2)
        k4 = -w2 @ (psi + dt * k3)
        psi = psi + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        pos += 2 * half
    if not np.all(np.isfinite(psi)) or np.linalg.norm(psi) > 1e12:
        raise TransportError("transport diverged; refine the grid")
    return psi


def monodromy(form: ConnectionForm, generator: int, p0=(0, 0)) -> np.ndarray:
    """Holonomy along the straight closed loop through ``p0`` in direction ``generator``."""
    axis = generator - 1
    if axis not in (0, 1):
        raise ValueError("generator must be 1 or 2")
    return transport(form, tuple(p0), axis, form.grid.shape[axis])


def detour_monodromy(form: ConnectionForm, generator: int, p0=(0, 0), offset: int = 1) -> np.ndarray:
    """Holonomy along a loop homotopic to :func:`monodromy` that detours ``offset`` rows."""
    axis = generator - 1
    other = 1 - axis
    p0 = tuple(p0)
    mid = list(p0)
    mid[other] = (p0[other] + offset) % form.grid.shape[other]
    mid = tuple(mid)
    up = transport(form, p0, other, offset)
    across = transport(form, mid, axis, form.grid.shape[axis])
    down = transport(form, mid, other, -offset)
    return down @ across @ up


# --- sweep ------------------------------------------------------------------------

def default_mu_samples(n_circle: int = 16, n_annulus: int = 16):
    """Unit-circle samples (including ``mu = 1``) and log-spaced annulus samples."""
    circle = np.exp(2j * np.pi * np.arange(n_circle) / max(n_circle, 1))
    k = np.arange(n_annulus)
    radii = 2.0 ** (-1.0 + 2.0 * (k + 0.5) / max(n_annulus, 1))
    angles = 2 * np.pi * (k + 0.5) / max(n_annulus, 1) * 3.0
    annulus = radii * np.exp(1j * angles)
    return np.concatenate([circle, annulus])


@dataclass(frozen=True)
class MuRecord:
    mu: complex
    H1: np.ndarray
    H2: np.ndarray
    ev1: np.ndarray
    ev2: np.ndarray
    commutator_norm: float
    flatness_residual: float

    def max_eig_deviation(self):
        return float(max(np.max(np.abs(self.ev1 - 1)), np.max(np.abs(self.ev2 - 1))))

    def max_identity_deviation(self):
        return float(max(np.linalg.norm(self.H1 - EYE), np.linalg.norm(self.H2 - EYE)))

    def nilpotency_residual(self):
        r1 = self.H1 - EYE
        r2 = self.H2 - EYE
        return float(max(np.linalg.norm(r1 @ r1), np.linalg.norm(r2 @ r2)))

    def determinants(self):
        return complex(np.linalg.det(self.H1)), complex(np.linalg.det(self.H2))


@dataclass(frozen=True)
class MonodromySweep:
    records: list
    p0: tuple = (0, 0)
    periods: tuple = (1.0, 1.0)

    @property
    def area(self):
        return self.periods[0] * self.periods[1]

    @property
    def mus(self):
        return np.array([r.mu for r in self.records])

    def max_eig_deviation(self):
        return max(r.max_eig_deviation() for r in self.records)

    def max_identity_deviation(self):
        return max(r.max_identity_deviation() for r in self.records)

    def max_nilpotency_residual(self):
        return max(r.nilpotency_residual() for r in self.records)

    def rows(self):
        """Flat CSV rows: one per (mu, generator)."""
        out = []
        for r in self.records:
            for gen, ev in ((1, r.ev1), (2, r.ev2)):
                row = [r.mu.real, r.mu.imag, gen]
                for e in ev:
                    row += [e.real, e.imag]
                row += [r.commutator_norm, r.flatness_residual]
                out.append(row)
        return out


CSV_COLUMNS = (
    ["mu_re", "mu_im", "gen"]
    + [f"ev{k}_{p}" for k in range(1, 5) for p in ("re", "im")]
    + ["commutator_norm", "flatness_residual"]
)


def _record(form: ConnectionForm, p0) -> MuRecord:
    h1 = monodromy(form, 1, p0)
    h2 = monodromy(form, 2, p0)
    return MuRecord(
        mu=complex(form.mu),
        H1=h1,
        H2=h2,
        ev1=ql.eig4(h1),
        ev2=ql.eig4(h2),
        commutator_norm=float(np.linalg.norm(h1 @ h2 - h2 @ h1)),
        flatness_residual=flatness_residual(form),
    )


def sweep(family, mus=None, p0=(0, 0), threads: int = 1) -> MonodromySweep:
    """Monodromy records for ``family(mu) -> ConnectionForm`` over ``mus``."""
    if mus is None:
        mus = default_mu_samples()
    mus = [complex(m) for m in mus]

    def one(mu):
        return _record(family(mu), p0)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(one, mus))
    else:
        records = [one(mu) for mu in mus]
    g = family(mus[0]).grid
    return MonodromySweep(records, tuple(p0), (g.a, g.b))


def a_family(A: HopfField, S: SphereField):
    return lambda mu: connection_form(A, S, mu)


def q_family(Q: HopfField, S: SphereField):
    return lambda mu: q_connection_form(Q, S, mu)


def dual_family(Q: HopfField, S: SphereField):
    return lambda mu: dual_connection_form(Q, S, mu)


# --- symmetry checks ---------------------------------------------------------------

def conjugation_defect(ev) -> float:
    """Distance between a spectrum and its complex conjugate as multisets."""
    return ql.match_spectra(ev, np.conj(ev))


def quaternionic_symmetry(rec: MuRecord) -> dict:
    return {
        "conjugation_defect": max(conjugation_defect(rec.ev1), conjugation_defect(rec.ev2)),
        "quaternionic_defect": float(max(ql.quaternionic_defect(rec.H1), ql.quaternionic_defect(rec.H2))),
    }


def dual_gauge_checks(A: HopfField, Q: HopfField, S: SphereField, mu, p0=(0, 0)) -> dict:
    """Spectral agreement of the A-family with the Q-family and the dual family.

    The dual family is gauge equivalent to the dual connection, whose
    monodromy is ``H^-T``; its spectrum is compared with ``1/h`` and,
    directly, with ``h``.
    """
    fa = connection_form(A, S, mu)
    fq = q_connection_form(Q, S, mu)
    fd = dual_connection_form(Q, S, mu)
    out = {"mu": complex(mu)}
    gauge = dual = direct = 0.0
    for gen in (1, 2):
        ea = ql.eig4(monodromy(fa, gen, p0))
        eq = ql.eig4(monodromy(fq, gen, p0))
        ed = ql.eig4(monodromy(fd, gen, p0))
        gauge = max(gauge, ql.match_spectra(ea, eq))
        dual = max(dual, ql.match_spectra(1.0 / ea, ed))
        direct = max(direct, ql.match_spectra(ea, ed))
    out["gauge_mismatch"] = gauge
    out["dual_mismatch"] = dual
    # equals dual_mismatch when the spectrum is closed under inversion
    out["dual_mismatch_direct"] = direct
    return out


# --- classification ---------------------------------------------------------------

def _best_perm(prev, cur):
    best, arg = np.inf, None
    for perm in permutations(range(len(cur))):
        d = float(np.max(np.abs(prev - cur[list(perm)])))
        if d < best:
            best, arg = d, list(perm)
    return cur[arg]


def continued_spectra(sweep_: MonodromySweep, generator: int) -> np.ndarray:
    """Eigenvalues along the sweep with nearest-neighbour continuation in record order."""
    evs = [r.ev1 if generator == 1 else r.ev2 for r in sweep_.records]
    out = [np.asarray(evs[0])]
    for ev in evs[1:]:
        out.append(_best_perm(out[-1], np.asarray(ev)))
    return np.array(out)


def eigenvalue_variation(sweep_: MonodromySweep) -> float:
    var = 0.0
    for gen in (1, 2):
        br = continued_spectra(sweep_, gen)
        var = max(var, float(np.max(np.abs(br - br[0]))))
    return var


@dataclass
class Classification:
    verdict: str
    R1: np.ndarray | None = None
    R2: np.ndarray | None = None
    B1: np.ndarray | None = None
    B2: np.ndarray | None = None
    nilpotency_residual: float | None = None
    evidence: dict = field(default_factory=dict)

    def to_dict(self):
        out = {"verdict": self.verdict, "evidence": self.evidence}
        if self.nilpotency_residual is not None:
            out["nilpotency_residual"] = self.nilpotency_residual
        for name in ("B1", "B2"):
            m = getattr(self, name)
            if m is not None:
                out[name] = ql.cmat_to_qmat(m).tolist()
        return out


def classify(sweep_: MonodromySweep, v: int, el_residual: float, el_gate: float,
             tol: float = 1e-3) -> Classification:
    """Verdict from the monodromy sweep, the normal bundle degree and the EL gate."""
    evidence = {
        "el_residual": float(el_residual),
        "el_gate": float(el_gate),
        "v": int(v),
        "tol": float(tol),
    }
    if el_residual > el_gate:
        return Classification("NotWillmore", evidence=evidence)
    dev_id = sweep_.max_identity_deviation()
    dev_ev = sweep_.max_eig_deviation()
    nil = sweep_.max_nilpotency_residual()
    variation = eigenvalue_variation(sweep_)
    evidence.update(
        max_identity_deviation=dev_id,
        max_eigenvalue_deviation=dev_ev,
        max_nilpotency_residual=nil,
        eigenvalue_variation=variation,
    )
    if dev_id <= tol:
        return Classification("Trivial", nilpotency_residual=nil, evidence=evidence)
    if dev_ev <= tol and nil <= tol:
        rec = max(sweep_.records, key=lambda r: r.max_identity_deviation())
        r1, r2 = rec.H1 - EYE, rec.H2 - EYE
        a, b = sweep_.periods
        return Classification(
            "Translational", R1=r1, R2=r2, B1=r1 / a, B2=r2 / b,
            nilpotency_residual=nil, evidence=evidence,
        )
    if variation > tol:
        if v != 0:
            evidence["note"] = "eigenvalues vary with mu although v != 0"
            return Classification("Indeterminate", nilpotency_residual=nil, evidence=evidence)
        return Classification("SpectralCurve", nilpotency_residual=nil, evidence=evidence)
    return Classification("Indeterminate", nilpotency_residual=nil, evidence=evidence)

