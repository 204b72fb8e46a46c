"""``wtorus`` command line: generate example tori, analyze them, self-test.

Exit codes: 0 ok, 1 usage or I/O error, 2 conformality gate, 3 non-immersed
input, 4 numerical failure.  Diagnostics go to stderr as JSON; stdout only
lists written files.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, fields
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from . import congruence as cg
from . import family as fam
from . import quatlin as ql
from . import surface as sf
from . import topology as tp
from .elliptic import Lattice, invariants, weierstrass_p

SCHEMA_VERSION = "1.0"

EXIT_OK, EXIT_USAGE, EXIT_CONFORMAL, EXIT_IMMERSED, EXIT_NUMERIC = 0, 1, 2, 3, 4


@dataclass
class Settings:
    tol_eig: float = 1e-3
    tol_el: float = 1e-2
    tol_conf: float = cg.CONFORMALITY_GATE
    tol_hopf_zero: float = tp.HOPF_ZERO_TOL
    mu_circle_samples: int = 16
    mu_annulus_samples: int = 16
    method: str = "spectral"
    threads: int = 1
    seed: int = 0

    @classmethod
    def resolve(cls, config: dict | None = None, **flags) -> "Settings":
        """defaults < config file < flags (``None`` flags are ignored)."""
        out = cls()
        names = {f.name for f in fields(cls)}
        for source in (config or {}, flags):
            for key, val in source.items():
                if val is None:
                    continue
                if key not in names:
                    raise ValueError(f"unknown setting {key!r}")
                setattr(out, key, type(getattr(cls(), key))(val))
        if out.method not in ("central", "spectral"):
            raise ValueError("method must be 'central' or 'spectral'")
        return out


class GateError(RuntimeError):
    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details


# --- JSON helpers ----------------------------------------------------------------

def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True)


# --- pipeline ----------------------------------------------------------------------

def check_input(imm: sf.Immersion, settings: Settings) -> float:
    """Immersion check (exit 3) then conformality gate (exit 2)."""
    g = sf.adapted_unitary(imm)
    jets = sf.chart_jets(imm, g, settings.method)
    bad = sf._check_immersed(jets.fx, jets.fy)
    if np.any(bad):
        raise sf.DegenerateDerivativeError(f"derivative degenerate at {int(bad.sum())} samples")
    conf = float(np.max(sf.conformality_from_jets(jets.fx, jets.fy)))
    if not conf <= settings.tol_conf:
        raise GateError("conformality gate failed", conformality_residual=conf, tol_conf=settings.tol_conf)
    return conf


def _gauge_check(imm, energy, settings):
    rng = np.random.default_rng(settings.seed)
    q = rng.normal(size=imm.grid.shape + (4,))
    S2 = cg.mean_curvature_sphere(imm.regauged(q), settings.method)
    A2, _ = cg.hopf_fields(S2)
    return {"seed": settings.seed, "energy_change": abs(cg.willmore_energy(A2) - energy)}


def analyze_immersion(imm: sf.Immersion, settings: Settings | None = None, descriptor=None):
    """Full pipeline; returns ``(report, sweep)``."""
    settings = settings or Settings()
    conf = check_input(imm, settings)
    S = cg.mean_curvature_sphere(imm, settings.method)
    A, Q = cg.hopf_fields(S)
    energy = cg.energy_report(A, Q, settings.method)
    rel_el = cg.relative_el_residual(A, Q, settings.method)
    willmore = rel_el <= settings.tol_el
    degrees = tp.degree_identities(imm, S, A, Q, willmore=willmore, tol=settings.tol_hopf_zero)
    mus = fam.default_mu_samples(settings.mu_circle_samples, settings.mu_annulus_samples)
    sweep = fam.sweep(fam.a_family(A, S), mus, threads=settings.threads)
    verdict = fam.classify(sweep, degrees.v, rel_el, settings.tol_el, settings.tol_eig)
    circle = [r for r in sweep.records if abs(abs(r.mu) - 1) < 1e-12]
    report = {
        "schema_version": SCHEMA_VERSION,
        "tool": {"name": "wtorus", "version": __version__},
        "input": descriptor or {},
        "grid": {"dims": list(imm.grid.shape), "lattice": [[imm.grid.a, 0.0], [0.0, imm.grid.b]]},
        "conformality_residual": conf,
        "willmore_energy": energy.willmore_energy,
        "energy_Q": energy.energy_Q,
        "el_residual": energy.el_residual_A,
        "el_residual_Q": energy.el_residual_Q,
        "el_residual_relative": rel_el,
        "AQ_max_norm": energy.AQ_max_norm,
        "sphere_square_defect": S.square_defect(),
        "hopf_max_norms": {"A": A.max_norm(), "Q": Q.max_norm()},
        "degrees": degrees.to_dict(),
        "monodromy": {
            "p0": list(sweep.p0),
            "max_eigenvalue_deviation": sweep.max_eig_deviation(),
            "max_identity_deviation": sweep.max_identity_deviation(),
            "max_nilpotency_residual": sweep.max_nilpotency_residual(),
            "max_commutator_norm": max(r.commutator_norm for r in sweep.records),
            "max_flatness_residual": max(r.flatness_residual for r in sweep.records),
            "max_conjugation_defect_unit_circle": max(
                (fam.quaternionic_symmetry(r)["conjugation_defect"] for r in circle), default=0.0
            ),
            "per_mu": [
                {
                    "mu": r.mu,
                    "max_eigenvalue_deviation": r.max_eig_deviation(),
                    "max_identity_deviation": r.max_identity_deviation(),
                    "nilpotency_residual": r.nilpotency_residual(),
                    "commutator_norm": r.commutator_norm,
                    "flatness_residual": r.flatness_residual,
                }
                for r in sweep.records
            ],
        },
        "classification": verdict.to_dict(),
        "gauge_check": _gauge_check(imm, energy.willmore_energy, settings),
        "tolerances": asdict(settings),
    }
    return _jsonable(report), sweep


def write_sweep_csv(sweep: fam.MonodromySweep, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(fam.CSV_COLUMNS)
        for row in sweep.rows():
            w.writerow([repr(float(v)) if not isinstance(v, int) else v for v in row])
    return path


# --- generate ------------------------------------------------------------------------

def parse_lattice(spec: str, kind: str):
    if spec in (None, "square"):
        return (2 * np.pi, 2 * np.pi) if kind == "clifford" else (1.0, 1.0)
    if spec.startswith("rect:") and kind != "clifford":
        a, b = (float(t) for t in spec[5:].split(","))
        return a, b
    raise ValueError(f"unsupported lattice {spec!r} for {kind}")


def build_immersion(kind, n, n2=None, lattice=None, base="clifford", amp=1e-2, seed=0):
    n2 = n2 or n
    if kind == "perturbed":
        inner, _ = build_immersion(base, n, n2, lattice)
        src = {"generator": "perturbed", "base": base, "amplitude": amp, "seed": seed}
        return sf.perturb(inner, amp, seed), src
    a, b = parse_lattice(lattice, kind)
    grid = sf.make_grid((a, 0.0), (0.0, b), n, n2)
    if kind == "clifford":
        return sf.clifford_torus(grid), {"generator": "clifford"}
    if kind == "twistor-elliptic":
        return sf.twistor_elliptic(grid), {"generator": "twistor-elliptic", "lattice": [a, b]}
    raise ValueError(f"unknown kind {kind!r}")


# --- selftest -------------------------------------------------------------------------

def _hopf_sign_mutant(S, method=None):
    sx, sy = cg.sphere_derivative(S, method)
    star_x, star_y = sf.hodge(sx, sy)
    s = S.S
    a = cg.HopfField(S.grid, 0.25 * (s @ sx - star_x), 0.25 * (s @ sy - star_y), "A")
    q = cg.HopfField(S.grid, 0.25 * (s @ sx + star_x), 0.25 * (s @ sy + star_y), "Q")
    return a, q


MUTATIONS = {"hopf-sign": ("hopf_fields", _hopf_sign_mutant)}


@contextmanager
def _mutation(name):
    if name is None:
        yield
        return
    attr, repl = MUTATIONS[name]
    orig = getattr(cg, attr)
    setattr(cg, attr, repl)
    try:
        yield
    finally:
        setattr(cg, attr, orig)


def _clifford(n=16):
    return sf.clifford_torus(sf.make_grid((2 * np.pi, 0), (0, 2 * np.pi), n, n))


def _check_quatlin():
    rng = np.random.default_rng(1)
    p, q = rng.normal(size=(2, 50, 4))
    lhs = ql.left_mul_matrix(ql.quat_mul(p, q))
    rhs = ql.left_mul_matrix(p) @ ql.left_mul_matrix(q)
    err = float(np.max(np.abs(lhs - rhs)))
    return err < 1e-12, f"homomorphism error {err:.1e}"


def _check_weierstrass():
    lat = Lattice.rectangular(1.0, 1.0)
    z = np.array([0.21 + 0.13j, 0.4 - 0.33j, -0.17 + 0.45j])
    p, dp = weierstrass_p(z, lat)
    g2, g3 = invariants(lat)
    res = float(np.max(np.abs(dp**2 - (4 * p**3 - g2 * p - g3)) / np.abs(dp) ** 2))
    return res < 1e-10, f"relative ODE residual {res:.1e}"


def _check_conformal():
    r = float(np.max(sf.conformality_residual(_clifford())))
    return r < 1e-12, f"Clifford conformality {r:.1e}"


def _check_square():
    d = cg.mean_curvature_sphere(_clifford()).square_defect()
    return d < 1e-13, f"|S^2 + 1| = {d:.1e}"


def _check_type_A():
    S = cg.mean_curvature_sphere(_clifford())
    A, Q = cg.hopf_fields(S)
    r = max(cg.type_residual(A, S), cg.type_residual(Q, S))
    return r < 1e-10, f"*A = SA = -AS residual {r:.1e}"


def _check_reconstruction():
    S = cg.mean_curvature_sphere(_clifford())
    A, Q = cg.hopf_fields(S)
    rx, ry = cg.reconstruct_dS(A, Q)
    sx, sy = cg.sphere_derivative(S)
    err = float(max(np.max(np.abs(rx - sx)), np.max(np.abs(ry - sy))))
    return err < 1e-12, f"dS reconstruction {err:.1e}"


def _check_energy():
    S = cg.mean_curvature_sphere(_clifford(32), "spectral")
    A, _ = cg.hopf_fields(S)
    w = cg.willmore_energy(A)
    return abs(w / (2 * np.pi**2) - 1) < 1e-8, f"W = {w:.6f}"


def _check_gauge():
    imm = _clifford()
    q = np.random.default_rng(2).normal(size=imm.grid.shape + (4,))
    s1 = cg.mean_curvature_sphere(imm).S
    s2 = cg.mean_curvature_sphere(imm.regauged(q)).S
    err = float(np.max(np.abs(s1 - s2)))
    return err < 1e-9, f"re-gauge change {err:.1e}"


def _check_degrees():
    imm = _clifford()
    S = cg.mean_curvature_sphere(imm)
    v = tp.degree_V(S)
    taut = tp.chern_degree(tp.qwz_line(imm.grid))
    return v == 0 and abs(taut) == 1, f"Clifford v = {v}, winding field degree {taut}"


def _check_family():
    imm = _clifford()
    S = cg.mean_curvature_sphere(imm)
    A, _ = cg.hopf_fields(S)
    h = fam.monodromy(fam.connection_form(A, S, 1.0), 1)
    e = np.zeros((2, 2, 4))
    e[0, 1, 0] = 1.0
    form = fam.synthetic_nilpotent(imm.grid, e, np.zeros((2, 2, 4)))
    sw = fam.sweep(lambda mu: form, [1.0])
    verdict = fam.classify(sw, 0, 0.0, 1.0).verdict
    err = float(np.max(np.abs(h - np.eye(4))))
    return err < 1e-10 and verdict == "Translational", f"H_1 - Id = {err:.1e}, fixture {verdict}"


def _check_twistor():
    imm = sf.twistor_elliptic(sf.make_grid((1, 0), (0, 1), 96, 96))
    report, _ = analyze_immersion(imm, Settings(mu_circle_samples=4, mu_annulus_samples=4))
    deg = report["degrees"]
    ok = (
        report["classification"]["verdict"] == "Trivial"
        and deg["vanishing_hopf_field"] is not None
        and deg["v"] == 2 * deg["deg_L"] != 0
    )
    return ok, f"verdict {report['classification']['verdict']}, v = {deg['v']}, deg L = {deg['deg_L']}"


QUICK_CHECKS = [
    ("quaternion homomorphism", _check_quatlin),
    ("Weierstrass ODE", _check_weierstrass),
    ("Clifford conformality", _check_conformal),
    ("S^2 = -1", _check_square),
    ("*A = SA = -AS", _check_type_A),
    ("dS = 2(*Q - *A)", _check_reconstruction),
    ("Willmore energy 2 pi^2", _check_energy),
    ("gauge invariance", _check_gauge),
    ("plaquette degrees", _check_degrees),
    ("associated family", _check_family),
]
FULL_CHECKS = QUICK_CHECKS + [("twistor example", _check_twistor)]


def run_selftest(quick=False, mutate=None, stream=None):
    stream = stream or sys.stderr
    checks = QUICK_CHECKS if quick else FULL_CHECKS
    failed = []
    with _mutation(mutate):
        for name, fn in checks:
            try:
                ok, detail = fn()
            except Exception as exc:  # a crash is a failure, keep going
                ok, detail = False, f"{type(exc).__name__}: {exc}"
            print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}", file=stream)
            if not ok:
                failed.append(name)
    print(f"selftest: {len(checks) - len(failed)}/{len(checks)} passed", file=stream)
    return failed


# --- argument parsing ----------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(json.dumps({"error": "usage", "message": message}), file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser():
    p = _Parser(prog="wtorus", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write an example immersion file")
    g.add_argument("kind", choices=["clifford", "twistor-elliptic", "perturbed"])
    g.add_argument("--n", type=int, default=64, help="samples per period")
    g.add_argument("--n2", type=int, default=None, help="samples along the second period")
    g.add_argument("--lattice", default="square", help="'square' or 'rect:a,b' (twistor only)")
    g.add_argument("--base", choices=["clifford", "twistor-elliptic"], default="clifford")
    g.add_argument("--amp", type=float, default=1e-2)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--output", default=None)

    a = sub.add_parser("analyze", help="run the analysis pipeline on an immersion file")
    a.add_argument("input")
    a.add_argument("--output", default=".", help="output directory")
    a.add_argument("--config", default=None, help="JSON file with a tolerances block")
    a.add_argument("--n", type=int, default=None, help="resample check: expected samples per period")
    a.add_argument("--lattice", default=None, help="expected lattice ('square' or 'rect:a,b')")
    a.add_argument("--mu-circle-samples", type=int, default=None)
    a.add_argument("--mu-annulus-samples", type=int, default=None)
    a.add_argument("--tol-eig", type=float, default=None)
    a.add_argument("--tol-el", type=float, default=None)
    a.add_argument("--tol-conf", type=float, default=None)
    a.add_argument("--method", choices=["central", "spectral"], default=None)
    a.add_argument("--threads", type=int, default=None)
    a.add_argument("--seed", type=int, default=None)
    a.add_argument("--reproducible", action="store_true", help="omit timestamps")

    s = sub.add_parser("selftest", help="run the invariant suites at small N")
    s.add_argument("--quick", action="store_true")
    s.add_argument("--dev-mutate", choices=sorted(MUTATIONS), default=None,
                   help="developer mode: inject a known bug, the suite must fail")
    return p


def _fail(code, kind, message, **details):
    print(json.dumps(_jsonable({"error": kind, "message": message, **details}), sort_keys=True),
          file=sys.stderr)
    return code


def _cmd_generate(args):
    try:
        imm, src = build_immersion(args.kind, args.n, args.n2, args.lattice, args.base, args.amp, args.seed)
    except ValueError as exc:
        return _fail(EXIT_USAGE, "usage", str(exc))
    out = Path(args.output or f"{args.kind}.json")
    try:
        sf.save_immersion(imm, out, source=src)
    except OSError as exc:
        return _fail(EXIT_USAGE, "io", str(exc), path=str(out))
    print(out)
    return EXIT_OK


def _load_config(path):
    if path is None:
        return {}
    data = json.loads(Path(path).read_text())
    return data.get("tolerances", data)


def _cmd_analyze(args):
    try:
        raw = Path(args.input).read_bytes()
        data = json.loads(raw)
        imm = sf.immersion_from_dict(data)
        settings = Settings.resolve(
            _load_config(args.config),
            tol_eig=args.tol_eig, tol_el=args.tol_el, tol_conf=args.tol_conf,
            mu_circle_samples=args.mu_circle_samples, mu_annulus_samples=args.mu_annulus_samples,
            method=args.method, threads=args.threads, seed=args.seed,
        )
    except (OSError, ValueError, KeyError) as exc:
        return _fail(EXIT_USAGE, "input", str(exc))
    if args.n is not None and imm.grid.n1 != args.n:
        return _fail(EXIT_USAGE, "input", f"file has {imm.grid.n1} samples, expected {args.n}")
    if args.lattice is not None:
        try:
            a, b = parse_lattice(args.lattice, "twistor-elliptic")
        except ValueError as exc:
            return _fail(EXIT_USAGE, "usage", str(exc))
        if args.lattice == "square":
            # any square lattice
            a = b = imm.grid.a
        if not np.allclose((imm.grid.a, imm.grid.b), (a, b), rtol=1e-9):
            return _fail(EXIT_USAGE, "input", f"file lattice {(imm.grid.a, imm.grid.b)} != {(a, b)}")
    descriptor = {"sha256": hashlib.sha256(raw).hexdigest(), "path": Path(args.input).name}
    if "source" in data:
        descriptor["source"] = data["source"]
    t0 = time.perf_counter()
    try:
        report, sweep = analyze_immersion(imm, settings, descriptor)
    except GateError as exc:
        return _fail(EXIT_CONFORMAL, "conformality_gate", str(exc), **exc.details)
    except sf.DegenerateDerivativeError as exc:
        return _fail(EXIT_IMMERSED, "not_immersed", str(exc))
    except (tp.DegreeError, fam.TransportError, np.linalg.LinAlgError, FloatingPointError) as exc:
        return _fail(EXIT_NUMERIC, "numerical_failure", str(exc), exception=type(exc).__name__)
    if not args.reproducible:
        report["created"] = datetime.now(timezone.utc).isoformat()
        report["elapsed_seconds"] = time.perf_counter() - t0
    out = Path(args.output)
    try:
        out.mkdir(parents=True, exist_ok=True)
        rpath = out / "report.json"
        rpath.write_text(dumps(report) + "\n")
        cpath = write_sweep_csv(sweep, out / "sweep.csv")
    except OSError as exc:
        return _fail(EXIT_USAGE, "io", str(exc), path=str(out))
    print(rpath)
    print(cpath)
    return EXIT_OK


def _cmd_selftest(args):
    failed = run_selftest(quick=args.quick, mutate=args.dev_mutate)
    return EXIT_OK if not failed else EXIT_USAGE


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # --help, --version and usage errors
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    handler = {"generate": _cmd_generate, "analyze": _cmd_analyze, "selftest": _cmd_selftest}
    return handler[args.command](args)


if __name__ == "__main__":
    raise SystemExit(main())
