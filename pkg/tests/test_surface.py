import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wtorus import quatlin as ql
from wtorus import surface as sf

from conftest import TWO_PI, clifford, twistor


def analytic_clifford_jets(grid):
    # f = (e^{ix} + j e^{iy}) / sqrt 2 in the chart psi_2 = 1
    x, y = grid.coords()
    s = 1 / np.sqrt(2)
    zero = np.zeros_like(x)
    f = ql.left_mul_matrix(ql.pair_to_quat(s * np.exp(1j * x), s * np.exp(1j * y)))
    fx = ql.left_mul_matrix(ql.pair_to_quat(1j * s * np.exp(1j * x), zero))
    fy = ql.left_mul_matrix(ql.pair_to_quat(zero, 1j * s * np.exp(1j * y)))
    return f, fx, fy


def test_grid_basics():
    g = sf.make_grid((2.0, 0), (0, 3.0), 16, 24)
    assert g.shape == (16, 24)
    assert np.isclose(g.h1, 2.0 / 16) and np.isclose(g.h2, 3.0 / 24)
    assert np.isclose(g.cell_area * 16 * 24, g.area)
    x, y = g.coords()
    assert x.shape == (16, 24) and x[1, 0] == g.h1 and y[0, 1] == g.h2
    assert g.refined(32).shape == (32, 32)


def test_grid_rejects_oblique_and_tiny():
    with pytest.raises(ValueError):
        sf.make_grid((1.0, 0), (0.5, 1.0), 16, 16)
    with pytest.raises(ValueError):
        sf.make_grid((1.0, 0), (0, 1.0), 2, 16)


@pytest.mark.parametrize("method", ["central", "spectral"])
def test_derivatives_of_trig_field(method):
    # oracle: exact symbols of the stencils on a Fourier mode
    g = sf.make_grid((TWO_PI, 0), (0, TWO_PI), 48, 40)
    x, y = g.coords()
    h1, h2 = g.h1, g.h2
    u = np.sin(3 * x) * np.cos(2 * y)
    if method == "central":
        k1, k2 = np.sin(3 * h1) / h1, np.sin(2 * h2) / h2
        kk1, kk2 = (2 * np.sin(1.5 * h1) / h1) ** 2, (2 * np.sin(h2) / h2) ** 2
    else:
        k1, k2, kk1, kk2 = 3, 2, 9, 4
    ux, uy, uxx, uxy, uyy = sf.jets(u, g, method)
    assert np.allclose(ux, k1 * np.cos(3 * x) * np.cos(2 * y), atol=1e-12)
    assert np.allclose(uy, -k2 * np.sin(3 * x) * np.sin(2 * y), atol=1e-12)
    assert np.allclose(uxx, -kk1 * u, atol=1e-11)
    assert np.allclose(uyy, -kk2 * u, atol=1e-11)
    assert np.allclose(uxy, -k1 * k2 * np.cos(3 * x) * np.sin(2 * y), atol=1e-11)


def test_derivatives_periodic():
    # shifting the data by one sample shifts the derivative by one sample
    g = sf.make_grid((1, 0), (0, 1), 16, 16)
    u = np.random.default_rng(0).normal(size=g.shape)
    for axis in (0, 1):
        d = sf.d_axis(u, axis, g.h1)
        assert np.allclose(sf.d_axis(np.roll(u, 1, axis), axis, g.h1), np.roll(d, 1, axis))


def test_unknown_method():
    with pytest.raises(ValueError):
        sf.d_axis(np.zeros((8, 8)), 0, 0.1, "upwind")


def test_clifford_chart_jets_second_order():
    errs = []
    for n in (32, 64, 128):
        imm = clifford(n)
        cj = sf.chart_jets(imm, sf.chart_unitary(imm))
        f, fx, fy = analytic_clifford_jets(imm.grid)
        assert np.max(np.abs(cj.f - f)) < 1e-14
        errs.append(max(np.max(np.abs(cj.fx - fx)), np.max(np.abs(cj.fy - fy))))
    order = np.log2(errs[0] / errs[-1]) / 2
    assert order >= 1.8


def test_clifford_spectral_jets_exact():
    imm = clifford(32)
    cj = sf.chart_jets(imm, sf.chart_unitary(imm), "spectral")
    _, fx, fy = analytic_clifford_jets(imm.grid)
    assert np.max(np.abs(cj.fx - fx)) < 1e-12
    assert np.max(np.abs(cj.fy - fy)) < 1e-12


def test_clifford_conformal_and_normals():
    imm = clifford(32)
    assert np.max(sf.conformality_residual(imm)) < 1e-12
    nr = sf.left_right_normals(imm)
    assert np.all(ql.is_unit_imaginary(nr.left, 1e-10))
    assert np.all(ql.is_unit_imaginary(nr.right, 1e-10))
    assert np.max(nr.left_residual) < 1e-10


def test_twistor_example_sane():
    imm = twistor(64)
    assert np.all(np.isfinite(imm.lift))
    assert np.allclose(ql.quat_norm2(imm.lift).sum(-1), 1.0)
    # both charts occur
    assert set(np.unique(imm.chart)) == {1, 2}
    conf = sf.conformality_residual(twistor(96), "spectral")
    assert np.max(conf) < 1e-3


def test_twistor_lattice_mismatch():
    from wtorus.elliptic import Lattice

    with pytest.raises(ValueError):
        sf.twistor_elliptic(sf.make_grid((1, 0), (0, 1), 16, 16), Lattice.rectangular(1.0, 2.0))


def test_perturbed_is_deterministic_and_nonconformal():
    base = clifford(48)
    p1 = sf.perturb(base, 1e-2, 7)
    p2 = sf.perturb(base, 1e-2, 7)
    assert np.array_equal(p1.lift, p2.lift)
    assert not np.array_equal(p1.lift, sf.perturb(base, 1e-2, 8).lift)
    assert np.array_equal(sf.perturb(base, 0.0, 7).lift, base.lift)
    assert np.max(sf.conformality_residual(p1)) > 1e-3
    with pytest.raises(ValueError):
        sf.perturb(base, -1.0, 0)


def test_constant_map_is_degenerate():
    g = sf.make_grid((1, 0), (0, 1), 16, 16)
    lift = np.zeros(g.shape + (2, 4))
    lift[..., 0, 0] = 1.0
    lift[..., 1, 2] = 0.5
    with pytest.raises(sf.DegenerateDerivativeError):
        sf.left_right_normals(sf.Immersion(g, lift))


def test_zero_lift_rejected():
    g = sf.make_grid((1, 0), (0, 1), 8, 8)
    with pytest.raises(ValueError):
        sf.Immersion(g, np.zeros(g.shape + (2, 4)))


def test_file_roundtrip_bit_exact(tmp_path):
    imm = sf.perturb(twistor(24), 1e-3, 3)
    path = sf.save_immersion(imm, tmp_path / "t.json", source={"generator": "test"})
    back = sf.load_immersion(path)
    assert np.array_equal(back.lift, imm.lift)
    assert back.grid == imm.grid
    data = json.loads(path.read_text())
    assert data["dims"] == [24, 24] and len(data["lift"]) == 24 * 24
    assert data["source"] == {"generator": "test"}


def test_file_row_major_layout():
    g = sf.make_grid((1, 0), (0, 2), 8, 8)
    imm = sf.Immersion(g, np.random.default_rng(0).normal(size=g.shape + (2, 4)))
    flat = sf.immersion_to_dict(imm)["lift"]
    # row = y index, col = x index
    assert np.allclose(flat[3 * 8 + 5], imm.lift[5, 3].ravel())


def test_file_shape_mismatch():
    d = sf.immersion_to_dict(clifford(8))
    d["dims"] = [8, 9]
    with pytest.raises(ValueError):
        sf.immersion_from_dict(d)


GAUGE_IMM = {"clifford": clifford(24), "twistor": twistor(48)}


@settings(max_examples=10, deadline=None)
@given(st.sampled_from(sorted(GAUGE_IMM)), st.integers(0, 2**32 - 1))
def test_chart_quantities_gauge_invariant(name, seed):
    imm = GAUGE_IMM[name]
    q = np.random.default_rng(seed).normal(size=imm.grid.shape + (4,))
    q[ql.quat_norm2(q) < 1e-2] += ql.ONE
    other = imm.regauged(q)
    assert np.max(np.abs(sf.conformality_residual(imm) - sf.conformality_residual(other))) < 1e-10
    n1, n2 = sf.left_right_normals(imm), sf.left_right_normals(other)
    assert np.max(np.abs(n1.left - n2.left)) < 1e-10
    assert np.max(np.abs(n1.right - n2.right)) < 1e-10
