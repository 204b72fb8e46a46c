import numpy as np
import pytest

from wtorus import congruence as cg
from wtorus import surface as sf

TWO_PI = 2 * np.pi


def clifford(n, n2=None):
    return sf.clifford_torus(sf.make_grid((TWO_PI, 0), (0, TWO_PI), n, n2 or n))


def twistor(n):
    return sf.twistor_elliptic(sf.make_grid((1, 0), (0, 1), n, n))


class Example:
    """Immersion with its sphere congruence and Hopf fields."""

    def __init__(self, imm, method):
        self.imm = imm
        self.method = method
        self.S = cg.mean_curvature_sphere(imm, method)
        self.A, self.Q = cg.hopf_fields(self.S)


@pytest.fixture(scope="session")
def clifford32():
    return Example(clifford(32), "central")


@pytest.fixture(scope="session")
def clifford96():
    return Example(clifford(96), "central")


@pytest.fixture(scope="session")
def twistor96():
    return Example(twistor(96), "spectral")


@pytest.fixture(scope="session")
def perturbed96():
    return Example(sf.perturb(clifford(96), 1e-2, 7), "central")
