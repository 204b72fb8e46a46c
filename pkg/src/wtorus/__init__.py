"""Willmore tori in the 4-sphere: sphere congruences, degrees and monodromy."""

__version__ = "0.1.0"

from . import congruence, elliptic, family, quatlin, surface, topology  # noqa: F401
