"""Finite-mode Clifford algebras, Fock representations, Cech cochains and the quaternionic Chern experiment."""

from . import errors, fock, hopf, modes, quatgeom, torsorcech

__all__ = ["errors", "fock", "hopf", "modes", "quatgeom", "torsorcech"]
__version__ = "0.1.0"
