"""Numerical symplectic homogenization of Hamiltonians on the cotangent bundle of the torus."""
__version__ = "0.1.0"
