# qelab/__init__.py

"""Numerical laboratory for quasi-Einstein manifolds."""

__version__ = "0.1.0"
