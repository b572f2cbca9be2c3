"""Topological ligament sensitivities for 2D linear elasticity."""
__version__ = "0.1.0"

from ._backend import BACKEND  # noqa: E402,F401
