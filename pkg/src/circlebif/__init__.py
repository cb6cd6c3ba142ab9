"""Rotation numbers, periodic-orbit censuses and saddle-node bifurcation
diagrams for parametric families of circle diffeomorphisms."""
from .errors import *  # noqa: F401,F403
from .family import FamilySpec, ParamBox, ParamPoint, Poly2  # noqa: F401

__version__ = "0.1.0"
