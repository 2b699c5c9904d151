"""Minimal-capacity continua: Python front end to the C++ library."""

import json as _json

from . import _core
from ._core import InputError, NumericalError, green, jacobi_theta1, omega, polyline_capacity, theta

__all__ = [
    "InputError",
    "NumericalError",
    "green",
    "jacobi_theta1",
    "omega",
    "polyline_capacity",
    "solve",
    "theta",
    "verify",
]


def _text(obj):
    return obj if isinstance(obj, str) else _json.dumps(obj)


def solve(instance, route=None, seed=None, mesh=None, jip_trials=0):
    """Solve an instance given as a dict or JSON text; returns the solution document as a dict."""
    return _json.loads(_core.solve(_text(instance), route=route, seed=seed, mesh=mesh, jip_trials=jip_trials))


def verify(solution):
    """Recompute the certificates of a stored solution (dict or JSON text)."""
    return _json.loads(_core.verify(_text(solution)))
