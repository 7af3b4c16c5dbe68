"""Split a discrete martingale into a sum of martingales whose increments are independent."""

import json

from . import _core
from ._core import PreconditionError, SchemaError, TheoryViolation

__all__ = [
    "PreconditionError",
    "SchemaError",
    "TheoryViolation",
    "barycenter",
    "decompose",
    "generate",
    "verify",
    "w2_sq",
]


def _text(obj):
    return obj if isinstance(obj, str) else json.dumps(obj)


def _atoms(locations):
    return [list(x) if isinstance(x, (list, tuple)) else [float(x)] for x in locations]


def generate(seed, K, m=1, branching=2, weights="uniform", values="normal"):
    """Random tree-structured martingale in the input file schema."""
    return json.loads(_core.generate(seed, K, m, branching, weights, values))


def decompose(martingale, tol_rel=1e-6, n_max=64, max_points=1_000_000):
    """Decomposition of a martingale dict (or JSON text)."""
    return json.loads(_core.decompose(_text(martingale), tol_rel, n_max, max_points))


def verify(decomposition):
    """Report dict with an overall "pass" flag and one entry per check."""
    return json.loads(_core.verify(_text(decomposition)))


def w2_sq(nu_locations, nu_masses, mu_locations, mu_masses):
    """Squared W2 distance; scalar locations are treated as 1-D atoms."""
    return _core.w2_sq(_atoms(nu_locations), list(nu_masses), _atoms(mu_locations), list(mu_masses))


def barycenter(laws, weights):
    """W2 barycenter of [(locations, masses), ...]; returns (locations, masses, approximate)."""
    return _core.barycenter([(_atoms(x), list(w)) for x, w in laws], list(weights))
