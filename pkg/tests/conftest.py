import numpy as np
import pytest

import forecast_coherence as fc


@pytest.fixture
def nested_system():
    """E subset of F over three distinguishable worlds."""
    return fc.EventSystem.from_memberships(
        ["TT", "FT", "FF"],
        [("E", ["TT"]), ("F", ["TT", "FT"])],
    )


@pytest.fixture
def nested_vertices(nested_system):
    return fc.build_vertex_set(nested_system)


def random_system(rng, n=None, m=None, n_max=5, m_max=16):
    """A random event system with at least one world."""
    if n is None:
        n = int(rng.integers(1, n_max + 1))
    if m is None:
        m = int(rng.integers(2, m_max + 1))
    inc = rng.integers(0, 2, size=(m, n)).astype(bool)
    return fc.EventSystem(tuple(range(m)), inc)


def random_coherent(rng, V):
    """A forecast drawn from the hull by random Dirichlet weights.

    Coordinates that are constant across all vertices are snapped to
    that constant: the weighted dot product can land one ulp off, which
    would put the point (just) outside the hull.
    """
    w = rng.dirichlet(np.ones(V.k))
    f = np.clip(w @ V.matrix, 0.0, 1.0)
    lo = V.matrix.min(axis=0)
    hi = V.matrix.max(axis=0)
    f[lo == hi] = lo[lo == hi]
    return f


def brier_penalties(Vm, f):
    """Independent penalty formulas used to re-verify engine output."""
    return ((Vm - np.asarray(f)) ** 2).sum(axis=1)


def log_penalties(Vm, f):
    f = np.asarray(f, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(Vm == 1.0, -np.log(f), -np.log1p(-f))
    return terms.sum(axis=1)
