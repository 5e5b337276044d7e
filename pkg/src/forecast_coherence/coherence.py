"""Coherence decisions for forecasts over a finite event system.

A forecast is coherent exactly when it lies in the convex hull of the
system's vertex set; equivalently, when some probability measure over
the worlds reproduces every announced probability.  The decision is
made geometrically: project the forecast onto the hull under the
quadratic (Brier) geometry and compare the squared distance with the
tolerance.  One projection yields both certificates:

* coherent: the hull weights of the projected point, mapped to atoms,
  are a witness measure;
* incoherent: the unit vector from the projection toward the forecast
  strictly separates the forecast from every vertex.

Membership goes through projection rather than a generic LP because the
Frank-Wolfe engine already maintains hull weights, so the witness falls
out of the same computation that measures the distance.  The oracle
module provides the independent exact check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy.optimize import nnls

from . import bregman
from .events import EventSystem, VertexSet, build_vertex_set
from .scoring import RuleFamily, brier

__all__ = [
    "Status",
    "CoherenceVerdict",
    "check",
    "witness_measure",
]


class Status(str, Enum):
    COHERENT = "coherent"
    INCOHERENT = "incoherent"


@dataclass(frozen=True)
class CoherenceVerdict:
    """Decision plus certificate for one forecast.

    ``witness`` maps each vertex (atom) to a probability and is present
    iff coherent; ``separator`` is a pair ``(h, delta)`` with ``h`` a
    unit vector satisfying ``h . f > h . v + delta`` for every vertex,
    present iff incoherent.  ``hull_distance`` is the Euclidean distance
    from the forecast to the hull as measured by the projection.
    """

    status: Status
    hull_distance: float
    witness: dict[tuple[int, ...], float] | None
    separator: tuple[np.ndarray, float] | None
    projection: bregman.Projection

    @property
    def coherent(self) -> bool:
        return self.status is Status.COHERENT


@lru_cache(maxsize=128)
def _brier_family(n: int) -> RuleFamily:
    return RuleFamily.uniform(brier(), n)


def _refine_weights(Vm: np.ndarray, f: np.ndarray, w0: np.ndarray):
    """Polish Frank-Wolfe hull weights to least-squares accuracy.

    The FW gap certifies the distance but leaves the weights a few
    orders looser than machine precision; a small equality-constrained
    solve on the support (with a nonnegative fallback over all vertices)
    tightens the witness so that it reconstructs the forecast to
    roundoff whenever the forecast truly lies in the hull.
    """
    k = Vm.shape[0]
    r = w0 @ Vm - f
    best_w, best = w0, float(r @ r)
    support = np.flatnonzero(w0 > 1e-10)
    if support.size:
        A = Vm[support].T
        s = support.size
        kkt = np.zeros((s + 1, s + 1))
        kkt[:s, :s] = 2.0 * A.T @ A
        kkt[:s, s] = 1.0
        kkt[s, :s] = 1.0
        rhs = np.concatenate([2.0 * A.T @ f, [1.0]])
        sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
        u = sol[:s]
        if u.min() >= -1e-9:
            u = np.clip(u, 0.0, None)
            tot = u.sum()
            if tot > 0:
                w = np.zeros(k)
                w[support] = u / tot
                r = w @ Vm - f
                r2 = float(r @ r)
                if r2 < best:
                    best_w, best = w, r2
    if best > 1e-18:
        # Support may have been wrong; let every vertex participate.
        alpha = 1e3
        aug = np.vstack([Vm.T, alpha * np.ones((1, k))])
        target = np.concatenate([f, [alpha]])
        u, _ = nnls(aug, target)
        tot = u.sum()
        if tot > 0:
            w = u / tot
            r = w @ Vm - f
            r2 = float(r @ r)
            if r2 < best:
                best_w, best = w, r2
    return best_w, best


def check(
    f,
    V: VertexSet,
    tol: float = 1e-9,
    max_iters: int = 100_000,
) -> CoherenceVerdict:
    """Decide whether ``f`` lies within ``tol`` (squared distance) of the hull.

    The distance comes from a Brier-geometry Frank-Wolfe projection, so
    the verdict carries a convergence certificate either way.  Forecasts
    within ``tol`` of the hull are declared coherent.
    """
    fam = _brier_family(V.n)
    f = bregman._check_vector(f, V.n, "forecast")
    proj = bregman.project(fam, f, V, tol=tol, max_iters=max_iters)
    Vm = V.matrix
    r = proj.point - f
    d_afw = float(r @ r)
    w, dist2 = proj.weights, d_afw
    point = proj.point
    if d_afw - proj.fw_gap <= tol:
        # Possibly coherent: tighten the witness before deciding.
        w, dist2 = _refine_weights(Vm, f, proj.weights)
        if dist2 < d_afw:
            point = w @ Vm
        else:
            w, dist2 = proj.weights, d_afw
    if dist2 <= tol:
        witness = {
            V.vertices[j]: float(w[j]) for j in np.flatnonzero(w > 1e-15)
        }
        return CoherenceVerdict(
            status=Status.COHERENT,
            hull_distance=math.sqrt(max(dist2, 0.0)),
            witness=witness,
            separator=None,
            projection=bregman.Projection(point, w, proj.fw_gap, proj.iterations),
        )
    dist = math.sqrt(dist2)
    h = (f - point) / dist
    margins = h @ f - Vm @ h
    observed = float(margins.min())
    delta = min((dist2 - tol) / dist, observed * (1.0 - 1e-9))
    if delta <= 0.0:
        # The gap certificate guarantees observed >= dist/2 > 0 whenever
        # dist2 > tol >= fw_gap, so arriving here means the projection
        # is unusable for a certificate.
        raise bregman.NonconvergenceError(
            f"separator margin {observed:.3e} not strictly positive at "
            f"distance {dist:.3e}",
            projection=proj,
        )
    return CoherenceVerdict(
        status=Status.INCOHERENT,
        hull_distance=dist,
        witness=None,
        separator=(h, float(delta)),
        projection=bregman.Projection(point, w, proj.fw_gap, proj.iterations),
    )


def witness_measure(verdict: CoherenceVerdict, system: EventSystem) -> dict:
    """Spread a coherent verdict's atom weights uniformly over worlds.

    The result is a probability assignment ``world -> mass`` whose
    event probabilities reproduce the checked forecast within the
    check's tolerance.  Raises ``ValueError`` on incoherent verdicts.
    """
    if not verdict.coherent:
        raise ValueError("incoherent verdicts carry no witness measure")
    vs = build_vertex_set(system)
    mu: dict = {}
    for vertex, weight in verdict.witness.items():
        worlds = vs.world_classes.get(vertex)
        if worlds is None:
            raise ValueError(
                f"witness vertex {vertex} does not belong to this system"
            )
        share = weight / len(worlds)
        for wld in worlds:
            mu[wld] = mu.get(wld, 0.0) + share
    return mu
