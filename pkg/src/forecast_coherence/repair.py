"""Repairing incoherent forecasts into coherent strict dominators.

Any incoherent forecast is strictly beaten, at every possible world, by
some coherent forecast, under any strictly proper scoring rule.  The
construction splits on whether the rule's gradient is finite at the
input:

* finite gradient: the Bregman projection of the input onto the hull is
  itself the dominator, with margin at least the divergence between
  input and projection minus the solver gap;
* some coordinate of the input sits on an endpoint where its rule's
  slope diverges: the problem restricts to the face of vertices that
  agree with the input there (pinned coordinates dropped), the
  restricted forecast is repaired recursively, and the lifted result is
  pulled off the face by mixing in the average of the off-face vertices
  with a small weight ``epsilon``.  Off-face vertices charge the input
  an infinite penalty, so any finite-penalty mixture beats them; a
  halving search picks ``epsilon`` small enough that the on-face
  margins stay strictly positive too.

When no vertex agrees with the input on the pinned coordinates, the
input's penalty is infinite at every world and the uniform average of
all vertices (finite penalties everywhere) dominates outright; with a
single vertex this degenerates to the classic base case of announcing
that vertex.

Repairing an already coherent forecast is rejected rather than treated
as the identity: coherent forecasts admit no dominator at all, and the
error keeps that fact visible in the API.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import bregman, coherence
from .domination import penalties_at_vertices
from .events import VertexSet
from .scoring import RuleFamily, ScoringRule

__all__ = [
    "RepairError",
    "CoherentInputError",
    "EpsilonSearchError",
    "CertificationError",
    "RepairOptions",
    "FaceRecursion",
    "RepairResult",
    "Certificate",
    "repair",
    "certify",
]


class RepairError(RuntimeError):
    """Base class for repair failures."""


class CoherentInputError(ValueError):
    """Repair was asked to improve a forecast that is already coherent."""

    def __init__(self, message, verdict=None):
        super().__init__(message)
        self.verdict = verdict


class EpsilonSearchError(RepairError):
    """The mixing weight search exhausted its range.

    Indicates a tolerance misconfiguration (margin floor too large for
    the instance), not a failure of the underlying theory.  Carries the
    last margins seen for diagnosis.
    """

    def __init__(self, message, epsilon=None, margins=None):
        super().__init__(message)
        self.epsilon = epsilon
        self.margins = margins


class CertificationError(RepairError):
    """An independent recheck of a repair result failed."""

    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate


@dataclass(frozen=True)
class RepairOptions:
    tol: float = 1e-9
    max_iters: int = 100_000
    margin_floor: float = 1e-10


@dataclass(frozen=True)
class FaceRecursion:
    """Path marker for the unbounded boundary construction."""

    depth: int
    epsilon: float
    pinned: tuple[int, ...]


@dataclass(frozen=True)
class RepairResult:
    """A coherent strictly dominating forecast with its provenance.

    ``weights`` are hull weights over the vertex set reconstructing
    ``repaired``; ``divergence`` is ``d(repaired, input)`` and is
    ``+inf`` exactly when the repair had to leave a divergent face;
    ``min_margin`` is the smallest per-vertex improvement (``+inf``
    when the input's penalty is infinite at every vertex).
    """

    repaired: np.ndarray
    weights: np.ndarray
    divergence: float
    min_margin: float
    margins: dict[tuple[int, ...], float] = field(compare=False)
    path: Union[bregman.Projection, FaceRecursion] = field(compare=False)


@dataclass(frozen=True)
class Certificate:
    """Standalone recheck of a repair, independent of the solver path."""

    passed: bool
    coherent: bool
    hull_distance: float
    margins: dict[tuple[int, ...], float]
    min_margin: float
    failures: tuple[tuple[int, ...], ...]


def _coerce_family(rules, n: int) -> RuleFamily:
    if isinstance(rules, ScoringRule):
        return RuleFamily.uniform(rules, n)
    if isinstance(rules, RuleFamily):
        if rules.n != n:
            raise ValueError(f"rule family has {rules.n} rules for {n} events")
        return rules
    raise TypeError(f"expected ScoringRule or RuleFamily, got {type(rules).__name__}")


def _ext_margins(fam, f, g, V) -> dict[tuple[int, ...], float]:
    pf = penalties_at_vertices(fam, f, V)
    pg = penalties_at_vertices(fam, g, V)
    out = {}
    for j, v in enumerate(V.vertices):
        a, b = float(pf[j]), float(pg[j])
        if math.isinf(a) and math.isinf(b):
            out[v] = 0.0
        else:
            out[v] = a - b
    return out


def _min_margin(margins: dict) -> float:
    return min(margins.values())


def _repair_by_projection(fam, f, V, opts) -> RepairResult:
    tol = opts.tol
    last = None
    for _ in range(4):
        proj = bregman.project(fam, f, V, tol=tol, max_iters=opts.max_iters)
        g = proj.point
        margins = _ext_margins(fam, f, g, V)
        worst = _min_margin(margins)
        dg = bregman.divergence(fam, g, f)
        if worst > 0.0:
            return RepairResult(
                repaired=g,
                weights=proj.weights,
                divergence=dg,
                min_margin=worst,
                margins=margins,
                path=proj,
            )
        # The margin guarantee is divergence minus gap; shrink the gap
        # until it clears, which a barely-incoherent input may need.
        last = (proj, margins, worst)
        tol = min(tol * 1e-3, dg / 4.0 if dg > 0 else tol * 1e-3)
        if tol < 1e-15:
            break
    proj, margins, worst = last
    raise bregman.NonconvergenceError(
        f"projection repair could not certify a positive margin "
        f"(worst {worst:.3e})",
        projection=proj,
    )


def _repair_on_face(fam, f, V, opts) -> RepairResult:
    Vm = V.matrix
    k = V.k
    pinned = np.flatnonzero(fam.divergent_mask(f))
    free = np.setdiff1d(np.arange(fam.n), pinned)
    on_face = np.flatnonzero((Vm[:, pinned] == f[pinned]).all(axis=1))
    off_face = np.setdiff1d(np.arange(k), on_face)

    if on_face.size == 0:
        # The input suffers an infinite penalty at every world; the
        # uniform vertex average has finite penalties everywhere and so
        # dominates with infinite margin.  (k = 1 reduces to announcing
        # the lone vertex.)
        w = np.full(k, 1.0 / k)
        g = w @ Vm
        margins = _ext_margins(fam, f, g, V)
        return RepairResult(
            repaired=g,
            weights=w,
            divergence=math.inf,
            min_margin=_min_margin(margins),
            margins=margins,
            path=FaceRecursion(depth=1, epsilon=1.0, pinned=tuple(pinned.tolist())),
        )

    # A vertex agreeing with f everywhere would make f coherent, which
    # the precondition has excluded, so the face sub-problem is proper.
    sub_rows = Vm[on_face][:, free].astype(int)
    subV = VertexSet.from_rows(sub_rows, labels=on_face.tolist())
    sub_fam = fam.restrict(free)
    sub = repair(sub_fam, f[free], subV, opts)
    sub_depth = sub.path.depth if isinstance(sub.path, FaceRecursion) else 0

    g_tilde = f.copy()
    g_tilde[free] = sub.repaired
    w_tilde = np.zeros(k)
    for j, sv in enumerate(subV.vertices):
        parents = subV.world_classes[sv]
        w_tilde[parents[0]] += sub.weights[j]

    if off_face.size == 0:
        margins = _ext_margins(fam, f, g_tilde, V)
        worst = _min_margin(margins)
        if worst <= 0.0:
            raise bregman.NonconvergenceError(
                f"face repair lost its margin when lifted (worst {worst:.3e})"
            )
        return RepairResult(
            repaired=g_tilde,
            weights=w_tilde,
            divergence=bregman.divergence(fam, g_tilde, f),
            min_margin=worst,
            margins=margins,
            path=FaceRecursion(
                depth=sub_depth + 1, epsilon=0.0, pinned=tuple(pinned.tolist())
            ),
        )

    off_mean = Vm[off_face].mean(axis=0)
    eps = 0.5
    while True:
        g = (1.0 - eps) * g_tilde + eps * off_mean
        margins = _ext_margins(fam, f, g, V)
        worst = _min_margin(margins)
        if worst >= opts.margin_floor and all(m > 0.0 for m in margins.values()):
            break
        eps *= 0.5
        if eps < 1e-12:
            raise EpsilonSearchError(
                f"no mixing weight above 1e-12 achieved margins >= "
                f"{opts.margin_floor:g}; worst margin {worst:.3e}",
                epsilon=eps,
                margins=margins,
            )
    w = (1.0 - eps) * w_tilde
    w[off_face] += eps / off_face.size
    return RepairResult(
        repaired=g,
        weights=w,
        divergence=bregman.divergence(fam, g, f),
        min_margin=worst,
        margins=margins,
        path=FaceRecursion(
            depth=sub_depth + 1, epsilon=eps, pinned=tuple(pinned.tolist())
        ),
    )


def repair(rules, f, V: VertexSet, opts: RepairOptions | None = None) -> RepairResult:
    """Construct a coherent forecast strictly dominating incoherent ``f``.

    ``rules`` may be a single rule (applied to every event) or a
    :class:`~forecast_coherence.scoring.RuleFamily`.  Raises
    :class:`CoherentInputError` when ``f`` is already within tolerance
    of the hull.
    """
    opts = opts or RepairOptions()
    fam = _coerce_family(rules, V.n)
    f = bregman._check_vector(f, fam.n, "forecast")
    verdict = coherence.check(f, V, tol=opts.tol, max_iters=opts.max_iters)
    if verdict.coherent:
        raise CoherentInputError(
            "forecast is already coherent; coherent forecasts admit no "
            "dominating repair",
            verdict=verdict,
        )
    if fam.divergent_mask(f).any():
        return _repair_on_face(fam, f, V, opts)
    return _repair_by_projection(fam, f, V, opts)


def certify(result: RepairResult, rules, f, V: VertexSet, tol: float = 1e-9) -> Certificate:
    """Recheck a repair using only penalty evaluation and a fresh
    coherence decision; independent of how the repair was found."""
    fam = _coerce_family(rules, V.n)
    f = np.asarray(f, dtype=float)
    g = np.asarray(result.repaired, dtype=float)
    verdict = coherence.check(g, V, tol=tol)
    margins = _ext_margins(fam, f, g, V)
    failures = tuple(v for v, m in margins.items() if not m > 0.0)
    return Certificate(
        passed=verdict.coherent and not failures,
        coherent=verdict.coherent,
        hull_distance=verdict.hull_distance,
        margins=margins,
        min_margin=_min_margin(margins),
        failures=failures,
    )
