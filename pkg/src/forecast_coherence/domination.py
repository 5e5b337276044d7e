"""Penalty profiles and domination comparisons between forecasts.

The penalty of a forecast at a world is the sum of per-event scores of
the announced probabilities against what actually happened.  Worlds
sharing an indicator vertex share a penalty, so profiles and domination
are quantified over the vertex set rather than the raw sample space.

All comparisons are extended-real: a penalty is ``+inf`` exactly when
some coordinate makes a categorical mistake under an unbounded rule
(announcing 0 on an event that happens, against a rule unbounded on
that side, or symmetrically 1).  ``inf <= inf`` holds, ``inf < inf``
does not, and margins between two infinite penalties are reported as 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import bregman
from .events import VertexSet
from .scoring import RuleFamily, ScoringRule

__all__ = [
    "ConsistencyError",
    "Relation",
    "PenaltyProfile",
    "DominationVerdict",
    "penalty",
    "penalty_profile",
    "compare",
]


class ConsistencyError(RuntimeError):
    """Internal cross-check between two penalty representations failed."""


class Relation(str, Enum):
    STRICTLY_DOMINATES = "strictly_dominates"
    WEAKLY_DOMINATES = "weakly_dominates"
    NO_DOMINATION = "no_domination"


@dataclass(frozen=True)
class PenaltyProfile:
    """Extended-real penalty of one forecast at every vertex."""

    per_vertex: dict[tuple[int, ...], float]

    def values(self, V: VertexSet) -> np.ndarray:
        return np.array([self.per_vertex[v] for v in V.vertices])


@dataclass(frozen=True)
class DominationVerdict:
    """Outcome of comparing a rival ``g`` against an incumbent ``f``.

    ``relation`` says whether ``g`` dominates ``f``; ``margins`` holds
    ``P(v, f) - P(v, g)`` per vertex, positive where the rival does
    strictly better.
    """

    relation: Relation
    margins: dict[tuple[int, ...], float]


def _coerce_family(rules, n: int) -> RuleFamily:
    if isinstance(rules, ScoringRule):
        return RuleFamily.uniform(rules, n)
    if isinstance(rules, RuleFamily):
        if rules.n != n:
            raise ValueError(f"rule family has {rules.n} rules for {n} events")
        return rules
    raise TypeError(f"expected ScoringRule or RuleFamily, got {type(rules).__name__}")


def penalties_at_vertices(rules, f, V: VertexSet) -> np.ndarray:
    """Vector of ``P(v, f)`` in the canonical vertex order."""
    fam = _coerce_family(rules, V.n)
    f = np.asarray(f, dtype=float)
    s0, s1 = fam.score_pairs(f)
    Vb = V.matrix.astype(bool)
    return np.where(Vb, s1[None, :], s0[None, :]).sum(axis=1)


def penalty(rules, f, v) -> float:
    """``sum_i s_i(v_i, f_i)`` in the extended reals."""
    v = np.asarray(v, dtype=float)
    if not np.isin(v, (0.0, 1.0)).all():
        raise ValueError("vertex coordinates must be 0/1")
    fam = _coerce_family(rules, v.size)
    f = np.asarray(f, dtype=float)
    if f.shape != v.shape:
        raise ValueError(f"forecast shape {f.shape} does not match vertex {v.shape}")
    s0, s1 = fam.score_pairs(f)
    return float(np.where(v == 1.0, s1, s0).sum())


def _self_scores(fam: RuleFamily, Vm: np.ndarray) -> np.ndarray:
    """``sum_i s_i(v_i, v_i)`` per vertex: the penalty of perfect foresight."""
    s0, s1 = fam.score_pairs(Vm)
    return np.where(Vm.astype(bool), s1, s0).sum(axis=1)


def penalty_profile(rules, f, V: VertexSet) -> PenaltyProfile:
    """Evaluate ``f``'s penalty at every vertex of ``V``.

    Every finite entry is cross-checked against its Bregman form,
    ``P(v, f) = d(v, f) + sum_i s_i(v_i, v_i)``; a disagreement beyond
    1e-9 raises :class:`ConsistencyError` and indicates a broken rule
    definition rather than a user error.
    """
    fam = _coerce_family(rules, V.n)
    f = np.asarray(f, dtype=float)
    vals = penalties_at_vertices(fam, f, V)
    self_scores = _self_scores(fam, V.matrix)
    for j, v in enumerate(V.vertices):
        if not math.isfinite(vals[j]):
            continue
        d = bregman.divergence(fam, V.matrix[j], f)
        alt = d + self_scores[j]
        if not math.isfinite(alt) or abs(alt - vals[j]) > 1e-9:
            raise ConsistencyError(
                f"penalty at vertex {v} disagrees with its divergence form: "
                f"{vals[j]!r} vs {alt!r}"
            )
    return PenaltyProfile({v: float(vals[j]) for j, v in enumerate(V.vertices)})


def _ext_sub(a: float, b: float) -> float:
    if math.isinf(a) and math.isinf(b):
        return 0.0
    return a - b


def compare(rules, f, g, V: VertexSet) -> DominationVerdict:
    """Does the rival ``g`` dominate the incumbent ``f`` over ``V``?

    Strict domination needs ``P(v, g) < P(v, f)`` at every vertex; weak
    domination allows equality somewhere.  Two infinite penalties count
    as equal.
    """
    fam = _coerce_family(rules, V.n)
    pf = penalties_at_vertices(fam, f, V)
    pg = penalties_at_vertices(fam, g, V)
    strict_all = True
    weak_all = True
    margins = {}
    for j, v in enumerate(V.vertices):
        a, b = float(pf[j]), float(pg[j])
        both_inf = math.isinf(a) and math.isinf(b)
        if not (b < a):
            strict_all = False
        if not (b < a or b == a or both_inf):
            weak_all = False
        margins[v] = _ext_sub(a, b)
    if strict_all:
        relation = Relation.STRICTLY_DOMINATES
    elif weak_all:
        relation = Relation.WEAKLY_DOMINATES
    else:
        relation = Relation.NO_DOMINATION
    return DominationVerdict(relation=relation, margins=margins)
