"""Brute-force reference implementations for validating the engines.

Everything here trades speed for transparency: an exact rational
simplex decides hull membership with no floating point at all, a grid
enumeration finds near-optimal projections by exhaustion, and a
randomized local search tries to falsify domination claims.  These are
test oracles; none of them is reachable from the CLI.

Rational arithmetic uses gmpy2 when importable (several times faster on
the exhaustive sweeps) and falls back to the standard library's
Fraction; results are returned as Fraction either way.
"""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .events import VertexSet
from .scoring import RuleFamily, ScoringRule

try:
    from gmpy2 import mpq as _Q
except ImportError:
    _Q = Fraction

__all__ = [
    "OracleError",
    "hull_membership_exact",
    "projection_grid",
    "domination_search",
]


class OracleError(ValueError):
    """Raised for inputs outside the oracle's small-instance domain."""


def _coerce_family(rules, n: int) -> RuleFamily:
    if isinstance(rules, ScoringRule):
        return RuleFamily.uniform(rules, n)
    if rules.n != n:
        raise OracleError(f"rule family has {rules.n} rules for {n} events")
    return rules


def _as_fraction(q) -> Fraction:
    return Fraction(int(q.numerator), int(q.denominator))


def hull_membership_exact(f, V: VertexSet):
    """Decide ``f in conv(V)`` by exact Phase-1 simplex.

    ``f`` must have rational coordinates (Fraction, int, or anything
    ``Fraction`` accepts exactly).  Returns ``(True, weights)`` with a
    rational convex combination reproducing ``f``, or ``(False, None)``.
    Bland's rule guards against cycling; every number in the tableau is
    an exact rational, so the verdict is exact.
    """
    k, n = V.k, V.n
    if k > 32:
        raise OracleError(f"exact membership supports k <= 32 vertices, got {k}")
    fq = [Fraction(c) for c in f]
    if len(fq) != n:
        raise OracleError(f"forecast has {len(fq)} coordinates for {n} events")
    if any(c < 0 or c > 1 for c in fq):
        raise OracleError("forecast coordinates must lie in [0, 1]")

    zero, one = _Q(0), _Q(1)
    rows = n + 1
    cols = k + rows  # vertex weights, then one artificial per row
    # Constraints: sum_j a_j v_j = f (n rows) and sum_j a_j = 1.
    tab = [[zero] * cols for _ in range(rows)]
    rhs = []
    for i in range(n):
        for j in range(k):
            if V.vertices[j][i]:
                tab[i][j] = one
        rhs.append(_Q(fq[i].numerator, fq[i].denominator) if fq[i] else zero)
    for j in range(k):
        tab[n][j] = one
    rhs.append(one)
    for i in range(rows):
        tab[i][k + i] = one
    basis = [k + i for i in range(rows)]
    cost = [zero] * k + [one] * rows

    while True:
        # Reduced costs against the current basis.
        cb = [cost[b] for b in basis]
        entering = -1
        for j in range(cols):
            if j in basis:
                continue
            r = cost[j]
            for i in range(rows):
                if cb[i]:
                    r -= cb[i] * tab[i][j]
            if r < zero:
                entering = j
                break  # Bland: first improving column
        if entering < 0:
            break
        leaving = -1
        best = None
        for i in range(rows):
            if tab[i][entering] > zero:
                ratio = rhs[i] / tab[i][entering]
                if best is None or ratio < best or (
                    ratio == best and basis[i] < basis[leaving]
                ):
                    best = ratio
                    leaving = i
        if leaving < 0:
            raise OracleError("phase-1 objective unbounded; tableau corrupt")
        piv = tab[leaving][entering]
        tab[leaving] = [x / piv for x in tab[leaving]]
        rhs[leaving] = rhs[leaving] / piv
        for i in range(rows):
            if i != leaving and tab[i][entering]:
                factor = tab[i][entering]
                tab[i] = [a - factor * b for a, b in zip(tab[i], tab[leaving])]
                rhs[i] = rhs[i] - factor * rhs[leaving]
        basis[leaving] = entering

    objective = sum((cost[b] * rhs[i] for i, b in enumerate(basis)), zero)
    if objective != zero:
        return False, None
    weights = [Fraction(0)] * k
    for i, b in enumerate(basis):
        if b < k:
            weights[b] = _as_fraction(rhs[i])
    return True, weights


def _weight_grid(r: int, k: int) -> np.ndarray:
    """All length-k compositions of r, in lexicographic order."""
    if k == 1:
        return np.array([[r]], dtype=np.int64)
    shape = (r + 1,) * (k - 1)
    cells = 1
    for s in shape:
        cells *= s
    if cells > 60_000_000:
        raise OracleError(
            f"weight grid with k={k} at resolution 1/{r} is too large to enumerate"
        )
    idx = np.indices(shape).reshape(k - 1, -1).T
    keep = idx[idx.sum(axis=1) <= r]
    last = r - keep.sum(axis=1)
    return np.column_stack([keep, last]).astype(np.int64)


def projection_grid(rules, f, V: VertexSet, resolution: float = 1e-3) -> np.ndarray:
    """Exhaustive-search Bregman projection over a simplex weight grid.

    Minimises ``d(sum_j a_j v_j, f)`` over all weight vectors whose
    entries are multiples of ``resolution``.  The true projection lies
    within a Lipschitz-bounded neighbourhood of the returned point, so
    engine outputs are compared against this at a couple of grid steps'
    tolerance.  The gradient at ``f`` must be finite.
    """
    fam = _coerce_family(rules, V.n)
    if V.k > 5:
        raise OracleError(f"grid projection supports k <= 5 vertices, got {V.k}")
    if resolution < 1e-3:
        raise OracleError("resolution below 1e-3 is not supported")
    f = np.asarray(f, dtype=float)
    if fam.divergent_mask(f).any():
        raise OracleError("gradient diverges at f; grid projection undefined")
    r = round(1.0 / resolution)
    grid = _weight_grid(r, V.k)
    Vm = V.matrix
    c = fam.grad(f)
    best_obj = math.inf
    best_point = None
    # Objective without the constant terms: sum_i phi_i(y_i) - c . y.
    for start in range(0, grid.shape[0], 250_000):
        W = grid[start : start + 250_000].astype(float) / r
        Y = W @ Vm
        obj = fam.phi_values(Y).sum(axis=1) - Y @ c
        j = int(np.argmin(obj))
        if obj[j] < best_obj:
            best_obj = float(obj[j])
            best_point = Y[j].copy()
    return best_point


def _penalty_batch(fam: RuleFamily, G: np.ndarray, Vb: np.ndarray) -> np.ndarray:
    """Penalties of a batch of forecasts at every vertex, shape (B, k)."""
    s0, s1 = fam.score_pairs(G)
    return s0.sum(axis=1)[:, None] + (s1 - s0) @ Vb.T


def domination_search(
    rules,
    f,
    V: VertexSet,
    restarts: int = 20,
    *,
    iters: int = 250,
    seed: int | None = None,
):
    """Try to find a rival ``g`` weakly dominating ``f``.

    Projected-gradient descent on ``max_v [P(v, g) - P(v, f)]`` from
    ``restarts`` random starts (plus the clipped input itself), with a
    per-restart adaptive step.  Returns ``(best_g, best_max_margin)``;
    a negative max-margin exhibits weak domination of ``f``.  This is a
    falsifier, not a decision procedure: failure to find domination
    proves nothing by itself.
    """
    fam = _coerce_family(rules, V.n)
    f = np.asarray(f, dtype=float)
    rng = np.random.default_rng(seed)
    n, k = V.n, V.k
    Vm = V.matrix
    Vb = Vm.astype(bool)
    lo, hi = 1e-9, 1.0 - 1e-9

    pf = np.where(Vb, fam.score_pairs(f)[1][None, :], fam.score_pairs(f)[0][None, :]).sum(axis=1)

    G = np.vstack([np.clip(f, lo, hi)[None, :], rng.uniform(lo, hi, size=(restarts - 1, n))])
    step = np.full(restarts, 0.25)

    def objective(G):
        M = _penalty_batch(fam, G, Vb) - pf[None, :]
        return np.max(M, axis=1), np.argmax(M, axis=1)

    obj, active = objective(G)
    best_idx = int(np.argmin(obj))
    best_g, best_val = G[best_idx].copy(), float(obj[best_idx])

    use_phi2 = fam.has_phi_second
    h = 1e-6
    for _ in range(iters):
        if use_phi2:
            phi2 = fam.phi_second_values(G)
            va = Vm[active]
            grad = np.where(va == 1.0, -(1.0 - G) * phi2, G * phi2)
        else:
            grad = np.empty_like(G)
            for i in range(n):
                Gp = G.copy()
                Gp[:, i] = np.clip(G[:, i] + h, lo, hi)
                Gm = G.copy()
                Gm[:, i] = np.clip(G[:, i] - h, lo, hi)
                up, _ = objective(Gp)
                dn, _ = objective(Gm)
                grad[:, i] = (up - dn) / (Gp[:, i] - Gm[:, i])
        proposal = np.clip(G - step[:, None] * grad, lo, hi)
        new_obj, new_active = objective(proposal)
        accept = new_obj <= obj
        G[accept] = proposal[accept]
        obj[accept] = new_obj[accept]
        active[accept] = new_active[accept]
        step[accept] *= 1.2
        step[~accept] *= 0.5
        j = int(np.argmin(obj))
        if obj[j] < best_val:
            best_val = float(obj[j])
            best_g = G[j].copy()
    return best_g, best_val
