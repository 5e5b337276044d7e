"""Separable Bregman divergences and projection onto vertex hulls.

Each rule family induces the divergence

    d(y, x) = sum_i [ phi_i(y_i) - phi_i(x_i) - phi_i'(x_i) (y_i - x_i) ]

which for the quadratic rule is squared Euclidean distance and for the
log rule the sum of coordinatewise binary KL divergences.  When ``x``
sits on an endpoint where its rule diverges, the convention is: the
coordinate contributes zero if ``y`` agrees there exactly, and the
divergence is ``+inf`` if it differs.

Projection minimises ``d(y, x)`` over the convex hull of a vertex set.
The minimiser is also the minimiser of the linearised objective
``Phi(y) - grad Phi(x) . y``, which is what the solver works with.  The
solver is Frank-Wolfe with away steps: it keeps an explicit convex
combination of vertices, so the returned weights reconstruct the
returned point exactly, and the final Frank-Wolfe gap is a certificate
of optimality (the true distance to the hull optimum is at most the
gap).  Vanilla Frank-Wolfe zigzags at rate O(1/t) whenever the optimum
lies on a proper face, which is the common case here; away steps
restore the geometric rate needed for 1e-9 gaps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .events import VertexSet
from .scoring import RuleFamily, _ALMOST_ONE, _TINY

try:
    from . import _fwkern
except ImportError:
    _fwkern = None

__all__ = [
    "BregmanError",
    "DivergentGradientError",
    "NonconvergenceError",
    "Divergence",
    "Projection",
    "divergence",
    "project",
    "pythagorean_slack",
]


class BregmanError(ValueError):
    """Base class for divergence and projection errors."""


class DivergentGradientError(BregmanError):
    """Projection was asked to linearise around a divergent endpoint.

    Repair handles such base points by face recursion; projection
    itself refuses them.
    """


class NonconvergenceError(RuntimeError):
    """The solver exhausted its iteration budget above tolerance.

    Carries the best iterate found so far in ``projection``.
    """

    def __init__(self, message, projection=None):
        super().__init__(message)
        self.projection = projection


@dataclass(frozen=True)
class Projection:
    """A projected point with its certificate.

    ``point`` equals ``weights @ V.matrix`` up to roundoff; ``fw_gap``
    bounds how far the divergence at ``point`` can sit above the true
    minimum over the hull.
    """

    point: np.ndarray
    weights: np.ndarray
    fw_gap: float
    iterations: int


@dataclass(frozen=True)
class Divergence:
    """The separable Bregman divergence of a rule family."""

    rules: RuleFamily

    def __call__(self, y, x) -> float:
        return divergence(self, y, x)


def _family(div) -> RuleFamily:
    if isinstance(div, Divergence):
        return div.rules
    if isinstance(div, RuleFamily):
        return div
    raise BregmanError(f"expected a Divergence or RuleFamily, got {type(div).__name__}")


def _check_vector(v, n, label):
    v = np.asarray(v, dtype=float)
    if v.shape != (n,):
        raise BregmanError(f"{label} must have shape ({n},), got {v.shape}")
    if not np.isfinite(v).all() or (v < 0).any() or (v > 1).any():
        raise BregmanError(f"{label} must lie in the unit cube")
    return v


def divergence(div, y, x) -> float:
    """Extended-real ``d(y, x)`` for points of the unit cube."""
    fam = _family(div)
    y = _check_vector(y, fam.n, "y")
    x = _check_vector(x, fam.n, "x")
    pinned = fam.divergent_mask(x)
    if pinned.any():
        if not np.array_equal(y[pinned], x[pinned]):
            return math.inf
        free = np.flatnonzero(~pinned)
        if free.size == 0:
            return 0.0
        return divergence(fam.restrict(free), y[free], x[free])
    terms = fam.phi_values(y) - fam.phi_values(x) - fam.grad(x) * (y - x)
    return float(terms.sum())


def _line_search(fam, y, d, c, gmax, h0):
    """Minimise J along ``y + t d`` for ``t`` in [0, gmax].

    ``h0 = (grad J)(y) . d`` is negative on entry.  Quadratic families
    get the closed-form step; otherwise the root of the monotone
    directional derivative is bracketed and polished by safeguarded
    Newton (or bisection when no curvature is available).
    """
    if fam.curvature is not None:
        denom = float(np.sum(fam.curvature * d * d))
        if denom <= 0.0:
            return gmax
        return min(gmax, -h0 / denom)

    def h(t):
        z = np.clip(y + t * d, _TINY, _ALMOST_ONE)
        return float((fam.grad_clamped(z) - c) @ d)

    if h(gmax) <= 0.0:
        return gmax
    lo, hi = 0.0, gmax
    t = 0.5 * gmax
    if fam.has_phi_second:
        z0 = np.clip(y, 1e-12, 1.0 - 1e-12)
        denom = float(np.sum(fam.phi_second_values(z0) * d * d))
        if denom > 0.0 and 0.0 < -h0 / denom < gmax:
            t = -h0 / denom
    for _ in range(100):
        hv = h(t)
        if abs(hv) <= 1e-13 * (1.0 + abs(h0)):
            return t
        if hv > 0.0:
            hi = t
        else:
            lo = t
        if hi - lo <= 1e-15 * max(1.0, gmax):
            return 0.5 * (lo + hi)
        tn = math.nan
        if fam.has_phi_second and math.isfinite(hv):
            z = np.clip(y + t * d, 1e-12, 1.0 - 1e-12)
            hp = float(np.sum(fam.phi_second_values(z) * d * d))
            if hp > 0.0:
                tn = t - hv / hp
        if not lo < tn < hi:
            tn = 0.5 * (lo + hi)
        t = tn
    return t


def _afw_numpy(fam, Va, c, tol, max_iters):
    """Away-step Frank-Wolfe on active (non-constant) columns."""
    k = Va.shape[0]
    w = np.full(k, 1.0 / k)
    y = w @ Va
    gap = math.inf
    it = 0
    for it in range(1, max_iters + 1):
        g = fam.grad_clamped(y) - c
        scores = Va @ g
        j_fw = int(np.argmin(scores))
        gy = float(g @ y)
        gap = gy - float(scores[j_fw])
        if gap <= tol:
            return w, gap, it, True
        s_away = np.where(w > 0.0, scores, -math.inf)
        j_aw = int(np.argmax(s_away))
        away_gap = float(s_away[j_aw]) - gy
        if gap >= away_gap:
            away = False
            d = Va[j_fw] - y
            gmax = 1.0
            h0 = float(scores[j_fw]) - gy
        else:
            away = True
            d = y - Va[j_aw]
            waw = float(w[j_aw])
            gmax = waw / (1.0 - waw)
            h0 = gy - float(s_away[j_aw])
        if h0 >= 0.0:
            return w, gap, it, gap <= tol
        gamma = _line_search(fam, y, d, c, gmax, h0)
        if gamma <= 0.0:
            return w, gap, it, gap <= tol
        if away:
            w *= 1.0 + gamma
            w[j_aw] -= gamma
            if gamma >= gmax * (1.0 - 1e-12):
                w[j_aw] = 0.0
        else:
            if gamma >= 1.0:
                w[:] = 0.0
                w[j_fw] = 1.0
            else:
                w *= 1.0 - gamma
                w[j_fw] += gamma
        np.maximum(w, 0.0, out=w)
        w /= w.sum()
        y = w @ Va
    return w, gap, it, gap <= tol


def _kernel_kind(fam):
    if _fwkern is None or not fam.homogeneous:
        return None
    name = fam.rules[0].name
    if name == "brier":
        return _fwkern.BRIER
    if name == "log":
        return _fwkern.LOG
    return None


def project(div, x, V: VertexSet, tol: float = 1e-9, max_iters: int = 100_000) -> Projection:
    """Bregman-project ``x`` onto the hull of ``V``.

    ``x`` must not sit on an endpoint where its rule's slope diverges
    (the linearisation would be infinite); that case belongs to repair's
    face recursion and raises :class:`DivergentGradientError` here.
    Raises :class:`NonconvergenceError` when the gap is still above
    ``tol`` after ``max_iters`` iterations, with the best iterate
    attached.
    """
    fam = _family(div)
    x = _check_vector(x, fam.n, "x")
    if V.n != fam.n:
        raise BregmanError(f"vertex set has dimension {V.n}, rules have {fam.n}")
    pinned = fam.divergent_mask(x)
    if pinned.any():
        coords = np.flatnonzero(pinned).tolist()
        raise DivergentGradientError(
            f"gradient diverges at coordinates {coords} of x; project cannot "
            f"linearise there"
        )
    Vm = V.matrix
    k = V.k
    if k == 1:
        return Projection(point=Vm[0].copy(), weights=np.ones(1), fw_gap=0.0, iterations=0)
    act = np.flatnonzero(Vm.min(axis=0) < Vm.max(axis=0))
    if act.size == 0:
        # Cannot happen for distinct vertices, but keep the guard cheap.
        return Projection(point=Vm[0].copy(), weights=np.ones(k) / k, fw_gap=0.0, iterations=0)
    fam_act = fam if act.size == fam.n else fam.restrict(act)
    c = fam_act.grad(x[act])
    Va = np.ascontiguousarray(Vm[:, act])
    kind = _kernel_kind(fam)
    if kind is not None:
        w, gap, iters, converged = _fwkern.afw(kind, Va, c, float(tol), int(max_iters))
    else:
        w, gap, iters, converged = _afw_numpy(fam_act, Va, c, float(tol), int(max_iters))
    point = w @ Vm
    np.clip(point, 0.0, 1.0, out=point)
    frozen = np.setdiff1d(np.arange(fam.n), act)
    if frozen.size:
        point[frozen] = Vm[0, frozen]
    proj = Projection(point=point, weights=np.asarray(w), fw_gap=float(gap), iterations=int(iters))
    if not converged:
        raise NonconvergenceError(
            f"projection gap {gap:.3e} still above tolerance {tol:.3e} "
            f"after {iters} iterations",
            projection=proj,
        )
    return proj


def pythagorean_slack(div, y, x, proj) -> float:
    """``d(y, x) - d(pi, x) - d(y, pi)`` for a projection ``pi``.

    Nonnegative (up to solver tolerance) for every ``y`` in the hull;
    this is the certificate that ``pi`` behaves like a true Bregman
    projection.  ``proj`` may be a :class:`Projection` or a bare point.
    """
    fam = _family(div)
    pi = proj.point if isinstance(proj, Projection) else np.asarray(proj, dtype=float)
    d_yx = divergence(fam, y, x)
    d_px = divergence(fam, pi, x)
    d_yp = divergence(fam, y, pi)
    if math.isinf(d_yx):
        # Both sides infinite means the comparison carries no content;
        # report zero slack rather than inf - inf.
        if math.isinf(d_px) or math.isinf(d_yp):
            return 0.0
        return math.inf
    return d_yx - d_px - d_yp
