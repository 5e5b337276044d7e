"""Strictly proper scoring rules for binary events.

A scoring rule assigns a penalty ``score1(x)`` when the event happens
and ``score0(x)`` when it does not, for a quoted probability ``x``.  A
rule is strictly proper when quoting the true probability is the unique
minimiser of expected penalty.  Every such rule is generated by a
strictly convex function ``phi`` on [0, 1]:

    score1(x) = -phi(x) - phi'(x) * (1 - x)
    score0(x) = -phi(x) + phi'(x) * x

and conversely ``phi(x) = -x*score1(x) - (1-x)*score0(x)`` recovers the
generator from the scores, with ``phi'(x) = score0(x) - score1(x)``.
Penalties may diverge only as the quote approaches a wrong certainty;
the ``left_unbounded`` / ``right_unbounded`` flags record whether
``phi'`` blows up at 0 and at 1.

Expected penalties use the extended-real convention ``0 * inf = 0``: an
impossible outcome contributes nothing even when its penalty would be
infinite.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import xlogy

__all__ = [
    "ScoringError",
    "ImproperRuleError",
    "InvalidGeneratorError",
    "ScoringRule",
    "RuleFamily",
    "PropernessReport",
    "brier",
    "log_rule",
    "from_generator",
    "from_grids",
    "generator_from_scores",
    "phi_from_rule",
    "expected_score",
    "verify_properness",
]

# Evaluation clamp for gradients near a divergent endpoint: far enough in
# to be representable, far enough out to still repel an optimiser.
_TINY = 1e-300
_ALMOST_ONE = float(np.nextafter(1.0, 0.0))


class ScoringError(ValueError):
    """Base class for scoring-rule construction and validation errors."""


class ImproperRuleError(ScoringError):
    """A candidate rule fails the properness scan.

    Carries the worst violating pair: quoting ``x`` against true
    probability ``p`` did at least as well as quoting ``p`` itself.
    """

    def __init__(self, message, *, p=None, x=None, score_at_p=None, score_at_x=None):
        super().__init__(message)
        self.p = p
        self.x = x
        self.score_at_p = score_at_p
        self.score_at_x = score_at_x


class InvalidGeneratorError(ScoringError):
    """A candidate generator is not strictly convex on the test grid."""


def _unit(value, label):
    v = float(value)
    if not 0.0 <= v <= 1.0:
        raise ScoringError(f"{label} must lie in [0, 1], got {value!r}")
    return v


@dataclass(frozen=True, eq=False)
class ScoringRule:
    """One binary scoring rule together with its convex generator.

    ``score0``/``score1``/``phi``/``phi_prime`` accept a float or an
    ndarray and evaluate elementwise.  ``phi_prime`` returns the
    one-sided limit at 0 and 1 (``+-inf`` when the corresponding flag
    is set).  ``phi_second`` is optional curvature used to speed up
    line searches; ``curvature`` is its value when constant.
    """

    name: str
    score0: Callable
    score1: Callable
    phi: Callable
    phi_prime: Callable
    left_unbounded: bool
    right_unbounded: bool
    phi_second: Callable | None = None
    curvature: float | None = None

    def scores(self, x):
        """Evaluate ``(score0(x), score1(x))`` with warnings silenced."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.score0(x), self.score1(x)


def _as_float_array(x):
    return np.asarray(x, dtype=float)


_BRIER = ScoringRule(
    name="brier",
    score0=lambda x: _as_float_array(x) ** 2,
    score1=lambda x: (1.0 - _as_float_array(x)) ** 2,
    phi=lambda x: _as_float_array(x) * (_as_float_array(x) - 1.0),
    phi_prime=lambda x: 2.0 * _as_float_array(x) - 1.0,
    left_unbounded=False,
    right_unbounded=False,
    phi_second=lambda x: np.full_like(_as_float_array(x), 2.0),
    curvature=2.0,
)


def _log_score0(x):
    x = _as_float_array(x)
    with np.errstate(divide="ignore"):
        return -np.log1p(-x)


def _log_score1(x):
    x = _as_float_array(x)
    with np.errstate(divide="ignore"):
        return -np.log(x)


def _log_phi(x):
    x = _as_float_array(x)
    return xlogy(x, x) + xlogy(1.0 - x, 1.0 - x)


def _log_phi_prime(x):
    x = _as_float_array(x)
    with np.errstate(divide="ignore"):
        return np.log(x) - np.log1p(-x)


def _log_phi_second(x):
    x = _as_float_array(x)
    with np.errstate(divide="ignore"):
        return 1.0 / (x * (1.0 - x))


_LOG = ScoringRule(
    name="log",
    score0=_log_score0,
    score1=_log_score1,
    phi=_log_phi,
    phi_prime=_log_phi_prime,
    left_unbounded=True,
    right_unbounded=True,
    phi_second=_log_phi_second,
)


def brier() -> ScoringRule:
    """Quadratic rule: ``score1 = (1-x)^2``, ``score0 = x^2``."""
    return _BRIER


def log_rule() -> ScoringRule:
    """Logarithmic rule: ``score1 = -ln x``, ``score0 = -ln(1-x)``.

    Unbounded at both wrong certainties.
    """
    return _LOG


def _limit_phi_prime(phi_prime, at_zero: bool, unbounded: bool) -> float:
    if unbounded:
        return -math.inf if at_zero else math.inf
    x = 0.0 if at_zero else 1.0
    try:
        v = float(phi_prime(x))
        if math.isfinite(v):
            return v
    except (ValueError, ZeroDivisionError, OverflowError):
        pass
    # The callable rejects the endpoint; fall back to a nearby value.
    return float(phi_prime(1e-12 if at_zero else 1.0 - 1e-12))


def _detect_unbounded(phi_prime, at_zero: bool) -> bool:
    # Compare the slope at two dyadic depths; a divergent endpoint keeps
    # growing, a finite limit flattens out.
    a, b = (2.0 ** -40, 2.0 ** -20)
    xa, xb = (a, b) if at_zero else (1.0 - a, 1.0 - b)
    with np.errstate(divide="ignore"):
        va, vb = float(phi_prime(xa)), float(phi_prime(xb))
    if not math.isfinite(va):
        return True
    return abs(va) > 1e8 or abs(va - vb) > 0.5


def from_generator(
    phi: Callable,
    phi_prime: Callable,
    *,
    name: str = "custom",
    left_unbounded: bool | None = None,
    right_unbounded: bool | None = None,
    grid_size: int = 101,
    phi_second: Callable | None = None,
    curvature: float | None = None,
) -> ScoringRule:
    """Build the scoring rule generated by a strictly convex ``phi``.

    ``phi`` must be finite on [0, 1] including the endpoints; ``phi_prime``
    is its derivative on (0, 1).  Strict convexity is checked on a uniform
    grid (midpoint inequality with margin ``1e-12``) and ``phi_prime`` is
    checked for monotonicity; violations raise
    :class:`InvalidGeneratorError`.  When the unboundedness flags are not
    supplied they are detected by probing ``phi_prime`` near 0 and 1.
    """
    if grid_size < 11:
        raise ScoringError("grid_size must be at least 11")
    xs = np.linspace(0.0, 1.0, grid_size)
    with np.errstate(divide="ignore", invalid="ignore"):
        phi_vals = np.asarray(phi(xs), dtype=float)
        pp_vals = np.asarray(phi_prime(xs[1:-1]), dtype=float)
    if not np.isfinite(phi_vals).all():
        raise InvalidGeneratorError("phi must be finite on [0, 1]")
    mid_gap = 0.5 * (phi_vals[:-2] + phi_vals[2:]) - phi_vals[1:-1]
    worst = float(mid_gap.min())
    if worst <= 1e-12:
        i = int(mid_gap.argmin())
        raise InvalidGeneratorError(
            f"phi is not strictly convex: midpoint test fails at x={xs[i + 1]:.6g} "
            f"(margin {worst:.3g})"
        )
    if not np.isfinite(pp_vals).all():
        raise InvalidGeneratorError("phi_prime must be finite on (0, 1)")
    steps = np.diff(pp_vals)
    if steps.min() < -1e-12:
        i = int(steps.argmin())
        raise InvalidGeneratorError(
            f"phi_prime is not nondecreasing near x={xs[i + 1]:.6g}"
        )

    if left_unbounded is None:
        left_unbounded = _detect_unbounded(phi_prime, at_zero=True)
    if right_unbounded is None:
        right_unbounded = _detect_unbounded(phi_prime, at_zero=False)

    phi0 = float(phi(0.0))
    phi1 = float(phi(1.0))
    pp0 = _limit_phi_prime(phi_prime, True, left_unbounded)
    pp1 = _limit_phi_prime(phi_prime, False, right_unbounded)

    def _scores(x):
        x = _as_float_array(x)
        z = np.clip(x, _TINY, _ALMOST_ONE)
        with np.errstate(divide="ignore", invalid="ignore"):
            pv = np.asarray(phi(z), dtype=float)
            gv = np.asarray(phi_prime(z), dtype=float)
        s1 = -pv - gv * (1.0 - z)
        s0 = -pv + gv * z
        # Exact endpoints are written in from the limits so that a
        # divergent phi_prime cannot leak nan through 0*inf.
        at0 = x == 0.0
        at1 = x == 1.0
        s1 = np.where(at0, math.inf if left_unbounded else -phi0 - pp0, s1)
        s1 = np.where(at1, -phi1, s1)
        s0 = np.where(at0, -phi0, s0)
        s0 = np.where(at1, math.inf if right_unbounded else -phi1 + pp1, s0)
        return s0, s1

    def _phi_prime_full(x):
        x = _as_float_array(x)
        z = np.clip(x, _TINY, _ALMOST_ONE)
        with np.errstate(divide="ignore", invalid="ignore"):
            gv = np.asarray(phi_prime(z), dtype=float)
        gv = np.where(x == 0.0, pp0, gv)
        gv = np.where(x == 1.0, pp1, gv)
        return gv

    return ScoringRule(
        name=name,
        score0=lambda x: _scores(x)[0],
        score1=lambda x: _scores(x)[1],
        phi=lambda x: np.asarray(phi(_as_float_array(x)), dtype=float),
        phi_prime=_phi_prime_full,
        left_unbounded=bool(left_unbounded),
        right_unbounded=bool(right_unbounded),
        phi_second=phi_second,
        curvature=curvature,
    )


def from_grids(
    phi_grid: Sequence[float],
    phi_prime_grid: Sequence[float],
    *,
    name: str = "custom",
) -> ScoringRule:
    """Build a rule from tabulated generator values on a uniform grid.

    ``phi_prime_grid`` is interpolated piecewise-linearly; ``phi`` is its
    exact integral (piecewise quadratic) anchored at ``phi_grid[0]``, and
    the remaining ``phi_grid`` values act as a consistency cross-check at
    the quadrature accuracy of the grid.  Grid rules always have finite
    one-sided slopes, so both unboundedness flags are False.  Properness
    of the result is certified only at the resolution of the grid;
    behaviour between nodes follows the interpolant, not whatever rule
    produced the table.
    """
    pv = np.asarray(phi_grid, dtype=float)
    gv = np.asarray(phi_prime_grid, dtype=float)
    if pv.ndim != 1 or gv.ndim != 1 or pv.shape != gv.shape:
        raise InvalidGeneratorError("phi_grid and phi_prime_grid must be 1-d and equal length")
    m = pv.size
    if m < 101:
        raise InvalidGeneratorError("grid rules need at least 101 nodes")
    if not (np.isfinite(pv).all() and np.isfinite(gv).all()):
        raise InvalidGeneratorError("grid values must be finite")
    h = 1.0 / (m - 1)
    steps = np.diff(gv)
    if steps.min() <= 0.0:
        i = int(steps.argmin())
        raise InvalidGeneratorError(
            f"phi_prime_grid must be strictly increasing (fails near node {i})"
        )
    xs = np.linspace(0.0, 1.0, m)
    # Integral of the piecewise-linear slope: trapezoid rule is exact here.
    phi_nodes = pv[0] + np.concatenate(([0.0], np.cumsum(0.5 * h * (gv[1:] + gv[:-1]))))
    lip = float(np.abs(steps).max()) / h
    drift = float(np.abs(phi_nodes - pv).max())
    allowed = 0.5 * lip * h * h * m + 1e-9
    if drift > allowed:
        raise InvalidGeneratorError(
            f"phi_grid disagrees with the integral of phi_prime_grid "
            f"(drift {drift:.3g}, allowed {allowed:.3g})"
        )

    def interp_phi_prime(x):
        return np.interp(_as_float_array(x), xs, gv)

    def interp_phi(x):
        x = _as_float_array(x)
        idx = np.clip((x * (m - 1)).astype(int), 0, m - 2)
        x0 = xs[idx]
        t = x - x0
        g0 = gv[idx]
        slope = (gv[idx + 1] - g0) / h
        return phi_nodes[idx] + g0 * t + 0.5 * slope * t * t

    return from_generator(
        interp_phi,
        interp_phi_prime,
        name=name,
        left_unbounded=False,
        right_unbounded=False,
        grid_size=101,
        phi_second=None,
        curvature=None,
    )


def expected_score(rule: ScoringRule, p, x) -> float:
    """Expected penalty of quoting ``x`` when the truth is ``p``.

    ``p * score1(x) + (1-p) * score0(x)`` with ``0 * inf = 0``.
    """
    p = _unit(p, "p")
    x = _unit(x, "x")
    s0, s1 = rule.scores(x)
    t1 = 0.0 if p == 0.0 else p * float(s1)
    t0 = 0.0 if p == 1.0 else (1.0 - p) * float(s0)
    return t1 + t0


def generator_from_scores(score0: Callable, score1: Callable):
    """Recover generator callables from a rule's score functions.

    Returns ``(phi, phi_prime)`` with ``phi(p) = -p*score1(p) -
    (1-p)*score0(p)`` (taking ``0 * inf = 0`` at the endpoints) and
    ``phi_prime(p) = score0(p) - score1(p)``.  These identities are
    exact for any rule produced by :func:`from_generator`.
    """

    def phi(p):
        p = _as_float_array(p)
        with np.errstate(divide="ignore", invalid="ignore"):
            s0 = np.asarray(score0(p), dtype=float)
            s1 = np.asarray(score1(p), dtype=float)
            out = -p * s1 - (1.0 - p) * s0
        at0 = p == 0.0
        at1 = p == 1.0
        if np.any(at0):
            s0_at0 = np.asarray(score0(np.zeros_like(p)), dtype=float)
            out = np.where(at0, -s0_at0, out)
        if np.any(at1):
            s1_at1 = np.asarray(score1(np.ones_like(p)), dtype=float)
            out = np.where(at1, -s1_at1, out)
        return out

    def phi_prime(p):
        p = _as_float_array(p)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.asarray(score0(p), dtype=float) - np.asarray(score1(p), dtype=float)

    return phi, phi_prime


@dataclass(frozen=True)
class PropernessReport:
    """Outcome of the grid properness and continuity scan."""

    passed: bool
    properness_ok: bool
    continuity_ok: bool
    grid_size: int
    strictness_margin: float
    worst_violation: tuple[float, float, float, float] | None = None
    # (p, x, expected at p, expected at x) for the worst offender.


def _expected_matrix(rule: ScoringRule, xs: np.ndarray) -> np.ndarray:
    """E[i, j] = expected penalty of quote xs[j] under truth xs[i]."""
    s0, s1 = rule.scores(xs)
    s0 = np.asarray(s0, dtype=float)
    s1 = np.asarray(s1, dtype=float)
    p = xs[:, None]
    with np.errstate(invalid="ignore"):
        e = p * s1[None, :] + (1.0 - p) * s0[None, :]
    # Rows with p exactly 0 or 1 would multiply 0 * inf; rebuild them.
    e[xs == 0.0, :] = s0
    e[xs == 1.0, :] = s1
    return e


def _scan_properness(rule: ScoringRule, xs: np.ndarray, margin: float):
    e = _expected_matrix(rule, xs)
    diag = np.diag(e).copy()
    # Quoting the truth must beat every rival quote by more than the margin.
    gap = e - diag[:, None]
    np.fill_diagonal(gap, math.inf)
    worst_j = np.argmin(gap, axis=1)
    worst_gap = gap[np.arange(xs.size), worst_j]
    bad = worst_gap <= margin
    if not bad.any():
        return True, None
    i = int(np.argmin(np.where(bad, worst_gap, math.inf)))
    j = int(worst_j[i])
    return False, (float(xs[i]), float(xs[j]), float(diag[i]), float(e[i, j]))


def _scan_continuity(rule: ScoringRule, grid_size: int) -> bool:
    # Compare the largest finite difference quotient at two grid scales.
    # A jump doubles the quotient when the spacing halves; a continuous
    # score keeps it stable.  Cells adjacent to a declared divergent
    # endpoint legitimately steepen under refinement and are skipped.
    ok = True
    for fn, skip_left, skip_right in (
        (rule.score1, rule.left_unbounded, rule.right_unbounded),
        (rule.score0, rule.left_unbounded, rule.right_unbounded),
    ):
        quotients = []
        for scale in (1, 2):
            m = (grid_size - 1) * scale + 1
            xs = np.linspace(0.0, 1.0, m)
            with np.errstate(divide="ignore", invalid="ignore"):
                vals = np.asarray(fn(xs), dtype=float)
            lo = scale if skip_left else 0
            hi = m - 1 - (scale if skip_right else 0)
            d = np.abs(np.diff(vals[lo : hi + 1]))
            d = d[np.isfinite(d)]
            if d.size == 0:
                quotients.append(0.0)
                continue
            quotients.append(float(d.max()) * (m - 1))
        base, fine = quotients
        if base > 0 and fine > 1.7 * base and fine - base > 1.0:
            ok = False
    return ok


def verify_properness(
    rule: ScoringRule,
    grid_size: int = 101,
    strictness_margin: float = 1e-10,
) -> PropernessReport:
    """Scan a rule for strict properness and continuity on a grid.

    Properness: for every grid probability ``p``, the expected penalty
    of quoting ``p`` must undercut every rival grid quote by more than
    ``strictness_margin``.  Continuity: grid refinement must not expose
    jumps in the score functions away from declared divergences.  The
    report carries the worst violating pair when the scan fails.
    """
    if grid_size < 11:
        raise ScoringError("grid_size must be at least 11")
    xs = np.linspace(0.0, 1.0, grid_size)
    prop_ok, worst = _scan_properness(rule, xs, strictness_margin)
    cont_ok = _scan_continuity(rule, grid_size)
    return PropernessReport(
        passed=prop_ok and cont_ok,
        properness_ok=prop_ok,
        continuity_ok=cont_ok,
        grid_size=grid_size,
        strictness_margin=strictness_margin,
        worst_violation=worst,
    )


def phi_from_rule(score0: Callable, score1: Callable, *, grid_size: int = 101):
    """Tabulate the generator of a rule given by its score functions.

    Runs the properness scan first (raising :class:`ImproperRuleError`
    on failure, with the worst violating pair attached) and then returns
    ``(phi values, phi_prime values)`` on ``linspace(0, 1, grid_size)``.
    """
    probe = ScoringRule(
        name="probe",
        score0=score0,
        score1=score1,
        phi=lambda x: x,
        phi_prime=lambda x: x,
        left_unbounded=False,
        right_unbounded=False,
    )
    xs = np.linspace(0.0, 1.0, grid_size)
    ok, worst = _scan_properness(probe, xs, 1e-10)
    if not ok:
        p, x, at_p, at_x = worst
        raise ImproperRuleError(
            f"rule is not strictly proper: truth p={p:.6g} prefers quote x={x:.6g} "
            f"(expected {at_x:.6g} vs {at_p:.6g} at the truth)",
            p=p,
            x=x,
            score_at_p=at_p,
            score_at_x=at_x,
        )
    phi, phi_prime = generator_from_scores(score0, score1)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.asarray(phi(xs), dtype=float), np.asarray(phi_prime(xs), dtype=float)


class RuleFamily:
    """One scoring rule per coordinate of a forecast vector.

    Wraps a tuple of :class:`ScoringRule` and exposes the vectorised
    evaluations the geometry code needs: separable generator sums,
    gradients with extended-real endpoint values, and clamped gradients
    for optimiser internals.  Families sharing a single rule object take
    fast vectorised paths.
    """

    def __init__(self, rules: Sequence[ScoringRule]):
        self.rules = tuple(rules)
        if len(self.rules) == 0:
            raise ScoringError("rule family cannot be empty")
        self.n = len(self.rules)
        first = self.rules[0]
        self.homogeneous = all(r is first for r in self.rules)
        self.left_unbounded = np.array([r.left_unbounded for r in self.rules])
        self.right_unbounded = np.array([r.right_unbounded for r in self.rules])
        curvs = [r.curvature for r in self.rules]
        self.curvature = (
            np.array(curvs, dtype=float) if all(c is not None for c in curvs) else None
        )
        self.has_phi_second = all(r.phi_second is not None for r in self.rules)

    @classmethod
    def uniform(cls, rule: ScoringRule, n: int) -> "RuleFamily":
        return cls((rule,) * n)

    def __len__(self):
        return self.n

    def _per_coord(self, attr, x, cols=None):
        x = np.asarray(x, dtype=float)
        rules = self.rules if cols is None else [self.rules[i] for i in cols]
        if self.homogeneous:
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.asarray(getattr(rules[0], attr)(x), dtype=float)
        out = np.empty(x.shape, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            for i, r in enumerate(rules):
                out[..., i] = getattr(r, attr)(x[..., i])
        return out

    def phi_values(self, x, cols=None):
        return self._per_coord("phi", x, cols)

    def phi_sum(self, x) -> float:
        return float(np.sum(self.phi_values(x)))

    def grad(self, x, cols=None):
        """Per-coordinate ``phi_prime`` with ``+-inf`` at divergences."""
        return self._per_coord("phi_prime", x, cols)

    def grad_clamped(self, x, cols=None):
        """Gradient evaluated just inside [0, 1]; always finite for
        rules whose slope is finite on the open interval."""
        x = np.clip(np.asarray(x, dtype=float), _TINY, _ALMOST_ONE)
        return self._per_coord("phi_prime", x, cols)

    def phi_second_values(self, x, cols=None):
        return self._per_coord("phi_second", x, cols)

    def score_pairs(self, x):
        """Stacked ``(score0(x), score1(x))`` for a forecast vector."""
        x = np.asarray(x, dtype=float)
        if self.homogeneous:
            s0, s1 = self.rules[0].scores(x)
            return np.asarray(s0, dtype=float), np.asarray(s1, dtype=float)
        s0 = np.empty(x.shape, dtype=float)
        s1 = np.empty(x.shape, dtype=float)
        for i, r in enumerate(self.rules):
            a, b = r.scores(x[..., i])
            s0[..., i] = a
            s1[..., i] = b
        return s0, s1

    def divergent_mask(self, x) -> np.ndarray:
        """Coordinates of ``x`` sitting on a divergent endpoint."""
        x = np.asarray(x, dtype=float)
        return ((x == 0.0) & self.left_unbounded) | ((x == 1.0) & self.right_unbounded)

    def restrict(self, cols) -> "RuleFamily":
        return RuleFamily(tuple(self.rules[i] for i in cols))
