"""Compiled away-step Frank-Wolfe kernels for the built-in rules.

These mirror the numpy engine in :mod:`bregman` exactly (same step
choices, same first-index tie-breaking) but run as tight loops, which
matters when coherence checks are issued hundreds of thousands of times
by sweeps and stress tests.  Importing this module without numba
installed raises ImportError; callers fall back to the numpy engine.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

BRIER = 0
LOG = 1

_TINY = 1e-300
_ALMOST_ONE = math.nextafter(1.0, 0.0)


@njit(cache=True)
def _grad_dot(kind, y, c, d):
    """h(t) ingredient: (phi'(y) - c) . d with clamped evaluation."""
    acc = 0.0
    for i in range(y.size):
        z = y[i]
        if z < _TINY:
            z = _TINY
        elif z > _ALMOST_ONE:
            z = _ALMOST_ONE
        if kind == BRIER:
            g = 2.0 * z - 1.0
        else:
            g = math.log(z) - math.log1p(-z)
        acc += (g - c[i]) * d[i]
    return acc


@njit(cache=True)
def _log_step(y, d, c, gmax, h0):
    """Exact line search for the log rule: root of h on [0, gmax]."""
    hmax = _grad_dot(LOG, y + gmax * d, c, d)
    if hmax <= 0.0:
        return gmax
    lo = 0.0
    hi = gmax
    # Newton from a curvature estimate at the base point, safeguarded by
    # the sign bracket.
    denom = 0.0
    for i in range(y.size):
        z = min(max(y[i], 1e-12), 1.0 - 1e-12)
        denom += d[i] * d[i] / (z * (1.0 - z))
    t = -h0 / denom if denom > 0.0 else 0.5 * gmax
    if not (0.0 < t < gmax):
        t = 0.5 * gmax
    for _ in range(100):
        zv = y + t * d
        hv = _grad_dot(LOG, zv, c, d)
        if abs(hv) <= 1e-13 * (1.0 + abs(h0)):
            return t
        if hv > 0.0:
            hi = t
        else:
            lo = t
        if hi - lo <= 1e-15 * max(1.0, gmax):
            return 0.5 * (lo + hi)
        hp = 0.0
        if math.isfinite(hv):
            for i in range(y.size):
                z = zv[i]
                if z < 1e-12:
                    z = 1e-12
                elif z > 1.0 - 1e-12:
                    z = 1.0 - 1e-12
                hp += d[i] * d[i] / (z * (1.0 - z))
        if hp > 0.0 and math.isfinite(hv):
            tn = t - hv / hp
            if not (lo < tn < hi):
                tn = 0.5 * (lo + hi)
        else:
            tn = 0.5 * (lo + hi)
        t = tn
    return t


@njit(cache=True)
def afw(kind, V, c, tol, max_iters):
    """Minimise Phi(y) - c.y over conv(rows of V) by away-step FW.

    Returns (weights, fw_gap, iterations, converged_flag).  V must have
    no constant columns (the caller strips frozen coordinates).
    """
    k, n = V.shape
    w = np.full(k, 1.0 / k)
    y = np.empty(n)
    g = np.empty(n)
    scores = np.empty(k)
    d = np.empty(n)
    gap = math.inf
    it = 0
    for it in range(1, max_iters + 1):
        for j in range(n):
            acc = 0.0
            for a in range(k):
                acc += w[a] * V[a, j]
            y[j] = acc
        for j in range(n):
            z = y[j]
            if z < _TINY:
                z = _TINY
            elif z > _ALMOST_ONE:
                z = _ALMOST_ONE
            if kind == BRIER:
                g[j] = 2.0 * z - 1.0 - c[j]
            else:
                g[j] = math.log(z) - math.log1p(-z) - c[j]
        gy = 0.0
        for j in range(n):
            gy += g[j] * y[j]
        j_fw = 0
        best = math.inf
        for a in range(k):
            acc = 0.0
            for j in range(n):
                acc += V[a, j] * g[j]
            scores[a] = acc
            if acc < best:
                best = acc
                j_fw = a
        gap = gy - best
        if gap <= tol:
            return w, gap, it, True
        j_aw = -1
        worst = -math.inf
        for a in range(k):
            if w[a] > 0.0 and scores[a] > worst:
                worst = scores[a]
                j_aw = a
        away_gap = worst - gy
        if gap >= away_gap:
            away = False
            gmax = 1.0
            for j in range(n):
                d[j] = V[j_fw, j] - y[j]
            h0 = best - gy
        else:
            away = True
            waw = w[j_aw]
            gmax = waw / (1.0 - waw)
            for j in range(n):
                d[j] = y[j] - V[j_aw, j]
            h0 = gy - worst
        if h0 >= 0.0:
            return w, gap, it, gap <= tol
        if kind == BRIER:
            denom = 0.0
            for j in range(n):
                denom += 2.0 * d[j] * d[j]
            gamma = gmax if denom <= 0.0 else min(gmax, -h0 / denom)
        else:
            gamma = _log_step(y, d, c, gmax, h0)
        if gamma <= 0.0:
            return w, gap, it, gap <= tol
        if away:
            for a in range(k):
                w[a] *= 1.0 + gamma
            w[j_aw] -= gamma
            if gamma >= gmax * (1.0 - 1e-12):
                w[j_aw] = 0.0
        else:
            if gamma >= 1.0:
                for a in range(k):
                    w[a] = 0.0
                w[j_fw] = 1.0
            else:
                for a in range(k):
                    w[a] *= 1.0 - gamma
                w[j_fw] += gamma
        tot = 0.0
        for a in range(k):
            if w[a] < 0.0:
                w[a] = 0.0
            tot += w[a]
        for a in range(k):
            w[a] /= tot
    return w, gap, it, gap <= tol
