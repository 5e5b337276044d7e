import math
from fractions import Fraction

import numpy as np
import pytest

import forecast_coherence as fc
from forecast_coherence.oracle import (
    OracleError,
    _weight_grid,
    domination_search,
    hull_membership_exact,
    projection_grid,
)

from conftest import random_coherent, random_system


def triangle():
    rows = np.array([[0, 0], [0, 1], [1, 1]], dtype=bool)
    return fc.build_vertex_set(fc.EventSystem(("FF", "FT", "TT"), rows))


class TestExactMembership:
    def test_worked_member(self):
        member, weights = hull_membership_exact(
            [Fraction(3, 5), Fraction(9, 10)], triangle()
        )
        assert member
        assert weights == [Fraction(1, 10), Fraction(3, 10), Fraction(3, 5)]

    def test_worked_nonmember(self):
        member, weights = hull_membership_exact(
            [Fraction(19, 20), Fraction(11, 20)], triangle()
        )
        assert not member and weights is None

    def test_vertex_is_member(self):
        member, weights = hull_membership_exact([0, 1], triangle())
        assert member
        assert sum(weights) == 1

    def test_weights_reconstruct_exactly(self):
        rng = np.random.default_rng(40)
        found = 0
        while found < 50:
            system = random_system(rng, n_max=4, m_max=8)
            V = fc.build_vertex_set(system)
            f = [Fraction(int(rng.integers(0, 21)), 20) for _ in range(V.n)]
            member, weights = hull_membership_exact(f, V)
            if not member:
                continue
            found += 1
            assert sum(weights) == 1
            assert all(w >= 0 for w in weights)
            for i in range(V.n):
                recon = sum(
                    w * int(V.matrix[j, i]) for j, w in enumerate(weights)
                )
                assert recon == f[i]

    def test_agreement_with_engine(self):
        rng = np.random.default_rng(41)
        for _ in range(100):
            system = random_system(rng, n_max=4, m_max=8)
            V = fc.build_vertex_set(system)
            num = rng.integers(0, 21, V.n)
            exact = [Fraction(int(c), 20) for c in num]
            member, _ = hull_membership_exact(exact, V)
            assert member == fc.check(num / 20.0, V).coherent

    def test_too_many_vertices_rejected(self):
        rows = np.array([[i >> b & 1 for b in range(6)] for i in range(64)])
        V = fc.VertexSet.from_rows(rows, labels=list(range(64)))
        with pytest.raises(OracleError, match="32"):
            hull_membership_exact([Fraction(1, 2)] * 6, V)

    def test_bad_coordinates_rejected(self):
        with pytest.raises(OracleError, match=r"\[0, 1\]"):
            hull_membership_exact([Fraction(3, 2), Fraction(1, 2)], triangle())
        with pytest.raises(OracleError, match="coordinates"):
            hull_membership_exact([Fraction(1, 2)], triangle())


class TestWeightGrid:
    def test_counts(self):
        # Compositions of r into k parts: C(r + k - 1, k - 1).
        assert _weight_grid(4, 1).shape == (1, 1)
        assert _weight_grid(4, 2).shape == (5, 2)
        assert _weight_grid(4, 3).shape == (15, 3)
        assert _weight_grid(10, 4).shape == (286, 4)

    def test_rows_sum_to_resolution(self):
        grid = _weight_grid(7, 3)
        assert (grid.sum(axis=1) == 7).all()
        assert (grid >= 0).all()
        assert len(np.unique(grid, axis=0)) == grid.shape[0]

    def test_oversized_grid_rejected(self):
        with pytest.raises(OracleError, match="too large"):
            _weight_grid(1000, 5)


class TestGridProjection:
    def test_quadratic_worked_example(self):
        best = projection_grid(fc.brier(), [0.95, 0.55], triangle())
        np.testing.assert_allclose(best, [0.75, 0.75], atol=2e-3)

    def test_member_projects_to_itself(self):
        best = projection_grid(fc.brier(), [0.6, 0.9], triangle())
        np.testing.assert_allclose(best, [0.6, 0.9], atol=2e-3)

    def test_log_worked_example(self):
        best = projection_grid(fc.log_rule(), [0.5, 0.2], triangle())
        np.testing.assert_allclose(best, [1.0 / 3.0, 1.0 / 3.0], atol=2e-3)

    def test_agreement_with_engine(self):
        rng = np.random.default_rng(42)
        done = 0
        while done < 30:
            system = random_system(rng, n_max=3, m_max=6)
            V = fc.build_vertex_set(system)
            if V.k > 3:
                continue
            done += 1
            rule = fc.log_rule() if rng.random() < 0.5 else fc.brier()
            fam = fc.RuleFamily.uniform(rule, V.n)
            f = rng.uniform(0.1, 0.9, V.n)
            best = projection_grid(fam, f, V)
            proj = fc.project(fam, f, V)
            np.testing.assert_allclose(best, proj.point, atol=2e-3)

    def test_guards(self):
        with pytest.raises(OracleError, match="resolution"):
            projection_grid(fc.brier(), [0.5, 0.5], triangle(), resolution=1e-4)
        rows = np.array([[i >> b & 1 for b in range(3)] for i in range(8)])
        V = fc.VertexSet.from_rows(rows, labels=list(range(8)))
        with pytest.raises(OracleError, match="k <= 5"):
            projection_grid(fc.brier(), [0.5] * 3, V)


class TestDominationSearch:
    def test_finds_dominator_of_incoherent(self):
        g, margin = domination_search(
            fc.brier(), [0.95, 0.55], triangle(), restarts=20, seed=0
        )
        assert margin <= -0.079
        verdict = fc.compare(fc.brier(), [0.95, 0.55], g, triangle())
        assert verdict.relation is fc.Relation.STRICTLY_DOMINATES

    def test_cannot_beat_coherent(self):
        rng = np.random.default_rng(43)
        V = triangle()
        for _ in range(20):
            f = random_coherent(rng, V)
            _, margin = domination_search(
                fc.brier(), f, V, restarts=10, seed=int(rng.integers(1 << 30))
            )
            assert margin >= -1e-6

    def test_vertex_forecast_unbeatable(self):
        _, margin = domination_search(fc.brier(), [0.0, 1.0], triangle(), seed=1)
        assert margin >= -1e-6

    def test_log_rule_search(self):
        g, margin = domination_search(
            fc.log_rule(), [0.95, 0.55], triangle(), restarts=20, seed=2
        )
        assert margin < 0
        assert (g > 0).all() and (g < 1).all()

    def test_seed_reproducibility(self):
        a = domination_search(fc.brier(), [0.9, 0.4], triangle(), seed=7)
        b = domination_search(fc.brier(), [0.9, 0.4], triangle(), seed=7)
        np.testing.assert_array_equal(a[0], b[0])
        assert a[1] == b[1]
