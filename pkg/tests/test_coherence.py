import math

import numpy as np
import pytest

import forecast_coherence as fc
from forecast_coherence.bregman import BregmanError
from forecast_coherence.oracle import hull_membership_exact

from conftest import random_coherent, random_system


class TestCoherentVerdicts:
    def test_worked_example(self, nested_vertices):
        verdict = fc.check([0.6, 0.9], nested_vertices)
        assert verdict.coherent and verdict.status is fc.Status.COHERENT
        assert verdict.hull_distance <= 1e-4
        assert verdict.separator is None
        assert verdict.witness[(1, 1)] == pytest.approx(0.6, abs=1e-9)
        assert verdict.witness[(0, 1)] == pytest.approx(0.3, abs=1e-9)
        assert verdict.witness[(0, 0)] == pytest.approx(0.1, abs=1e-9)

    def test_vertex_is_coherent(self, nested_vertices):
        verdict = fc.check([0.0, 1.0], nested_vertices)
        assert verdict.coherent
        assert verdict.witness == pytest.approx({(0, 1): 1.0})

    def test_witness_reconstructs_forecast(self, nested_vertices):
        rng = np.random.default_rng(10)
        for _ in range(300):
            f = random_coherent(rng, nested_vertices)
            verdict = fc.check(f, nested_vertices)
            assert verdict.coherent
            recon = np.zeros(nested_vertices.n)
            for vertex, weight in verdict.witness.items():
                recon += weight * np.array(vertex, dtype=float)
            np.testing.assert_allclose(recon, f, atol=1e-8)

    def test_witness_weights_form_distribution(self, nested_vertices):
        rng = np.random.default_rng(11)
        for _ in range(100):
            system = random_system(rng, n_max=5, m_max=12)
            V = fc.build_vertex_set(system)
            f = random_coherent(rng, V)
            verdict = fc.check(f, V)
            assert verdict.coherent
            total = sum(verdict.witness.values())
            assert total == pytest.approx(1.0, abs=1e-9)
            assert all(w > 0 for w in verdict.witness.values())


class TestIncoherentVerdicts:
    def test_worked_example(self, nested_vertices):
        verdict = fc.check([0.95, 0.55], nested_vertices)
        assert not verdict.coherent and verdict.status is fc.Status.INCOHERENT
        assert verdict.hull_distance == pytest.approx(math.sqrt(0.08), abs=1e-9)
        assert verdict.witness is None
        h, delta = verdict.separator
        np.testing.assert_allclose(h, [math.sqrt(0.5), -math.sqrt(0.5)], atol=1e-6)
        assert delta > 0

    def test_separator_separates_strictly(self, nested_vertices):
        verdict = fc.check([0.95, 0.55], nested_vertices)
        h, delta = verdict.separator
        f_side = float(h @ np.array([0.95, 0.55]))
        for vertex in nested_vertices.vertices:
            assert f_side > float(h @ np.array(vertex, dtype=float)) + delta

    def test_separator_is_unit_length(self, nested_vertices):
        verdict = fc.check([0.95, 0.55], nested_vertices)
        h, _ = verdict.separator
        assert float(h @ h) == pytest.approx(1.0, abs=1e-12)

    def test_random_separators_always_valid(self):
        rng = np.random.default_rng(12)
        seen = 0
        while seen < 200:
            system = random_system(rng, n_max=5, m_max=10)
            V = fc.build_vertex_set(system)
            f = rng.random(V.n)
            verdict = fc.check(f, V)
            if verdict.coherent:
                continue
            seen += 1
            h, delta = verdict.separator
            assert delta > 0
            assert float(h @ h) == pytest.approx(1.0, abs=1e-9)
            margins = h @ f - V.matrix @ np.asarray(h)
            assert margins.min() > delta

    def test_distance_scales_with_tolerance(self, nested_vertices):
        # Squared distance 2e-4 sits between the default 1e-9 and a loose
        # 1e-2, so the verdict flips with the tolerance.
        f = [0.71, 0.69]
        assert not fc.check(f, nested_vertices).coherent
        assert fc.check(f, nested_vertices, tol=1e-2).coherent

    def test_near_hull_points_classified_by_distance(self, nested_vertices):
        # Points just off the diagonal edge of the hull: the offset is the
        # exact Euclidean distance to the edge.
        root_half = math.sqrt(0.5)
        for offset, expect_coherent in ((1e-6, True), (1e-4, False)):
            f = np.array([0.6 + offset * root_half, 0.6 - offset * root_half])
            verdict = fc.check(f, nested_vertices)
            assert verdict.coherent == expect_coherent
            if not verdict.coherent:
                assert verdict.hull_distance == pytest.approx(offset, rel=1e-3)


class TestOracleAgreement:
    def test_grid_forecasts_match_exact_membership(self):
        rng = np.random.default_rng(13)
        from fractions import Fraction

        for _ in range(150):
            system = random_system(rng, n_max=4, m_max=8)
            V = fc.build_vertex_set(system)
            f = rng.integers(0, 21, V.n) / 20.0
            verdict = fc.check(f, V)
            exact = [Fraction(x).limit_denominator(20) for x in f]
            member, _ = hull_membership_exact(exact, V)
            assert member == verdict.coherent


class TestWitnessMeasure:
    def test_worked_example(self, nested_system, nested_vertices):
        verdict = fc.check([0.6, 0.9], nested_vertices)
        mu = fc.witness_measure(verdict, nested_system)
        assert mu["TT"] == pytest.approx(0.6, abs=1e-9)
        assert mu["FT"] == pytest.approx(0.3, abs=1e-9)
        assert mu["FF"] == pytest.approx(0.1, abs=1e-9)

    def test_event_probabilities_reproduced(self, nested_system):
        V = fc.build_vertex_set(nested_system)
        rng = np.random.default_rng(14)
        for _ in range(50):
            f = random_coherent(rng, V)
            verdict = fc.check(f, V)
            mu = fc.witness_measure(verdict, nested_system)
            assert sum(mu.values()) == pytest.approx(1.0, abs=1e-9)
            index = {w: i for i, w in enumerate(nested_system.world_ids)}
            for j in range(nested_system.incidence.shape[1]):
                prob = sum(
                    mass
                    for w, mass in mu.items()
                    if nested_system.incidence[index[w], j]
                )
                assert prob == pytest.approx(f[j], abs=1e-7)

    def test_merged_atoms_split_uniformly(self):
        system = fc.EventSystem(
            ("a", "b", "c"), np.array([[1], [0], [1]], dtype=bool)
        )
        V = fc.build_vertex_set(system)
        verdict = fc.check([0.5], V)
        mu = fc.witness_measure(verdict, system)
        assert mu["a"] == pytest.approx(0.25, abs=1e-9)
        assert mu["c"] == pytest.approx(0.25, abs=1e-9)
        assert mu["b"] == pytest.approx(0.5, abs=1e-9)

    def test_incoherent_verdict_rejected(self, nested_system, nested_vertices):
        verdict = fc.check([0.95, 0.55], nested_vertices)
        with pytest.raises(ValueError, match="witness"):
            fc.witness_measure(verdict, nested_system)


class TestValidation:
    def test_forecast_outside_cube_rejected(self, nested_vertices):
        with pytest.raises(BregmanError):
            fc.check([1.2, 0.5], nested_vertices)

    def test_wrong_length_rejected(self, nested_vertices):
        with pytest.raises(BregmanError):
            fc.check([0.5], nested_vertices)
