import math

import numpy as np
import pytest

import forecast_coherence as fc
from forecast_coherence.bregman import (
    BregmanError,
    DivergentGradientError,
    NonconvergenceError,
    _afw_numpy,
)

from conftest import random_coherent, random_system


def triangle():
    rows = np.array([[0, 0], [0, 1], [1, 1]], dtype=bool)
    return fc.build_vertex_set(fc.EventSystem(("FF", "FT", "TT"), rows))


def brier_family(n=2):
    return fc.RuleFamily.uniform(fc.brier(), n)


def log_family(n=2):
    return fc.RuleFamily.uniform(fc.log_rule(), n)


class TestDivergence:
    def test_quadratic_is_squared_distance(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            n = int(rng.integers(1, 6))
            y, x = rng.random(n), rng.random(n)
            d = fc.divergence(brier_family(n), y, x)
            assert d == pytest.approx(float(((y - x) ** 2).sum()), abs=1e-12)

    def test_log_closed_form(self):
        d = fc.divergence(log_family(), [1.0, 0.3], [0.5, 0.3])
        assert d == pytest.approx(math.log(2.0), abs=1e-12)

    def test_zero_on_equal_points(self):
        for fam in (brier_family(3), log_family(3)):
            x = np.array([0.2, 0.5, 0.9])
            assert fc.divergence(fam, x, x) == 0.0

    def test_divergent_base_point(self):
        fam = log_family()
        assert fc.divergence(fam, [0.0, 0.5], [0.0, 0.5]) == 0.0
        assert fc.divergence(fam, [0.2, 0.5], [0.0, 0.5]) == math.inf
        assert fc.divergence(fam, [0.9, 0.1], [1.0, 0.1]) == math.inf

    def test_bounded_rule_has_no_divergent_base(self):
        d = fc.divergence(brier_family(), [0.2, 0.5], [0.0, 0.5])
        assert d == pytest.approx(0.04, abs=1e-15)

    def test_asymmetry(self):
        fam = log_family(1)
        assert fc.divergence(fam, [0.9], [0.5]) != fc.divergence(fam, [0.5], [0.9])

    def test_nonnegative_and_definite(self):
        rng = np.random.default_rng(1)
        for _ in range(10_000):
            n = int(rng.integers(1, 5))
            fam = brier_family(n) if rng.random() < 0.5 else log_family(n)
            y = rng.uniform(0.01, 0.99, n)
            x = rng.uniform(0.01, 0.99, n)
            d = fc.divergence(fam, y, x)
            assert d >= 0.0
            if np.abs(y - x).max() > 1e-5:
                assert d > 1e-12

    def test_gradient_matches_finite_differences(self):
        xs = np.linspace(0.05, 0.95, 19)
        h = 1e-6
        for fam in (brier_family(19), log_family(19)):
            fd = (fam.phi_values(xs + h) - fam.phi_values(xs - h)) / (2.0 * h)
            np.testing.assert_allclose(fam.grad(xs), fd, rtol=1e-5, atol=1e-9)

    def test_callable_wrapper(self):
        div = fc.Divergence(brier_family())
        assert div([0.1, 0.2], [0.3, 0.4]) == fc.divergence(div, [0.1, 0.2], [0.3, 0.4])

    def test_bad_inputs_rejected(self):
        with pytest.raises(BregmanError):
            fc.divergence(brier_family(2), [0.1], [0.2, 0.3])
        with pytest.raises(BregmanError):
            fc.divergence(brier_family(1), [1.5], [0.5])
        with pytest.raises(BregmanError):
            fc.divergence("nope", [0.5], [0.5])


class TestProjection:
    def test_quadratic_worked_example(self):
        proj = fc.project(brier_family(), [0.95, 0.55], triangle())
        np.testing.assert_allclose(proj.point, [0.75, 0.75], atol=1e-6)
        np.testing.assert_allclose(proj.weights, [0.25, 0.0, 0.75], atol=1e-6)
        assert proj.fw_gap <= 1e-9
        assert proj.iterations >= 1

    def test_log_worked_example(self):
        proj = fc.project(log_family(), [0.5, 0.2], triangle())
        np.testing.assert_allclose(proj.point, [1.0 / 3.0, 1.0 / 3.0], atol=1e-4)
        assert proj.fw_gap <= 1e-9

    def test_interior_point_projects_to_itself(self):
        proj = fc.project(brier_family(), [0.6, 0.9], triangle())
        np.testing.assert_allclose(proj.point, [0.6, 0.9], atol=1e-4)
        assert fc.divergence(brier_family(), proj.point, [0.6, 0.9]) <= 1e-8

    def test_vertex_projects_to_itself(self):
        # The log rule cannot be linearised at a vertex, so this one runs
        # on the quadratic rule only.
        proj = fc.project(brier_family(), [0.0, 1.0], triangle())
        np.testing.assert_allclose(proj.point, [0.0, 1.0], atol=1e-9)

    def test_weights_reconstruct_point(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            system = random_system(rng, n_max=5, m_max=12)
            V = fc.build_vertex_set(system)
            fam = (
                fc.RuleFamily.uniform(fc.brier(), V.n)
                if rng.random() < 0.5
                else fc.RuleFamily.uniform(fc.log_rule(), V.n)
            )
            x = rng.uniform(0.05, 0.95, V.n)
            proj = fc.project(fam, x, V)
            assert proj.weights.shape == (V.k,)
            assert (proj.weights >= 0.0).all()
            assert proj.weights.sum() == pytest.approx(1.0, abs=1e-12)
            np.testing.assert_allclose(proj.weights @ V.matrix, proj.point, atol=1e-12)

    def test_constant_column_is_pinned(self):
        rows = np.array([[0, 0], [0, 1]], dtype=bool)
        V = fc.build_vertex_set(fc.EventSystem(("a", "b"), rows))
        proj = fc.project(brier_family(), [0.9, 0.3], V)
        np.testing.assert_allclose(proj.point, [0.0, 0.3], atol=1e-9)

    def test_single_vertex_short_circuit(self):
        rows = np.array([[1, 0]], dtype=bool)
        V = fc.build_vertex_set(fc.EventSystem(("a",), rows))
        proj = fc.project(log_family(), [0.5, 0.5], V)
        np.testing.assert_allclose(proj.point, [1.0, 0.0])
        assert proj.fw_gap == 0.0 and proj.iterations == 0

    def test_divergent_base_point_refused(self):
        with pytest.raises(DivergentGradientError, match=r"\[0\]"):
            fc.project(log_family(), [0.0, 0.5], triangle())
        fc.project(brier_family(), [0.0, 0.5], triangle())

    def test_iteration_budget_exhaustion(self):
        with pytest.raises(NonconvergenceError) as info:
            fc.project(brier_family(), [0.95, 0.55], triangle(), max_iters=1)
        best = info.value.projection
        assert isinstance(best, fc.Projection)
        assert best.fw_gap > 1e-9

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(BregmanError, match="dimension"):
            fc.project(brier_family(3), [0.5, 0.5, 0.5], triangle())

    def test_reference_engine_agreement(self):
        # The compiled kernel and the plain-numpy engine must land on the
        # same hull point whenever both certify a 1e-9 gap.
        rng = np.random.default_rng(3)
        for _ in range(25):
            system = random_system(rng, n_max=4, m_max=10)
            V = fc.build_vertex_set(system)
            rule = fc.brier() if rng.random() < 0.5 else fc.log_rule()
            fam = fc.RuleFamily.uniform(rule, V.n)
            x = rng.uniform(0.1, 0.9, V.n)
            proj = fc.project(fam, x, V)
            w, gap, _, converged = _afw_numpy(fam, V.matrix, fam.grad(x), 1e-9, 100_000)
            assert converged and gap <= 1e-9
            np.testing.assert_allclose(w @ V.matrix, proj.point, atol=1e-4)
            d_kernel = fc.divergence(fam, proj.point, x)
            d_numpy = fc.divergence(fam, np.clip(w @ V.matrix, 0, 1), x)
            assert abs(d_kernel - d_numpy) <= 2e-9


class TestPythagorean:
    def test_worked_example(self):
        fam = brier_family()
        x = np.array([0.95, 0.55])
        proj = fc.project(fam, x, triangle())
        slack = fc.pythagorean_slack(fam, [0.0, 1.0], x, proj)
        assert slack == pytest.approx(0.4, abs=1e-6)

    def test_identity_against_gradient_form(self):
        # d(y,x) - d(p,x) - d(y,p) = (grad(p) - grad(x)) . (y - p) for any
        # interior triple, projection or not.
        rng = np.random.default_rng(4)
        for _ in range(500):
            n = int(rng.integers(1, 5))
            fam = brier_family(n) if rng.random() < 0.5 else log_family(n)
            y, x, p = (rng.uniform(0.01, 0.99, n) for _ in range(3))
            lhs = fc.pythagorean_slack(fam, y, x, p)
            rhs = float((fam.grad(p) - fam.grad(x)) @ (y - p))
            assert lhs == pytest.approx(rhs, abs=1e-9)

    def test_nonnegative_over_hull(self):
        rng = np.random.default_rng(5)
        for _ in range(300):
            system = random_system(rng, n_max=4, m_max=10)
            V = fc.build_vertex_set(system)
            rule = fc.brier() if rng.random() < 0.5 else fc.log_rule()
            fam = fc.RuleFamily.uniform(rule, V.n)
            x = rng.uniform(0.05, 0.95, V.n)
            proj = fc.project(fam, x, V)
            y = random_coherent(rng, V)
            assert fc.pythagorean_slack(fam, y, x, proj) >= -1e-8

    def test_infinite_agreement_reports_zero(self):
        fam = log_family()
        pi = np.array([0.0, 0.5])
        slack = fc.pythagorean_slack(fam, [1.0, 0.5], [0.0, 0.25], pi)
        assert slack == 0.0
