"""가중치 방정식 GᵀGw = w^{-1/α} 풀이 검증."""

import numpy as np
import pytest

from services.core_types import GramMatrix, build_gram, GradientMatrix
from services.errors import DomainError, PreconditionError, UnsupportedError
from services.weight_solver import (
    default_tolerance,
    residual,
    residual_jacobian,
    solve_diagonal,
    solve_weights,
    solve_weights_sgd,
    weight_potential,
)

ALPHAS = (0.5, 1.0, 2.0, 5.0, 10.0)


def _random_diagonal_gram(rng):
    k = int(rng.integers(1, 9))
    return GramMatrix(np.diag(10.0 ** rng.uniform(-2, 2, size=k)))


def _random_spd_gram(rng, k):
    G = rng.standard_normal((k + 5, k))
    return build_gram(GradientMatrix(G))


class TestResidual:

    def test_identity_fixed_point(self):
        np.testing.assert_array_equal(residual(np.array([[1.0]]), np.array([1.0]), 1.0), [0.0])

    def test_diagonal_closed_form_is_root(self):
        w = np.array([2 ** -0.5, 8 ** -0.5])
        np.testing.assert_allclose(residual(np.diag([2.0, 8.0]), w, 1.0), [0.0, 0.0], atol=1e-15)

    def test_direct_evaluation(self):
        np.testing.assert_allclose(residual(np.eye(2), np.array([2.0, 2.0]), 1.0), [1.5, 1.5])

    def test_alpha_zero_unsupported(self):
        with pytest.raises(UnsupportedError):
            residual(np.eye(2), np.ones(2), 0.0)

    def test_weights_below_floor(self):
        with pytest.raises(DomainError):
            residual(np.eye(2), np.array([1e-9, 1.0]), 1.0)

    def test_jacobian_matches_finite_differences(self):
        rng = np.random.default_rng(42)
        gram = _random_spd_gram(rng, 4)
        w = rng.uniform(0.5, 2.0, size=4)
        h = 1e-6
        numeric = np.column_stack([
            (residual(gram, w + h * e, 2.0) - residual(gram, w - h * e, 2.0)) / (2 * h)
            for e in np.eye(4)
        ])
        np.testing.assert_allclose(residual_jacobian(gram, w, 2.0), numeric, rtol=1e-6, atol=1e-8)

    def test_residual_is_gradient_of_potential(self):
        rng = np.random.default_rng(7)
        gram = _random_spd_gram(rng, 3)
        w = rng.uniform(0.5, 2.0, size=3)
        for alpha in (0.5, 1.0, 3.0):
            h = 1e-6
            numeric = np.array([
                (weight_potential(gram, w + h * e, alpha) - weight_potential(gram, w - h * e, alpha)) / (2 * h)
                for e in np.eye(3)
            ])
            np.testing.assert_allclose(residual(gram, w, alpha), numeric, rtol=1e-6, atol=1e-7)


class TestSolveDiagonal:

    def test_two_tasks(self):
        w = solve_diagonal(np.diag([2.0, 8.0]), 1.0)
        np.testing.assert_allclose(w.weights, [0.70710678, 0.35355339], atol=1e-8)

    def test_unit_gram(self):
        for alpha in ALPHAS:
            np.testing.assert_allclose(solve_diagonal(np.eye(3), alpha).weights, np.ones(3))

    def test_closed_form_exponent(self):
        assert solve_diagonal(np.array([[16.0]]), 3.0).weights[0] == pytest.approx(0.125)

    def test_non_diagonal_rejected(self):
        with pytest.raises(PreconditionError):
            solve_diagonal(np.array([[2.0, 1.0], [1.0, 2.0]]), 1.0)

    def test_scale_behavior(self):
        rng = np.random.default_rng(3)
        gram = _random_diagonal_gram(rng)
        for alpha in ALPHAS:
            s = 7.0
            base = solve_diagonal(gram, alpha).weights
            scaled = solve_diagonal(GramMatrix(s * gram.entries), alpha).weights
            np.testing.assert_allclose(scaled, base * s ** (-alpha / (alpha + 1)), rtol=1e-12)


class TestSolveWeights:

    def test_matches_diagonal_oracle_example(self):
        report = solve_weights(np.diag([2.0, 8.0]), 1.0)
        assert report.converged
        assert report.mode == "least_squares"
        assert report.residual_norm <= 1e-8
        np.testing.assert_allclose(report.weights.weights, [0.70710678, 0.35355339], atol=1e-7)

    def test_alpha_zero_all_ones(self):
        report = solve_weights(np.array([[3.0, 1.0], [1.0, 5.0]]), 0.0)
        assert report.mode == "closed_form"
        assert report.residual_norm == 0.0
        np.testing.assert_array_equal(report.weights.weights, [1.0, 1.0])

    def test_single_task_closed_form(self):
        report = solve_weights(np.array([[25.0]]), 2.0)
        assert report.weights.weights[0] == pytest.approx(25 ** (-2 / 3), rel=1e-9)

    def test_deterministic(self):
        gram = _random_spd_gram(np.random.default_rng(11), 5)
        a = solve_weights(gram, 2.0)
        b = solve_weights(gram, 2.0)
        np.testing.assert_array_equal(a.weights.weights, b.weights.weights)

    def test_default_tolerance_scales_with_tasks(self):
        assert default_tolerance(4) == pytest.approx(4e-8)

    def test_vanishing_gradient_reports_not_converged(self):
        report = solve_weights(np.zeros((2, 2)), 2.0)
        assert not report.converged
        assert np.all(np.isfinite(report.weights.weights))

    def test_diagonal_oracle_equivalence(self):
        rng = np.random.default_rng(42)
        for _ in range(100):
            gram = _random_diagonal_gram(rng)
            for alpha in ALPHAS:
                report = solve_weights(gram, alpha)
                oracle = solve_diagonal(gram, alpha).weights
                assert np.max(np.abs(report.weights.weights - oracle)) <= 1e-6

    def test_defining_relations_on_random_grams(self):
        rng = np.random.default_rng(2024)
        checked = 0
        for _ in range(100):
            k = int(rng.integers(1, 11))
            gram = _random_spd_gram(rng, k)
            for alpha in ALPHAS:
                report = solve_weights(gram, alpha)
                if not report.converged:
                    continue
                checked += 1
                w = report.weights.weights
                assert report.residual_norm <= 1e-8 * k
                gains = gram.entries @ w  # g_iᵀd
                np.testing.assert_array_less(np.abs(gains ** (-alpha) - w), 1e-5 * w + 1e-300)
                d_norm_sq = float(w @ gram.entries @ w)
                assert abs(d_norm_sq - np.sum(w ** (1 - 1 / alpha))) <= 1e-6 * d_norm_sq
        assert checked >= 400


class TestSolveWeightsSGD:

    def test_starts_at_solution(self):
        report = solve_weights_sgd(np.eye(2), 1.0)
        assert report.mode == "sgd_inner"
        np.testing.assert_allclose(report.weights.weights, [1.0, 1.0])
        assert report.residual_norm == 0.0

    def test_residual_decreases(self):
        gram = np.diag([2.0, 8.0])
        initial = float(np.linalg.norm(residual(gram, np.ones(2), 1.0)))
        report = solve_weights_sgd(gram, 1.0)
        assert report.residual_norm < initial

    def test_one_dimensional_monotone_descent(self):
        target = 25 ** (-2 / 3)
        distances = [abs(1.0 - target)]
        for epochs in range(1, 21):
            w = solve_weights_sgd(np.array([[25.0]]), 2.0, epochs=epochs).weights.weights[0]
            distances.append(abs(w - target))
        assert all(b < a for a, b in zip(distances, distances[1:]))

    def test_single_epoch_is_curvature_normalized_step(self):
        gram = np.diag([2.0, 8.0])
        w = np.ones(2)
        f = residual(gram, w, 1.0)
        J = residual_jacobian(gram, w, 1.0)
        expected = w - 0.1 * (J.T @ f) / np.max(np.linalg.eigvalsh(J)) ** 2
        report = solve_weights_sgd(gram, 1.0, inner_lr=0.1, epochs=1)
        np.testing.assert_allclose(report.weights.weights, expected, rtol=1e-14)
        np.testing.assert_allclose(report.weights.weights, [1.0 - 0.3 / 81.0, 1.0 - 6.3 / 81.0], rtol=1e-12)

    def test_invalid_learning_rate(self):
        with pytest.raises(DomainError):
            solve_weights_sgd(np.eye(2), 1.0, inner_lr=0.0)


@pytest.mark.slow
class TestWeightSolverAcceptance:

    def test_full_diagonal_oracle_grid(self):
        rng = np.random.default_rng(0)
        for _ in range(500):
            gram = _random_diagonal_gram(rng)
            for alpha in ALPHAS:
                report = solve_weights(gram, alpha)
                assert np.max(np.abs(report.weights.weights - solve_diagonal(gram, alpha).weights)) <= 1e-6

    def test_full_random_gram_grid(self):
        rng = np.random.default_rng(1)
        for _ in range(500):
            k = int(rng.integers(1, 11))
            gram = _random_spd_gram(rng, k)
            for alpha in ALPHAS:
                report = solve_weights(gram, alpha)
                if report.converged:
                    assert report.residual_norm <= 1e-8 * k
