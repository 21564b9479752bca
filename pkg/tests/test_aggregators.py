"""집계기 (FairGrad 및 기준선) 검증."""

import numpy as np
import pytest

from services.aggregators import (
    AggregatorState,
    aggregate,
    aggregate_dwa,
    aggregate_fairgrad,
    aggregate_ls,
    aggregate_mgda,
    aggregate_pcgrad,
    aggregate_rlw,
    aggregate_si,
    dwa_weights,
    min_norm_weights,
    rlw_weights,
)
from services.core_types import GradientMatrix, build_gram, make_rng
from services.errors import DomainError, InvalidInputError


def cols(*vectors):
    return GradientMatrix(np.column_stack(vectors).astype(float))


class TestFairGrad:

    def test_orthonormal_columns(self):
        result = aggregate_fairgrad(cols([1, 0], [0, 1]), 1.0)
        np.testing.assert_allclose(result.weights, [1.0, 1.0], atol=1e-9)
        np.testing.assert_allclose(result.direction.vector, [1.0, 1.0], atol=1e-9)

    def test_single_task_closed_form(self):
        result = aggregate_fairgrad(cols([3, 4]), 1.0)
        assert result.weights[0] == pytest.approx(0.2, rel=1e-9)
        np.testing.assert_allclose(result.direction.vector, [0.6, 0.8], rtol=1e-9)
        gain = float(np.array([3.0, 4.0]) @ result.direction.vector)
        assert gain == pytest.approx(1.0 / result.weights[0], rel=1e-9)

    def test_alpha_zero_is_sum(self):
        G = cols([1, 2, 3], [-1, 0, 2], [4, 1, 1])
        result = aggregate_fairgrad(G, 0.0)
        np.testing.assert_allclose(result.direction.vector, G.entries.sum(axis=1))

    def test_converged_directions_are_feasible(self):
        rng = np.random.default_rng(42)
        for _ in range(200):
            k = int(rng.integers(2, 6))
            G = GradientMatrix(rng.standard_normal((k + 3, k)))
            for alpha in (0.5, 1.0, 2.0, 10.0):
                result = aggregate_fairgrad(G, alpha)
                if result.converged:
                    assert result.feasible
                    assert np.all(G.entries.T @ result.direction.vector >= -1e-8)

    def test_defining_relation(self):
        rng = np.random.default_rng(5)
        G = GradientMatrix(rng.standard_normal((6, 3)))
        for alpha in (0.5, 1.0, 2.0, 5.0):
            result = aggregate_fairgrad(G, alpha)
            assert result.converged
            gains = G.entries.T @ result.direction.vector
            np.testing.assert_array_less(np.abs(gains ** (-alpha) - result.weights), 1e-5 * result.weights)

    def test_sgd_inner_mode(self, make_config):
        config = make_config(solver_mode="sgd_inner", inner_epochs=200)
        result = aggregate_fairgrad(cols([1, 0], [0, 1]), 1.0, config)
        assert result.report.mode == "sgd_inner"
        np.testing.assert_allclose(result.weights, [1.0, 1.0])


class TestLinearBaselines:

    def test_ls_sum(self):
        np.testing.assert_array_equal(aggregate_ls(cols([1, 0], [0, 1])).vector, [1.0, 1.0])

    def test_ls_exact_conflict_cancels(self):
        np.testing.assert_array_equal(aggregate_ls(cols([1, 0], [-1, 0])).vector, [0.0, 0.0])

    def test_ls_single_task(self):
        np.testing.assert_array_equal(aggregate_ls(cols([2, -3])).vector, [2.0, -3.0])

    def test_si_unit_losses_match_ls(self):
        G = cols([1, 2], [3, -1])
        np.testing.assert_array_equal(aggregate_si([1.0, 1.0], G).vector, aggregate_ls(G).vector)

    def test_si_division(self):
        np.testing.assert_allclose(aggregate_si([2.0, 4.0], cols([2, 0], [0, 4])).vector, [1.0, 1.0])

    def test_si_single_task(self):
        np.testing.assert_allclose(aggregate_si([10.0], cols([5, 0])).vector, [0.5, 0.0])

    def test_si_rejects_nonpositive_loss(self):
        with pytest.raises(DomainError):
            aggregate_si([1.0, 0.0], cols([1, 0], [0, 1]))

    def test_ls_positive_homogeneity(self):
        G = np.array([[1.0, -2.0], [0.5, 3.0]])
        np.testing.assert_allclose(aggregate_ls(3.0 * G).vector, 3.0 * aggregate_ls(G).vector)


class TestRLW:

    def test_single_task_weight_is_one(self):
        weights = rlw_weights(1, make_rng(0))
        assert weights[0] == 1.0
        np.testing.assert_array_equal(aggregate_rlw(cols([2, 1]), make_rng(0)).vector, [2.0, 1.0])

    def test_reproducible_with_seed(self):
        a = rlw_weights(3, make_rng(42))
        b = rlw_weights(3, make_rng(42))
        np.testing.assert_array_equal(a, b)

    def test_weights_on_simplex(self):
        rng = make_rng(1)
        for _ in range(100):
            weights = rlw_weights(5, rng)
            assert np.all(weights > 0)
            assert abs(weights.sum() - 1.0) <= 1e-12


class TestDWA:

    def test_first_step_uniform(self):
        state = AggregatorState(method="dwa")
        np.testing.assert_array_equal(dwa_weights(state, 2), [1.0, 1.0])

    def test_equal_ratios_uniform(self):
        state = AggregatorState(method="dwa", loss_history=(np.array([2.0, 3.0]), np.array([2.0, 3.0])))
        np.testing.assert_allclose(dwa_weights(state, 2), [1.0, 1.0])

    def test_temperature_softmax(self):
        state = AggregatorState(method="dwa", temperature=2.0,
                                loss_history=(np.array([1.0, 1.0]), np.array([2.0, 1.0])))
        np.testing.assert_allclose(dwa_weights(state, 2), [1.2449, 0.7551], atol=1e-4)

    def test_history_keeps_two(self):
        state = AggregatorState(method="dwa")
        G = cols([1, 0], [0, 1])
        for losses in ([4.0, 4.0], [2.0, 4.0], [1.0, 4.0]):
            aggregate_dwa(losses, G, state)
        assert len(state.loss_history) == 2
        np.testing.assert_array_equal(state.loss_history[-1], [1.0, 4.0])

    def test_zero_past_loss(self):
        state = AggregatorState(method="dwa", loss_history=(np.array([0.0, 1.0]), np.array([1.0, 1.0])))
        with pytest.raises(DomainError):
            dwa_weights(state, 2)


class TestMGDA:

    def test_symmetric(self):
        direction, weights = aggregate_mgda(cols([1, 0], [0, 1]))
        np.testing.assert_allclose(weights, [0.5, 0.5])
        np.testing.assert_allclose(direction.vector, [0.5, 0.5])

    def test_shorter_aligned_gradient(self):
        direction, weights = aggregate_mgda(cols([1, 0], [2, 0]))
        np.testing.assert_allclose(weights, [1.0, 0.0])
        np.testing.assert_allclose(direction.vector, [1.0, 0.0])

    def test_exact_conflict(self):
        direction, _ = aggregate_mgda(cols([1, 2], [-1, -2]))
        assert direction.norm <= 1e-6

    def test_two_task_closed_form(self):
        rng = np.random.default_rng(42)
        for _ in range(1000):
            g1, g2 = rng.standard_normal(3), rng.standard_normal(3)
            gamma = np.clip((g2 - g1) @ g2 / np.sum((g1 - g2) ** 2), 0.0, 1.0)
            _, weights = aggregate_mgda(cols(g1, g2))
            assert abs(weights[0] - gamma) <= 1e-8

    def test_weights_on_simplex(self):
        rng = np.random.default_rng(3)
        G = rng.standard_normal((5, 4))
        result = min_norm_weights(build_gram(GradientMatrix(G)))
        assert np.all(result.weights >= 0)
        assert abs(result.weights.sum() - 1.0) <= 1e-10

    def test_scale_invariant_weights(self):
        G = np.array([[1.0, -0.5], [0.3, 1.0]])
        _, w1 = aggregate_mgda(G)
        _, w2 = aggregate_mgda(5.0 * G)
        np.testing.assert_allclose(w1, w2, atol=1e-12)


class TestPCGrad:

    def test_no_conflict_mean(self):
        np.testing.assert_allclose(aggregate_pcgrad(cols([1, 0], [0, 1]), make_rng(0)).vector, [0.5, 0.5])

    def test_hand_computed_projection(self):
        # g̃₁ = (0.5, 0.5), g̃₂ = (0, 1)
        d = aggregate_pcgrad(cols([1, 0], [-1, 1]), make_rng(0)).vector
        np.testing.assert_allclose(d, [0.25, 0.75])

    def test_sum_reduce(self):
        d = aggregate_pcgrad(cols([1, 0], [-1, 1]), make_rng(0), reduce="sum").vector
        np.testing.assert_allclose(d, [0.5, 1.5])

    def test_single_task(self):
        np.testing.assert_array_equal(aggregate_pcgrad(cols([3, -1]), make_rng(0)).vector, [3.0, -1.0])

    def test_zero_gradients(self):
        np.testing.assert_array_equal(aggregate_pcgrad(np.zeros((2, 3)), make_rng(0)).vector, [0.0, 0.0])

    def test_conflict_removed_for_two_tasks(self):
        rng = np.random.default_rng(9)
        for _ in range(200):
            g1, g2 = rng.standard_normal(4), rng.standard_normal(4)
            d = aggregate_pcgrad(cols(g1, g2), make_rng(1), reduce="sum").vector
            projected_1 = g1 - min(g1 @ g2, 0.0) / (g2 @ g2) * g2
            projected_2 = g2 - min(g2 @ g1, 0.0) / (g1 @ g1) * g1
            np.testing.assert_allclose(d, projected_1 + projected_2, atol=1e-12)
            assert projected_1 @ g2 >= -1e-10
            assert projected_2 @ g1 >= -1e-10

    def test_reproducible(self):
        G = np.random.default_rng(2).standard_normal((4, 5))
        a = aggregate_pcgrad(G, make_rng(42)).vector
        b = aggregate_pcgrad(G, make_rng(42)).vector
        np.testing.assert_array_equal(a, b)

    def test_invalid_reduce(self):
        with pytest.raises(InvalidInputError):
            aggregate_pcgrad(np.eye(2), make_rng(0), reduce="max")


class TestDispatcher:

    def test_every_method_returns_direction(self):
        G = GradientMatrix(np.array([[1.0, 0.2], [0.1, 1.0]]))
        losses = np.array([1.5, 0.5])
        for method in ("fairgrad", "ls", "si", "rlw", "dwa", "mgda", "pcgrad"):
            state = AggregatorState(method=method, rng=make_rng(0))
            result = aggregate(method, losses, G, state, alpha=1.0)
            assert result.direction.vector.shape == (2,)
            assert result.weights.shape == (2,)

    def test_unknown_method(self):
        with pytest.raises(InvalidInputError):
            aggregate("cagrad", np.ones(2), GradientMatrix(np.eye(2)), AggregatorState(method="cagrad"))
