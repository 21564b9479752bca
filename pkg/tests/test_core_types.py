"""값 타입과 GᵀG 계산 검증."""

import numpy as np
import pytest

from services.core_types import (
    Direction,
    GradientMatrix,
    GramMatrix,
    WeightVector,
    build_gram,
    derive_seeds,
    make_rng,
)
from services.errors import DomainError, InvalidInputError


class TestBuildGram:

    def test_orthonormal_columns(self):
        gram = build_gram(GradientMatrix(np.eye(2)))
        np.testing.assert_array_equal(gram.entries, np.eye(2))

    def test_direct_dot_products(self):
        G = GradientMatrix(np.array([[1.0, 1.0], [1.0, -1.0]]))
        np.testing.assert_array_equal(build_gram(G).entries, [[2.0, 0.0], [0.0, 2.0]])

    def test_single_column(self):
        gram = build_gram(GradientMatrix(np.array([[3.0], [4.0]])))
        assert gram.entries.shape == (1, 1)
        assert gram.entries[0, 0] == 25.0

    def test_non_finite_rejected(self):
        with pytest.raises(InvalidInputError):
            build_gram(np.array([[np.nan, 1.0]]))

    def test_random_grams_symmetric_psd(self):
        rng = np.random.default_rng(42)
        for _ in range(1000):
            m = int(rng.integers(1, 51))
            k = int(rng.integers(1, 11))
            G = GradientMatrix(rng.standard_normal((m, k)))
            gram = build_gram(G)
            entries = gram.entries
            assert np.array_equal(entries, entries.T)
            trace = float(np.trace(entries))
            assert np.min(np.linalg.eigvalsh(entries)) >= -1e-10 * max(trace, 1.0)
            # 검증 모드로 다시 만들어도 통과해야 함
            GramMatrix(entries)


class TestValueTypes:

    def test_gradient_matrix_is_read_only(self):
        G = GradientMatrix(np.ones((3, 2)))
        assert G.dimension == 3
        assert G.task_count == 2
        with pytest.raises(ValueError):
            G.entries[0, 0] = 5.0

    def test_gradient_matrix_rejects_inf(self):
        with pytest.raises(InvalidInputError):
            GradientMatrix(np.array([[np.inf, 0.0]]))

    def test_gram_rejects_asymmetric(self):
        with pytest.raises(InvalidInputError):
            GramMatrix(np.array([[1.0, 0.5], [0.0, 1.0]]))

    def test_gram_rejects_indefinite(self):
        with pytest.raises(InvalidInputError):
            GramMatrix(np.array([[1.0, 0.0], [0.0, -1.0]]))

    def test_gram_diagonal_detection(self):
        assert GramMatrix(np.diag([2.0, 3.0])).is_diagonal()
        assert not GramMatrix(np.array([[2.0, 1.0], [1.0, 2.0]])).is_diagonal()

    def test_weight_vector_floor(self):
        WeightVector(np.array([1e-8, 1.0]))
        with pytest.raises(DomainError):
            WeightVector(np.array([1e-9, 1.0]))

    def test_direction_norm(self):
        assert Direction(np.array([3.0, 4.0])).norm == 5.0


class TestRandomness:

    def test_philox_reproducible(self):
        a = make_rng(7).standard_normal(5)
        b = make_rng(7).standard_normal(5)
        np.testing.assert_array_equal(a, b)

    def test_derived_seeds_distinct_and_stable(self):
        seeds = derive_seeds(123, 4)
        assert len(set(seeds)) == 4
        assert seeds == derive_seeds(123, 4)
        assert all(0 <= s < 2 ** 64 for s in seeds)
