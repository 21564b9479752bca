"""
Pareto 진단: 지배 관계, min-norm 정상성 척도, GᵀG 최소 특이값, 2차원 전선 격자 샘플링.

지배는 최소화 기준: lu 가 lv 를 지배 ⇔ lu ≤ lv (원소별) 이고 lu ≠ lv.
"""

from typing import Sequence, Tuple
import logging

import numpy as np

from services.aggregators import min_norm_weights
from services.core_types import GradientMatrix, GramMatrix, MultiObjectiveProblem, build_gram
from services.errors import InvalidInputError

logger = logging.getLogger(__name__)


def dominates(lu: Sequence[float], lv: Sequence[float]) -> bool:
    lu = np.asarray(lu, dtype=np.float64)
    lv = np.asarray(lv, dtype=np.float64)
    if lu.shape != lv.shape:
        raise InvalidInputError(f"길이 불일치: {lu.shape} vs {lv.shape}")
    return bool(np.all(lu <= lv) and np.any(lu != lv))


def stationarity_measure(G) -> float:
    """심플렉스 위 min ‖Gw‖ (0 ⇔ Pareto 정상점)"""
    gram = build_gram(G if isinstance(G, GradientMatrix) else GradientMatrix(G))
    return min_norm_weights(gram).norm


def is_stationary(G, tol: float) -> bool:
    return stationarity_measure(G) <= tol


def smallest_singular_value(gram) -> float:
    """대칭 PSD 행렬의 최소 고유값 (0 으로 클램프)"""
    entries = gram.entries if isinstance(gram, GramMatrix) else np.asarray(gram, dtype=np.float64)
    return max(float(np.linalg.eigvalsh(entries)[0]), 0.0)


def nondominated_2d(points: np.ndarray) -> np.ndarray:
    """2차원 손실 쌍 중 비지배 집합 (중복 제거, l1 오름차순)"""
    points = np.unique(np.asarray(points, dtype=np.float64), axis=0)
    keep = []
    best_second = np.inf
    # l1 오름차순, 같은 l1 에서는 l2 가 가장 작은 것만 살아남음
    for idx, (_, second) in enumerate(points):
        if second < best_second:
            keep.append(idx)
            best_second = second
    return points[keep]


def sample_front_2d(
    problem: MultiObjectiveProblem,
    bounds: Tuple[Tuple[float, float], Tuple[float, float]],
    resolution: int,
) -> np.ndarray:
    """m=2 문제를 정규 격자에서 평가해 비지배 손실 쌍만 반환 (테스트 오라클)"""
    if problem.dimension != 2:
        raise InvalidInputError("sample_front_2d 는 m=2 문제만 지원합니다")
    if problem.task_count != 2:
        raise InvalidInputError("sample_front_2d 는 2-태스크 문제만 지원합니다")
    if resolution < 2:
        raise InvalidInputError("resolution 은 2 이상이어야 합니다")

    (lo1, hi1), (lo2, hi2) = bounds
    axis1 = np.linspace(lo1, hi1, resolution)
    axis2 = np.linspace(lo2, hi2, resolution)
    values = np.array([
        problem.losses(np.array([a, b])) for a in axis1 for b in axis2
    ])
    front = nondominated_2d(values)
    logger.debug(f"격자 {resolution}² 에서 비지배 점 {len(front)}개")
    return front
