"""
태스크별 손실/그래디언트에서 업데이트 방향 d 를 만드는 집계기.

FairGrad 가 중심이고, LS / SI / RLW / DWA / MGDA / PCGrad 는 비교용 기준선.
RLW / DWA 는 한 실행이 소유하는 AggregatorState 를 통해 상태를 유지한다.
"""

from dataclasses import dataclass, field
from typing import Literal, Optional, Tuple
import logging

import numpy as np
from scipy.special import softmax

from config.settings import settings
from services.core_types import Direction, GradientMatrix, GramMatrix, build_gram
from services.errors import DomainError, InvalidInputError
from services.weight_solver import SolverReport, solve_weights, solve_weights_sgd

logger = logging.getLogger(__name__)

Method = Literal["fairgrad", "ls", "si", "rlw", "dwa", "mgda", "pcgrad"]
METHODS: Tuple[str, ...] = ("fairgrad", "ls", "si", "rlw", "dwa", "mgda", "pcgrad")

FEASIBILITY_SLACK = 1e-8
DEFAULT_DWA_TEMPERATURE = 2.0


@dataclass(frozen=True)
class AggregationResult:
    direction: Direction
    weights: np.ndarray
    converged: bool = True
    feasible: bool = True
    report: Optional[SolverReport] = None


@dataclass
class AggregatorState:
    """한 실행이 소유하는 기준선 상태 (DWA 손실 이력, RLW/PCGrad 난수)"""

    method: str
    temperature: float = DEFAULT_DWA_TEMPERATURE
    loss_history: Tuple[np.ndarray, ...] = field(default_factory=tuple)
    rng: Optional[np.random.Generator] = None


@dataclass(frozen=True)
class MinNormResult:
    weights: np.ndarray
    norm: float
    iterations: int
    converged: bool


def _entries(G) -> np.ndarray:
    return G.entries if isinstance(G, GradientMatrix) else GradientMatrix(G).entries


def _two_point_step(uu: float, uv: float, vv: float) -> float:
    """min_γ∈[0,1] ‖(1−γ)u + γv‖² 의 해"""
    denom = uu - 2.0 * uv + vv
    if denom <= 0:
        return 0.0
    return float(np.clip((uu - uv) / denom, 0.0, 1.0))


def min_norm_weights(gram, max_iter: int = None, tol: float = None) -> MinNormResult:
    """
    확률 심플렉스 위에서 ‖Gw‖² 최소화 (Frank-Wolfe).

    i* = argmin_i g_iᵀ(Gw) (동률이면 낮은 인덱스), w 와 e_i* 사이는 두 점 min-norm 공식으로
    정확한 선탐색. duality gap ≤ tol 이면 종료.
    """
    M = gram.entries if isinstance(gram, GramMatrix) else np.asarray(gram, dtype=np.float64)
    k = M.shape[0]
    max_iter = settings.fw_max_iter if max_iter is None else max_iter
    tol = settings.fw_tol if tol is None else tol

    w = np.full(k, 1.0 / k)
    Mw = M @ w
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        i = int(np.argmin(Mw))
        gap = float(w @ Mw - Mw[i])
        if gap <= tol:
            converged = True
            break
        gamma = _two_point_step(float(w @ Mw), float(Mw[i]), float(M[i, i]))
        if gamma == 0.0:
            converged = True
            break
        w = (1.0 - gamma) * w
        w[i] += gamma
        Mw = (1.0 - gamma) * Mw + gamma * M[:, i]

    w = w / np.sum(w)
    norm = float(np.sqrt(max(float(w @ M @ w), 0.0)))
    return MinNormResult(weights=w, norm=norm, iterations=iterations, converged=converged)


def aggregate_fairgrad(
    G,
    alpha: float,
    config=None,
    *,
    warm_start: Optional[np.ndarray] = None,
) -> AggregationResult:
    """FairGrad: 가중치 방정식을 풀고 d = Gw"""
    entries = _entries(G)
    gram = build_gram(GradientMatrix(entries))
    mode = getattr(config, "solver_mode", None) or "least_squares"

    if mode == "sgd_inner":
        report = solve_weights_sgd(
            gram,
            alpha,
            inner_lr=getattr(config, "inner_lr", 0.1),
            epochs=getattr(config, "inner_epochs", 20),
            w0=warm_start,
            tol=getattr(config, "solver_tol", None),
            w_min=getattr(config, "w_min", None),
            w_max=getattr(config, "w_max", None),
        )
    else:
        report = solve_weights(gram, alpha, config, w0=warm_start)

    w = report.weights.weights
    d = entries @ w
    gains = entries.T @ d
    feasible = bool(np.all(gains >= -FEASIBILITY_SLACK))
    if report.converged and not feasible:
        logger.warning(f"⚠️ 수렴했지만 g_iᵀd < 0 인 태스크가 있습니다: min={float(np.min(gains)):.3e}")

    return AggregationResult(
        direction=Direction(d),
        weights=w,
        converged=report.converged,
        feasible=feasible,
        report=report,
    )


def aggregate_ls(G) -> Direction:
    """선형 스칼라화: d = Σ g_i"""
    return Direction(np.sum(_entries(G), axis=1))


def aggregate_si(losses, G) -> Direction:
    """로그 손실 합: d = Σ g_i / l_i"""
    losses = np.asarray(losses, dtype=np.float64)
    if np.any(losses <= 0):
        raise DomainError("SI 는 양수 손실이 필요합니다")
    return Direction(_entries(G) @ (1.0 / losses))


def rlw_weights(task_count: int, rng: np.random.Generator) -> np.ndarray:
    """표준정규 logits 의 softmax"""
    return softmax(rng.standard_normal(task_count))


def aggregate_rlw(G, rng: np.random.Generator) -> Direction:
    entries = _entries(G)
    return Direction(entries @ rlw_weights(entries.shape[1], rng))


def dwa_weights(state: AggregatorState, task_count: int) -> np.ndarray:
    if len(state.loss_history) < 2:
        return np.ones(task_count)
    previous, before = state.loss_history[-1], state.loss_history[-2]
    if np.any(before == 0):
        raise DomainError("DWA: 이전 손실에 0 이 있습니다")
    ratios = previous / before
    return task_count * softmax(ratios / state.temperature)


def aggregate_dwa(losses, G, state: AggregatorState) -> Direction:
    """DWA: w = K·softmax(r/T), r_i = l_i(t−1)/l_i(t−2); 이력 2개 미만이면 균등"""
    entries = _entries(G)
    weights = dwa_weights(state, entries.shape[1])
    state.loss_history = (state.loss_history + (np.array(losses, dtype=np.float64),))[-2:]
    return Direction(entries @ weights)


def aggregate_mgda(G) -> Tuple[Direction, np.ndarray]:
    """min-norm 원소: 심플렉스 가중치와 d = Gw"""
    direction, weights, _ = _mgda(G)
    return direction, weights


def _mgda(G) -> Tuple[Direction, np.ndarray, bool]:
    entries = _entries(G)
    result = min_norm_weights(build_gram(GradientMatrix(entries)))
    if not result.converged:
        logger.warning(f"⚠️ Frank-Wolfe 반복 한도 도달 ({result.iterations}회)")
    return Direction(entries @ result.weights), result.weights, result.converged


def aggregate_pcgrad(G, rng: np.random.Generator, reduce: str = "mean") -> Direction:
    """
    PCGrad: 태스크 i 마다 다른 태스크 j 를 섞은 순서로 순회하며,
    g̃_iᵀg_j < 0 이면 g̃_i 를 g_j 의 법평면으로 사영한다.
    """
    if reduce not in ("mean", "sum"):
        raise InvalidInputError(f"pcgrad reduce={reduce}: mean 또는 sum")
    entries = _entries(G)
    k = entries.shape[1]
    sq_norms = np.sum(entries * entries, axis=0)
    projected = entries.copy()

    for i in range(k):
        g = entries[:, i].copy()
        others = np.array([j for j in range(k) if j != i], dtype=int)
        for j in rng.permutation(others):
            if sq_norms[j] <= 0:
                continue
            dot = float(g @ entries[:, j])
            if dot < 0:
                g -= dot / sq_norms[j] * entries[:, j]
        projected[:, i] = g

    total = np.sum(projected, axis=1)
    return Direction(total / k if reduce == "mean" else total)


def aggregate(
    method: str,
    losses: np.ndarray,
    G: GradientMatrix,
    state: AggregatorState,
    config=None,
    *,
    alpha: float = 0.0,
    warm_start: Optional[np.ndarray] = None,
) -> AggregationResult:
    """설정된 방법으로 방향 계산 (optimizer 루프용 단일 진입점)"""
    k = G.task_count
    if method == "fairgrad":
        return aggregate_fairgrad(G, alpha, config, warm_start=warm_start)
    if method == "ls":
        return AggregationResult(aggregate_ls(G), np.ones(k))
    if method == "si":
        return AggregationResult(aggregate_si(losses, G), 1.0 / np.asarray(losses, dtype=np.float64))
    if method == "rlw":
        weights = rlw_weights(k, state.rng)
        return AggregationResult(Direction(G.entries @ weights), weights)
    if method == "dwa":
        weights = dwa_weights(state, k)
        direction = aggregate_dwa(losses, G, state)
        return AggregationResult(direction, weights)
    if method == "mgda":
        direction, weights, converged = _mgda(G)
        return AggregationResult(direction, weights, converged=converged)
    if method == "pcgrad":
        reduce = getattr(config, "pcgrad_reduce", "mean")
        return AggregationResult(aggregate_pcgrad(G, state.rng, reduce), np.ones(k))
    raise InvalidInputError(f"알 수 없는 방법: {method}")
