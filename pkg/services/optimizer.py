"""
FairGrad 외부 루프.

매 스텝: G(θ_t) 계산 → 방향 집계 → 스텝 크기 선택 (fixed / theoretical / adaptive_moment)
→ θ 갱신 → TrajectoryRecord 기록. 정상성 척도가 허용 오차 이하가 되면 조기 종료.
"""

from dataclasses import dataclass
from typing import List, Literal, Optional, Tuple
import logging
import time

import numpy as np

from services.aggregators import AggregatorState, aggregate
from services.core_types import GradientMatrix, TrajectoryRecord, WeightVector, build_gram, make_rng
from services.errors import DomainError, NumericalDivergenceError, UnsupportedError
from services.fairness import transform_gradients, transform_losses
from services.pareto import smallest_singular_value, stationarity_measure
from services.toybench import resolve_start

logger = logging.getLogger(__name__)

Termination = Literal["stationary", "budget_exhausted", "solver_failure"]


def theoretical_step_size(w, alpha: float, L: float, K: int) -> float:
    """η = Σ w_i^{−1/α} / (L·K·Σ w_i^{1−1/α})"""
    if alpha == 0:
        raise UnsupportedError("theoretical 스텝은 alpha > 0 이 필요합니다 (alpha=0 은 fixed 사용)")
    if alpha < 0:
        raise DomainError(f"alpha={alpha}: 양수여야 합니다")
    if L <= 0 or K < 1:
        raise DomainError(f"L={L}, K={K}: L > 0, K ≥ 1 이어야 합니다")
    w = np.asarray(w.weights if isinstance(w, WeightVector) else w, dtype=np.float64)
    if np.any(w <= 0):
        raise DomainError("가중치는 양수여야 합니다")
    numerator = float(np.sum(w ** (-1.0 / alpha)))
    denominator = L * K * float(np.sum(w ** (1.0 - 1.0 / alpha)))
    return numerator / denominator


def descent_step_bound(gains: np.ndarray, d: np.ndarray, L: float, K: int) -> float:
    """
    Σ g_iᵀd / (L·K·‖d‖²).

    가중치가 정확한 해이면 theoretical_step_size 와 같은 값이고, 이 값 이하의 스텝은
    평균 손실을 늘리지 않는다. 솔버가 덜 수렴한 스텝의 상한으로 쓴다.
    """
    dd = float(d @ d)
    if dd <= 0:
        return float("inf")
    return max(float(np.sum(gains)), 0.0) / (L * K * dd)


@dataclass(frozen=True)
class AdaptiveMomentState:
    """1차/2차 모멘트 (m, v) 와 스텝 카운터 t"""

    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, dimension: int) -> "AdaptiveMomentState":
        return cls(np.zeros(dimension), np.zeros(dimension), 0)


def adaptive_moment_step(
    state: AdaptiveMomentState,
    d,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> Tuple[np.ndarray, AdaptiveMomentState]:
    """편향 보정 Adam 업데이트 lr·m̂/(√v̂+eps) 와 갱신된 상태"""
    d = np.asarray(d, dtype=np.float64)
    t = state.t + 1
    m = beta1 * state.m + (1.0 - beta1) * d
    v = beta2 * state.v + (1.0 - beta2) * d * d
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    update = lr * m_hat / (np.sqrt(v_hat) + eps)
    return update, AdaptiveMomentState(m, v, t)


@dataclass
class RunResult:
    final_point: np.ndarray
    trajectory: List[TrajectoryRecord]
    termination: Termination
    wall_time: float
    solver_failures: int = 0
    smoothness: Optional[float] = None

    @property
    def final_record(self) -> TrajectoryRecord:
        return self.trajectory[-1]


def initial_point(problem, config) -> np.ndarray:
    if config.x0 is not None or config.start is not None:
        point = resolve_start(config.start, config.x0)
    else:
        point = np.zeros(problem.dimension)
    if point.shape != (problem.dimension,):
        raise DomainError(f"시작점 차원 {point.shape[0]} ≠ 문제 차원 {problem.dimension}")
    return point


def _check_finite(step: int, point, losses, G, trajectory) -> None:
    if not np.all(np.isfinite(losses)) or not np.all(np.isfinite(G)):
        raise NumericalDivergenceError(
            f"스텝 {step} 에서 유한하지 않은 손실/그래디언트",
            step=step,
            point=np.array(point),
            trajectory=list(trajectory),
        )


def run(problem, config, smoothness: Optional[float] = None) -> RunResult:
    """
    설정대로 최적화를 실행한다.

    smoothness 는 theoretical 스텝에 쓰는 L. 주어지지 않으면 config.smoothness_L,
    그것도 없으면 문제의 smoothness 속성을 쓴다.
    """
    rng = make_rng(config.seed)
    state = AggregatorState(method=config.method, temperature=config.dwa_temperature, rng=rng)
    theta = initial_point(problem, config)
    k = problem.task_count

    L = smoothness or config.smoothness_L or getattr(problem, "smoothness", None)
    if config.step_rule == "theoretical" and not L:
        raise DomainError("theoretical 스텝에는 smoothness_L 이 필요합니다")

    moments = AdaptiveMomentState.zeros(problem.dimension)
    warm_start: Optional[np.ndarray] = None
    trajectory: List[TrajectoryRecord] = []
    solver_failures = 0
    termination: Termination = "budget_exhausted"
    measure = float("inf")
    started = time.perf_counter()

    logger.info(
        f"🚀 실행 시작: method={config.method}, alpha={config.alpha}, step_rule={config.step_rule}, "
        f"max_steps={config.max_steps}, seed={config.seed}"
    )

    for step in range(config.max_steps):
        losses = np.asarray(problem.losses(theta), dtype=np.float64)
        raw = problem.gradients(theta)
        entries = raw.entries if isinstance(raw, GradientMatrix) else np.asarray(raw, dtype=np.float64)
        _check_finite(step, theta, losses, entries, trajectory)
        G = GradientMatrix(entries)

        if step % config.check_every == 0:
            measure = stationarity_measure(G)
        sigma_min = smallest_singular_value(build_gram(G))

        agg_losses, agg_G = losses, G
        if config.fair_loss_alpha is not None:
            agg_losses = transform_losses(losses, config.fair_loss_alpha, config.loss_floor)
            agg_G = transform_gradients(losses, G, config.fair_loss_alpha, config.loss_floor)

        result = aggregate(
            config.method, agg_losses, agg_G, state, config,
            alpha=config.alpha, warm_start=warm_start,
        )
        if config.method == "fairgrad":
            # 미수렴이어도 마지막 반복값에서 이어 푼다
            warm_start = result.weights
            if not result.converged:
                solver_failures += 1

        d = result.direction.vector
        gains = entries.T @ d
        min_gain = float(np.min(gains))

        if config.step_rule == "theoretical":
            eta = theoretical_step_size(result.weights, config.alpha, L, k)
            eta = min(eta, descent_step_bound(gains, d, L, k))
            update = eta * d
        elif config.step_rule == "adaptive_moment":
            eta = config.learning_rate
            update, moments = adaptive_moment_step(moments, d, eta)
        else:
            eta = config.learning_rate
            update = eta * d

        record = TrajectoryRecord(
            step=step,
            point=theta.copy(),
            losses=losses,
            weights=np.asarray(result.weights, dtype=np.float64),
            direction_norm=result.direction.norm,
            stationarity=measure,
            sigma_min=sigma_min,
            step_size=float(eta),
            min_gain=min_gain,
            total_gain=float(np.sum(gains)),
            solver_converged=result.converged,
        )
        trajectory.append(record)

        if step % config.check_every == 0 and measure <= config.stationarity_tol:
            termination = "stationary"
            break
        if config.strict_solver and not result.converged:
            logger.error(f"❌ 스텝 {step}: 가중치 솔버 미수렴 (strict_solver)")
            termination = "solver_failure"
            break

        theta = theta - update
        if not np.all(np.isfinite(theta)):
            raise NumericalDivergenceError(
                f"스텝 {step} 갱신 후 파라미터가 발산했습니다",
                step=step,
                point=np.array(theta),
                trajectory=list(trajectory),
            )
        if logger.isEnabledFor(logging.DEBUG):
            logger.debug(f"step={step} losses={losses} μ={measure:.3e} η={eta:.3e}")

    wall_time = time.perf_counter() - started
    if solver_failures:
        logger.warning(f"⚠️ 가중치 솔버 미수렴 스텝 {solver_failures}회")
    icon = "✅" if termination == "stationary" else "⚠️"
    logger.info(f"{icon} 실행 종료: {termination}, 스텝 {len(trajectory)}, {wall_time:.2f}s")

    return RunResult(
        final_point=theta,
        trajectory=trajectory,
        termination=termination,
        wall_time=wall_time,
        solver_failures=solver_failures,
        smoothness=L,
    )
