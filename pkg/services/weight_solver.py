"""
FairGrad 가중치 방정식 GᵀGw = w^{-1/α} 풀이.

f(w) = GᵀGw − w^{-1/α} 를 경계 제약 [w_min, w_max] 의 비선형 최소제곱으로 푼다.
f 는 강볼록 포텐셜 φ(w) = ½wᵀGᵀGw − Σ ψ_α(w_i) 의 그래디언트이므로
야코비안 J = GᵀG + (1/α)·diag(w^{-1/α-1}) 는 대칭 양의 정부호이고,
해가 존재하면 유일하다.
"""

from dataclasses import dataclass
from typing import Literal, Optional
import logging

import numpy as np

from config.settings import settings
from services.core_types import GramMatrix, WeightVector
from services.errors import DomainError, PreconditionError, UnsupportedError

logger = logging.getLogger(__name__)

SolverMode = Literal["least_squares", "sgd_inner", "closed_form"]

LM_LAMBDA_INIT = 1e-3
LM_LAMBDA_CEIL = 1e12
LM_LAMBDA_FLOOR = 1e-12
LM_POLISH_FACTOR = 1e-3
LM_XTOL = 1e-10


@dataclass(frozen=True)
class SolverReport:
    weights: WeightVector
    residual_norm: float
    iterations: int
    converged: bool
    mode: SolverMode


def _gram_array(gram) -> np.ndarray:
    return gram.entries if isinstance(gram, GramMatrix) else np.asarray(gram, dtype=np.float64)


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if alpha < 0 or not np.isfinite(alpha):
        raise DomainError(f"alpha={alpha}: 0 이상의 유한한 값이어야 합니다")
    return alpha


def default_tolerance(task_count: int) -> float:
    return settings.solver_tol_per_task * task_count


def residual(gram, w, alpha: float, w_min: float = None) -> np.ndarray:
    """f(w) = GᵀGw − w^{-1/α}"""
    alpha = _check_alpha(alpha)
    if alpha == 0:
        raise UnsupportedError("alpha=0 은 잔차가 정의되지 않습니다 (가중치는 모두 1)")
    w_min = settings.w_min if w_min is None else w_min
    w = np.asarray(w.weights if isinstance(w, WeightVector) else w, dtype=np.float64)
    if np.any(w < w_min):
        raise DomainError(f"가중치가 하한 w_min={w_min} 보다 작습니다")
    return _gram_array(gram) @ w - w ** (-1.0 / alpha)


def residual_jacobian(gram, w: np.ndarray, alpha: float) -> np.ndarray:
    """J = GᵀG + (1/α)·diag(w^{-1/α-1})"""
    return _gram_array(gram) + np.diag(w ** (-1.0 / alpha - 1.0) / alpha)


def weight_potential(gram, w, alpha: float) -> float:
    """그래디언트가 f(w) 인 볼록 포텐셜 φ(w)"""
    alpha = _check_alpha(alpha)
    if alpha == 0:
        raise UnsupportedError("alpha=0 은 포텐셜이 정의되지 않습니다")
    w = np.asarray(w.weights if isinstance(w, WeightVector) else w, dtype=np.float64)
    quadratic = 0.5 * float(w @ _gram_array(gram) @ w)
    if alpha == 1.0:
        return quadratic - float(np.sum(np.log(w)))
    exponent = 1.0 - 1.0 / alpha
    return quadratic - float(np.sum(w ** exponent) / exponent)


def solve_diagonal(gram, alpha: float, w_min: float = None) -> WeightVector:
    """대각 GᵀG 의 닫힌 해 w_i = (GᵀG)_ii^{-α/(α+1)}"""
    alpha = _check_alpha(alpha)
    if alpha == 0:
        raise UnsupportedError("alpha=0 은 닫힌 해 대신 모두 1 인 가중치를 사용합니다")
    gram = gram if isinstance(gram, GramMatrix) else GramMatrix(gram)
    if not gram.is_diagonal():
        raise PreconditionError("solve_diagonal: 대각 행렬이 아닙니다")
    diag = np.diag(gram.entries)
    if np.any(diag <= 0):
        raise PreconditionError("solve_diagonal: 대각 원소가 양수여야 합니다")
    w = diag ** (-alpha / (alpha + 1.0))
    w_min = settings.w_min if w_min is None else w_min
    return WeightVector(w, w_min=min(w_min, float(np.min(w))))


def _ones_report(task_count: int, w_min: float) -> SolverReport:
    return SolverReport(
        weights=WeightVector(np.ones(task_count), w_min=min(w_min, 1.0)),
        residual_norm=0.0,
        iterations=0,
        converged=True,
        mode="closed_form",
    )


def _resolve(config, name: str, explicit, fallback):
    if explicit is not None:
        return explicit
    value = getattr(config, name, None) if config is not None else None
    return fallback if value is None else value


def solve_weights(
    gram,
    alpha: float,
    config=None,
    *,
    w0: Optional[np.ndarray] = None,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    w_min: Optional[float] = None,
    w_max: Optional[float] = None,
) -> SolverReport:
    """
    Levenberg-Marquardt (감쇠 Gauss-Newton) 로 가중치 방정식을 푼다.

    λ 는 1e-3 에서 시작해 거절 시 ×10, 수락 시 ÷10. 스텝 후 [w_min, w_max] 로 클램프.
    ‖f‖ ≤ tol 이면 수렴. 수렴하지 않아도 예외 없이 최선의 w 를 보고한다.
    """
    alpha = _check_alpha(alpha)
    gram_arr = _gram_array(gram)
    k = gram_arr.shape[0]
    w_min = _resolve(config, "w_min", w_min, settings.w_min)
    w_max = _resolve(config, "w_max", w_max, settings.w_max)
    if alpha == 0:
        return _ones_report(k, w_min)

    tol = _resolve(config, "solver_tol", tol, default_tolerance(k))
    max_iter = _resolve(config, "solver_max_iter", max_iter, settings.solver_max_iter)

    w = np.ones(k) if w0 is None else np.asarray(w0, dtype=np.float64).copy()
    w = np.clip(w, w_min, w_max)
    f = gram_arr @ w - w ** (-1.0 / alpha)
    cost = float(f @ f)
    lam = LM_LAMBDA_INIT
    iterations = 0

    while iterations < max_iter:
        if np.sqrt(cost) <= tol * LM_POLISH_FACTOR:
            break
        iterations += 1
        J = residual_jacobian(gram_arr, w, alpha)
        A = J.T @ J
        g = J.T @ f
        damping = lam * np.maximum(np.diag(A), np.finfo(np.float64).tiny)
        try:
            step = np.linalg.solve(A + np.diag(damping), -g)
        except np.linalg.LinAlgError:
            lam *= 10.0
            continue

        candidate = np.clip(w + step, w_min, w_max)
        f_new = gram_arr @ candidate - candidate ** (-1.0 / alpha)
        cost_new = float(f_new @ f_new)

        if cost_new < cost:
            rel_step = float(np.linalg.norm(candidate - w) / max(np.linalg.norm(w), w_min))
            w, f, cost = candidate, f_new, cost_new
            lam = max(lam / 10.0, LM_LAMBDA_FLOOR)
            if np.sqrt(cost) <= tol and rel_step <= LM_XTOL:
                break
        else:
            # 이미 허용 오차 안이면 더 줄일 수 없는 상태
            if np.sqrt(cost) <= tol:
                break
            lam *= 10.0
            if lam > LM_LAMBDA_CEIL:
                break

    residual_norm = float(np.sqrt(cost))
    converged = residual_norm <= tol
    if not converged:
        logger.debug(f"가중치 솔버 미수렴: ‖f‖={residual_norm:.3e}, 반복 {iterations}")

    return SolverReport(
        weights=WeightVector(w, w_min=w_min),
        residual_norm=residual_norm,
        iterations=iterations,
        converged=converged,
        mode="least_squares",
    )


def solve_weights_sgd(
    gram,
    alpha: float,
    inner_lr: float = 0.1,
    epochs: int = 20,
    *,
    w0: Optional[np.ndarray] = None,
    tol: Optional[float] = None,
    w_min: Optional[float] = None,
    w_max: Optional[float] = None,
) -> SolverReport:
    """
    ½‖f(w)‖² 에 대한 1차 하강 근사 풀이 (RL 처럼 LM 이 비싼 경우용).

    스텝은 inner_lr·Jᵀf / ‖J‖₂² 로, 국소 Gauss-Newton 곡률로 정규화한다.
    각 스텝 후 [w_min, w_max] 로 사영. 수렴 보장은 없고 잔차를 그대로 보고한다.
    """
    alpha = _check_alpha(alpha)
    if inner_lr <= 0:
        raise DomainError("inner_lr 은 양수여야 합니다")
    if epochs < 1:
        raise DomainError("epochs 는 1 이상이어야 합니다")
    gram_arr = _gram_array(gram)
    k = gram_arr.shape[0]
    w_min = settings.w_min if w_min is None else w_min
    w_max = settings.w_max if w_max is None else w_max
    if alpha == 0:
        return _ones_report(k, w_min)
    tol = default_tolerance(k) if tol is None else tol

    w = np.ones(k) if w0 is None else np.asarray(w0, dtype=np.float64).copy()
    w = np.clip(w, w_min, w_max)
    for _ in range(epochs):
        f = gram_arr @ w - w ** (-1.0 / alpha)
        J = residual_jacobian(gram_arr, w, alpha)
        curvature = float(np.max(np.linalg.eigvalsh(J))) ** 2
        if curvature <= 0:
            break
        w = np.clip(w - inner_lr * (J.T @ f) / curvature, w_min, w_max)

    residual_norm = float(np.linalg.norm(gram_arr @ w - w ** (-1.0 / alpha)))
    return SolverReport(
        weights=WeightVector(w, w_min=w_min),
        residual_norm=residual_norm,
        iterations=epochs,
        converged=residual_norm <= tol,
        mode="sgd_inner",
    )
