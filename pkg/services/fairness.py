"""
α-공정 효용과 손실 변환, 단일 링크 자원 할당 데모.

효용 U_α(x) = x^{1−α}/(1−α) (α=1 이면 ln x) 는 α 에 따라
선형(α=0) → 비례 공정(α→1) → 최소 지연(α=2) → max-min(α→∞) 공정성을 잇는다.
"""

from dataclasses import dataclass
from typing import Optional, Sequence
import logging

import numpy as np
from scipy.optimize import brentq

from services.core_types import GradientMatrix
from services.errors import DomainError, InvalidInputError, SolverFailureError

logger = logging.getLogger(__name__)

LOG_LIMIT_ALPHA = 1.0
DEFAULT_ALLOCATION_TOL = 1e-10


def _check_positive(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name}: 유한하지 않은 값")
    if np.any(arr <= 0):
        raise DomainError(f"{name}: 양수만 허용됩니다")
    return arr


def alpha_utility(x, alpha: float):
    """x^{1−α}/(1−α), α=1 에서는 ln x"""
    if alpha < 0:
        raise DomainError(f"alpha={alpha}: 0 이상이어야 합니다")
    arr = _check_positive(x, "x")
    if alpha == LOG_LIMIT_ALPHA:
        value = np.log(arr)
    else:
        value = arr ** (1.0 - alpha) / (1.0 - alpha)
    return float(value) if np.ndim(value) == 0 else value


def alpha_utility_shifted(x, alpha: float):
    """(x^{1−α}−1)/(1−α) - α→1 에서 ln x 로 연속"""
    if alpha < 0:
        raise DomainError(f"alpha={alpha}: 0 이상이어야 합니다")
    arr = _check_positive(x, "x")
    log_x = np.log(arr)
    if alpha == LOG_LIMIT_ALPHA:
        value = log_x
    else:
        # expm1 로 α≈1 근처의 상쇄 오차를 피한다
        value = np.expm1((1.0 - alpha) * log_x) / (1.0 - alpha)
    return float(value) if np.ndim(value) == 0 else value


def utility_gradient(x, alpha: float):
    """dU_α/dx = x^{−α}"""
    arr = _check_positive(x, "x")
    value = arr ** (-float(alpha))
    return float(value) if np.ndim(value) == 0 else value


def _fair_losses(losses, loss_floor: Optional[float]) -> np.ndarray:
    arr = np.asarray(losses, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("손실에 유한하지 않은 값이 있습니다")
    if np.any(arr <= 0):
        if loss_floor is None:
            raise DomainError(f"α-공정 손실 변환은 양수 손실이 필요합니다: {arr}")
        logger.warning(f"⚠️ 양수가 아닌 손실을 loss_floor={loss_floor} 로 클램프합니다: {arr}")
        arr = np.maximum(arr, loss_floor)
    return arr


def _check_transform_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not np.isfinite(alpha) or alpha > LOG_LIMIT_ALPHA:
        raise DomainError(f"손실 변환 alpha={alpha}: 1 미만 (또는 로그 극한 1) 이어야 합니다")
    return alpha


def transform_losses(losses, alpha: float, loss_floor: Optional[float] = None) -> np.ndarray:
    """l_i → l_i^{1−α}/(1−α) (α=1 이면 ln l_i). 각 l_i 에 대해 순증가"""
    alpha = _check_transform_alpha(alpha)
    arr = _fair_losses(losses, loss_floor)
    if alpha == LOG_LIMIT_ALPHA:
        return np.log(arr)
    return arr ** (1.0 - alpha) / (1.0 - alpha)


def transform_gradients(losses, G, alpha: float, loss_floor: Optional[float] = None) -> GradientMatrix:
    """열 i 를 l_i^{−α} 로 스케일 (연쇄 법칙)"""
    alpha = _check_transform_alpha(alpha)
    arr = _fair_losses(losses, loss_floor)
    entries = G.entries if isinstance(G, GradientMatrix) else np.asarray(G, dtype=np.float64)
    if entries.shape[1] != arr.shape[0]:
        raise InvalidInputError(f"손실 {arr.shape[0]}개와 그래디언트 열 {entries.shape[1]}개가 다릅니다")
    return GradientMatrix(entries * arr ** (-alpha))


@dataclass(frozen=True)
class AllocationProblem:
    """
    용량 c 인 단일 링크를 K 명이 나눠 쓰는 문제.

    가능 영역은 {x ≥ 0, Σx ≤ c, x ≤ caps}. weights a_i 가 주어지면
    효용은 a_i·U_α(x_i).
    """

    user_count: int
    capacity: float
    caps: Optional[Sequence[float]] = None
    weights: Optional[Sequence[float]] = None

    def __post_init__(self):
        if self.user_count < 1:
            raise InvalidInputError("user_count 는 1 이상이어야 합니다")
        if not self.capacity > 0 or not np.isfinite(self.capacity):
            raise DomainError(f"capacity={self.capacity}: 양의 유한값이어야 합니다")
        for name in ("caps", "weights"):
            values = getattr(self, name)
            if values is None:
                continue
            arr = np.array(values, dtype=np.float64)
            if arr.shape != (self.user_count,):
                raise InvalidInputError(f"{name}: 길이 {self.user_count} 가 필요합니다")
            if np.any(np.isnan(arr)) or np.any(arr <= 0):
                raise DomainError(f"{name}: 양수만 허용됩니다")
            if name == "weights" and not np.all(np.isfinite(arr)):
                raise DomainError("weights: 유한해야 합니다")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def cap_array(self) -> np.ndarray:
        return np.full(self.user_count, np.inf) if self.caps is None else np.asarray(self.caps)

    @property
    def weight_array(self) -> np.ndarray:
        return np.ones(self.user_count) if self.weights is None else np.asarray(self.weights)


@dataclass(frozen=True)
class AllocationResult:
    rates: np.ndarray
    price: float
    kkt_residual: float
    degenerate: bool = False


def _water_fill(levels: np.ndarray, caps: np.ndarray, capacity: float) -> np.ndarray:
    """Σ min(cap_i, b_i·u) = capacity 를 만족하는 수위 u 에서의 할당"""
    active = levels > 0
    rates = np.zeros_like(levels)
    if not np.any(active):
        return rates
    b = levels[active]
    c = caps[active]

    def excess(log_u: float) -> float:
        return float(np.sum(np.minimum(c, b * np.exp(log_u)))) - capacity

    lo = float(np.log(capacity / np.sum(b)))
    hi = float(np.max(np.log(np.where(np.isfinite(c), c, capacity) / b)))
    if excess(hi) <= 0:
        rates[active] = np.minimum(c, b * np.exp(hi))
        return rates

    # 캡이 하나도 걸리지 않으면 excess(lo) 는 반올림 오차 수준의 0
    if excess(lo) >= 0 or lo >= hi:
        log_u = lo
    else:
        try:
            log_u = brentq(excess, lo, hi, xtol=1e-14, maxiter=500)
        except (ValueError, RuntimeError) as e:
            raise SolverFailureError(f"할당 수위 탐색 실패 (bracket [{lo:.6g}, {hi:.6g}]): {e}") from e

    # 활성 집합이 정해지면 수위를 정확히 다시 계산
    u = np.exp(log_u)
    capped = b * u >= c
    free = ~capped
    if np.any(free):
        u = (capacity - float(np.sum(c[capped]))) / float(np.sum(b[free]))
    rates[active] = np.minimum(c, b * u)
    return rates


def _tiered_fill(weights: np.ndarray, caps: np.ndarray, capacity: float):
    """α→0⁺ 극한: 가중치가 큰 사용자 묶음부터 용량을 채우고, 묶음 안에서는 균등 분배"""
    rates = np.zeros_like(weights)
    remaining = capacity
    price = 0.0
    for tier in np.unique(weights)[::-1]:
        if remaining <= 0:
            break
        members = weights == tier
        price = float(tier)
        tier_caps = caps[members]
        if np.sum(tier_caps) <= remaining:
            rates[members] = tier_caps
            remaining -= float(np.sum(tier_caps))
            continue
        rates[members] = _water_fill(np.ones(int(np.sum(members))), tier_caps, remaining)
        remaining = 0.0
    return rates, price


def kkt_residual(prob: AllocationProblem, alpha: float, rates, price: Optional[float] = None) -> float:
    """
    할당의 KKT 잔차 (상대값의 최대).

    price 를 주지 않으면 캡에 걸리지 않은 사용자의 한계효용 평균으로 추정한다.
    """
    x = np.asarray(rates, dtype=np.float64)
    caps = prob.cap_array
    a = prob.weight_array
    with np.errstate(divide="ignore"):
        marginal = a * x ** (-float(alpha)) if alpha > 0 else a.copy()

    free = (x > 0) & (x < caps)
    at_cap = x >= caps
    at_zero = x <= 0
    if price is None:
        if np.any(free):
            price = float(np.mean(marginal[free]))
        elif np.any(at_cap):
            price = float(np.min(marginal[at_cap]))
        else:
            price = 0.0

    total = float(np.sum(x))
    residuals = [
        max(total - prob.capacity, 0.0) / prob.capacity,
        float(np.max(np.maximum(x - caps, 0.0) / np.where(np.isfinite(caps), caps, 1.0))),
        float(np.max(np.maximum(-x, 0.0))),
    ]
    if price > 0:
        residuals.append(abs(total - prob.capacity) / prob.capacity)
        if np.any(free):
            residuals.append(float(np.max(np.abs(marginal[free] - price))) / price)
        if np.any(at_cap):
            residuals.append(float(np.max(np.maximum(price - marginal[at_cap], 0.0))) / price)
        if np.any(at_zero):
            residuals.append(float(np.max(np.maximum(marginal[at_zero] - price, 0.0))) / price)
    elif np.any(free) and np.any(marginal[free] > 0):
        # 가격 0 인데 캡 아래 사용자가 있으면 용량이 남는다
        residuals.append(1.0)
    return float(max(residuals))


def solve_allocation(
    prob: AllocationProblem,
    alpha: float,
    tol: float = DEFAULT_ALLOCATION_TOL,
) -> AllocationResult:
    """
    Σ a_i·U_α(x_i) 를 단일 링크 용량과 개별 캡 아래에서 최대화.

    KKT 조건 a_i·x_i^{−α} = p (캡이 걸리면 x_i = cap_i) 를 로그 수위에 대한
    brentq 로 풀고, 활성 집합이 정해지면 수위를 닫힌 식으로 확정한다.
    Σ caps ≤ c 이면 캡에서의 퇴화 해를 돌려준다.
    """
    alpha = float(alpha)
    if alpha < 0 or not np.isfinite(alpha):
        raise DomainError(f"alpha={alpha}: 0 이상의 유한값이어야 합니다")
    caps = prob.cap_array
    weights = prob.weight_array

    if float(np.sum(caps)) <= prob.capacity:
        logger.warning(f"⚠️ Σcaps={float(np.sum(caps)):.6g} ≤ c={prob.capacity}: 캡에서의 퇴화 해")
        rates = caps.copy()
        return AllocationResult(rates=rates, price=0.0, kkt_residual=kkt_residual(prob, alpha, rates, 0.0), degenerate=True)

    if alpha == 0:
        rates, price = _tiered_fill(weights, caps, prob.capacity)
    else:
        log_a = np.log(weights)
        top = float(np.max(log_a))
        levels = np.exp((log_a - top) / alpha)
        rates = _water_fill(levels, caps, prob.capacity)
        free = rates < caps
        if np.any(free):
            i = int(np.argmax(free))
            price = float(weights[i] * rates[i] ** (-alpha))
        else:
            price = float(np.min(weights * rates ** (-alpha)))

    residual = kkt_residual(prob, alpha, rates, price)
    if residual > tol:
        logger.warning(f"⚠️ 할당 KKT 잔차 {residual:.3e} > tol {tol:.1e}")
    return AllocationResult(rates=rates, price=price, kkt_residual=residual)


def proportional_change(rates, reference) -> float:
    """Σ (x_i − x*_i)/x*_i"""
    x = np.asarray(rates, dtype=np.float64)
    ref = _check_positive(reference, "reference")
    return float(np.sum((x - ref) / ref))


def sample_feasible_rates(prob: AllocationProblem, rng: np.random.Generator, samples: int) -> np.ndarray:
    """Dirichlet 방향 × U(0,1)·c 로 가능 영역 안의 점을 뽑고 캡으로 자른다"""
    directions = rng.dirichlet(np.ones(prob.user_count), size=samples)
    scales = rng.uniform(0.0, 1.0, size=(samples, 1)) * prob.capacity
    return np.minimum(directions * scales, prob.cap_array)


def check_proportional_fairness(
    prob: AllocationProblem,
    x_star,
    samples: int,
    rng: np.random.Generator,
) -> float:
    """가능 영역 샘플 위에서 비례 변화 합의 최대값 (x* 가 비례 공정이면 ≤ 0)"""
    if samples < 1:
        raise InvalidInputError("samples 는 1 이상이어야 합니다")
    x_star = _check_positive(x_star, "x_star")
    points = sample_feasible_rates(prob, rng, samples)
    return float(np.max(np.sum((points - x_star) / x_star, axis=1)))
