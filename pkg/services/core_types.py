"""
모듈 간에 주고받는 수치 값 타입과 검증.

모든 값 타입은 생성 후 불변이며 (배열은 읽기 전용), 동시 실행 간에
공유해도 안전하다. 난수는 전역 RNG 없이 counter-based Philox 생성기를
명시적으로 넘겨서 사용한다.
"""

from dataclasses import dataclass, field
from typing import List, Protocol, runtime_checkable

import numpy as np

from services.errors import DomainError, InvalidInputError

DEFAULT_W_MIN = 1e-8
SYMMETRY_RTOL = 1e-12
PSD_TRACE_TOL = 1e-10


def _frozen(values, ndim: int, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != ndim:
        raise InvalidInputError(f"{name}: {ndim}차원 배열이 필요합니다 (받은 형상 {arr.shape})")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name}: 유한하지 않은 값이 포함되어 있습니다")
    arr.setflags(write=False)
    return arr


@runtime_checkable
class MultiObjectiveProblem(Protocol):
    """K개 손실과 m×K 그래디언트 행렬을 돌려주는 문제 계약"""

    dimension: int
    task_count: int

    def losses(self, point: np.ndarray) -> np.ndarray: ...

    def gradients(self, point: np.ndarray) -> "GradientMatrix": ...


@dataclass(frozen=True)
class GradientMatrix:
    """열 i 가 태스크 i 의 그래디언트 g_i 인 m×K 행렬"""

    entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "entries", _frozen(self.entries, 2, "GradientMatrix"))

    @property
    def dimension(self) -> int:
        return self.entries.shape[0]

    @property
    def task_count(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True)
class GramMatrix:
    """GᵀG (K×K, 대칭 PSD)"""

    entries: np.ndarray
    validate: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        arr = _frozen(self.entries, 2, "GramMatrix")
        if arr.shape[0] != arr.shape[1]:
            raise InvalidInputError(f"GramMatrix: 정방 행렬이 아닙니다 {arr.shape}")
        if self.validate:
            scale = max(float(np.max(np.abs(arr))), 1.0)
            if np.max(np.abs(arr - arr.T)) > SYMMETRY_RTOL * scale:
                raise InvalidInputError("GramMatrix: 대칭이 아닙니다")
            trace = float(np.trace(arr))
            if arr.size and np.min(np.linalg.eigvalsh(arr)) < -PSD_TRACE_TOL * max(trace, 1.0):
                raise InvalidInputError("GramMatrix: 양의 준정부호가 아닙니다")
        object.__setattr__(self, "entries", arr)

    @property
    def task_count(self) -> int:
        return self.entries.shape[0]

    def is_diagonal(self, rtol: float = 1e-12) -> bool:
        off = self.entries - np.diag(np.diag(self.entries))
        return bool(np.max(np.abs(off), initial=0.0) <= rtol * max(float(np.trace(self.entries)), 0.0))


@dataclass(frozen=True)
class WeightVector:
    """양의 태스크 가중치 w (모든 원소 ≥ w_min)"""

    weights: np.ndarray
    w_min: float = DEFAULT_W_MIN

    def __post_init__(self):
        arr = _frozen(self.weights, 1, "WeightVector")
        if np.any(arr < self.w_min):
            raise DomainError(f"WeightVector: w_min={self.w_min} 미만 원소가 있습니다")
        object.__setattr__(self, "weights", arr)

    def __len__(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class Direction:
    """업데이트 방향 d (길이 m)"""

    vector: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vector", _frozen(self.vector, 1, "Direction"))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))


@dataclass(frozen=True)
class TrajectoryRecord:
    """최적화 한 스텝의 기록"""

    step: int
    point: np.ndarray
    losses: np.ndarray
    weights: np.ndarray
    direction_norm: float
    stationarity: float
    sigma_min: float
    step_size: float
    min_gain: float = 0.0
    total_gain: float = 0.0
    solver_converged: bool = True


def build_gram(G: GradientMatrix) -> GramMatrix:
    """GᵀG 계산 - 결과는 정확히 대칭"""
    entries = np.asarray(G.entries if isinstance(G, GradientMatrix) else G, dtype=np.float64)
    if not np.all(np.isfinite(entries)):
        raise InvalidInputError("build_gram: 유한하지 않은 그래디언트")
    gram = entries.T @ entries
    gram = 0.5 * (gram + gram.T)
    return GramMatrix(gram, validate=False)


def make_rng(seed: int) -> np.random.Generator:
    """counter-based Philox 생성기"""
    return np.random.Generator(np.random.Philox(int(seed)))


def derive_seeds(seed: int, count: int) -> List[int]:
    """기준 seed 에서 서로 다른 64비트 자식 seed 생성"""
    children = np.random.SeedSequence(int(seed)).spawn(count)
    return [int(child.generate_state(1, dtype=np.uint64)[0]) for child in children]
