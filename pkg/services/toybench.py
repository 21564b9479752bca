"""
데스크 규모 번들 문제.

- 2-태스크 토이 문제 (해석적 그래디언트)
- 인증된 평활도 L 을 갖는 랜덤 2차 다중 태스크 생성기
- 중앙 유한차분 그래디언트 검증

부분미분 규약: max(z,0) 의 z=0 미분은 0, |z| 의 z=0 미분은 0,
max(|z|, 5e-6) 는 |z| 쪽이 활성일 때만 sign(z) 로 미분하고 클램프가 활성이면 0.
"""

from dataclasses import dataclass
from typing import Dict, Optional, Tuple
import logging

import numpy as np

from services.core_types import GradientMatrix
from services.errors import InvalidInputError

logger = logging.getLogger(__name__)

LOG_CLAMP = 0.000005
L1_SCALE = 0.1

START_PRESETS: Dict[str, Tuple[float, float]] = {
    "p1": (-8.5, 7.5),
    "p2": (0.0, 0.0),
    "p3": (9.0, 9.0),
    "p4": (-7.5, -0.5),
    "p5": (9.0, -1.0),
}


def _toy_parts(x: np.ndarray):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (2,) or not np.all(np.isfinite(x)):
        raise InvalidInputError(f"토이 문제는 유한한 2차원 점이 필요합니다: {x}")
    x1, x2 = x
    t_half = np.tanh(0.5 * x2)
    t_full = np.tanh(x2)
    z1 = 0.5 * (-x1 - 7.0) - np.tanh(-x2)
    z2 = 0.5 * (-x1 + 3.0) - np.tanh(-x2) + 2.0
    return x1, x2, t_half, t_full, z1, z2


def _clamped_log(z: float) -> Tuple[float, float]:
    """log(max(|z|, c)) + 6 과 dz 에 대한 미분"""
    magnitude = abs(z)
    if magnitude > LOG_CLAMP:
        return np.log(magnitude) + 6.0, 1.0 / z
    return np.log(LOG_CLAMP) + 6.0, 0.0


def toy_losses(x) -> np.ndarray:
    x1, x2, t_half, _, z1, z2 = _toy_parts(x)
    f1 = max(t_half, 0.0)
    f2 = max(-t_half, 0.0)
    g1, _ = _clamped_log(z1)
    g2, _ = _clamped_log(z2)
    h1 = ((-x1 + 7.0) ** 2 + 0.1 * (-x1 - 8.0) ** 2) / 10.0 - 20.0
    h2 = ((-x1 - 7.0) ** 2 + 0.1 * (-x1 - 8.0) ** 2) / 10.0 - 20.0
    loss1 = L1_SCALE * (f1 * g1 + f2 * h1)
    loss2 = f1 * g2 + f2 * h2
    return np.array([loss1, loss2])


def toy_gradients(x) -> GradientMatrix:
    x1, x2, t_half, t_full, z1, z2 = _toy_parts(x)

    sech_half = 1.0 - t_half ** 2
    f1 = max(t_half, 0.0)
    f2 = max(-t_half, 0.0)
    df1 = np.array([0.0, 0.5 * sech_half if t_half > 0 else 0.0])
    df2 = np.array([0.0, -0.5 * sech_half if t_half < 0 else 0.0])

    # dz/dx 는 z1, z2 공통
    dz = np.array([-0.5, 1.0 - t_full ** 2])
    g1, dlog1 = _clamped_log(z1)
    g2, dlog2 = _clamped_log(z2)
    dg1 = dlog1 * dz
    dg2 = dlog2 * dz

    h1 = ((-x1 + 7.0) ** 2 + 0.1 * (-x1 - 8.0) ** 2) / 10.0 - 20.0
    h2 = ((-x1 - 7.0) ** 2 + 0.1 * (-x1 - 8.0) ** 2) / 10.0 - 20.0
    dh1 = np.array([(2.0 * (x1 - 7.0) + 0.2 * (x1 + 8.0)) / 10.0, 0.0])
    dh2 = np.array([(2.0 * (x1 + 7.0) + 0.2 * (x1 + 8.0)) / 10.0, 0.0])

    grad1 = L1_SCALE * (df1 * g1 + f1 * dg1 + df2 * h1 + f2 * dh1)
    grad2 = df1 * g2 + f1 * dg2 + df2 * h2 + f2 * dh2
    return GradientMatrix(np.column_stack([grad1, grad2]))


def toy_smooth_margin(x) -> float:
    """비평활 지점(x2=0, z=0, 클램프 경계)까지의 최소 거리 지표"""
    _, x2, _, _, z1, z2 = _toy_parts(x)
    return float(min(
        abs(x2),
        abs(z1), abs(abs(z1) - LOG_CLAMP),
        abs(z2), abs(abs(z2) - LOG_CLAMP),
    ))


class ToyProblem:
    """2-태스크 토이 문제 (m=2, K=2)"""

    dimension = 2
    task_count = 2
    name = "toy"

    def losses(self, point) -> np.ndarray:
        return toy_losses(point)

    def gradients(self, point) -> GradientMatrix:
        return toy_gradients(point)


@dataclass(frozen=True)
class QuadraticProblem:
    """l_i(θ) = ½(θ−c_i)ᵀA_i(θ−c_i) + b_i"""

    matrices: np.ndarray   # (K, m, m)
    centers: np.ndarray    # (K, m)
    offsets: np.ndarray    # (K,)
    smoothness: float
    name: str = "quadratic"

    def __post_init__(self):
        for attr in ("matrices", "centers", "offsets"):
            arr = np.array(getattr(self, attr), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, attr, arr)
        k, m, m2 = self.matrices.shape
        if m != m2 or self.centers.shape != (k, m) or self.offsets.shape != (k,):
            raise InvalidInputError("QuadraticProblem: 형상이 일치하지 않습니다")

    @property
    def dimension(self) -> int:
        return self.matrices.shape[1]

    @property
    def task_count(self) -> int:
        return self.matrices.shape[0]

    def losses(self, point) -> np.ndarray:
        diff = np.asarray(point, dtype=np.float64)[None, :] - self.centers
        quad = np.einsum("ki,kij,kj->k", diff, self.matrices, diff)
        return 0.5 * quad + self.offsets

    def gradients(self, point) -> GradientMatrix:
        diff = np.asarray(point, dtype=np.float64)[None, :] - self.centers
        return GradientMatrix(np.einsum("kij,kj->ik", self.matrices, diff))


def quadratic_from(matrices, centers, offsets) -> QuadraticProblem:
    """주어진 계수로 문제 생성, L = max_i λ_max(A_i)"""
    matrices = np.asarray(matrices, dtype=np.float64)
    smoothness = float(max(np.max(np.linalg.eigvalsh(a)) for a in matrices))
    return QuadraticProblem(matrices, centers, offsets, smoothness)


def quadratic_problem(
    task_count: int,
    dimension: int,
    rng: np.random.Generator,
    condition_bound: float = 10.0,
) -> QuadraticProblem:
    """고유값이 [0.1, condition_bound] 인 랜덤 SPD A_i 와 b_i ∈ [1, 2]"""
    if task_count < 1 or dimension < 1:
        raise InvalidInputError("K, m 은 1 이상이어야 합니다")
    if condition_bound <= 0.1:
        raise InvalidInputError("condition_bound 는 0.1 보다 커야 합니다")

    matrices = np.empty((task_count, dimension, dimension))
    for i in range(task_count):
        q, _ = np.linalg.qr(rng.standard_normal((dimension, dimension)))
        eigenvalues = rng.uniform(0.1, condition_bound, size=dimension)
        a = (q * eigenvalues) @ q.T
        matrices[i] = 0.5 * (a + a.T)
    centers = rng.standard_normal((task_count, dimension))
    offsets = rng.uniform(1.0, 2.0, size=task_count)
    return quadratic_from(matrices, centers, offsets)


def finite_difference_gradients(problem, point, step: float = 1e-6) -> np.ndarray:
    """중앙 차분 m×K 그래디언트"""
    point = np.asarray(point, dtype=np.float64)
    columns = np.empty((point.size, problem.task_count))
    for j in range(point.size):
        shift = np.zeros_like(point)
        shift[j] = step
        plus = problem.losses(point + shift)
        minus = problem.losses(point - shift)
        columns[j] = (plus - minus) / (2.0 * step)
    return columns


def gradient_relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """max|A−F| / max(max|A|, max|F|, 1)"""
    scale = max(float(np.max(np.abs(analytic))), float(np.max(np.abs(numeric))), 1.0)
    return float(np.max(np.abs(analytic - numeric))) / scale


def sample_check_points(
    problem,
    rng: np.random.Generator,
    samples: int,
    box: float = 10.0,
    margin: float = 1e-3,
) -> np.ndarray:
    """검증용 점 샘플링 - 토이 문제는 비평활 지점에서 margin 이상 떨어진 점만"""
    points = []
    while len(points) < samples:
        candidate = rng.uniform(-box, box, size=problem.dimension)
        if isinstance(problem, ToyProblem) and toy_smooth_margin(candidate) < margin:
            continue
        points.append(candidate)
    return np.array(points)


def max_gradient_error(problem, points, step: float = 1e-6) -> float:
    errors = [
        gradient_relative_error(problem.gradients(p).entries, finite_difference_gradients(problem, p, step))
        for p in points
    ]
    return max(errors) if errors else 0.0


def resolve_start(start: Optional[str], x0: Optional[Tuple[float, ...]]) -> np.ndarray:
    if x0 is not None:
        return np.asarray(x0, dtype=np.float64)
    if start is None:
        raise InvalidInputError("start 또는 x0 가 필요합니다")
    if start not in START_PRESETS:
        raise InvalidInputError(f"알 수 없는 시작점 {start} (가능: {', '.join(START_PRESETS)})")
    return np.array(START_PRESETS[start], dtype=np.float64)
