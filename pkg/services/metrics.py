"""
평가 지표 계산: 단일 태스크 기준 대비 Δm% 와 방법별 평균 순위(MR).
"""

from dataclasses import dataclass
from typing import Dict, Literal, Optional, Sequence, Tuple
import logging

import numpy as np
from scipy.stats import rankdata

from services.errors import DomainError, InvalidInputError, PreconditionError

logger = logging.getLogger(__name__)

TieRule = Literal["average", "min"]


@dataclass(frozen=True)
class MetricTable:
    """
    방법 × 지표 결과표.

    higher_is_better[k] 가 True 면 지표 k 는 클수록 좋다 (δ_k = 1).
    baseline 은 Δm% 기준 행의 이름 (보통 STL).
    """

    methods: Tuple[str, ...]
    metrics: Tuple[str, ...]
    values: np.ndarray
    higher_is_better: Tuple[bool, ...]
    baseline: Optional[str] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "metrics", tuple(self.metrics))
        object.__setattr__(self, "higher_is_better", tuple(bool(h) for h in self.higher_is_better))
        if values.shape != (len(self.methods), len(self.metrics)):
            raise InvalidInputError(
                f"값 형상 {values.shape} 가 방법 {len(self.methods)} × 지표 {len(self.metrics)} 와 다릅니다"
            )
        if len(self.higher_is_better) != len(self.metrics):
            raise InvalidInputError("방향 플래그 수가 지표 수와 다릅니다")
        if len(set(self.methods)) != len(self.methods):
            raise InvalidInputError("방법 이름이 중복됩니다")
        if self.baseline is not None and self.baseline not in self.methods:
            raise InvalidInputError(f"기준 행 '{self.baseline}' 이 표에 없습니다")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def row(self, method: str) -> np.ndarray:
        try:
            return self.values[self.methods.index(method)]
        except ValueError:
            raise InvalidInputError(f"알 수 없는 방법: {method}") from None

    def compared_methods(self) -> Tuple[str, ...]:
        """기준 행을 뺀 비교 대상 방법들"""
        return tuple(m for m in self.methods if m != self.baseline)


def delta_m_percent(method_row: Sequence[float], baseline_row: Sequence[float], higher_is_better: Sequence[bool]) -> float:
    """(100/K)·Σ_k (−1)^{δ_k}(M_m,k − M_b,k)/M_b,k"""
    method_row = np.asarray(method_row, dtype=np.float64)
    baseline_row = np.asarray(baseline_row, dtype=np.float64)
    signs = np.where(np.asarray(higher_is_better, dtype=bool), -1.0, 1.0)
    if not (method_row.shape == baseline_row.shape == signs.shape):
        raise InvalidInputError("행 길이와 방향 플래그 수가 일치해야 합니다")
    if np.any(baseline_row == 0):
        raise DomainError("기준 행에 0 이 있어 상대 변화를 계산할 수 없습니다")
    relative = (method_row - baseline_row) / baseline_row
    return float(100.0 * np.mean(signs * relative))


def delta_m_table(table: MetricTable) -> Dict[str, float]:
    if table.baseline is None:
        raise PreconditionError("Δm% 에는 기준 행(baseline)이 필요합니다")
    baseline = table.row(table.baseline)
    return {
        method: delta_m_percent(table.row(method), baseline, table.higher_is_better)
        for method in table.compared_methods()
    }


def mean_rank(table: MetricTable, ties: TieRule = "average") -> Dict[str, float]:
    """
    지표별로 좋은 순서대로 순위를 매기고 방법별 평균을 낸다.

    기준 행은 순위에서 제외한다. 동률은 ties="average" 면 평균 순위,
    ties="min" 이면 가장 좋은 순위를 공유한다.
    """
    if ties not in ("average", "min"):
        raise InvalidInputError(f"ties={ties}: average 또는 min")
    methods = table.compared_methods()
    if len(methods) < 2:
        raise PreconditionError("평균 순위에는 2개 이상의 방법이 필요합니다")

    rows = np.array([table.row(m) for m in methods])
    ranks = np.empty_like(rows)
    for k, higher in enumerate(table.higher_is_better):
        column = -rows[:, k] if higher else rows[:, k]
        ranks[:, k] = rankdata(column, method=ties)
    return {method: float(r) for method, r in zip(methods, ranks.mean(axis=1))}
