from pydantic import BaseModel
from typing import List, Optional, Dict, Any


class RunSummary(BaseModel):
    """단일 실행 요약 (summary.json)"""
    problem: str
    method: str
    alpha: float
    seed: int
    step_rule: str
    termination: str
    exit_code: int
    steps: int
    final_point: List[float]
    final_losses: List[float]
    final_weights: List[float]
    final_stationarity: float
    final_sigma_min: float
    final_step_size: float
    solver_failures: int = 0
    mean_min_gain: float
    mean_min_gain_share: Optional[float] = None  # Σ g_iᵀd = 0 이면 정의되지 않음
    wall_time: float
    trajectory_path: Optional[str] = None


class SweepEntry(BaseModel):
    """스윕의 α 하나에 대한 결과"""
    alpha: float
    seed: int
    exit_code: int
    termination: Optional[str] = None
    final_losses: List[float] = []
    final_stationarity: Optional[float] = None
    mean_min_gain: Optional[float] = None
    mean_min_gain_share: Optional[float] = None
    weights: Optional[List[float]] = None
    solver_converged: Optional[bool] = None
    output_dir: Optional[str] = None
    error: Optional[str] = None


class SweepSummary(BaseModel):
    """스윕 비교 요약 (sweep_summary.json)"""
    static: bool
    exit_code: int
    entries: List[SweepEntry]


class CheckGradReport(BaseModel):
    """유한차분 검증 결과"""
    problem: str
    samples: int
    max_relative_error: float
    tol: float
    passed: bool
    exit_code: int


class MethodMetrics(BaseModel):
    method: str
    delta_m: float
    mean_rank: float


class MetricsReport(BaseModel):
    """방법별 Δm% 와 평균 순위"""
    baseline: str
    ties: str
    rows: List[MethodMetrics]


# 공통 응답들
class SuccessResponse(BaseModel):
    """일반적인 성공 응답"""
    success: bool = True
    message: str
    data: Optional[Dict[str, Any]] = None

