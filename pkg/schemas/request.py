from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing import List, Literal, Optional

from config.settings import settings

ProblemName = Literal["toy", "quadratic"]
MethodName = Literal["fairgrad", "ls", "si", "rlw", "dwa", "mgda", "pcgrad"]
StepRule = Literal["fixed", "theoretical", "adaptive_moment"]
SolverModeName = Literal["least_squares", "sgd_inner"]

START_NAMES = ("p1", "p2", "p3", "p4", "p5")
SEED_LIMIT = 2 ** 64


class ExperimentConfig(BaseModel):
    """
    단일 실험 설정.

    평평한 JSON 설정 파일의 키가 필드 이름과 1:1 로 대응한다.
    alpha=1 은 비례 공정 극한 (w^{-1}) 으로 해석한다.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    # 문제
    problem: ProblemName = Field(..., description="번들 문제 (toy, quadratic)")
    start: Optional[str] = Field(None, description="토이 시작점 프리셋 (p1..p5)")
    x0: Optional[List[float]] = Field(None, description="명시적 시작점 (start 보다 우선)")
    quad_tasks: int = Field(3, ge=1, description="quadratic 태스크 수 K")
    quad_dim: int = Field(2, ge=1, description="quadratic 파라미터 차원 m")
    quad_condition: float = Field(10.0, gt=0.1, description="A_i 고유값 상한")
    problem_seed: Optional[int] = Field(None, ge=0, lt=SEED_LIMIT, description="문제 생성 seed (없으면 seed)")

    # 집계
    method: MethodName = "fairgrad"
    alpha: float = Field(1.0, ge=0, description="FairGrad α (0 이면 LS 와 동일한 가중치)")
    solver_mode: SolverModeName = "least_squares"
    solver_tol: Optional[float] = Field(None, gt=0, description="가중치 솔버 허용 오차 (기본 1e-8·K)")
    solver_max_iter: Optional[int] = Field(None, ge=1)
    inner_lr: float = Field(0.1, gt=0, description="sgd_inner 모드 학습률")
    inner_epochs: int = Field(20, ge=1, description="sgd_inner 모드 반복 수")
    w_min: float = Field(default_factory=lambda: settings.w_min, gt=0)
    w_max: float = Field(default_factory=lambda: settings.w_max, gt=0)
    strict_solver: bool = Field(False, description="솔버 미수렴 시 solver_failure 로 종료")
    pcgrad_reduce: Literal["mean", "sum"] = "mean"
    dwa_temperature: float = Field(2.0, gt=0)
    fair_loss_alpha: Optional[float] = Field(None, le=1, description="α-공정 손실 변환 (1 = 로그 극한)")
    loss_floor: Optional[float] = Field(None, gt=0, description="손실 변환 전 하한 클램프")

    # 스텝
    step_rule: StepRule = "fixed"
    learning_rate: float = Field(1e-3, gt=0)
    smoothness_L: Optional[float] = Field(None, gt=0, description="theoretical 스텝용 L")
    max_steps: int = Field(1000, ge=1)
    stationarity_tol: float = Field(1e-3, gt=0)
    check_every: int = Field(1, ge=1, description="정상성 척도 계산 주기")

    # 기타
    seed: int = Field(default_factory=lambda: settings.seed, ge=0, lt=SEED_LIMIT)
    epsilon_ball: Optional[float] = Field(None, gt=0, description="방향 공 반지름 ε (기록용, 강제하지 않음)")
    output_dir: Optional[str] = Field(None, description="산출물 디렉토리 (기본 settings.output_dir)")

    @field_validator("start")
    @classmethod
    def check_start(cls, value: Optional[str]) -> Optional[str]:
        if value is not None and value not in START_NAMES:
            raise ValueError(f"start 는 {', '.join(START_NAMES)} 중 하나여야 합니다")
        return value

    @model_validator(mode="after")
    def check_combination(self) -> "ExperimentConfig":
        if self.step_rule == "theoretical":
            if self.method != "fairgrad":
                raise ValueError("step_rule=theoretical 은 method=fairgrad 에서만 사용할 수 있습니다")
            if self.alpha <= 0:
                raise ValueError("step_rule=theoretical 은 alpha > 0 이 필요합니다")
        if self.w_max <= self.w_min:
            raise ValueError("w_max 는 w_min 보다 커야 합니다")
        if self.start is not None and self.problem != "toy" and self.x0 is None and self.quad_dim != 2:
            raise ValueError("start 프리셋은 2차원 문제에서만 사용할 수 있습니다")
        return self

    def resolved_output_dir(self) -> str:
        return self.output_dir or settings.output_dir


class SweepRequest(BaseModel):
    """α 스윕 요청 - 각 α 는 파생 seed 로 동시 실행"""
    model_config = ConfigDict(extra="forbid")

    base: ExperimentConfig
    alphas: List[float] = Field(..., min_length=1, description="스윕할 α 목록")
    static: bool = Field(False, description="파라미터 갱신 없이 시작점에서 가중치만 풀기")

    @field_validator("alphas")
    @classmethod
    def check_alphas(cls, values: List[float]) -> List[float]:
        if any(a < 0 for a in values):
            raise ValueError("alphas 는 0 이상이어야 합니다")
        return values


class CheckGradRequest(BaseModel):
    """유한차분 그래디언트 검증 요청"""
    model_config = ConfigDict(extra="forbid")

    problem: str = Field(..., description="번들 문제 이름 (toy, quadratic)")
    samples: int = Field(1000, ge=1)
    seed: int = Field(default_factory=lambda: settings.seed, ge=0, lt=SEED_LIMIT)
    quad_tasks: int = Field(3, ge=1)
    quad_dim: int = Field(2, ge=1)
    quad_condition: float = Field(10.0, gt=0.1)
    fd_step: float = Field(default_factory=lambda: settings.fd_step, gt=0)
    tol: float = Field(default_factory=lambda: settings.checkgrad_tol, gt=0)
    corrupt_gradient: bool = Field(False, description="테스트용: 해석적 그래디언트를 일부러 틀리게")


class MetricsRequest(BaseModel):
    """결과표 CSV 에서 Δm% / MR 계산 요청"""
    model_config = ConfigDict(extra="forbid")

    table_path: str = Field(..., description="method,<metric>... 헤더의 CSV 경로")
    baseline: str = Field("STL", description="기준 행 이름")
    ties: Literal["average", "min"] = "average"
