from pathlib import Path
from fastapi import APIRouter, HTTPException
import logging

from config.settings import settings
from schemas.request import CheckGradRequest, ExperimentConfig, MetricsRequest, SweepRequest
from schemas.response import CheckGradReport, MetricsReport, RunSummary, SuccessResponse, SweepSummary
from services.errors import DomainError, FairGradError, InvalidInputError, NumericalDivergenceError, PreconditionError
from services.experiment_service import experiment_service

logger = logging.getLogger(__name__)

router = APIRouter(prefix="/api/v1/experiments", tags=["Experiments"])

CLIENT_ERRORS = (InvalidInputError, DomainError, PreconditionError)


def _check_table_path(table_path: str) -> None:
    """결과표는 data_dir 또는 output_dir 아래에서만 읽는다"""
    path = Path(table_path).resolve()
    roots = [Path(settings.data_dir).resolve(), Path(settings.output_dir).resolve()]
    if not any(path.is_relative_to(root) for root in roots):
        logger.warning(f"⚠️ 허용되지 않은 결과표 경로: {table_path}")
        raise HTTPException(status_code=403, detail="결과표는 data 또는 output 디렉토리 아래에 있어야 합니다")


def _to_http_error(action: str, e: Exception) -> HTTPException:
    if isinstance(e, CLIENT_ERRORS):
        logger.warning(f"⚠️ {action} 입력 오류: {e}")
        return HTTPException(status_code=400, detail=f"{action} 실패: {str(e)}")
    if isinstance(e, NumericalDivergenceError):
        logger.error(f"❌ {action} 발산 (step {e.step}): {e}")
        return HTTPException(status_code=500, detail=f"{action} 발산: step {e.step}")
    logger.error(f"❌ {action} 실패: {e}")
    return HTTPException(status_code=500, detail=f"{action} 실패: {str(e)}")


@router.post("/run", response_model=RunSummary)
def run_experiment(config: ExperimentConfig):
    """단일 실험 실행 - trajectory.csv / summary.json 저장 후 요약 반환"""
    try:
        return experiment_service.run_experiment(config)
    except FairGradError as e:
        raise _to_http_error("실험 실행", e)


@router.post("/sweep", response_model=SweepSummary)
async def run_sweep(request: SweepRequest):
    """α 스윕 (static=true 면 시작점에서 가중치만 비교)"""
    try:
        return await experiment_service.run_sweep(request)
    except FairGradError as e:
        raise _to_http_error("α 스윕", e)


@router.post("/checkgrad", response_model=CheckGradReport)
def check_gradients(request: CheckGradRequest):
    """유한차분 그래디언트 검증"""
    try:
        return experiment_service.check_gradients(request)
    except FairGradError as e:
        raise _to_http_error("그래디언트 검증", e)


@router.post("/metrics", response_model=MetricsReport)
def compute_metrics(request: MetricsRequest):
    """결과표 CSV 에서 Δm% / MR 계산"""
    _check_table_path(request.table_path)
    try:
        return experiment_service.compute_metrics(request)
    except FairGradError as e:
        raise _to_http_error("지표 계산", e)


@router.get("/health", response_model=SuccessResponse)
async def health_check():
    """실험 서비스 헬스 체크"""
    return SuccessResponse(message="experiment service ready", data={"status": "healthy"})
