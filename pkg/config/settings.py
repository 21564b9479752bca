from pathlib import Path
from pydantic_settings import BaseSettings, SettingsConfigDict
from typing import List
import logging

logger = logging.getLogger(__name__)


class Settings(BaseSettings):
    # 기본 설정
    app_name: str = "FairGrad Bench"
    debug: bool = False
    version: str = "1.0.0"
    log_level: str = "INFO"

    # 서버 설정 (serve 명령)
    host: str = "0.0.0.0"
    port: int = 8000

    # CORS 설정
    allowed_origins: List[str] = [
        "http://localhost:3000",
        "http://localhost:5173",
        "http://127.0.0.1:3000",
        "http://127.0.0.1:5173",
    ]

    # 실험 기본값 - FAIRGRAD_SEED 는 CLI seed 폴백
    seed: int = 0
    output_dir: str = "runs"
    # HTTP /metrics 가 읽을 수 있는 결과표 디렉토리 (output_dir 와 함께 허용)
    data_dir: str = str(Path(__file__).resolve().parent.parent / "data")

    # 가중치 솔버 설정
    w_min: float = 1e-8
    w_max: float = 1e12
    solver_max_iter: int = 200
    solver_tol_per_task: float = 1e-8

    # Frank-Wolfe min-norm 설정
    fw_max_iter: int = 1000
    fw_tol: float = 1e-10

    # sweep 동시 실행 워커 수
    sweep_workers: int = 4

    # 유한차분 검증 설정
    fd_step: float = 1e-6
    checkgrad_tol: float = 1e-5

    model_config = SettingsConfigDict(
        env_prefix="FAIRGRAD_",
        env_file=".env",
        case_sensitive=False,
        extra="ignore",  # 추가 필드 무시
    )


# 전역 설정 인스턴스
settings = Settings()


def setup_logging():
    """기본 로깅 설정"""
    logging.basicConfig(
        level=getattr(logging, settings.log_level.upper(), logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    )


def validate_settings() -> List[str]:
    """수치 설정 검증 - 경고 목록 반환"""
    warnings = []

    if settings.w_min <= 0:
        warnings.append("W_MIN은 양수여야 합니다.")

    if settings.w_max <= settings.w_min:
        warnings.append("W_MAX는 W_MIN보다 커야 합니다.")

    if settings.seed < 0 or settings.seed >= 2 ** 64:
        warnings.append("SEED는 64비트 부호 없는 정수여야 합니다.")

    if settings.sweep_workers < 1:
        warnings.append("SWEEP_WORKERS는 1 이상이어야 합니다.")

    if warnings:
        logger.warning(f"⚠️ 설정 경고: {', '.join(warnings)}")

    return warnings
