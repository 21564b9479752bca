from typing import Any, Optional, Sequence


class FairGradError(Exception):
    """라이브러리 공통 예외"""


class InvalidInputError(FairGradError, ValueError):
    """비정상 입력 (NaN/Inf, 형상 불일치 등)"""


class DomainError(FairGradError, ValueError):
    """함수 정의역 밖의 값 (하한 미만 가중치, 0 이하 손실 등)"""


class PreconditionError(FairGradError, ValueError):
    """연산 전제 조건 위반"""


class UnsupportedError(FairGradError):
    """지원하지 않는 파라미터 조합"""


class SolverFailureError(FairGradError):
    """내부 수치 해법 (근 찾기 등) 실패"""


class NumericalDivergenceError(FairGradError):
    """실행 중 손실/그래디언트가 유한하지 않게 된 경우"""

    def __init__(
        self,
        message: str,
        step: int,
        point: Optional[Any] = None,
        trajectory: Optional[Sequence[Any]] = None,
    ):
        super().__init__(message)
        self.step = step
        self.point = point
        self.trajectory = list(trajectory or [])
