"""
실험 산출물 저장소: trajectory CSV, summary JSON, 결과표 CSV.
"""

from pathlib import Path
from typing import Iterable, List, Optional, Type, TypeVar, Union
import csv
import logging

from pydantic import BaseModel

from config.settings import settings
from services.core_types import TrajectoryRecord
from services.errors import InvalidInputError
from services.metrics import MetricTable

logger = logging.getLogger(__name__)

TRAJECTORY_FILE = "trajectory.csv"
SUMMARY_FILE = "summary.json"
SWEEP_SUMMARY_FILE = "sweep_summary.json"

HIGHER = {"higher", "up", "↑", "1", "true", "max"}
LOWER = {"lower", "down", "↓", "0", "false", "min"}

ModelT = TypeVar("ModelT", bound=BaseModel)


def format_float(value: float) -> str:
    """17 유효숫자 - float64 를 손실 없이 복원"""
    return format(float(value), ".17g")


def trajectory_header(dimension: int, task_count: int) -> List[str]:
    return (
        ["step"]
        + [f"x{i + 1}" for i in range(dimension)]
        + [f"l{i + 1}" for i in range(task_count)]
        + [f"w{i + 1}" for i in range(task_count)]
        + ["dnorm", "stationarity", "sigma_min", "eta"]
    )


def trajectory_row(record: TrajectoryRecord) -> List[str]:
    values = (
        list(record.point) + list(record.losses) + list(record.weights)
        + [record.direction_norm, record.stationarity, record.sigma_min, record.step_size]
    )
    return [str(record.step)] + [format_float(v) for v in values]


class ArtifactStore:
    """실행 하나가 소유하는 출력 디렉토리"""

    def __init__(self, root: Optional[Union[str, Path]] = None):
        self.root = Path(root or settings.output_dir)

    def ensure(self) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        return self.root

    def child(self, name: str) -> "ArtifactStore":
        return ArtifactStore(self.root / name)

    @property
    def trajectory_path(self) -> Path:
        return self.root / TRAJECTORY_FILE

    def write_trajectory(self, records: Iterable[TrajectoryRecord]) -> Path:
        records = list(records)
        if not records:
            raise InvalidInputError("빈 trajectory 는 저장할 수 없습니다")
        first = records[0]
        self.ensure()
        with open(self.trajectory_path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(trajectory_header(len(first.point), len(first.losses)))
            for record in records:
                writer.writerow(trajectory_row(record))
        logger.info(f"✅ trajectory 저장: {self.trajectory_path} ({len(records)}행)")
        return self.trajectory_path

    def write_model(self, model: BaseModel, filename: str = SUMMARY_FILE) -> Path:
        self.ensure()
        path = self.root / filename
        path.write_text(model.model_dump_json(indent=2), encoding="utf-8")
        logger.info(f"✅ 요약 저장: {path}")
        return path

    def read_model(self, model_type: Type[ModelT], filename: str = SUMMARY_FILE) -> ModelT:
        return model_type.model_validate_json((self.root / filename).read_text(encoding="utf-8"))


def _direction_flag(cell: str, column: str) -> bool:
    token = cell.strip().lower()
    if token in HIGHER:
        return True
    if token in LOWER:
        return False
    raise InvalidInputError(f"지표 '{column}' 의 방향 '{cell}' 을 해석할 수 없습니다 (higher/lower)")


def read_metric_table(path: Union[str, Path], baseline: Optional[str] = None) -> MetricTable:
    """
    결과표 CSV 읽기.

    헤더 `method,<metric>...`, 첫 열이 `direction` 인 방향 행 (higher/lower),
    나머지는 방법별 값 행.
    """
    path = Path(path)
    if not path.exists():
        raise InvalidInputError(f"결과표 파일이 없습니다: {path}")
    with open(path, newline="", encoding="utf-8") as f:
        rows = [row for row in csv.reader(f) if row and any(cell.strip() for cell in row)]
    if not rows or rows[0][0].strip().lower() != "method":
        raise InvalidInputError("결과표 헤더는 'method' 로 시작해야 합니다")

    metrics = [cell.strip() for cell in rows[0][1:]]
    directions = None
    methods, values = [], []
    for row in rows[1:]:
        label = row[0].strip()
        cells = row[1:]
        if len(cells) != len(metrics):
            raise InvalidInputError(f"'{label}' 행의 열 수가 헤더와 다릅니다")
        if label.lower() == "direction":
            directions = [_direction_flag(c, m) for c, m in zip(cells, metrics)]
            continue
        try:
            values.append([float(c) for c in cells])
        except ValueError:
            raise InvalidInputError(f"'{label}' 행에 숫자가 아닌 값이 있습니다") from None
        methods.append(label)

    if directions is None:
        raise InvalidInputError("결과표에 direction 행이 없습니다")
    return MetricTable(
        methods=tuple(methods),
        metrics=tuple(metrics),
        values=values,
        higher_is_better=tuple(directions),
        baseline=baseline,
    )
