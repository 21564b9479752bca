"""
명령행 진입점: run / sweep / checkgrad / metrics / serve.

종료 코드: 0 정상(정상점 도달), 1 사용법·설정 오류, 2 미수렴.
설정 파일은 ExperimentConfig 필드 이름 그대로의 평평한 JSON 이고, 플래그가 파일 값을 덮어쓴다.
"""

from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence
import argparse
import asyncio
import json
import logging
import sys

from pydantic import ValidationError

from config.settings import settings, setup_logging
from schemas.request import CheckGradRequest, ExperimentConfig, MetricsRequest, SweepRequest
from services.errors import FairGradError
from services.experiment_service import EXIT_ERROR, experiment_service

logger = logging.getLogger(__name__)

DEFAULT_TABLE = str(Path(settings.data_dir) / "cityscapes_results.csv")

# (플래그, ExperimentConfig 필드, 타입)
CONFIG_FLAGS = [
    ("--problem", "problem", str),
    ("--start", "start", str),
    ("--method", "method", str),
    ("--alpha", "alpha", float),
    ("--step-rule", "step_rule", str),
    ("--lr", "learning_rate", float),
    ("--smoothness-L", "smoothness_L", float),
    ("--max-steps", "max_steps", int),
    ("--stationarity-tol", "stationarity_tol", float),
    ("--seed", "seed", int),
    ("--w-min", "w_min", float),
    ("--w-max", "w_max", float),
    ("--solver-mode", "solver_mode", str),
    ("--solver-tol", "solver_tol", float),
    ("--solver-max-iter", "solver_max_iter", int),
    ("--inner-lr", "inner_lr", float),
    ("--inner-epochs", "inner_epochs", int),
    ("--fair-loss-alpha", "fair_loss_alpha", float),
    ("--loss-floor", "loss_floor", float),
    ("--check-every", "check_every", int),
    ("--pcgrad-reduce", "pcgrad_reduce", str),
    ("--dwa-temperature", "dwa_temperature", float),
    ("--quad-tasks", "quad_tasks", int),
    ("--quad-dim", "quad_dim", int),
    ("--quad-condition", "quad_condition", float),
    ("--problem-seed", "problem_seed", int),
    ("--epsilon-ball", "epsilon_ball", float),
    ("--output-dir", "output_dir", str),
]


class CliUsageError(Exception):
    """argparse 사용법 오류 (종료 코드 1 로 매핑)"""


class CliParser(argparse.ArgumentParser):
    def error(self, message):
        raise CliUsageError(message)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="평평한 JSON 설정 파일")
    for flag, dest, kind in CONFIG_FLAGS:
        parser.add_argument(flag, dest=dest, type=kind, default=None)
    parser.add_argument("--x0", dest="x0", type=float, nargs="+", default=None, help="명시적 시작점")
    parser.add_argument("--strict-solver", dest="strict_solver", action="store_true", default=None)


def build_parser() -> CliParser:
    parser = CliParser(prog="fairgrad", description="FairGrad 다중 태스크 최적화 실험 도구")
    sub = parser.add_subparsers(dest="command")

    run_parser = sub.add_parser("run", help="단일 실험 실행")
    _add_config_flags(run_parser)

    sweep_parser = sub.add_parser("sweep", help="α 스윕")
    _add_config_flags(sweep_parser)
    sweep_parser.add_argument("--alphas", nargs="*", default=None, help="예: 1 2 5 10 또는 1,2,5,10")
    sweep_parser.add_argument("--static", action="store_true", help="파라미터 갱신 없이 시작점에서만 비교")

    check_parser = sub.add_parser("checkgrad", help="유한차분 그래디언트 검증")
    check_parser.add_argument("--problem", required=True)
    check_parser.add_argument("--samples", type=int, default=1000)
    check_parser.add_argument("--seed", type=int, default=None)
    check_parser.add_argument("--quad-tasks", type=int, default=3)
    check_parser.add_argument("--quad-dim", type=int, default=2)
    check_parser.add_argument("--fd-step", type=float, default=None)
    check_parser.add_argument("--tol", type=float, default=None)
    check_parser.add_argument("--corrupt-gradient", action="store_true", help=argparse.SUPPRESS)

    metrics_parser = sub.add_parser("metrics", help="결과표에서 Δm% / MR 계산")
    metrics_parser.add_argument("--table", default=DEFAULT_TABLE)
    metrics_parser.add_argument("--baseline", default="STL")
    metrics_parser.add_argument("--ties", default="average")
    metrics_parser.add_argument("--output", default=None, help="결과 JSON 경로")

    serve_parser = sub.add_parser("serve", help="HTTP API 서버 실행")
    serve_parser.add_argument("--host", default=settings.host)
    serve_parser.add_argument("--port", type=int, default=settings.port)
    return parser


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    """설정 파일을 읽고 명시된 플래그로 덮어쓴다"""
    data: Dict[str, Any] = {}
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise CliUsageError(f"config: 파일이 없습니다 ({path})")
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise CliUsageError(f"config: JSON 파싱 실패 ({e})") from None
        if not isinstance(data, dict):
            raise CliUsageError("config: 최상위는 객체여야 합니다")

    for _, dest, _ in CONFIG_FLAGS:
        value = getattr(args, dest)
        if value is not None:
            data[dest] = value
    for dest in ("x0", "strict_solver"):
        if getattr(args, dest) is not None:
            data[dest] = getattr(args, dest)
    return ExperimentConfig.model_validate(data)


def parse_alphas(raw: Optional[Sequence[str]]) -> List[float]:
    if raw is None:
        raise CliUsageError("alphas: --alphas 가 필요합니다")
    values = []
    for token in raw:
        for part in token.split(","):
            if part.strip():
                try:
                    values.append(float(part))
                except ValueError:
                    raise CliUsageError(f"alphas: 숫자가 아닙니다 ({part})") from None
    return values


def describe_validation_error(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        field = ".".join(str(loc) for loc in item.get("loc", ())) or "config"
        parts.append(f"{field}: {item.get('msg')}")
    return "; ".join(parts)


def cmd_run(args: argparse.Namespace) -> int:
    config = load_config(args)
    summary = experiment_service.run_experiment(config)
    print(summary.model_dump_json(indent=2))
    return summary.exit_code


def cmd_sweep(args: argparse.Namespace) -> int:
    config = load_config(args)
    request = SweepRequest(base=config, alphas=parse_alphas(args.alphas), static=args.static)
    summary = asyncio.run(experiment_service.run_sweep(request))
    print(summary.model_dump_json(indent=2))
    return summary.exit_code


def cmd_checkgrad(args: argparse.Namespace) -> int:
    data: Dict[str, Any] = {
        "problem": args.problem,
        "samples": args.samples,
        "quad_tasks": args.quad_tasks,
        "quad_dim": args.quad_dim,
        "corrupt_gradient": args.corrupt_gradient,
    }
    for dest in ("seed", "fd_step", "tol"):
        if getattr(args, dest) is not None:
            data[dest] = getattr(args, dest)
    report = experiment_service.check_gradients(CheckGradRequest(**data))
    print(f"max relative error: {report.max_relative_error:.6e} (tol {report.tol:.1e}) "
          f"{'PASS' if report.passed else 'FAIL'}")
    return report.exit_code


def cmd_metrics(args: argparse.Namespace) -> int:
    request = MetricsRequest(table_path=args.table, baseline=args.baseline, ties=args.ties)
    report = experiment_service.compute_metrics(request)
    for row in report.rows:
        print(f"{row.method:<12} Δm%={row.delta_m:8.2f}  MR={row.mean_rank:6.3f}")
    if args.output:
        Path(args.output).parent.mkdir(parents=True, exist_ok=True)
        Path(args.output).write_text(report.model_dump_json(indent=2), encoding="utf-8")
        logger.info(f"✅ 지표 저장: {args.output}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    uvicorn.run("main:app", host=args.host, port=args.port, reload=settings.debug)
    return 0


COMMANDS = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "checkgrad": cmd_checkgrad,
    "metrics": cmd_metrics,
    "serve": cmd_serve,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise CliUsageError("명령이 필요합니다: " + ", ".join(COMMANDS))
        return COMMANDS[args.command](args)
    except CliUsageError as e:
        print(f"error: {e}", file=sys.stderr)
    except ValidationError as e:
        print(f"error: {describe_validation_error(e)}", file=sys.stderr)
    except FairGradError as e:
        print(f"error: {e}", file=sys.stderr)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
