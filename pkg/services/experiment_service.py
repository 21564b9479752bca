"""
CLI 와 HTTP 가 공유하는 실험 오케스트레이션.

단일 실행 / α 스윕 / 정적 스윕 / 유한차분 검증 / 지표 계산을 담당하고
산출물은 storage.artifacts 로 저장한다.
"""

from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional, Tuple
import asyncio
import logging

import numpy as np
from pydantic import ValidationError

from config.settings import settings
from schemas.request import CheckGradRequest, ExperimentConfig, MetricsRequest, SweepRequest
from schemas.response import (
    CheckGradReport,
    MethodMetrics,
    MetricsReport,
    RunSummary,
    SweepEntry,
    SweepSummary,
)
from services.aggregators import aggregate_fairgrad
from services.core_types import GradientMatrix, build_gram, derive_seeds, make_rng
from services.errors import FairGradError, InvalidInputError, NumericalDivergenceError
from services.metrics import delta_m_table, mean_rank
from services.optimizer import RunResult, initial_point, run
from services.pareto import smallest_singular_value, stationarity_measure
from services.toybench import (
    ToyProblem,
    max_gradient_error,
    quadratic_problem,
    sample_check_points,
)
from storage.artifacts import SWEEP_SUMMARY_FILE, ArtifactStore, read_metric_table

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2

BUNDLED_PROBLEMS = ("toy", "quadratic")


def exit_code_for(termination: str) -> int:
    return EXIT_OK if termination == "stationary" else EXIT_NOT_CONVERGED


def worst_exit_code(codes: List[int]) -> int:
    """심각도 1 > 2 > 0"""
    if EXIT_ERROR in codes:
        return EXIT_ERROR
    if EXIT_NOT_CONVERGED in codes:
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def gain_share(min_gain: float, total_gain: float) -> Optional[float]:
    """min_i g_iᵀd / Σ_j g_jᵀd (스케일 무관 지표)"""
    return min_gain / total_gain if total_gain > 0 else None


class CorruptedGradientProblem:
    """검증 하네스의 음성 대조군: 해석적 그래디언트를 일부러 어긋나게 만든다"""

    def __init__(self, problem):
        self._problem = problem
        self.dimension = problem.dimension
        self.task_count = problem.task_count

    def losses(self, point):
        return self._problem.losses(point)

    def gradients(self, point) -> GradientMatrix:
        entries = self._problem.gradients(point).entries
        return GradientMatrix(entries * 1.01 + 1e-3)


class ExperimentService:
    """실험 실행 서비스"""

    def build_problem(self, config: ExperimentConfig):
        if config.problem == "toy":
            return ToyProblem()
        seed = config.seed if config.problem_seed is None else config.problem_seed
        return quadratic_problem(config.quad_tasks, config.quad_dim, make_rng(seed), config.quad_condition)

    def summarize(self, config: ExperimentConfig, problem, result: RunResult, trajectory_path: Optional[Path]) -> RunSummary:
        last = result.final_record
        final_point = np.asarray(result.final_point, dtype=np.float64)
        if result.termination == "stationary":
            final_losses = last.losses
            final_stationarity = last.stationarity
            final_sigma = last.sigma_min
        else:
            G = problem.gradients(final_point)
            final_losses = problem.losses(final_point)
            final_stationarity = stationarity_measure(G)
            final_sigma = smallest_singular_value(build_gram(G))

        shares = [
            share for share in (gain_share(r.min_gain, r.total_gain) for r in result.trajectory)
            if share is not None
        ]
        return RunSummary(
            problem=config.problem,
            method=config.method,
            alpha=config.alpha,
            seed=config.seed,
            step_rule=config.step_rule,
            termination=result.termination,
            exit_code=exit_code_for(result.termination),
            steps=len(result.trajectory),
            final_point=[float(v) for v in final_point],
            final_losses=[float(v) for v in final_losses],
            final_weights=[float(v) for v in last.weights],
            final_stationarity=float(final_stationarity),
            final_sigma_min=float(final_sigma),
            final_step_size=float(last.step_size),
            solver_failures=result.solver_failures,
            mean_min_gain=float(np.mean([r.min_gain for r in result.trajectory])),
            mean_min_gain_share=float(np.mean(shares)) if shares else None,
            wall_time=float(result.wall_time),
            trajectory_path=str(trajectory_path) if trajectory_path else None,
        )

    def run_experiment(self, config: ExperimentConfig, store: Optional[ArtifactStore] = None) -> RunSummary:
        """실행 후 trajectory.csv 와 summary.json 을 저장한다"""
        store = store or ArtifactStore(config.resolved_output_dir())
        problem = self.build_problem(config)
        try:
            result = run(problem, config)
        except NumericalDivergenceError as e:
            if e.trajectory:
                store.write_trajectory(e.trajectory)
            logger.error(f"❌ 스텝 {e.step} 에서 발산: {e}")
            raise

        path = store.write_trajectory(result.trajectory)
        summary = self.summarize(config, problem, result, path)
        store.write_model(summary)
        return summary

    def _child_config(self, base: ExperimentConfig, alpha: float, seed: int, output_dir: Path) -> ExperimentConfig:
        data = base.model_dump()
        data.update(alpha=alpha, seed=seed, output_dir=str(output_dir))
        return ExperimentConfig.model_validate(data)

    def _sweep_child(self, base: ExperimentConfig, alpha: float, seed: int, root: ArtifactStore) -> SweepEntry:
        store = root.child(f"alpha_{alpha:g}")
        child_dir = store.root
        try:
            config = self._child_config(base, alpha, seed, child_dir)
            summary = self.run_experiment(config, store)
        except (FairGradError, ValidationError, ValueError) as e:
            logger.error(f"❌ α={alpha:g} 실행 실패: {e}")
            return SweepEntry(alpha=alpha, seed=seed, exit_code=EXIT_ERROR, output_dir=str(child_dir), error=str(e))

        logger.info(f"✅ α={alpha:g} 완료: {summary.termination}")
        return SweepEntry(
            alpha=alpha,
            seed=seed,
            exit_code=summary.exit_code,
            termination=summary.termination,
            final_losses=summary.final_losses,
            final_stationarity=summary.final_stationarity,
            mean_min_gain=summary.mean_min_gain,
            mean_min_gain_share=summary.mean_min_gain_share,
            weights=summary.final_weights,
            output_dir=str(child_dir),
        )

    def sweep_seeds(self, base: ExperimentConfig, count: int) -> List[int]:
        """α 가 하나면 run 과 같은 seed, 여러 개면 서로 다른 파생 seed"""
        if count == 1:
            return [base.seed]
        return derive_seeds(base.seed, count)

    async def run_sweep(self, request: SweepRequest) -> SweepSummary:
        """α 마다 독립 실행을 동시에 돌리고 sweep_summary.json 으로 합친다"""
        if request.static:
            return self.static_sweep(request)

        root = ArtifactStore(request.base.resolved_output_dir())
        seeds = self.sweep_seeds(request.base, len(request.alphas))
        logger.info(f"🚀 α 스윕 시작: {request.alphas} (workers={settings.sweep_workers})")

        loop = asyncio.get_running_loop()
        with ThreadPoolExecutor(max_workers=settings.sweep_workers) as executor:
            tasks = [
                loop.run_in_executor(executor, self._sweep_child, request.base, alpha, seed, root)
                for alpha, seed in zip(request.alphas, seeds)
            ]
            entries = await asyncio.gather(*tasks)

        summary = SweepSummary(
            static=False,
            exit_code=worst_exit_code([e.exit_code for e in entries]),
            entries=list(entries),
        )
        root.write_model(summary, SWEEP_SUMMARY_FILE)
        return summary

    def static_sweep(self, request: SweepRequest) -> SweepSummary:
        """
        시작점의 고정된 G 에서 α 마다 가중치 방정식만 풀고
        min_i g_iᵀd 와 그 비율 min_i g_iᵀd / Σ_j g_jᵀd 를 비교한다.
        """
        base = request.base
        problem = self.build_problem(base)
        point = initial_point(problem, base)
        G = problem.gradients(point)
        entries = []
        for alpha in request.alphas:
            result = aggregate_fairgrad(G, alpha, base)
            gains = G.entries.T @ result.direction.vector
            min_gain = float(np.min(gains))
            entries.append(SweepEntry(
                alpha=alpha,
                seed=base.seed,
                exit_code=EXIT_OK if result.converged else EXIT_NOT_CONVERGED,
                mean_min_gain=min_gain,
                mean_min_gain_share=gain_share(min_gain, float(np.sum(gains))),
                weights=[float(w) for w in result.weights],
                solver_converged=result.converged,
            ))
            logger.info(f"α={alpha:g}: min g_iᵀd={min_gain:.6g}, 수렴={result.converged}")

        summary = SweepSummary(
            static=True,
            exit_code=worst_exit_code([e.exit_code for e in entries]),
            entries=entries,
        )
        ArtifactStore(base.resolved_output_dir()).write_model(summary, SWEEP_SUMMARY_FILE)
        return summary

    def check_gradients(self, request: CheckGradRequest) -> CheckGradReport:
        """무작위 점에서 해석적 그래디언트와 중앙 차분의 최대 상대 오차"""
        if request.problem not in BUNDLED_PROBLEMS:
            raise InvalidInputError(f"알 수 없는 문제: {request.problem} (가능: {', '.join(BUNDLED_PROBLEMS)})")
        rng = make_rng(request.seed)
        if request.problem == "toy":
            problem = ToyProblem()
        else:
            problem = quadratic_problem(request.quad_tasks, request.quad_dim, rng, request.quad_condition)
        points = sample_check_points(problem, rng, request.samples)
        if request.corrupt_gradient:
            problem = CorruptedGradientProblem(problem)
        error = max_gradient_error(problem, points, request.fd_step)
        passed = error <= request.tol
        icon = "✅" if passed else "❌"
        logger.info(f"{icon} {request.problem} 그래디언트 검증: 최대 상대 오차 {error:.3e} (tol {request.tol:.1e})")
        return CheckGradReport(
            problem=request.problem,
            samples=request.samples,
            max_relative_error=error,
            tol=request.tol,
            passed=passed,
            exit_code=EXIT_OK if passed else EXIT_ERROR,
        )

    def compute_metrics(self, request: MetricsRequest) -> MetricsReport:
        table = read_metric_table(request.table_path, request.baseline)
        deltas = delta_m_table(table)
        ranks = mean_rank(table, request.ties)
        rows = [
            MethodMetrics(method=method, delta_m=deltas[method], mean_rank=ranks[method])
            for method in table.compared_methods()
        ]
        return MetricsReport(baseline=request.baseline, ties=request.ties, rows=rows)


# 전역 서비스 인스턴스
experiment_service = ExperimentService()
