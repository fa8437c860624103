"""
Parameter sweeps over named axes
Every point gets its own deterministic seed block, failures are recorded
and the sweep carries on
"""

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from numbers import Real
from typing import Any, Callable, Dict, List, Mapping, Union

import pandas as pd
from loguru import logger

from utils.errors import SweepError
from .replication import ExperimentPlan
from .stats import EstimateWithCI

# Seeds of different sweep points never overlap while replications < SEED_STRIDE
SEED_STRIDE = 100_000

PointResult = Union[EstimateWithCI, Real, Mapping[str, Any]]


@dataclass
class SweepResult:
    """Sweep table plus the points that failed"""
    table: pd.DataFrame
    failures: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def partial(self) -> bool:
        return bool(self.failures)


def sweep_points(plan: ExperimentPlan) -> List[Dict[str, Any]]:
    """Cartesian product of the sweep axes, first axis slowest"""
    names = list(plan.sweep_axes)
    return [dict(zip(names, combo)) for combo in itertools.product(*plan.sweep_axes.values())]


def point_seed(plan: ExperimentPlan, index: int) -> int:
    """Seed block of one sweep point"""
    return plan.base_seed + SEED_STRIDE * index


def _flatten_result(result: PointResult) -> Dict[str, Any]:
    if isinstance(result, EstimateWithCI):
        return {'mean': result.mean, 'halfwidth_95': result.halfwidth_95, 'n': result.n}
    if isinstance(result, Real):
        return {'value': float(result)}
    if isinstance(result, Mapping):
        flat: Dict[str, Any] = {}
        for key, value in result.items():
            if isinstance(value, EstimateWithCI):
                flat[key] = value.mean
                flat[f"{key}_ci"] = value.halfwidth_95
            else:
                flat[key] = value
        return flat
    raise SweepError(f"unsupported evaluator output type {type(result).__name__}")


def run_sweep(plan: ExperimentPlan, evaluator: Callable[[Dict[str, Any], int], PointResult]) -> SweepResult:
    """
    Evaluate every point of the sweep axes

    Args:
        plan: Experiment plan whose sweep_axes define the points
        evaluator: f(point, seed) -> EstimateWithCI, number or mapping of columns

    Returns:
        SweepResult; failed points appear in the table with an 'error' column
    """
    points = sweep_points(plan)
    logger.info(f"Sweep over {len(points)} point(s): {', '.join(plan.sweep_axes)}")

    def evaluate(indexed):
        index, point = indexed
        seed = point_seed(plan, index)
        try:
            result = evaluator(dict(point), seed)
            if result is None or (isinstance(result, Mapping) and not result):
                raise SweepError("evaluator returned an empty result")
            row = _flatten_result(result)
            logger.info(f"Sweep point {index + 1}/{len(points)} {point} done")
            return {**point, 'seed': seed, **row}, None
        except Exception as e:
            logger.error(f"Sweep point {point} failed: {e}")
            return {**point, 'seed': seed, 'error': str(e)}, {**point, 'seed': seed, 'error': str(e)}

    indexed = list(enumerate(points))
    if plan.workers > 1 and len(points) > 1:
        with ThreadPoolExecutor(max_workers=plan.workers) as pool:
            outcomes = list(pool.map(evaluate, indexed))
    else:
        outcomes = [evaluate(item) for item in indexed]

    rows = [row for row, _ in outcomes]
    failures = [failure for _, failure in outcomes if failure is not None]
    table = pd.DataFrame(rows)
    if failures:
        logger.warning(f"{len(failures)} of {len(points)} sweep point(s) failed")
    return SweepResult(table=table, failures=failures)
