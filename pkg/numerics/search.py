"""
Exhaustive grid search with zoom refinement, and a cyclic coordinate variant
Used by every tuner and static optimizer in the project
"""

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.optimize import OptimizeResult

from utils.errors import InfeasibleError


@dataclass(frozen=True)
class SearchGrid:
    """One search dimension: evenly spaced points, optionally in log scale"""
    lower: float
    upper: float
    points: int
    refinement_rounds: int = 0
    log_scale: bool = False

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError(f"SearchGrid needs lower < upper, got [{self.lower}, {self.upper}]")
        if self.points < 2:
            raise ValueError("SearchGrid needs at least 2 points")
        if self.refinement_rounds < 0:
            raise ValueError("refinement_rounds must be >= 0")
        if self.log_scale and self.lower <= 0:
            raise ValueError("log-scale SearchGrid needs a positive lower bound")

    def values(self) -> np.ndarray:
        """Grid points in ascending order"""
        if self.log_scale:
            return np.geomspace(self.lower, self.upper, self.points)
        return np.linspace(self.lower, self.upper, self.points)

    @property
    def cell(self) -> float:
        """Spacing between points (in log10 units for log grids)"""
        if self.log_scale:
            return (np.log10(self.upper) - np.log10(self.lower)) / (self.points - 1)
        return (self.upper - self.lower) / (self.points - 1)

    def zoom(self, center: float, bounds: "SearchGrid") -> "SearchGrid":
        """
        Window of one coarse cell either side of center, clipped to bounds

        Args:
            center: Incumbent coordinate
            bounds: Original grid whose range must not be left

        Returns:
            Finer grid with the same number of points
        """
        if self.log_scale:
            if center <= 0:
                return self
            c = np.log10(center)
            lo = max(c - self.cell, np.log10(bounds.lower))
            hi = min(c + self.cell, np.log10(bounds.upper))
            lo, hi = 10.0 ** lo, 10.0 ** hi
        else:
            lo = max(center - self.cell, bounds.lower)
            hi = min(center + self.cell, bounds.upper)
        if not lo < hi:
            return self
        return replace(self, lower=float(lo), upper=float(hi))


def _product(grids: Sequence[SearchGrid]) -> np.ndarray:
    """All grid points, lexicographically ordered (first axis slowest)"""
    axes = [g.values() for g in grids]
    return np.array(list(itertools.product(*axes)), dtype=float)


def _evaluate(objective: Callable, points: np.ndarray, vectorized: bool, workers: int) -> np.ndarray:
    if vectorized:
        values = np.asarray(objective(points), dtype=float)
        if values.shape != (len(points),):
            raise ValueError(f"vectorized objective returned shape {values.shape}, expected ({len(points)},)")
        return values
    rows = [tuple(p) for p in points]
    if workers > 1:
        # map keeps submission order, so results do not depend on scheduling
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return np.array(list(pool.map(objective, rows)), dtype=float)
    return np.array([objective(p) for p in rows], dtype=float)


def _feasible_mask(feasibility: Optional[Callable], points: np.ndarray, vectorized: bool) -> np.ndarray:
    if feasibility is None:
        return np.ones(len(points), dtype=bool)
    if vectorized:
        return np.asarray(feasibility(points), dtype=bool)
    return np.array([bool(feasibility(tuple(p))) for p in points], dtype=bool)


def _pick(values: np.ndarray, mask: np.ndarray, maximize: bool) -> Tuple[int, float]:
    """Index of the best feasible value; first occurrence wins ties"""
    ok = mask & np.isfinite(values)
    if not np.any(ok):
        return -1, np.nan
    scores = np.where(ok, values if maximize else -values, -np.inf)
    idx = int(np.argmax(scores))
    return idx, float(values[idx])


def _better(candidate: float, incumbent: float, maximize: bool) -> bool:
    if not np.isfinite(incumbent):
        return np.isfinite(candidate)
    return candidate > incumbent if maximize else candidate < incumbent


def grid_search(objective: Callable, grids: Sequence[SearchGrid],
                feasibility: Optional[Callable] = None, maximize: bool = True,
                vectorized: bool = False, workers: int = 1) -> OptimizeResult:
    """
    Exhaustive search over the product of the grids, with zoom refinement

    Infeasible points and points with a non-finite objective are skipped.
    Ties go to the lexicographically smallest point, across refinement
    rounds too. Each refinement round searches one coarse cell either side
    of the incumbent and never replaces it with something worse.

    Args:
        objective: f(point) -> value, or f(points[n, d]) -> values[n] when vectorized
        grids: One SearchGrid per dimension
        feasibility: Optional predicate with the same calling convention
        maximize: Direction of optimization
        vectorized: Evaluate the whole grid in one call
        workers: Thread count for non-vectorized evaluation

    Returns:
        OptimizeResult with x, fun, nfev, nit and per-round history

    Raises:
        InfeasibleError: no feasible point in the initial grid
    """
    grids = list(grids)
    rounds = max(g.refinement_rounds for g in grids)
    current = grids
    best_x, best_val = None, np.nan
    history: List[float] = []
    nfev = 0

    for level in range(rounds + 1):
        points = _product(current)
        values = _evaluate(objective, points, vectorized, workers)
        mask = _feasible_mask(feasibility, points, vectorized)
        nfev += len(points)

        idx, val = _pick(values, mask, maximize)
        if idx < 0 and best_x is None:
            raise InfeasibleError(f"grid search found no feasible point among {len(points)} candidates")
        if idx >= 0 and (_better(val, best_val, maximize)
                         or (val == best_val and tuple(points[idx]) < tuple(best_x))):
            best_x, best_val = points[idx].copy(), val

        history.append(best_val)
        logger.debug(f"grid_search round {level}: best={best_val:.6g} at {np.round(best_x, 6).tolist()}")

        current = [g.zoom(x, bound) for g, x, bound in zip(current, best_x, grids)]

    return OptimizeResult(x=best_x, fun=best_val, nfev=nfev, nit=rounds + 1,
                          success=True, status=0, history=history,
                          message="Grid complete")


def coordinate_search(objective: Callable, x0: Sequence[float], grids: Sequence[SearchGrid],
                      sweeps: int = 3, maximize: bool = True, vectorized: bool = False,
                      feasibility: Optional[Callable] = None,
                      bounds: Optional[Callable[[int, np.ndarray], Tuple[float, float]]] = None) -> OptimizeResult:
    """
    Cyclic coordinate grid search with zoom refinement

    Each sweep scans every coordinate on its own grid while the others are
    held fixed, moving only on strict improvement. Sweeps stop early when a
    full pass does not move. After the sweeps of one round, every grid is
    zoomed around the incumbent.

    Args:
        objective: Same calling convention as grid_search
        x0: Feasible starting point
        grids: One SearchGrid per coordinate; refinement_rounds of the first
            grid sets the number of zoom rounds
        sweeps: Maximum passes per round
        bounds: Optional bounds(i, x) -> (lo, hi) narrowing coordinate i given x

    Returns:
        OptimizeResult with x, fun, nfev, nit and per-round history

    Raises:
        InfeasibleError: the starting point itself is infeasible
    """
    grids = list(grids)
    x = np.asarray(x0, dtype=float).copy()
    rounds = max(g.refinement_rounds for g in grids)

    start = x[None, :]
    f_x = _evaluate(objective, start, vectorized, 1)[0]
    ok = _feasible_mask(feasibility, start, vectorized)[0]
    if not (ok and np.isfinite(f_x)):
        raise InfeasibleError("coordinate search needs a feasible starting point")

    nfev, history = 1, []
    current = grids
    for level in range(rounds + 1):
        for sweep in range(sweeps):
            moved = False
            for i, grid in enumerate(current):
                axis = grid.values()
                if bounds is not None:
                    lo, hi = bounds(i, x)
                    axis = axis[(axis >= lo) & (axis <= hi)]
                if axis.size == 0:
                    continue
                points = np.repeat(x[None, :], axis.size, axis=0)
                points[:, i] = axis
                values = _evaluate(objective, points, vectorized, 1)
                mask = _feasible_mask(feasibility, points, vectorized)
                nfev += axis.size
                idx, val = _pick(values, mask, maximize)
                if idx >= 0 and _better(val, f_x, maximize):
                    x[i], f_x, moved = axis[idx], val, True
            logger.debug(f"coordinate_search round {level} sweep {sweep}: best={f_x:.6g}")
            if not moved:
                break
        history.append(f_x)
        current = [g.zoom(xi, bound) for g, xi, bound in zip(current, x, grids)]

    return OptimizeResult(x=x, fun=f_x, nfev=nfev, nit=rounds + 1, success=True,
                          status=0, history=history, message="Coordinate search complete")
