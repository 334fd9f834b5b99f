"""Shared optimizer plumbing for the extremum solvers.

Both solvers walk products of probability simplices with multiplicative
(entropic) updates, monitor a scalar merit value for monotonicity, and
bracket a scalar multiplier by bisection.  The pieces they share live here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError

# Acceptance slack for the monotone-merit check; a candidate step may not
# worsen the merit by more than this.
MERIT_SLACK = 1e-12

_EXP_CLIP = 700.0


@dataclass(frozen=True)
class SolverConfig:
    """Knobs shared by the iterative solvers.

    ``tol`` is the relative improvement below which an inner ascent/descent
    is considered settled, ``multiplier_tol`` the budget gap at which the
    outer bisection stops, ``grid_resolution`` the denominator of the
    brute-force simplex grids, and ``seed`` feeds any randomized restarts
    or sampling done on top.
    """

    tol: float = 1e-9
    max_iters: int = 100_000
    multiplier_tol: float = 1e-6
    grid_resolution: int = 100
    seed: int = 0

    def __post_init__(self):
        if not self.tol > 0:
            raise DomainError("tol must be positive")
        if self.max_iters < 1:
            raise DomainError("max_iters must be at least 1")
        if not self.multiplier_tol > 0:
            raise DomainError("multiplier_tol must be positive")
        if self.grid_resolution < 1:
            raise DomainError("grid_resolution must be at least 1")


DEFAULT_CONFIG = SolverConfig()


def exp_update_rows(rows: np.ndarray, grad: np.ndarray, step: float) -> np.ndarray:
    """One multiplicative-weights step on each probability row.

    Computes ``rows * exp(step * grad)`` row-normalized, with the exponent
    shifted so the largest entry is 0; exact zeros in ``rows`` stay zero.
    """
    z = step * grad
    z = z - z.max(axis=-1, keepdims=True)
    w = rows * np.exp(np.clip(z, -_EXP_CLIP, 0.0))
    den = w.sum(axis=-1, keepdims=True)
    # the max-shift guarantees at least one untouched positive entry per
    # live row, so a zero denominator only happens for all-zero rows
    safe = np.where(den > 0, den, 1.0)
    return np.where(den > 0, w / safe, rows)


@dataclass
class StepSchedule:
    """Diminishing step sizes ``base / sqrt(t)`` with restart-on-reject.

    A rejected candidate halves the base and resets the clock; long accept
    streaks cautiously grow it back.
    """

    base: float = 1.0
    max_base: float = 64.0
    t: int = 1
    streak: int = 0

    def current(self) -> float:
        return self.base / math.sqrt(self.t)

    def accept(self):
        self.t += 1
        self.streak += 1
        if self.streak >= 30:
            self.base = min(self.base * 2.0, self.max_base)
            self.streak = 0

    def reject(self):
        self.base *= 0.5
        self.t = 1
        self.streak = 0

    @property
    def exhausted(self) -> bool:
        return self.base < 1e-13


def monotone_improve(
    evaluate: Callable[[list[np.ndarray]], float],
    gradient: Callable[[list[np.ndarray]], list[np.ndarray]],
    tables: list[np.ndarray],
    sign: float,
    tol: float,
    max_iters: int,
) -> tuple[list[np.ndarray], float, int, bool]:
    """Entropic mirror ascent (+1) or descent (-1) over stacked simplex rows.

    Returns ``(tables, merit, iterations, converged)`` where the merit is
    ``sign * objective`` maximized.  Convergence means five consecutive
    accepted steps with relative merit change below ``tol``, or the step
    size collapsing to numerical stationarity.
    """
    merit = sign * evaluate(tables)
    sched = StepSchedule()
    quiet = 0
    iters = 0
    converged = False
    while iters < max_iters:
        grads = gradient(tables)
        iters += 1
        step = sched.current()
        cand = [exp_update_rows(t, sign * g, step) for t, g in zip(tables, grads)]
        cand_merit = sign * evaluate(cand)
        if cand_merit >= merit - MERIT_SLACK:
            delta = cand_merit - merit
            tables = cand
            merit = cand_merit
            sched.accept()
            if abs(delta) <= tol * max(1.0, abs(merit)):
                quiet += 1
                if quiet >= 5:
                    converged = True
                    break
            else:
                quiet = 0
        else:
            sched.reject()
            quiet = 0
            if sched.exhausted:
                converged = True
                break
    return tables, sign * merit, iters, converged


# ---------------------------------------------------------------------------
# simplex grids for the brute-force oracles
# ---------------------------------------------------------------------------


def composition_count(resolution: int, dim: int) -> int:
    """Number of grid points on a ``dim``-simplex at the given resolution."""
    return math.comb(resolution + dim - 1, dim - 1)


def simplex_grid(resolution: int, dim: int) -> np.ndarray:
    """All probability vectors with entries that are multiples of
    ``1/resolution``, shape ``(composition_count, dim)``."""
    if dim < 1 or resolution < 1:
        raise DomainError("simplex grid needs dim >= 1 and resolution >= 1")
    if dim == 1:
        return np.ones((1, 1))
    points = []
    for cuts in combinations(range(resolution + dim - 1), dim - 1):
        prev = -1
        parts = []
        for c in cuts:
            parts.append(c - prev - 1)
            prev = c
        parts.append(resolution + dim - 2 - prev)
        points.append(parts)
    return np.asarray(points, dtype=float) / resolution


def marginalize_to_input_tables(arr: np.ndarray, spec) -> list[np.ndarray]:
    """Collapse an interleaved array onto each step's input-table layout
    ``(x^{i-1}, y^{i-1}, x_i)`` by summing out later coordinates."""
    ndim = arr.ndim
    out = []
    for i in range(spec.steps):
        m = arr.sum(axis=tuple(range(2 * i + 1, ndim)))
        out.append(m.reshape(spec.input_history_count(i), spec.x_sizes[i]))
    return out


def marginalize_to_output_tables(arr: np.ndarray, spec) -> list[np.ndarray]:
    """Collapse an interleaved array onto each step's output-table layout
    ``(x^i, y^{i-1}, y_i)`` by summing out later coordinates."""
    ndim = arr.ndim
    out = []
    for i in range(spec.steps):
        m = arr.sum(axis=tuple(range(2 * i + 2, ndim)))
        out.append(m.reshape(spec.output_history_count(i), spec.y_sizes[i]))
    return out


def bracket_multiplier(
    budget_gap: Callable[[float], float],
    lo: float = 0.0,
    hi: float = 1.0,
    growth: float = 4.0,
    cap: float = 1e12,
) -> tuple[float, float]:
    """Grow ``hi`` geometrically until ``budget_gap(hi) <= 0``.

    ``budget_gap`` must be (weakly) decreasing in the multiplier; a positive
    value means the budget is still violated.
    """
    while budget_gap(hi) > 0:
        lo = hi
        hi *= growth
        if hi > cap:
            raise DomainError(f"multiplier bracket exceeded {cap:g} without meeting the budget")
    return lo, hi
