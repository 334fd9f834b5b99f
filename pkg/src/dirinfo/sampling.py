"""Seeded random generators for specs, kernels, and measures.

All draws route through ``numpy.random.Generator`` so any suite run is
reproducible from a single integer seed.  Row distributions are Dirichlet
with an optional mass floor to keep logs bounded in stress tests.
"""
from __future__ import annotations

from typing import Optional

import numpy as np

from .measures import AlphabetSpec, BackwardKernel, ForwardKernel, Pmf


def rng_from_seed(seed: Optional[int]) -> np.random.Generator:
    return np.random.default_rng(seed)


def _rows(rng: np.random.Generator, shape: tuple[int, int], min_mass: float) -> np.ndarray:
    rows = rng.dirichlet(np.ones(shape[1]), size=shape[0])
    if min_mass > 0.0:
        rows = rows * (1.0 - shape[1] * min_mass) + min_mass
    # defensive renormalization against accumulated rounding
    return rows / rows.sum(axis=-1, keepdims=True)


def random_pmf(rng: np.random.Generator, size: int, min_mass: float = 0.0) -> Pmf:
    return Pmf(_rows(rng, (1, size), min_mass)[0])


def random_backward_kernel(
    rng: np.random.Generator, spec: AlphabetSpec, min_mass: float = 0.0
) -> BackwardKernel:
    tables = [
        _rows(rng, (spec.input_history_count(i), spec.x_sizes[i]), min_mass)
        for i in range(spec.steps)
    ]
    return BackwardKernel(spec, tuple(tables))


def random_forward_kernel(
    rng: np.random.Generator, spec: AlphabetSpec, min_mass: float = 0.0
) -> ForwardKernel:
    tables = [
        _rows(rng, (spec.output_history_count(i), spec.y_sizes[i]), min_mass)
        for i in range(spec.steps)
    ]
    return ForwardKernel(spec, tuple(tables))


def random_feedback_free_kernel(
    rng: np.random.Generator, spec: AlphabetSpec, min_mass: float = 0.0
) -> BackwardKernel:
    """Input law whose step tables ignore the output history."""
    tables = [
        _rows(rng, (spec.x_prefix_count(i), spec.x_sizes[i]), min_mass)
        for i in range(spec.steps)
    ]
    return BackwardKernel.from_feedback_free_tables(spec, tables)


def random_input_free_kernel(
    rng: np.random.Generator, spec: AlphabetSpec, min_mass: float = 0.0
) -> ForwardKernel:
    """Channel whose step tables ignore the input entirely."""
    tables = [
        _rows(rng, (spec.y_prefix_count(i), spec.y_sizes[i]), min_mass)
        for i in range(spec.steps)
    ]
    return ForwardKernel.from_input_free_tables(spec, tables)


def random_spec(
    rng: np.random.Generator, max_horizon: int = 2, max_size: int = 3
) -> AlphabetSpec:
    """Small random problem shape: horizon up to ``max_horizon`` and
    alphabet sizes in 2..``max_size``."""
    n = int(rng.integers(0, max_horizon + 1))
    xs = tuple(int(rng.integers(2, max_size + 1)) for _ in range(n + 1))
    ys = tuple(int(rng.integers(2, max_size + 1)) for _ in range(n + 1))
    return AlphabetSpec(n, xs, ys)
