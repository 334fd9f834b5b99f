"""Finite-horizon causal measure algebra.

Kernels are families of per-step stochastic tables over a shared
:class:`AlphabetSpec`.  Every dense object lives on one canonical layout:
the interleaved coordinate order ``(x_0, y_0, ..., x_n, y_n)``, row-major,
so a history's table row index equals the mixed-radix code of its
interleaved prefix.  Values are immutable after construction and all
operations are pure functions; nothing here mutates its arguments.

Entropy-like quantities are in nats.  The conventions ``0 log 0 = 0`` and
``x log(x/0) = +inf`` for ``x > 0`` apply throughout.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Literal, Sequence, Union

import numpy as np

from .errors import DomainError, SpecMismatch
from .indexing import product_size

# Mass-conservation tolerance.  Inputs outside it are rejected, never
# silently renormalized.
PMF_TOL = 1e-12

# Ceiling on dense cell counts; override with the DIRINFO_CELL_CAP
# environment variable.
DEFAULT_CELL_CAP = 10_000_000

# Divergences are clamped to zero only within this band; anything more
# negative is treated as a genuine domain error, not rounding dust.
_NEG_CLAMP = 1e-12


def active_cell_cap() -> int:
    """Current dense-size ceiling, honouring ``DIRINFO_CELL_CAP`` if set."""
    raw = os.environ.get("DIRINFO_CELL_CAP", "").strip()
    if not raw:
        return DEFAULT_CELL_CAP
    try:
        cap = int(raw)
    except ValueError as exc:
        raise DomainError(f"DIRINFO_CELL_CAP must be an integer, got {raw!r}") from exc
    if cap < 1:
        raise DomainError("DIRINFO_CELL_CAP must be positive")
    return cap


# ---------------------------------------------------------------------------
# alphabet spec
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AlphabetSpec:
    """Time index set ``{0, ..., n}`` with per-step alphabet sizes.

    ``x_sizes[i]`` is ``|X_i|`` and ``y_sizes[i]`` is ``|Y_i|``.  The dense
    cell count ``prod(x_sizes) * prod(y_sizes)`` must stay at or below the
    active cap; larger requests are rejected at construction.
    """

    horizon_n: int
    x_sizes: tuple[int, ...]
    y_sizes: tuple[int, ...]

    def __post_init__(self):
        if not isinstance(self.horizon_n, int) or self.horizon_n < 0:
            raise DomainError(f"horizon_n must be a nonnegative integer, got {self.horizon_n!r}")
        object.__setattr__(self, "x_sizes", tuple(int(s) for s in self.x_sizes))
        object.__setattr__(self, "y_sizes", tuple(int(s) for s in self.y_sizes))
        steps = self.horizon_n + 1
        if len(self.x_sizes) != steps or len(self.y_sizes) != steps:
            raise DomainError(
                f"need {steps} alphabet sizes per side, got "
                f"{len(self.x_sizes)} for X and {len(self.y_sizes)} for Y"
            )
        if any(s < 1 for s in self.x_sizes + self.y_sizes):
            raise DomainError("alphabet sizes must be at least 1")
        cap = active_cell_cap()
        if self.total_cells > cap:
            raise DomainError(
                f"dense joint would need {self.total_cells} cells, above the cap of {cap}"
            )

    # -- sizes ---------------------------------------------------------

    @property
    def steps(self) -> int:
        return self.horizon_n + 1

    @property
    def num_x_paths(self) -> int:
        return product_size(self.x_sizes)

    @property
    def num_y_paths(self) -> int:
        return product_size(self.y_sizes)

    @property
    def num_y_histories(self) -> int:
        """Paths of ``Y_0..Y_{n-1}``, the conditioning set of a backward family."""
        return self.y_prefix_count(self.horizon_n)

    @property
    def total_cells(self) -> int:
        return self.num_x_paths * self.num_y_paths

    @property
    def interleaved_shape(self) -> tuple[int, ...]:
        shape = []
        for xs, ys in zip(self.x_sizes, self.y_sizes):
            shape.append(xs)
            shape.append(ys)
        return tuple(shape)

    # -- history counts --------------------------------------------------

    def x_prefix_count(self, i: int) -> int:
        return product_size(self.x_sizes[:i])

    def y_prefix_count(self, i: int) -> int:
        return product_size(self.y_sizes[:i])

    def input_history_count(self, i: int) -> int:
        """Rows of the step-``i`` input table, histories ``(x^{i-1}, y^{i-1})``."""
        return self.x_prefix_count(i) * self.y_prefix_count(i)

    def output_history_count(self, i: int) -> int:
        """Rows of the step-``i`` output table, histories ``(x^i, y^{i-1})``."""
        return self.input_history_count(i) * self.x_sizes[i]


def _require_same_spec(*objs) -> AlphabetSpec:
    spec = objs[0].spec
    for o in objs[1:]:
        if o.spec != spec:
            raise SpecMismatch(f"alphabet specs differ: {spec} vs {o.spec}")
    return spec


# ---------------------------------------------------------------------------
# value types
# ---------------------------------------------------------------------------


def _as_readonly(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=float, copy=True)
    out.setflags(write=False)
    return out


def _validate_rows(rows: np.ndarray, what: str) -> np.ndarray:
    """Check that the trailing axis of ``rows`` holds probability vectors."""
    rows = np.asarray(rows, dtype=float)
    if not np.all(np.isfinite(rows)):
        raise DomainError(f"{what} contains non-finite entries")
    if np.any(rows < 0):
        raise DomainError(f"{what} contains negative entries")
    gap = float(np.abs(rows.sum(axis=-1) - 1.0).max())
    if gap > PMF_TOL:
        raise DomainError(f"{what} rows must sum to 1 within {PMF_TOL:g}; worst gap {gap:.3e}")
    return _as_readonly(rows)


@dataclass(frozen=True, eq=False)
class Pmf:
    """Probability vector on a finite set, dense and immutable."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1:
            raise DomainError(f"Pmf weights must be one-dimensional, got shape {w.shape}")
        if w.size == 0:
            raise DomainError("Pmf must have at least one outcome")
        object.__setattr__(self, "weights", _validate_rows(w, "Pmf"))

    @property
    def size(self) -> int:
        return self.weights.size

    def __len__(self) -> int:
        return self.weights.size


@dataclass(frozen=True)
class InfoValue:
    """A nonnegative, possibly infinite information quantity in nats."""

    value: float

    def __post_init__(self):
        v = float(self.value)
        if math.isnan(v):
            raise DomainError("information value is NaN")
        if v < 0:
            if v < -_NEG_CLAMP:
                raise DomainError(f"information value {v} is negative beyond rounding tolerance")
            v = 0.0
        object.__setattr__(self, "value", v)

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.value)

    @property
    def bits(self) -> float:
        return self.value / math.log(2.0)

    def __float__(self) -> float:
        return self.value

    def __add__(self, other: "InfoValue") -> "InfoValue":
        if not isinstance(other, InfoValue):
            return NotImplemented
        return InfoValue(self.value + other.value)

    def __radd__(self, other):
        # lets sum() work with its integer start value
        if other == 0:
            return self
        return NotImplemented


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------


def _check_tables(
    spec: AlphabetSpec,
    tables: Sequence[np.ndarray],
    row_count,
    sym_sizes: tuple[int, ...],
    what: str,
) -> tuple[np.ndarray, ...]:
    if len(tables) != spec.steps:
        raise SpecMismatch(f"{what} needs {spec.steps} step tables, got {len(tables)}")
    out = []
    for i, t in enumerate(tables):
        t = np.asarray(t, dtype=float)
        want = (row_count(i), sym_sizes[i])
        if t.shape != want:
            raise SpecMismatch(f"{what} table {i} has shape {t.shape}, expected {want}")
        out.append(_validate_rows(t, f"{what} table {i}"))
    return tuple(out)


@dataclass(frozen=True, eq=False)
class BackwardKernel:
    """Per-step input laws ``p_i(x_i | x^{i-1}, y^{i-1})``.

    ``tables[i]`` has one row per interleaved history prefix (row index =
    mixed-radix code of ``(x_0, y_0, ..., x_{i-1}, y_{i-1})``) and one
    column per symbol of ``X_i``.  The step-0 table has a single row.
    """

    spec: AlphabetSpec
    tables: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(
            self,
            "tables",
            _check_tables(
                self.spec, self.tables, self.spec.input_history_count,
                self.spec.x_sizes, "backward kernel",
            ),
        )

    @classmethod
    def uniform(cls, spec: AlphabetSpec) -> "BackwardKernel":
        tables = [
            np.full((spec.input_history_count(i), spec.x_sizes[i]), 1.0 / spec.x_sizes[i])
            for i in range(spec.steps)
        ]
        return cls(spec, tuple(tables))

    @classmethod
    def from_feedback_free_tables(
        cls, spec: AlphabetSpec, tables: Sequence[np.ndarray]
    ) -> "BackwardKernel":
        """Build a kernel that ignores output history.

        ``tables[i]`` is keyed by ``x^{i-1}`` alone, shape
        ``(x_prefix_count(i), x_sizes[i])``; it is replicated across all
        ``y^{i-1}``.
        """
        if len(tables) != spec.steps:
            raise SpecMismatch(f"need {spec.steps} step tables, got {len(tables)}")
        full = [
            _expand_x_keyed_table(spec, i, np.asarray(t, dtype=float))
            for i, t in enumerate(tables)
        ]
        return cls(spec, tuple(full))


@dataclass(frozen=True, eq=False)
class ForwardKernel:
    """Per-step output laws ``q_i(y_i | x^i, y^{i-1})``.

    ``tables[i]`` has one row per interleaved history prefix extended by the
    current input (row index = mixed-radix code of
    ``(x_0, y_0, ..., x_{i-1}, y_{i-1}, x_i)``) and one column per symbol
    of ``Y_i``.
    """

    spec: AlphabetSpec
    tables: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(
            self,
            "tables",
            _check_tables(
                self.spec, self.tables, self.spec.output_history_count,
                self.spec.y_sizes, "forward kernel",
            ),
        )

    @classmethod
    def uniform(cls, spec: AlphabetSpec) -> "ForwardKernel":
        tables = [
            np.full((spec.output_history_count(i), spec.y_sizes[i]), 1.0 / spec.y_sizes[i])
            for i in range(spec.steps)
        ]
        return cls(spec, tuple(tables))

    @classmethod
    def from_input_free_tables(
        cls, spec: AlphabetSpec, tables: Sequence[np.ndarray]
    ) -> "ForwardKernel":
        """Build a kernel that ignores the whole input path.

        ``tables[i]`` is keyed by ``y^{i-1}`` alone, shape
        ``(y_prefix_count(i), y_sizes[i])``.
        """
        if len(tables) != spec.steps:
            raise SpecMismatch(f"need {spec.steps} step tables, got {len(tables)}")
        full = [
            _expand_y_keyed_table(spec, i, np.asarray(t, dtype=float))
            for i, t in enumerate(tables)
        ]
        return cls(spec, tuple(full))


def _expand_x_keyed_table(spec: AlphabetSpec, i: int, tied: np.ndarray) -> np.ndarray:
    """Replicate a table keyed by ``x^{i-1}`` across all ``y^{i-1}``."""
    want = (spec.x_prefix_count(i), spec.x_sizes[i])
    if tied.shape != want:
        raise SpecMismatch(f"step {i} table has shape {tied.shape}, expected {want}")
    src = tied.reshape(
        tuple(v for s in spec.x_sizes[:i] for v in (s, 1)) + (spec.x_sizes[i],)
    )
    full_shape = spec.interleaved_shape[: 2 * i] + (spec.x_sizes[i],)
    return np.broadcast_to(src, full_shape).reshape(spec.input_history_count(i), spec.x_sizes[i])


def _expand_y_keyed_table(spec: AlphabetSpec, i: int, tied: np.ndarray) -> np.ndarray:
    """Replicate a table keyed by ``y^{i-1}`` across all ``(x^{i-1}, x_i)``."""
    want = (spec.y_prefix_count(i), spec.y_sizes[i])
    if tied.shape != want:
        raise SpecMismatch(f"step {i} table has shape {tied.shape}, expected {want}")
    src = tied.reshape(
        tuple(v for s in spec.y_sizes[:i] for v in (1, s)) + (1, spec.y_sizes[i])
    )
    full_shape = spec.interleaved_shape[: 2 * i] + (spec.x_sizes[i], spec.y_sizes[i])
    return np.broadcast_to(src, full_shape).reshape(
        spec.output_history_count(i), spec.y_sizes[i]
    )


def ignores_output_history(kernel: BackwardKernel, tol: float = 1e-12) -> bool:
    """True when every step table of ``kernel`` is constant across ``y^{i-1}``."""
    spec = kernel.spec
    for i, t in enumerate(kernel.tables):
        prefix = spec.interleaved_shape[: 2 * i] + (spec.x_sizes[i],)
        arr = t.reshape(prefix)
        y_axes = tuple(range(1, 2 * i, 2))
        ref = arr.mean(axis=y_axes, keepdims=True) if y_axes else arr
        if float(np.abs(arr - ref).max()) > tol:
            return False
    return True


# ---------------------------------------------------------------------------
# dense measures
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class JointMeasure:
    """Dense probability measure on the full path space, interleaved layout."""

    spec: AlphabetSpec
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != self.spec.interleaved_shape:
            raise SpecMismatch(
                f"joint weights have shape {w.shape}, expected {self.spec.interleaved_shape}"
            )
        if not np.all(np.isfinite(w)):
            raise DomainError("joint weights contain non-finite entries")
        if np.any(w < 0):
            raise DomainError("joint weights contain negative entries")
        total = float(w.sum())
        if abs(total - 1.0) > PMF_TOL:
            raise DomainError(f"joint mass is {total!r}, not 1 within {PMF_TOL:g}")
        object.__setattr__(self, "weights", _as_readonly(w))


@dataclass(frozen=True, eq=False)
class ConditionedFamily:
    """Whole-path conditional laws, one probability row per conditioning path.

    ``given="x"`` holds ``Q(y^n | x^n)`` with rows indexed by ``X``-paths;
    ``given="y"`` holds ``P(x^n | y^{n-1})`` with rows indexed by
    ``Y_0..Y_{n-1}``-paths.  This is the level at which mixtures of kernels
    are taken; mixing per-step tables is not the same operation.
    """

    spec: AlphabetSpec
    given: Literal["x", "y"]
    table: np.ndarray

    def __post_init__(self):
        if self.given == "x":
            want = (self.spec.num_x_paths, self.spec.num_y_paths)
        elif self.given == "y":
            want = (self.spec.num_y_histories, self.spec.num_x_paths)
        else:
            raise DomainError(f'given must be "x" or "y", got {self.given!r}')
        t = np.asarray(self.table, dtype=float)
        if t.shape != want:
            raise SpecMismatch(f"conditioned table has shape {t.shape}, expected {want}")
        object.__setattr__(self, "table", _validate_rows(t, "conditioned family"))


# ---------------------------------------------------------------------------
# layout helpers
# ---------------------------------------------------------------------------


def _x_axes(ndim: int) -> tuple[int, ...]:
    return tuple(range(0, ndim, 2))


def _y_axes(ndim: int) -> tuple[int, ...]:
    return tuple(range(1, ndim, 2))


def _input_path_weights(spec: AlphabetSpec, tables: Sequence[np.ndarray]) -> np.ndarray:
    """Product of input tables as an interleaved array; the ``y_n`` axis stays 1."""
    shape = spec.interleaved_shape
    ndim = len(shape)
    arr = np.ones((1,) * ndim)
    for i, t in enumerate(tables):
        fshape = shape[: 2 * i] + (spec.x_sizes[i],) + (1,) * (ndim - 2 * i - 1)
        arr = arr * t.reshape(fshape)
    return arr


def _output_path_weights(spec: AlphabetSpec, tables: Sequence[np.ndarray]) -> np.ndarray:
    """Product of output tables as a full interleaved array."""
    shape = spec.interleaved_shape
    ndim = len(shape)
    arr = np.ones((1,) * ndim)
    for i, t in enumerate(tables):
        fshape = shape[: 2 * i + 1] + (spec.y_sizes[i],) + (1,) * (ndim - 2 * i - 2)
        arr = arr * t.reshape(fshape)
    return arr


def _xy_matrix(spec: AlphabetSpec, weights: np.ndarray) -> np.ndarray:
    """Reorder an interleaved array into an (X-paths, Y-paths) matrix."""
    ndim = 2 * spec.steps
    perm = _x_axes(ndim) + _y_axes(ndim)
    return weights.transpose(perm).reshape(spec.num_x_paths, spec.num_y_paths)


def _from_xy_matrix(spec: AlphabetSpec, matrix: np.ndarray) -> np.ndarray:
    """Inverse of :func:`_xy_matrix`."""
    ndim = 2 * spec.steps
    arr = matrix.reshape(spec.x_sizes + spec.y_sizes)
    perm = [a for i in range(spec.steps) for a in (i, spec.steps + i)]
    assert len(perm) == ndim
    return arr.transpose(perm)


def joint_path_matrix(joint: JointMeasure) -> np.ndarray:
    """Joint weights as a matrix with X-path rows and Y-path columns."""
    return _xy_matrix(joint.spec, joint.weights)


# ---------------------------------------------------------------------------
# constructions
# ---------------------------------------------------------------------------


def build_joint(p: BackwardKernel, q: ForwardKernel) -> JointMeasure:
    """Joint path law induced by interleaving input and output steps.

    Cell ``(x^n, y^n)`` carries ``prod_i p_i(x_i|...) q_i(y_i|...)``.
    """
    spec = _require_same_spec(p, q)
    w = _input_path_weights(spec, p.tables) * _output_path_weights(spec, q.tables)
    return JointMeasure(spec, w)


def marginal_x(joint: JointMeasure) -> Pmf:
    """Input-path marginal, indexed by the row-major code of ``x^n``."""
    w = joint.weights.sum(axis=_y_axes(joint.weights.ndim))
    return Pmf(w.reshape(-1))


def marginal_y(joint: JointMeasure) -> Pmf:
    """Output-path marginal, indexed by the row-major code of ``y^n``."""
    w = joint.weights.sum(axis=_x_axes(joint.weights.ndim))
    return Pmf(w.reshape(-1))


def product_pi_forward(p: BackwardKernel, nu: Pmf) -> JointMeasure:
    """Product of an input kernel with an output-path law: ``p (x|y) * nu(y)``."""
    spec = p.spec
    if nu.size != spec.num_y_paths:
        raise SpecMismatch(
            f"nu has {nu.size} outcomes, expected {spec.num_y_paths} output paths"
        )
    ndim = 2 * spec.steps
    nu_shape = tuple(
        spec.y_sizes[a // 2] if a % 2 else 1 for a in range(ndim)
    )
    w = _input_path_weights(spec, p.tables) * nu.weights.reshape(nu_shape)
    return JointMeasure(spec, w)


def product_pi_backward(mu: Pmf, q: ForwardKernel) -> JointMeasure:
    """Product of an input-path law with an output kernel: ``mu(x) * q(y|x)``."""
    spec = q.spec
    if mu.size != spec.num_x_paths:
        raise SpecMismatch(
            f"mu has {mu.size} outcomes, expected {spec.num_x_paths} input paths"
        )
    ndim = 2 * spec.steps
    mu_shape = tuple(
        spec.x_sizes[a // 2] if a % 2 == 0 else 1 for a in range(ndim)
    )
    w = mu.weights.reshape(mu_shape) * _output_path_weights(spec, q.tables)
    return JointMeasure(spec, w)


DenseLike = Union[Pmf, JointMeasure, np.ndarray]


def _dense_weights(obj: DenseLike) -> np.ndarray:
    if isinstance(obj, Pmf):
        return obj.weights
    if isinstance(obj, JointMeasure):
        return obj.weights.reshape(-1)
    return np.asarray(obj, dtype=float).reshape(-1)


def kl_divergence(a: DenseLike, b: DenseLike) -> InfoValue:
    """Relative entropy ``D(a || b)`` in nats over a shared index space.

    Cells with ``a = 0`` contribute nothing; a cell with ``a > 0`` and
    ``b = 0`` makes the divergence infinite.
    """
    wa = _dense_weights(a)
    wb = _dense_weights(b)
    if wa.shape != wb.shape:
        raise SpecMismatch(f"operands index different spaces: {wa.shape} vs {wb.shape}")
    mask = wa > 0
    num = wa[mask]
    den = wb[mask]
    if np.any(den <= 0):
        return InfoValue(math.inf)
    return InfoValue(float(np.sum(num * (np.log(num) - np.log(den)))))


# ---------------------------------------------------------------------------
# extraction, conditioning, mixing, refactoring
# ---------------------------------------------------------------------------


def extract_backward_family(joint: JointMeasure) -> BackwardKernel:
    """Per-step input conditionals of a joint; uniform rows where the
    conditioning history has zero mass."""
    spec = joint.spec
    w = joint.weights
    ndim = w.ndim
    tables = []
    for i in range(spec.steps):
        m = w.sum(axis=tuple(range(2 * i + 1, ndim)))
        rows = m.reshape(spec.input_history_count(i), spec.x_sizes[i])
        tables.append(_normalize_rows(rows, spec.x_sizes[i]))
    return BackwardKernel(spec, tuple(tables))


def extract_forward_family(joint: JointMeasure) -> ForwardKernel:
    """Per-step output conditionals of a joint; uniform rows where the
    conditioning history has zero mass."""
    spec = joint.spec
    w = joint.weights
    ndim = w.ndim
    tables = []
    for i in range(spec.steps):
        m = w.sum(axis=tuple(range(2 * i + 2, ndim)))
        rows = m.reshape(spec.output_history_count(i), spec.y_sizes[i])
        tables.append(_normalize_rows(rows, spec.y_sizes[i]))
    return ForwardKernel(spec, tuple(tables))


def _normalize_rows(rows: np.ndarray, width: int) -> np.ndarray:
    den = rows.sum(axis=-1, keepdims=True)
    safe = np.where(den > 0, den, 1.0)
    return np.where(den > 0, rows / safe, 1.0 / width)


def condition_on_path(kernel: Union[BackwardKernel, ForwardKernel]) -> ConditionedFamily:
    """Collapse a per-step family into whole-path conditional rows.

    A forward kernel becomes ``Q(y^n | x^n)``; a backward kernel becomes
    ``P(x^n | y^{n-1})``.
    """
    spec = kernel.spec
    if isinstance(kernel, ForwardKernel):
        w = _output_path_weights(spec, kernel.tables)
        return ConditionedFamily(spec, "x", _xy_matrix(spec, w))
    if isinstance(kernel, BackwardKernel):
        w = _input_path_weights(spec, kernel.tables)
        arr = w[..., 0]  # drop the unused y_n axis
        ndim = arr.ndim  # (x_0, y_0, ..., x_{n-1}, y_{n-1}, x_n)
        y_first = tuple(range(1, ndim - 1, 2)) + tuple(range(0, ndim, 2))
        mat = arr.transpose(y_first).reshape(spec.num_y_histories, spec.num_x_paths)
        return ConditionedFamily(spec, "y", mat)
    raise TypeError(f"expected a kernel, got {type(kernel).__name__}")


def mix_conditioned(
    a: ConditionedFamily, b: ConditionedFamily, lam: float
) -> ConditionedFamily:
    """Convex combination ``lam * a + (1 - lam) * b`` at the path level."""
    spec = _require_same_spec(a, b)
    if a.given != b.given:
        raise SpecMismatch(f"cannot mix families conditioned on {a.given!r} and {b.given!r}")
    lam = float(lam)
    if math.isnan(lam) or not 0.0 <= lam <= 1.0:
        raise DomainError(f"mixture weight must lie in [0, 1], got {lam!r}")
    return ConditionedFamily(spec, a.given, lam * a.table + (1.0 - lam) * b.table)


def refactor_to_kernel(family: ConditionedFamily) -> Union[BackwardKernel, ForwardKernel]:
    """Rewrite whole-path conditional rows as a per-step kernel.

    For families that already factor causally this inverts
    :func:`condition_on_path` exactly.  In general the step-``i`` table is
    the conditional of the family's marginal after averaging uniformly over
    conditioning coordinates beyond the step's own history; rows whose
    denominator vanishes fall back to uniform.
    """
    spec = family.spec
    n = spec.horizon_n
    if family.given == "x":
        arr = family.table.reshape(spec.x_sizes + spec.y_sizes)
        perm = [a for i in range(spec.steps) for a in (i, spec.steps + i)]
        cond = arr.transpose(perm)  # interleaved layout of Q(y^n | x^n)
        tables = []
        for i in range(spec.steps):
            y_later = tuple(2 * j + 1 for j in range(i + 1, spec.steps))
            x_later = tuple(2 * j for j in range(i + 1, spec.steps))
            m = cond.sum(axis=y_later, keepdims=True)
            m = m.mean(axis=x_later, keepdims=True)
            rows = m.reshape(spec.output_history_count(i), spec.y_sizes[i])
            tables.append(_normalize_rows(rows, spec.y_sizes[i]))
        return ForwardKernel(spec, tuple(tables))
    # given == "y": rows are P(x^n | y^{n-1})
    arr = family.table.reshape(spec.y_sizes[:n] + spec.x_sizes)
    perm = [a for i in range(n) for a in (n + i, i)] + [2 * n]
    cond = arr.transpose(perm)  # (x_0, y_0, ..., x_{n-1}, y_{n-1}, x_n)
    tables = []
    for i in range(spec.steps):
        x_later = tuple(2 * j for j in range(i + 1, spec.steps))
        y_later = tuple(2 * j + 1 for j in range(i, n))
        m = cond.sum(axis=x_later, keepdims=True)
        m = m.mean(axis=y_later, keepdims=True)
        rows = m.reshape(spec.input_history_count(i), spec.x_sizes[i])
        tables.append(_normalize_rows(rows, spec.x_sizes[i]))
    return BackwardKernel(spec, tuple(tables))
