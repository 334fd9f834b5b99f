"""Directed information functionals and executable property audits.

Two independent evaluation routes are implemented: a sum of per-step
conditional mutual informations, and a single relative entropy against the
product of the input kernel with the output marginal.  They must agree to
``DUAL_FORMULA_TOL``; a larger gap is reported as an error rather than
silently absorbed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, FormulaDisagreement, NonConvergentSequence
from .measures import (
    BackwardKernel,
    ConditionedFamily,
    ForwardKernel,
    InfoValue,
    JointMeasure,
    _require_same_spec,
    build_joint,
    condition_on_path,
    kl_divergence,
    marginal_x,
    marginal_y,
    mix_conditioned,
    product_pi_forward,
    refactor_to_kernel,
)

DUAL_FORMULA_TOL = 1e-9
MIXTURE_TOL = 1e-9
TV_LIMIT_TOL = 1e-6
_TV_MONOTONE_SLACK = 1e-12


def per_step_information(p: BackwardKernel, q: ForwardKernel) -> tuple[InfoValue, ...]:
    """Conditional mutual information between the input prefix and the
    current output given past outputs, one term per step."""
    spec = _require_same_spec(p, q)
    w = build_joint(p, q).weights
    ndim = w.ndim
    terms = []
    for i in range(spec.steps):
        j = w.sum(axis=tuple(range(2 * i + 2, ndim)))  # prefix law on (x^i, y^i)
        b = j.sum(axis=2 * i + 1, keepdims=True)       # (x^i, y^{i-1})
        c = j.sum(axis=tuple(range(0, 2 * i + 2, 2)), keepdims=True)  # (y^i)
        d = c.sum(axis=2 * i + 1, keepdims=True)       # (y^{i-1})
        mask = j > 0
        num = j[mask]
        terms.append(
            InfoValue(
                float(
                    np.sum(
                        num
                        * (
                            np.log(num)
                            - np.log(np.broadcast_to(b, j.shape)[mask])
                            - np.log(np.broadcast_to(c, j.shape)[mask])
                            + np.log(np.broadcast_to(d, j.shape)[mask])
                        )
                    )
                )
            )
        )
    return tuple(terms)


def directed_information_divergence(p: BackwardKernel, q: ForwardKernel) -> InfoValue:
    """Directed information as one relative entropy: the joint against the
    product of the input kernel with the joint's own output marginal."""
    _require_same_spec(p, q)
    joint = build_joint(p, q)
    return kl_divergence(joint, product_pi_forward(p, marginal_y(joint)))


@dataclass(frozen=True)
class DirectedInfoReport:
    """Both evaluation routes plus the per-step decomposition, in nats."""

    sum_form: InfoValue
    divergence_form: InfoValue
    per_step_terms: tuple[InfoValue, ...]
    normalized: float

    def __post_init__(self):
        total = sum(t.value for t in self.per_step_terms)
        if math.isfinite(total) and abs(total - self.sum_form.value) > 1e-9:
            raise FormulaDisagreement(
                f"per-step terms sum to {total}, reported sum form is {self.sum_form.value}"
            )
        a, b = self.sum_form.value, self.divergence_form.value
        if math.isinf(a) != math.isinf(b):
            raise FormulaDisagreement(f"one route is infinite, the other is not: {a} vs {b}")
        if math.isfinite(a) and abs(a - b) > DUAL_FORMULA_TOL:
            raise FormulaDisagreement(
                f"evaluation routes disagree: sum form {a!r}, divergence form {b!r}"
            )


def directed_information_sum(p: BackwardKernel, q: ForwardKernel) -> DirectedInfoReport:
    """Directed information with both routes evaluated and cross-checked."""
    spec = _require_same_spec(p, q)
    terms = per_step_information(p, q)
    total = InfoValue(float(sum(t.value for t in terms)))
    div = directed_information_divergence(p, q)
    return DirectedInfoReport(total, div, terms, total.value / spec.steps)


def directed_information(p: BackwardKernel, q: ForwardKernel) -> float:
    """Plain float value of the sum route, the package's default evaluator."""
    return float(sum(t.value for t in per_step_information(p, q)))


def mutual_information(joint: JointMeasure) -> InfoValue:
    """Mutual information between full input and output paths, in nats."""
    spec = joint.spec
    ndim = 2 * spec.steps
    mu = marginal_x(joint).weights.reshape(
        tuple(spec.x_sizes[a // 2] if a % 2 == 0 else 1 for a in range(ndim))
    )
    nu = marginal_y(joint).weights.reshape(
        tuple(spec.y_sizes[a // 2] if a % 2 else 1 for a in range(ndim))
    )
    return kl_divergence(joint.weights, mu * nu)


# ---------------------------------------------------------------------------
# mixture audits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MixtureAudit:
    """Outcome of checking directed information along one mixture segment.

    ``violations[k]`` is how far the value at ``lambdas[k]`` lands on the
    wrong side of the chord; the audit passes when the worst one stays
    within tolerance.
    """

    direction: str  # "convex-in-output" or "concave-in-input"
    lambdas: tuple[float, ...]
    endpoint_a: float
    endpoint_b: float
    mixture_values: tuple[float, ...]
    violations: tuple[float, ...]
    max_violation: float
    tolerance: float = MIXTURE_TOL

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tolerance


def _check_lambda_grid(lambda_grid: Sequence[float]) -> tuple[float, ...]:
    grid = tuple(float(v) for v in lambda_grid)
    if not grid:
        raise DomainError("lambda grid must not be empty")
    for v in grid:
        if math.isnan(v) or not 0.0 <= v <= 1.0:
            raise DomainError(f"mixture weight must lie in [0, 1], got {v!r}")
    return grid


def check_convexity_in_q(
    p: BackwardKernel,
    q1: ForwardKernel,
    q2: ForwardKernel,
    lambda_grid: Sequence[float],
) -> MixtureAudit:
    """Audit convexity in the output argument along one mixture segment.

    Mixtures are taken between whole-path conditional families, then
    refactored into per-step kernels; mixing the step tables directly would
    test a different (and false) statement.
    """
    _require_same_spec(p, q1, q2)
    grid = _check_lambda_grid(lambda_grid)
    c1 = condition_on_path(q1)
    c2 = condition_on_path(q2)
    v1 = directed_information(p, q1)
    v2 = directed_information(p, q2)
    values = []
    violations = []
    for lam in grid:
        q_mix = refactor_to_kernel(mix_conditioned(c1, c2, lam))
        v_mix = directed_information(p, q_mix)
        values.append(v_mix)
        violations.append(v_mix - (lam * v1 + (1.0 - lam) * v2))
    return MixtureAudit(
        direction="convex-in-output",
        lambdas=grid,
        endpoint_a=v1,
        endpoint_b=v2,
        mixture_values=tuple(values),
        violations=tuple(violations),
        max_violation=max(violations),
    )


def check_concavity_in_p(
    q: ForwardKernel,
    p1: BackwardKernel,
    p2: BackwardKernel,
    lambda_grid: Sequence[float],
) -> MixtureAudit:
    """Audit concavity in the input argument along one mixture segment.

    As with the convex direction, the mixture is taken at the whole-path
    conditional level and refactored back into step tables.
    """
    _require_same_spec(q, p1, p2)
    grid = _check_lambda_grid(lambda_grid)
    c1 = condition_on_path(p1)
    c2 = condition_on_path(p2)
    v1 = directed_information(p1, q)
    v2 = directed_information(p2, q)
    values = []
    violations = []
    for lam in grid:
        p_mix = refactor_to_kernel(mix_conditioned(c1, c2, lam))
        v_mix = directed_information(p_mix, q)
        values.append(v_mix)
        violations.append((lam * v1 + (1.0 - lam) * v2) - v_mix)
    return MixtureAudit(
        direction="concave-in-input",
        lambdas=grid,
        endpoint_a=v1,
        endpoint_b=v2,
        mixture_values=tuple(values),
        violations=tuple(violations),
        max_violation=max(violations),
    )


# ---------------------------------------------------------------------------
# semicontinuity audit
# ---------------------------------------------------------------------------


def tv_distance(a: ConditionedFamily, b: ConditionedFamily) -> float:
    """Worst-row total variation distance between two conditioned families."""
    _require_same_spec(a, b)
    if a.given != b.given:
        raise DomainError(f"families condition on {a.given!r} and {b.given!r}")
    return float(0.5 * np.abs(a.table - b.table).sum(axis=-1).max())


@dataclass(frozen=True)
class LscAudit:
    """Outcome of a lower-semicontinuity check along one kernel sequence.

    The sequence must approach the limit kernel in (monotone) total
    variation; the audit then asks that the limit value not exceed the tail
    of the value sequence by more than the tolerance.
    """

    tv_distances: tuple[float, ...]
    sequence_values: tuple[float, ...]
    limit_value: float
    tail_infimum: float
    violation: float
    tolerance: float = MIXTURE_TOL

    @property
    def passed(self) -> bool:
        return self.violation <= self.tolerance


def check_lower_semicontinuity(
    p: BackwardKernel,
    q_limit: ForwardKernel,
    q_sequence: Sequence[ForwardKernel],
) -> LscAudit:
    """Audit lower semicontinuity of the value along a convergent sequence.

    Raises :class:`NonConvergentSequence` unless the total variation gaps
    are nonincreasing and the final gap is below ``TV_LIMIT_TOL``.  The
    tail infimum is taken over the last quarter of the sequence (at least
    one element).
    """
    _require_same_spec(p, q_limit, *q_sequence)
    if not q_sequence:
        raise DomainError("need at least one sequence element")
    c_limit = condition_on_path(q_limit)
    tvs = [tv_distance(condition_on_path(qk), c_limit) for qk in q_sequence]
    for earlier, later in zip(tvs, tvs[1:]):
        if later > earlier + _TV_MONOTONE_SLACK:
            raise NonConvergentSequence(
                f"total variation increased along the sequence: {earlier} -> {later}"
            )
    if tvs[-1] > TV_LIMIT_TOL:
        raise NonConvergentSequence(
            f"sequence stops {tvs[-1]:.3e} away from the limit, above {TV_LIMIT_TOL:g}"
        )
    values = [directed_information(p, qk) for qk in q_sequence]
    limit_value = directed_information(p, q_limit)
    tail = values[-max(1, len(values) // 4):]
    tail_inf = min(tail)
    return LscAudit(
        tv_distances=tuple(tvs),
        sequence_values=tuple(values),
        limit_value=limit_value,
        tail_infimum=tail_inf,
        violation=limit_value - tail_inf,
    )
