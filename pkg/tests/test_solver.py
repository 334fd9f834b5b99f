import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import dirinfo as di
from dirinfo.solver import (
    MERIT_SLACK,
    SolverConfig,
    StepSchedule,
    bracket_multiplier,
    composition_count,
    exp_update_rows,
    marginalize_to_input_tables,
    marginalize_to_output_tables,
    monotone_improve,
    simplex_grid,
)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


def test_config_defaults_and_validation():
    cfg = SolverConfig()
    assert cfg.tol == 1e-9 and cfg.multiplier_tol == 1e-6
    assert cfg.grid_resolution == 100
    for bad in (
        dict(tol=0.0),
        dict(tol=-1e-9),
        dict(max_iters=0),
        dict(multiplier_tol=0.0),
        dict(grid_resolution=0),
    ):
        with pytest.raises(di.DomainError):
            SolverConfig(**bad)


# ---------------------------------------------------------------------------
# multiplicative updates
# ---------------------------------------------------------------------------


def test_exp_update_keeps_rows_stochastic_and_zeros_fixed():
    rows = np.array([[0.5, 0.5, 0.0], [0.2, 0.3, 0.5]])
    grad = np.array([[1.0, -1.0, 100.0], [0.0, 0.0, 0.0]])
    out = exp_update_rows(rows, grad, 0.7)
    assert np.allclose(out.sum(axis=1), 1.0)
    assert out[0, 2] == 0.0
    assert out[0, 0] > rows[0, 0]
    # zero gradient leaves the row untouched
    assert np.allclose(out[1], rows[1])


def test_exp_update_survives_infinite_penalties():
    rows = np.array([[0.25, 0.25, 0.5]])
    grad = np.array([[0.0, -np.inf, 0.0]])
    out = exp_update_rows(rows, grad, 1.0)
    assert np.all(np.isfinite(out))
    assert out[0, 1] == pytest.approx(0.0, abs=1e-300)
    assert np.allclose(out.sum(axis=1), 1.0)


def test_exp_update_zero_step_is_identity_on_support():
    rng = np.random.default_rng(0)
    rows = rng.dirichlet(np.ones(4), size=3)
    grad = rng.normal(size=(3, 4))
    out = exp_update_rows(rows, grad, 0.0)
    assert np.allclose(out, rows)


def test_step_schedule_halves_on_reject_and_grows_slowly():
    s = StepSchedule()
    start = s.current()
    s.reject()
    assert s.current() == pytest.approx(start / 2)
    for _ in range(30):
        s.accept()
    assert s.base == pytest.approx(1.0)  # grew back from 0.5
    assert not s.exhausted
    for _ in range(60):
        s.reject()
    assert s.exhausted


# ---------------------------------------------------------------------------
# the monotone inner loop on a problem with a known answer
# ---------------------------------------------------------------------------


def test_monotone_improve_maximizes_entropy():
    # max of sum(-p log p) over the 4-simplex is log 4 at uniform
    def value(tables):
        p = tables[0][0]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(p > 0, p * np.log(p), 0.0)
        return -float(t.sum())

    def grad(tables):
        p = tables[0][0]
        with np.errstate(divide="ignore"):
            g = -np.log(np.where(p > 0, p, 1.0)) - 1.0
        return [g[None, :]]

    start = [np.array([[0.7, 0.1, 0.1, 0.1]])]
    tabs, merit, iters, conv = monotone_improve(value, grad, start, 1.0, 1e-12, 10_000)
    assert conv
    assert merit == pytest.approx(math.log(4), abs=1e-9)
    assert np.allclose(tabs[0], 0.25, atol=1e-5)


def test_monotone_improve_never_regresses():
    # every accepted merit must be within MERIT_SLACK of monotone
    seen = []

    def value(tables):
        p = tables[0][0]
        v = -float(((p - np.array([0.1, 0.2, 0.7])) ** 2).sum())
        return v

    def grad(tables):
        p = tables[0][0]
        return [(-2.0 * (p - np.array([0.1, 0.2, 0.7])))[None, :]]

    def tracked(tables):
        v = value(tables)
        seen.append(v)
        return v

    start = [np.array([[1 / 3, 1 / 3, 1 / 3]])]
    _, merit, _, conv = monotone_improve(tracked, grad, start, 1.0, 1e-11, 5_000)
    assert conv
    assert merit == pytest.approx(0.0, abs=1e-8)
    best = seen[0]
    for v in seen[1:]:
        if v >= best - MERIT_SLACK:
            best = max(best, v)
    assert merit <= best + 1e-15


def test_monotone_improve_descends_with_negative_sign():
    def value(tables):
        p = tables[0][0]
        return float((p * np.array([3.0, 1.0, 2.0])).sum())

    def grad(tables):
        return [np.array([[3.0, 1.0, 2.0]])]

    start = [np.full((1, 3), 1 / 3)]
    tabs, merit, _, conv = monotone_improve(value, grad, start, -1.0, 1e-12, 10_000)
    assert conv
    assert merit == pytest.approx(1.0, abs=1e-6)
    assert tabs[0][0, 1] == pytest.approx(1.0, abs=1e-6)


# ---------------------------------------------------------------------------
# simplex grids
# ---------------------------------------------------------------------------


@given(st.integers(1, 12), st.integers(1, 4))
@settings(max_examples=40, deadline=None)
def test_simplex_grid_counts_and_sums(res, dim):
    g = simplex_grid(res, dim)
    assert g.shape == (composition_count(res, dim), dim)
    assert np.allclose(g.sum(axis=1), 1.0)
    assert np.all(g >= 0)
    # all points distinct
    assert len({tuple(row) for row in g}) == g.shape[0]


def test_simplex_grid_small_cases():
    assert composition_count(2, 2) == 3
    g = simplex_grid(2, 2)
    assert sorted(map(tuple, g)) == [(0.0, 1.0), (0.5, 0.5), (1.0, 0.0)]
    assert simplex_grid(7, 1).tolist() == [[1.0]]
    with pytest.raises(di.DomainError):
        simplex_grid(0, 2)
    with pytest.raises(di.DomainError):
        simplex_grid(3, 0)


# ---------------------------------------------------------------------------
# interleaved-array marginalizers
# ---------------------------------------------------------------------------


def test_marginalizers_recover_kernel_tables():
    from dirinfo.sampling import (
        random_backward_kernel,
        random_forward_kernel,
        random_spec,
        rng_from_seed,
    )
    from dirinfo.measures import build_joint

    rng = rng_from_seed(7)
    for _ in range(5):
        spec = random_spec(rng)
        p = random_backward_kernel(rng, spec)
        q = random_forward_kernel(rng, spec)
        arr = build_joint(p, q).weights
        in_tabs = marginalize_to_input_tables(arr, spec)
        out_tabs = marginalize_to_output_tables(arr, spec)
        for i in range(spec.steps):
            assert in_tabs[i].shape == (spec.input_history_count(i), spec.x_sizes[i])
            assert out_tabs[i].shape == (spec.output_history_count(i), spec.y_sizes[i])
        # step-0 input marginal equals the kernel's first table scaled by 1
        assert np.allclose(in_tabs[0], p.tables[0])
        assert in_tabs[-1].sum() == pytest.approx(1.0)
        assert out_tabs[-1].sum() == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# multiplier bracketing
# ---------------------------------------------------------------------------


def test_bracket_multiplier_finds_sign_change():
    lo, hi = bracket_multiplier(lambda lam: 10.0 - lam)
    assert lo < hi
    assert 10.0 - lo > 0 >= 10.0 - hi


def test_bracket_multiplier_immediate_when_feasible():
    lo, hi = bracket_multiplier(lambda lam: -1.0)
    assert (lo, hi) == (0.0, 1.0)


def test_bracket_multiplier_caps_out():
    with pytest.raises(di.DomainError):
        bracket_multiplier(lambda lam: 1.0, cap=1e6)
