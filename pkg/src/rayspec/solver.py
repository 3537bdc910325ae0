"""Gradient-descent eigenpair training with deflation.

One eigenpair at a time: minimize the (deflated) quotient with ADAM and stop
via a two-phase rule.  The run counts as "triggered" at the first epoch whose
quotient drops to at most the previous eigenvalue plus a slack; from that
epoch exactly ``epochs_after_threshold(index)`` further updates run.  The
first eigenpair (or a schedule without slack) triggers immediately, turning
the rule into a fixed epoch budget.  Deterministic grids keep the integration
nodes fixed and store converged eigenfunctions as normalized samples;
Monte Carlo runs resample the batch every epoch, report the eigenvalue as a
tail average of the quotient history, and store parameter snapshots.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Tuple, Union

import numpy as np

from .mlp import EvalBundle
from .objectives import ObjectiveValue, objective_gradient, quotient_cotangents, rayleigh
from .orthogonalize import (
    EigenBasis,
    GridEntry,
    SnapshotEntry,
    project_out,
    project_out_mc,
    projection_operator,
)
from .quadrature import QuadratureGrid

__all__ = [
    "AdamState",
    "adam_step",
    "SolveSchedule",
    "EigenReport",
    "ParametricSlices",
    "solve_eigenpair",
    "solve_spectrum",
    "solve_parametric_spectrum",
    "eigencurve_eval",
]


@dataclass(frozen=True)
class AdamState:
    """First/second moment accumulators with the update count."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @staticmethod
    def fresh(n_params: int, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return AdamState(m=np.zeros(n_params), v=np.zeros(n_params), beta1=beta1, beta2=beta2, eps=eps)


def adam_step(state: AdamState, params: np.ndarray, grad: np.ndarray, lr: float) -> Tuple[AdamState, np.ndarray]:
    """One bias-corrected moment update; returns the new state and parameters."""
    if not np.all(np.isfinite(grad)):
        raise FloatingPointError("non-finite gradient handed to the optimizer")
    t = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    mhat = m / (1.0 - state.beta1**t)
    vhat = v / (1.0 - state.beta2**t)
    new_params = params - lr * mhat / (np.sqrt(vhat) + state.eps)
    return replace(state, m=m, v=v, step=t), new_params


@dataclass(frozen=True)
class SolveSchedule:
    """Learning-rate plan, stopping rule and penalty weight for one spectrum run.

    ``epochs_after_threshold(i) = epochs_base + epochs_per_index * i``.
    ``threshold`` is the slack over the previous eigenvalue; None triggers at
    epoch zero for every index.  ``lr_decay_factor`` multiplies the rate every
    ``lr_decay_every`` epochs when set.
    """

    lr: float
    epochs_base: int
    epochs_per_index: int = 0
    threshold: Optional[float] = None
    beta: float = 0.0
    max_epochs: int = 200_000
    lr_decay_factor: Optional[float] = None
    lr_decay_every: int = 1000
    tail_window: int = 5000

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if self.epochs_base < 0 or self.epochs_per_index < 0:
            raise ValueError("epoch counts must be non-negative")
        if self.threshold is not None and self.threshold < 0:
            raise ValueError("threshold slack must be non-negative")
        if self.max_epochs < self.epochs_after_threshold(1):
            raise ValueError("max_epochs below the post-trigger budget")

    def epochs_after_threshold(self, index: int) -> int:
        return self.epochs_base + self.epochs_per_index * index

    def rate_at(self, epoch: int) -> float:
        if self.lr_decay_factor is None:
            return self.lr
        return self.lr * self.lr_decay_factor ** (epoch // self.lr_decay_every)


@dataclass
class EigenReport:
    """Outcome of one eigenpair run.

    ``history`` has one row per parameter update: (quotient, penalty, rate).
    ``eigenvalue`` is the post-loop quotient on a fixed grid, or the tail
    average of the history in Monte Carlo mode.
    """

    index: int
    eigenvalue: float
    params: np.ndarray
    history: np.ndarray
    epochs: int
    seed: int
    converged: bool
    threshold_epoch: Optional[int]
    final_objective: Optional[ObjectiveValue] = None


QuadSource = Union[QuadratureGrid, Callable[[np.random.Generator], QuadratureGrid]]


def _trigger(threshold: Optional[float], index: int, quotient: float, prev_eigenvalue: Optional[float]) -> bool:
    if threshold is None or index == 1 or prev_eigenvalue is None:
        return True
    return quotient <= prev_eigenvalue + threshold


def _spawn_seeds(master: int, count: int) -> List[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(entropy=master).spawn(count)]


def solve_eigenpair(
    index: int,
    kind,
    ansatz,
    quad: QuadSource,
    basis: EigenBasis,
    schedule: SolveSchedule,
    seed: int,
) -> EigenReport:
    """Train one eigenpair against an existing basis of ``index - 1`` entries.

    ``quad`` is either a fixed grid or a sampler ``rng -> batch`` for
    Monte Carlo mode; the mode must match the basis storage mode.
    """
    mc_mode = callable(quad)
    if mc_mode and basis.mode != "snapshot":
        raise ValueError("Monte Carlo runs need a snapshot-mode basis")
    if not mc_mode and basis.mode != "grid":
        raise ValueError("fixed-grid runs need a grid-mode basis")

    init_seed, batch_seed, probe_seed = np.random.SeedSequence(entropy=seed).spawn(3)
    params = ansatz.init_params(int(init_seed.generate_state(1)[0]))
    batch_rng = np.random.default_rng(batch_seed)

    grid = None
    cache = None
    if not mc_mode:
        grid = quad
        cache = ansatz.prepare(grid.points)

    if schedule.beta > 0.0:
        # the penalty's restoring force scales with the squared norm, so a
        # tiny initial iterate would coast for thousands of epochs before the
        # norm constraint bites; start at unit weighted norm instead
        probe = grid if not mc_mode else quad(np.random.default_rng(probe_seed))
        b0 = ansatz.eval(params, probe.points)
        s0 = float(np.einsum("n,no,no->", probe.weights, b0.values, b0.values))
        if s0 > 1e-30:
            params = ansatz.rescale_output(params, 1.0 / np.sqrt(s0))

    state = AdamState.fresh(params.size)
    prev_lambda = basis.entries[-1].eigenvalue if len(basis) else None

    history: List[Tuple[float, float, float]] = []
    threshold_epoch: Optional[int] = None
    budget = schedule.epochs_after_threshold(index)
    epoch = 0
    converged = False

    while epoch < schedule.max_epochs:
        if mc_mode:
            grid = quad(batch_rng)
            cache = ansatz.prepare(grid.points)
        bundle = ansatz.eval(params, grid.points, cache=cache)
        if mc_mode:
            projected = project_out_mc(bundle, basis, grid, cache=cache)
        else:
            projected = project_out(bundle, basis, grid)
        obj, grad = objective_gradient(kind, projected, grid, beta=schedule.beta)

        if threshold_epoch is None and _trigger(schedule.threshold, index, obj.rayleigh, prev_lambda):
            threshold_epoch = epoch
        if threshold_epoch is not None and epoch >= threshold_epoch + budget:
            converged = True
            break

        history.append((obj.rayleigh, obj.penalty, schedule.rate_at(epoch)))
        state, params = adam_step(state, params, grad, schedule.rate_at(epoch))
        epoch += 1

    hist = np.array(history, dtype=float).reshape(len(history), 3)

    if mc_mode:
        window = min(schedule.tail_window, hist.shape[0])
        eigenvalue = float(hist[-window:, 0].mean()) if window else float("nan")
        final = None
    else:
        bundle = ansatz.eval(params, grid.points, cache=cache)
        projected = project_out(bundle, basis, grid)
        final = rayleigh(kind, projected, grid)
        eigenvalue = final.rayleigh

    return EigenReport(
        index=index,
        eigenvalue=eigenvalue,
        params=params,
        history=hist,
        epochs=hist.shape[0],
        seed=seed,
        converged=converged,
        threshold_epoch=threshold_epoch,
        final_objective=final,
    )


def _normalized_grid_entry(ansatz, report: EigenReport, basis: EigenBasis, grid: QuadratureGrid) -> GridEntry:
    """Deflated, unit-weighted-norm samples of the converged eigenfunction."""
    bundle = ansatz.eval(report.params, grid.points)
    projected = project_out(bundle, basis, grid)
    norm = float(np.einsum("n,no,no->", grid.weights, projected.values, projected.values))
    scale = 1.0 / np.sqrt(norm)
    return GridEntry(
        eigenvalue=report.eigenvalue,
        values=scale * projected.values,
        grads=scale * projected.spatial_grads,
    )


def solve_spectrum(
    n_pairs: int,
    kind,
    ansatz,
    quad: QuadSource,
    schedule: SolveSchedule,
    seed: int,
) -> Tuple[EigenBasis, List[EigenReport]]:
    """Train eigenpairs 1..n_pairs sequentially with deflation.

    Per-pair seeds are spawned from the master seed, so a shorter run is a
    prefix of a longer one with the same seed.  On a non-converged pair the
    loop stops and the partial basis is returned with that pair's report
    flagged.
    """
    mc_mode = callable(quad)
    basis = EigenBasis(mode="snapshot" if mc_mode else "grid", grid=None if mc_mode else quad)
    reports: List[EigenReport] = []
    seeds = _spawn_seeds(seed, n_pairs)
    for i in range(1, n_pairs + 1):
        report = solve_eigenpair(i, kind, ansatz, quad, basis, schedule, seeds[i - 1])
        reports.append(report)
        if not report.converged:
            warnings.warn(f"eigenpair {i} hit max_epochs before the stopping rule; partial basis returned")
            break
        if mc_mode:
            basis.append(SnapshotEntry(eigenvalue=report.eigenvalue, params=report.params, ansatz=ansatz))
        else:
            basis.append(_normalized_grid_entry(ansatz, report, basis, quad))
    return basis, reports


@dataclass
class ParametricSlices:
    """Fixed parameter values with density weights and per-slice spatial grids."""

    a_values: np.ndarray
    rho: np.ndarray
    grids: List[QuadratureGrid]

    def __post_init__(self):
        self.a_values = np.asarray(self.a_values, dtype=float)
        self.rho = np.asarray(self.rho, dtype=float)
        if not (len(self.grids) == self.a_values.size == self.rho.size):
            raise ValueError("a-values, weights and grids must align")
        if abs(self.rho.sum() - 1.0) > 1e-12:
            raise ValueError("density weights must sum to one")

    def stacked_points(self) -> Tuple[np.ndarray, List[slice]]:
        blocks = []
        spans = []
        offset = 0
        for a, g in zip(self.a_values, self.grids):
            blocks.append(np.column_stack([g.points, np.full(g.size, a)]))
            spans.append(slice(offset, offset + g.size))
            offset += g.size
        return np.vstack(blocks), spans


def solve_parametric_spectrum(
    n_pairs: int,
    kinds,
    ansatz,
    slices: ParametricSlices,
    schedule: SolveSchedule,
    seed: int,
) -> Tuple[List[EigenBasis], List[EigenReport], List[np.ndarray]]:
    """Train a parameter-aware network on the density-averaged quotient.

    The parameter value rides along as the last network input, so one network
    evaluation covers every slice and the pullback runs once on the stacked
    arrays.  Deflation is per-slice: each parameter value keeps its own basis
    of converged slice eigenfunctions.  The stopping rule watches the averaged
    quotient against the previously converged average.  Returns per-slice
    bases, one report per eigenpair (history row: averaged quotient, zero
    penalty, rate) and per-eigenpair arrays of slice eigenvalues.
    """
    points, spans = slices.stacked_points()
    n_slices = slices.a_values.size
    bases = [EigenBasis(mode="grid", grid=g) for g in slices.grids]
    reports: List[EigenReport] = []
    slice_tables: List[np.ndarray] = []
    seeds = _spawn_seeds(seed, n_pairs)
    cache = ansatz.prepare(points)

    kin = list(kinds) if isinstance(kinds, (list, tuple)) else [kinds] * n_slices
    if len(kin) != n_slices:
        raise ValueError("one objective kind per slice required")

    prev_expected: Optional[float] = None

    for i in range(1, n_pairs + 1):
        params = ansatz.init_params(seeds[i - 1])
        state = AdamState.fresh(params.size)
        ops = [projection_operator(bases[k], slices.grids[k]) for k in range(n_slices)]
        history: List[Tuple[float, float, float]] = []
        threshold_epoch: Optional[int] = None
        budget = schedule.epochs_after_threshold(i)
        epoch = 0
        converged = False

        def slice_pass(theta, need_cotangents=True):
            bundle = ansatz.eval(theta, points, cache=cache)
            quotients = np.empty(n_slices)
            cot_v = np.empty_like(bundle.values) if need_cotangents else None
            cot_g = np.empty_like(bundle.spatial_grads) if need_cotangents else None
            deflated = []
            for k, span in enumerate(spans):
                apply_p, cot_p = ops[k]
                pv, pg = apply_p(bundle.values[span], bundle.spatial_grads[span])
                deflated.append((pv, pg))
                if need_cotangents:
                    obj, vbar, gbar = quotient_cotangents(kin[k], pv, pg, slices.grids[k])
                    cv, cg = cot_p(vbar, gbar)
                    cot_v[span] = slices.rho[k] * cv
                    cot_g[span] = slices.rho[k] * cg
                    quotients[k] = obj.rayleigh
                else:
                    sub = EvalBundle(values=pv, spatial_grads=pg)
                    quotients[k] = rayleigh(kin[k], sub, slices.grids[k]).rayleigh
            grad = bundle.pullback(cot_v, cot_g) if need_cotangents else None
            return quotients, grad, deflated

        while epoch < schedule.max_epochs:
            quotients, grad, _ = slice_pass(params)
            total = float(slices.rho @ quotients)

            if threshold_epoch is None and _trigger(schedule.threshold, i, total, prev_expected):
                threshold_epoch = epoch
            if threshold_epoch is not None and epoch >= threshold_epoch + budget:
                converged = True
                break

            history.append((total, 0.0, schedule.rate_at(epoch)))
            state, params = adam_step(state, params, grad, schedule.rate_at(epoch))
            epoch += 1

        lam, _, deflated = slice_pass(params, need_cotangents=False)
        expected = float(slices.rho @ lam)
        hist = np.array(history, dtype=float).reshape(len(history), 3)
        reports.append(
            EigenReport(
                index=i,
                eigenvalue=expected,
                params=params,
                history=hist,
                epochs=hist.shape[0],
                seed=seed,
                converged=converged,
                threshold_epoch=threshold_epoch,
            )
        )
        slice_tables.append(lam)
        if not converged:
            warnings.warn(f"eigenpair {i} hit max_epochs before the stopping rule; partial bases returned")
            break
        prev_expected = expected
        for k in range(n_slices):
            pv, pg = deflated[k]
            norm = float(np.einsum("n,no,no->", slices.grids[k].weights, pv, pv))
            scale = 1.0 / np.sqrt(norm)
            bases[k].append(GridEntry(eigenvalue=float(lam[k]), values=scale * pv, grads=scale * pg))
    return bases, reports, slice_tables


def eigencurve_eval(ansatz, params: np.ndarray, kind_for, a_values, grid: QuadratureGrid, trained_range=None) -> np.ndarray:
    """Quotient of a trained parametric network along a parameter sweep.

    ``kind_for`` is either a fixed objective kind or a callable ``a -> kind``
    (a stiffness interface that moves with the parameter).  Values outside
    ``trained_range`` are still evaluated but flagged as extrapolation.
    """
    a_values = np.asarray(a_values, dtype=float)
    if trained_range is not None:
        lo, hi = trained_range
        outside = (a_values < lo - 1e-12) | (a_values > hi + 1e-12)
        if np.any(outside):
            warnings.warn(f"{int(outside.sum())} parameter values fall outside the trained range; extrapolating")
    pts = np.vstack([np.column_stack([grid.points, np.full(grid.size, a)]) for a in a_values])
    bundle = ansatz.eval(params, pts)
    lams = np.empty(a_values.size)
    for j, a in enumerate(a_values):
        span = slice(j * grid.size, (j + 1) * grid.size)
        sub = EvalBundle(values=bundle.values[span], spatial_grads=bundle.spatial_grads[span])
        kind = kind_for(a) if callable(kind_for) else kind_for
        lams[j] = rayleigh(kind, sub, grid).rayleigh
    return lams
