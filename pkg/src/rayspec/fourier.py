"""Global sine ansatz on the unit square, and a head-to-head nonlinear run.

The expansion u = sum_{ij} c_ij sin(i pi x) sin(j pi y) satisfies the zero
boundary condition term by term and is linear in its parameters, so the same
optimizer drives it through the identical objective as the network ansatz.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .mlp import EvalBundle
from .objectives import PLaplace
from .orthogonalize import EigenBasis
from .quadrature import QuadratureGrid
from .solver import EigenReport, SolveSchedule, solve_eigenpair

__all__ = ["FourierCache", "FourierAnsatz", "DuelResult", "plaplace_duel"]


@dataclass(frozen=True)
class FourierCache:
    points: np.ndarray
    table: np.ndarray  # (n, K) mode values
    grad_table: np.ndarray  # (n, K, 2)


@dataclass(frozen=True)
class FourierAnsatz:
    """Tensor sine basis with n_modes frequencies per direction."""

    n_modes: int
    init_sigma: float = 1e-3

    def __post_init__(self):
        if self.n_modes < 1:
            raise ValueError("need at least one mode per direction")

    spatial_dim = 2
    output_dim = 1

    def param_count(self) -> int:
        return self.n_modes * self.n_modes

    def init_params(self, seed: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        return rng.normal(0.0, self.init_sigma, size=self.param_count())

    def rescale_output(self, params: np.ndarray, factor: float) -> np.ndarray:
        return params * float(factor)

    def prepare(self, points: np.ndarray) -> FourierCache:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        i = np.arange(1, self.n_modes + 1)
        sx = np.sin(np.pi * pts[:, 0, None] * i)  # (n, M)
        cx = np.cos(np.pi * pts[:, 0, None] * i) * (np.pi * i)
        sy = np.sin(np.pi * pts[:, 1, None] * i)
        cy = np.cos(np.pi * pts[:, 1, None] * i) * (np.pi * i)
        table = np.einsum("ni,nj->nij", sx, sy).reshape(len(pts), -1)
        gx = np.einsum("ni,nj->nij", cx, sy).reshape(len(pts), -1)
        gy = np.einsum("ni,nj->nij", sx, cy).reshape(len(pts), -1)
        return FourierCache(points=pts, table=table, grad_table=np.stack([gx, gy], axis=2))

    def eval(
        self, params: np.ndarray, points: np.ndarray, cache: Optional[FourierCache] = None
    ) -> EvalBundle:
        if cache is None:
            cache = self.prepare(points)
        table, gtab = cache.table, cache.grad_table
        values = (table @ params)[:, None]
        grads = np.einsum("nkc,k->nc", gtab, params)[:, None, :]

        def pullback(cot_values, cot_spatial):
            g = table.T @ cot_values[:, 0]
            g += np.einsum("nkc,nc->k", gtab, cot_spatial[:, 0, :])
            return g

        return EvalBundle(values=values, spatial_grads=grads, pullback=pullback)


@dataclass(frozen=True)
class DuelResult:
    """Reports from the two arms trained on the identical objective."""

    network: EigenReport
    fourier: EigenReport
    exponent: float


def plaplace_duel(
    p: float,
    network_ansatz,
    fourier_ansatz: FourierAnsatz,
    grid: QuadratureGrid,
    schedule: SolveSchedule,
    seed: int = 0,
) -> DuelResult:
    """First p-Laplace quotient minimum on the same grid for both ansatz types.

    Both arms share the schedule and the master seed; they differ only in how
    the trial function is parameterized.
    """
    kind = PLaplace(p=p)
    reports = []
    for ansatz in (network_ansatz, fourier_ansatz):
        basis = EigenBasis(mode="grid", grid=grid)
        reports.append(
            solve_eigenpair(
                index=1,
                kind=kind,
                ansatz=ansatz,
                quad=grid,
                basis=basis,
                schedule=schedule,
                seed=seed,
            )
        )
    return DuelResult(network=reports[0], fourier=reports[1], exponent=p)
