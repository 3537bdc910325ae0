"""Integration grids: tensor midpoint rules, masked domains, polar grids, MC batches.

Weighted sums over these grids stand in for every integral in the package.
Deterministic grids use cell-centered (midpoint) nodes so no node touches the
domain boundary; Monte Carlo batches carry uniform weights 1/B over the unit
hypercube.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np

__all__ = [
    "QuadratureGrid",
    "DomainSpec",
    "interval_grid",
    "unit_square_grid",
    "masked_square_grid",
    "annulus_polar_grid",
    "hypercube_mc_batch",
    "integrate",
]


@dataclass(frozen=True)
class QuadratureGrid:
    """Nodes (n, d) with positive weights (n,).

    ``kind`` is "deterministic" for fixed tensor grids and "monte-carlo" for
    resampled batches.
    """

    points: np.ndarray
    weights: np.ndarray
    kind: str = "deterministic"

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        wts = np.asarray(self.weights, dtype=float).ravel()
        if pts.shape[0] != wts.shape[0]:
            raise ValueError("points and weights disagree on node count")
        if pts.shape[0] == 0:
            raise ValueError("empty grid")
        if np.any(wts <= 0):
            raise ValueError("weights must be positive")
        if self.kind not in ("deterministic", "monte-carlo"):
            raise ValueError(f"unknown grid kind {self.kind!r}")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", wts)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def total_weight(self) -> float:
        return float(self.weights.sum())


@dataclass(frozen=True)
class DomainSpec:
    """Name plus the few shape parameters the built-in domains need."""

    name: str
    inner_radius: Optional[float] = None
    dim: Optional[int] = None

    def __post_init__(self):
        known = ("interval", "square", "semicircle", "annulus", "hypercube")
        if self.name not in known:
            raise ValueError(f"unknown domain {self.name!r}; expected one of {known}")
        if self.name == "annulus":
            if self.inner_radius is None or not 0.0 < self.inner_radius < 1.0:
                raise ValueError("annulus needs 0 < inner_radius < 1 (outer radius fixed at 1)")
        if self.name == "hypercube" and (self.dim is None or self.dim < 1):
            raise ValueError("hypercube needs a positive dim")


def interval_grid(n: int) -> QuadratureGrid:
    """Midpoint rule on (0, 1) with n cells."""
    if n < 2:
        raise ValueError("interval grid needs at least 2 nodes")
    x = (np.arange(n) + 0.5) / n
    return QuadratureGrid(points=x[:, None], weights=np.full(n, 1.0 / n))


def masked_square_grid(
    n_per_dim: int,
    mask: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    bbox: Tuple[Tuple[float, float], Tuple[float, float]] = ((0.0, 1.0), (0.0, 1.0)),
) -> QuadratureGrid:
    """Cell-centered grid on a box, optionally keeping only nodes with mask > 0."""
    if n_per_dim < 2:
        raise ValueError("need at least 2 cells per dimension")
    (x0, x1), (y0, y1) = bbox
    if x1 <= x0 or y1 <= y0:
        raise ValueError("degenerate bounding box")
    dx = (x1 - x0) / n_per_dim
    dy = (y1 - y0) / n_per_dim
    xs = x0 + (np.arange(n_per_dim) + 0.5) * dx
    ys = y0 + (np.arange(n_per_dim) + 0.5) * dy
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    if mask is not None:
        keep = np.asarray(mask(pts)) > 0
        pts = pts[keep]
        if pts.shape[0] == 0:
            raise ValueError("mask removed every node")
    return QuadratureGrid(points=pts, weights=np.full(pts.shape[0], dx * dy))


def unit_square_grid(n_per_dim: int) -> QuadratureGrid:
    return masked_square_grid(n_per_dim)


def annulus_polar_grid(inner_radius: float, n_r: int = 39, n_theta: int = 159) -> QuadratureGrid:
    """Tensor midpoint grid in (r, theta), mapped to Cartesian nodes.

    Weights r*dr*dtheta make the weight sum exactly the annulus area.
    """
    if not 0.0 < inner_radius < 1.0:
        raise ValueError("inner radius must lie in (0, 1)")
    if n_r < 2 or n_theta < 2:
        raise ValueError("need at least 2 cells per polar direction")
    dr = (1.0 - inner_radius) / n_r
    dth = 2.0 * np.pi / n_theta
    r = inner_radius + (np.arange(n_r) + 0.5) * dr
    th = (np.arange(n_theta) + 0.5) * dth
    rr, tt = np.meshgrid(r, th, indexing="ij")
    pts = np.column_stack([(rr * np.cos(tt)).ravel(), (rr * np.sin(tt)).ravel()])
    wts = (rr * dr * dth).ravel()
    return QuadratureGrid(points=pts, weights=wts)


def hypercube_mc_batch(dim: int, batch_size: int, rng: np.random.Generator) -> QuadratureGrid:
    """Uniform batch on (0,1)^dim with weights 1/B."""
    if dim < 1:
        raise ValueError("dim must be positive")
    if batch_size < 1:
        raise ValueError("batch_size must be positive")
    pts = rng.random((batch_size, dim))
    return QuadratureGrid(points=pts, weights=np.full(batch_size, 1.0 / batch_size), kind="monte-carlo")


def integrate(grid: QuadratureGrid, node_values: np.ndarray) -> float:
    """Weighted sum of per-node samples."""
    vals = np.asarray(node_values, dtype=float).ravel()
    if vals.shape[0] != grid.size:
        raise ValueError("sample count does not match grid")
    return float(grid.weights @ vals)
