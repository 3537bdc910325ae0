"""Moments of eigenvalue curves under a density on the design parameter."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DensitySpec",
    "discrete_density",
    "uniform_trapezoid_density",
    "MomentReport",
    "moments",
    "check_support",
]


@dataclass(frozen=True)
class DensitySpec:
    """Probability weights attached to parameter nodes.

    ``kind`` is "discrete" when the nodes are atoms of the distribution and
    "uniform" when they are quadrature nodes for a continuous density.
    """

    kind: str
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).ravel()
        w = np.asarray(self.weights, dtype=float).ravel()
        if self.kind not in ("discrete", "uniform"):
            raise ValueError(f"unknown density kind {self.kind!r}")
        if pts.shape != w.shape or pts.size == 0:
            raise ValueError("points and weights must be equal-length and non-empty")
        if np.any(w < 0):
            raise ValueError("weights must be non-negative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to one")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return self.points.size


def discrete_density(values, masses=None) -> DensitySpec:
    """Atoms with given masses; equal masses when none are given."""
    values = np.asarray(values, dtype=float).ravel()
    if masses is None:
        masses = np.full(values.size, 1.0 / values.size)
    return DensitySpec(kind="discrete", points=values, weights=np.asarray(masses, dtype=float))


def uniform_trapezoid_density(lo: float, hi: float, n_nodes: int) -> DensitySpec:
    """Uniform density on [lo, hi] integrated by the trapezoid rule.

    The weights h*[1/2, 1, ..., 1, 1/2]/(hi-lo) sum to one to machine precision.
    """
    if not hi > lo:
        raise ValueError("need hi > lo")
    if n_nodes < 2:
        raise ValueError("trapezoid rule needs at least two nodes")
    nodes = np.linspace(lo, hi, n_nodes)
    w = np.ones(n_nodes)
    w[0] = w[-1] = 0.5
    w /= w.sum()
    return DensitySpec(kind="uniform", points=nodes, weights=w)


@dataclass(frozen=True)
class MomentReport:
    mean: float
    std: float
    variance: float
    clamped: bool = False


def moments(values, density: DensitySpec) -> MomentReport:
    """Weighted mean and standard deviation of values sampled at density nodes.

    Uses the centered second moment; a negative variance (possible only
    through pathological rounding) is clamped to zero with a warning.
    """
    v = np.asarray(values, dtype=float).ravel()
    if v.shape != density.points.shape:
        raise ValueError("values must align with the density nodes")
    if not np.all(np.isfinite(v)):
        raise ValueError("values contain non-finite entries")
    mean = float(density.weights @ v)
    var = float(density.weights @ (v - mean) ** 2)
    clamped = var < 0.0
    if clamped:
        warnings.warn("negative variance clamped to zero", RuntimeWarning)
        var = 0.0
    return MomentReport(mean=mean, std=float(np.sqrt(var)), variance=var, clamped=clamped)


def check_support(density: DensitySpec, lo: float, hi: float, tol: float = 1e-12) -> bool:
    """True when every density node lies inside the trained parameter range.

    Nodes outside [lo, hi] mean the curve would be extrapolated there; a
    warning lists how far the worst offender sticks out.
    """
    below = lo - density.points.min()
    above = density.points.max() - hi
    worst = max(below, above)
    if worst > tol:
        warnings.warn(
            f"density support exceeds trained range [{lo}, {hi}] by {worst:.3g}",
            RuntimeWarning,
        )
        return False
    return True
