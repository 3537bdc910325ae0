"""Boundary-conforming trial functions: u(x) = D(x) * network(x) + G(x).

The distance-like factor D vanishes on the Dirichlet boundary and is positive
inside the domain, so the product satisfies the boundary condition for any
network parameters.  The optional lift G carries inhomogeneous data; it is
zero for every built-in problem but kept in the composition.

Each level-set formula is written once over generic arithmetic objects, so the
same expression serves plain numpy arrays and the truncated-Taylor jets the
Galerkin module uses for closed-form Laplacians.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .mlp import EvalBundle, MlpSpec, forward_with_spatial_grad, init_xavier

__all__ = [
    "LevelSet",
    "NeuralAnsatz",
    "builtin_levelset",
    "constrained_eval",
]


@dataclass(frozen=True)
class LevelSet:
    """Scalar factor D with its spatial gradient.

    ``formula`` consumes a list of coordinate columns (arrays or jets) and
    returns D built from +, -, * and integer powers only.  ``spatial_dim``
    counts the differentiated leading coordinates; a parametric factor also
    reads trailing columns (e.g. an inner radius) but is never differentiated
    with respect to them.
    """

    name: str
    spatial_dim: int
    formula: Callable[[Sequence], object]
    grad_formula: Callable[[np.ndarray], np.ndarray]
    takes_parameter: bool = False

    def value(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.asarray(self.formula([pts[:, i] for i in range(pts.shape[1])]))

    def grad(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return self.grad_formula(pts)


def _interval_formula(c):
    x = c[0]
    return x * (1 - x)


def _interval_grad(p):
    return (1.0 - 2.0 * p[:, 0])[:, None]


def _square_formula(c):
    x, y = c[0], c[1]
    return x * (1 - x) * y * (1 - y)


def _square_grad(p):
    x, y = p[:, 0], p[:, 1]
    fx = x * (1 - x)
    fy = y * (1 - y)
    return np.column_stack([(1 - 2 * x) * fy, fx * (1 - 2 * y)])


def _semicircle_formula(c):
    x, y = c[0], c[1]
    return y * (1 - x * x - y * y)


def _semicircle_grad(p):
    x, y = p[:, 0], p[:, 1]
    return np.column_stack([-2 * x * y, 1 - x * x - 3 * y * y])


def _annulus_formula(c):
    # rings between radius a (third column) and 1; positive in between
    x, y, a = c[0], c[1], c[2]
    r2 = x * x + y * y
    return (1 - r2) * (r2 - a * a)


def _annulus_grad(p):
    x, y, a = p[:, 0], p[:, 1], p[:, 2]
    r2 = x * x + y * y
    dr2 = 1 + a * a - 2 * r2
    return np.column_stack([2 * x * dr2, 2 * y * dr2])


def _hypercube_factors(p):
    return p * (1 - p**4), 1 - 5 * p**4


def _hypercube_grad(p):
    f, df = _hypercube_factors(p)
    d = p.shape[1]
    # prefix/suffix products avoid dividing by near-zero boundary factors
    prefix = np.ones_like(f)
    suffix = np.ones_like(f)
    for i in range(1, d):
        prefix[:, i] = prefix[:, i - 1] * f[:, i - 1]
        suffix[:, d - 1 - i] = suffix[:, d - i] * f[:, d - i]
    return df * prefix * suffix


def builtin_levelset(name: str, dim: Optional[int] = None) -> LevelSet:
    """Boundary factors for the built-in domains.

    interval: x(1-x) on (0,1); square: x1(1-x1)x2(1-x2) on the unit square;
    semicircle: x2(1-x1^2-x2^2) on the upper half disc; annulus (parametric,
    reads the inner radius from the third coordinate column): (1-r^2)(r^2-a^2);
    hypercube-skewed: prod_i x_i(1-x_i^4) on (0,1)^dim.
    """
    if name == "interval":
        return LevelSet("interval", 1, _interval_formula, _interval_grad)
    if name == "square":
        return LevelSet("square", 2, _square_formula, _square_grad)
    if name == "semicircle":
        return LevelSet("semicircle", 2, _semicircle_formula, _semicircle_grad)
    if name == "annulus":
        return LevelSet("annulus", 2, _annulus_formula, _annulus_grad, takes_parameter=True)
    if name == "hypercube-skewed":
        if dim is None or dim < 1:
            raise ValueError("hypercube-skewed needs a positive dim")

        def formula(c):
            out = c[0] * (1 - c[0] ** 4)
            for i in range(1, dim):
                out = out * (c[i] * (1 - c[i] ** 4))
            return out

        return LevelSet("hypercube-skewed", dim, formula, _hypercube_grad)
    raise ValueError(f"unknown level set {name!r}")


@dataclass
class AnsatzCache:
    """Boundary-factor samples reused across epochs on a fixed grid."""

    points: np.ndarray
    d_values: np.ndarray
    d_grads: np.ndarray
    lift_values: Optional[np.ndarray]
    lift_grads: Optional[np.ndarray]


@dataclass
class NeuralAnsatz:
    """Network composed with a boundary factor and optional lift.

    ``spec.input_dim`` may exceed ``levelset.spatial_dim`` when problem
    parameters ride along as extra input columns; tangent channels cover the
    spatial block only.
    """

    spec: MlpSpec
    levelset: LevelSet
    lift: Optional[Tuple[Callable, Callable]] = None  # (value(points), grad(points))

    @property
    def spatial_dim(self) -> int:
        return self.levelset.spatial_dim

    @property
    def output_dim(self) -> int:
        return self.spec.output_dim

    def param_count(self) -> int:
        return self.spec.param_count()

    def init_params(self, seed: int) -> np.ndarray:
        return init_xavier(self.spec, seed)

    def rescale_output(self, params: np.ndarray, factor: float) -> np.ndarray:
        """Scale the map's output by ``factor`` (readout weights only)."""
        out = params.copy()
        n_read = self.spec.hidden_widths[-1] * self.spec.output_dim
        out[-n_read:] *= factor
        return out

    def prepare(self, points: np.ndarray) -> AnsatzCache:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.spec.input_dim:
            raise ValueError("point dimension does not match the network input")
        dval = self.levelset.value(pts)
        dgrad = self.levelset.grad(pts)
        if self.lift is not None:
            gval = np.atleast_2d(np.asarray(self.lift[0](pts), dtype=float))
            ggrad = np.asarray(self.lift[1](pts), dtype=float)
        else:
            gval = ggrad = None
        return AnsatzCache(pts, dval, dgrad, gval, ggrad)

    def eval(self, params: np.ndarray, points: np.ndarray, cache: Optional[AnsatzCache] = None) -> EvalBundle:
        """Constrained evaluation with pullback through the product rule."""
        if cache is None:
            cache = self.prepare(points)
        pts = cache.points
        raw = forward_with_spatial_grad(self.spec, params, pts, tangent_dim=self.spatial_dim)
        d = cache.d_values[:, None]
        dg = cache.d_grads
        values = raw.values * d
        grads = raw.spatial_grads * d[:, :, None] + raw.values[:, :, None] * dg[:, None, :]
        if cache.lift_values is not None:
            values = values + cache.lift_values
            grads = grads + cache.lift_grads

        def pullback(cot_values: np.ndarray, cot_spatial: np.ndarray) -> np.ndarray:
            cot_raw_v = cot_values * d + np.einsum("noc,nc->no", cot_spatial, dg)
            cot_raw_g = cot_spatial * d[:, :, None]
            return raw.pullback(cot_raw_v, cot_raw_g)

        return EvalBundle(values=values, spatial_grads=grads, pullback=pullback)


def constrained_eval(ansatz: NeuralAnsatz, params: np.ndarray, points: np.ndarray) -> EvalBundle:
    """One-shot boundary-conforming evaluation (no cache reuse)."""
    return ansatz.eval(params, points)
