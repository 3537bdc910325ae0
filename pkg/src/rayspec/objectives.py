"""Rayleigh quotients, the norm penalty, and their gradients.

Each quotient kind supplies a weighted numerator (an energy built from the
spatial gradients, sometimes the values) and a weighted denominator (a p-norm
of the values).  Gradients with respect to the network parameters are obtained
by differentiating the quotient analytically down to cotangents for the
evaluation bundle and handing those to the bundle's pullback, so the whole
chain stays in closed form:

    scalar / d-dim Laplace:  sum_i w_i |grad u|^2  /  sum_i w_i u^2
    vector Laplace:          sum over components of the same energies
    plane stress:            eps^T C(E, nu) eps with engineering shear strain
    p-Laplace:               sum_i w_i |grad u|^p  /  sum_i w_i |u|^p

A near-zero denominator signals a collapsed trial function and raises
``CollapseError`` instead of returning garbage.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .mlp import EvalBundle
from .quadrature import QuadratureGrid

__all__ = [
    "CollapseError",
    "ModulusField",
    "ScalarLaplace",
    "DDimLaplace",
    "VectorLaplace",
    "PlaneStress",
    "PLaplace",
    "ObjectiveValue",
    "modulus",
    "plane_stress_matrix",
    "rayleigh",
    "quotient_cotangents",
    "norm_penalty",
    "evaluate_objective",
    "objective_gradient",
    "expected_rayleigh",
    "expected_objective_gradient",
]

_DEN_FLOOR = 1e-30


class CollapseError(RuntimeError):
    """Raised when the trial function's norm is numerically zero."""


@dataclass(frozen=True)
class ModulusField:
    """Smoothed two-level stiffness profile along the first coordinate.

    The default "midpoint" mode interpolates between e0 (left of the interface
    at x1 = a) and e1 (right of it):

        E = (e0 + e1)/2 + (e1 - e0)/2 * tanh(q (x1 - a))

    Mode "as-printed" keeps the uncentered variant

        E = e0 + (e1 - e0)/2 * tanh(q (x1 - a))

    whose range is [e0 - (e1-e0)/2, e0 + (e1-e0)/2]; it can leave the
    [min(e0,e1), max(e0,e1)] band and even turn negative, so it exists only
    for side-by-side reporting.
    """

    e0: float
    e1: float
    q: float = 50.0
    a: float = 0.5
    mode: str = "midpoint"

    def __post_init__(self):
        if self.mode not in ("midpoint", "as-printed"):
            raise ValueError(f"unknown modulus mode {self.mode!r}")
        if self.q <= 0:
            raise ValueError("interface sharpness q must be positive")


def modulus(field: ModulusField, x1: np.ndarray) -> np.ndarray:
    x1 = np.asarray(x1, dtype=float)
    step = 0.5 * (field.e1 - field.e0) * np.tanh(field.q * (x1 - field.a))
    if field.mode == "midpoint":
        return 0.5 * (field.e0 + field.e1) + step
    return field.e0 + step


def plane_stress_matrix(e: float, nu: float) -> np.ndarray:
    """Constitutive matrix mapping (eps11, eps22, gamma12) to stresses."""
    if not 0.0 <= nu < 0.5:
        raise ValueError("Poisson ratio must lie in [0, 0.5)")
    fac = e / (1.0 - nu * nu)
    return fac * np.array([[1.0, nu, 0.0], [nu, 1.0, 0.0], [0.0, 0.0, 0.5 * (1.0 - nu)]])


@dataclass(frozen=True)
class ScalarLaplace:
    """|grad u|^2 over u^2 for a single output channel."""

    output_dim = 1


@dataclass(frozen=True)
class DDimLaplace:
    """Scalar Laplace quotient with an explicit spatial dimension check."""

    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")


@dataclass(frozen=True)
class VectorLaplace:
    """Componentwise Laplace energies over the joint squared norm."""

    output_dim = 2


@dataclass(frozen=True)
class PlaneStress:
    """In-plane elasticity energy with position-dependent stiffness."""

    field: ModulusField
    nu: float = 0.25

    def __post_init__(self):
        if not 0.0 <= self.nu < 0.5:
            raise ValueError("Poisson ratio must lie in [0, 0.5)")


@dataclass(frozen=True)
class PLaplace:
    """p-homogeneous quotient |grad u|^p over |u|^p."""

    p: float

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("p must be at least 1")


@dataclass(frozen=True)
class ObjectiveValue:
    """Quotient with its penalty part and the raw integrals behind it."""

    rayleigh: float
    penalty: float
    numerator: float
    denominator: float

    @property
    def total(self) -> float:
        return self.rayleigh + self.penalty


def _check_bundle(kind, values: np.ndarray, grads: np.ndarray):
    out = values.shape[1]
    if isinstance(kind, (ScalarLaplace, DDimLaplace, PLaplace)) and out != 1:
        raise ValueError(f"{type(kind).__name__} expects one output channel, got {out}")
    if isinstance(kind, (VectorLaplace, PlaneStress)) and out != 2:
        raise ValueError(f"{type(kind).__name__} expects two output channels, got {out}")
    if isinstance(kind, DDimLaplace) and grads.shape[2] != kind.dim:
        raise ValueError(f"DDimLaplace({kind.dim}) got {grads.shape[2]} tangent channels")


def _num_den(kind, values: np.ndarray, grads: np.ndarray, grid: QuadratureGrid) -> Tuple[float, float]:
    w = grid.weights
    if isinstance(kind, (ScalarLaplace, DDimLaplace, VectorLaplace)):
        num = float(np.einsum("n,noc,noc->", w, grads, grads))
        den = float(np.einsum("n,no,no->", w, values, values))
        return num, den
    if isinstance(kind, PlaneStress):
        e = modulus(kind.field, grid.points[:, 0])
        fac = w * e / (1.0 - kind.nu**2)
        e11 = grads[:, 0, 0]
        e22 = grads[:, 1, 1]
        g12 = grads[:, 0, 1] + grads[:, 1, 0]
        num = float(
            fac @ (e11**2 + e22**2 + 2.0 * kind.nu * e11 * e22 + 0.5 * (1.0 - kind.nu) * g12**2)
        )
        den = float(np.einsum("n,no,no->", w, values, values))
        return num, den
    if isinstance(kind, PLaplace):
        gn = np.sqrt(np.einsum("noc,noc->n", grads, grads))
        num = float(w @ gn**kind.p)
        den = float(w @ np.abs(values[:, 0]) ** kind.p)
        return num, den
    raise TypeError(f"unknown objective kind {type(kind).__name__}")


def _cotangents(kind, values, grads, grid, num, den):
    """d(num/den)/d(values), d(num/den)/d(grads) as arrays shaped like the inputs."""
    w = grid.weights
    inv = 1.0 / den
    r = num / den
    if isinstance(kind, (ScalarLaplace, DDimLaplace, VectorLaplace)):
        gbar = (2.0 * inv) * w[:, None, None] * grads
        vbar = (-2.0 * r * inv) * w[:, None] * values
        return vbar, gbar
    if isinstance(kind, PlaneStress):
        e = modulus(kind.field, grid.points[:, 0])
        fac = (w * e / (1.0 - kind.nu**2)) * inv
        e11 = grads[:, 0, 0]
        e22 = grads[:, 1, 1]
        g12 = grads[:, 0, 1] + grads[:, 1, 0]
        gbar = np.zeros_like(grads)
        gbar[:, 0, 0] = fac * (2.0 * e11 + 2.0 * kind.nu * e22)
        gbar[:, 1, 1] = fac * (2.0 * e22 + 2.0 * kind.nu * e11)
        shear = fac * (1.0 - kind.nu) * g12
        gbar[:, 0, 1] = shear
        gbar[:, 1, 0] = shear
        vbar = (-2.0 * r * inv) * w[:, None] * values
        return vbar, gbar
    if isinstance(kind, PLaplace):
        p = kind.p
        gn = np.sqrt(np.einsum("noc,noc->n", grads, grads))
        scale = np.zeros_like(gn)
        pos = gn > 0
        scale[pos] = w[pos] * p * gn[pos] ** (p - 2.0)
        gbar = (inv * scale)[:, None, None] * grads
        u = values[:, 0]
        au = np.abs(u)
        dden = np.zeros_like(u)
        posu = au > 0
        dden[posu] = w[posu] * p * au[posu] ** (p - 2.0) * u[posu]
        vbar = ((-r * inv) * dden)[:, None]
        return vbar, gbar
    raise TypeError(f"unknown objective kind {type(kind).__name__}")


def rayleigh(kind, bundle: EvalBundle, grid: QuadratureGrid) -> ObjectiveValue:
    """Quotient value only (penalty reported as zero)."""
    _check_bundle(kind, bundle.values, bundle.spatial_grads)
    if bundle.values.shape[0] != grid.size:
        raise ValueError("bundle and grid disagree on node count")
    num, den = _num_den(kind, bundle.values, bundle.spatial_grads, grid)
    if not den > _DEN_FLOOR:
        raise CollapseError(f"denominator {den:.3e} is numerically zero")
    return ObjectiveValue(rayleigh=num / den, penalty=0.0, numerator=num, denominator=den)


def quotient_cotangents(kind, values: np.ndarray, grads: np.ndarray, grid: QuadratureGrid):
    """Quotient plus d(quotient)/d(values), d(quotient)/d(grads) on raw arrays.

    The solver uses this where several slices share one network evaluation and
    the pullback must run once on the stacked arrays.
    """
    _check_bundle(kind, values, grads)
    num, den = _num_den(kind, values, grads, grid)
    if not den > _DEN_FLOOR:
        raise CollapseError(f"denominator {den:.3e} is numerically zero")
    vbar, gbar = _cotangents(kind, values, grads, grid, num, den)
    return ObjectiveValue(rayleigh=num / den, penalty=0.0, numerator=num, denominator=den), vbar, gbar


def norm_penalty(bundle: EvalBundle, grid: QuadratureGrid, beta: float) -> float:
    """beta * (||u||_w^2 - 1)^2, pinning the squared weighted norm to one."""
    if beta == 0.0:
        return 0.0
    sq = float(np.einsum("n,no,no->", grid.weights, bundle.values, bundle.values))
    return beta * (sq - 1.0) ** 2


def evaluate_objective(kind, bundle: EvalBundle, grid: QuadratureGrid, beta: float = 0.0) -> ObjectiveValue:
    base = rayleigh(kind, bundle, grid)
    if beta == 0.0:
        return base
    return ObjectiveValue(
        rayleigh=base.rayleigh,
        penalty=norm_penalty(bundle, grid, beta),
        numerator=base.numerator,
        denominator=base.denominator,
    )


def objective_gradient(
    kind, bundle: EvalBundle, grid: QuadratureGrid, beta: float = 0.0
) -> Tuple[ObjectiveValue, np.ndarray]:
    """Objective with its parameter gradient via the bundle pullback."""
    obj = evaluate_objective(kind, bundle, grid, beta)
    vbar, gbar = _cotangents(kind, bundle.values, bundle.spatial_grads, grid, obj.numerator, obj.denominator)
    if beta != 0.0:
        sq = float(np.einsum("n,no,no->", grid.weights, bundle.values, bundle.values))
        vbar = vbar + (4.0 * beta * (sq - 1.0)) * grid.weights[:, None] * bundle.values
    return obj, bundle.pullback(vbar, gbar)


def _as_kind_list(kinds, n: int) -> List:
    if isinstance(kinds, (list, tuple)):
        if len(kinds) != n:
            raise ValueError("one objective kind per slice required")
        return list(kinds)
    return [kinds] * n


def expected_rayleigh(kinds, bundles: Sequence[EvalBundle], grids: Sequence[QuadratureGrid], rho: Sequence[float]) -> float:
    """Density-weighted average of per-slice quotients.

    ``kinds`` is either one kind shared by all slices or a per-slice list
    (e.g. a stiffness interface moving with the slice parameter).
    """
    rho = np.asarray(rho, dtype=float)
    if len(bundles) != len(grids) or len(bundles) != rho.size:
        raise ValueError("slices, grids and weights must align")
    if abs(rho.sum() - 1.0) > 1e-12:
        raise ValueError("density weights must sum to one")
    kin = _as_kind_list(kinds, rho.size)
    return float(sum(r * rayleigh(k, b, g).rayleigh for k, b, g, r in zip(kin, bundles, grids, rho)))


def expected_objective_gradient(
    kinds, bundles: Sequence[EvalBundle], grids: Sequence[QuadratureGrid], rho: Sequence[float]
) -> Tuple[float, List[ObjectiveValue], np.ndarray]:
    """Expected quotient, the per-slice quotients, and the summed gradient."""
    rho = np.asarray(rho, dtype=float)
    kin = _as_kind_list(kinds, rho.size)
    if abs(rho.sum() - 1.0) > 1e-12:
        raise ValueError("density weights must sum to one")
    grad = None
    slices: List[ObjectiveValue] = []
    total = 0.0
    for k, b, g, r in zip(kin, bundles, grids, rho):
        obj, dg = objective_gradient(k, b, g, beta=0.0)
        slices.append(obj)
        total += r * obj.rayleigh
        grad = r * dg if grad is None else grad + r * dg
    return total, slices, grad
