"""Spectral assembly on a learned eigenbasis, with manufactured right-hand sides.

A converged basis of N eigenfunction samples turns a source problem
-lap(T) = s with homogeneous Dirichlet data into the small dense system

    K a = F,   K_kl = sum_i w_i grad(u_k) . grad(u_l),   F_k = sum_i w_i s u_k.

Manufactured targets are the boundary factor times a random cubic polynomial;
their Laplacians come from second-order directional jets evaluated through the
same formula objects, so the source is closed-form rather than differenced.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .ansatz import LevelSet
from .orthogonalize import EigenBasis
from .quadrature import QuadratureGrid

__all__ = [
    "Jet2",
    "ManufacturedSolution",
    "sample_manufactured",
    "manufactured_values",
    "manufactured_gradient",
    "manufactured_source",
    "GalerkinSystem",
    "assemble",
    "load_vector",
    "solve_system",
    "galerkin_errors",
    "mean_relative_error",
]


class Jet2:
    """Value with first and second directional derivatives along one direction.

    Supports the ring operations a polynomial needs; the second-derivative
    channel carries the Leibniz rule (fg)'' = f''g + 2f'g' + fg''.
    """

    __slots__ = ("val", "d1", "d2")

    def __init__(self, val, d1=0.0, d2=0.0):
        self.val = np.asarray(val, dtype=float)
        self.d1 = np.broadcast_to(np.asarray(d1, dtype=float), self.val.shape).copy()
        self.d2 = np.broadcast_to(np.asarray(d2, dtype=float), self.val.shape).copy()

    def _lift(self, other):
        if isinstance(other, Jet2):
            return other
        return Jet2(np.broadcast_to(np.asarray(other, dtype=float), self.val.shape))

    def __add__(self, other):
        o = self._lift(other)
        return Jet2(self.val + o.val, self.d1 + o.d1, self.d2 + o.d2)

    __radd__ = __add__

    def __neg__(self):
        return Jet2(-self.val, -self.d1, -self.d2)

    def __sub__(self, other):
        o = self._lift(other)
        return Jet2(self.val - o.val, self.d1 - o.d1, self.d2 - o.d2)

    def __rsub__(self, other):
        return self._lift(other).__sub__(self)

    def __mul__(self, other):
        o = self._lift(other)
        return Jet2(
            self.val * o.val,
            self.d1 * o.val + self.val * o.d1,
            self.d2 * o.val + 2.0 * self.d1 * o.d1 + self.val * o.d2,
        )

    __rmul__ = __mul__

    def __pow__(self, n):
        if not isinstance(n, int) or n < 0:
            raise ValueError("jets support non-negative integer powers only")
        out = Jet2(np.ones_like(self.val))
        base = self
        k = n
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out


# exponent pairs of the cubic polynomial, graded lexicographic
MONOMIAL_POWERS: Tuple[Tuple[int, int], ...] = (
    (0, 0),
    (1, 0),
    (0, 1),
    (2, 0),
    (1, 1),
    (0, 2),
    (3, 0),
    (2, 1),
    (1, 2),
    (0, 3),
)


@dataclass(frozen=True)
class ManufacturedSolution:
    """Target T(x) = D(x) * sum_k t_k x1^i x2^j with i + j <= 3."""

    coeffs: np.ndarray
    levelset: LevelSet

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.shape != (len(MONOMIAL_POWERS),):
            raise ValueError(f"expected {len(MONOMIAL_POWERS)} coefficients")
        object.__setattr__(self, "coeffs", c)


def sample_manufactured(levelset: LevelSet, seed: int, low: float = 0.0, high: float = 3.0) -> ManufacturedSolution:
    """Random cubic with coefficients uniform on [low, high)."""
    rng = np.random.default_rng(seed)
    return ManufacturedSolution(coeffs=rng.uniform(low, high, size=len(MONOMIAL_POWERS)), levelset=levelset)


def _poly(coords, coeffs):
    out = None
    for t, (i, j) in zip(coeffs, MONOMIAL_POWERS):
        term = float(t) * coords[0] ** i * coords[1] ** j
        out = term if out is None else out + term
    return out


def _target(coords, ms: ManufacturedSolution):
    return ms.levelset.formula(coords) * _poly(coords, ms.coeffs)


def manufactured_values(ms: ManufacturedSolution, points: np.ndarray) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return np.asarray(_target([pts[:, 0], pts[:, 1]], ms))


def _jet_pass(ms: ManufacturedSolution, points: np.ndarray, direction: int) -> Jet2:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    coords = [
        Jet2(pts[:, c], d1=(1.0 if c == direction else 0.0))
        for c in range(2)
    ]
    return _target(coords, ms)


def manufactured_gradient(ms: ManufacturedSolution, points: np.ndarray) -> np.ndarray:
    return np.column_stack([_jet_pass(ms, points, c).d1 for c in range(2)])


def manufactured_source(ms: ManufacturedSolution, points: np.ndarray) -> np.ndarray:
    """Source s = -lap(T), the sum of per-direction second jet channels."""
    return -sum(_jet_pass(ms, points, c).d2 for c in range(2))


@dataclass
class GalerkinSystem:
    """Stiffness matrix and load vector on the basis; solve fills ``coeffs``."""

    stiffness: np.ndarray
    load: np.ndarray
    coeffs: Optional[np.ndarray] = None


def _basis_stacks(basis: EigenBasis):
    if basis.mode != "grid":
        raise ValueError("assembly needs grid-mode basis samples")
    if len(basis) == 0:
        raise ValueError("empty basis")
    vals, grads = basis.stacked()
    if vals.shape[2] != 1:
        raise ValueError("assembly covers scalar bases")
    return vals[:, :, 0], grads[:, :, 0, :]


def assemble(basis: EigenBasis, source_values: np.ndarray, grid: QuadratureGrid) -> GalerkinSystem:
    """Stiffness from stored gradients, load from the strong-form source."""
    vals, grads = _basis_stacks(basis)
    if vals.shape[1] != grid.size:
        raise ValueError("basis samples and grid disagree")
    k = np.einsum("knc,lnc,n->kl", grads, grads, grid.weights)
    k = 0.5 * (k + k.T)
    f = np.einsum("kn,n,n->k", vals, np.asarray(source_values, dtype=float).ravel(), grid.weights)
    return GalerkinSystem(stiffness=k, load=f)


def load_vector(basis: EigenBasis, ms: ManufacturedSolution, grid: QuadratureGrid, form: str = "strong") -> np.ndarray:
    """Load in strong form (-lap T against u_k) or weak form (grad T . grad u_k)."""
    vals, grads = _basis_stacks(basis)
    if form == "strong":
        s = manufactured_source(ms, grid.points)
        return np.einsum("kn,n,n->k", vals, s, grid.weights)
    if form == "weak":
        gt = manufactured_gradient(ms, grid.points)
        return np.einsum("knc,nc,n->k", grads, gt, grid.weights)
    raise ValueError(f"unknown load form {form!r}")


def solve_system(system: GalerkinSystem) -> np.ndarray:
    """Direct dense solve; stores and returns the expansion coefficients."""
    a = np.linalg.solve(system.stiffness, system.load)
    residual = system.stiffness @ a - system.load
    scale = max(1.0, float(np.linalg.norm(system.load)))
    if np.linalg.norm(residual) / scale > 1e-10:
        raise RuntimeError("spectral system solve left a large residual; basis may be degenerate")
    system.coeffs = a
    return a


def galerkin_errors(
    basis: EigenBasis,
    grid: QuadratureGrid,
    levelset: LevelSet,
    n_samples: int,
    seed: int,
) -> np.ndarray:
    """Relative squared reconstruction error for each manufactured sample.

    err_j = sum_i w_i (T_j - sum_k a_k u_k)^2 / sum_i w_i T_j^2.

    The Laplacian is linear in the polynomial coefficients, so per-monomial
    target and source columns are built once and every sample is a matrix
    product away.
    """
    vals, _ = _basis_stacks(basis)
    if vals.shape[1] != grid.size:
        raise ValueError("basis samples and grid disagree")
    n_mono = len(MONOMIAL_POWERS)
    t_cols = np.empty((grid.size, n_mono))
    s_cols = np.empty((grid.size, n_mono))
    for m in range(n_mono):
        unit = np.zeros(n_mono)
        unit[m] = 1.0
        ms = ManufacturedSolution(coeffs=unit, levelset=levelset)
        t_cols[:, m] = manufactured_values(ms, grid.points)
        s_cols[:, m] = manufactured_source(ms, grid.points)

    # draw per-sample blocks so a longer run reuses a shorter run's samples
    rng = np.random.default_rng(seed)
    t_samples = rng.uniform(0.0, 3.0, size=(n_samples, n_mono)).T

    targets = t_cols @ t_samples  # (n, S)
    sources = s_cols @ t_samples
    k = assemble(basis, np.zeros(grid.size), grid).stiffness
    loads = np.einsum("kn,ns,n->ks", vals, sources, grid.weights)
    coeffs = np.linalg.solve(k, loads)
    recon = vals.T @ coeffs  # (n, S)
    w = grid.weights
    err = (w @ (targets - recon) ** 2) / (w @ targets**2)
    return err


def mean_relative_error(
    basis: EigenBasis,
    grid: QuadratureGrid,
    levelset: LevelSet,
    n_samples: int,
    seed: int,
) -> float:
    """Mean of ``galerkin_errors`` over the manufactured sample set."""
    return float(galerkin_errors(basis, grid, levelset, n_samples, seed).mean())
