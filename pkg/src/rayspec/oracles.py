"""Independent reference spectra: closed forms and finite-difference solvers.

Everything here is deliberately decoupled from the network stack so that the
variational results can be checked against machinery that shares none of its
code paths.  Closed forms cover boxes and Bessel domains; matrix solvers cover
the rest (masked Cartesian 5-point stencils, per-angular-mode radial stencils,
and a corner-sampled scheme for the plane-stress operator).
"""

from __future__ import annotations

import heapq
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
import scipy.special

from .objectives import ModulusField, modulus

__all__ = [
    "analytic_eigenvalues",
    "interval_eigenfunction",
    "square_eigenfunction",
    "eigenfunction_l2_error",
    "fd_interval_eigenvalues",
    "fd_masked_laplace_eigenvalues",
    "fd_radial_eigenvalues",
    "fd_plane_stress_eigenvalues",
]


# ---------------------------------------------------------------------------
# closed forms


def _box_sums(dim: int, n: int) -> np.ndarray:
    """The n smallest values of sum_k i_k^2 over positive integer indices."""
    if dim == 1:
        return np.arange(1, n + 1, dtype=float) ** 2
    squares = np.arange(1, n + 2, dtype=float) ** 2
    sums = squares.copy()
    for _ in range(dim - 1):
        sums = np.sort(np.add.outer(sums, squares).ravel())[: max(n, squares.size)]
    return sums[:n]


def _semicircle_squared_frequencies(n: int) -> np.ndarray:
    vals = []
    for m in range(1, n + 2):
        vals.extend(scipy.special.jn_zeros(m, n) ** 2)
    return np.sort(np.array(vals))[:n]


def _annulus_cross_roots(a: float, m: int, count: int) -> np.ndarray:
    """First roots k of J_m(k) Y_m(k a) - Y_m(k) J_m(k a) = 0."""

    def g(k):
        return scipy.special.jv(m, k) * scipy.special.yv(m, k * a) - scipy.special.yv(
            m, k
        ) * scipy.special.jv(m, k * a)

    from scipy.optimize import brentq

    roots = []
    # roots are spaced roughly pi/(1-a); scan well below that spacing
    step = 0.2 * np.pi / (1.0 - a)
    k, g_k = 1e-6, g(1e-6)
    while len(roots) < count:
        k_next = k + step
        g_next = g(k_next)
        if np.sign(g_next) != np.sign(g_k):
            roots.append(brentq(g, k, k_next, xtol=1e-13, rtol=1e-14))
        k, g_k = k_next, g_next
    return np.array(roots)


def _annulus_eigenvalues(a: float, n: int) -> np.ndarray:
    per_m = max(2, n)
    vals = []
    for m in range(0, n + 2):
        ks = _annulus_cross_roots(a, m, per_m)
        mult = 1 if m == 0 else 2
        for k in ks:
            vals.extend([k * k] * mult)
    return np.sort(np.array(vals))[:n]


def analytic_eigenvalues(
    domain: str,
    n: int,
    dim: Optional[int] = None,
    inner_radius: Optional[float] = None,
) -> np.ndarray:
    """Sorted reference eigenvalues of -lap with zero boundary data.

    Boxes give pi^2 times sums of squared integers; the half disc gives
    squared Bessel zeros j_{m,k}^2 with m >= 1; the ring gives squared roots
    of the Bessel cross product, with angular multiplicity two for m >= 1.
    "square-vector" doubles every multiplicity (one copy per component).
    """
    if domain == "interval":
        return np.pi**2 * _box_sums(1, n)
    if domain == "square":
        return np.pi**2 * _box_sums(2, n)
    if domain == "square-vector":
        scalar = np.pi**2 * _box_sums(2, n)
        return np.sort(np.concatenate([scalar, scalar]))[:n]
    if domain == "hypercube":
        if dim is None:
            raise ValueError("hypercube needs dim")
        return np.pi**2 * _box_sums(dim, n)
    if domain == "semicircle":
        return _semicircle_squared_frequencies(n)
    if domain == "annulus":
        if inner_radius is None or not 0.0 < inner_radius < 1.0:
            raise ValueError("annulus needs inner_radius in (0, 1)")
        return _annulus_eigenvalues(inner_radius, n)
    raise ValueError(f"no closed form for domain {domain!r}")


def interval_eigenfunction(index: int, points: np.ndarray) -> np.ndarray:
    """Unit-norm mode sqrt(2) sin(i pi x) on (0, 1)."""
    x = np.asarray(points, dtype=float).ravel()
    return np.sqrt(2.0) * np.sin(index * np.pi * x)


def square_eigenfunction(i: int, j: int, points: np.ndarray) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return 2.0 * np.sin(i * np.pi * pts[:, 0]) * np.sin(j * np.pi * pts[:, 1])


def eigenfunction_l2_error(
    approx: np.ndarray, reference: np.ndarray, weights: np.ndarray
) -> float:
    """Weighted L2 distance after unit normalization, minimized over sign."""
    a = np.asarray(approx, dtype=float).ravel()
    r = np.asarray(reference, dtype=float).ravel()
    w = np.asarray(weights, dtype=float).ravel()
    a = a / np.sqrt(w @ a**2)
    r = r / np.sqrt(w @ r**2)
    plus = w @ (a - r) ** 2
    minus = w @ (a + r) ** 2
    return float(np.sqrt(min(plus, minus)))


# ---------------------------------------------------------------------------
# finite differences, Cartesian


def fd_interval_eigenvalues(n_cells: int, n_modes: int) -> np.ndarray:
    """Three-point stencil on (0, 1); eigenvalues are (4/h^2) sin^2(i pi h / 2)."""
    h = 1.0 / n_cells
    diag = np.full(n_cells - 1, 2.0 / h**2)
    off = np.full(n_cells - 2, -1.0 / h**2)
    vals = scipy.linalg.eigvalsh_tridiagonal(diag, off, select="i", select_range=(0, n_modes - 1))
    return vals


def fd_masked_laplace_eigenvalues(
    n_cells: int,
    n_modes: int,
    mask: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    bbox: Sequence[Sequence[float]] = ((0.0, 1.0), (0.0, 1.0)),
    dense_limit: int = 1500,
    return_vectors: bool = False,
):
    """Five-point stencil on the lattice nodes inside a masked box.

    Nodes outside the mask stay at zero, which imposes the boundary condition
    along a staircase; accuracy on curved domains is first order, so prefer
    the radial solver there.  With ``return_vectors`` the result is a triple
    (values, vectors, points) with vectors of unit grid norm.
    """
    (x0, x1), (y0, y1) = bbox
    hx = (x1 - x0) / n_cells
    hy = (y1 - y0) / n_cells
    xs = x0 + hx * np.arange(1, n_cells)
    ys = y0 + hy * np.arange(1, n_cells)
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    inside = np.ones(len(pts), dtype=bool) if mask is None else np.asarray(mask(pts), dtype=bool)

    index = -np.ones(len(pts), dtype=int)
    index[inside] = np.arange(inside.sum())
    n_unknowns = int(inside.sum())
    if n_unknowns < n_modes:
        raise ValueError("grid too coarse for the requested mode count")
    grid_index = index.reshape(n_cells - 1, n_cells - 1)

    rows, cols, data = [], [], []

    def couple(shift_i, shift_j, coeff):
        src = np.full_like(grid_index, -1)
        if shift_i == 1:
            src[:-1, :] = grid_index[1:, :]
        elif shift_i == -1:
            src[1:, :] = grid_index[:-1, :]
        elif shift_j == 1:
            src[:, :-1] = grid_index[:, 1:]
        else:
            src[:, 1:] = grid_index[:, :-1]
        here = grid_index.ravel()
        there = src.ravel()
        ok = (here >= 0) & (there >= 0)
        rows.append(here[ok])
        cols.append(there[ok])
        data.append(np.full(ok.sum(), coeff))

    couple(1, 0, -1.0 / hx**2)
    couple(-1, 0, -1.0 / hx**2)
    couple(0, 1, -1.0 / hy**2)
    couple(0, -1, -1.0 / hy**2)
    own = grid_index.ravel()
    ok = own >= 0
    rows.append(own[ok])
    cols.append(own[ok])
    data.append(np.full(ok.sum(), 2.0 / hx**2 + 2.0 / hy**2))

    lap = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_unknowns, n_unknowns),
    ).tocsc()

    if n_unknowns <= dense_limit:
        vals, vecs = np.linalg.eigh(lap.toarray())
        vals, vecs = vals[:n_modes], vecs[:, :n_modes]
    else:
        vals, vecs = spla.eigsh(lap, k=n_modes, sigma=0.0, which="LM")
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    if not return_vectors:
        return vals
    vecs = vecs / np.sqrt(hx * hy * (vecs**2).sum(axis=0))
    return vals, vecs, pts[inside]


# ---------------------------------------------------------------------------
# finite differences, radial per angular mode


def _radial_mode_eigenvalues(
    r_lo: float, r_hi: float, m: int, n_cells: int, n_modes: int
) -> np.ndarray:
    """Dirichlet radial operator -(1/r)(r R')' + m^2/r^2 R on (r_lo, r_hi).

    Node-centered flux form; the generalized tridiagonal pencil (K, M) with
    diagonal M = diag(r_j h) is folded into a standard symmetric tridiagonal
    problem by the similarity D^{-1/2} K D^{-1/2}.
    """
    h = (r_hi - r_lo) / n_cells
    r = r_lo + h * np.arange(1, n_cells)
    r_half_lo = r - 0.5 * h
    r_half_hi = r + 0.5 * h
    k_diag = (r_half_lo + r_half_hi) / h
    if m > 0:
        k_diag = k_diag + m * m * h / r
    k_off = -r_half_hi[:-1] / h
    d = r * h
    diag = k_diag / d
    off = k_off / np.sqrt(d[:-1] * d[1:])
    return scipy.linalg.eigvalsh_tridiagonal(diag, off, select="i", select_range=(0, n_modes - 1))


def fd_radial_eigenvalues(
    domain: str,
    n_modes: int,
    inner_radius: Optional[float] = None,
    n_cells: int = 3000,
    m_max: Optional[int] = None,
) -> np.ndarray:
    """Second-order reference spectrum for the half disc or the ring.

    The half disc admits only sin(m theta) with m >= 1 (each simple); the ring
    admits m = 0 once and every m >= 1 twice.
    """
    if domain == "semicircle":
        r_lo, first_m, base_mult = 0.0, 1, 1
        r_hi = 1.0
    elif domain == "annulus":
        if inner_radius is None or not 0.0 < inner_radius < 1.0:
            raise ValueError("annulus needs inner_radius in (0, 1)")
        r_lo, first_m, base_mult = inner_radius, 0, 1
        r_hi = 1.0
    else:
        raise ValueError(f"no radial form for domain {domain!r}")

    if m_max is None:
        m_max = n_modes + 2
    per_m = max(2, n_modes)
    vals = []
    for m in range(first_m, m_max + 1):
        lam = _radial_mode_eigenvalues(r_lo, r_hi, m, n_cells, per_m)
        mult = base_mult if m == 0 else (1 if domain == "semicircle" else 2)
        for v in lam:
            vals.extend([v] * mult)
    return np.sort(np.array(vals))[:n_modes]


# ---------------------------------------------------------------------------
# finite differences, plane stress


def fd_plane_stress_eigenvalues(
    field: Optional[ModulusField] = None,
    nu: float = 0.25,
    n_cells: int = 100,
    n_modes: int = 1,
    material: str = "plane-stress",
) -> np.ndarray:
    """Clamped plane-stress spectrum on the unit square by corner sampling.

    Strains are one-sided edge differences evaluated at all four corners of
    every cell with weight h^2/4, which is the bilinear element with corner
    quadrature; the lumped mass is exactly h^2 per interior node.  Material
    "vector-laplace" replaces the constitutive form with the decoupled
    gradient square (its spectrum is two copies of the scalar stencil's, a
    frozen cross-check for the assembly).
    """
    if material not in ("plane-stress", "vector-laplace"):
        raise ValueError(f"unknown material {material!r}")
    n = n_cells
    h = 1.0 / n

    def node_id(i, j):
        # interior nodes only; boundary values are fixed at zero
        inside = (i >= 1) & (i <= n - 1) & (j >= 1) & (j <= n - 1)
        return np.where(inside, (i - 1) * (n - 1) + (j - 1), -1)

    n_int = (n - 1) * (n - 1)

    # sample s = (cell (i, j), corner (p, q)); its x-edge spans (i -> i+1) at
    # row j+q and its y-edge spans (j -> j+1) at column i+p
    ci, cj, p, q = [
        arr.ravel()
        for arr in np.meshgrid(
            np.arange(n), np.arange(n), np.array([0, 1]), np.array([0, 1]), indexing="ij"
        )
    ]
    n_samples = ci.size
    sample_rows = np.arange(n_samples)

    def diff_operator(node_a, node_b):
        """Sparse (u[b] - u[a]) / h over interior unknowns."""
        rows, cols, data = [], [], []
        for nodes, sign in ((node_b, 1.0), (node_a, -1.0)):
            ok = nodes >= 0
            rows.append(sample_rows[ok])
            cols.append(nodes[ok])
            data.append(np.full(ok.sum(), sign / h))
        return sp.coo_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n_samples, n_int),
        ).tocsr()

    bx = diff_operator(node_id(ci, cj + q), node_id(ci + 1, cj + q))
    by = diff_operator(node_id(ci + p, cj), node_id(ci + p, cj + 1))

    w = np.full(n_samples, h * h / 4.0)
    x1 = (ci + p) * h

    def sandwich(left, mid, right):
        return (left.T @ sp.diags(w * mid) @ right).tocsr()

    e = modulus(field, x1) if field is not None else np.ones(n_samples)
    if material == "vector-laplace":
        block = sandwich(bx, e, bx) + sandwich(by, e, by)
        k = sp.bmat([[block, None], [None, block]], format="csr")
    else:
        c11 = e / (1.0 - nu * nu)
        c12 = nu * c11
        c33 = e / (2.0 * (1.0 + nu))
        k11 = sandwich(bx, c11, bx) + sandwich(by, c33, by)
        k22 = sandwich(by, c11, by) + sandwich(bx, c33, bx)
        k12 = sandwich(bx, c12, by) + sandwich(by, c33, bx)
        k = sp.bmat([[k11, k12], [k12.T, k22]], format="csr")

    k = (k + k.T) * 0.5
    # lumped mass is h^2 I, so fold it into the operator
    k = k / (h * h)
    vals = spla.eigsh(k, k=n_modes, sigma=0.0, which="LM", return_eigenvectors=False)
    return np.sort(vals)
