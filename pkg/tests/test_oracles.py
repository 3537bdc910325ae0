"""Reference spectra: closed forms against matrix solvers against each other."""

import numpy as np
import pytest

from rayspec.objectives import ModulusField
from rayspec.oracles import (
    analytic_eigenvalues,
    eigenfunction_l2_error,
    fd_interval_eigenvalues,
    fd_masked_laplace_eigenvalues,
    fd_plane_stress_eigenvalues,
    fd_radial_eigenvalues,
    interval_eigenfunction,
    square_eigenfunction,
)

PI2 = np.pi**2


def test_box_closed_forms():
    assert np.allclose(analytic_eigenvalues("interval", 4), PI2 * np.array([1, 4, 9, 16]))
    assert np.allclose(analytic_eigenvalues("square", 6), PI2 * np.array([2, 5, 5, 8, 10, 10]))
    assert np.allclose(
        analytic_eigenvalues("square-vector", 5), PI2 * np.array([2, 2, 5, 5, 5])
    )
    assert np.allclose(
        analytic_eigenvalues("hypercube", 3, dim=10), PI2 * np.array([10, 13, 13])
    )
    # 1-d box through the generic path agrees with the interval
    assert np.allclose(
        analytic_eigenvalues("hypercube", 5, dim=1), analytic_eigenvalues("interval", 5)
    )


def test_half_disc_closed_form_values():
    # squared Bessel zeros, lowest angular orders first
    lam = analytic_eigenvalues("semicircle", 9)
    expected = [14.682, 26.375, 40.706, 49.218, 57.583, 70.850, 76.939, 95.278, 98.726]
    assert np.allclose(lam, expected, atol=2e-3)
    assert np.all(np.diff(lam) > 0)


def test_ring_closed_form_multiplicities():
    lam = analytic_eigenvalues("annulus", 9, inner_radius=0.5)
    # lowest mode is radial (simple), then angular pairs
    assert lam[0] == pytest.approx(39.0133, abs=1e-3)
    assert lam[1] == pytest.approx(lam[2])
    assert lam[3] == pytest.approx(lam[4])
    with pytest.raises(ValueError):
        analytic_eigenvalues("annulus", 3)
    with pytest.raises(ValueError):
        analytic_eigenvalues("hypercube", 3)
    with pytest.raises(ValueError):
        analytic_eigenvalues("dodecahedron", 3)


def test_interval_stencil_matches_exact_formula():
    n, k = 50, 3
    h = 1.0 / n
    lam = fd_interval_eigenvalues(n, k)
    exact = (4 / h**2) * np.sin(np.arange(1, k + 1) * np.pi * h / 2) ** 2
    assert np.allclose(lam, exact, rtol=1e-12)


def test_masked_square_matches_exact_formula():
    n, h = 40, 1.0 / 40

    def ex(i, j):
        return (4 / h**2) * (np.sin(i * np.pi * h / 2) ** 2 + np.sin(j * np.pi * h / 2) ** 2)

    lam = fd_masked_laplace_eigenvalues(n, 4)
    assert np.allclose(lam, sorted([ex(1, 1), ex(1, 2), ex(2, 1), ex(2, 2)]), rtol=1e-10)


def test_masked_solver_dense_and_sparse_agree():
    dense = fd_masked_laplace_eigenvalues(30, 3, dense_limit=10**6)
    sparse = fd_masked_laplace_eigenvalues(30, 3, dense_limit=1)
    assert np.allclose(dense, sparse, rtol=1e-9)


def test_masked_solver_returns_normalized_eigenvectors():
    n = 25
    vals, vecs, pts = fd_masked_laplace_eigenvalues(n, 2, return_vectors=True)
    h = 1.0 / n
    assert pts.shape == ((n - 1) ** 2, 2)
    assert np.allclose(h * h * (vecs**2).sum(axis=0), 1.0)
    # the first mode is a product of sines up to sign
    ref = np.sin(np.pi * pts[:, 0]) * np.sin(np.pi * pts[:, 1])
    ref = ref / np.sqrt(h * h * (ref**2).sum())
    align = abs(h * h * (vecs[:, 0] * ref).sum())
    assert align == pytest.approx(1.0, abs=1e-3)


def test_symmetric_eigensolver_residuals_are_tiny():
    # the dense eigensolver behind the masked path satisfies A v = lambda v
    rng = np.random.default_rng(0)
    a = rng.normal(size=(50, 50))
    a = 0.5 * (a + a.T)
    vals, vecs = np.linalg.eigh(a)
    residual = np.abs(a @ vecs - vecs * vals).max()
    assert residual < 1e-8


def test_masked_semicircle_is_first_order_accurate():
    def mask(p):
        return (p[:, 0] ** 2 + p[:, 1] ** 2 < 1.0) & (p[:, 1] > 0)

    lam = fd_masked_laplace_eigenvalues(160, 1, mask=mask, bbox=((-1, 1), (0, 1)))
    assert abs(lam[0] - 14.68197) / 14.68197 < 0.01


def test_radial_solver_matches_closed_forms():
    sc = fd_radial_eigenvalues("semicircle", 6, n_cells=2000)
    assert np.allclose(sc, analytic_eigenvalues("semicircle", 6), rtol=1e-5)
    ring = fd_radial_eigenvalues("annulus", 6, inner_radius=0.25, n_cells=2000)
    assert np.allclose(ring, analytic_eigenvalues("annulus", 6, inner_radius=0.25), rtol=1e-5)


def test_radial_solver_is_second_order():
    ref = analytic_eigenvalues("semicircle", 1)[0]
    errs = [abs(fd_radial_eigenvalues("semicircle", 1, n_cells=n)[0] - ref) for n in (100, 200, 400)]
    rates = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(rates > 1.8)


def test_radial_solver_rejects_unknown_domains():
    with pytest.raises(ValueError):
        fd_radial_eigenvalues("square", 3)
    with pytest.raises(ValueError):
        fd_radial_eigenvalues("annulus", 3)


def test_corner_scheme_reproduces_scalar_stencil_twice():
    n, h = 40, 1.0 / 40

    def ex(i, j):
        return (4 / h**2) * (np.sin(i * np.pi * h / 2) ** 2 + np.sin(j * np.pi * h / 2) ** 2)

    lam = fd_plane_stress_eigenvalues(material="vector-laplace", n_cells=n, n_modes=4)
    expected = np.sort([ex(1, 1), ex(1, 1), ex(1, 2), ex(1, 2)])
    assert np.allclose(lam, expected, rtol=1e-8)


def test_plane_stress_scales_linearly_in_stiffness():
    base = fd_plane_stress_eigenvalues(
        field=ModulusField(e0=1, e1=1), nu=0.25, n_cells=30, n_modes=1
    )[0]
    doubled = fd_plane_stress_eigenvalues(
        field=ModulusField(e0=2, e1=2), nu=0.25, n_cells=30, n_modes=1
    )[0]
    assert doubled == pytest.approx(2 * base, rel=1e-9)
    assert base == pytest.approx(13.822, rel=1e-3)


def test_plane_stress_self_convergence():
    # truncation terms of opposite sign make the error non-monotone, so
    # check a shrinking agreement band instead of a Richardson rate
    mid = fd_plane_stress_eigenvalues(
        field=ModulusField(e0=1, e1=1), nu=0.25, n_cells=40, n_modes=1
    )[0]
    fine = fd_plane_stress_eigenvalues(
        field=ModulusField(e0=1, e1=1), nu=0.25, n_cells=80, n_modes=1
    )[0]
    finest = fd_plane_stress_eigenvalues(
        field=ModulusField(e0=1, e1=1), nu=0.25, n_cells=160, n_modes=1
    )[0]
    assert abs(mid - finest) / finest < 1e-4
    assert abs(fine - finest) / finest < 2e-5


def test_plane_stress_rejects_unknown_material():
    with pytest.raises(ValueError):
        fd_plane_stress_eigenvalues(material="rubber", n_cells=10)


def test_decoupled_variant_endpoint_eigenvalues_scale_with_stiffness():
    # interface at 0 leaves the high modulus everywhere, at 1 the low one
    lo = fd_plane_stress_eigenvalues(
        field=ModulusField(e0=1, e1=5, a=1.0), material="vector-laplace", n_cells=40
    )[0]
    hi = fd_plane_stress_eigenvalues(
        field=ModulusField(e0=1, e1=5, a=0.0), material="vector-laplace", n_cells=40
    )[0]
    assert hi / lo == pytest.approx(5.0, rel=0.05)
    assert lo == pytest.approx(2 * np.pi**2, rel=0.05)


def test_eigenfunction_error_is_sign_and_scale_blind():
    x = np.linspace(0.005, 0.995, 100)
    w = np.full(100, 0.01)
    u = interval_eigenfunction(2, x)
    assert eigenfunction_l2_error(3.7 * u, u, w) < 1e-12
    assert eigenfunction_l2_error(-u, u, w) < 1e-12
    v = interval_eigenfunction(3, x)
    # distinct modes are orthogonal, so the normalized distance is sqrt(2)
    assert eigenfunction_l2_error(u, v, w) == pytest.approx(np.sqrt(2), abs=1e-2)


def test_square_eigenfunction_values():
    pts = np.array([[0.5, 0.5], [0.25, 0.5]])
    vals = square_eigenfunction(1, 1, pts)
    assert vals[0] == pytest.approx(2.0)
    assert vals[1] == pytest.approx(2 * np.sin(np.pi / 4))
