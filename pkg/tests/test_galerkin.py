"""Second-order jets, manufactured sources, and the spectral solve."""

import numpy as np
import pytest

from rayspec.ansatz import builtin_levelset
from rayspec.galerkin import (
    MONOMIAL_POWERS,
    GalerkinSystem,
    Jet2,
    ManufacturedSolution,
    assemble,
    galerkin_errors,
    load_vector,
    manufactured_gradient,
    manufactured_source,
    manufactured_values,
    mean_relative_error,
    sample_manufactured,
    solve_system,
)
from rayspec.orthogonalize import EigenBasis, GridEntry
from rayspec.quadrature import unit_square_grid


def sine_basis(grid, modes):
    """Exact Dirichlet eigenfunctions of the unit square, unit L2 norm."""
    basis = EigenBasis(mode="grid", grid=grid)
    x, y = grid.points[:, 0], grid.points[:, 1]
    for i, j in modes:
        u = 2.0 * np.sin(i * np.pi * x) * np.sin(j * np.pi * y)
        gx = 2.0 * i * np.pi * np.cos(i * np.pi * x) * np.sin(j * np.pi * y)
        gy = 2.0 * j * np.pi * np.sin(i * np.pi * x) * np.cos(j * np.pi * y)
        basis.append(
            GridEntry(
                eigenvalue=float((i * i + j * j) * np.pi**2),
                values=u[:, None],
                grads=np.stack([gx, gy], axis=1)[:, None, :],
            )
        )
    return basis


MODES_9 = [(1, 1), (1, 2), (2, 1), (2, 2), (1, 3), (3, 1), (2, 3), (3, 2), (3, 3)]


def test_jet_arithmetic_matches_hand_derivatives():
    x = np.array([0.1, 0.7, -1.3])
    j = Jet2(x, d1=1.0)
    g = j * j * j - 2.0 * j + 5.0
    assert np.allclose(g.val, x**3 - 2 * x + 5)
    assert np.allclose(g.d1, 3 * x**2 - 2)
    assert np.allclose(g.d2, 6 * x)

    h = (1.0 - j) ** 4
    assert np.allclose(h.d1, -4 * (1 - x) ** 3)
    assert np.allclose(h.d2, 12 * (1 - x) ** 2)


def test_jet_rejects_fractional_and_negative_powers():
    j = Jet2(np.array([0.5]), d1=1.0)
    with pytest.raises(ValueError):
        j ** 0.5
    with pytest.raises(ValueError):
        j ** (-1)


def test_monomial_family_is_complete_cubic():
    expected = {(i, j) for i in range(4) for j in range(4) if i + j <= 3}
    assert len(MONOMIAL_POWERS) == 10
    assert set(MONOMIAL_POWERS) == expected


def test_manufactured_coefficient_validation():
    with pytest.raises(ValueError):
        ManufacturedSolution(coeffs=np.ones(9), levelset=builtin_levelset("square"))


@pytest.mark.parametrize("domain", ["square", "semicircle"])
def test_gradient_and_source_match_finite_differences(domain):
    ls = builtin_levelset(domain)
    ms = sample_manufactured(ls, seed=42)
    pts = np.array([[0.31, 0.22], [0.55, 0.41], [0.12, 0.63], [-0.4, 0.3]])
    if domain == "square":
        pts = np.abs(pts)

    h = 1e-5
    grad = manufactured_gradient(ms, pts)
    for c in range(2):
        step = np.zeros((1, 2))
        step[0, c] = h
        fd = (manufactured_values(ms, pts + step) - manufactured_values(ms, pts - step)) / (2 * h)
        assert np.allclose(grad[:, c], fd, atol=1e-6)

    h2 = 1e-4
    lap = np.zeros(len(pts))
    for c in range(2):
        step = np.zeros((1, 2))
        step[0, c] = h2
        lap += (
            manufactured_values(ms, pts + step)
            - 2 * manufactured_values(ms, pts)
            + manufactured_values(ms, pts - step)
        ) / h2**2
    assert np.allclose(manufactured_source(ms, pts), -lap, atol=1e-5)


def test_source_of_bare_boundary_factor_is_exact():
    # T = x(1-x)y(1-y) gives -lap T = 2y(1-y) + 2x(1-x)
    coeffs = np.zeros(10)
    coeffs[0] = 1.0
    ms = ManufacturedSolution(coeffs=coeffs, levelset=builtin_levelset("square"))
    pts = np.random.default_rng(0).uniform(0, 1, size=(50, 2))
    x, y = pts[:, 0], pts[:, 1]
    expected = 2 * y * (1 - y) + 2 * x * (1 - x)
    assert np.allclose(manufactured_source(ms, pts), expected, atol=1e-12)


def test_stiffness_of_exact_modes_is_diagonal_spectrum():
    grid = unit_square_grid(80)
    basis = sine_basis(grid, MODES_9[:5])
    system = assemble(basis, np.zeros(grid.size), grid)
    lam = basis.eigenvalues()
    assert np.allclose(system.stiffness, system.stiffness.T)
    assert np.abs(system.stiffness - np.diag(lam)).max() < 0.06


def test_solve_recovers_a_span_member():
    grid = unit_square_grid(80)
    basis = sine_basis(grid, MODES_9[:6])
    c = np.array([1.0, 0.5, -0.3, 0.2, 0.1, -0.25])
    vals, _ = basis.stacked()
    lam = basis.eigenvalues()
    source = np.einsum("k,k,kn->n", c, lam, vals[:, :, 0])
    system = assemble(basis, source, grid)
    got = solve_system(system)
    assert system.coeffs is got
    assert np.allclose(got, c, atol=5e-3)


def test_strong_and_weak_loads_agree():
    grid = unit_square_grid(100)
    basis = sine_basis(grid, MODES_9)
    ls = builtin_levelset("square")
    ms = sample_manufactured(ls, seed=3)
    f_strong = load_vector(basis, ms, grid, form="strong")
    f_weak = load_vector(basis, ms, grid, form="weak")
    scale = max(1.0, np.abs(f_strong).max())
    assert np.abs(f_strong - f_weak).max() / scale < 1e-3
    with pytest.raises(ValueError):
        load_vector(basis, ms, grid, form="mystery")


def test_singular_stiffness_is_rejected():
    bad = GalerkinSystem(stiffness=np.ones((2, 2)), load=np.array([1.0, 0.0]))
    with pytest.raises((RuntimeError, np.linalg.LinAlgError)):
        solve_system(bad)


def test_error_samples_are_prefix_reproducible():
    grid = unit_square_grid(40)
    basis = sine_basis(grid, MODES_9[:4])
    ls = builtin_levelset("square")
    long = galerkin_errors(basis, grid, ls, n_samples=5, seed=7)
    short = galerkin_errors(basis, grid, ls, n_samples=3, seed=7)
    assert np.allclose(long[:3], short, rtol=1e-12, atol=0)


def test_vectorized_errors_match_single_sample_path():
    grid = unit_square_grid(40)
    basis = sine_basis(grid, MODES_9[:4])
    ls = builtin_levelset("square")
    seed = 11
    batch = galerkin_errors(basis, grid, ls, n_samples=1, seed=seed)

    ms = sample_manufactured(ls, seed=seed)
    system = assemble(basis, manufactured_source(ms, grid.points), grid)
    a = solve_system(system)
    vals, _ = basis.stacked()
    recon = vals[:, :, 0].T @ a
    target = manufactured_values(ms, grid.points)
    w = grid.weights
    manual = (w @ (target - recon) ** 2) / (w @ target**2)
    assert np.allclose(batch[0], manual, rtol=1e-10)


def test_more_modes_reduce_reconstruction_error():
    grid = unit_square_grid(60)
    ls = builtin_levelset("square")
    few = mean_relative_error(sine_basis(grid, MODES_9[:4]), grid, ls, n_samples=20, seed=5)
    many = mean_relative_error(sine_basis(grid, MODES_9), grid, ls, n_samples=20, seed=5)
    assert many < few
    assert many < 0.05
