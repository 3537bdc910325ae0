"""Quotient kinds against analytic integrals and finite-difference gradients."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rayspec.ansatz import NeuralAnsatz, builtin_levelset
from rayspec.mlp import EvalBundle, MlpSpec
from rayspec.objectives import (
    CollapseError,
    DDimLaplace,
    ModulusField,
    ObjectiveValue,
    PLaplace,
    PlaneStress,
    ScalarLaplace,
    VectorLaplace,
    evaluate_objective,
    expected_objective_gradient,
    expected_rayleigh,
    modulus,
    norm_penalty,
    objective_gradient,
    plane_stress_matrix,
    rayleigh,
)
from rayspec.quadrature import interval_grid, unit_square_grid


def analytic_bundle(grid, value_fn, grad_fn):
    """Bundle holding exact samples of a closed-form function (no pullback)."""
    v = value_fn(grid.points)
    g = grad_fn(grid.points)
    return EvalBundle(values=v, spatial_grads=g)


def sine_bundle(grid, k=1):
    return analytic_bundle(
        grid,
        lambda p: np.sin(k * np.pi * p[:, 0])[:, None],
        lambda p: (k * np.pi * np.cos(k * np.pi * p[:, 0]))[:, None, None],
    )


def test_sine_quotient_reproduces_analytic_eigenvalue():
    grid = interval_grid(250)
    for k in (1, 2, 5):
        obj = rayleigh(ScalarLaplace(), sine_bundle(grid, k), grid)
        # midpoint sums of sin^2 and cos^2 are both exactly 1/2 here
        assert abs(obj.rayleigh - (k * np.pi) ** 2) < 1e-9 * (k * np.pi) ** 2


def test_square_mode_quotient():
    grid = unit_square_grid(50)
    v = lambda p: (np.sin(np.pi * p[:, 0]) * np.sin(np.pi * p[:, 1]))[:, None]

    def g(p):
        out = np.empty((p.shape[0], 1, 2))
        out[:, 0, 0] = np.pi * np.cos(np.pi * p[:, 0]) * np.sin(np.pi * p[:, 1])
        out[:, 0, 1] = np.pi * np.sin(np.pi * p[:, 0]) * np.cos(np.pi * p[:, 1])
        return out

    obj = rayleigh(ScalarLaplace(), analytic_bundle(grid, v, g), grid)
    assert abs(obj.rayleigh - 2 * np.pi**2) < 1e-8


def test_vector_laplace_is_sum_of_component_energies():
    grid = unit_square_grid(20)
    rng = np.random.default_rng(0)
    v = rng.standard_normal((grid.size, 2))
    g = rng.standard_normal((grid.size, 2, 2))
    b = EvalBundle(values=v, spatial_grads=g)
    obj = rayleigh(VectorLaplace(), b, grid)
    num1 = float(np.einsum("n,nc,nc->", grid.weights, g[:, 0], g[:, 0]))
    num2 = float(np.einsum("n,nc,nc->", grid.weights, g[:, 1], g[:, 1]))
    den = float(np.einsum("n,no,no->", grid.weights, v, v))
    assert abs(obj.rayleigh - (num1 + num2) / den) < 1e-12


def test_plane_stress_matrix_entries():
    c = plane_stress_matrix(2.0, 0.25)
    fac = 2.0 / (1 - 0.25**2)
    assert np.allclose(c, fac * np.array([[1, 0.25, 0], [0.25, 1, 0], [0, 0, 0.375]]))
    assert np.allclose(c, c.T)
    with pytest.raises(ValueError):
        plane_stress_matrix(1.0, 0.6)


def test_modulus_as_printed_values():
    f = ModulusField(e0=1.0, e1=5.0, q=50.0, a=0.5, mode="as-printed")
    # at the interface the printed formula sits at e0, not the midpoint
    assert abs(modulus(f, np.array([0.5]))[0] - 1.0) < 1e-14
    expected = 1.0 + 2.0 * math.tanh(5.0)
    assert abs(modulus(f, np.array([0.6]))[0] - expected) < 1e-12
    # far left the printed variant undershoots e0 and goes negative here
    assert modulus(f, np.array([0.0]))[0] < 0.0


def test_modulus_midpoint_spans_the_levels():
    f = ModulusField(e0=1.0, e1=5.0, q=50.0, a=0.5)
    x = np.linspace(0, 1, 201)
    e = modulus(f, x)
    assert np.all(e > 1.0 - 1e-9) and np.all(e < 5.0 + 1e-9)
    assert abs(e[0] - 1.0) < 1e-9 and abs(e[-1] - 5.0) < 1e-9
    assert np.all(np.diff(e) >= 0)  # tanh saturates exactly at the tails
    assert e[100] > e[50] and e[150] > e[100]
    assert abs(modulus(f, np.array([0.5]))[0] - 3.0) < 1e-14


def test_plane_stress_decouples_from_shear_free_fields():
    # u = (f(x1), 0) with f' only: energy reduces to C11 integral of f'^2
    grid = unit_square_grid(30)
    v = np.zeros((grid.size, 2))
    v[:, 0] = np.sin(np.pi * grid.points[:, 0])
    g = np.zeros((grid.size, 2, 2))
    g[:, 0, 0] = np.pi * np.cos(np.pi * grid.points[:, 0])
    b = EvalBundle(values=v, spatial_grads=g)
    kind = PlaneStress(field=ModulusField(e0=1.0, e1=1.0), nu=0.25)
    obj = rayleigh(kind, b, grid)
    expect = (np.pi**2) / (1 - 0.25**2) * (
        float(grid.weights @ np.cos(np.pi * grid.points[:, 0]) ** 2)
        / float(grid.weights @ np.sin(np.pi * grid.points[:, 0]) ** 2)
    )
    assert abs(obj.rayleigh - expect) < 1e-10


def test_collapse_raises():
    grid = interval_grid(50)
    b = EvalBundle(values=np.zeros((50, 1)), spatial_grads=np.ones((50, 1, 1)))
    with pytest.raises(CollapseError):
        rayleigh(ScalarLaplace(), b, grid)


def test_output_dim_validation():
    grid = interval_grid(10)
    b = EvalBundle(values=np.ones((10, 2)), spatial_grads=np.ones((10, 2, 1)))
    with pytest.raises(ValueError):
        rayleigh(ScalarLaplace(), b, grid)
    with pytest.raises(ValueError):
        rayleigh(DDimLaplace(3), EvalBundle(np.ones((10, 1)), np.ones((10, 1, 1))), grid)


@settings(max_examples=25, deadline=None)
@given(c=st.floats(min_value=1e-3, max_value=1e3), seed=st.integers(0, 50))
def test_scale_invariance(c, seed):
    grid = interval_grid(40)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((40, 1)) + 0.5
    g = rng.standard_normal((40, 1, 1))
    a = rayleigh(ScalarLaplace(), EvalBundle(v, g), grid).rayleigh
    b = rayleigh(ScalarLaplace(), EvalBundle(c * v, c * g), grid).rayleigh
    assert abs(a - b) <= 1e-12 * max(1.0, abs(a))


def test_penalty_values():
    grid = interval_grid(250)
    b = sine_bundle(grid)  # weighted norm^2 = 1/2
    pen = norm_penalty(b, grid, beta=2.0)
    assert abs(pen - 2.0 * 0.25) < 1e-9
    assert norm_penalty(b, grid, beta=0.0) == 0.0
    scaled = EvalBundle(np.sqrt(2.0) * b.values, np.sqrt(2.0) * b.spatial_grads)
    assert norm_penalty(scaled, grid, beta=5.0) < 1e-15


def test_quotient_lower_bound_on_interval():
    # any trial function respects the smallest mode up to quadrature slack
    grid = interval_grid(250)
    ans = NeuralAnsatz(spec=MlpSpec(1, (20,)), levelset=builtin_levelset("interval"))
    for seed in range(50):
        b = ans.eval(ans.init_params(seed), grid.points)
        q = rayleigh(ScalarLaplace(), b, grid).rayleigh
        assert q >= np.pi**2 * (1 - 0.01)


def _fd_theta_grad(fn, theta, h=1e-6):
    g = np.zeros_like(theta)
    for i in range(theta.size):
        tp, tm = theta.copy(), theta.copy()
        tp[i] += h
        tm[i] -= h
        g[i] = (fn(tp) - fn(tm)) / (2 * h)
    return g


@pytest.mark.parametrize(
    "kind,out_dim,beta",
    [
        (ScalarLaplace(), 1, 0.0),
        (ScalarLaplace(), 1, 1.0),
        (VectorLaplace(), 2, 0.0),
        (PlaneStress(field=ModulusField(e0=1.0, e1=5.0), nu=0.25), 2, 0.0),
        (PLaplace(p=5.0), 1, 0.0),
        (PLaplace(p=2.0), 1, 0.0),
        (DDimLaplace(2), 1, 0.0),
    ],
)
def test_objective_gradient_matches_fd(kind, out_dim, beta):
    grid = unit_square_grid(9)
    ans = NeuralAnsatz(spec=MlpSpec(2, (6, 5), output_dim=out_dim), levelset=builtin_levelset("square"))
    theta = ans.init_params(17)
    bundle = ans.eval(theta, grid.points)
    obj, grad = objective_gradient(kind, bundle, grid, beta=beta)
    assert isinstance(obj, ObjectiveValue)

    def scalar(th):
        return evaluate_objective(kind, ans.eval(th, grid.points), grid, beta=beta).total

    fd = _fd_theta_grad(scalar, theta)
    rel = np.linalg.norm(grad - fd) / max(1.0, np.linalg.norm(fd))
    assert rel < 1e-5


def test_expected_rayleigh_weighted_average():
    grid = interval_grid(100)
    b1 = sine_bundle(grid, 1)
    b2 = sine_bundle(grid, 2)
    rho = [0.3, 0.7]
    got = expected_rayleigh(ScalarLaplace(), [b1, b2], [grid, grid], rho)
    want = 0.3 * np.pi**2 + 0.7 * 4 * np.pi**2
    assert abs(got - want) < 1e-8
    with pytest.raises(ValueError):
        expected_rayleigh(ScalarLaplace(), [b1, b2], [grid, grid], [0.3, 0.3])
    with pytest.raises(ValueError):
        expected_rayleigh([ScalarLaplace()], [b1, b2], [grid, grid], rho)


def test_expected_gradient_matches_fd():
    grid = interval_grid(30)
    ans = NeuralAnsatz(spec=MlpSpec(2, (5,)), levelset=builtin_levelset("interval"))
    # two slices share the spatial grid but append different parameter values
    theta = ans.init_params(4)
    pts = [np.column_stack([grid.points, np.full(grid.size, a)]) for a in (0.25, 0.75)]
    rho = [0.4, 0.6]

    def bundles(th):
        return [ans.eval(th, p) for p in pts]

    total, slices, grad = expected_objective_gradient(ScalarLaplace(), bundles(theta), [grid, grid], rho)
    assert abs(total - (0.4 * slices[0].rayleigh + 0.6 * slices[1].rayleigh)) < 1e-12

    def scalar(th):
        return expected_rayleigh(ScalarLaplace(), bundles(th), [grid, grid], rho)

    fd = _fd_theta_grad(scalar, theta)
    assert np.linalg.norm(grad - fd) / max(1.0, np.linalg.norm(fd)) < 1e-5
