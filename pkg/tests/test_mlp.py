"""Network forward/tangent/pullback checked against central finite differences."""

import numpy as np
import pytest

from rayspec.mlp import (
    EvalBundle,
    MlpSpec,
    forward,
    forward_with_spatial_grad,
    init_final_layer_normal,
    init_xavier,
    param_pullback,
)


def central_diff(f, x, h=1e-6):
    """Dense central-difference Jacobian of a scalar function of a vector."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2 * h)
    return g


def test_param_count_matches_dense_layer_formula():
    # sum over layers of weights+biases, bias-free readout
    assert MlpSpec(1, (20,)).param_count() == 1 * 20 + 20 + 20 * 1
    assert MlpSpec(2, (7, 7)).param_count() == 2 * 7 + 7 + 7 * 7 + 7 + 7 * 1
    assert MlpSpec(2, (7, 7)).param_count() == 84
    for d in range(1, 11):
        assert MlpSpec(d, (6, 6)).param_count() == 60 + 6 * (d - 1)


def test_spec_validation():
    with pytest.raises(ValueError):
        MlpSpec(0, (5,))
    with pytest.raises(ValueError):
        MlpSpec(2, ())
    with pytest.raises(ValueError):
        MlpSpec(2, (5,), activation="relu")


def test_xavier_bounds_and_zero_biases():
    spec = MlpSpec(3, (8, 5), output_dim=2)
    theta = init_xavier(spec, seed=11)
    assert theta.shape == (spec.param_count(),)
    from rayspec.mlp import split_params

    ws, bs, w_read = split_params(spec, theta)
    for w in ws + [w_read]:
        limit = np.sqrt(6.0 / (w.shape[0] + w.shape[1]))
        assert np.all(np.abs(w) < limit)
        assert np.abs(w).max() > 0.5 * limit  # draws actually fill the range
    for b in bs:
        assert np.all(b == 0.0)


def test_xavier_deterministic():
    spec = MlpSpec(2, (10, 10))
    a = init_xavier(spec, seed=3)
    b = init_xavier(spec, seed=3)
    c = init_xavier(spec, seed=4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_final_layer_normal_sample_std():
    spec = MlpSpec(2, (100000,))
    coeffs = init_final_layer_normal(spec, sigma=1e-3, seed=0)
    assert coeffs.shape == (100000,)
    assert abs(coeffs.std() - 1e-3) < 0.05e-3
    with pytest.raises(ValueError):
        init_final_layer_normal(spec, sigma=0.0, seed=0)


def test_forward_zero_readout_is_zero_map():
    spec = MlpSpec(2, (6,), output_dim=2)
    theta = init_xavier(spec, seed=0)
    theta[-spec.hidden_widths[-1] * spec.output_dim :] = 0.0
    pts = np.random.default_rng(1).random((17, 2))
    assert np.all(forward(spec, theta, pts) == 0.0)


@pytest.mark.parametrize("activation", ["tanh", "sigmoid"])
@pytest.mark.parametrize("widths,out_dim", [((10,), 1), ((7, 7), 2), ((5, 4, 3), 1)])
def test_spatial_grad_matches_finite_differences(activation, widths, out_dim):
    spec = MlpSpec(3, widths, output_dim=out_dim, activation=activation)
    theta = init_xavier(spec, seed=42)
    pts = np.random.default_rng(7).random((9, 3))
    bundle = forward_with_spatial_grad(spec, theta, pts)
    assert bundle.values.shape == (9, out_dim)
    assert bundle.spatial_grads.shape == (9, out_dim, 3)
    assert np.allclose(bundle.values, forward(spec, theta, pts))
    h = 1e-6
    for c in range(3):
        shift = np.zeros(3)
        shift[c] = h
        fd = (forward(spec, theta, pts + shift) - forward(spec, theta, pts - shift)) / (2 * h)
        assert np.max(np.abs(fd - bundle.spatial_grads[:, :, c])) < 1e-7


def test_partial_tangent_block():
    # trailing coordinate (a problem parameter) carries no tangent channel
    spec = MlpSpec(3, (8,), activation="tanh")
    theta = init_xavier(spec, seed=5)
    pts = np.random.default_rng(3).random((6, 3))
    full = forward_with_spatial_grad(spec, theta, pts)
    part = forward_with_spatial_grad(spec, theta, pts, tangent_dim=2)
    assert part.spatial_grads.shape == (6, 1, 2)
    assert np.allclose(part.spatial_grads, full.spatial_grads[:, :, :2])
    assert np.array_equal(part.values, full.values)


@pytest.mark.parametrize("activation", ["tanh", "sigmoid"])
@pytest.mark.parametrize("widths,out_dim", [((10,), 1), ((7, 7), 2), ((5, 4, 3), 1)])
def test_param_pullback_matches_finite_differences(activation, widths, out_dim):
    """The pullback of random cotangents equals the FD gradient of the paired scalar."""
    spec = MlpSpec(2, widths, output_dim=out_dim, activation=activation)
    theta = init_xavier(spec, seed=9)
    pts = np.random.default_rng(2).random((11, 2))
    rng = np.random.default_rng(13)
    cot_v = rng.standard_normal((11, out_dim))
    cot_g = rng.standard_normal((11, out_dim, 2))

    bundle = forward_with_spatial_grad(spec, theta, pts)
    grad = param_pullback(bundle, cot_v, cot_g)
    assert grad.shape == theta.shape

    def scalar(th):
        b = forward_with_spatial_grad(spec, th, pts)
        return float(np.sum(cot_v * b.values) + np.sum(cot_g * b.spatial_grads))

    fd = central_diff(scalar, theta, h=1e-6)
    denom = max(1.0, np.linalg.norm(fd))
    assert np.linalg.norm(grad - fd) / denom < 1e-6


def test_pullback_shape_validation():
    spec = MlpSpec(2, (4,))
    theta = init_xavier(spec, seed=1)
    pts = np.zeros((3, 2)) + 0.5
    bundle = forward_with_spatial_grad(spec, theta, pts)
    with pytest.raises(ValueError):
        param_pullback(bundle, np.zeros((3, 2)), np.zeros((3, 1, 2)))
    with pytest.raises(ValueError):
        param_pullback(bundle, np.zeros((3, 1)), np.zeros((3, 1, 1)))
    plain = EvalBundle(values=bundle.values, spatial_grads=bundle.spatial_grads)
    with pytest.raises(ValueError):
        param_pullback(plain, np.zeros((3, 1)), np.zeros((3, 1, 2)))


def test_forward_deterministic_bitwise():
    spec = MlpSpec(2, (9, 9), activation="sigmoid")
    theta = init_xavier(spec, seed=21)
    pts = np.random.default_rng(8).random((50, 2))
    a = forward_with_spatial_grad(spec, theta, pts)
    b = forward_with_spatial_grad(spec, theta, pts)
    assert np.array_equal(a.values, b.values)
    assert np.array_equal(a.spatial_grads, b.spatial_grads)
