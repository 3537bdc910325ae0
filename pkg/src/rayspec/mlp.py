"""Fully connected network with hand-derived derivative propagation.

The network is a stack of dense layers with a smooth activation followed by a
bias-free linear readout.  Two derivative services are provided on top of the
plain forward pass:

* spatial tangents: directional derivatives of the outputs with respect to a
  chosen block of input coordinates are pushed forward alongside the values
  (one tangent channel per coordinate);
* parameter pullback: given cotangents for the values and for the spatial
  tangents, a reverse sweep over the recorded computation returns the gradient
  with respect to the flat parameter vector.  Because the tangent channels
  multiply the activation derivative, the reverse sweep needs the second
  derivative of the activation as well.

Everything is float64 numpy with a fixed reduction order, so a given
(spec, seed, points) triple reproduces bit-identical results.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Sequence, Tuple

import numpy as np

__all__ = [
    "MlpSpec",
    "EvalBundle",
    "init_xavier",
    "init_final_layer_normal",
    "forward",
    "forward_with_spatial_grad",
    "param_pullback",
]


def _tanh_d1(a):
    return 1.0 - a * a


def _tanh_d2(a):
    return -2.0 * a * (1.0 - a * a)


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _sigmoid_d1(a):
    return a * (1.0 - a)


def _sigmoid_d2(a):
    return a * (1.0 - a) * (1.0 - 2.0 * a)


# activation -> (value from preactivation, first/second derivative from value)
_ACTIVATIONS = {
    "tanh": (np.tanh, _tanh_d1, _tanh_d2),
    "sigmoid": (_sigmoid, _sigmoid_d1, _sigmoid_d2),
}


@dataclass(frozen=True)
class MlpSpec:
    """Shape and activation of the network.

    ``hidden_widths`` must be non-empty; the readout layer carries no bias.
    """

    input_dim: int
    hidden_widths: Tuple[int, ...]
    output_dim: int = 1
    activation: str = "tanh"

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        if self.input_dim < 1 or self.output_dim < 1:
            raise ValueError("input_dim and output_dim must be positive")
        if len(self.hidden_widths) == 0:
            raise ValueError("at least one hidden layer is required")
        if any(w < 1 for w in self.hidden_widths):
            raise ValueError("hidden widths must be positive")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    def layer_dims(self) -> Tuple[int, ...]:
        return (self.input_dim,) + self.hidden_widths + (self.output_dim,)

    def param_count(self) -> int:
        dims = self.layer_dims()
        count = 0
        for k in range(len(self.hidden_widths)):
            count += dims[k] * dims[k + 1] + dims[k + 1]
        count += self.hidden_widths[-1] * self.output_dim
        return count


def split_params(spec: MlpSpec, theta: np.ndarray):
    """Views of the flat parameter vector as per-layer (W, b) plus the readout matrix.

    Layout: [W1, b1, W2, b2, ..., W_out] with each W stored row-major as
    (fan_out, fan_in).
    """
    theta = np.asarray(theta)
    if theta.shape != (spec.param_count(),):
        raise ValueError(f"expected {spec.param_count()} parameters, got shape {theta.shape}")
    dims = spec.layer_dims()
    weights: List[np.ndarray] = []
    biases: List[np.ndarray] = []
    pos = 0
    for k in range(len(spec.hidden_widths)):
        n_in, n_out = dims[k], dims[k + 1]
        weights.append(theta[pos : pos + n_in * n_out].reshape(n_out, n_in))
        pos += n_in * n_out
        biases.append(theta[pos : pos + n_out])
        pos += n_out
    w_read = theta[pos:].reshape(spec.output_dim, spec.hidden_widths[-1])
    return weights, biases, w_read


def init_xavier(spec: MlpSpec, seed: int) -> np.ndarray:
    """Uniform Xavier weights, zero biases, for every layer including the readout."""
    rng = np.random.default_rng(seed)
    dims = spec.layer_dims()
    pieces = []
    for k in range(len(spec.hidden_widths)):
        n_in, n_out = dims[k], dims[k + 1]
        limit = np.sqrt(6.0 / (n_in + n_out))
        pieces.append(rng.uniform(-limit, limit, size=n_in * n_out))
        pieces.append(np.zeros(n_out))
    n_in, n_out = dims[-2], dims[-1]
    limit = np.sqrt(6.0 / (n_in + n_out))
    pieces.append(rng.uniform(-limit, limit, size=n_in * n_out))
    return np.concatenate(pieces)


def init_final_layer_normal(spec: MlpSpec, sigma: float, seed: int) -> np.ndarray:
    """Zero-mean normal draw for the readout coefficients only."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    rng = np.random.default_rng(seed)
    return sigma * rng.standard_normal(spec.hidden_widths[-1] * spec.output_dim)


@dataclass
class EvalBundle:
    """Values, spatial gradients and a pullback closure for one evaluation.

    ``values`` has shape (n, output_dim); ``spatial_grads`` has shape
    (n, output_dim, tangent_dim).  ``pullback(cot_values, cot_spatial)``
    returns d<cotangents, outputs>/dtheta as a flat vector; composed
    evaluations (boundary factor, deflation) wrap the closure so the caller
    never needs to know the chain.
    """

    values: np.ndarray
    spatial_grads: np.ndarray
    pullback: Callable[[np.ndarray, np.ndarray], np.ndarray] = field(repr=False, default=None)


def param_pullback(bundle: EvalBundle, cot_values: np.ndarray, cot_spatial: np.ndarray) -> np.ndarray:
    """Gradient of sum(cot_values*values) + sum(cot_spatial*spatial_grads) wrt theta."""
    cot_values = np.asarray(cot_values, dtype=float)
    cot_spatial = np.asarray(cot_spatial, dtype=float)
    if cot_values.shape != bundle.values.shape:
        raise ValueError("cot_values shape mismatch")
    if cot_spatial.shape != bundle.spatial_grads.shape:
        raise ValueError("cot_spatial shape mismatch")
    if bundle.pullback is None:
        raise ValueError("bundle does not carry pullback intermediates")
    return bundle.pullback(cot_values, cot_spatial)


def _bc_matmul(t: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Contract a (n, C, a) stack with a (b, a) matrix into (n, C, b)."""
    n, c, a = t.shape
    return (t.reshape(n * c, a) @ w.T).reshape(n, c, -1)


def forward(spec: MlpSpec, theta: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Plain forward pass; returns (n, output_dim)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != spec.input_dim:
        raise ValueError(f"points have dim {points.shape[1]}, spec wants {spec.input_dim}")
    weights, biases, w_read = split_params(spec, theta)
    act = _ACTIVATIONS[spec.activation][0]
    a = points
    for w, b in zip(weights, biases):
        a = act(a @ w.T + b)
    return a @ w_read.T


def forward_with_spatial_grad(
    spec: MlpSpec,
    theta: np.ndarray,
    points: np.ndarray,
    tangent_dim: int | None = None,
) -> EvalBundle:
    """Forward pass carrying directional derivatives for the leading coordinates.

    ``tangent_dim`` selects how many of the input coordinates are
    differentiated (all by default); trailing inputs such as an appended
    problem parameter are treated as carrying zero tangent.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != spec.input_dim:
        raise ValueError(f"points have dim {points.shape[1]}, spec wants {spec.input_dim}")
    n_c = spec.input_dim if tangent_dim is None else int(tangent_dim)
    if not 1 <= n_c <= spec.input_dim:
        raise ValueError("tangent_dim out of range")

    weights, biases, w_read = split_params(spec, theta)
    act, act_d1, _ = _ACTIVATIONS[spec.activation]
    depth = len(weights)

    acts = [points]
    d1s: List[np.ndarray] = []
    s_list: List[np.ndarray] = []
    t_list: List[np.ndarray] = []

    # first hidden layer: the seed tangents are unit coordinate directions, so
    # the pre-activation tangent is just a slice of W1 shared across the batch
    z = points @ weights[0].T + biases[0]
    a = act(z)
    d1 = act_d1(a)
    s_first = weights[0][:, :n_c].T.copy()  # (C, n1)
    t = d1[:, None, :] * s_first[None, :, :]
    acts.append(a)
    d1s.append(d1)
    s_list.append(s_first)
    t_list.append(t)

    for k in range(1, depth):
        z = acts[-1] @ weights[k].T + biases[k]
        a = act(z)
        d1 = act_d1(a)
        s = _bc_matmul(t, weights[k])
        t = d1[:, None, :] * s
        acts.append(a)
        d1s.append(d1)
        s_list.append(s)
        t_list.append(t)

    values = acts[-1] @ w_read.T
    grads = _bc_matmul(t, w_read).transpose(0, 2, 1)  # (n, out, C)

    def pullback(cot_values: np.ndarray, cot_spatial: np.ndarray) -> np.ndarray:
        return _reverse_sweep(
            spec, weights, w_read, acts, d1s, s_list, t_list, n_c, cot_values, cot_spatial
        )

    return EvalBundle(values=values, spatial_grads=grads, pullback=pullback)


def _reverse_sweep(
    spec: MlpSpec,
    weights: Sequence[np.ndarray],
    w_read: np.ndarray,
    acts: Sequence[np.ndarray],
    d1s: Sequence[np.ndarray],
    s_list: Sequence[np.ndarray],
    t_list: Sequence[np.ndarray],
    n_c: int,
    cot_values: np.ndarray,
    cot_spatial: np.ndarray,
) -> np.ndarray:
    """Reverse pass matching ``forward_with_spatial_grad`` exactly.

    Cotangent names mirror the forward variables: a_bar pairs with the
    post-activation values, t_bar with the tangent stacks, s_bar with the
    pre-activation tangents.
    """
    _, _, act_d2 = _ACTIVATIONS[spec.activation]
    depth = len(weights)
    n = acts[0].shape[0]

    gb = np.ascontiguousarray(cot_spatial.transpose(0, 2, 1))  # (n, C, out)

    t_last = t_list[-1]
    grad_w_read = cot_values.T @ acts[-1]
    grad_w_read += gb.reshape(n * n_c, -1).T @ t_last.reshape(n * n_c, -1)

    a_bar = cot_values @ w_read
    t_bar = _bc_matmul(gb, w_read.T)

    grad_weights: List[np.ndarray] = [None] * depth
    grad_biases: List[np.ndarray] = [None] * depth

    for k in range(depth - 1, -1, -1):
        a = acts[k + 1]
        d1 = d1s[k]
        d2 = act_d2(a)
        s = s_list[k]
        s_bar = t_bar * d1[:, None, :]
        if k == 0:
            z_bar = a_bar * d1 + d2 * np.einsum("ncm,cm->nm", t_bar, s)
            gw = z_bar.T @ acts[0]
            gw[:, :n_c] += s_bar.sum(axis=0).T
        else:
            z_bar = a_bar * d1 + d2 * (t_bar * s).sum(axis=1)
            t_prev = t_list[k - 1]
            gw = z_bar.T @ acts[k]
            gw += s_bar.reshape(n * n_c, -1).T @ t_prev.reshape(n * n_c, -1)
        grad_weights[k] = gw
        grad_biases[k] = z_bar.sum(axis=0)
        if k > 0:
            a_bar = z_bar @ weights[k]
            t_bar = _bc_matmul(s_bar, weights[k].T)

    pieces = []
    for k in range(depth):
        pieces.append(grad_weights[k].ravel())
        pieces.append(grad_biases[k])
    pieces.append(grad_w_read.ravel())
    return np.concatenate(pieces)
