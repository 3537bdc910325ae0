"""Grid constructors: weight sums, node placement, masking, MC batches."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rayspec.quadrature import (
    DomainSpec,
    QuadratureGrid,
    annulus_polar_grid,
    hypercube_mc_batch,
    integrate,
    interval_grid,
    masked_square_grid,
    unit_square_grid,
)


def test_interval_grid_nodes_and_weights():
    g = interval_grid(4)
    assert np.allclose(g.points.ravel(), [0.125, 0.375, 0.625, 0.875])
    assert np.allclose(g.weights, 0.25)
    assert abs(g.total_weight() - 1.0) < 1e-15
    with pytest.raises(ValueError):
        interval_grid(1)


def test_interval_grid_midpoint_exact_for_linear():
    g = interval_grid(250)
    # midpoint rule integrates affine functions exactly
    assert abs(integrate(g, 3.0 * g.points.ravel() + 1.0) - 2.5) < 1e-12


def test_unit_square_grid():
    g = unit_square_grid(50)
    assert g.size == 2500
    assert abs(g.total_weight() - 1.0) < 1e-12
    assert g.points.min() > 0 and g.points.max() < 1


def test_masked_grid_quarter_disc():
    g = masked_square_grid(200, mask=lambda p: 1.0 - p[:, 0] ** 2 - p[:, 1] ** 2)
    assert abs(g.total_weight() - np.pi / 4) < 2e-3


def test_masked_grid_empty_raises():
    with pytest.raises(ValueError):
        masked_square_grid(10, mask=lambda p: -np.ones(p.shape[0]))


def test_semicircle_bbox_mask():
    mask = lambda p: np.where(p[:, 1] > 0, 1.0 - p[:, 0] ** 2 - p[:, 1] ** 2, -1.0)
    g = masked_square_grid(100, mask=mask, bbox=((-1.0, 1.0), (0.0, 1.0)))
    assert abs(g.total_weight() - np.pi / 2) < 5e-3


def test_annulus_polar_grid_counts_and_area():
    g = annulus_polar_grid(0.25, n_r=39, n_theta=159)
    assert g.size == 6201
    # the polar weights resolve the area exactly, not just in the limit
    assert abs(g.total_weight() - np.pi * (1 - 0.25**2)) < 1e-12
    r = np.hypot(g.points[:, 0], g.points[:, 1])
    assert r.min() > 0.25 and r.max() < 1.0
    with pytest.raises(ValueError):
        annulus_polar_grid(1.5)


def test_mc_batch_weights_and_determinism():
    g = hypercube_mc_batch(5, 1000, np.random.default_rng(7))
    assert g.kind == "monte-carlo"
    assert g.points.shape == (1000, 5)
    assert np.allclose(g.weights, 1e-3)
    h = hypercube_mc_batch(5, 1000, np.random.default_rng(7))
    assert np.array_equal(g.points, h.points)


def test_grid_validation():
    with pytest.raises(ValueError):
        QuadratureGrid(points=np.zeros((3, 2)), weights=np.array([1.0, -1.0, 1.0]))
    with pytest.raises(ValueError):
        QuadratureGrid(points=np.zeros((0, 2)), weights=np.zeros(0))
    with pytest.raises(ValueError):
        QuadratureGrid(points=np.zeros((2, 2)), weights=np.ones(3))


def test_domain_spec_validation():
    DomainSpec("annulus", inner_radius=0.5)
    with pytest.raises(ValueError):
        DomainSpec("annulus", inner_radius=1.2)
    with pytest.raises(ValueError):
        DomainSpec("blob")
    with pytest.raises(ValueError):
        DomainSpec("hypercube")


@settings(max_examples=30, deadline=None)
@given(n=st.integers(min_value=2, max_value=400))
def test_interval_weight_sum_is_length(n):
    assert abs(interval_grid(n).total_weight() - 1.0) < 1e-12


@settings(max_examples=20, deadline=None)
@given(ri=st.floats(min_value=0.05, max_value=0.9), nr=st.integers(3, 40), nt=st.integers(8, 80))
def test_annulus_weight_sum_exact(ri, nr, nt):
    g = annulus_polar_grid(ri, n_r=nr, n_theta=nt)
    assert abs(g.total_weight() - np.pi * (1 - ri**2)) < 1e-10
