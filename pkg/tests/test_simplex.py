from __future__ import annotations

import itertools
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from infogame.errors import ConfigError
from infogame.simplex import build_grid, discrete_convexity_violation


def brute_lattice(dim, resolution):
    """Independent enumeration of integer compositions of the resolution."""
    out = []
    for combo in itertools.product(range(resolution + 1), repeat=dim):
        if sum(combo) == resolution:
            out.append(combo)
    return sorted(out)


@pytest.mark.parametrize("dim,resolution", [(1, 1), (2, 1), (2, 7), (3, 4), (4, 3)])
def test_lattice_matches_brute_force(dim, resolution):
    grid = build_grid(dim, resolution)
    expected = brute_lattice(dim, resolution)
    assert [tuple(row) for row in grid.numerators] == expected
    assert grid.npoints == comb(resolution + dim - 1, dim - 1)
    np.testing.assert_array_equal(grid.points * resolution, grid.numerators)
    assert np.all(grid.points.sum(axis=1) == 1.0)


def test_index_roundtrip():
    grid = build_grid(3, 5)
    for i, row in enumerate(grid.numerators):
        assert grid.index_of(tuple(row)) == i
    assert grid.points[grid.vertex_index(1)].tolist() == [0.0, 1.0, 0.0]


def test_rejects_bad_parameters():
    with pytest.raises(ConfigError):
        build_grid(0, 3)
    with pytest.raises(ConfigError):
        build_grid(2, 0)


def test_triples_are_collinear_midpoints():
    grid = build_grid(3, 4)
    assert grid.triples.shape[0] > 0
    lo = grid.points[grid.triples[:, 0]]
    mid = grid.points[grid.triples[:, 1]]
    hi = grid.points[grid.triples[:, 2]]
    np.testing.assert_array_equal(lo + hi, 2.0 * mid)
    # steps are along e_a - e_b
    step = (hi - mid) * grid.resolution
    assert np.all(np.sum(np.abs(step), axis=1) == 2.0)


def test_single_point_grids_have_no_triples():
    assert build_grid(1, 5).triples.shape[0] == 0
    assert discrete_convexity_violation(build_grid(1, 5), np.array([2.0])) == 0.0


def test_convexity_violation_signs():
    grid = build_grid(2, 2)  # points (0,1), (1/2,1/2), (1,0)
    convex = np.array([1.0, 0.2, 1.0])
    concave = np.array([1.0, 1.8, 1.0])
    assert discrete_convexity_violation(grid, convex) == pytest.approx(-0.8)
    assert discrete_convexity_violation(grid, concave) == pytest.approx(0.8)


def test_violation_requires_matching_shape():
    grid = build_grid(2, 2)
    with pytest.raises(ConfigError):
        discrete_convexity_violation(grid, np.zeros(4))


@given(
    st.integers(min_value=2, max_value=3),
    st.integers(min_value=2, max_value=5),
    st.lists(st.floats(-5, 5), min_size=1, max_size=40),
    st.integers(min_value=0, max_value=10_000),
)
@settings(max_examples=60, deadline=None)
def test_affine_tables_have_no_violation(dim, resolution, slopes, seed):
    """Restrictions of affine functions are flat along every triple."""
    grid = build_grid(dim, resolution)
    rng = np.random.default_rng(seed)
    slope = np.array((slopes * dim)[: dim])
    values = grid.points @ slope + 0.75
    assert discrete_convexity_violation(grid, values) <= 1e-12
    # a strict midpoint bump is detected
    if grid.triples.shape[0]:
        bumped = values.copy()
        mid = int(grid.triples[rng.integers(0, grid.triples.shape[0]), 1])
        bumped[mid] += 0.5
        assert discrete_convexity_violation(grid, bumped) >= 0.5 - 1e-12
