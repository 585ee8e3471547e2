"""Envelope and conjugate transforms against independent references.

The lower-envelope reference used for cross-checking is a direct linear
program over affine minorants: vex(w)(p) is the largest value at p among
affine functions dominated by w on the lattice.  That route shares no
code with the hull construction under test.
"""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from infogame.simplex import build_grid, discrete_convexity_violation
from infogame.transform import (
    biconjugate_p,
    cav_q,
    concave_conjugate_q,
    conjugate_p,
    coordinate_difference_probes,
    dual_field,
    facet_slope_probes,
    subdifferential_margin,
    vex_p,
)


def lp_envelope(grid, values):
    """Best affine minorant value at each lattice point, solved as an LP."""
    out = np.empty(grid.npoints)
    A = np.column_stack([np.ones(grid.npoints), grid.points])
    for k in range(grid.npoints):
        c = -np.concatenate([[1.0], grid.points[k]])
        res = linprog(c, A_ub=A, b_ub=values, bounds=[(None, None)] * (grid.dim + 1),
                      method="highs")
        assert res.status == 0
        out[k] = -res.fun
    return out


def test_hand_hull_interval():
    # table over p_1 = 0, 1/4, 1/2, 3/4, 1; the midpoint lies above the
    # chord between its neighbours and must drop to 0.15
    grid = build_grid(2, 4)
    values = np.array([1.0, 0.2, 0.6, 0.1, 1.0])
    env = vex_p(grid, values)
    np.testing.assert_allclose(env, [1.0, 0.2, 0.15, 0.1, 1.0], rtol=0, atol=1e-15)
    # hull nodes keep their exact input floats
    assert env[0] == values[0] and env[1] == values[1]
    assert env[3] == values[3] and env[4] == values[4]


def test_conjugate_is_exhaustive_scan():
    grid = build_grid(2, 6)
    rng = np.random.default_rng(3)
    values = rng.standard_normal(grid.npoints)
    slope = np.array([0.7, -0.2])
    cj = conjugate_p(grid, values, slope)
    scores = [float(slope @ p) - w for p, w in zip(grid.points, values)]
    assert cj.value == max(scores)
    assert int(np.argmax(scores)) in cj.support
    cc = concave_conjugate_q(grid, values, slope)
    assert cc.value == min(scores)


def test_vertex_values_always_survive():
    # envelopes fix simplex vertices: no convex combination reaches them
    for dim in (2, 3):
        grid = build_grid(dim, 3)
        rng = np.random.default_rng(dim)
        values = rng.standard_normal(grid.npoints)
        env = vex_p(grid, values)
        for c in range(dim):
            k = grid.vertex_index(c)
            assert env[k] == values[k]


def test_envelope_against_lp_dim2():
    grid = build_grid(2, 8)
    rng = np.random.default_rng(7)
    for _ in range(5):
        values = rng.standard_normal(grid.npoints)
        np.testing.assert_allclose(vex_p(grid, values), lp_envelope(grid, values),
                                   rtol=0, atol=1e-9)


def test_envelope_against_lp_dim3():
    grid = build_grid(3, 5)
    rng = np.random.default_rng(11)
    for _ in range(4):
        values = rng.standard_normal(grid.npoints)
        np.testing.assert_allclose(vex_p(grid, values), lp_envelope(grid, values),
                                   rtol=0, atol=1e-9)


def test_envelope_against_lp_dim4():
    grid = build_grid(4, 3)
    rng = np.random.default_rng(13)
    values = rng.standard_normal(grid.npoints)
    np.testing.assert_allclose(vex_p(grid, values), lp_envelope(grid, values),
                               rtol=0, atol=1e-9)


def test_affine_tables_are_fixed_points():
    grid = build_grid(3, 6)
    values = grid.points @ np.array([0.3, -1.1, 0.4]) + 2.0
    np.testing.assert_array_equal(vex_p(grid, values), values)
    np.testing.assert_array_equal(cav_q(grid, values), values)


def test_envelope_idempotent_and_dominated():
    grid = build_grid(3, 4)
    rng = np.random.default_rng(5)
    values = rng.standard_normal(grid.npoints)
    env = vex_p(grid, values)
    assert np.all(env <= values + 1e-12)
    np.testing.assert_allclose(vex_p(grid, env), env, rtol=0, atol=1e-10)
    assert discrete_convexity_violation(grid, env) <= 1e-10


def test_cav_is_reflected_vex():
    grid = build_grid(2, 5)
    rng = np.random.default_rng(9)
    values = rng.standard_normal(grid.npoints)
    np.testing.assert_array_equal(cav_q(grid, values), -vex_p(grid, -values))
    assert np.all(cav_q(grid, values) >= values - 1e-12)


def test_biconjugate_recovers_envelope():
    for dim, resolution in ((2, 7), (3, 4)):
        grid = build_grid(dim, resolution)
        rng = np.random.default_rng(17 + dim)
        values = rng.standard_normal(grid.npoints)
        np.testing.assert_allclose(
            biconjugate_p(grid, values), vex_p(grid, values), rtol=0, atol=1e-9
        )


def test_probe_helpers():
    grid = build_grid(2, 4)
    values = np.array([1.0, 0.2, 0.6, 0.1, 1.0])
    probes = facet_slope_probes(grid, values)
    # hull p_1-slopes: (0.2-1)/0.25 = -3.2, (0.1-0.2)/0.5 = -0.2, (1-0.1)/0.25 = 3.6
    assert sorted(p[0] for p in probes) == pytest.approx([-3.2, -0.2, 3.6])
    cd = coordinate_difference_probes(3)
    assert cd.shape == (7, 3)
    assert {tuple(row) for row in cd} >= {(1.0, -1.0, 0.0), (0.0, -1.0, 1.0)}


def test_subdifferential_certificates():
    grid = build_grid(2, 6)
    rng = np.random.default_rng(21)
    values = vex_p(grid, rng.standard_normal(grid.npoints))
    probes = facet_slope_probes(grid, values)
    field = dual_field(grid, values, probes)
    for r in range(probes.shape[0]):
        for k in field.supports[r]:
            assert subdifferential_margin(field, r, k) <= 1e-10


@given(st.integers(0, 2**32 - 1), st.integers(2, 4), st.integers(2, 6))
@settings(max_examples=80, deadline=None)
def test_envelope_properties_random(seed, dim, resolution):
    grid = build_grid(dim, resolution)
    rng = np.random.default_rng(seed)
    values = rng.uniform(-3, 3, grid.npoints)
    env = vex_p(grid, values)
    assert np.all(env <= values + 1e-12)
    assert discrete_convexity_violation(grid, env) <= 1e-10
    again = vex_p(grid, env)
    np.testing.assert_allclose(again, env, rtol=0, atol=1e-10)
