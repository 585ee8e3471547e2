from __future__ import annotations

import numpy as np
import pytest

from infogame.errors import ConfigError, InvalidControlError
from infogame.model import (
    ControlSet,
    evaluate_dynamics,
    extend_with_running_cost,
    model_from_config,
    preset,
    preset_config,
    resolved_config,
    restrict_to_types,
    running_matrix,
    terminal_matrix,
)


def test_control_set_canonicalizes_and_validates():
    cs = ControlSet(values=[-1.0, 0.0, 1.0])
    assert cs.values.shape == (3, 1)
    assert cs.index_of(0.0) == 1
    assert cs.index_of([1.0]) == 2
    with pytest.raises(InvalidControlError):
        cs.index_of(0.25)
    with pytest.raises(ConfigError):
        ControlSet(values=[1.0, 1.0])
    with pytest.raises(ConfigError):
        ControlSet(values=[np.nan])


def test_resolved_config_fills_defaults_and_rejects_unknowns():
    cfg = {"preset": "drift-sum-1d", "I": 1, "J": 1, "T": 1.0, "g": [["linear"]]}
    out = resolved_config(cfg)
    assert out["l"] == [["zero"]]
    assert out["params"] == {}
    # resolved output is itself a valid config
    assert resolved_config(out) == out
    with pytest.raises(ConfigError):
        resolved_config({**cfg, "extra": 1})
    with pytest.raises(ConfigError):
        resolved_config({**cfg, "params": {"bogus": 2}})
    with pytest.raises(ConfigError):
        resolved_config({**cfg, "preset": "nope"})
    with pytest.raises(ConfigError):
        resolved_config({**cfg, "g": [["linear", "zero"]]})
    with pytest.raises(ConfigError):
        resolved_config({**cfg, "T": -2.0})
    bad_cost = {**cfg, "g": [[{"name": "linear", "params": {"zz": 1}}]]}
    with pytest.raises(ConfigError):
        model_from_config(bad_cost)


def test_preset_catalog_builds():
    for name in (
        "drift-sum-1d",
        "coupled-1d",
        "static-bilinear",
        "running-matrix",
        "running-matrix-informed",
        "one-sided-drift-1d",
        "two-sided-1d",
    ):
        m = preset(name)
        assert m.horizon > 0
        assert m.u_set.count >= 1 and m.v_set.count >= 1
    with pytest.raises(ConfigError):
        preset_config("missing-preset")
    with pytest.raises(ConfigError):
        preset("drift-sum-1d", bogus=1)


def test_drift_sum_dynamics_vectorized():
    m = preset("drift-sum-1d")
    x = np.linspace(-1, 1, 7)[:, None]
    b, sig = evaluate_dynamics(m, 0.0, x, [1.0], [-1.0])
    np.testing.assert_array_equal(b, np.zeros_like(x))
    np.testing.assert_array_equal(sig, np.ones(x.shape + (1,)))
    with pytest.raises(InvalidControlError):
        evaluate_dynamics(m, 0.0, x, [0.7], [1.0])


def test_cost_matrices():
    m = preset("two-sided-1d")
    x = np.array([[0.5], [-0.25]])
    g = terminal_matrix(m, x)
    assert g.shape == (2, 2, 2)
    np.testing.assert_array_equal(g[:, 0, 0], x[:, 0])
    np.testing.assert_array_equal(g[:, 0, 1], 0.0)
    l = running_matrix(m, 0.0, x, np.array([1.0]), np.array([-1.0]))
    # separated preset: au * u + av * v
    assert l[0, 0, 0] == pytest.approx(0.6 - 0.5)
    assert l[0, 1, 0] == pytest.approx(-0.6 - 0.5)


def test_coupled_running_cost_flags_model():
    m = preset("running-matrix")
    assert m.has_running and not m.decoupled
    m2 = preset("two-sided-1d")
    assert m2.has_running and m2.decoupled


def test_restrict_to_types():
    m = preset("two-sided-1d")
    r = restrict_to_types(m, 0, 1)
    assert (r.u_types, r.v_types) == (1, 1)
    x = np.array([0.7])
    assert r.terminal[0][0](x) == m.terminal[0][1](x)
    with pytest.raises(ConfigError):
        restrict_to_types(m, 2, 0)


def test_horizon_and_bounds():
    m = preset("one-sided-drift-1d")
    assert m.drift_bound == 1.0
    assert m.diffusion_bound == 0.5
    assert m.lipschitz_bound >= 1.0
    assert m.horizon == 0.5


def test_extended_model_reduces_running_cost():
    """Accumulator drift carries the running cost into the terminal slot."""
    m = preset("one-sided-drift-1d", T=0.3)
    ext = extend_with_running_cost(m)
    game = ext.game
    assert game.state_dim == 1 + 2 * 1
    assert not game.has_running
    # one euler path computed both ways gives identical payoffs
    rng = np.random.default_rng(5)
    h, steps = 0.1, 3
    x = np.array([0.2])
    xz = np.zeros(game.state_dim)
    xz[0] = 0.2
    u = np.array([1.0])
    v = np.array([0.0])
    run = {(i, j): 0.0 for i in range(2) for j in range(1)}
    for k in range(steps):
        t = k * h
        dw = rng.standard_normal(1) * np.sqrt(h)
        for i in range(2):
            for j in range(1):
                run[(i, j)] += float(m.running[i][j](t, x, u, v)) * h
        b, sig = evaluate_dynamics(m, t, x, u, v)
        bz, sigz = evaluate_dynamics(game, t, xz, u, v)
        x = x + b * h + sig @ dw
        xz = xz + bz * h + sigz @ dw
    np.testing.assert_allclose(xz[0], x[0], rtol=0, atol=1e-15)
    for i in range(2):
        base = run[(i, 0)] + float(m.terminal[i][0](x))
        via_ext = float(game.terminal[i][0](xz))
        assert via_ext == pytest.approx(base, abs=1e-14)


def test_extended_model_z_index():
    m = preset("two-sided-1d")
    ext = extend_with_running_cost(m)
    assert ext.z_index(0, 0) == 1
    assert ext.z_index(1, 1) == 4
    assert ext.game.state_dim == 5
