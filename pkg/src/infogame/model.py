"""Game models: dynamics, finite control sets, type-indexed costs.

A model describes a two-player zero-sum diffusion game in which the first
player (controls u, minimizing) privately knows a type i and the second
player (controls v, maximizing) privately knows a type j.  Dynamics
b(t,x,u,v) and sigma(t,x,u,v) are shared; terminal costs g_ij(x) and
running costs l_ij(t,x,u,v) are tabulated per type pair.

All model callables are vectorized over the state: x has shape (..., n),
drift returns (..., n), diffusion (..., n, d), costs (...,).  Controls are
always passed as 1-D arrays, one row of the owning control set.

Configs are plain JSON objects with keys: preset, params, I, J, T, g, l.
"preset" names a dynamics preset; "g" and "l" are I x J matrices of cost
preset references (a bare name or {"name": ..., "params": {...}}).
Unknown keys anywhere are an error.  Declared bounds hold on the box
|x_k| <= 4 that shipped grids stay inside.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, InvalidControlError

_BOUND_RADIUS = 4.0
_MEMBERSHIP_TOL = 1e-12


@dataclass(frozen=True)
class ControlSet:
    """Finite list of admissible control points, one row per point."""

    values: np.ndarray  # (count, dim)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[0] < 1:
            raise ConfigError("control set must be a nonempty (count, dim) array")
        if not np.all(np.isfinite(values)):
            raise ConfigError("control points must be finite")
        if len({tuple(row) for row in values}) != values.shape[0]:
            raise ConfigError("control points must be distinct")
        object.__setattr__(self, "values", values)

    @property
    def count(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def index_of(self, point) -> int:
        point = np.atleast_1d(np.asarray(point, dtype=float))
        if point.shape != (self.dim,):
            raise InvalidControlError(
                f"control shape {point.shape} does not match set dim {self.dim}"
            )
        dist = np.max(np.abs(self.values - point[None, :]), axis=1)
        hit = int(np.argmin(dist))
        if dist[hit] > _MEMBERSHIP_TOL:
            raise InvalidControlError(f"control {point!r} is not in the declared set")
        return hit


@dataclass(frozen=True)
class GameModel:
    name: str
    state_dim: int
    noise_dim: int
    drift: Callable
    diffusion: Callable
    u_set: ControlSet
    v_set: ControlSet
    u_types: int
    v_types: int
    terminal: tuple  # (u_types, v_types) nested tuple of callables g_ij(x)
    running: tuple  # same shape, callables l_ij(t, x, u, v)
    horizon: float
    has_running: bool
    decoupled: bool
    lipschitz_bound: float
    sup_bound: float
    drift_bound: float
    diffusion_bound: float
    terminal_bound: float
    running_bound: float
    diag_diffusion: bool = True
    config: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.u_types < 1 or self.v_types < 1:
            raise ConfigError("type counts must be >= 1")
        if self.horizon <= 0:
            raise ConfigError("horizon must be positive")
        if len(self.terminal) != self.u_types or any(
            len(row) != self.v_types for row in self.terminal
        ):
            raise ConfigError("terminal cost matrix shape must be (I, J)")
        if len(self.running) != self.u_types or any(
            len(row) != self.v_types for row in self.running
        ):
            raise ConfigError("running cost matrix shape must be (I, J)")


def evaluate_dynamics(model: GameModel, t: float, x, u, v):
    """Validated drift/diffusion evaluation at one control pair."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.state_dim:
        raise ConfigError(
            f"state shape {x.shape} does not end in state_dim {model.state_dim}"
        )
    u = model.u_set.values[model.u_set.index_of(u)]
    v = model.v_set.values[model.v_set.index_of(v)]
    b = np.asarray(model.drift(t, x, u, v), dtype=float)
    sig = np.asarray(model.diffusion(t, x, u, v), dtype=float)
    if b.shape != x.shape:
        raise ConfigError(f"drift shape {b.shape} does not match state {x.shape}")
    if sig.shape != x.shape + (model.noise_dim,):
        raise ConfigError(f"diffusion shape {sig.shape} invalid")
    if not (np.all(np.isfinite(b)) and np.all(np.isfinite(sig))):
        raise ConfigError("dynamics produced non-finite values")
    return b, sig


def terminal_matrix(model: GameModel, x) -> np.ndarray:
    """Stack of terminal costs, shape (..., I, J)."""
    x = np.asarray(x, dtype=float)
    rows = []
    for i in range(model.u_types):
        rows.append([np.asarray(model.terminal[i][j](x), dtype=float)
                     for j in range(model.v_types)])
    return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)


def running_matrix(model: GameModel, t: float, x, u, v) -> np.ndarray:
    """Stack of running costs at one control pair, shape (..., I, J)."""
    x = np.asarray(x, dtype=float)
    rows = []
    for i in range(model.u_types):
        rows.append([np.asarray(model.running[i][j](t, x, u, v), dtype=float)
                     for j in range(model.v_types)])
    return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)


def restrict_to_types(model: GameModel, i: int, j: int) -> GameModel:
    """Complete-information restriction: single type pair (i, j)."""
    if not (0 <= i < model.u_types and 0 <= j < model.v_types):
        raise ConfigError(f"type pair ({i}, {j}) out of range")
    return GameModel(
        name=f"{model.name}[{i},{j}]",
        state_dim=model.state_dim,
        noise_dim=model.noise_dim,
        drift=model.drift,
        diffusion=model.diffusion,
        u_set=model.u_set,
        v_set=model.v_set,
        u_types=1,
        v_types=1,
        terminal=((model.terminal[i][j],),),
        running=((model.running[i][j],),),
        horizon=model.horizon,
        has_running=model.has_running,
        decoupled=model.decoupled,
        lipschitz_bound=model.lipschitz_bound,
        sup_bound=model.sup_bound,
        drift_bound=model.drift_bound,
        diffusion_bound=model.diffusion_bound,
        terminal_bound=model.terminal_bound,
        running_bound=model.running_bound,
        diag_diffusion=model.diag_diffusion,
        config=model.config,
    )


# ---------------------------------------------------------------------------
# dynamics presets


@dataclass(frozen=True)
class _Dynamics:
    state_dim: int
    noise_dim: int
    drift: Callable
    diffusion: Callable
    u_set: ControlSet
    v_set: ControlSet
    drift_bound: float
    diffusion_bound: float
    lipschitz: float
    decoupled: bool


def _const_diffusion(level: float):
    def diffusion(t, x, u, v):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape + (1,), level)

    return diffusion


def _zero_drift(t, x, u, v):
    return np.zeros_like(np.asarray(x, dtype=float))


def _dyn_drift_sum(params: dict) -> _Dynamics:
    sigma = float(params.get("sigma", 1.0))
    controls = list(params.get("controls", [-1.0, 0.0, 1.0]))
    cs = ControlSet(np.asarray(controls, dtype=float))

    def drift(t, x, u, v):
        x = np.asarray(x, dtype=float)
        return np.full_like(x, float(u[0] + v[0]))

    cmax = float(np.max(np.abs(cs.values)))
    return _Dynamics(1, 1, drift, _const_diffusion(sigma), cs, cs,
                     2.0 * cmax, abs(sigma), 0.0, True)


def _dyn_coupled(params: dict) -> _Dynamics:
    coupling = float(params.get("coupling", 4.0))
    sigma = float(params.get("sigma", 1.0))
    controls = list(params.get("controls", [-1.0, 1.0]))
    cs = ControlSet(np.asarray(controls, dtype=float))

    def drift(t, x, u, v):
        x = np.asarray(x, dtype=float)
        return np.full_like(x, coupling * float(u[0] * v[0]))

    cmax = float(np.max(np.abs(cs.values)))
    return _Dynamics(1, 1, drift, _const_diffusion(sigma), cs, cs,
                     abs(coupling) * cmax * cmax, abs(sigma), 0.0, False)


def _dyn_static(params: dict) -> _Dynamics:
    cu = ControlSet(np.asarray(list(params.get("controls_u", [0.0])), dtype=float))
    cv = ControlSet(np.asarray(list(params.get("controls_v", [0.0])), dtype=float))
    return _Dynamics(1, 1, _zero_drift, _const_diffusion(0.0), cu, cv,
                     0.0, 0.0, 0.0, True)


def _dyn_controlled_drift(params: dict) -> _Dynamics:
    cu = ControlSet(np.asarray(list(params.get("controls_u", [-1.0, 0.0, 1.0])), dtype=float))
    cv = ControlSet(np.asarray(list(params.get("controls_v", [0.0])), dtype=float))
    sigma = float(params.get("sigma", 0.5))

    def drift(t, x, u, v):
        x = np.asarray(x, dtype=float)
        return np.full_like(x, float(u[0]))

    return _Dynamics(1, 1, drift, _const_diffusion(sigma), cu, cv,
                     float(np.max(np.abs(cu.values))), abs(sigma), 0.0, True)


_DYNAMICS_PRESETS = {
    "drift-sum-1d": (_dyn_drift_sum, {"sigma", "controls"}),
    "coupled-1d": (_dyn_coupled, {"coupling", "sigma", "controls"}),
    "static-1d": (_dyn_static, {"controls_u", "controls_v"}),
    "controlled-drift-1d": (_dyn_controlled_drift, {"controls_u", "controls_v", "sigma"}),
}


# ---------------------------------------------------------------------------
# cost presets


@dataclass(frozen=True)
class _Cost:
    fn: Callable
    bound: float
    lipschitz: float
    decoupled: bool
    is_zero: bool = False


def _terminal_cost(name: str, params: dict) -> _Cost:
    if name == "zero":
        _require_keys(params, set(), "terminal preset zero")
        return _Cost(lambda x: np.zeros(np.asarray(x).shape[:-1]), 0.0, 0.0, True, True)
    if name == "const":
        _require_keys(params, {"c"}, "terminal preset const")
        c = float(params.get("c", 1.0))
        return _Cost(lambda x: np.full(np.asarray(x).shape[:-1], c), abs(c), 0.0, True)
    if name == "linear":
        _require_keys(params, {"a", "c"}, "terminal preset linear")
        a = float(params.get("a", 1.0))
        c = float(params.get("c", 0.0))
        return _Cost(
            lambda x: a * np.asarray(x, dtype=float)[..., 0] + c,
            abs(a) * _BOUND_RADIUS + abs(c),
            abs(a),
            True,
        )
    if name == "abs":
        _require_keys(params, {"center", "scale"}, "terminal preset abs")
        center = float(params.get("center", 0.0))
        scale = float(params.get("scale", 1.0))
        return _Cost(
            lambda x: scale * np.abs(np.asarray(x, dtype=float)[..., 0] - center),
            abs(scale) * (_BOUND_RADIUS + abs(center)),
            abs(scale),
            True,
        )
    if name == "tanh":
        _require_keys(params, {"center", "scale", "amp"}, "terminal preset tanh")
        center = float(params.get("center", 0.0))
        scale = float(params.get("scale", 1.0))
        amp = float(params.get("amp", 1.0))
        return _Cost(
            lambda x: amp * np.tanh(scale * (np.asarray(x, dtype=float)[..., 0] - center)),
            abs(amp),
            abs(amp * scale),
            True,
        )
    raise ConfigError(f"unknown terminal cost preset {name!r}")


def _running_cost(name: str, params: dict) -> _Cost:
    if name == "zero":
        _require_keys(params, set(), "running preset zero")
        return _Cost(lambda t, x, u, v: np.zeros(np.asarray(x).shape[:-1]),
                     0.0, 0.0, True, True)
    if name == "const":
        _require_keys(params, {"c"}, "running preset const")
        c = float(params.get("c", 1.0))
        return _Cost(lambda t, x, u, v: np.full(np.asarray(x).shape[:-1], c),
                     abs(c), 0.0, True)
    if name == "bilinear-uv":
        _require_keys(params, {"c"}, "running preset bilinear-uv")
        c = float(params.get("c", 1.0))

        def fn(t, x, u, v):
            return np.full(np.asarray(x).shape[:-1], c * float(np.dot(u, v)))

        return _Cost(fn, abs(c) * 4.0, 0.0, False)
    if name == "separated":
        _require_keys(params, {"au", "av", "c"}, "running preset separated")
        au = float(params.get("au", 0.0))
        av = float(params.get("av", 0.0))
        c = float(params.get("c", 0.0))

        def fn(t, x, u, v):
            return np.full(np.asarray(x).shape[:-1], au * float(u[0]) + av * float(v[0]) + c)

        return _Cost(fn, abs(au) * 2 + abs(av) * 2 + abs(c), 0.0, True)
    if name == "state-linear":
        _require_keys(params, {"a", "c"}, "running preset state-linear")
        a = float(params.get("a", 1.0))
        c = float(params.get("c", 0.0))
        return _Cost(
            lambda t, x, u, v: a * np.asarray(x, dtype=float)[..., 0] + c,
            abs(a) * _BOUND_RADIUS + abs(c),
            abs(a),
            True,
        )
    raise ConfigError(f"unknown running cost preset {name!r}")


def _require_keys(params: dict, allowed: set, where: str) -> None:
    if not isinstance(params, dict):
        raise ConfigError(f"{where}: params must be an object")
    unknown = set(params) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


def _cost_ref(ref, kind: str) -> tuple[str, dict]:
    if isinstance(ref, str):
        return ref, {}
    if isinstance(ref, dict):
        unknown = set(ref) - {"name", "params"}
        if unknown:
            raise ConfigError(f"{kind} cost reference: unknown keys {sorted(unknown)}")
        if "name" not in ref:
            raise ConfigError(f"{kind} cost reference missing 'name'")
        return str(ref["name"]), dict(ref.get("params", {}))
    raise ConfigError(f"{kind} cost reference must be a string or object, got {type(ref).__name__}")


# ---------------------------------------------------------------------------
# config -> model

_CONFIG_KEYS = {"preset", "params", "I", "J", "T", "g", "l"}


def resolved_config(cfg: dict) -> dict:
    """Validated copy of a config with defaults made explicit."""
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(cfg) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"config: unknown keys {sorted(unknown)}")
    for key in ("preset", "I", "J", "T", "g"):
        if key not in cfg:
            raise ConfigError(f"config: missing required key {key!r}")
    if cfg["preset"] not in _DYNAMICS_PRESETS:
        raise ConfigError(
            f"unknown dynamics preset {cfg['preset']!r}; "
            f"known: {sorted(_DYNAMICS_PRESETS)}"
        )
    params = cfg.get("params", {})
    _require_keys(params, _DYNAMICS_PRESETS[cfg["preset"]][1], f"preset {cfg['preset']}")
    i_count, j_count = cfg["I"], cfg["J"]
    if not (isinstance(i_count, int) and isinstance(j_count, int)) or i_count < 1 or j_count < 1:
        raise ConfigError("I and J must be integers >= 1")
    horizon = cfg["T"]
    if not isinstance(horizon, (int, float)) or not horizon > 0:
        raise ConfigError("T must be a positive number")

    def check_matrix(mat, kind):
        if (
            not isinstance(mat, list)
            or len(mat) != i_count
            or any(not isinstance(row, list) or len(row) != j_count for row in mat)
        ):
            raise ConfigError(f"{kind} must be an {i_count} x {j_count} matrix of cost references")

    check_matrix(cfg["g"], "g")
    if "l" in cfg:
        check_matrix(cfg["l"], "l")
    out = {
        "preset": cfg["preset"],
        "params": copy.deepcopy(params),
        "I": i_count,
        "J": j_count,
        "T": float(horizon),
        "g": copy.deepcopy(cfg["g"]),
        "l": copy.deepcopy(cfg.get("l", [["zero"] * j_count for _ in range(i_count)])),
    }
    return out


def model_from_config(cfg: dict) -> GameModel:
    cfg = resolved_config(cfg)
    builder, _ = _DYNAMICS_PRESETS[cfg["preset"]]
    dyn = builder(cfg["params"])

    terminal_costs = [[_terminal_cost(*_cost_ref(ref, "terminal")) for ref in row]
                      for row in cfg["g"]]
    running_costs = [[_running_cost(*_cost_ref(ref, "running")) for ref in row]
                     for row in cfg["l"]]

    has_running = any(not c.is_zero for row in running_costs for c in row)
    decoupled = dyn.decoupled and all(c.decoupled for row in running_costs for c in row)
    terminal_bound = max(c.bound for row in terminal_costs for c in row)
    running_bound = max(c.bound for row in running_costs for c in row)
    lipschitz = max(
        [dyn.lipschitz]
        + [c.lipschitz for row in terminal_costs for c in row]
        + [c.lipschitz for row in running_costs for c in row]
    )
    sup_bound = max(dyn.drift_bound, dyn.diffusion_bound, terminal_bound, running_bound)

    return GameModel(
        name=cfg["preset"],
        state_dim=dyn.state_dim,
        noise_dim=dyn.noise_dim,
        drift=dyn.drift,
        diffusion=dyn.diffusion,
        u_set=dyn.u_set,
        v_set=dyn.v_set,
        u_types=cfg["I"],
        v_types=cfg["J"],
        terminal=tuple(tuple(c.fn for c in row) for row in terminal_costs),
        running=tuple(tuple(c.fn for c in row) for row in running_costs),
        horizon=cfg["T"],
        has_running=has_running,
        decoupled=decoupled,
        lipschitz_bound=max(lipschitz, 1.0),
        sup_bound=sup_bound,
        drift_bound=dyn.drift_bound,
        diffusion_bound=dyn.diffusion_bound,
        terminal_bound=terminal_bound,
        running_bound=running_bound,
        config=cfg,
    )


# ---------------------------------------------------------------------------
# named full-game presets

_GAME_PRESETS: dict[str, dict] = {
    "drift-sum-1d": {
        "preset": "drift-sum-1d",
        "I": 1,
        "J": 1,
        "T": 1.0,
        "g": [["linear"]],
    },
    "coupled-1d": {
        "preset": "coupled-1d",
        "I": 1,
        "J": 1,
        "T": 1.0,
        "g": [["linear"]],
    },
    "static-bilinear": {
        "preset": "static-1d",
        "I": 2,
        "J": 2,
        "T": 0.5,
        "g": [
            [{"name": "const", "params": {"c": 1.0}}, {"name": "const", "params": {"c": -1.0}}],
            [{"name": "const", "params": {"c": -1.0}}, {"name": "const", "params": {"c": 1.0}}],
        ],
    },
    "running-matrix": {
        "preset": "static-1d",
        "params": {"controls_u": [-1.0, 1.0], "controls_v": [-1.0, 1.0]},
        "I": 2,
        "J": 2,
        "T": 0.5,
        "g": [["zero", "zero"], ["zero", "zero"]],
        "l": [
            [{"name": "bilinear-uv", "params": {"c": 1.0}},
             {"name": "bilinear-uv", "params": {"c": -1.0}}],
            [{"name": "bilinear-uv", "params": {"c": 0.5}},
             {"name": "bilinear-uv", "params": {"c": 2.0}}],
        ],
    },
    "running-matrix-informed": {
        "preset": "static-1d",
        "params": {"controls_u": [-1.0, 1.0], "controls_v": [-1.0, 1.0]},
        "I": 2,
        "J": 1,
        "T": 0.6,
        "g": [
            [{"name": "const", "params": {"c": 0.25}}],
            [{"name": "const", "params": {"c": -0.5}}],
        ],
        "l": [
            [{"name": "separated", "params": {"au": 1.0, "av": 0.4, "c": 0.0}}],
            [{"name": "separated", "params": {"au": -1.0, "av": 0.4, "c": 0.0}}],
        ],
    },
    "one-sided-drift-1d": {
        "preset": "controlled-drift-1d",
        "params": {"controls_u": [-1.0, 0.0, 1.0], "controls_v": [0.0], "sigma": 0.5},
        "I": 2,
        "J": 1,
        "T": 0.5,
        "g": [
            [{"name": "linear", "params": {"a": 1.0, "c": 0.0}}],
            [{"name": "linear", "params": {"a": -1.0, "c": 0.0}}],
        ],
        "l": [
            [{"name": "state-linear", "params": {"a": 0.3, "c": 0.0}}],
            [{"name": "state-linear", "params": {"a": -0.3, "c": 0.0}}],
        ],
    },
    "two-sided-1d": {
        "preset": "drift-sum-1d",
        "params": {"sigma": 0.5},
        "I": 2,
        "J": 2,
        "T": 0.4,
        "g": [
            [{"name": "linear", "params": {"a": 1.0, "c": 0.0}}, "zero"],
            ["zero", {"name": "linear", "params": {"a": 1.0, "c": 0.0}}],
        ],
        "l": [
            [{"name": "separated", "params": {"au": 0.6, "av": 0.5, "c": 0.0}},
             {"name": "separated", "params": {"au": 0.6, "av": -0.5, "c": 0.0}}],
            [{"name": "separated", "params": {"au": -0.6, "av": 0.5, "c": 0.0}},
             {"name": "separated", "params": {"au": -0.6, "av": -0.5, "c": 0.0}}],
        ],
    },
}


def preset_config(name: str) -> dict:
    if name not in _GAME_PRESETS:
        raise ConfigError(f"unknown game preset {name!r}; known: {sorted(_GAME_PRESETS)}")
    return copy.deepcopy(_GAME_PRESETS[name])


def preset(name: str, **overrides) -> GameModel:
    cfg = preset_config(name)
    for key, val in overrides.items():
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        cfg[key] = val
    return model_from_config(cfg)


# ---------------------------------------------------------------------------
# running-cost reduction to a terminal-payoff game


@dataclass(frozen=True)
class ExtendedModel:
    """Terminal-payoff reformulation carrying cost accumulators.

    The state gains one accumulator per type pair with dz_ij = l_ij dt and
    zero diffusion; terminal costs become z_ij + g_ij(x).  Values of the
    extended game at z = 0 equal values of the base game.
    """

    base: GameModel
    game: GameModel

    def z_index(self, i: int, j: int) -> int:
        return self.base.state_dim + i * self.base.v_types + j


def extend_with_running_cost(model: GameModel) -> ExtendedModel:
    n = model.state_dim
    pairs = [(i, j) for i in range(model.u_types) for j in range(model.v_types)]

    def drift(t, xz, u, v):
        xz = np.asarray(xz, dtype=float)
        x = xz[..., :n]
        b = np.asarray(model.drift(t, x, u, v), dtype=float)
        rows = [np.asarray(model.running[i][j](t, x, u, v), dtype=float)[..., None]
                for i, j in pairs]
        return np.concatenate([b] + rows, axis=-1)

    def diffusion(t, xz, u, v):
        xz = np.asarray(xz, dtype=float)
        x = xz[..., :n]
        sig = np.asarray(model.diffusion(t, x, u, v), dtype=float)
        zeros = np.zeros(x.shape[:-1] + (len(pairs), model.noise_dim))
        return np.concatenate([sig, zeros], axis=-2)

    def make_terminal(i: int, j: int):
        slot = n + i * model.v_types + j
        base_g = model.terminal[i][j]

        def g(xz):
            xz = np.asarray(xz, dtype=float)
            return xz[..., slot] + base_g(xz[..., :n])

        return g

    def zero_running(t, xz, u, v):
        return np.zeros(np.asarray(xz).shape[:-1])

    game = GameModel(
        name=f"{model.name}+accumulators",
        state_dim=n + len(pairs),
        noise_dim=model.noise_dim,
        drift=drift,
        diffusion=diffusion,
        u_set=model.u_set,
        v_set=model.v_set,
        u_types=model.u_types,
        v_types=model.v_types,
        terminal=tuple(
            tuple(make_terminal(i, j) for j in range(model.v_types))
            for i in range(model.u_types)
        ),
        running=tuple(
            tuple(zero_running for _ in range(model.v_types))
            for _ in range(model.u_types)
        ),
        horizon=model.horizon,
        has_running=False,
        decoupled=model.decoupled,
        lipschitz_bound=max(model.lipschitz_bound, 1.0),
        sup_bound=model.sup_bound + model.running_bound * model.horizon,
        drift_bound=max(model.drift_bound, model.running_bound),
        diffusion_bound=model.diffusion_bound,
        terminal_bound=model.terminal_bound + model.running_bound * model.horizon,
        running_bound=0.0,
        diag_diffusion=model.diag_diffusion,
        config=model.config,
    )
    return ExtendedModel(base=model, game=game)
