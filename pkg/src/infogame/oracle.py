"""Exact values on small binary-noise trees.

Replaces the Gaussian increments with symmetric +/-sqrt(h) branches so
every expectation is a finite sum.  Trees are capped at depth 6 and
(|U| |V| 2^d)^depth <= 1e7 nodes; within the cap, payoffs of delayed
strategies and backward recursions are computed exactly (up to float
arithmetic), giving an independent reference for the Monte Carlo
estimators and the grid solver.

The one-sided recursion assumes the maximizer is uninformed (one v type)
and alternates a pointwise stage minimax with a convexification in the
belief:

    V_K(x, p) = sum_i p_i g_i(x)
    V_k(x, p) = vex_p[ min_u max_v ( sum_i p_i l_i(t_k, x, u, v) h
                                      + mean_eps V_{k+1}(x', p) ) ]

min-then-max is the documented order; for cost structures where the
stage game has no value the recursion still computes exactly this upper
construction.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .model import GameModel
from .simplex import SimplexGrid
from .simulator import PureStrategy, RandomStrategy, StrategyProfile, strategy_control
from .transform import vex_p

_TREE_NODE_CAP = 1e7
_TREE_DEPTH_CAP = 6
_HORIZON_TOL = 1e-9


def noise_branches(noise_dim: int) -> np.ndarray:
    """All sign patterns of the increment, lexicographic, shape (2^d, d)."""
    rows = list(itertools.product((-1.0, 1.0), repeat=noise_dim))
    return np.array(rows, dtype=float)


@dataclass(frozen=True)
class TreeGame:
    model: GameModel
    x0: np.ndarray
    t0: float
    steps: int
    h: float
    branches: np.ndarray = field(init=False)

    def __post_init__(self):
        x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        if x0.shape != (self.model.state_dim,):
            raise ConfigError("x0 shape does not match the model state dimension")
        object.__setattr__(self, "x0", x0)
        if self.steps < 1:
            raise ConfigError("tree needs at least one step")
        if self.steps > _TREE_DEPTH_CAP:
            raise ConfigError(f"tree depth capped at {_TREE_DEPTH_CAP}")
        if self.h <= 0:
            raise ConfigError("step size must be positive")
        fanout = self.model.u_set.count * self.model.v_set.count * 2**self.model.noise_dim
        if fanout**self.steps > _TREE_NODE_CAP:
            raise ConfigError(
                f"tree of {fanout}^{self.steps} nodes exceeds the cap {_TREE_NODE_CAP:g}"
            )
        end = self.t0 + self.steps * self.h
        if abs(end - self.model.horizon) > _HORIZON_TOL * max(1.0, abs(self.model.horizon)):
            raise ConfigError(
                f"t0 + steps * h = {end:g} must equal the horizon {self.model.horizon:g}"
            )
        object.__setattr__(self, "branches", noise_branches(self.model.noise_dim))

    def time_at(self, k: int) -> float:
        return self.t0 + k * self.h

    def branch_next(self, k: int, x: np.ndarray, u, v) -> np.ndarray:
        """Child states for every sign pattern, shape (2^d, n)."""
        t = self.time_at(k)
        b = np.asarray(self.model.drift(t, x, u, v), dtype=float)
        sig = np.asarray(self.model.diffusion(t, x, u, v), dtype=float)
        inc = self.branches * math.sqrt(self.h)  # (2^d, d)
        return x[None, :] + b[None, :] * self.h + inc @ sig.T


def exact_payoff_tree(
    tree: TreeGame, i: int, j: int, strat_u: PureStrategy, strat_v: PureStrategy
) -> float:
    """Exact expected payoff of a pure strategy pair on the tree."""
    model = tree.model
    if not (0 <= i < model.u_types and 0 <= j < model.v_types):
        raise ConfigError(f"type pair ({i}, {j}) out of range")
    if strat_u.side != "u" or strat_v.side != "v":
        raise ConfigError("exact_payoff_tree needs a u strategy and a v strategy")
    gfn = model.terminal[i][j]
    lfn = model.running[i][j] if model.has_running else None
    fan = tree.branches.shape[0]

    def recurse(k: int, x_path: np.ndarray, u_rows: np.ndarray, v_rows: np.ndarray, acc: float) -> float:
        if k == tree.steps:
            return acc + float(gfn(x_path[-1]))
        u = strategy_control(strat_u, model.u_set, k, x_path, v_rows)
        v = strategy_control(strat_v, model.v_set, k, x_path, u_rows)
        t_k = tree.time_at(k)
        if lfn is not None:
            acc = acc + float(lfn(t_k, x_path[-1], u, v)) * tree.h
        children = tree.branch_next(k, x_path[-1], u, v)
        u_next = np.vstack([u_rows, u[None, :]])
        v_next = np.vstack([v_rows, v[None, :]])
        total = 0.0
        for child in children:
            total += recurse(k + 1, np.vstack([x_path, child[None, :]]), u_next, v_next, acc)
        return total / fan

    x_path = tree.x0[None, :]
    u_rows = np.empty((0, model.u_set.dim))
    v_rows = np.empty((0, model.v_set.dim))
    return recurse(0, x_path, u_rows, v_rows, 0.0)


def exact_payoff_random(
    tree: TreeGame, i: int, j: int, rand_u: RandomStrategy, rand_v: RandomStrategy
) -> float:
    """Weighted sum of pure-pair tree payoffs, weights multiplied exactly."""
    total = 0.0
    for au, wu in zip(rand_u.atoms, rand_u.weights):
        for av, wv in zip(rand_v.atoms, rand_v.weights):
            total += float(wu * wv) * exact_payoff_tree(tree, i, j, au, av)
    return total


def exact_payoff_pq(tree: TreeGame, profile: StrategyProfile, p, q) -> float:
    """Belief-weighted exact payoff of a full profile."""
    model = tree.model
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != (model.u_types,) or q.shape != (model.v_types,):
        raise ConfigError("belief shapes do not match the model type counts")
    if len(profile.u_strategies) != model.u_types or len(profile.v_strategies) != model.v_types:
        raise ConfigError("profile length does not match the model type counts")
    total = 0.0
    for i, ru in enumerate(profile.u_strategies):
        for j, rv in enumerate(profile.v_strategies):
            if p[i] == 0.0 or q[j] == 0.0:
                continue
            total += float(p[i] * q[j]) * exact_payoff_random(tree, i, j, ru, rv)
    return total


def _forward_states(tree: TreeGame) -> tuple[dict[bytes, np.ndarray], ...]:
    """Reachable states per level, keyed by the exact float bytes."""
    model = tree.model
    levels: list[dict[bytes, np.ndarray]] = [{tree.x0.tobytes(): tree.x0}]
    for k in range(tree.steps):
        nxt: dict[bytes, np.ndarray] = {}
        for x in levels[k].values():
            for u in model.u_set.values:
                for v in model.v_set.values:
                    for child in tree.branch_next(k, x, u, v):
                        nxt.setdefault(child.tobytes(), child)
        levels.append(nxt)
    return tuple(levels)


@dataclass(frozen=True)
class ClassicalResult:
    value: float
    levels: tuple[dict[bytes, float], ...]
    states: tuple[dict[bytes, np.ndarray], ...]


def classical_backward(tree: TreeGame, i: int = 0, j: int = 0, g=None, l=None) -> ClassicalResult:
    """Symmetric-information backward recursion, min over u of max over v.

    Only legal when the minimax order provably cannot matter, which this
    checks through the model's decoupled flag.  Pass g or l to override
    the type-(i, j) costs with explicit callables.
    """
    model = tree.model
    if not model.decoupled:
        raise ConfigError(
            "classical_backward requires decoupled controls; the minimax order is ambiguous otherwise"
        )
    gfn = g if g is not None else model.terminal[i][j]
    lfn = l if l is not None else (model.running[i][j] if model.has_running else None)
    states = _forward_states(tree)
    values: list[dict[bytes, float]] = [{} for _ in range(tree.steps + 1)]
    for key, x in states[tree.steps].items():
        values[tree.steps][key] = float(gfn(x))
    for k in range(tree.steps - 1, -1, -1):
        t_k = tree.time_at(k)
        level = values[k + 1]
        for key, x in states[k].items():
            best_u = math.inf
            for u in model.u_set.values:
                best_v = -math.inf
                for v in model.v_set.values:
                    children = tree.branch_next(k, x, u, v)
                    ev = 0.0
                    for child in children:
                        ev += level[child.tobytes()]
                    ev /= children.shape[0]
                    stage = ev
                    if lfn is not None:
                        stage += float(lfn(t_k, x, u, v)) * tree.h
                    if stage > best_v:
                        best_v = stage
                if best_v < best_u:
                    best_u = best_v
            values[k][key] = best_u
    return ClassicalResult(
        value=values[0][tree.x0.tobytes()], levels=tuple(values), states=states
    )


@dataclass(frozen=True)
class OneSidedResult:
    grid: SimplexGrid
    values: np.ndarray  # (npoints,) at the root
    levels: tuple[dict[bytes, np.ndarray], ...]
    states: tuple[dict[bytes, np.ndarray], ...]


def one_sided_recursion(tree: TreeGame, p_grid: SimplexGrid) -> OneSidedResult:
    """Informed-minimizer value on a belief lattice via stagewise vex."""
    model = tree.model
    if model.v_types != 1:
        raise ConfigError("one-sided recursion requires exactly one v type")
    if p_grid.dim != model.u_types:
        raise ConfigError("belief grid dimension must match the u type count")
    states = _forward_states(tree)
    pts = p_grid.points  # (NP, I)
    gcols = np.stack(
        [np.asarray([float(model.terminal[i][0](x)) for x in states[tree.steps].values()]) for i in range(model.u_types)],
        axis=1,
    )  # (nstates, I)
    values: list[dict[bytes, np.ndarray]] = [{} for _ in range(tree.steps + 1)]
    for row, key in zip(gcols @ pts.T, states[tree.steps].keys()):
        values[tree.steps][key] = row
    for k in range(tree.steps - 1, -1, -1):
        t_k = tree.time_at(k)
        level = values[k + 1]
        for key, x in states[k].items():
            table = np.empty((model.u_set.count, model.v_set.count, p_grid.npoints))
            for a, u in enumerate(model.u_set.values):
                for b, v in enumerate(model.v_set.values):
                    children = tree.branch_next(k, x, u, v)
                    ev = np.zeros(p_grid.npoints)
                    for child in children:
                        ev += level[child.tobytes()]
                    ev /= children.shape[0]
                    if model.has_running:
                        lvec = np.array(
                            [float(model.running[i][0](t_k, x, u, v)) for i in range(model.u_types)]
                        )
                        ev = ev + (pts @ lvec) * tree.h
                    table[a, b] = ev
            stage = table.max(axis=1).min(axis=0)
            values[k][key] = vex_p(p_grid, stage)
    return OneSidedResult(
        grid=p_grid,
        values=values[0][tree.x0.tobytes()],
        levels=tuple(values),
        states=states,
    )
