"""Monte Carlo play of delayed-response strategies.

Strategies respond on a coarse cell grid: a strategy with delay m acts on
cells of m time steps and its response on a cell may depend only on the
state path up to the cell start (and, when it observes controls, on the
opponent controls strictly before the cell start).  Under that delay the
pair of strategies resolves to a unique pair of control paths cell by
cell, starting from the constant path on the first cell.

Randomized strategies are finite atom lists with exact rational weights.
Payoff estimators share one noise stream per sample index across every
atom pair and type pair (common random numbers), so mixtures and belief
combinations are exactly bilinear in the weights.  Sample streams are
derived from (seed, sample index); reductions are fixed-tree pairwise
sums, so results do not depend on the worker count.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from ._util import pairwise_mean, pairwise_sum, parallel_map
from .errors import ConfigError
from .model import GameModel, running_matrix
from .solver import SolveResult

_DIVISIBILITY_TOL = 1e-9


@dataclass(frozen=True)
class PureStrategy:
    """Delayed-response rule for one side.

    rule(step, x_obs, opp_obs) -> control point; x_obs holds path nodes up
    to the current cell start, opp_obs the opponent controls strictly
    before it (None unless observes_controls).
    """

    side: str  # "u" or "v"
    delay_cells: int
    rule: Callable
    observes_controls: bool = False
    label: str = "custom"

    def __post_init__(self):
        if self.side not in ("u", "v"):
            raise ConfigError("strategy side must be 'u' or 'v'")
        if not isinstance(self.delay_cells, int) or self.delay_cells < 1:
            raise ConfigError("delay_cells must be an integer >= 1")


@dataclass(frozen=True)
class RandomStrategy:
    """Finite mixture of pure strategies with exact rational weights."""

    atoms: tuple[PureStrategy, ...]
    weights: tuple[Fraction, ...]

    def __post_init__(self):
        if len(self.atoms) != len(self.weights) or not self.atoms:
            raise ConfigError("atoms and weights must be nonempty and equal length")
        weights = tuple(Fraction(w) for w in self.weights)
        if any(w < 0 for w in weights):
            raise ConfigError("weights must be nonnegative")
        if sum(weights) != 1:
            raise ConfigError(f"weights must sum to 1 exactly, got {sum(weights)}")
        sides = {a.side for a in self.atoms}
        if len(sides) != 1:
            raise ConfigError("all atoms of a mixture must play the same side")
        object.__setattr__(self, "weights", weights)

    @property
    def side(self) -> str:
        return self.atoms[0].side


@dataclass(frozen=True)
class StrategyProfile:
    """One randomized strategy per own type for each side."""

    u_strategies: tuple[RandomStrategy, ...]
    v_strategies: tuple[RandomStrategy, ...]

    def __post_init__(self):
        if any(s.side != "u" for s in self.u_strategies) or any(
            s.side != "v" for s in self.v_strategies
        ):
            raise ConfigError("profile sides are inconsistent")


@dataclass(frozen=True)
class NoisePath:
    seed: int
    sample_index: int
    h: float
    increments: np.ndarray  # (steps, noise_dim)
    kind: str

    @property
    def steps(self) -> int:
        return self.increments.shape[0]


def sample_noise(
    seed: int,
    sample_index: int,
    steps: int,
    noise_dim: int,
    h: float,
    kind: str = "gaussian",
) -> NoisePath:
    """Derive the per-sample stream from (seed, sample index)."""
    if h <= 0 or steps < 1:
        raise ConfigError("noise needs steps >= 1 and h > 0")
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(sample_index,))
    )
    if kind == "gaussian":
        inc = rng.standard_normal((steps, noise_dim)) * np.sqrt(h)
    elif kind == "rademacher":
        inc = (2.0 * rng.integers(0, 2, size=(steps, noise_dim)) - 1.0) * np.sqrt(h)
    else:
        raise ConfigError(f"unknown noise kind {kind!r}")
    return NoisePath(seed=seed, sample_index=sample_index, h=h, increments=inc, kind=kind)


def observation_window(strategy: PureStrategy, step: int) -> int:
    """Path index of the strategy's cell start at the given step."""
    return (step // strategy.delay_cells) * strategy.delay_cells


def strategy_control(
    strategy: PureStrategy,
    controls,
    step: int,
    x_path: np.ndarray,
    opp_path: np.ndarray | None,
):
    """Evaluate a rule under the delay discipline and canonicalize output."""
    end = observation_window(strategy, step)
    x_obs = x_path[: end + 1]
    opp_obs = None
    if strategy.observes_controls:
        if opp_path is None:
            raise ConfigError("strategy observes controls but none were supplied")
        opp_obs = opp_path[:end]
    point = strategy.rule(step, x_obs, opp_obs)
    return controls.values[controls.index_of(point)]


@dataclass(frozen=True)
class Resolution:
    t0: float
    h: float
    x_path: np.ndarray  # (steps + 1, n)
    u_path: np.ndarray  # (steps, u dim)
    v_path: np.ndarray  # (steps, v dim)


def resolve_controls(
    model: GameModel,
    strat_u: PureStrategy,
    strat_v: PureStrategy,
    x0,
    noise: NoisePath,
    t0: float = 0.0,
) -> Resolution:
    """Cell-by-cell fixed point of the two delayed responses."""
    if strat_u.side != "u" or strat_v.side != "v":
        raise ConfigError("resolve_controls needs a u strategy and a v strategy")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (model.state_dim,):
        raise ConfigError("x0 shape does not match the model state dimension")
    steps = noise.steps
    h = noise.h
    x = np.empty((steps + 1, model.state_dim))
    x[0] = x0
    u_rows = np.empty((steps, model.u_set.dim))
    v_rows = np.empty((steps, model.v_set.dim))
    for k in range(steps):
        u_rows[k] = strategy_control(strat_u, model.u_set, k, x[: k + 1], v_rows[:k])
        v_rows[k] = strategy_control(strat_v, model.v_set, k, x[: k + 1], u_rows[:k])
        t_k = t0 + k * h
        b = np.asarray(model.drift(t_k, x[k], u_rows[k], v_rows[k]), dtype=float)
        sig = np.asarray(model.diffusion(t_k, x[k], u_rows[k], v_rows[k]), dtype=float)
        x[k + 1] = x[k] + b * h + sig @ noise.increments[k]
    return Resolution(t0=t0, h=h, x_path=x, u_path=u_rows, v_path=v_rows)


def payoff_path(model: GameModel, i: int, j: int, res: Resolution) -> float:
    """Left-rule running integral plus terminal cost along one path."""
    run = 0.0
    if model.has_running:
        lfn = model.running[i][j]
        for k in range(res.u_path.shape[0]):
            t_k = res.t0 + k * res.h
            run += float(lfn(t_k, res.x_path[k], res.u_path[k], res.v_path[k])) * res.h
    return run + float(model.terminal[i][j](res.x_path[-1]))


@dataclass(frozen=True)
class PayoffEstimate:
    estimate: float
    stderr: float
    samples: int


def _steps_for(model: GameModel, t0: float, h: float) -> int:
    span = model.horizon - t0
    steps = int(round(span / h))
    if steps < 1 or abs(steps * h - span) > _DIVISIBILITY_TOL * max(1.0, span):
        raise ConfigError(f"h = {h:g} does not divide the span {span:g} into whole steps")
    return steps


def _mixture_samples(
    model: GameModel,
    payoff_terms: Sequence[tuple[float, int, int, PureStrategy, PureStrategy]],
    x0,
    *,
    t0: float,
    h: float,
    samples: int,
    seed: int,
    kind: str,
) -> np.ndarray:
    """Per-sample combined payoffs for weighted pure-strategy terms.

    Every term sees the same noise path per sample index; distinct pure
    pairs are resolved once per sample and shared across terms.
    """
    steps = _steps_for(model, t0, h)

    def one_sample(s: int) -> float:
        noise = sample_noise(seed, s, steps, model.noise_dim, h, kind)
        cache: dict[tuple[int, int], Resolution] = {}
        total = 0.0
        for weight, i, j, pure_u, pure_v in payoff_terms:
            key = (id(pure_u), id(pure_v))
            if key not in cache:
                cache[key] = resolve_controls(model, pure_u, pure_v, x0, noise, t0)
            total += weight * payoff_path(model, i, j, cache[key])
        return total

    return np.array(parallel_map(one_sample, range(samples)), dtype=float)


def _estimate(values: np.ndarray) -> PayoffEstimate:
    m = values.size
    mean = pairwise_mean(values)
    if m > 1:
        var = pairwise_sum((values - mean) ** 2) / (m - 1)
        stderr = float(np.sqrt(max(var, 0.0) / m))
    else:
        stderr = 0.0
    return PayoffEstimate(estimate=mean, stderr=stderr, samples=m)


def payoff_ij(
    model: GameModel,
    i: int,
    j: int,
    rand_u: RandomStrategy,
    rand_v: RandomStrategy,
    x0,
    *,
    t0: float = 0.0,
    h: float,
    samples: int,
    seed: int = 0,
    kind: str = "gaussian",
) -> PayoffEstimate:
    """Estimate of the type-(i, j) expected payoff under mixed strategies."""
    if not (0 <= i < model.u_types and 0 <= j < model.v_types):
        raise ConfigError(f"type pair ({i}, {j}) out of range")
    terms = [
        (float(wu * wv), i, j, au, av)
        for au, wu in zip(rand_u.atoms, rand_u.weights)
        for av, wv in zip(rand_v.atoms, rand_v.weights)
    ]
    values = _mixture_samples(
        model, terms, x0, t0=t0, h=h, samples=samples, seed=seed, kind=kind
    )
    return _estimate(values)


def payoff_matrix(
    model: GameModel,
    profile: StrategyProfile,
    x0,
    *,
    t0: float = 0.0,
    h: float,
    samples: int,
    seed: int = 0,
    kind: str = "gaussian",
) -> tuple[np.ndarray, np.ndarray]:
    """Per-type-pair estimates and standard errors under one noise budget."""
    ests = np.empty((model.u_types, model.v_types))
    errs = np.empty_like(ests)
    for i, ru in enumerate(profile.u_strategies):
        for j, rv in enumerate(profile.v_strategies):
            est = payoff_ij(
                model, i, j, ru, rv, x0, t0=t0, h=h, samples=samples, seed=seed, kind=kind
            )
            ests[i, j] = est.estimate
            errs[i, j] = est.stderr
    return ests, errs


def payoff_pq(
    model: GameModel,
    profile: StrategyProfile,
    p,
    q,
    x0,
    *,
    t0: float = 0.0,
    h: float,
    samples: int,
    seed: int = 0,
    kind: str = "gaussian",
) -> PayoffEstimate:
    """Belief-weighted payoff: exactly bilinear in (p, q) at fixed seed.

    The estimate is the exact combination sum_ij p_i q_j payoff_ij; the
    standard error comes from the per-sample combined values under common
    random numbers.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != (model.u_types,) or q.shape != (model.v_types,):
        raise ConfigError("belief shapes do not match the model type counts")
    estimate = 0.0
    combined_terms = []
    for i, ru in enumerate(profile.u_strategies):
        for j, rv in enumerate(profile.v_strategies):
            est = payoff_ij(
                model, i, j, ru, rv, x0, t0=t0, h=h, samples=samples, seed=seed, kind=kind
            )
            estimate += float(p[i] * q[j]) * est.estimate
            for au, wu in zip(ru.atoms, ru.weights):
                for av, wv in zip(rv.atoms, rv.weights):
                    combined_terms.append(
                        (float(p[i] * q[j]) * float(wu * wv), i, j, au, av)
                    )
    values = _mixture_samples(
        model, combined_terms, x0, t0=t0, h=h, samples=samples, seed=seed, kind=kind
    )
    spread = _estimate(values)
    return PayoffEstimate(estimate=estimate, stderr=spread.stderr, samples=samples)


def split_mix(
    strategies: Sequence[RandomStrategy],
    strategies_alt: Sequence[RandomStrategy],
    mix: Fraction | int | str,
    belief: Sequence[Fraction | int | str],
    belief_alt: Sequence[Fraction | int | str],
) -> tuple[tuple[RandomStrategy, ...], tuple[Fraction, ...]]:
    """Reweighted concatenation matching a belief split, exactly rational.

    Given per-type mixtures for beliefs p and p' and a mixing weight a,
    returns per-type mixtures and the belief a p + (1-a) p' such that
    playing the mixture under the combined belief reproduces the
    a / (1-a) randomization between the two originals.  Types with zero
    combined mass keep the first family's mixture unchanged.
    """
    a = Fraction(mix)
    if not 0 <= a <= 1:
        raise ConfigError("mix weight must lie in [0, 1]")
    p = [Fraction(w) for w in belief]
    p_alt = [Fraction(w) for w in belief_alt]
    if len(p) != len(strategies) or len(p_alt) != len(strategies_alt):
        raise ConfigError("belief length must match the per-type strategy lists")
    if len(p) != len(p_alt):
        raise ConfigError("both beliefs must have the same length")
    if any(w < 0 for w in p + p_alt) or sum(p) != 1 or sum(p_alt) != 1:
        raise ConfigError("beliefs must be exact probability vectors")
    mixed_beliefs = tuple(a * pi + (1 - a) * pj for pi, pj in zip(p, p_alt))
    out: list[RandomStrategy] = []
    for i, (first, second) in enumerate(zip(strategies, strategies_alt)):
        mass = mixed_beliefs[i]
        if mass == 0:
            out.append(first)
            continue
        atoms = first.atoms + second.atoms
        weights = tuple(a * p[i] / mass * w for w in first.weights) + tuple(
            (1 - a) * p_alt[i] / mass * w for w in second.weights
        )
        out.append(RandomStrategy(atoms=atoms, weights=weights))
    return tuple(out), mixed_beliefs


def constant_strategy(
    model: GameModel, side: str, index: int = 0, delay_cells: int = 1
) -> PureStrategy:
    controls = model.u_set if side == "u" else model.v_set
    if not 0 <= index < controls.count:
        raise ConfigError(f"control index {index} out of range")
    point = controls.values[index]
    return PureStrategy(
        side=side,
        delay_cells=delay_cells,
        rule=lambda step, x_obs, opp_obs: point,
        label=f"constant:{index}",
    )


def cycle_strategy(
    model: GameModel, side: str, delay_cells: int = 1
) -> PureStrategy:
    """Deterministically cycles through the control set, one point per cell."""
    controls = model.u_set if side == "u" else model.v_set

    def rule(step, x_obs, opp_obs):
        return controls.values[(step // delay_cells) % controls.count]

    return PureStrategy(side=side, delay_cells=delay_cells, rule=rule, label="cycle")


def feedback_from_field(
    model: GameModel,
    result: SolveResult,
    side: str,
    p0,
    q0,
    *,
    h: float | None = None,
    delay_cells: int = 1,
    label: str = "field-feedback",
) -> list[RandomStrategy]:
    """Markov minimax selection from a solved field at a frozen belief.

    At each cell start the rule reads the nearest solved slice and state
    node, forms the dissipation-free control table from local central
    differences at the frozen belief pair, and plays the minimax selection
    for its side (first index on ties).  Every own type receives the same
    degenerate mixture.
    """
    if side not in ("u", "v"):
        raise ConfigError("side must be 'u' or 'v'")
    p0 = np.asarray(p0, dtype=float)
    q0 = np.asarray(q0, dtype=float)
    grids = result.grids
    p_idx = int(np.argmin(np.linalg.norm(grids.p.points - p0[None, :], axis=1)))
    q_idx = int(np.argmin(np.linalg.norm(grids.q.points - q0[None, :], axis=1)))
    times = result.times
    stack = np.stack([f.values for f in result.fields])  # (nt, *shape, NP, NQ)
    slab = stack[..., p_idx, q_idx]  # (nt, *shape)
    p_vec = grids.p.points[p_idx]
    q_vec = grids.q.points[q_idx]
    axes = grids.state.axes
    spacing = grids.state.spacing
    n = grids.state.ndim
    step_h = result.dt if h is None else float(h)

    def local_derivatives(ti: int, node: tuple[int, ...]):
        w = slab[ti]
        grad = np.empty(n)
        hess = np.zeros((n, n))
        for k in range(n):
            m = axes[k].size
            if m == 1:
                grad[k] = 0.0
                continue
            up = list(node)
            dn = list(node)
            up[k] = node[k] + 1 if node[k] + 1 < m else m - 2
            dn[k] = node[k] - 1 if node[k] - 1 >= 0 else 1
            grad[k] = (w[tuple(up)] - w[tuple(dn)]) / (2 * spacing[k])
            hess[k, k] = (w[tuple(up)] - 2 * w[node] + w[tuple(dn)]) / spacing[k] ** 2
        return grad, hess

    def rule(step, x_obs, opp_obs):
        cell_start = (step // delay_cells) * delay_cells
        t_c = result.t0 + cell_start * step_h
        ti = int(np.argmin(np.abs(times - t_c)))
        x_now = x_obs[-1]
        node = tuple(
            int(np.clip(np.rint((x_now[k] - axes[k][0]) / spacing[k]), 0, axes[k].size - 1))
            if axes[k].size > 1
            else 0
            for k in range(n)
        )
        grad, hess = local_derivatives(ti, node)
        t_eval = float(times[ti])
        x_eval = np.array([axes[k][node[k]] for k in range(n)])
        table = np.empty((model.u_set.count, model.v_set.count))
        for a, u in enumerate(model.u_set.values):
            for b, v in enumerate(model.v_set.values):
                bvec = np.asarray(model.drift(t_eval, x_eval, u, v), dtype=float)
                sig = np.asarray(model.diffusion(t_eval, x_eval, u, v), dtype=float)
                val = float(bvec @ grad) + 0.5 * float(np.sum(hess * (sig @ sig.T)))
                if model.has_running:
                    lmat = running_matrix(model, t_eval, x_eval, u, v)
                    val += float(p_vec @ lmat @ q_vec)
                table[a, b] = val
        if side == "u":
            pick = int(np.argmin(table.max(axis=1)))
            return model.u_set.values[pick]
        pick = int(np.argmax(table.min(axis=0)))
        return model.v_set.values[pick]

    own_types = model.u_types if side == "u" else model.v_types
    pure = PureStrategy(side=side, delay_cells=delay_cells, rule=rule, label=label)
    return [RandomStrategy(atoms=(pure,), weights=(Fraction(1),)) for _ in range(own_types)]
