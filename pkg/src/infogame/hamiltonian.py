"""Exact finite minimax Hamiltonians and Isaacs diagnostics.

All evaluators scan the full control grid, so min/max values and the gap
between the two orders are exact for the declared finite control sets.

Two sign conventions coexist deliberately:

* ham_inf_sup / ham_sup_inf carry the running term as -sum l_ij p_i q_j,
  the form in which the Isaacs condition for the asymmetric-information
  equation is stated; isaacs_gap is their difference.
* ham_dual_minus / ham_dual_plus are the conjugate-side Hamiltonians with
  swapped optimization roles and the running term +sum l_ij p_i q_j; they
  satisfy the exact reflection identity
  ham_dual_minus(xi, A) == -ham_sup_inf(-xi, -A).
* ham_bellman_inf_sup keeps the game roles (u minimizes) with the running
  term +sum l_ij p_i q_j; it is the form under which smooth value fields
  satisfy the dynamic-programming equation pointwise, and is what the
  solver and the dual residual checks evaluate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .model import GameModel, running_matrix

_SYM_TOL = 1e-12


@dataclass(frozen=True)
class HamiltonianQuery:
    t: float
    x: np.ndarray  # (n,)
    grad: np.ndarray  # (n,)
    hess: np.ndarray  # (n, n), symmetric
    p: np.ndarray | None = None  # (I,)
    q: np.ndarray | None = None  # (J,)

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        grad = np.atleast_1d(np.asarray(self.grad, dtype=float))
        hess = np.atleast_2d(np.asarray(self.hess, dtype=float))
        if hess.shape != (x.size, x.size) or grad.shape != x.shape:
            raise ConfigError("query shapes inconsistent with state dimension")
        if np.max(np.abs(hess - hess.T), initial=0.0) > _SYM_TOL:
            raise ConfigError("hessian argument must be symmetric")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "grad", grad)
        object.__setattr__(self, "hess", 0.5 * (hess + hess.T))
        for name in ("p", "q"):
            w = getattr(self, name)
            if w is not None:
                w = np.asarray(w, dtype=float)
                if np.any(w < -1e-12) or abs(w.sum() - 1.0) > 1e-9:
                    raise ConfigError(f"{name} must be a probability vector")
                object.__setattr__(self, name, w)


def _belief_weights(model: GameModel, query: HamiltonianQuery) -> tuple[np.ndarray, np.ndarray]:
    p = query.p if query.p is not None else np.ones(model.u_types) / model.u_types
    q = query.q if query.q is not None else np.ones(model.v_types) / model.v_types
    if p.shape != (model.u_types,) or q.shape != (model.v_types,):
        raise ConfigError("belief vector shapes do not match model type counts")
    return p, q


def pair_table(
    model: GameModel, query: HamiltonianQuery, run_sign: float
) -> np.ndarray:
    """Matrix over control pairs of <b, grad> + tr(hess ss^T)/2 + run term."""
    p, q = _belief_weights(model, query)
    t, x = query.t, query.x
    out = np.empty((model.u_set.count, model.v_set.count))
    for a, u in enumerate(model.u_set.values):
        for b, v in enumerate(model.v_set.values):
            bvec = np.asarray(model.drift(t, x, u, v), dtype=float)
            sig = np.asarray(model.diffusion(t, x, u, v), dtype=float)
            second = 0.5 * float(np.sum(query.hess * (sig @ sig.T)))
            run = 0.0
            if run_sign != 0.0 and model.has_running:
                lmat = running_matrix(model, t, x, u, v)
                run = run_sign * float(p @ lmat @ q)
            out[a, b] = float(bvec @ query.grad) + second + run
    return out


def ham_inf_sup(model: GameModel, query: HamiltonianQuery) -> float:
    """min over u of max over v, running term entering as -sum l p q."""
    table = pair_table(model, query, run_sign=-1.0)
    return float(table.max(axis=1).min())


def ham_sup_inf(model: GameModel, query: HamiltonianQuery) -> float:
    """max over v of min over u, running term entering as -sum l p q."""
    table = pair_table(model, query, run_sign=-1.0)
    return float(table.min(axis=0).max())


def isaacs_gap(model: GameModel, query: HamiltonianQuery) -> float:
    """ham_inf_sup - ham_sup_inf; zero certifies order exchange."""
    table = pair_table(model, query, run_sign=-1.0)
    gap = float(table.max(axis=1).min() - table.min(axis=0).max())
    assert gap >= 0.0
    return gap


def ham_dual_minus(
    model: GameModel,
    t: float,
    x,
    grad,
    hess,
    p=None,
    q=None,
) -> float:
    """Conjugate-side Hamiltonian min over v of max over u, +sum l p q."""
    query = HamiltonianQuery(t=t, x=x, grad=grad, hess=hess, p=p, q=q)
    run = 1.0 if (p is not None and q is not None) else 0.0
    table = pair_table(model, query, run_sign=run)
    return float(table.max(axis=0).min())


def ham_dual_plus(
    model: GameModel,
    t: float,
    x,
    grad,
    hess,
    p=None,
    q=None,
) -> float:
    """Conjugate-side Hamiltonian max over u of min over v, +sum l p q."""
    query = HamiltonianQuery(t=t, x=x, grad=grad, hess=hess, p=p, q=q)
    run = 1.0 if (p is not None and q is not None) else 0.0
    table = pair_table(model, query, run_sign=run)
    return float(table.min(axis=1).max())


def ham_bellman_inf_sup(model: GameModel, query: HamiltonianQuery) -> float:
    """Game-role min over u of max over v with +sum l p q running term."""
    table = pair_table(model, query, run_sign=1.0)
    return float(table.max(axis=1).min())


def sample_isaacs_gap(
    model: GameModel,
    *,
    samples: int,
    seed: int,
    x_box: tuple[float, float] = (-2.0, 2.0),
    t_range: tuple[float, float] | None = None,
) -> dict:
    """Deterministic sampled Isaacs diagnostic.

    The documented unit query (grad = ones, hess = 0, uniform beliefs at
    the box center and t = t_range start) is always evaluated first; the
    report carries its gap and the max over all sampled queries.
    """
    if samples < 1:
        raise ConfigError("samples must be >= 1")
    n = model.state_dim
    t_lo, t_hi = t_range if t_range is not None else (0.0, model.horizon)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    center = np.full(n, 0.5 * (x_box[0] + x_box[1]))
    unit = HamiltonianQuery(t=t_lo, x=center, grad=np.ones(n), hess=np.zeros((n, n)))
    unit_gap = isaacs_gap(model, unit)
    max_gap = unit_gap
    for _ in range(samples - 1):
        x = rng.uniform(x_box[0], x_box[1], size=n)
        grad = rng.standard_normal(n)
        raw = rng.standard_normal((n, n))
        hess = 0.5 * (raw + raw.T)
        p = rng.dirichlet(np.ones(model.u_types))
        q = rng.dirichlet(np.ones(model.v_types))
        query = HamiltonianQuery(
            t=float(rng.uniform(t_lo, t_hi)), x=x, grad=grad, hess=hess, p=p, q=q
        )
        max_gap = max(max_gap, isaacs_gap(model, query))
    return {"unit_query_gap": unit_gap, "max_sampled_gap": max_gap, "samples": samples}
