"""Residual audits certifying a solved field as a dual solution.

Two independent routes, never merged:

* Conjugate route.  For each slope probe and each fixed opponent belief
  node, tabulate the conjugate stack over (t, x), form discrete jets by
  central differences, and evaluate

      residual = xi_t - H(t, x, -xi_x, -X, p, q)

  with p running over the conjugate argmax set.  The convex-side stack
  max_p <phat, p> - w must keep the best residual >= -tol at every
  audited node (supersolution direction); the concave-side stack
  min_q <qhat, q> - w must keep it <= tol (subsolution direction).

* Primal route.  For each probe pair the best interior node of
  w - <phat, p> over (t, x, p) is located on the raw field and the jet
  of w itself is tested there: xi_t + H(t, x, xi_x, X, p*, q) <= tol at
  minima, and >= -tol at the mirrored maxima in q.  Verdicts are
  compared against the conjugate route at the same node; the audits
  agree on sound fields.

Both routes sample interior nodes at distance >= L*(T - t0) from the
walls of every moving state axis: the box truncates a whole-space
equation, so residuals closer to a wall measure the reflecting boundary
condition, not the equation.  Audits are further capped by a
deterministic stride so runtime stays bounded; uniform defects
(time-affine perturbations) are visible at every node, so subsampling
cannot hide them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .hamiltonian import HamiltonianQuery, ham_bellman_inf_sup
from .solver import SolveResult, _derivatives
from .transform import coordinate_difference_probes, facet_slope_probes

_DEFAULT_MAX_CHECKS = 10_000
_DEFAULT_TIE_TOL = 1e-9
_PROBE_CAP = 64


@dataclass(frozen=True)
class DualCheckReport:
    tolerance: float
    supersolution_residual: float  # min over audited nodes, passes when >= -tol
    subsolution_residual: float  # max over audited nodes, passes when <= tol
    supersolution_ok: bool
    subsolution_ok: bool
    checks_super: int
    checks_sub: int
    probes_p: np.ndarray
    probes_q: np.ndarray


@dataclass(frozen=True)
class CrosscheckReport:
    tolerance: float
    worst_min_side: float  # max over pairs of the primal residual at minima, <= tol passes
    worst_max_side: float  # min over pairs of the primal residual at maxima, >= -tol passes
    disagreements: int
    pairs_min_side: int
    pairs_max_side: int


def default_tolerance(result: SolveResult) -> float:
    spacing = [
        dx
        for ax, dx in zip(result.grids.state.axes, result.grids.state.spacing)
        if ax.size > 1
    ]
    dx = max(spacing) if spacing else 0.0
    return 10.0 * (dx + result.dt) * result.model.lipschitz_bound


def _stack(result: SolveResult) -> tuple[np.ndarray, np.ndarray]:
    if len(result.fields) < 3:
        raise ConfigError("residual audits need at least three time slices")
    stack = np.stack([f.values for f in result.fields])
    return stack, result.times


def _core_nodes(result: SolveResult) -> list[tuple[int, ...]]:
    """Interior nodes at distance >= L*(T - t0) from every moving wall.

    The state box truncates a whole-space equation behind reflecting
    ghosts, so PDE residuals only mean anything outside the layer the
    boundary condition can reach; near-wall residuals are O(1) artifacts
    on otherwise sound fields.  Frozen axes keep their single node.
    """
    grid = result.grids.state
    depth = result.model.lipschitz_bound * (
        result.model.horizon - float(result.times[0])
    )
    ranges: list[list[int]] = []
    for ax in grid.axes:
        if ax.size == 1:
            ranges.append([ax.size - 1])
            continue
        if ax.size == 2:
            raise ConfigError("residual audits need at least three nodes per moving axis")
        lo, hi = float(ax[0]) + depth, float(ax[-1]) - depth
        idx = [k for k in range(1, ax.size - 1) if lo <= float(ax[k]) <= hi]
        if not idx:
            raise ConfigError(
                "no audit core: every moving state axis must extend "
                "L*(T - t0) beyond the region to certify"
            )
        ranges.append(idx)
    out: list[tuple[int, ...]] = [()]
    for r in ranges:
        out = [node + (i,) for node in out for i in r]
    return out


def build_probes(result: SolveResult, side: str, per_slice_nodes: int = 5) -> np.ndarray:
    """Envelope facet slopes of the terminal and earliest slices, plus
    coordinate differences; deterministic and capped."""
    stack, _ = _stack(result)
    grids = result.grids
    if side == "p":
        grid, opp = grids.p, grids.q
    elif side == "q":
        grid, opp = grids.q, grids.p
    else:
        raise ConfigError("side must be 'p' or 'q'")
    flat = stack.reshape(stack.shape[0], -1, grids.p.npoints, grids.q.npoints)
    nx = flat.shape[1]
    picks = np.unique(np.linspace(0, nx - 1, num=min(per_slice_nodes, nx)).astype(int))
    rows = [coordinate_difference_probes(grid.dim)]
    for ti in (flat.shape[0] - 1, 0):
        for xi in picks:
            for jo in range(opp.npoints):
                if side == "p":
                    values = flat[ti, xi, :, jo]
                else:
                    values = -flat[ti, xi, jo, :]
                rows.append(facet_slope_probes(grid, values))
    probes = np.unique(np.round(np.vstack(rows), 12), axis=0)
    return probes[:_PROBE_CAP]


class _JetTable:
    """Lazy per-time-slice central-difference derivatives of a (t, x) stack."""

    def __init__(self, result: SolveResult, stack: np.ndarray):
        self.grid = result.grids.state
        self.dt = result.dt
        self.stack = stack
        self.cache: dict[int, tuple] = {}

    def at(self, ti: int, node: tuple[int, ...]):
        if ti not in self.cache:
            self.cache[ti] = _derivatives(self.grid, self.stack[ti])
        grad_full, second_full, mixed_full = self.cache[ti]
        n = self.grid.ndim
        xi_t = float(
            (self.stack[ti + 1][node] - self.stack[ti - 1][node]) / (2.0 * self.dt)
        )
        grad = np.array([grad_full[k][node] for k in range(n)])
        hess = np.zeros((n, n))
        for k in range(n):
            hess[k, k] = second_full[k][node]
        for (k, l), block in mixed_full.items():
            hess[k, l] = hess[l, k] = block[node]
        return xi_t, grad, hess


def _jets(result: SolveResult, conj: np.ndarray, ti: int, node: tuple[int, ...]):
    """Central-difference jet of a (t, x) stack at one interior node."""
    return _JetTable(result, conj).at(ti, node)


def _support(scores: np.ndarray, best: float, sense: int, tie: float) -> np.ndarray:
    if sense > 0:
        return np.flatnonzero(scores >= best - tie)
    return np.flatnonzero(scores <= best + tie)


def check_dual_solution(
    result: SolveResult,
    *,
    probes_p: np.ndarray | None = None,
    probes_q: np.ndarray | None = None,
    tol: float | None = None,
    max_checks: int = _DEFAULT_MAX_CHECKS,
    tie_tol: float = _DEFAULT_TIE_TOL,
) -> DualCheckReport:
    """Conjugate-route residual audit of both dual inequalities."""
    model = result.model
    stack, times = _stack(result)
    grids = result.grids
    if probes_p is None:
        probes_p = build_probes(result, "p")
    if probes_q is None:
        probes_q = build_probes(result, "q")
    if tol is None:
        tol = default_tolerance(result)
    nodes = _core_nodes(result)
    nt = stack.shape[0]
    interior_t = range(1, nt - 1)

    def audit(side: str, probes: np.ndarray) -> tuple[float, int]:
        own = grids.p if side == "p" else grids.q
        opp = grids.q if side == "p" else grids.p
        total = probes.shape[0] * opp.npoints * len(interior_t) * len(nodes)
        stride = max(1, int(np.ceil(total / max_checks)))
        worst = np.inf if side == "p" else -np.inf
        counter = 0
        checked = 0
        for jo in range(opp.npoints):
            if side == "p":
                block = stack[..., :, jo]  # (nt, *shape, NP)
            else:
                block = stack[..., jo, :]  # (nt, *shape, NQ)
            for probe in probes:
                scores = np.tensordot(own.points, probe, axes=(1, 0)) - block
                # <probe, r> - w over the own belief axis, shape (nt, *shape, K)
                if side == "p":
                    conj = scores.max(axis=-1)
                else:
                    conj = scores.min(axis=-1)
                jets = _JetTable(result, conj)
                for ti in interior_t:
                    for node in nodes:
                        counter += 1
                        if (counter - 1) % stride:
                            continue
                        checked += 1
                        xi_t, grad, hess = jets.at(ti, node)
                        local = scores[(ti, *node)]
                        best = conj[(ti, *node)]
                        tie = tie_tol * max(1.0, float(np.max(np.abs(local))))
                        cand = _support(local, best, +1 if side == "p" else -1, tie)
                        x = np.array(
                            [grids.state.axes[k][node[k]] for k in range(grids.state.ndim)]
                        )
                        residuals = []
                        for c in cand:
                            if side == "p":
                                p_vec, q_vec = own.points[c], opp.points[jo]
                            else:
                                p_vec, q_vec = opp.points[jo], own.points[c]
                            query = HamiltonianQuery(
                                t=float(times[ti]),
                                x=x,
                                grad=-grad,
                                hess=-hess,
                                p=p_vec,
                                q=q_vec,
                            )
                            residuals.append(xi_t - ham_bellman_inf_sup(model, query))
                        if side == "p":
                            worst = min(worst, max(residuals))
                        else:
                            worst = max(worst, min(residuals))
        return float(worst), checked

    sup_res, n_sup = audit("p", np.asarray(probes_p, dtype=float))
    sub_res, n_sub = audit("q", np.asarray(probes_q, dtype=float))
    return DualCheckReport(
        tolerance=tol,
        supersolution_residual=sup_res,
        subsolution_residual=sub_res,
        supersolution_ok=bool(sup_res >= -tol),
        subsolution_ok=bool(sub_res <= tol),
        checks_super=n_sup,
        checks_sub=n_sub,
        probes_p=np.asarray(probes_p, dtype=float),
        probes_q=np.asarray(probes_q, dtype=float),
    )


def primal_crosscheck(
    result: SolveResult,
    *,
    probes_p: np.ndarray | None = None,
    probes_q: np.ndarray | None = None,
    tol: float | None = None,
    tie_tol: float = _DEFAULT_TIE_TOL,
) -> CrosscheckReport:
    """Primal-route audit at extremal interior nodes, compared with the
    conjugate route at the same nodes."""
    model = result.model
    stack, times = _stack(result)
    grids = result.grids
    if probes_p is None:
        probes_p = build_probes(result, "p")
    if probes_q is None:
        probes_q = build_probes(result, "q")
    if tol is None:
        tol = default_tolerance(result)
    nodes = _core_nodes(result)
    nt = stack.shape[0]
    shape = stack.shape[1:-2]
    interior_mask = np.zeros((nt,) + shape, dtype=bool)
    for ti in range(1, nt - 1):
        for node in nodes:
            interior_mask[(ti, *node)] = True

    worst_min = -np.inf
    worst_max = np.inf
    disagreements = 0
    pairs_min = 0
    pairs_max = 0

    def primal_jet(block: np.ndarray, ti: int, node: tuple[int, ...]):
        xi_t = float((block[ti + 1][node] - block[ti - 1][node]) / (2.0 * result.dt))
        grad_full, second_full, mixed_full = _derivatives(grids.state, block[ti])
        n = grids.state.ndim
        grad = np.array([grad_full[k][node] for k in range(n)])
        hess = np.zeros((n, n))
        for k in range(n):
            hess[k, k] = second_full[k][node]
        for (k, l), mb in mixed_full.items():
            hess[k, l] = hess[l, k] = mb[node]
        return xi_t, grad, hess

    for jo in range(grids.q.npoints):
        block = stack[..., :, jo]  # (nt, *shape, NP)
        q_vec = grids.q.points[jo]
        for probe in np.asarray(probes_p, dtype=float):
            shifted = block - np.tensordot(grids.p.points, probe, axes=(1, 0))
            masked = np.where(interior_mask[..., None], shifted, np.inf)
            flat_idx = int(np.argmin(masked))
            idx = np.unravel_index(flat_idx, masked.shape)
            ti, node, pc = idx[0], idx[1:-1], idx[-1]
            pairs_min += 1
            w_slice = block[..., pc]
            xi_t, grad, hess = primal_jet(w_slice, ti, node)
            x = np.array([grids.state.axes[k][node[k]] for k in range(grids.state.ndim)])
            query = HamiltonianQuery(
                t=float(times[ti]), x=x, grad=grad, hess=hess,
                p=grids.p.points[pc], q=q_vec,
            )
            primal = xi_t + ham_bellman_inf_sup(model, query)
            worst_min = max(worst_min, primal)
            # conjugate route at the same (t, x) node
            scores = np.tensordot(grids.p.points, probe, axes=(1, 0)) - block
            conj = scores.max(axis=-1)
            c_xi_t, c_grad, c_hess = _jets(result, conj, ti, node)
            local = scores[(ti, *node)]
            tie = tie_tol * max(1.0, float(np.max(np.abs(local))))
            cand = _support(local, float(conj[(ti, *node)]), +1, tie)
            duals = [
                c_xi_t
                - ham_bellman_inf_sup(
                    model,
                    HamiltonianQuery(
                        t=float(times[ti]), x=x, grad=-c_grad, hess=-c_hess,
                        p=grids.p.points[c], q=q_vec,
                    ),
                )
                for c in cand
            ]
            if (primal <= tol) != (max(duals) >= -tol):
                disagreements += 1

    for io in range(grids.p.npoints):
        block = stack[..., io, :]  # (nt, *shape, NQ)
        p_vec = grids.p.points[io]
        for probe in np.asarray(probes_q, dtype=float):
            shifted = block - np.tensordot(grids.q.points, probe, axes=(1, 0))
            masked = np.where(interior_mask[..., None], shifted, -np.inf)
            flat_idx = int(np.argmax(masked))
            idx = np.unravel_index(flat_idx, masked.shape)
            ti, node, qc = idx[0], idx[1:-1], idx[-1]
            pairs_max += 1
            w_slice = block[..., qc]
            xi_t, grad, hess = primal_jet(w_slice, ti, node)
            x = np.array([grids.state.axes[k][node[k]] for k in range(grids.state.ndim)])
            query = HamiltonianQuery(
                t=float(times[ti]), x=x, grad=grad, hess=hess,
                p=p_vec, q=grids.q.points[qc],
            )
            primal = xi_t + ham_bellman_inf_sup(model, query)
            worst_max = min(worst_max, primal)
            scores = np.tensordot(grids.q.points, probe, axes=(1, 0)) - block
            conj = scores.min(axis=-1)
            c_xi_t, c_grad, c_hess = _jets(result, conj, ti, node)
            local = scores[(ti, *node)]
            tie = tie_tol * max(1.0, float(np.max(np.abs(local))))
            cand = _support(local, float(conj[(ti, *node)]), -1, tie)
            duals = [
                c_xi_t
                - ham_bellman_inf_sup(
                    model,
                    HamiltonianQuery(
                        t=float(times[ti]), x=x, grad=-c_grad, hess=-c_hess,
                        p=p_vec, q=grids.q.points[c],
                    ),
                )
                for c in cand
            ]
            if (primal >= -tol) != (min(duals) <= tol):
                disagreements += 1

    return CrosscheckReport(
        tolerance=tol,
        worst_min_side=float(worst_min),
        worst_max_side=float(worst_max),
        disagreements=disagreements,
        pairs_min_side=pairs_min,
        pairs_max_side=pairs_max,
    )
