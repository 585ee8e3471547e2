"""Backward finite-difference scheme on a state grid times belief simplices.

The value field w(t, x, p, q) is integrated backward from the terminal
slice w(T, x, p, q) = sum_ij p_i q_j g_ij(x) by an explicit monotone step

    w(t) = w(t + dt) + dt * H_num(t + dt, x, Dw, D2w, p, q)

followed by a dual projection (lower convex envelope in p, then upper
concave envelope in q).  H_num is a Lax-Friedrichs-dissipated exact
minimax over the finite control grid: first derivatives by central
differences, second derivatives by central/four-point stencils, and an
added dissipation sized from the declared drift bound so that every
branch of the scan is a monotone function of the neighbouring values.
The diffusion term is evaluated inside the scan (each control pair
carries its own sigma sigma^T), which is strictly monotone under the CFL
condition

    dt <= c * min(dx^2 / (n sigma_max^2), dx / b_max),  c <= 1/2,

checked together with the sharper total-stencil-weight bound before any
step runs.  Boundaries use zero-gradient mirror ghosts; assertions about
solved values are made on interior cores away from the numerical domain
of dependence of the boundary.

The running term enters H_num as +sum_ij l_ij p_i q_j: that is the sign
under which smooth complete-information values satisfy the scheme's
equation pointwise and pure running cost integrates to elapsed time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import transform
from ._util import parallel_map
from .errors import ConfigError, NumericsError
from .hamiltonian import sample_isaacs_gap
from .model import GameModel, restrict_to_types, running_matrix, terminal_matrix
from .simplex import SimplexGrid, build_grid, discrete_convexity_violation

_MEMORY_CAP_BYTES = 2 * 1024**3


@dataclass(frozen=True)
class StateGrid:
    axes: tuple[np.ndarray, ...]
    spacing: np.ndarray  # (n,), uniform per axis

    def __post_init__(self):
        for ax, dx in zip(self.axes, self.spacing):
            if ax.size > 1:
                gaps = np.diff(ax)
                if np.max(np.abs(gaps - dx)) > 1e-12 * max(1.0, abs(dx)):
                    raise ConfigError("state grid spacing must be uniform")

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(ax.size for ax in self.axes)

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def bounds(self) -> tuple[tuple[float, float], ...]:
        return tuple((float(ax[0]), float(ax[-1])) for ax in self.axes)

    def mesh(self) -> np.ndarray:
        """Node coordinates, shape (*shape, ndim)."""
        grids = np.meshgrid(*self.axes, indexing="ij")
        return np.stack(grids, axis=-1)


def build_state_grid(bounds, counts) -> StateGrid:
    axes = []
    spacing = []
    for (lo, hi), m in zip(bounds, counts):
        m = int(m)
        if m < 1:
            raise ConfigError("state grid needs at least one node per axis")
        if m == 1:
            axes.append(np.array([0.5 * (lo + hi)]))
            spacing.append(1.0)  # placeholder, no derivatives on this axis
        else:
            if not hi > lo:
                raise ConfigError("state bounds must satisfy hi > lo")
            axes.append(np.linspace(lo, hi, m))
            spacing.append((hi - lo) / (m - 1))
    return StateGrid(axes=tuple(axes), spacing=np.asarray(spacing, dtype=float))


@dataclass(frozen=True)
class Grids:
    state: StateGrid
    p: SimplexGrid
    q: SimplexGrid


@dataclass(frozen=True)
class ValueField:
    t: float
    values: np.ndarray  # (*state shape, n_p_points, n_q_points)
    convexity_violation_p: float = 0.0
    concavity_violation_q: float = 0.0
    projection_residual: float = 0.0
    commutation_residual: float = 0.0


@dataclass
class SolveResult:
    model: GameModel
    grids: Grids
    t0: float
    dt: float
    fields: list[ValueField]  # ascending time, fields[-1] is the terminal slice
    diagnostics: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return np.array([f.t for f in self.fields])

    def field_at(self, t: float, tol: float = 1e-9) -> ValueField:
        for f in self.fields:
            if abs(f.t - t) <= tol:
                return f
        raise KeyError(f"no solved slice at t = {t}")


def terminal_field(model: GameModel, grids: Grids) -> ValueField:
    _check_grids(model, grids)
    mesh = grids.state.mesh()
    gmat = terminal_matrix(model, mesh)  # (*shape, I, J)
    values = np.einsum("...ij,ai,bj->...ab", gmat, grids.p.points, grids.q.points)
    return ValueField(t=model.horizon, values=values)


def _check_grids(model: GameModel, grids: Grids) -> None:
    if grids.state.ndim != model.state_dim:
        raise ConfigError("state grid dimension does not match the model")
    if grids.p.dim != model.u_types or grids.q.dim != model.v_types:
        raise ConfigError("simplex grid dimensions must equal the model type counts")
    for ax in grids.state.axes:
        if ax.size == 1 and (model.drift_bound > 0 or model.diffusion_bound > 0):
            raise ConfigError(
                "single-node state axes are only allowed for static dynamics"
            )


def cfl_limit(model: GameModel, grid: StateGrid, cfl_factor: float = 0.5) -> float:
    if not 0 < cfl_factor <= 0.5:
        raise ConfigError("cfl factor must lie in (0, 1/2]")
    n = grid.ndim
    limit = np.inf
    for ax, dx in zip(grid.axes, grid.spacing):
        if ax.size == 1:
            continue
        if model.diffusion_bound > 0:
            limit = min(limit, dx * dx / (n * model.diffusion_bound**2))
        if model.drift_bound > 0:
            limit = min(limit, dx / model.drift_bound)
    return cfl_factor * limit


def validate_time_step(
    model: GameModel, grid: StateGrid, dt: float, cfl_factor: float = 0.5
) -> None:
    if dt <= 0:
        raise ConfigError("dt must be positive")
    limit = cfl_limit(model, grid, cfl_factor)
    if dt > limit * (1 + 1e-12):
        raise ConfigError(
            f"CFL violation: dt = {dt:g} exceeds limit {limit:g} "
            f"(factor {cfl_factor:g})"
        )
    # stencil weights must leave the center coefficient nonnegative
    weight = 0.0
    for ax, dx in zip(grid.axes, grid.spacing):
        if ax.size == 1:
            continue
        weight += dt * (model.drift_bound / dx + model.diffusion_bound**2 / dx**2)
    if weight > 1.0 + 1e-12:
        raise ConfigError(
            f"monotonicity violation: total stencil weight {weight:g} exceeds 1"
        )


def _shift(values: np.ndarray, axis: int, direction: int) -> np.ndarray:
    """Neighbour values with zero-gradient mirror ghosts at the boundary."""
    m = values.shape[axis]
    if m == 1:
        return values
    idx = np.arange(m) + direction
    if direction > 0:
        idx[-1] = m - 2
    else:
        idx[0] = 1
    return np.take(values, idx, axis=axis)


def _derivatives(grid: StateGrid, values: np.ndarray):
    n = grid.ndim
    grad = []
    second = []
    for k in range(n):
        dx = grid.spacing[k]
        up = _shift(values, k, +1)
        down = _shift(values, k, -1)
        grad.append((up - down) / (2.0 * dx))
        second.append((up - 2.0 * values + down) / (dx * dx))
    mixed = {}
    for k in range(n):
        for l in range(k + 1, n):
            pp = _shift(_shift(values, k, +1), l, +1)
            pm = _shift(_shift(values, k, +1), l, -1)
            mp = _shift(_shift(values, k, -1), l, +1)
            mm = _shift(_shift(values, k, -1), l, -1)
            mixed[(k, l)] = (pp - pm - mp + mm) / (
                4.0 * grid.spacing[k] * grid.spacing[l]
            )
    return grad, second, mixed


def numerical_hamiltonian(
    model: GameModel, grids: Grids, t: float, values: np.ndarray
) -> np.ndarray:
    """Dissipated exact minimax over the control grid, game sign convention."""
    grid = grids.state
    n = grid.ndim
    mesh = grid.mesh()
    grad, second, mixed = _derivatives(grid, values)
    p_pts, q_pts = grids.p.points, grids.q.points

    best_over_u = None
    for u in model.u_set.values:
        best_over_v = None
        for v in model.v_set.values:
            b = np.asarray(model.drift(t, mesh, u, v), dtype=float)
            sig = np.asarray(model.diffusion(t, mesh, u, v), dtype=float)
            diff_mat = np.einsum("...ik,...jk->...ij", sig, sig)
            total = np.zeros_like(values)
            for k in range(n):
                total = total + b[..., k, None, None] * grad[k]
                total = total + 0.5 * diff_mat[..., k, k, None, None] * second[k]
            for (k, l), d2 in mixed.items():
                total = total + diff_mat[..., k, l, None, None] * d2
            if model.has_running:
                lmat = running_matrix(model, t, mesh, u, v)
                total = total + np.einsum("...ij,ai,bj->...ab", lmat, p_pts, q_pts)
            best_over_v = total if best_over_v is None else np.maximum(best_over_v, total)
        best_over_u = (
            best_over_v if best_over_u is None else np.minimum(best_over_u, best_over_v)
        )

    ham = best_over_u
    if model.drift_bound > 0:
        for k in range(n):
            if grid.axes[k].size > 1:
                ham = ham + (0.5 * model.drift_bound * grid.spacing[k]) * second[k]
    return ham


def hjb_step(
    model: GameModel,
    grids: Grids,
    w_next: ValueField,
    dt: float,
    *,
    cfl_factor: float = 0.5,
    validate: bool = True,
) -> ValueField:
    """One explicit backward step; coefficients evaluated at the data time."""
    if validate:
        validate_time_step(model, grids.state, dt, cfl_factor)
    ham = numerical_hamiltonian(model, grids, w_next.t, w_next.values)
    values = w_next.values + dt * ham
    if not np.all(np.isfinite(values)):
        raise NumericsError(f"non-finite values after step to t = {w_next.t - dt:g}")
    return ValueField(t=w_next.t - dt, values=values)


@dataclass(frozen=True)
class ProjectionResult:
    values: np.ndarray
    convexity_violation_p: float
    concavity_violation_q: float
    residual: float
    commutation_residual: float


def _project_rows(grid: SimplexGrid, block: np.ndarray, concave: bool) -> np.ndarray:
    """Envelope each row of a (rows, npoints) block."""
    out = np.empty_like(block)
    for r in range(block.shape[0]):
        if concave:
            out[r] = transform.cav_q(grid, block[r])
        else:
            out[r] = transform.vex_p(grid, block[r])
    return out


def _apply_envelopes(
    grids: Grids, values: np.ndarray, order: str
) -> np.ndarray:
    np_pts, nq_pts = grids.p.npoints, grids.q.npoints
    work = values.reshape(-1, np_pts, nq_pts)

    def vex_step(arr):
        if np_pts == 1:
            return arr
        moved = np.moveaxis(arr, 1, 2).reshape(-1, np_pts)  # rows over (x, q)
        chunks = np.array_split(np.arange(moved.shape[0]), 4 * max(1, moved.shape[0] // 512))
        pieces = parallel_map(
            lambda idx: _project_rows(grids.p, moved[idx], concave=False), chunks
        )
        flat = np.concatenate(pieces, axis=0)
        return np.moveaxis(flat.reshape(-1, nq_pts, np_pts), 2, 1)

    def cav_step(arr):
        if nq_pts == 1:
            return arr
        moved = arr.reshape(-1, nq_pts)  # rows over (x, p)
        chunks = np.array_split(np.arange(moved.shape[0]), 4 * max(1, moved.shape[0] // 512))
        pieces = parallel_map(
            lambda idx: _project_rows(grids.q, moved[idx], concave=True), chunks
        )
        flat = np.concatenate(pieces, axis=0)
        return flat.reshape(-1, np_pts, nq_pts)

    if order == "vex-cav":
        work = cav_step(vex_step(work))
    else:
        work = vex_step(cav_step(work))
    return work.reshape(values.shape)


def _certificates(grids: Grids, values: np.ndarray) -> tuple[float, float]:
    np_pts, nq_pts = grids.p.npoints, grids.q.npoints
    flat = values.reshape(-1, np_pts, nq_pts)
    worst_p = 0.0
    worst_q = 0.0
    for block in flat:
        for qi in range(nq_pts):
            worst_p = max(
                worst_p, discrete_convexity_violation(grids.p, block[:, qi])
            )
        for pi in range(np_pts):
            worst_q = max(
                worst_q, discrete_convexity_violation(grids.q, -block[pi, :])
            )
    return worst_p, worst_q


def dual_project(
    grids: Grids, values: np.ndarray, *, check_commutation: bool = True
) -> ProjectionResult:
    """Lower convex envelope in p then upper concave envelope in q.

    The second envelope is a supremum of p-convex candidates over a
    p-independent feasible set, so it preserves the first certificate;
    both certificates therefore hold to roundoff.  The residual of the
    opposite composition is reported as the commutation diagnostic.
    """
    projected = _apply_envelopes(grids, values, "vex-cav")
    residual = float(np.max(np.abs(projected - values), initial=0.0))
    commutation = 0.0
    if check_commutation and grids.p.npoints > 1 and grids.q.npoints > 1:
        other = _apply_envelopes(grids, values, "cav-vex")
        commutation = float(np.max(np.abs(projected - other), initial=0.0))
    worst_p, worst_q = _certificates(grids, projected)
    return ProjectionResult(
        values=projected,
        convexity_violation_p=worst_p,
        concavity_violation_q=worst_q,
        residual=residual,
        commutation_residual=commutation,
    )


def solve(
    model: GameModel,
    grids: Grids,
    *,
    t0: float,
    dt: float,
    seed: int = 0,
    isaacs_samples: int = 1000,
    isaacs_tol: float = 1e-10,
    cfl_factor: float = 0.5,
    project: bool = True,
    check_commutation: bool = True,
) -> SolveResult:
    _check_grids(model, grids)
    if not t0 < model.horizon:
        raise ConfigError("t0 must lie before the horizon")
    span = model.horizon - t0
    steps = int(round(span / dt))
    if steps < 1 or abs(steps * dt - span) > 1e-9 * max(1.0, span):
        raise ConfigError(
            f"dt = {dt:g} does not divide the time span {span:g} into whole steps"
        )
    cells = int(np.prod(grids.state.shape)) * grids.p.npoints * grids.q.npoints
    if (steps + 1) * cells * 8 > _MEMORY_CAP_BYTES:
        raise ConfigError("value-field memory above the 2 GiB cap; coarsen the grids")
    validate_time_step(model, grids.state, dt, cfl_factor)
    gap_report = sample_isaacs_gap(
        model,
        samples=isaacs_samples,
        seed=seed,
        x_box=(
            min(lo for lo, _ in grids.state.bounds),
            max(hi for _, hi in grids.state.bounds),
        ),
        t_range=(t0, model.horizon),
    )
    if gap_report["max_sampled_gap"] > isaacs_tol:
        raise ConfigError(
            f"Isaacs gap {gap_report['unit_query_gap']:g} at the unit query "
            f"(max sampled {gap_report['max_sampled_gap']:g}) exceeds tolerance "
            f"{isaacs_tol:g}; min-max and max-min orders disagree"
        )

    fields = [terminal_field(model, grids)]
    proj_residuals: list[float] = []
    commutation_residuals: list[float] = []
    cert_p: list[float] = []
    cert_q: list[float] = []
    for _ in range(steps):
        stepped = hjb_step(model, grids, fields[-1], dt, cfl_factor=cfl_factor,
                           validate=False)
        if project:
            proj = dual_project(
                grids, stepped.values, check_commutation=check_commutation
            )
            stepped = ValueField(
                t=stepped.t,
                values=proj.values,
                convexity_violation_p=proj.convexity_violation_p,
                concavity_violation_q=proj.concavity_violation_q,
                projection_residual=proj.residual,
                commutation_residual=proj.commutation_residual,
            )
            proj_residuals.append(proj.residual)
            commutation_residuals.append(proj.commutation_residual)
            cert_p.append(proj.convexity_violation_p)
            cert_q.append(proj.concavity_violation_q)
        if not np.all(np.isfinite(stepped.values)):
            raise NumericsError(f"non-finite values at t = {stepped.t:g}")
        fields.append(stepped)

    fields.reverse()
    value_bound = model.terminal_bound + span * model.running_bound
    diagnostics = {
        "steps": steps,
        "dt": dt,
        "t0": t0,
        "cfl_limit": cfl_limit(model, grids.state, cfl_factor),
        "cfl_factor": cfl_factor,
        "isaacs": gap_report,
        "projection_residuals": proj_residuals,
        "commutation_residuals": commutation_residuals,
        "convexity_violations_p": cert_p,
        "concavity_violations_q": cert_q,
        "max_abs_value": float(max(np.max(np.abs(f.values)) for f in fields)),
        "value_bound": value_bound,
    }
    return SolveResult(
        model=model, grids=grids, t0=t0, dt=dt, fields=fields, diagnostics=diagnostics
    )


def classical_solve(
    model: GameModel,
    state_grid: StateGrid,
    i: int,
    j: int,
    *,
    t0: float,
    dt: float,
    seed: int = 0,
    isaacs_samples: int = 1000,
    isaacs_tol: float = 1e-10,
    cfl_factor: float = 0.5,
) -> SolveResult:
    """Complete-information solve for one type pair on singleton simplices."""
    sub = restrict_to_types(model, i, j)
    grids = Grids(state=state_grid, p=build_grid(1, 1), q=build_grid(1, 1))
    return solve(
        sub,
        grids,
        t0=t0,
        dt=dt,
        seed=seed,
        isaacs_samples=isaacs_samples,
        isaacs_tol=isaacs_tol,
        cfl_factor=cfl_factor,
        project=False,
    )
