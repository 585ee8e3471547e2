"""Convex duality on simplex grids: conjugates, envelopes, biconjugates.

For a function w tabulated on a simplex grid, the convex conjugate in the
belief variable is w*(s) = max_p <s, p> - w(p) and the concave conjugate
is w#(s) = min_q <s, q> - w(q), both evaluated exactly by scanning the
grid.  Lower convex envelopes (vex) are geometric: a monotone-chain lower
hull for two-component simplices and a lifted convex hull for more
components.  The upper concave envelope (cav) is -vex(-w).

Envelope values at the simplex vertices never change, envelopes are
idempotent, and the biconjugate computed from facet-slope probes
reproduces vex exactly up to roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .simplex import SimplexGrid, discrete_convexity_violation

TIE_TOLERANCE = 1e-12
_AFFINE_RTOL = 1e-11
_FIXED_POINT_TOL = 1e-12


def _already_convex(grid: SimplexGrid, values: np.ndarray) -> bool:
    """Certified-convex inputs are fixed points; this keeps every envelope
    route idempotent bitwise instead of up to hull-recomputation roundoff."""
    scale = max(1.0, float(np.max(np.abs(values))))
    return discrete_convexity_violation(grid, values) <= _FIXED_POINT_TOL * scale


@dataclass(frozen=True)
class ConjugateValue:
    value: float
    support: tuple[int, ...]  # grid indices attaining the optimum, ties included


@dataclass(frozen=True)
class DualField:
    """Conjugate samples of one tabulated function over a finite probe set."""

    grid: SimplexGrid
    probes: np.ndarray  # (nprobes, dim)
    values: np.ndarray  # (nprobes,)
    supports: tuple[tuple[int, ...], ...]


def _check_values(grid: SimplexGrid, values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.npoints,):
        raise ConfigError(
            f"values shape {values.shape} does not match grid ({grid.npoints},)"
        )
    if not np.all(np.isfinite(values)):
        raise ConfigError("tabulated values must be finite")
    return values


def conjugate_p(grid: SimplexGrid, values: np.ndarray, slope: np.ndarray) -> ConjugateValue:
    """Convex conjugate max_p <slope, p> - w(p) with its argmax set."""
    values = _check_values(grid, values)
    slope = np.asarray(slope, dtype=float)
    if slope.shape != (grid.dim,):
        raise ConfigError(f"slope shape {slope.shape} does not match dim {grid.dim}")
    scores = grid.points @ slope - values
    best = float(np.max(scores))
    support = tuple(int(i) for i in np.flatnonzero(scores >= best - TIE_TOLERANCE))
    return ConjugateValue(value=best, support=support)


def concave_conjugate_q(
    grid: SimplexGrid, values: np.ndarray, slope: np.ndarray
) -> ConjugateValue:
    """Concave conjugate min_q <slope, q> - w(q) with its argmin set."""
    values = _check_values(grid, values)
    slope = np.asarray(slope, dtype=float)
    if slope.shape != (grid.dim,):
        raise ConfigError(f"slope shape {slope.shape} does not match dim {grid.dim}")
    scores = grid.points @ slope - values
    best = float(np.min(scores))
    support = tuple(int(i) for i in np.flatnonzero(scores <= best + TIE_TOLERANCE))
    return ConjugateValue(value=best, support=support)


def _chain_lower_hull(xs: np.ndarray, ys: np.ndarray) -> list[int]:
    """Indices of the lower hull of (xs, ys), xs strictly increasing ints.

    Collinear points are kept so that hull nodes retain their exact input
    values.
    """
    keep: list[int] = []
    for i in range(xs.size):
        while len(keep) >= 2:
            a, b = keep[-2], keep[-1]
            cross = (xs[b] - xs[a]) * (ys[i] - ys[a]) - (ys[b] - ys[a]) * (xs[i] - xs[a])
            if cross < 0.0:
                keep.pop()
            else:
                break
        keep.append(i)
    return keep


def _vex_dim2(grid: SimplexGrid, values: np.ndarray) -> np.ndarray:
    xs = grid.numerators[:, 0]  # 0..N ascending by lexicographic order
    keep = _chain_lower_hull(xs.astype(float), values)
    out = values.copy()
    for a, b in zip(keep[:-1], keep[1:]):
        xa, xb = int(xs[a]), int(xs[b])
        if xb - xa <= 1:
            continue
        for idx in range(a + 1, b):
            x = int(xs[idx])
            out[idx] = (values[a] * (xb - x) + values[b] * (x - xa)) / (xb - xa)
    return out


def _affine_fit(grid: SimplexGrid, values: np.ndarray) -> np.ndarray | None:
    """Coefficients (c_1..c_{dim-1}, c_0) if w is affine on the grid."""
    reduced = grid.points[:, :-1]
    design = np.column_stack([reduced, np.ones(grid.npoints)])
    coef, *_ = np.linalg.lstsq(design, values, rcond=None)
    resid = np.max(np.abs(design @ coef - values))
    scale = max(1.0, float(np.max(np.abs(values))))
    if resid <= _AFFINE_RTOL * scale:
        return coef
    return None


def _lifted_lower_facets(
    grid: SimplexGrid, values: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Lower-hull facets of the lifted point cloud (reduced coords, w).

    Returns (gradients, offsets, member node indices): each facet is the
    affine map q -> <g, q> + c on reduced coordinates.
    """
    from scipy.spatial import ConvexHull

    reduced = grid.points[:, :-1]
    lifted = np.column_stack([reduced, values])
    hull = ConvexHull(lifted)
    eqs = hull.equations  # rows: (normal..., offset), normal . y + offset <= 0 inside
    down = eqs[:, -2] < -1e-12
    if not np.any(down):
        raise ConfigError("degenerate lifted hull: no downward facets")
    grads = -eqs[down, :-2] / eqs[down, -2:-1]
    offs = -eqs[down, -1] / eqs[down, -2]
    members = np.unique(hull.simplices[down].ravel())
    return grads, offs, members


def vex_p(grid: SimplexGrid, values: np.ndarray) -> np.ndarray:
    """Lower convex envelope of w restricted to the grid nodes."""
    values = _check_values(grid, values)
    if grid.dim == 1 or grid.npoints == 1:
        return values.copy()
    if _already_convex(grid, values):
        return values.copy()
    if grid.dim == 2:
        return _vex_dim2(grid, values)
    coef = _affine_fit(grid, values)
    if coef is not None:
        return values.copy()
    grads, offs, members = _lifted_lower_facets(grid, values)
    reduced = grid.points[:, :-1]
    planes = reduced @ grads.T + offs  # (npoints, nfacets)
    out = np.min(np.stack([planes.max(axis=1), values]), axis=0)
    out[members] = values[members]  # hull nodes keep their exact input values
    return out


def cav_q(grid: SimplexGrid, values: np.ndarray) -> np.ndarray:
    """Upper concave envelope: cav(w) = -vex(-w)."""
    values = _check_values(grid, values)
    return -vex_p(grid, -values)


def facet_slope_probes(grid: SimplexGrid, values: np.ndarray) -> np.ndarray:
    """Slope vectors of the envelope facets, padded to full coordinates.

    A slope g on reduced coordinates (first dim-1 components) acts on the
    simplex as the full vector (g, 0); adding any multiple of the all-ones
    vector changes neither envelopes nor subdifferentials.
    """
    values = _check_values(grid, values)
    if grid.dim == 1:
        return np.zeros((1, 1))
    if grid.dim == 2:
        xs = grid.numerators[:, 0].astype(float)
        keep = _chain_lower_hull(xs, values)
        slopes = []
        for a, b in zip(keep[:-1], keep[1:]):
            s = (values[b] - values[a]) / ((xs[b] - xs[a]) / grid.resolution)
            slopes.append((s, 0.0))
        if not slopes:
            slopes.append((0.0, 0.0))
        return np.array(sorted(set(slopes)))
    coef = _affine_fit(grid, values)
    if coef is not None:
        return np.concatenate([coef[:-1], [0.0]])[None, :]
    grads, _, _ = _lifted_lower_facets(grid, values)
    probes = np.column_stack([grads, np.zeros(grads.shape[0])])
    return np.unique(np.round(probes, 12), axis=0)


def coordinate_difference_probes(dim: int) -> np.ndarray:
    probes = [np.zeros(dim)]
    for a in range(dim):
        for b in range(dim):
            if a != b:
                e = np.zeros(dim)
                e[a] = 1.0
                e[b] = -1.0
                probes.append(e)
    return np.array(probes)


def biconjugate_p(
    grid: SimplexGrid, values: np.ndarray, extra_probes: np.ndarray | None = None
) -> np.ndarray:
    """Biconjugate from facet-slope probes; equals vex_p up to roundoff."""
    values = _check_values(grid, values)
    if extra_probes is None and _already_convex(grid, values):
        return values.copy()
    probes = [facet_slope_probes(grid, values), coordinate_difference_probes(grid.dim)]
    if extra_probes is not None:
        extra = np.asarray(extra_probes, dtype=float)
        if extra.ndim != 2 or extra.shape[1] != grid.dim:
            raise ConfigError("extra probes must have shape (m, dim)")
        probes.append(extra)
    probe_arr = np.vstack(probes)
    scores = grid.points @ probe_arr.T - values[:, None]  # (npoints, nprobes)
    conj = scores.max(axis=0)
    return np.max(grid.points @ probe_arr.T - conj[None, :], axis=1)


def dual_field(grid: SimplexGrid, values: np.ndarray, probes: np.ndarray) -> DualField:
    probes = np.asarray(probes, dtype=float)
    if probes.ndim != 2 or probes.shape[1] != grid.dim:
        raise ConfigError("probes must have shape (nprobes, dim)")
    vals = np.empty(probes.shape[0])
    supports = []
    for r, probe in enumerate(probes):
        cj = conjugate_p(grid, values, probe)
        vals[r] = cj.value
        supports.append(cj.support)
    return DualField(grid=grid, probes=probes, values=vals, supports=tuple(supports))


def subdifferential_margin(field: DualField, probe_index: int, point_index: int) -> float:
    """Worst violation of the subgradient inequality against all probes.

    Tests w*(s) + <p, s' - s> <= w*(s') for every probe s'; a result
    <= TIE_TOLERANCE certifies that the grid point belongs to the
    subdifferential of the conjugate at probe s (relative to the family).
    """
    p = field.grid.points[point_index]
    s = field.probes[probe_index]
    lhs = field.values[probe_index] + (field.probes - s) @ p
    return float(np.max(lhs - field.values))
