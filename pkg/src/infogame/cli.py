"""Command line front end.

Subcommands: solve, simulate, check, convexify, oracle.  All outputs are
written atomically (temp file in the target directory, then replace) and
are byte-identical across reruns with the same inputs: JSON is dumped
with sorted keys, floats use shortest round-trip repr, and wall-clock
timings go to stderr only.  Exit codes: 0 success, 2 configuration
errors, 3 numeric failures, 1 anything else.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import time
import traceback
from fractions import Fraction

import numpy as np

from ._util import sha256_hex
from .dualcheck import check_dual_solution, default_tolerance, primal_crosscheck
from .errors import ConfigError, NumericsError
from .model import model_from_config, preset_config, resolved_config
from .oracle import TreeGame, one_sided_recursion
from .simplex import build_grid
from .simulator import (
    RandomStrategy,
    StrategyProfile,
    constant_strategy,
    cycle_strategy,
    feedback_from_field,
    payoff_matrix,
    payoff_pq,
)
from .solver import Grids, SolveResult, ValueField, build_state_grid, solve
from .transform import cav_q, vex_p


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump_json(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def _load_config(path: str | None, preset: str | None) -> tuple[dict, str]:
    if (path is None) == (preset is None):
        raise ConfigError("provide exactly one of --config or --preset")
    if preset is not None:
        cfg = preset_config(preset)
        raw = _dump_json(cfg).encode()
        return cfg, sha256_hex(raw)
    try:
        with open(path, "rb") as handle:
            raw = handle.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    try:
        cfg = json.loads(raw.decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config JSON must be an object")
    return cfg, sha256_hex(raw)


def _float_list(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok != ""]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated floats, got {text!r}") from exc


def _slice_rows(result: SolveResult):
    grids = result.grids
    mesh = grids.state.mesh().reshape(-1, grids.state.ndim)
    for fld in result.fields:
        flat = fld.values.reshape(-1, grids.p.npoints, grids.q.npoints)
        for xi in range(flat.shape[0]):
            for a in range(grids.p.npoints):
                for b in range(grids.q.npoints):
                    yield fld.t, mesh[xi], grids.p.points[a], grids.q.points[b], flat[
                        xi, a, b
                    ]


def _write_solve_outputs(out_dir: str, result: SolveResult, cfg_resolved: dict, cfg_sha: str) -> None:
    grids = result.grids
    header = (
        ["t"]
        + [f"x_{k + 1}" for k in range(grids.state.ndim)]
        + [f"p_{i + 1}" for i in range(grids.p.dim)]
        + [f"q_{j + 1}" for j in range(grids.q.dim)]
        + ["w"]
    )
    lines = [",".join(header)]
    for t, x, p, q, w in _slice_rows(result):
        cells = [repr(float(t))]
        cells += [repr(float(v)) for v in x]
        cells += [repr(float(v)) for v in p]
        cells += [repr(float(v)) for v in q]
        cells.append(repr(float(w)))
        lines.append(",".join(cells))
    _write_atomic(os.path.join(out_dir, "slices.csv"), "\n".join(lines) + "\n")
    meta = {
        "config": cfg_resolved,
        "config_sha256": cfg_sha,
        "grid": {
            "bounds": [[float(ax[0]), float(ax[-1])] for ax in grids.state.axes],
            "counts": [int(ax.size) for ax in grids.state.axes],
            "p_resolution": int(grids.p.resolution),
            "q_resolution": int(grids.q.resolution),
        },
        "t0": result.t0,
        "dt": result.dt,
        "times": [f.t for f in result.fields],
        "per_slice": {
            "projection_residual": [f.projection_residual for f in result.fields],
            "commutation_residual": [f.commutation_residual for f in result.fields],
            "convexity_violation_p": [f.convexity_violation_p for f in result.fields],
            "concavity_violation_q": [f.concavity_violation_q for f in result.fields],
        },
        "diagnostics": result.diagnostics,
    }
    _write_atomic(os.path.join(out_dir, "diagnostics.json"), _dump_json(meta))


def load_solve(out_dir: str) -> SolveResult:
    """Rebuild a solve result from an output directory."""
    meta_path = os.path.join(out_dir, "diagnostics.json")
    csv_path = os.path.join(out_dir, "slices.csv")
    try:
        with open(meta_path) as handle:
            meta = json.load(handle)
        with open(csv_path) as handle:
            csv_lines = handle.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read solve outputs: {exc}") from exc
    model = model_from_config(meta["config"])
    g = meta["grid"]
    state = build_state_grid([tuple(b) for b in g["bounds"]], g["counts"])
    grids = Grids(
        state=state,
        p=build_grid(model.u_types, g["p_resolution"]),
        q=build_grid(model.v_types, g["q_resolution"]),
    )
    times = meta["times"]
    nx = int(np.prod(state.shape))
    per_slice = nx * grids.p.npoints * grids.q.npoints
    body = csv_lines[1:]
    if len(body) != per_slice * len(times):
        raise ConfigError("slices.csv row count does not match the recorded grid")
    values = np.array([float(line.rsplit(",", 1)[1]) for line in body])
    stack = values.reshape(len(times), *state.shape, grids.p.npoints, grids.q.npoints)
    fields = [ValueField(t=float(t), values=stack[k]) for k, t in enumerate(times)]
    return SolveResult(
        model=model,
        grids=grids,
        t0=float(meta["t0"]),
        dt=float(meta["dt"]),
        fields=fields,
        diagnostics=meta.get("diagnostics", {}),
    )


def _cmd_solve(args) -> int:
    cfg, cfg_sha = _load_config(args.config, args.preset)
    resolved = resolved_config(cfg)
    model = model_from_config(cfg)
    bounds = [(args.bounds[0], args.bounds[1])] * model.state_dim
    counts = [args.nx] * model.state_dim
    state = build_state_grid(bounds, counts)
    grids = Grids(
        state=state,
        p=build_grid(model.u_types, args.np),
        q=build_grid(model.v_types, args.nq),
    )
    if args.t0 >= model.horizon:
        raise ConfigError("t0 must lie strictly before the horizon")
    dt = (model.horizon - args.t0) / args.steps
    started = time.perf_counter()
    result = solve(
        model,
        grids,
        t0=args.t0,
        dt=dt,
        seed=args.seed,
        isaacs_samples=args.isaacs_samples,
        cfl_factor=args.cfl,
    )
    elapsed = time.perf_counter() - started
    _write_solve_outputs(args.out, result, resolved, cfg_sha)
    print(f"solve finished in {elapsed:.3f}s", file=sys.stderr)
    print(f"wrote {os.path.join(args.out, 'slices.csv')}")
    print(f"wrote {os.path.join(args.out, 'diagnostics.json')}")
    return 0


def _parse_strategy(model, spec: str, side: str, delay_cells: int, h: float, p, q):
    """Strategy families: constant[:k], cycle, feedback:<solve dir>."""
    own_types = model.u_types if side == "u" else model.v_types
    if spec.startswith("constant"):
        index = 0
        if ":" in spec:
            _, _, raw = spec.partition(":")
            try:
                index = int(raw)
            except ValueError as exc:
                raise ConfigError(f"bad constant strategy index {raw!r}") from exc
        pure = constant_strategy(model, side, index=index, delay_cells=delay_cells)
        return [
            RandomStrategy(atoms=(pure,), weights=(Fraction(1),)) for _ in range(own_types)
        ]
    if spec == "cycle":
        pure = cycle_strategy(model, side, delay_cells=delay_cells)
        return [
            RandomStrategy(atoms=(pure,), weights=(Fraction(1),)) for _ in range(own_types)
        ]
    if spec.startswith("feedback:"):
        _, _, directory = spec.partition(":")
        result = load_solve(directory)
        return feedback_from_field(
            model, result, side, p, q, h=h, delay_cells=delay_cells
        )
    raise ConfigError(f"unknown strategy family {spec!r}")


def _cmd_simulate(args) -> int:
    cfg, cfg_sha = _load_config(args.config, args.preset)
    resolved = resolved_config(cfg)
    model = model_from_config(cfg)
    p = np.asarray(_float_list(args.p), dtype=float) if args.p else np.ones(model.u_types) / model.u_types
    q = np.asarray(_float_list(args.q), dtype=float) if args.q else np.ones(model.v_types) / model.v_types
    x0 = np.asarray(_float_list(args.x0), dtype=float) if args.x0 else np.zeros(model.state_dim)
    strat_u = _parse_strategy(model, args.strategy_u or args.strategy, "u", args.delta, args.h, p, q)
    strat_v = _parse_strategy(model, args.strategy_v or args.strategy, "v", args.delta, args.h, p, q)
    profile = StrategyProfile(u_strategies=tuple(strat_u), v_strategies=tuple(strat_v))
    started = time.perf_counter()
    ests, errs = payoff_matrix(
        model, profile, x0, t0=args.t0, h=args.h, samples=args.samples,
        seed=args.seed, kind=args.noise,
    )
    combined = payoff_pq(
        model, profile, p, q, x0, t0=args.t0, h=args.h, samples=args.samples,
        seed=args.seed, kind=args.noise,
    )
    elapsed = time.perf_counter() - started
    payload = {
        "config": resolved,
        "config_sha256": cfg_sha,
        "p": p,
        "q": q,
        "x0": x0,
        "t0": args.t0,
        "h": args.h,
        "delta_cells": args.delta,
        "samples": args.samples,
        "seed": args.seed,
        "noise": args.noise,
        "strategy_u": args.strategy_u or args.strategy,
        "strategy_v": args.strategy_v or args.strategy,
        "estimates": ests,
        "stderrs": errs,
        "combined_estimate": combined.estimate,
        "combined_stderr": combined.stderr,
    }
    path = args.out if args.out.endswith(".json") else os.path.join(args.out, "simulate.json")
    _write_atomic(path, _dump_json(payload))
    print(f"simulate finished in {elapsed:.3f}s", file=sys.stderr)
    print(f"wrote {path}")
    return 0


def _cmd_check(args) -> int:
    result = load_solve(args.solve)
    tol = args.tol if args.tol is not None else default_tolerance(result)
    started = time.perf_counter()
    report = check_dual_solution(result, tol=tol, max_checks=args.max_checks)
    cross = primal_crosscheck(result, tol=tol)
    elapsed = time.perf_counter() - started
    payload = {
        "tolerance": tol,
        "supersolution_residual": report.supersolution_residual,
        "subsolution_residual": report.subsolution_residual,
        "supersolution_ok": report.supersolution_ok,
        "subsolution_ok": report.subsolution_ok,
        "checks_super": report.checks_super,
        "checks_sub": report.checks_sub,
        "crosscheck": {
            "worst_min_side": cross.worst_min_side,
            "worst_max_side": cross.worst_max_side,
            "disagreements": cross.disagreements,
            "pairs_min_side": cross.pairs_min_side,
            "pairs_max_side": cross.pairs_max_side,
        },
    }
    out = args.out or os.path.join(args.solve, "check.json")
    _write_atomic(out, _dump_json(payload))
    print(f"check finished in {elapsed:.3f}s", file=sys.stderr)
    print(f"wrote {out}")
    ok = report.supersolution_ok and report.subsolution_ok and cross.disagreements == 0
    if not ok:
        raise NumericsError(
            "dual residual audit failed: "
            f"supersolution {report.supersolution_residual:g}, "
            f"subsolution {report.subsolution_residual:g}, "
            f"disagreements {cross.disagreements} (tolerance {tol:g})"
        )
    print(
        f"dual audit passed: supersolution {report.supersolution_residual:g} >= {-tol:g}, "
        f"subsolution {report.subsolution_residual:g} <= {tol:g}"
    )
    return 0


def _read_lattice_csv(path: str):
    try:
        with open(path) as handle:
            lines = handle.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read table: {exc}") from exc
    if not lines:
        raise ConfigError("empty table")
    header = lines[0].split(",")
    if len(header) < 2 or header[-1] != "w":
        raise ConfigError("last column must be named 'w'")
    dim = len(header) - 1
    prefixes = {name.rsplit("_", 1)[0] for name in header[:-1]}
    if len(prefixes) != 1 or header[:-1] not in (
        [f"p_{i + 1}" for i in range(dim)],
        [f"q_{i + 1}" for i in range(dim)],
    ):
        raise ConfigError("coordinate columns must be p_1..p_d or q_1..q_d in order")
    rows = []
    for line in lines[1:]:
        if not line:
            continue
        cells = line.split(",")
        if len(cells) != dim + 1:
            raise ConfigError(f"row has {len(cells)} cells, expected {dim + 1}")
        rows.append([float(c) for c in cells])
    if not rows:
        raise ConfigError("table has no data rows")
    return header, dim, np.array(rows)


def _match_lattice(dim: int, table: np.ndarray):
    count = table.shape[0]
    resolution = None
    for n in range(1, 100_000):
        if math.comb(n + dim - 1, dim - 1) == count:
            resolution = n
            break
        if math.comb(n + dim - 1, dim - 1) > count:
            break
    if resolution is None:
        raise ConfigError(f"{count} rows do not form a complete simplex lattice")
    grid = build_grid(dim, resolution)
    order = np.full(grid.npoints, -1, dtype=int)
    for r, row in enumerate(table[:, :dim]):
        nums = np.rint(row * resolution).astype(int)
        if nums.sum() != resolution or np.any(nums < 0):
            raise ConfigError(f"row {r + 1} is not a lattice point at resolution {resolution}")
        if np.max(np.abs(row - nums / resolution)) > 1e-9:
            raise ConfigError(f"row {r + 1} deviates from the lattice at resolution {resolution}")
        idx = grid.index_of(tuple(int(v) for v in nums))
        if order[idx] != -1:
            raise ConfigError(f"duplicate lattice point in row {r + 1}")
        order[idx] = r
    return grid, order


def _cmd_convexify(args) -> int:
    header, dim, table = _read_lattice_csv(args.table)
    grid, order = _match_lattice(dim, table)
    values = table[order, dim]
    if args.mode == "vex":
        env = vex_p(grid, values)
    else:
        env = cav_q(grid, values)
    lines = [",".join(header)]
    for k in range(grid.npoints):
        cells = [repr(float(v)) for v in grid.points[k]]
        cells.append(repr(float(env[k])))
        lines.append(",".join(cells))
    _write_atomic(args.out, "\n".join(lines) + "\n")
    print(f"wrote {args.out}")
    return 0


def _cmd_oracle(args) -> int:
    cfg, cfg_sha = _load_config(args.config, args.preset)
    resolved = resolved_config(cfg)
    model = model_from_config(cfg)
    x0 = np.asarray(_float_list(args.x0), dtype=float) if args.x0 else np.zeros(model.state_dim)
    tree = TreeGame(model=model, x0=x0, t0=args.t0, steps=args.steps, h=args.h)
    grid = build_grid(model.u_types, args.np)
    started = time.perf_counter()
    res = one_sided_recursion(tree, grid)
    elapsed = time.perf_counter() - started
    payload = {
        "config": resolved,
        "config_sha256": cfg_sha,
        "x0": x0,
        "t0": args.t0,
        "steps": args.steps,
        "h": args.h,
        "p_resolution": args.np,
        "p_points": grid.points,
        "values": res.values,
    }
    path = args.out if args.out.endswith(".json") else os.path.join(args.out, "oracle.json")
    _write_atomic(path, _dump_json(payload))
    print(f"oracle finished in {elapsed:.3f}s", file=sys.stderr)
    print(f"wrote {path}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="infogame",
        description="Grid solver and simulator for zero-sum differential games "
        "with asymmetric information",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common_cfg = argparse.ArgumentParser(add_help=False)
    common_cfg.add_argument("--config", help="path to a model config JSON file")
    common_cfg.add_argument("--preset", help="named built-in game preset")

    p_solve = sub.add_parser("solve", parents=[common_cfg], help="run the grid solver")
    p_solve.add_argument("--out", required=True, help="output directory")
    p_solve.add_argument("--nx", type=int, default=81, help="state nodes per axis")
    p_solve.add_argument("--bounds", type=float, nargs=2, default=(-2.0, 2.0),
                         metavar=("LO", "HI"), help="state box per axis")
    p_solve.add_argument("--np", type=int, default=8, help="p lattice resolution")
    p_solve.add_argument("--nq", type=int, default=8, help="q lattice resolution")
    p_solve.add_argument("--steps", type=int, required=True, help="number of time steps")
    p_solve.add_argument("--t0", type=float, default=0.0, help="start of the solved span")
    p_solve.add_argument("--cfl", type=float, default=0.5, help="CFL safety factor")
    p_solve.add_argument("--seed", type=int, default=0, help="seed for the order-exchange audit")
    p_solve.add_argument("--isaacs-samples", type=int, default=1000,
                         help="sampled queries in the order-exchange audit")
    p_solve.set_defaults(func=_cmd_solve)

    p_sim = sub.add_parser("simulate", parents=[common_cfg], help="Monte Carlo play")
    p_sim.add_argument("--out", required=True, help="output directory or .json path")
    p_sim.add_argument("--p", help="comma-separated belief over u types")
    p_sim.add_argument("--q", help="comma-separated belief over v types")
    p_sim.add_argument("--x0", help="comma-separated start state")
    p_sim.add_argument("--t0", type=float, default=0.0)
    p_sim.add_argument("--h", type=float, required=True, help="simulation step")
    p_sim.add_argument("--delta", type=int, default=1, help="response cell length in steps")
    p_sim.add_argument("--samples", type=int, default=1000)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--noise", choices=("gaussian", "rademacher"), default="gaussian")
    p_sim.add_argument("--strategy", default="constant:0",
                       help="both sides: constant[:k], cycle, feedback:<solve dir>")
    p_sim.add_argument("--strategy-u", default=None, help="override for the minimizer")
    p_sim.add_argument("--strategy-v", default=None, help="override for the maximizer")
    p_sim.set_defaults(func=_cmd_simulate)

    p_check = sub.add_parser("check", help="dual residual audit of a solve directory")
    p_check.add_argument("--solve", required=True, help="directory written by solve")
    p_check.add_argument("--out", default=None, help="report path (default: check.json in the solve dir)")
    p_check.add_argument("--tol", type=float, default=None)
    p_check.add_argument("--max-checks", type=int, default=10_000)
    p_check.set_defaults(func=_cmd_check)

    p_vex = sub.add_parser("convexify", help="envelope of a tabulated lattice function")
    p_vex.add_argument("--table", required=True, help="CSV with columns p_1..p_d,w")
    p_vex.add_argument("--out", required=True, help="output CSV path")
    p_vex.add_argument("--mode", choices=("vex", "cav"), required=True)
    p_vex.set_defaults(func=_cmd_convexify)

    p_oracle = sub.add_parser("oracle", parents=[common_cfg],
                              help="exact informed-minimizer tree recursion")
    p_oracle.add_argument("--out", required=True, help="output directory or .json path")
    p_oracle.add_argument("--steps", type=int, required=True, help="tree depth")
    p_oracle.add_argument("--h", type=float, required=True, help="tree step size")
    p_oracle.add_argument("--np", type=int, default=8, help="p lattice resolution")
    p_oracle.add_argument("--x0", help="comma-separated start state")
    p_oracle.add_argument("--t0", type=float, default=0.0)
    p_oracle.set_defaults(func=_cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericsError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except Exception:  # pragma: no cover - defensive
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
