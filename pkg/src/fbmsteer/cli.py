"""Command-line front end: ``fbmsteer {check,steer,mc,fbm}``.

Exit codes: 0 ok, 1 config error, 2 a hypothesis verdict is false,
3 non-convergence.  Artifacts are written even when a run fails.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import multiprocessing
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, load_config
from .control import SteeringDivergence, gramian, steer
from .fbm import derive_seed, sample_qfbm
from .model import hypothesis_report
from .solver import Grid, NeutralNonContraction

EXIT_OK, EXIT_CONFIG, EXIT_VERDICT, EXIT_DIVERGED = 0, 1, 2, 3

SCHEMA_TEXT = """\
trajectory.csv  time, side, x_1 .. x_N
                one 'left' row per grid node; an extra 'right' row at each
                impulse node holds the post-jump state
control.csv     time, u_1 .. u_N, cum_energy
                u on [time, next time); cum_energy = ∫_0^time |u|^2
paths.csv       path_id, seed, terminal_error_sq, energy, outer_iters, status
                status is converged | not_converged | neutral_failure
fbm.csv         time, B_1 .. B_N   (Q-fBm coordinates, sqrt(lambda_n) scaled)
summary.json    steer: the run record; mc: aggregate statistics over
                converged paths plus constants, verdicts and failures
check.json      constants, nu, cond32, example condition, verdicts
Floats are written with 17 significant digits.
"""


def _fmt(x) -> str:
    return "%.17g" % x


def _write_csv(path: Path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in r])
    path.write_text(buf.getvalue(), encoding="utf-8")


def _json_ready(obj):
    if isinstance(obj, dict):
        return {str(k): _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _json_ready(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _write_json(path: Path, data):
    path.write_text(json.dumps(_json_ready(data), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _out_dir(cfg: ExperimentConfig, out) -> Path:
    d = Path(out if out is not None else cfg.output["directory"])
    d.mkdir(parents=True, exist_ok=True)
    return d


# ------------------------------------------------------------------ check

def run_check(cfg: ExperimentConfig, out=None, stream=None):
    """Audit the hypotheses; returns (report dict, exit code)."""
    spec = cfg.build_spec()
    rep = hypothesis_report(spec)
    data = rep.as_dict()
    c = data["constants"]
    lines = ["constants:"]
    lines += [f"  {k:<14} {_fmt(v)}" for k, v in c.items()]
    lines.append(f"nu             {_fmt(c['nu'])}")
    lines.append(f"cond32         {_fmt(c['cond32'])}")
    lines.append(f"example_cond   {_fmt(c['example_cond'])}")
    lines.append("verdicts:")
    lines += [f"  {k:<26} {'true' if v else 'false'}" for k, v in rep.verdicts.items()]
    print("\n".join(lines), file=stream or sys.stdout)
    if out is not None:
        _write_json(_out_dir(cfg, out) / "check.json", data)
    return data, EXIT_OK if rep.all_true else EXIT_VERDICT


# ------------------------------------------------------------------ steer

@dataclass
class _Setup:
    cfg: ExperimentConfig
    spec: object
    grid: Grid
    noise_grid: np.ndarray
    x1: np.ndarray
    tol: float
    gram: object


def _setup(cfg: ExperimentConfig) -> _Setup:
    spec = cfg.build_spec()
    grid = Grid.for_spec(spec, cfg.solver["dt"])
    ndt = cfg.solver["noise_dt"] or grid.dt
    ratio = grid.dt / ndt
    if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
        raise ConfigError("solver.noise_dt must divide solver.dt")
    noise_grid = np.arange(grid.n_steps * int(round(ratio)) + 1) * (spec.horizon / (grid.n_steps * round(ratio)))
    x1 = cfg.target(spec)
    return _Setup(cfg, spec, grid, noise_grid, x1, cfg.steer_tol(x1),
                  gramian(spec, grid, cfg.control["ridge_epsilon"]))


def _backend_name(cfg):
    b = cfg.solver["backend"]
    return None if b == "auto" else b


def _steer_one(st: _Setup, seed: int):
    """One steering run; returns (record, SteeringResult or None)."""
    cfg, spec = st.cfg, st.spec
    noise = None if spec.noise_free else spec.sample_noise(st.noise_grid, seed, cfg.solver["noise_method"])
    rec = {"seed": int(seed)}
    try:
        res = steer(spec, st.x1, noise, st.grid, steer_tol=st.tol, max_outer=cfg.control["max_outer"],
                    gram=st.gram, inner_tol=cfg.solver["inner_tol"], max_inner=cfg.solver["max_inner"],
                    backend=_backend_name(cfg))
        status = "converged"
    except SteeringDivergence as exc:
        res = exc.result
        status = "not_converged"
    except NeutralNonContraction as exc:
        rec.update(status="neutral_failure", reason=str(exc), terminal_error_sq=math.nan,
                   energy=math.nan, outer_iters=0, converged=False, regularized=False,
                   error_history=[])
        return rec, None
    unreach = res.unreachable
    rec.update(
        status=status, converged=res.converged, terminal_error_sq=res.terminal_error_sq,
        energy=res.energy, outer_iters=res.outer_iters, regularized=res.regularized,
        error_history=list(res.error_history), steer_tol=st.tol,
        unreachable_norm=float(np.linalg.norm(unreach)) if unreach is not None else 0.0,
    )
    return rec, res


def _write_run(out: Path, st: _Setup, res):
    n = st.spec.n_modes
    traj = res.traj
    rows = []
    imp = set(traj.impulse_nodes)
    for j, t in enumerate(traj.times):
        rows.append([float(t), "left", *map(float, traj.left[j])])
        if j in imp:
            rows.append([float(t), "right", *map(float, traj.right[j])])
    _write_csv(out / "trajectory.csv", ["time", "side", *[f"x_{i}" for i in range(1, n + 1)]], rows)
    u = res.u
    cum = u.cumulative_energy
    _write_csv(out / "control.csv", ["time", *[f"u_{i}" for i in range(1, n + 1)], "cum_energy"],
               [[float(t), *map(float, u.values[j]), float(cum[j])] for j, t in enumerate(u.times)])


def run_steer(cfg: ExperimentConfig, seed: int | None = None, out=None):
    """Single steering experiment; returns (record, exit code)."""
    st = _setup(cfg)
    master = cfg.mc["master_seed"] if seed is None else seed
    rec, res = _steer_one(st, derive_seed(master, 0))
    d = _out_dir(cfg, out)
    if res is not None:
        _write_run(d, st, res)
    _write_json(d / "summary.json", rec)
    return rec, EXIT_OK if rec["status"] == "converged" else EXIT_DIVERGED


# --------------------------------------------------------------------- mc

@dataclass
class McSummary:
    n_paths: int
    n_converged: int
    mean_terminal_error_sq: float
    median_terminal_error_sq: float
    max_terminal_error_sq: float
    mean_energy: float
    mean_outer_iters: float
    nu: float
    cond32: float
    example_cond: float
    verdicts: dict
    failures: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return dict(self.__dict__)


_MC_SETUP: _Setup | None = None


def _mc_worker(args):
    path_id, seed = args
    rec, _ = _steer_one(_MC_SETUP, seed)
    return path_id, rec


def _mc_records(st: _Setup, seeds, jobs: int):
    global _MC_SETUP
    _MC_SETUP = st
    tasks = list(enumerate(seeds))
    try:
        if jobs > 1 and len(tasks) > 1:
            ctx = multiprocessing.get_context("fork")
            with ctx.Pool(min(jobs, len(tasks))) as pool:
                done = pool.map(_mc_worker, tasks, chunksize=1)
        else:
            done = [_mc_worker(t) for t in tasks]
    finally:
        _MC_SETUP = None
    done.sort(key=lambda r: r[0])
    return [r for _, r in done]


def run_mc(cfg: ExperimentConfig, seed: int | None = None, out=None, jobs: int | None = None):
    """n_paths steering runs with seeds derive_seed(master, path_id)."""
    st = _setup(cfg)
    master = cfg.mc["master_seed"] if seed is None else seed
    n_paths = cfg.mc["n_paths"]
    seeds = [derive_seed(master, i) for i in range(n_paths)]
    recs = _mc_records(st, seeds, jobs or cfg.mc["jobs"])

    d = _out_dir(cfg, out)
    _write_csv(d / "paths.csv", ["path_id", "seed", "terminal_error_sq", "energy", "outer_iters", "status"],
               [[i, r["seed"], float(r["terminal_error_sq"]), float(r["energy"]), r["outer_iters"], r["status"]]
                for i, r in enumerate(recs)])

    ok = [r for r in recs if r["status"] == "converged"]
    err = np.array([r["terminal_error_sq"] for r in ok])
    en = np.array([r["energy"] for r in ok])
    it = np.array([r["outer_iters"] for r in ok])

    def stat(fn, a):
        return float(fn(a)) if a.size else math.nan

    rep = hypothesis_report(st.spec)
    c = rep.constants
    summary = McSummary(
        n_paths=n_paths, n_converged=len(ok),
        mean_terminal_error_sq=stat(np.mean, err), median_terminal_error_sq=stat(np.median, err),
        max_terminal_error_sq=stat(np.max, err), mean_energy=stat(np.mean, en),
        mean_outer_iters=stat(np.mean, it), nu=c.nu, cond32=c.cond32, example_cond=c.example_cond,
        verdicts=dict(rep.verdicts),
        failures=[{"path_id": i, "seed": r["seed"], "status": r["status"],
                   "reason": r.get("reason", f"error history {r['error_history']}")}
                  for i, r in enumerate(recs) if r["status"] != "converged"],
    )
    _write_json(d / "summary.json", summary.as_dict())
    return summary, recs, EXIT_OK if not summary.failures else EXIT_DIVERGED


# -------------------------------------------------------------------- fbm

def run_fbm(cfg: ExperimentConfig, seed: int | None = None, out=None):
    """Sample the configured Q-fBm on the noise grid and write fbm.csv."""
    spec = cfg.build_spec()
    ndt = cfg.solver["noise_dt"] or cfg.solver["dt"]
    n = int(round(spec.horizon / ndt))
    grid = np.arange(n + 1) * (spec.horizon / n)
    master = cfg.mc["master_seed"] if seed is None else seed
    path = sample_qfbm(spec.noise_spec, grid, derive_seed(master, 0), cfg.solver["noise_method"])
    d = _out_dir(cfg, out)
    _write_csv(d / "fbm.csv", ["time", *[f"B_{i}" for i in range(1, spec.n_modes + 1)]],
               [[float(t), *map(float, path.values[j])] for j, t in enumerate(grid)])
    return path, EXIT_OK


# ------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fbmsteer", description=__doc__.splitlines()[0])
    p.add_argument("command", nargs="?", choices=["check", "steer", "mc", "fbm"])
    p.add_argument("--config", help="INI experiment file")
    p.add_argument("--seed", type=int, help="override mc.master_seed")
    p.add_argument("--out", help="output directory (default: output.directory)")
    p.add_argument("--jobs", type=int, help="parallel paths for mc")
    p.add_argument("--schema", action="store_true", help="print the CSV column layout and exit")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.schema:
        print(SCHEMA_TEXT, end="")
        return EXIT_OK
    if args.command is None or args.config is None:
        print("error: a command and --config are required", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config)
        if args.command == "check":
            return run_check(cfg, out=args.out if args.out else cfg.output["directory"])[1]
        if args.command == "steer":
            rec, code = run_steer(cfg, args.seed, args.out)
            print(json.dumps(_json_ready({k: rec[k] for k in ("status", "terminal_error_sq", "energy", "outer_iters")})))
            return code
        if args.command == "mc":
            summ, _, code = run_mc(cfg, args.seed, args.out, args.jobs)
            print(json.dumps(_json_ready({"n_paths": summ.n_paths, "n_converged": summ.n_converged,
                                          "mean_terminal_error_sq": summ.mean_terminal_error_sq})))
            return code
        return run_fbm(cfg, args.seed, args.out)[1]
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        # spec-level validation failures surface as configuration problems
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
