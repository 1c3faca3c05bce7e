"""``levydim`` command line: hit, dim, simulate, estimate, selftest.

Every command appends one JSON record to ``<out>/reports.jsonl`` and writes
CSV side files (shells, trails, box counts) next to it.

Exit codes: 0 success / converges, 10 diverges, 20 inconclusive, 1 error,
2 monotonicity violation in ``dim``, 3 unsupported exponent in ``simulate``.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from pathlib import Path
from statistics import median

import numpy as np

from . import __version__
from .boxcount import EpsRule, box_count_dimension, multiple_time_boxes, zero_set_boxes
from .checks import all_suites
from .config import ConfigError, RunConfig, load_config
from .criteria import integral_verdict, hitting_integrand
from .exponents import ExponentError, homogeneity_degree
from .samplefile import SampleFileError, read_sample, write_sample
from .simulation import (
    UnsupportedExponentError,
    rng_stream,
    simulate_copies,
    simulate_field,
    simulate_saturated_subordinator,
    simulate_subordinator,
)
from .solver import MonotonicityError, solve_dimension

log = logging.getLogger("levydim")

REPORT_SCHEMA = "levydim.report/1"
EXIT_OK, EXIT_ERROR, EXIT_MONOTONE, EXIT_UNSUPPORTED = 0, 1, 2, 3
VERDICT_EXIT = {"converges": 0, "diverges": 10, "inconclusive": 20}


def _write_csv(path: Path, header, rows):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return str(path)


class Run:
    """Bookkeeping shared by the commands: output dir, report and side files."""

    def __init__(self, command: str, cfg: RunConfig):
        self.command = command
        self.cfg = cfg
        self.out = Path(cfg.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.hash = cfg.config_hash()
        self.started = time.time()
        self.files = []

    def side_file(self, stem: str, header, rows) -> str:
        path = self.out / f"{self.command}_{self.hash[:12]}_{stem}.csv"
        self.files.append(_write_csv(path, header, rows))
        return str(path)

    def report(self, payload: dict, exit_code: int) -> dict:
        record = {
            "schema": REPORT_SCHEMA,
            "version": __version__,
            "command": self.command,
            "config_hash": self.hash,
            "seed": self.cfg.seed,
            "problem_hash": self.cfg.problem.spec_hash(),
            "hypothesis_flags": dict(self.cfg.hypotheses),
            "exit_code": exit_code,
            "payload": payload,
            "files": self.files,
            "timing": {"started_unix": self.started, "elapsed_s": time.time() - self.started},
        }
        with (self.out / "reports.jsonl").open("a") as fh:
            fh.write(json.dumps(record, sort_keys=True, default=_jsonable) + "\n")
        return record


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"{type(obj).__name__} is not JSON serialisable")


def cmd_hit(cfg: RunConfig):
    run = Run("hit", cfg)
    problem = cfg.problem.build(cfg.hypotheses)
    verdict, profile = integral_verdict(hitting_integrand(problem.criterion_spec), cfg.shell_options())
    run.side_file("shells", ["m", "S_m", "se_m"], profile.rows())
    payload = {"verdict": verdict.to_dict(), "head": profile.head, "head_se": profile.head_se,
               "samples_per_shell": profile.samples_per_shell}
    code = VERDICT_EXIT[verdict.kind]
    return run.report(payload, code), code


def cmd_dim(cfg: RunConfig):
    run = Run("dim", cfg)
    problem = cfg.problem.build(cfg.hypotheses)
    try:
        result = solve_dimension(problem, cfg.solver_options())
    except MonotonicityError as exc:
        partial = exc.result
        run.side_file("trail", ["beta", "slope", "slope_se", "verdict"], partial.trail_rows())
        payload = {"error": str(exc), "violating_pair": list(exc.pair), "result": partial.to_dict()}
        return run.report(payload, EXIT_MONOTONE), EXIT_MONOTONE
    bis = result if result.method == "bisection" else result.cross_check
    if bis is not None:
        run.side_file("trail", ["beta", "slope", "slope_se", "verdict"], bis.trail_rows())
    payload = {"result": result.to_dict()}
    if result.cross_check is not None:
        payload["agreement"] = abs(result.beta_star - result.cross_check.beta_star)
    return run.report(payload, EXIT_OK), EXIT_OK


def cmd_simulate(cfg: RunConfig):
    run = Run("simulate", cfg)
    sim = cfg.simulate
    h = sim.T * 2.0 ** -sim.mesh
    ext = "bin" if sim.format == "bin" else "csv"
    samples_dir = run.out / "samples"
    samples_dir.mkdir(exist_ok=True)
    stem = f"{sim.target}_{run.hash[:12]}"
    problem_hash = cfg.problem.spec_hash()
    payload = {"target": sim.target, "problem_hash": problem_hash, "seed": cfg.seed, "mesh": h,
               "T": sim.T, "sample_files": []}
    files = payload["sample_files"]
    try:
        if sim.target == "field":
            problem = cfg.problem.build(cfg.hypotheses)
            for p in range(sim.paths):
                if problem.kind == "level_set":
                    fs = simulate_field(problem.spec, sim.T, h, cfg.seed, shard=p)
                    path = samples_dir / f"{stem}_p{p}.{ext}"
                    files.append(str(write_sample(fs, path, sim.format, problem_hash=problem_hash,
                                                  path_index=p, copies=1, copy_index=0)))
                else:
                    copies = simulate_copies(list(problem.psis), problem.k, sim.T, h, cfg.seed, shard=p)
                    for j, fs in enumerate(copies):
                        path = samples_dir / f"{stem}_p{p}_c{j}.{ext}"
                        files.append(str(write_sample(fs, path, sim.format, problem_hash=problem_hash,
                                                      path_index=p, copies=problem.k, copy_index=j)))
        elif sim.target == "subordinator":
            if sim.alpha is None:
                raise ConfigError("simulate.alpha is required for subordinator paths")
            t_grid = h * np.arange(2 ** sim.mesh + 1)
            monotone = True
            for p in range(sim.paths):
                sp = simulate_subordinator(sim.alpha, t_grid, rng_stream(cfg.seed, "subordinator", p), cfg.seed)
                monotone &= bool(np.all(np.diff(sp.values) >= 0))
                path = samples_dir / f"{stem}_p{p}.{ext}"
                files.append(str(write_sample(sp, path, sim.format, path_index=p)))
            payload["nondecreasing"] = monotone
        else:
            payload["laplace_check"] = _saturated_check(cfg)
    except UnsupportedExponentError as exc:
        payload["error"] = str(exc)
        return run.report(payload, EXIT_UNSUPPORTED), EXIT_UNSUPPORTED
    code = EXIT_OK
    if sim.target == "saturated" and not all(r["pass"] for r in payload["laplace_check"]):
        code = EXIT_ERROR
    return run.report(payload, code), code


def _saturated_check(cfg: RunConfig) -> list:
    """Joint Laplace transform of the saturated subordinator against its product form."""
    sim = cfg.simulate
    if sim.alpha is None or sim.t is None:
        raise ConfigError("simulate.alpha and simulate.t are required for the saturated subordinator")
    t = np.asarray(sim.t, dtype=float)
    N = t.size
    draws = simulate_saturated_subordinator(sim.alpha, N, t, rng_stream(cfg.seed, "saturated"), sim.samples)
    rows = []
    for lam in sim.laplace_points:
        lam_vec = np.full(N, float(lam))
        y = np.exp(-draws @ lam_vec)
        est, se = float(y.mean()), float(y.std(ddof=1) / math.sqrt(y.size))
        exact = math.exp(-float(t.sum()) * N * lam ** sim.alpha)
        rows.append({"lambda": lam_vec.tolist(), "empirical": est, "se": se, "exact": exact,
                     "pass": abs(est - exact) <= 3 * se})
    return rows


def _group_samples(loaded):
    groups = {}
    for item in loaded:
        key = (item.header.get("path_index", 0), item.header.get("problem_hash"))
        groups.setdefault(key, []).append(item)
    for items in groups.values():
        items.sort(key=lambda it: it.header.get("copy_index", 0))
    return [groups[k] for k in sorted(groups, key=lambda k: (str(k[1]), k[0]))]


def _find_dim_report(path: str, problem_hash):
    found = None
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        if rec.get("command") == "dim" and rec.get("problem_hash") == problem_hash and "result" in rec["payload"]:
            found = rec
    return found


def cmd_estimate(cfg: RunConfig):
    run = Run("estimate", cfg)
    est = cfg.estimate
    if not est.inputs:
        raise SampleFileError("estimate.inputs lists no sample files")
    loaded = [read_sample(p) for p in est.inputs]
    if any(item.header["kind"] != "field" for item in loaded):
        raise SampleFileError("box counting needs field sample files")
    groups = _group_samples(loaded)
    first = groups[0][0].sample
    degree = est.eps_degree
    if degree is None and first.spec is not None:
        degree = homogeneity_degree(first.spec.exponents[0])
    if degree is None:
        raise ConfigError("estimate.eps_degree is required when the sample spec is not homogeneous")
    rule = EpsRule(float(degree), est.eps_c)
    estimates, rows = [], []
    for g, items in enumerate(groups):
        fields_ = [it.sample for it in items]
        if len(fields_) == 1:
            grid = zero_set_boxes(fields_[0], rule, est.levels)
        else:
            grid = multiple_time_boxes(fields_, rule, est.levels)
        e = box_count_dimension(grid)
        estimates.append(e)
        rows += [(g, l, c) for l, c in grid.rows()]
    run.side_file("boxes", ["group", "level", "count"], rows)
    slopes = [e.slope for e in estimates]
    payload = {
        "mode": "zero_set" if len(groups[0]) == 1 else "multiple_times",
        "eps_rule": rule.to_dict(),
        "estimates": [e.to_dict() for e in estimates],
        "median_slope": float(median(slopes)),
        "empty": all(e.empty for e in estimates),
    }
    if est.dim_report:
        problem_hash = groups[0][0].header.get("problem_hash")
        rec = _find_dim_report(est.dim_report, problem_hash)
        if rec is None:
            payload["cross_reference"] = {"found": False}
        else:
            beta = rec["payload"]["result"]["beta_star"]
            gap = abs(payload["median_slope"] - beta)
            payload["cross_reference"] = {"found": True, "beta_star": beta, "difference": gap,
                                          "tolerance": est.tolerance, "discrepancy": gap > est.tolerance}
    return run.report(payload, EXIT_OK), EXIT_OK


def cmd_selftest(cfg: RunConfig):
    run = Run("selftest", cfg)
    results = all_suites(cfg.seed)
    for r in results:
        print(r.line())
    ok = all(r.passed for r in results)
    payload = {"checks": [{"name": r.name, "passed": r.passed, "detail": r.detail} for r in results]}
    code = EXIT_OK if ok else EXIT_ERROR
    return run.report(payload, code), code


COMMANDS = {"hit": cmd_hit, "dim": cmd_dim, "simulate": cmd_simulate, "estimate": cmd_estimate,
            "selftest": cmd_selftest}

SELFTEST_PROBLEM = {"kind": "level_set", "exponents": [{"kind": "brownian_drift", "Q": [[1.0]], "b": [0.0]}]}


def _shell_range(text: str):
    try:
        lo, hi = text.split("..")
        return int(lo), int(hi)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO..HI, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="levydim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, required=(name != "selftest"))
        p.add_argument("--seed", type=int)
        p.add_argument("--beta-tol", type=float)
        p.add_argument("--shells", type=_shell_range, metavar="LO..HI")
        p.add_argument("--samples", type=int)
        p.add_argument("--mesh", type=int, metavar="L", help="grid mesh 2**-L")
        p.add_argument("--out", type=str)
        p.add_argument("--threads", type=int)
        if name == "estimate":
            p.add_argument("--inputs", nargs="+", help="sample files; overrides estimate.inputs")
            p.add_argument("--dim-report", help="reports.jsonl holding a matching dim record")
    return parser


def apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg.seed = args.seed
    if args.beta_tol is not None:
        cfg.solver.beta_tol = args.beta_tol
    if args.shells is not None:
        cfg.shells.m_lo, cfg.shells.m_hi = args.shells
    if args.samples is not None:
        cfg.shells.samples = args.samples
        cfg.simulate.samples = args.samples
    if args.mesh is not None:
        cfg.simulate.mesh = args.mesh
    if args.out is not None:
        cfg.out = args.out
    if args.threads is not None:
        cfg.threads = args.threads
    if getattr(args, "inputs", None):
        cfg.estimate.inputs = list(args.inputs)
    if getattr(args, "dim_report", None):
        cfg.estimate.dim_report = args.dim_report
    return cfg


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.config is None:
            from .config import parse_config
            cfg = parse_config({"problem": SELFTEST_PROBLEM})
        else:
            cfg = load_config(args.config)
        cfg = apply_overrides(cfg, args)
        record, code = COMMANDS[args.command](cfg)
    except (ConfigError, ExponentError, SampleFileError, OSError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_ERROR
    print(json.dumps(record["payload"], sort_keys=True, default=_jsonable))
    return code


if __name__ == "__main__":
    sys.exit(main())
