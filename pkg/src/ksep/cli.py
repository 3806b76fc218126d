"""Command-line entry point.

Every run writes one directory (``--out``) holding ``manifest.json``,
``results.csv`` and ``reports/*.json``.  The exit status is 0 when every
check of the run passes, 1 when one fails, 2 for configuration errors and
3 when a resource guard trips.

results.csv columns per subcommand:

simulate      replica, t, sim_time, L, m, position, rescaled
fit           test, t, statistic, threshold, passed
trend         t, ks_distance
verify-exact  check, index, slack, passed
intensity     t, y, K, sum, step, rel_error, passed
kappa-tau     t, kappa, tau, quad_error, truncation_error

The thread count comes from ``--threads``, else the ``KSEP_THREADS``
environment variable, else 1; it never changes the numbers produced.
"""
from __future__ import annotations

import argparse
import csv
import datetime
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import analytics, exactsg, experiments, stats
from .config import ExperimentConfig, load_config
from .errors import ConfigError, ResourceExceeded
from .scaling import make_time_map

SCHEMA_VERSION = 1
COMMANDS = ("simulate", "verify-exact", "intensity", "kappa-tau", "fit", "trend")


def _clean(obj):
    """JSON-safe copy: non-finite floats become strings, numpy scalars become Python."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    if hasattr(obj, "to_dict"):
        return _clean(obj.to_dict())
    if hasattr(obj, "numerator") and hasattr(obj, "denominator") and not isinstance(obj, int):
        return str(obj)
    return obj


class RunDir:
    def __init__(self, root: Path):
        self.root = Path(root)
        (self.root / "reports").mkdir(parents=True, exist_ok=True)

    def report(self, name: str, payload) -> None:
        with open(self.root / "reports" / f"{name}.json", "w") as fh:
            json.dump(_clean(payload), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def results(self, header, rows) -> None:
        with open(self.root / "results.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for r in rows:
                w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])

    def manifest(self, payload: dict) -> None:
        with open(self.root / "manifest.json", "w") as fh:
            json.dump(_clean(payload), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _threads(arg: int | None) -> int:
    if arg is not None:
        return max(1, arg)
    env = os.environ.get("KSEP_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError("KSEP_THREADS", f"expected an integer, got {env!r}") from None
    return 1


# --- subcommands ---------------------------------------------------------------

def _grid(cfg: ExperimentConfig, threads: int) -> experiments.GridRun:
    return experiments.simulate_grid(cfg.kernel, cfg.profile, cfg.times, cfg.rule, cfg.replicas,
                                     cfg.seed, threads=threads, keep=cfg.keep, target=cfg.target)


def cmd_simulate(cfg: ExperimentConfig, out: RunDir, threads: int):
    run = _grid(cfg, threads)
    rows = []
    summary = {}
    for t in run.times:
        vm = run.vmap(t)
        top = run.top[t]
        for i in range(top.shape[0]):
            for m in range(min(cfg.ranks + 1, top.shape[1])):
                x = top[i, m]
                if not math.isfinite(x):
                    break
                rows.append([i, t, t / run.K, run.L[t], m, int(x), float(vm.forward(x))])
        v0 = vm.forward(top[:, 0])
        summary[repr(t)] = {"L": run.L[t], "mean_rescaled_top": float(np.mean(v0)),
                            "mean_events": float(np.mean(run.events[t])),
                            "particles": int(run.totals[t][0]), "map": vm.to_dict()}
    out.results(["replica", "t", "sim_time", "L", "m", "position", "rescaled"], rows)
    out.report("simulate", summary)
    return True, run.manifest()


def cmd_trend(cfg: ExperimentConfig, out: RunDir, threads: int):
    run = _grid(cfg, threads)
    tol = cfg.tolerances
    per_t, trend = experiments.gumbel_trend(run, tol["band"], tol["cap"], tol["level"])
    stats.write_trend_csv(out.root / "results.csv", {t: r.statistic for t, r in per_t.items()},
                          "ks_distance")
    out.report("trend", {"trend": trend, "per_t": {repr(t): r for t, r in per_t.items()}})
    return trend["passed"], run.manifest()


def cmd_fit(cfg: ExperimentConfig, out: RunDir, threads: int):
    run = _grid(cfg, threads)
    tol = cfg.tolerances
    results = []
    per_t, _ = experiments.gumbel_trend(run, tol["band"], tol["cap"], tol["level"])
    for t, r in per_t.items():
        # the fit verdict is the KS test at the configured level
        d = stats.ks_test(np.where(np.isfinite(run.rescaled_top(t)), run.rescaled_top(t), -1e300),
                          lambda x: stats.gumbel_cdf(run.gumbel_c(), x), tol["level"],
                          name=f"gumbel_t={t:g}")
        results.append((t, d))
    t_last = run.times[-1]
    results.append((t_last, experiments.count_test(run, t_last, cfg.count_intervals,
                                                   tol["ratio_band"], tol["corr_band"],
                                                   tol["mean_rel"])))
    results.append((t_last, experiments.mean_count_test(run, t_last, cfg.mean_set,
                                                        rel_tol=tol["mean_rel"])))
    for name, r in experiments.spacing_tests(run, t_last, (1, 2), tol["level"]).items():
        results.append((t_last, r))
    out.results(["test", "t", "statistic", "threshold", "passed"],
                [[r.name, t, r.statistic, r.threshold, r.passed] for t, r in results])
    for t, r in results:
        out.report(r.name, r)
    return all(r.passed for _, r in results), run.manifest()


def cmd_verify_exact(cfg: ExperimentConfig, out: RunDir, threads: int):
    reports = exactsg.default_suite(cfg.exact_seed, cfg.exact_instances)
    tol = cfg.tolerances["bound_tol"]
    bounds = [("kappa_bound", r) for r in analytics.kappa_bound_suite(cfg.kernel)]
    bounds += [("tau_bound", r) for r in analytics.tau_bound_suite(cfg.kernel)]
    rows, grouped = [], {}
    for r in reports:
        grouped.setdefault(r.name, []).append(r)
    for name, group in grouped.items():
        for i, r in enumerate(group):
            rows.append([name, i, float(r.slack), r.passed])
        out.report(name, group)
    for name in ("kappa_bound", "tau_bound"):
        group = [r for n, r in bounds if n == name]
        for i, r in enumerate(group):
            rows.append([name, i, float(r["rhs"] - r["lhs"]), r["lhs"] <= r["rhs"] + tol])
        out.report(name, group)
    out.results(["check", "index", "slack", "passed"], rows)
    manifest = {"kernel": cfg.kernel.to_dict(), "exact_seed": cfg.exact_seed,
                "instances": cfg.exact_instances, "checks": len(rows)}
    return all(r[3] for r in rows), manifest


def cmd_intensity(cfg: ExperimentConfig, out: RunDir, threads: int):
    res = analytics.route_agreement(cfg.kernel, cfg.K, cfg.intensity_points,
                                    cfg.tolerances["route_rel"])
    out.results(["t", "y", "K", "sum", "step", "rel_error", "passed"],
                [[r["t"], r["y"], r["K"], r["sum"], r["step"], r["rel_error"], r["holds"]]
                 for r in res])
    out.report("intensity_routes", res)
    return all(r["holds"] for r in res), {"kernel": cfg.kernel.to_dict(), "K": cfg.K}


def cmd_kappa_tau(cfg: ExperimentConfig, out: RunDir, threads: int):
    sigma = cfg.kernel.sigma
    reports = {}
    for t in sorted(cfg.kt_times):
        vm = make_time_map(sigma, t)
        A = analytics.IntervalUnion.disjoint(cfg.kt_A).preimage(vm)
        reports[t] = analytics.kappa_tau(cfg.kernel, t, A, cfg.kt_B)
    out.results(["t", "kappa", "tau", "quad_error", "truncation_error"],
                [[t, r.kappa, r.tau, r.quad_error, r.truncation_error] for t, r in reports.items()])
    ks = [r.kappa for r in reports.values()]
    tail = ks[-3:]
    decreasing = all(b < a for a, b in zip(tail, tail[1:]))
    out.report("kappa_tau", {"by_t": {repr(t): r for t, r in reports.items()},
                             "decreasing_last_three": decreasing})
    ok = decreasing or not cfg.tolerances["check_decay"]
    return ok, {"kernel": cfg.kernel.to_dict(), "times": sorted(cfg.kt_times),
                "A_rescaled": cfg.kt_A, "B": cfg.kt_B}


HANDLERS = {"simulate": cmd_simulate, "verify-exact": cmd_verify_exact,
            "intensity": cmd_intensity, "kappa-tau": cmd_kappa_tau, "fit": cmd_fit,
            "trend": cmd_trend}


def _common(default) -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=default,
                        help="INI config file; defaults apply when omitted")
    common.add_argument("--seed", type=int, default=default, help="override experiment.seed")
    common.add_argument("--threads", type=int, default=default,
                        help="worker threads (default: $KSEP_THREADS or 1)")
    common.add_argument("--out", type=Path, default=default, help="output directory")
    return common


def build_parser() -> argparse.ArgumentParser:
    # flags are accepted before or after the subcommand; the subcommand copy
    # must not overwrite a value given before it
    p = argparse.ArgumentParser(prog="ksep", description="K-SEP simulation and exact checks",
                                parents=[_common(None)])
    common = _common(argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", required=True)
    helps = {"simulate": "sample rescaled order statistics over the time grid",
             "verify-exact": "finite-state semigroup and moment checks",
             "intensity": "two-route intensity agreement for the full step",
             "kappa-tau": "correlation error functionals over a time grid",
             "fit": "hypothesis tests against the limit laws",
             "trend": "Gumbel KS distance along the time grid"}
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.with_seed(args.seed)
        threads = _threads(args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = RunDir(args.out or Path(f"ksep-{args.command}-seed{cfg.seed}"))
    try:
        ok, extra = HANDLERS[args.command](cfg, out, threads)
    except ResourceExceeded as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return 3
    out.manifest({"schema_version": SCHEMA_VERSION, "command": args.command,
                  "config_path": cfg.path, "config": cfg.raw, "seed": cfg.seed,
                  "threads": threads, "passed": bool(ok),
                  "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
                  "run": extra})
    print(f"{args.command}: {'ok' if ok else 'FAILED'} -> {out.root}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
