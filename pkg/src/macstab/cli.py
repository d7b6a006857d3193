"""Command-line entry point: ``macstab {nlen,regions,policy,simulate,capcheck}``.

Every command prints one JSON result record on stdout. Exit codes:
0 success, 2 usage, 3 infeasible/outside region, 4 unreachable reliability,
5 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import coding, regions, sim
from .config import ExperimentConfig, ResultRecord, Timer, load
from .errors import (CapExceeded, DomainError, KBudgetExceeded, MacStabError, OutsideRegion,
                     UnreachableReliability, UnservedQueue)

log = logging.getLogger("macstab")

EXIT_OK, EXIT_USAGE, EXIT_OUTSIDE, EXIT_UNREACHABLE, EXIT_IO = 0, 2, 3, 4, 5


class UsageError(Exception):
    pass


def parse_list(text, cast=float):
    """Parse ``"1,0"`` or ``"1-0"`` style lists."""
    if text is None:
        return None
    sep = "," if "," in text else "-" if cast is int else ","
    try:
        return tuple(cast(v) for v in text.split(sep) if v.strip())
    except ValueError as exc:
        raise UsageError(f"cannot parse list {text!r}") from exc


def _fmt(x):
    return repr(float(x))


def _schedule_str(s):
    return ",".join(str(v) for v in s)


def build_policy(cfg: ExperimentConfig, catalog, target=None):
    if "p" in cfg.policy:
        p = {tuple(e["schedule"]): float(e["prob"]) for e in cfg.policy["p"]}
        demand = cfg.arrivals.means if cfg.arrivals else None
        return regions.split_distribution(p, catalog, demand=demand)
    target = target if target is not None else cfg.target()
    if target is None:
        raise UsageError("policy synthesis needs a target rate (--rate, policy.target or arrivals)")
    return regions.synthesize_policy(target, catalog)


def policy_dict(policy, catalog):
    return {
        "p": [{"schedule": list(s), "prob": w, "N": catalog.lengths[s]}
              for s, w in policy.p.items()],
        "idle": policy.idle,
        "mu": {str(j): [{"schedule": list(s), "prob": m} for s, m in split.items()]
               for j, split in policy.mu.items()},
        "psi": list(regions.psi(policy, catalog).values),
    }


# --- commands -------------------------------------------------------------------

def cmd_nlen(cfg: ExperimentConfig, args) -> dict:
    s = parse_list(args.schedule, int) if args.schedule else (1,) * cfg.coding.J
    if len(s) != cfg.coding.J:
        raise UsageError(f"schedule needs {cfg.coding.J} entries")
    out = {"schedule": list(s)}
    configs = [cfg.coding]
    if cfg.sweep and cfg.sweep.get("param") == "rho":
        configs = [cfg.coding.with_rho(float(r)) for r in cfg.sweep["values"]]
    rows = []
    for c in configs:
        n = coding.codeword_length(c, s)
        lo, hi = coding.length_bounds(c, s)
        rows.append({"rho": c.rho, "N": n, "lower": lo, "upper": hi,
                     "chi_N": coding.chi(c, s, n),
                     "chi_N_minus_1": coding.chi(c, s, n - 1) if n > 1 else None})
    if len(rows) == 1:
        out.update(rows[0])
    else:
        out["sweep"] = rows
    return out


def cmd_regions(cfg: ExperimentConfig, args) -> dict:
    if args.samples < 1:
        raise UsageError("--samples must be positive")
    catalog = regions.enumerate_schedules(cfg.coding.J, cfg.K, cfg.coding)
    J = cfg.coding.J
    P, sigma2 = cfg.coding.P, cfg.coding.sigma2
    if args.direction:
        dirs = [parse_list(args.direction)]
    elif J == 1:
        dirs = [(1.0,)]
    elif J == 2:
        angles = np.linspace(0.0, math.pi / 2, args.samples)
        dirs = [(math.cos(a), math.sin(a)) for a in angles]
    else:
        if args.seed is None:
            raise UsageError("--seed is required for random directions when J > 2")
        rng = np.random.default_rng(args.seed)
        raw = np.abs(rng.standard_normal((args.samples, J)))
        dirs = [tuple(r / np.linalg.norm(r)) for r in raw]
    catalog_rows, boundary_rows = [], []
    for s in catalog.serving:
        rbar = coding.asymptotic_rate(P, sigma2, s)
        catalog_rows.append([_schedule_str(s), catalog.lengths[s],
                             *map(_fmt, catalog.rates[s]), *map(_fmt, rbar)])
    for d in dirs:
        unit = np.asarray(d, dtype=float)
        unit = unit / np.linalg.norm(unit) if np.linalg.norm(unit) > 0 else unit
        r_out = regions.outer_bound_radius(d, catalog)
        r_cap = regions.capacity_radius(d, P, sigma2)
        boundary_rows.append(["R_out", *map(_fmt, unit), _fmt(r_out)])
        boundary_rows.append(["C", *map(_fmt, unit), _fmt(r_cap)])
    try:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, delimiter=";")
            w.writerow(["schedule", "N", *[f"v_{j + 1}" for j in range(J)],
                        *[f"Rbar_{j + 1}" for j in range(J)]])
            w.writerows(catalog_rows)
            w.writerow(["region", *[f"dir_{j + 1}" for j in range(J)], "radius"])
            w.writerows(boundary_rows)
    except OSError as exc:
        raise IOError(exc) from exc
    return {"out": args.out, "schedules": len(catalog.serving), "directions": len(dirs)}


def cmd_policy(cfg: ExperimentConfig, args) -> dict:
    catalog = regions.enumerate_schedules(cfg.coding.J, cfg.K, cfg.coding)
    target = parse_list(args.rate) if args.rate else cfg.target()
    if target is None:
        raise UsageError("no target rate: pass --rate or set policy.target / arrivals")
    if len(target) != cfg.coding.J:
        raise UsageError(f"target needs {cfg.coding.J} entries")
    warnings = []
    if not any(target):
        warnings.append("degenerate target")
        log.warning("degenerate target: all arrival rates are zero")
    policy = regions.synthesize_policy(target, catalog)
    membership = regions.outer_bound_membership(target, catalog)
    out = {"target": list(target), "margin": membership.margin, **policy_dict(policy, catalog)}
    if warnings:
        out["warnings"] = warnings
    return out


def _simulate_one(cfg: ExperimentConfig, horizon, seed, decimation):
    catalog = regions.enumerate_schedules(cfg.coding.J, cfg.K, cfg.coding)
    policy = build_policy(cfg, catalog)
    stats = sim.run(catalog, policy, cfg.arrivals, horizon, seed, decimation=decimation)
    return stats, policy, catalog


def _sweep_configs(cfg: ExperimentConfig):
    out = []
    for values in cfg.sweep["values"]:
        values = values if isinstance(values, (list, tuple)) else [values] * cfg.coding.J
        d = cfg.to_dict()
        if cfg.sweep["param"] == "arrival":
            for a, v in zip(d["arrivals"], values):
                if a["kind"] == "pmf":
                    raise UsageError("arrival sweeps need bernoulli/poisson/deterministic batches")
                a["param"] = v
        else:
            d["coding"]["rho"] = values[0]
        d["sweep"] = None
        out.append(ExperimentConfig.from_dict(d))
    return out


def _sweep_worker(job):
    d, horizon, seed, decimation = job
    stats, _, _ = _simulate_one(ExperimentConfig.from_dict(d), horizon, seed, decimation)
    return stats.summary()


def cmd_simulate(cfg: ExperimentConfig, args) -> dict:
    horizon = args.horizon if args.horizon is not None else cfg.horizon
    seed = args.seed if args.seed is not None else cfg.seed
    if horizon < 1:
        raise UsageError("--horizon must be at least 1")
    if seed is None:
        raise UsageError("simulate requires an explicit --seed (or run.seed in the config)")
    if cfg.arrivals is None:
        raise UsageError("config has no arrivals section")
    if cfg.sweep:
        jobs = [(c.to_dict(), horizon, seed + i, cfg.decimation)
                for i, c in enumerate(_sweep_configs(cfg))]
        if args.jobs > 1:
            with ProcessPoolExecutor(args.jobs) as pool:
                results = list(pool.map(_sweep_worker, jobs))
        else:
            results = [_sweep_worker(j) for j in jobs]
        return {"sweep": cfg.sweep, "runs": results}
    stats, policy, catalog = _simulate_one(cfg, horizon, seed, cfg.decimation)
    out = stats.summary()
    out["arrival_means"] = list(cfg.arrivals.means)
    out["psi"] = list(regions.psi(policy, catalog).values)
    lam = cfg.bandwidth_rates()
    if lam is not None:
        out["lambda"] = lam
    if args.out:
        try:
            with open(args.out, "w", newline="") as fh:
                w = csv.writer(fh, delimiter=";")
                w.writerow(["slot", "backlog", "c"])
                for t, b, c in zip(stats.checkpoints, stats.backlog_series, stats.c_series):
                    w.writerow([int(t), int(b), _fmt(c)])
        except OSError as exc:
            raise IOError(exc) from exc
        out["timeseries"] = args.out
    return out


def cmd_capcheck(cfg: ExperimentConfig, args) -> dict:
    if args.seed is None:
        raise UsageError("capcheck requires an explicit --seed")
    if args.samples < 0:
        raise UsageError("--samples must be non-negative")
    extra = [parse_list(args.rate)] if args.rate else []
    return regions.verify_capacity_interpretation(
        cfg.coding.P, cfg.coding.sigma2, args.samples, args.seed,
        eps=args.eps, k_max=args.kmax, extra_points=extra)


COMMANDS = {
    "nlen": cmd_nlen,
    "regions": cmd_regions,
    "policy": cmd_policy,
    "simulate": cmd_simulate,
    "capcheck": cmd_capcheck,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="macstab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="JSON experiment config")
        return p

    p = add("nlen", "codeword length N(s) with its bounds")
    p.add_argument("--schedule", help="message counts per transmitter, e.g. 1,1")

    p = add("regions", "catalog and boundary samples as CSV")
    p.add_argument("--samples", type=int, default=16, help="number of boundary directions")
    p.add_argument("--direction", help="single direction, e.g. 1,1")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)

    p = add("policy", "synthesize a stabilizing state-independent policy")
    p.add_argument("--rate", help="target arrival rates (messages/slot)")

    p = add("simulate", "run the slotted simulation")
    p.add_argument("--horizon", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="time-series CSV path")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers for sweeps")

    p = add("capcheck", "verify the capacity interpretation by sampling")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int)
    p.add_argument("--eps", type=float, default=0.01)
    p.add_argument("--kmax", type=int, default=64)
    p.add_argument("--rate", help="extra nat-rate point to check")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = load(args.config)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    except (DomainError, KeyError, TypeError, ValueError) as exc:
        print(f"error: bad config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    seed = getattr(args, "seed", None)
    if seed is None and args.command == "simulate":
        seed = cfg.seed
    try:
        with Timer() as timer:
            outputs = COMMANDS[args.command](cfg, args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except UnreachableReliability as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNREACHABLE
    except (OutsideRegion, UnservedQueue, KBudgetExceeded, CapExceeded) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OUTSIDE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (DomainError, MacStabError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    record = ResultRecord(args.command, cfg.digest(), seed, outputs, timer.elapsed)
    print(record.to_json())
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
