"""
Command line driver: ``hetnet-ee run`` and ``hetnet-ee compare``.

A JSON config describes one experiment::

    {
      "scenario": {"generator": {...}} | {"file": "scenario.json"},
      "propagation": {"model": "log_distance", "params": {...}, "cache": null},
      "power": "default_2.6GHz" | {"<band id>": preset name or parameter dict},
      "assignment": {"algorithm": "greedy", "j": 1, "delta": 1.0,
                     "bias_db": {"<band id>": dB}, "algorithms": [...]},
      "allocation": {"mode": "sm" | ["sm", "nsm"], "tolerance": 1e-6,
                     "max_iters": 100, "init": "zero"},
      "sweep": {"rates_mbps": [1, 5, {"0": 2, "1": 10}], "antennas": [64, 32]},
      "output": {"dir": "out", "trace": false, "reproducible": false}
    }

``sweep.rates`` (bit/s) may replace ``sweep.rates_mbps``. A per-band rate
point, keyed by band id, applies to the UEs associated with cells of that
band. Each sweep point runs the feasibility check, the association, the
allocation and the evaluation, and appends one row to ``results.csv``.

Exit status: 0 when every point completed (outages included), 1 on config
or IO errors, 2 when the allocation failed to converge at some point.
"""
import argparse
import csv
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import allocation as _alloc
from .assignment import ALGORITHMS, InfeasibleAssignmentError, run_algorithm
from .evaluation import evaluate
from .power_model import POWER_PRESETS, PowerModelParams
from .propagation import compute_gains
from .scenario import ScenarioError, generate_synthetic, load_scenario

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED = 0, 1, 2
MODES = ("sm", "nsm", "benchmark")

COLUMNS = (
    "config_hash", "seed", "scenario", "algorithm", "mode", "point", "rate", "antennas", "status",
    "ee", "ee_alt", "outage_fraction", "outage_count", "p_ld", "p_li", "p_tot", "iterations",
    "converged", "spectral_radius", "off_cells", "ues_per_band", "wall_time",
)


class ConfigError(ValueError):
    """The experiment config is malformed or references unknown presets."""


# --------------------------------------------------------------------------
# config handling
# --------------------------------------------------------------------------

def _band_key(k):
    try:
        return int(k)
    except (TypeError, ValueError):
        raise ConfigError(f"band keys must be integer band ids, got {k!r}") from None


def _rate_points(sweep):
    if "rates_mbps" in sweep:
        raw, scale = sweep["rates_mbps"], 1e6
    elif "rates" in sweep:
        raw, scale = sweep["rates"], 1.0
    else:
        raise ConfigError("sweep needs 'rates' or 'rates_mbps'")
    if not isinstance(raw, list) or not raw:
        raise ConfigError("rate sweep must be a non-empty list")
    points = []
    for r in raw:
        if isinstance(r, dict):
            if not r:
                raise ConfigError("per-band rate point is empty")
            points.append({_band_key(k): float(v) * scale for k, v in r.items()})
        elif isinstance(r, (int, float)) and not isinstance(r, bool):
            points.append(float(r) * scale)
        else:
            raise ConfigError(f"invalid rate point {r!r}")
        vals = points[-1].values() if isinstance(points[-1], dict) else [points[-1]]
        if any(v < 0 for v in vals):
            raise ConfigError("rates must be >= 0")
    return points


def _power(cfg):
    if cfg is None:
        return None
    if isinstance(cfg, str):
        if cfg not in POWER_PRESETS:
            raise ConfigError(f"unknown power preset {cfg!r}")
        return cfg
    if isinstance(cfg, dict):
        out = {}
        for k, v in cfg.items():
            if isinstance(v, str) and v not in POWER_PRESETS:
                raise ConfigError(f"unknown power preset {v!r}")
            try:
                out[_band_key(k)] = v if isinstance(v, str) else PowerModelParams(**v)
            except TypeError as exc:
                raise ConfigError(f"power params for band {k}: {exc}") from None
        return out
    raise ConfigError("power must be a preset name or a per-band mapping")


def _algorithms(cfg, override=None):
    """List of ``(label, name, j, delta, bias)`` tuples."""
    default_j = int(cfg.get("j", 1))
    default_delta = float(cfg.get("delta", 1.0))
    default_bias = cfg.get("bias_db")
    if override is not None:
        entries = [a.strip() for a in override.split(",") if a.strip()]
    else:
        entries = cfg.get("algorithms") or [cfg.get("algorithm", "greedy")]
    out = []
    for e in entries:
        spec = {"name": e} if isinstance(e, str) else dict(e)
        name = spec.get("name")
        if name not in ALGORITHMS:
            raise ConfigError(f"unknown assignment algorithm {name!r}")
        bias = spec.get("bias_db", default_bias)
        if name.startswith("bias"):
            if not isinstance(bias, dict):
                raise ConfigError(f"{name} needs assignment.bias_db as a per-band mapping")
            bias = {_band_key(k): float(v) for k, v in bias.items()}
        else:
            bias = None
        out.append((spec.get("label", name), name, int(spec.get("j", default_j)),
                    float(spec.get("delta", default_delta)), bias))
    if not out:
        raise ConfigError("no assignment algorithm given")
    return out


def load_config(path):
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    cfg.setdefault("_base", str(Path(path).resolve().parent))
    return cfg


def build_scenario(cfg, seed=None):
    src = cfg.get("scenario")
    if not isinstance(src, dict):
        raise ConfigError("config needs a 'scenario' object")
    if "generator" in src:
        gen = dict(src["generator"])
        if seed is not None:
            gen["seed"] = seed
        return generate_synthetic(gen)
    if "file" in src:
        path = Path(src["file"])
        if not path.is_absolute():
            path = Path(cfg.get("_base", ".")) / path
        try:
            scenario = load_scenario(path)
        except OSError as exc:
            raise ConfigError(f"cannot read scenario {path}: {exc}") from None
        if seed is not None:
            scenario = replace(scenario, seed=int(seed))
        return scenario
    raise ConfigError("scenario needs 'generator' or 'file'")


def config_hash(cfg):
    clean = {k: v for k, v in cfg.items() if not k.startswith("_")}
    return hashlib.sha256(json.dumps(clean, sort_keys=True, default=str).encode()).hexdigest()[:12]


# --------------------------------------------------------------------------
# one sweep point
# --------------------------------------------------------------------------

def _rate_label(point):
    if isinstance(point, dict):
        return "+".join(f"{point[b] / 1e6:g}" for b in sorted(point))
    return f"{point / 1e6:g}"


def _ue_rates(scenario, assignment, point):
    if not isinstance(point, dict):
        return np.full(scenario.n_ues, point)
    bands = np.array([c.band.id for c in scenario.cells])[np.asarray(assignment.cell_of)]
    return np.array([point.get(int(b), 0.0) for b in bands])


def _ues_per_band(scenario, assignment):
    bands = [scenario.cells[c].band.id for c in np.asarray(assignment.cell_of)]
    return ";".join(f"{b}:{bands.count(b)}" for b in scenario.band_ids)


def run_point(scenario, gains, algo, mode, point, antennas, alloc_cfg, power):
    """Evaluate one (algorithm, mode, rate, antennas) combination.

    Returns
    -------
    row : dict
    trace : list of (iteration, per-cell total power, residual)
    """
    label, name, j, delta, bias = algo
    start = time.perf_counter()
    if antennas is not None:
        scenario = scenario.with_active_antennas(antennas)
    row = {"algorithm": label, "mode": mode, "rate": _rate_label(point),
           "antennas": "" if antennas is None else int(antennas)}
    trace = []
    try:
        assignment = run_algorithm(name, gains, j, delta, bias)
    except InfeasibleAssignmentError as exc:
        row.update(status="infeasible", detail=str(exc))
        return _outage_row(row, scenario, start), trace
    scen = scenario.with_rates(_ue_rates(scenario, assignment, point))
    row["off_cells"] = len(assignment.off_cells)
    row["ues_per_band"] = _ues_per_band(scen, assignment)
    feas = _alloc.feasibility_check(scen, gains, assignment, mode=mode)
    row["spectral_radius"] = feas.radius
    try:
        if mode == "benchmark":
            state = _alloc.benchmark_allocation(scen, gains, assignment)
        else:
            state = _alloc.algorithm7(
                scen, gains, assignment, mode,
                tol=float(alloc_cfg.get("tolerance", 1e-6)),
                max_iters=int(alloc_cfg.get("max_iters", 100)),
                init=alloc_cfg.get("init", "zero"),
            )
    except _alloc.InfeasibleError:
        row["status"] = "infeasible"
        return _outage_row(row, scen, start), trace
    except _alloc.NonConvergenceError as exc:
        row["status"] = "nonconverged"
        st = exc.state
        trace = list(zip(range(1, len(st.trace) + 1), st.trace, st.residuals))
        row["iterations"] = len(st.trace)
        row["converged"] = False
        return _outage_row(row, scen, start), trace
    metrics = evaluate(scen, gains, state, power)
    row.update(metrics.row())
    row.update(status="ok", iterations=state.iterations, converged=bool(state.converged))
    row["wall_time"] = time.perf_counter() - start
    trace = list(zip(range(1, len(state.trace) + 1), state.trace, state.residuals))
    return row, trace


def _outage_row(row, scenario, start):
    row.setdefault("off_cells", "")
    row.setdefault("ues_per_band", "")
    row.setdefault("spectral_radius", "")
    row.setdefault("iterations", 0)
    row.setdefault("converged", False)
    row.update(ee=0.0, ee_alt=0.0, outage_fraction=1.0, outage_count=scenario.n_ues,
               p_ld=0.0, p_li=0.0, p_tot=0.0)
    row["wall_time"] = time.perf_counter() - start
    return row


# --------------------------------------------------------------------------
# experiment driver
# --------------------------------------------------------------------------

def _workers():
    try:
        n = int(os.environ.get("HETNET_EE_THREADS", "1"))
    except ValueError:
        n = 1
    return max(1, n)


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _write_trace(path, cell_keys, trace):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration"] + [f"cell_{b}_{band}" for b, band in cell_keys] + ["residual"])
        for it, powers, res in trace:
            w.writerow([it] + [repr(float(p)) for p in powers] + [repr(float(res))])


def execute(cfg, out_dir, seed=None, modes=None, algorithms=None, antennas=None,
            reproducible=None, trace=None):
    """Run an experiment described by ``cfg`` and write its result files.

    Returns
    -------
    int
        Exit status.
    list of dict
        The result rows in sweep order.
    """
    sweep = cfg.get("sweep")
    if not isinstance(sweep, dict):
        raise ConfigError("config needs a 'sweep' object")
    points = _rate_points(sweep)
    alloc_cfg = dict(cfg.get("allocation") or {})
    if modes is None:
        modes = alloc_cfg.get("mode", "sm")
        modes = [modes] if isinstance(modes, str) else list(modes)
    for m in modes:
        if m not in MODES:
            raise ConfigError(f"unknown allocation mode {m!r}")
    if alloc_cfg.get("init", "zero") not in ("zero", "max_power"):
        raise ConfigError("allocation.init must be 'zero' or 'max_power'")
    algos = _algorithms(dict(cfg.get("assignment") or {}), algorithms)
    power = _power(cfg.get("power"))
    ants = antennas if antennas is not None else sweep.get("antennas")
    ants = [None] if not ants else [int(a) for a in ants]
    out_cfg = dict(cfg.get("output") or {})
    reproducible = bool(out_cfg.get("reproducible", False)) if reproducible is None else reproducible
    trace = bool(out_cfg.get("trace", False)) if trace is None else trace

    scenario = build_scenario(cfg, seed)
    prop = dict(cfg.get("propagation") or {})
    cache = prop.get("cache")
    if cache is not None and not Path(cache).is_absolute():
        cache = Path(cfg.get("_base", ".")) / cache
    try:
        gains = compute_gains(scenario, prop.get("model", "log_distance"), prop.get("params"), cache)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"propagation: {exc}") from None

    chash = config_hash(cfg)
    jobs = [(a, m, p, n) for a in algos for m in modes for n in ants for p in points]

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    status = EXIT_OK
    rows, summaries = [], []

    def job(args):
        a, m, p, n = args
        return run_point(scenario, gains, a, m, p, n, alloc_cfg, power)

    with open(out / "results.csv", "w", newline="") as fh, ThreadPoolExecutor(_workers()) as pool:
        writer = csv.DictWriter(fh, fieldnames=COLUMNS, extrasaction="ignore")
        writer.writeheader()
        fh.flush()
        for idx, (row, tr) in enumerate(pool.map(job, jobs)):
            row.update(config_hash=chash, seed=scenario.seed, scenario=scenario.digest(), point=idx)
            if reproducible:
                row["wall_time"] = 0.0
            writer.writerow({k: _fmt(row.get(k, "")) for k in COLUMNS})
            fh.flush()
            if row["status"] == "nonconverged":
                status = EXIT_NONCONVERGED
            if trace and tr:
                _write_trace(out / f"trace_{idx}.csv", [c.key for c in scenario.cells], tr)
            rows.append(row)
            summaries.append({
                "point": idx, "algorithm": row["algorithm"], "mode": row["mode"], "rate": row["rate"],
                "antennas": row["antennas"], "status": row["status"],
                "trace": [{"iteration": it, "cell_power": [float(x) for x in pw], "residual": float(r)}
                          for it, pw, r in tr],
            })

    summary = {
        "config_hash": chash,
        "seed": scenario.seed,
        "scenario": scenario.digest(),
        "n_ues": scenario.n_ues,
        "n_cells": scenario.n_cells,
        "points": summaries,
        "comparison": _comparison(rows),
    }
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
    return status, rows


def _comparison(rows):
    """Per-algorithm table: UEs per band, off cells, mean EE and outage."""
    table = {}
    for r in rows:
        t = table.setdefault(r["algorithm"], {"ues_per_band": r.get("ues_per_band", ""),
                                              "off_cells": r.get("off_cells", ""), "ee": [], "outage": []})
        t["ee"].append(float(r["ee"]))
        t["outage"].append(float(r["outage_fraction"]))
    return [
        {"algorithm": name, "ues_per_band": t["ues_per_band"], "off_cells": t["off_cells"],
         "mean_ee": float(np.mean(t["ee"])), "mean_outage": float(np.mean(t["outage"]))}
        for name, t in table.items()
    ]


def _print_comparison(rows, stream):
    stream.write(f"{'algorithm':<16}{'ues_per_band':<24}{'off':>5}{'mean_ee':>14}{'outage':>9}\n")
    for r in _comparison(rows):
        stream.write(f"{r['algorithm']:<16}{r['ues_per_band']:<24}{str(r['off_cells']):>5}"
                     f"{r['mean_ee']:>14.4g}{r['mean_outage']:>9.3f}\n")


def _int_list(text):
    return [int(x) for x in text.split(",") if x.strip()]


def build_parser():
    parser = argparse.ArgumentParser(prog="hetnet-ee", description=__doc__.split("\n\n")[0].strip())
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (("run", "run the rate sweep"), ("compare", "compare assignment algorithms")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="experiment config (JSON)")
        p.add_argument("--out", default=None, help="output directory (default: output.dir or ./out)")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.add_argument("--mode", choices=MODES, default=None, help="allocation mode for every point")
        p.add_argument("--algorithms", default=None, help="comma separated assignment algorithms")
        p.add_argument("--antennas", type=_int_list, default=None, help="comma separated antenna counts")
        p.add_argument("--trace", action="store_true", default=None, help="write trace_<point>.csv files")
        p.add_argument("--reproducible", action="store_true", default=None,
                       help="write wall_time as 0 so repeated runs give identical bytes")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        out = args.out or (cfg.get("output") or {}).get("dir", "out")
        modes = [args.mode] if args.mode else None
        status, rows = execute(cfg, out, seed=args.seed, modes=modes, algorithms=args.algorithms,
                               antennas=args.antennas, reproducible=args.reproducible, trace=args.trace)
    except (ConfigError, ScenarioError) as exc:
        print(f"hetnet-ee: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"hetnet-ee: IO error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "compare":
        _print_comparison(rows, sys.stdout)
    else:
        print(f"wrote {len(rows)} rows to {Path(out) / 'results.csv'}")
    if status == EXIT_NONCONVERGED:
        print("hetnet-ee: allocation did not converge at one or more points", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
