"""Command-line experiment runner.

    cluster run CONFIG.json
    cluster preset NAME [overrides]
    cluster gen SPEC -n N -o FILE.csv

An experiment generates (or loads) data, selects a bandwidth, clusters at
the requested level and optionally evaluates the result against the true
law.  All artifacts are CSV/JSON files in one output directory; the only
nondeterministic output, wall-clock timings, goes to ``timings.json``.

Exit codes: 0 ok, 2 bad configuration, 3 bandwidth selection failed,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bootstrap import BootstrapRequest, bootstrap_clusters
from .cluster_graph import extract_clusters
from .dataset import PointSet, load_points, save_points
from .errors import (InfeasibleLevelError, InvalidArgument, NumericalSupportError,
                     ParseError, SelectionError)
from .evaluation import agreement, min_intercluster_distance, noise_exponent_curve, risk_report
from .excess_mass import adaptive_grid, select_bandwidth_excess_mass
from .kde import fit
from .kernels import KINDS
from .stability import default_grid, instability_curve, select_bandwidth_stability
from .synthetic import SyntheticSpec, generate, geometric_density, named_spec

ENV_OUTPUT_DIR = "CLUSTER_OUTPUT_DIR"

ARTIFACTS = ("data.csv", "labels.csv", "curve.csv", "density.csv", "bootstrap.csv",
             "noise.csv", "report.json", "timings.json", "error.json")

EXIT_OK, EXIT_CONFIG, EXIT_SELECTOR, EXIT_NUMERICAL = 0, 2, 3, 4


class ConfigError(InvalidArgument):
    pass


DEFAULTS = {
    "spec": None,
    "data": None,
    "has_labels": False,
    "header": False,
    "n": 500,
    "seed": 0,
    "kernel": "spherical",
    "lambda": 0.0,
    "grid": {"type": "default", "num": 40},
    "selector": {"type": "excess_mass"},
    "rho": None,
    "edge_factor": 2.0,
    "bootstrap": None,
    "evaluation": None,
    "noise": None,
    "density_points": 1024,
    "output_dir": None,
}

# half the mode height of a standard normal
_GAUSS_HALF_MODE = 0.5 / math.sqrt(2 * math.pi)

PRESETS = {
    "sharp-fig1": {
        "spec": "sharp-fig1", "n": 3000, "lambda": 0.04, "rho": 0.25,
        "selector": {"type": "fixed", "h": 0.04},
        "bootstrap": {"N": 2000}, "evaluation": {"M": 100000},
    },
    "gaussian-fig2": {
        "spec": "gaussian", "n": 1000, "lambda": _GAUSS_HALF_MODE,
        "selector": {"type": "excess_mass"},
        "noise": {"M": 1000000},
    },
    "onedim-two-uniform": {
        "spec": "two-uniform", "n": 200, "lambda": 0.3, "rho": 0.25,
        "selector": {"type": "stability", "rule": "modified", "alpha": 0.05},
        "evaluation": {"M": 100000},
    },
    "onedim-excess-mass": {
        "spec": "two-uniform", "n": 200, "lambda": 0.3, "rho": 0.25,
        "selector": {"type": "excess_mass"},
        "evaluation": {"M": 100000},
    },
    "fuzzy-stick-spiral": {
        "spec": "stick-spiral", "n": 500, "lambda": 0.0,
        "selector": {"type": "excess_mass"},
    },
    "two-moons": {
        "spec": "two-moons", "n": 500, "lambda": 0.0,
        "selector": {"type": "excess_mass"},
    },
}


# --- configuration ----------------------------------------------------------

def parse_selector(text: str) -> dict:
    """``excess_mass`` | ``stability[:original|:modified]`` | ``fixed:H``."""
    kind, _, arg = text.partition(":")
    if kind == "excess_mass" and not arg:
        return {"type": "excess_mass"}
    if kind == "stability":
        return {"type": "stability", "rule": arg or "modified"}
    if kind == "fixed":
        try:
            return {"type": "fixed", "h": float(arg)}
        except ValueError:
            pass
    raise ConfigError(f"bad selector {text!r}; use excess_mass, stability:RULE or fixed:H")


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in DEFAULTS:
            raise ConfigError(f"unknown configuration key {k!r}")
        out[k] = copy.deepcopy(v)
    return out


def normalize_config(raw: dict) -> dict:
    """Fill defaults and validate; the result is what the report echoes."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    cfg = _merge(DEFAULTS, raw)
    if (cfg["spec"] is None) == (cfg["data"] is None):
        raise ConfigError("give exactly one of 'spec' and 'data'")
    if isinstance(cfg["spec"], dict):
        SyntheticSpec.from_json(cfg["spec"])  # validates
    elif cfg["spec"] is not None:
        named_spec(cfg["spec"])
    if cfg["kernel"] not in KINDS:
        raise ConfigError(f"unknown kernel {cfg['kernel']!r}")
    for key in ("n", "seed", "density_points"):
        if not isinstance(cfg[key], int) or cfg[key] < 0:
            raise ConfigError(f"{key} must be a nonnegative integer")
    try:
        cfg["lambda"] = float(cfg["lambda"])
        cfg["edge_factor"] = float(cfg["edge_factor"])
        if cfg["rho"] is not None:
            cfg["rho"] = float(cfg["rho"])
    except (TypeError, ValueError):
        raise ConfigError("lambda, rho and edge_factor must be numbers") from None
    if cfg["lambda"] < 0:
        raise ConfigError("lambda must be nonnegative")
    if cfg["rho"] is not None and not cfg["rho"] > 0:
        raise ConfigError("rho must be positive")

    sel = cfg["selector"]
    if isinstance(sel, str):
        sel = parse_selector(sel)
    if not isinstance(sel, dict) or "type" not in sel:
        raise ConfigError("selector needs a 'type'")
    kind = sel["type"]
    if kind == "excess_mass":
        sel = {"type": kind, "M": sel.get("M")}
    elif kind == "stability":
        sel = {"type": kind, "rule": sel.get("rule", "modified"), "alpha": float(sel.get("alpha", 0.05))}
        if sel["rule"] not in ("original", "modified"):
            raise ConfigError(f"unknown stability rule {sel['rule']!r}")
        if not 0 < sel["alpha"] < 1:
            raise ConfigError("alpha must lie in (0, 1)")
    elif kind == "fixed":
        if "h" not in sel or not float(sel["h"]) > 0:
            raise ConfigError("fixed selector needs a positive 'h'")
        sel = {"type": kind, "h": float(sel["h"])}
    else:
        raise ConfigError(f"unknown selector type {kind!r}")
    cfg["selector"] = sel

    grid = cfg["grid"]
    gtype = grid.get("type") if isinstance(grid, dict) else None
    if gtype == "default":
        cfg["grid"] = {"type": "default", "num": int(grid.get("num", 40))}
    elif gtype == "log":
        cfg["grid"] = {"type": "log", "lo": float(grid["lo"]), "hi": float(grid["hi"]),
                       "num": int(grid.get("num", 40))}
    elif gtype == "list":
        cfg["grid"] = {"type": "list", "values": [float(v) for v in grid["values"]]}
    elif gtype == "adaptive":
        cfg["grid"] = {"type": "adaptive", "max_size": grid.get("max_size")}
    else:
        raise ConfigError("grid type must be default, log, list or adaptive")

    if cfg["bootstrap"] is not None:
        b = cfg["bootstrap"]
        cfg["bootstrap"] = {"N": b.get("N"), "max_rejections": int(b.get("max_rejections", 10_000))}
    if cfg["evaluation"] is not None:
        if cfg["spec"] is None:
            raise ConfigError("evaluation needs a synthetic spec, not a data file")
        cfg["evaluation"] = {"M": int(cfg["evaluation"].get("M", 100_000))}
    if cfg["noise"] is not None:
        if cfg["spec"] is None:
            raise ConfigError("the noise exponent needs a synthetic spec")
        cfg["noise"] = {"M": int(cfg["noise"].get("M", 1_000_000))}
    return cfg


# --- the experiment ---------------------------------------------------------

@dataclass
class RunReport:
    selected_h: float
    k_hat: int
    files: dict
    summary: dict
    config: dict
    timings: dict = field(default_factory=dict)


def _resolve_spec(cfg):
    spec = cfg["spec"]
    return SyntheticSpec.from_json(spec) if isinstance(spec, dict) else named_spec(spec)


def _grid(cfg, ps: PointSet):
    g = cfg["grid"]
    if g["type"] == "default":
        return default_grid(ps, g["num"])
    if g["type"] == "log":
        return np.geomspace(g["lo"], g["hi"], g["num"])
    if g["type"] == "list":
        return np.asarray(g["values"], dtype=np.float64)
    return adaptive_grid(max(ps.n, 3), ps.d, g["max_size"])[1]


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_json(path: Path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


def run_experiment(cfg: dict, out_dir) -> RunReport:
    """Run one configured experiment and write its artifacts to ``out_dir``."""
    cfg = normalize_config(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name in ARTIFACTS:  # never leave a previous run's files behind
        (out / name).unlink(missing_ok=True)
    timings = {}
    clock = time.perf_counter()
    files = {}
    summary = {}
    seed, lam, kernel = cfg["seed"], cfg["lambda"], cfg["kernel"]

    spec = None
    if cfg["spec"] is not None:
        spec = _resolve_spec(cfg)
        sample = generate(spec, cfg["n"], seed)
        ps, truth = sample.points, sample.labels
    else:
        ps = load_points(cfg["data"], cfg["has_labels"], cfg["header"])
        truth = ps.labels
    if ps.n < 3:
        raise ConfigError("need at least three data points")
    save_points(ps, out / "data.csv", truth)
    files["data"] = "data.csv"
    timings["data"] = time.perf_counter() - clock

    sel = cfg["selector"]
    clock = time.perf_counter()
    if sel["type"] == "fixed":
        h = sel["h"]
    else:
        grid = _grid(cfg, ps)
        try:
            if sel["type"] == "stability":
                curve = instability_curve(ps, grid, lam, seed, kernel)
                chosen = select_bandwidth_stability(curve, sel["alpha"], sel["rule"])
                summary["stability"] = chosen.summary()
            else:
                chosen = select_bandwidth_excess_mass(ps, grid, lam, sel["M"], seed, kernel)
                summary["excess_mass"] = {"selected_h": chosen.selected, "lambda": lam, "M": chosen.M,
                                          "pilot_bandwidth": chosen.pilot_bandwidth, "seed": seed}
        except SelectionError as exc:
            if exc.curve is not None:
                files["curve"] = _write_curve(out, exc.curve)
            raise
        files["curve"] = _write_curve(out, chosen)
        h = chosen.selected
    timings["select"] = time.perf_counter() - clock

    clock = time.perf_counter()
    est = fit(ps, kernel, h)
    rho = h if cfg["rho"] is None else cfg["rho"]
    clustering = extract_clusters(est, lam, rho, cfg["edge_factor"])
    _write_csv(out / "labels.csv", ["index", "label"], enumerate(clustering.labels))
    files["labels"] = "labels.csv"
    summary["clusters"] = {
        "k_hat": clustering.k_hat,
        "sizes": [int(len(c)) for c in clustering.components],
        "min_intercluster_distance": _jsonable(min_intercluster_distance(clustering, ps)),
    }
    if truth is not None:
        summary["clusters"]["agreement"] = agreement(truth, clustering.labels)
    files["density"] = _write_density(out, est, spec, cfg["density_points"])
    timings["cluster"] = time.perf_counter() - clock

    if cfg["bootstrap"] is not None:
        clock = time.perf_counter()
        N = cfg["bootstrap"]["N"] or ps.n
        req = BootstrapRequest(int(N), lam, rho, cfg["edge_factor"], seed, cfg["bootstrap"]["max_rejections"])
        bc = bootstrap_clusters(est, req)
        save_points(bc.points, out / "bootstrap.csv", bc.labels)
        files["bootstrap"] = "bootstrap.csv"
        summary["bootstrap"] = {"N": int(N), "k_hat": bc.k_hat}
        timings["bootstrap"] = time.perf_counter() - clock

    if cfg["evaluation"] is not None:
        clock = time.perf_counter()
        rep = risk_report(spec, est, lam, ps, cfg["evaluation"]["M"], seed)
        summary["risk"] = rep.to_json()
        timings["evaluation"] = time.perf_counter() - clock

    if cfg["noise"] is not None:
        clock = time.perf_counter()
        if lam > 0:
            nc = noise_exponent_curve(spec, lam, None, cfg["noise"]["M"], seed)
            _write_csv(out / "noise.csv", ["epsilon", "prob"], nc.rows())
            files["noise"] = "noise.csv"
            summary["noise"] = {"fitted_gamma": _jsonable(nc.fitted_gamma), "M": nc.M, "lambda": lam}
        timings["noise"] = time.perf_counter() - clock

    report = RunReport(float(h), clustering.k_hat, files, summary, cfg, timings)
    _write_json(out / "report.json", {
        "status": "ok", "selected_h": report.selected_h, "k_hat": report.k_hat,
        "files": files, "summary": summary, "config": cfg,
    })
    _write_json(out / "timings.json", timings)
    return report


def _write_curve(out: Path, curve) -> str:
    if hasattr(curve, "xi"):
        _write_csv(out / "curve.csv", ["h", "xi"], curve.rows())
    else:
        _write_csv(out / "curve.csv", ["h", "excess_mass", "defined"], curve.rows())
    return "curve.csv"


def _write_density(out: Path, est, spec, m: int) -> str:
    """1-D: the estimate (and truth) on a regular grid.  Otherwise: the
    estimate at the sample points."""
    if est.d == 1 and m > 0:
        pts = est.data.points[:, 0]
        x = np.linspace(pts.min() - 2 * est.h, pts.max() + 2 * est.h, m)
        p_hat = est.evaluate_batch(x.reshape(-1, 1))
        if spec is not None:
            p = geometric_density(spec, x.reshape(-1, 1))
            _write_csv(out / "density.csv", ["x", "p_hat", "p_true"], zip(x, p_hat, p))
        else:
            _write_csv(out / "density.csv", ["x", "p_hat"], zip(x, p_hat))
    else:
        _write_csv(out / "density.csv", ["index", "p_hat"], enumerate(est.at_data()))
    return "density.csv"


# --- entry point --------------------------------------------------------------

def _base_dir():
    return Path(os.environ.get(ENV_OUTPUT_DIR) or "cluster-output")


def _fail(out: Path | None, code: int, kind: str, exc: Exception) -> int:
    payload = {"status": "error", "kind": kind, "message": str(exc), "exit_code": code}
    if out is not None:
        try:
            out.mkdir(parents=True, exist_ok=True)
            _write_json(out / "error.json", payload)
        except OSError:
            pass
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def _execute(cfg: dict, out: Path) -> int:
    try:
        rep = run_experiment(cfg, out)
    except SelectionError as exc:
        return _fail(out, EXIT_SELECTOR, "selection", exc)
    except (NumericalSupportError, InfeasibleLevelError, FloatingPointError) as exc:
        return _fail(out, EXIT_NUMERICAL, "numerical", exc)
    except (InvalidArgument, ParseError, KeyError, TypeError, ValueError, OSError) as exc:
        return _fail(out, EXIT_CONFIG, "config", exc)
    print(json.dumps({"selected_h": rep.selected_h, "k_hat": rep.k_hat, "output_dir": str(out)}))
    return EXIT_OK


def _cmd_run(args) -> int:
    try:
        with open(args.config) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        return _fail(None, EXIT_CONFIG, "config", exc)
    out = args.out or (cfg.get("output_dir") if isinstance(cfg, dict) else None)
    out = Path(out) if out else _base_dir() / Path(args.config).stem
    return _execute(cfg, out)


def _cmd_preset(args) -> int:
    cfg = copy.deepcopy(PRESETS[args.name])
    try:
        if args.selector is not None:
            cfg["selector"] = parse_selector(args.selector)
        if args.alpha is not None:
            if cfg["selector"].get("type") != "stability":
                raise ConfigError("--alpha only applies to the stability selector")
            cfg["selector"]["alpha"] = args.alpha
    except ConfigError as exc:
        return _fail(None, EXIT_CONFIG, "config", exc)
    for key, val in (("lambda", args.lam), ("seed", args.seed), ("n", args.n),
                     ("rho", args.rho), ("kernel", args.kernel)):
        if val is not None:
            cfg[key] = val
    if args.grid_size is not None:
        cfg["grid"] = {"type": "default", "num": args.grid_size}
    out = Path(args.out) if args.out else _base_dir() / args.name
    return _execute(cfg, out)


def _cmd_gen(args) -> int:
    try:
        if os.path.exists(args.spec):
            with open(args.spec) as fh:
                spec = SyntheticSpec.from_json(json.load(fh))
        else:
            spec = named_spec(args.spec)
        sample = generate(spec, args.n, args.seed)
        save_points(sample.points, args.output, None if args.no_labels else sample.labels)
    except (InvalidArgument, OSError, json.JSONDecodeError) as exc:
        return _fail(None, EXIT_CONFIG, "config", exc)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cluster", description="Level-set density clustering experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment described by a JSON config")
    r.add_argument("config")
    r.add_argument("--out", help=f"output directory (default: ${ENV_OUTPUT_DIR}/<config stem>)")
    r.set_defaults(func=_cmd_run)

    q = sub.add_parser("preset", help="run a built-in experiment")
    q.add_argument("name", choices=sorted(PRESETS))
    q.add_argument("--lambda", dest="lam", type=float)
    q.add_argument("--selector", help="excess_mass | stability:original | stability:modified | fixed:H")
    q.add_argument("--alpha", type=float)
    q.add_argument("--seed", type=int)
    q.add_argument("-n", type=int)
    q.add_argument("--rho", type=float)
    q.add_argument("--kernel", choices=KINDS)
    q.add_argument("--grid-size", type=int)
    q.add_argument("--out")
    q.set_defaults(func=_cmd_preset)

    g = sub.add_parser("gen", help="write a synthetic sample to CSV")
    g.add_argument("spec", help="named law or path to a JSON spec")
    g.add_argument("-n", type=int, required=True)
    g.add_argument("-o", "--output", required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--no-labels", action="store_true")
    g.set_defaults(func=_cmd_gen)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
