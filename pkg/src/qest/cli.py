"""``qest`` command line: run bound, classification, imaging, multiphase and
simulation scenarios and write plot-ready CSV/JSON.

Exit codes: 0 success, 2 invalid configuration or arguments, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import copy
import dataclasses
import hashlib
import io
import csv
import json
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .bounds import compute_bounds, holevo_bound, holevo_sdp
from .classify import classify
from .config import get_tolerances, parse_overrides, tolerances
from .errors import ConfigError, QestError
from .imaging import (
    GaussianPsf,
    SourceScene,
    Parametrization,
    direct_imaging_fi,
    hg_mode_fi,
    scene_qfi,
)
from .model import evaluate
from .multiphase import (
    independent_total_variance,
    optimal_probe,
    optimal_total_variance,
    total_variance_bound,
    build_multiphase_model,
)
from .parallel import ordered_map
from . import sdp
from .simulate import attainability, empirical_mse, mub_povm
from .zoo import get_model

TASKS = ("bounds", "classify", "imaging", "multiphase", "simulate", "sdp-check")

_SWEEP = {
    "type": "object",
    "properties": {
        "param": {"type": "integer", "minimum": 0},
        "from": {"type": "number"},
        "to": {"type": "number"},
        "steps": {"type": "integer", "minimum": 1},
        "log": {"type": "boolean"},
    },
    "required": ["from", "to", "steps"],
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "qest scenario",
    "type": "object",
    "properties": {
        "model": {"type": "string"},
        "lambda": {
            "oneOf": [
                {"type": "array", "items": {"type": "number"}, "minItems": 1},
                {"allOf": [_SWEEP, {"required": ["param"]}]},
            ]
        },
        "sample_points": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "number"}, "minItems": 1},
            "minItems": 3,
        },
        "weight": {
            "oneOf": [
                {"const": "identity"},
                {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
            ]
        },
        "tasks": {"type": "array", "items": {"enum": list(TASKS)}, "minItems": 1, "uniqueItems": True},
        "output": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "threads": {"type": "integer", "minimum": 1},
        "tolerances": {"type": "object", "additionalProperties": {"type": "number"}},
        "imaging": {
            "type": "object",
            "properties": {
                "sigma": {"type": "number", "exclusiveMinimum": 0},
                "sweep": _SWEEP,
                "q_max": {"type": "integer", "minimum": 8},
            },
            "additionalProperties": False,
        },
        "multiphase": {
            "type": "object",
            "properties": {
                "d": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
                "N": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
                "holevo": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "simulate": {
            "type": "object",
            "properties": {
                "M": {"type": "integer", "minimum": 1},
                "R": {"type": "integer", "minimum": 2},
                "povm": {"enum": ["mub"]},
                "n_starts": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "sdp": {
            "type": "object",
            "properties": {"problem": {"type": "object"}},
            "additionalProperties": False,
        },
    },
    "required": ["tasks"],
    "additionalProperties": False,
}


class NumericalFailure(Exception):
    def __init__(self, operation, exc):
        super().__init__(f"{operation}: {type(exc).__name__}: {exc}")
        self.operation = operation


# -- configuration --------------------------------------------------------------

def validate_config(cfg: dict) -> dict:
    """Check ``cfg`` against the schema and the model zoo; raise :class:`ConfigError`."""
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = ".".join(str(p) for p in exc.absolute_path) or _missing_field(exc) or "<root>"
        raise ConfigError(path, exc.message.splitlines()[0]) from None
    try:
        parse_overrides(f"{k}={v}" for k, v in cfg.get("tolerances", {}).items())
    except KeyError as exc:
        raise ConfigError(f"tolerances.{exc.args[0]}", "unknown tolerance") from None
    needs_model = set(cfg["tasks"]) & {"bounds", "classify", "simulate"}
    if "sdp-check" in cfg["tasks"] and "problem" not in cfg.get("sdp", {}):
        needs_model.add("sdp-check")
    if needs_model and "model" not in cfg:
        raise ConfigError("model", f"required by task(s) {', '.join(sorted(needs_model))}")
    if "model" in cfg:
        try:
            entry = get_model(cfg["model"])
        except KeyError:
            raise ConfigError("model", f"unknown model id {cfg['model']!r}") from None
        d = entry.model.param_dim
        lam = cfg.get("lambda")
        if isinstance(lam, list) and len(lam) != d:
            raise ConfigError("lambda", f"model has {d} parameters, got {len(lam)}")
        if isinstance(lam, dict) and lam["param"] >= d:
            raise ConfigError("lambda.param", f"model has {d} parameters")
        for i, p in enumerate(cfg.get("sample_points", [])):
            if len(p) != d:
                raise ConfigError(f"sample_points.{i}", f"model has {d} parameters")
        w = cfg.get("weight", "identity")
        if w != "identity" and np.shape(w) != (d, d):
            raise ConfigError("weight", f"expected a {d}x{d} matrix")
        if "simulate" in cfg["tasks"]:
            if not entry.model.common_frame:
                raise ConfigError("model", "simulation needs a model in a fixed basis")
            dim = entry.model.hilbert_dim
            if any(dim % q == 0 for q in range(2, int(dim ** 0.5) + 1)):
                raise ConfigError("simulate.povm", f"no MUB POVM for Hilbert dimension {dim}")
    return cfg


def _missing_field(exc):
    if exc.validator == "required":
        for name in exc.validator_value:
            if isinstance(exc.instance, dict) and name not in exc.instance:
                return name
    return None


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def sweep_values(spec: dict) -> np.ndarray:
    a, b, n = float(spec["from"]), float(spec["to"]), int(spec["steps"])
    if spec.get("log", False):
        if a <= 0 or b <= 0:
            raise ConfigError("sweep", "log sweep needs positive endpoints")
        return np.geomspace(a, b, n) if n > 1 else np.array([a])
    return np.linspace(a, b, n) if n > 1 else np.array([a])


def parse_sweep(text: str):
    """``NAME:from:to:steps[:log]`` -> ``(NAME, spec)``."""
    parts = text.split(":")
    if len(parts) not in (4, 5) or (len(parts) == 5 and parts[4] != "log"):
        raise ConfigError("sweep", "expected NAME:from:to:steps[:log]")
    try:
        spec = {"from": float(parts[1]), "to": float(parts[2]), "steps": int(parts[3])}
    except ValueError:
        raise ConfigError("sweep", "non-numeric sweep bounds") from None
    if len(parts) == 5:
        spec["log"] = True
    return parts[0], spec


def _lambda_points(cfg, entry):
    lam = cfg.get("lambda")
    base = np.array(entry.default_lambda, float)
    if lam is None:
        return [base]
    if isinstance(lam, list):
        return [np.array(lam, float)]
    pts = []
    for v in sweep_values(lam):
        p = base.copy()
        p[lam["param"]] = v
        pts.append(p)
    return pts


def _weight(cfg, d):
    w = cfg.get("weight", "identity")
    return np.eye(d) if w == "identity" else np.array(w, float)


# -- tasks ------------------------------------------------------------------------

def _task_bounds(cfg, threads):
    entry = get_model(cfg["model"])
    W = _weight(cfg, entry.model.param_dim)
    pts = _lambda_points(cfg, entry)

    def one(lam):
        rep = compute_bounds(evaluate(entry.model, lam), W)
        return lam, rep

    results = ordered_map(one, pts, threads)
    d = entry.model.param_dim
    header = [f"lambda_{i}" for i in range(d)] + [
        "c_sld", "c_rld", "c_holevo", "holevo_gap", "c_s_plus_norm", "one_plus_R_cs", "two_cs", "R"]
    rows = [list(lam) + [r.c_sld, r.c_rld, r.c_holevo, r.holevo_gap, *r.chain, r.R] for lam, r in results]
    records = [dict(model=cfg["model"], **{"lambda": lam.tolist()}, **r.to_json()) for lam, r in results]
    return {"csv": (header, rows, [lam.tolist() for lam, _ in results]),
            "json": records[0] if len(records) == 1 else records}


def _task_classify(cfg, threads):
    entry = get_model(cfg["model"])
    if "sample_points" in cfg:
        pts = [np.array(p, float) for p in cfg["sample_points"]]
    elif isinstance(cfg.get("lambda"), dict):
        pts = _lambda_points(cfg, entry)
    else:
        base = np.array(cfg.get("lambda", entry.default_lambda), float)
        delta = 0.05 * (1 + np.abs(base)) * (-1.0) ** np.arange(base.size)
        pts = [base, base + delta, base - delta]
    rep = classify(entry.model, pts)
    out = {"model": cfg["model"], "sample_points": [p.tolist() for p in pts], **rep.to_json()}
    header = ["classical", "quasi_classical", "d_invariant", "asymptotically_classical", "rank_deficient", "n_points"]
    row = [rep.classical, rep.quasi_classical, rep.d_invariant, rep.asymptotically_classical,
           rep.rank_deficient, rep.n_points]
    return {"csv": (header, [row], [[p.tolist() for p in pts]]), "json": out}


def _imaging_sigma(cfg):
    if "sigma" in cfg.get("imaging", {}):
        return float(cfg["imaging"]["sigma"])
    m = cfg.get("model", "")
    if m.startswith(("two-source:sigma=", "n-source:sigma=")):
        return float(m.split("sigma=")[1].split(",")[0])
    return 1.0


def _task_imaging(cfg, threads):
    icfg = cfg.get("imaging", {})
    sigma = _imaging_sigma(cfg)
    psf = GaussianPsf(sigma)
    spec = icfg.get("sweep", {"from": 0.01 * sigma, "to": 3 * sigma, "steps": 60, "log": True})
    q_max = icfg.get("q_max", 40)
    seps = sweep_values(spec)
    if np.any(seps <= 0):
        raise ConfigError("imaging.sweep", "separations must be positive")

    def one(s):
        scene = SourceScene((-s / 2, s / 2), (0.5, 0.5), Parametrization.CENTROID_SEPARATION)
        F = direct_imaging_fi(psf, scene)
        spade = hg_mode_fi(psf, s, q_max=q_max).F_separation
        Q = scene_qfi(psf, scene)
        return [s, F[1, 1], spade, Q[1, 1], 1.0 / F[1, 1], 1.0 / Q[1, 1]]

    rows = ordered_map(one, seps, threads)
    header = ["separation", "F22_direct", "F22_spade", "Q22", "crb_direct", "crb_quantum"]
    return {"csv": (header, rows, [[0.0, s] for s in seps])}


def _task_multiphase(cfg, threads):
    mcfg = cfg.get("multiphase", {})
    ds, Ns = mcfg.get("d", [1, 2, 3, 5]), mcfg.get("N", [1, 2, 4])
    with_holevo = mcfg.get("holevo", True)
    grid = [(d, N) for d in ds for N in Ns]

    def one(dn):
        d, N = dn
        probe = optimal_probe(d, N)
        tv = total_variance_bound(probe)
        ch = None
        if with_holevo:
            pt = evaluate(build_multiphase_model(probe), np.zeros(d))
            ch = holevo_bound(pt, np.eye(d))[0]
        return [d, N, tv, optimal_total_variance(d, N), independent_total_variance(d, N), ch]

    rows = ordered_map(one, grid, threads)
    header = ["d", "N", "trace_Q_inverse", "paper_formula", "independent_d3_over_N2", "c_holevo"]
    return {"csv": (header, rows, [[0.0] * d for d, _ in grid])}


def _task_simulate(cfg, threads):
    entry = get_model(cfg["model"])
    scfg = cfg.get("simulate", {})
    M, R = scfg.get("M", 10_000), scfg.get("R", 100)
    lam = _lambda_points(cfg, entry)
    if len(lam) != 1:
        raise ConfigError("lambda", "simulation takes a single parameter point")
    lam = lam[0]
    povm = mub_povm(entry.model.hilbert_dim)
    run = empirical_mse(entry.model, povm, lam, M, R, cfg.get("seed", 0), threads,
                        n_starts=scfg.get("n_starts", 5))
    W = _weight(cfg, entry.model.param_dim)
    rep = attainability(run, entry.model, povm, W, seed=cfg.get("seed", 0))
    header = ["repetition"] + [f"lambda_hat_{i}" for i in range(lam.size)]
    rows = [[r] + list(est) for r, est in enumerate(run.estimates)]
    summary = {
        "model": cfg["model"],
        "lambda": lam.tolist(),
        "M": M,
        "R": R,
        "V_hat": run.V_hat.tolist(),
        "F_inverse_over_M": (rep.F_inverse / M).tolist(),
        "bias": run.bias.tolist(),
        "bias_standard_error": run.bias_se.tolist(),
        "MV_standard_error": rep.se.tolist(),
        "z_scores": rep.z.tolist(),
        "trace_MV": rep.trace_MV,
        "trace_F_inverse": rep.trace_bound,
        "trace_standard_error": rep.trace_se,
        "within_3_se": rep.within,
        "no_crb_violation": rep.no_violation,
    }
    return {"csv": (header, rows, [lam.tolist()] * len(rows)), "json": summary}


def _task_sdp_check(cfg, threads):
    if "problem" in cfg.get("sdp", {}):
        try:
            prob = sdp.SdpProblem.from_json(cfg["sdp"]["problem"])
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError("sdp.problem", str(exc)) from None
        source = "problem"
    else:
        entry = get_model(cfg["model"])
        lam = _lambda_points(cfg, entry)[0]
        prob = holevo_sdp(evaluate(entry.model, lam), _weight(cfg, entry.model.param_dim))[0]
        source = f"holevo:{cfg['model']}@{lam.tolist()}"
    sol = sdp.solve(prob)
    out = {"source": source, **sol.to_json(),
           "weak_duality": bool(sol.dual_value <= sol.objective_value + 1e-9 * (1 + abs(sol.objective_value)))}
    return {"json": out}


_RUNNERS = {
    "bounds": _task_bounds,
    "classify": _task_classify,
    "imaging": _task_imaging,
    "multiphase": _task_multiphase,
    "simulate": _task_simulate,
    "sdp-check": _task_sdp_check,
}


# -- output -------------------------------------------------------------------------

def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def render_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(type(o).__name__)


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def execute(cfg: dict, threads: int = 1, stdout=None) -> dict:
    """Run every task of a validated config; write artifacts when ``output`` is set."""
    stdout = stdout or sys.stdout
    overrides = parse_overrides(f"{k}={v}" for k, v in cfg.get("tolerances", {}).items())
    results = {}
    with tolerances(**overrides):
        for task in cfg["tasks"]:
            try:
                results[task] = _RUNNERS[task](cfg, threads)
            except ConfigError:
                raise
            except (QestError, np.linalg.LinAlgError, FloatingPointError) as exc:
                raise NumericalFailure(task, exc) from exc
        effective = dataclasses.asdict(get_tolerances())

    out_dir = cfg.get("output")
    if out_dir is None:
        for task, res in results.items():
            if "json" in res:
                stdout.write(dump_json(res["json"]))
            else:
                stdout.write(render_csv(*res["csv"][:2]))
        return results

    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    files = {}
    for task, res in results.items():
        stem = task.replace("-", "_")
        if "csv" in res:
            header, rows, lams = res["csv"]
            text = render_csv(header, rows)
            (path / f"{stem}.csv").write_bytes(text.encode())
            files[f"{stem}.csv"] = {
                "sha256": hashlib.sha256(text.encode()).hexdigest(),
                "rows": len(rows),
                "provenance": [{"row": i, "task": task, "lambda": lam} for i, lam in enumerate(lams)],
            }
        if "json" in res:
            text = dump_json(res["json"])
            (path / f"{stem}.json").write_bytes(text.encode())
            files[f"{stem}.json"] = {"sha256": hashlib.sha256(text.encode()).hexdigest()}
            if task in ("bounds", "classify", "sdp-check"):
                stdout.write(text)
    manifest = {
        "tool": "qest",
        "version": __version__,
        "config_sha256": config_hash(cfg),
        "config": cfg,
        "tolerances": effective,
        "files": files,
    }
    (path / "manifest.json").write_bytes(dump_json(manifest).encode())
    return results


# -- argument parsing ------------------------------------------------------------------

def _common(p):
    p.add_argument("--config", help="JSON scenario file; flags override its fields")
    p.add_argument("--out", help="output directory for CSV/JSON artifacts and the manifest")
    p.add_argument("--seed", type=int, help="random seed (default 0)")
    p.add_argument("--threads", type=int, help="worker threads (default: $QEST_THREADS or 1)")
    p.add_argument("--tol-override", action="append", default=[], metavar="KEY=VAL",
                   help="override a numerical tolerance, repeatable")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qest", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"qest {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the tasks listed in a config file")
    _common(p)

    for name in ("bounds", "classify", "simulate", "sdp-check"):
        p = sub.add_parser(name)
        _common(p)
        p.add_argument("--model", help="model id, e.g. multiphase:d=2,N=2")
        p.add_argument("--lambda", dest="lam", help="comma-separated parameter values")
        p.add_argument("--weight", help="'identity' or a JSON matrix")
        p.add_argument("--sweep", help="sweep one parameter: INDEX:from:to:steps[:log]")
        if name == "classify":
            p.add_argument("--points", help="sample points separated by ';', e.g. '0.1,0.2;0.3,0.4;0.5,0.6'")
        if name == "simulate":
            p.add_argument("--M", type=int, help="shots per repetition")
            p.add_argument("--R", type=int, help="repetitions")
        if name == "sdp-check":
            p.add_argument("--problem", help="JSON file with blocks, c, E, f")

    p = sub.add_parser("imaging")
    _common(p)
    p.add_argument("--sigma", type=float)
    p.add_argument("--sweep", help="separation:from:to:steps[:log]")
    p.add_argument("--q-max", type=int)

    p = sub.add_parser("multiphase")
    _common(p)
    p.add_argument("--d", help="comma-separated numbers of phases")
    p.add_argument("--N", help="comma-separated photon numbers")
    p.add_argument("--no-holevo", action="store_true", help="skip the Holevo SDP column")
    return ap


def _floats(text, field):
    try:
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise ConfigError(field, f"expected comma-separated numbers, got {text!r}") from None


def _ints(text, field):
    try:
        return [int(x) for x in text.split(",")]
    except ValueError:
        raise ConfigError(field, f"expected comma-separated integers, got {text!r}") from None


def config_from_args(args) -> dict:
    cfg = {}
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ConfigError("config", f"cannot read {args.config}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"invalid JSON: {exc.msg} at line {exc.lineno}") from None
        if not isinstance(cfg, dict):
            raise ConfigError("config", "top level must be an object")
        cfg = copy.deepcopy(cfg)
    cmd = args.command
    if cmd != "run":
        cfg["tasks"] = [cmd]
    elif "tasks" not in cfg:
        raise ConfigError("tasks", "run needs a config with a task list")
    if args.out:
        cfg["output"] = args.out
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.tol_override:
        try:
            parsed = parse_overrides(args.tol_override)
        except KeyError as exc:
            raise ConfigError("tol-override", f"unknown tolerance {exc.args[0]!r}") from None
        except ValueError:
            raise ConfigError("tol-override", "tolerance values must be numbers") from None
        cfg.setdefault("tolerances", {}).update(parsed)

    if getattr(args, "model", None):
        cfg["model"] = args.model
    if getattr(args, "lam", None):
        cfg["lambda"] = _floats(args.lam, "lambda")
    if getattr(args, "weight", None):
        if args.weight == "identity":
            cfg["weight"] = "identity"
        else:
            try:
                cfg["weight"] = json.loads(args.weight)
            except json.JSONDecodeError:
                raise ConfigError("weight", "expected 'identity' or a JSON matrix") from None
    if getattr(args, "sweep", None):
        name, spec = parse_sweep(args.sweep)
        if cmd == "imaging":
            if name != "separation":
                raise ConfigError("sweep", "imaging sweeps the separation")
            cfg.setdefault("imaging", {})["sweep"] = spec
        else:
            try:
                spec["param"] = int(name.removeprefix("lambda"))
            except ValueError:
                raise ConfigError("sweep", "sweep name must be a parameter index") from None
            cfg["lambda"] = spec
    if getattr(args, "points", None):
        cfg["sample_points"] = [_floats(p, "points") for p in args.points.split(";")]
    if cmd == "simulate":
        if args.M is not None:
            cfg.setdefault("simulate", {})["M"] = args.M
        if args.R is not None:
            cfg.setdefault("simulate", {})["R"] = args.R
    if cmd == "sdp-check" and args.problem:
        try:
            cfg["sdp"] = {"problem": json.loads(Path(args.problem).read_text())}
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError("problem", f"cannot load problem: {exc}") from None
    if cmd == "imaging":
        if args.sigma is not None:
            cfg.setdefault("imaging", {})["sigma"] = args.sigma
        if args.q_max is not None:
            cfg.setdefault("imaging", {})["q_max"] = args.q_max
    if cmd == "multiphase":
        m = cfg.setdefault("multiphase", {})
        if args.d:
            m["d"] = _ints(args.d, "d")
        if args.N:
            m["N"] = _ints(args.N, "N")
        if args.no_holevo:
            m["holevo"] = False
    return cfg


def _threads(args, cfg) -> int:
    if args.threads is not None:
        n = args.threads
    elif os.environ.get("QEST_THREADS"):
        try:
            n = int(os.environ["QEST_THREADS"])
        except ValueError:
            raise ConfigError("QEST_THREADS", "must be an integer") from None
    else:
        n = cfg.get("threads", 1)
    if n < 1:
        raise ConfigError("threads", "must be at least 1")
    return n


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = validate_config(config_from_args(args))
        threads = _threads(args, cfg)
        execute(cfg, threads)
    except ConfigError as exc:
        print(f"qest: invalid config: {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"qest: numerical failure in {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
