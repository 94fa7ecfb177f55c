"""Command-line front end: ``potts-parisi {evaluate,minimize,oracle,finite-n,verify}``.

Exit codes: 0 success, 1 computational failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import warnings

import jsonschema

from .errors import ComputationError
from .finite_n import estimate_FN
from .functional import f_terms, lemma_path, p_functional, psi_of_path, half_grad_path
from .model import MixtureXi, check_convexity_sample
from .optimize import MinimizeOptions, minimize_f, multistart
from .paths import StepCdf
from .pde import GridSpec, default_grid
from .rpc import mc_p_functional, mc_psi, spec_for_path
from .verify import default_suite

log = logging.getLogger("potts_parisi")

_ALPHA = {
    "type": "object",
    "properties": {
        "t": {"type": "array", "items": {"type": "number"}, "minItems": 2},
        "m": {"type": "array", "items": {"type": "number"}, "minItems": 1},
    },
    "required": ["t", "m"],
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "model": {
            "type": "object",
            "properties": {
                "D": {"type": "integer", "minimum": 2},
                "betas": {
                    "type": "object",
                    "patternProperties": {"^[0-9]+$": {"type": "number", "minimum": 0}},
                    "additionalProperties": False,
                },
            },
            "required": ["D", "betas"],
            "additionalProperties": False,
        },
        "grid": {
            "type": "object",
            "properties": {
                "points": {"type": "integer", "minimum": 16},
                "extent": {"type": "number", "exclusiveMinimum": 0},
                "quad_nodes": {"type": "integer", "minimum": 4},
                "max_sigma": {"type": "number", "exclusiveMinimum": 0},
                "boundary_tol": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "seed": {"type": "integer", "minimum": 0},
        "evaluate": {
            "type": "object",
            "properties": {"alpha": _ALPHA, "check_lemma": {"type": "boolean"}},
            "required": ["alpha"],
            "additionalProperties": False,
        },
        "minimize": {
            "type": "object",
            "properties": {
                "k": {"type": "integer", "minimum": 1},
                "fd_step": {"type": "number", "exclusiveMinimum": 0},
                "max_iters": {"type": "integer", "minimum": 1},
                "tol_value": {"type": "number", "exclusiveMinimum": 0},
                "tol_l1": {"type": "number", "exclusiveMinimum": 0},
                "tol_pg": {"type": "number", "exclusiveMinimum": 0},
                "starts": {"type": "integer", "minimum": 1},
                "gradient": {"enum": ["adjoint", "fd"]},
            },
            "additionalProperties": False,
        },
        "oracle": {
            "type": "object",
            "properties": {
                "alpha": _ALPHA,
                "target": {"enum": ["psi", "p"]},
                "atoms": {"type": "integer", "minimum": 100},
                "min_atoms": {"type": "integer", "minimum": 1},
                "replicas": {"type": "integer", "minimum": 2},
            },
            "required": ["alpha"],
            "additionalProperties": False,
        },
        "finite_n": {
            "type": "object",
            "properties": {
                "N": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
                "samples": {"type": "integer", "minimum": 1},
                "control_variate": {"type": "boolean"},
            },
            "required": ["N"],
            "additionalProperties": False,
        },
    },
    "required": ["model"],
    "additionalProperties": False,
}


class ConfigError(ValueError):
    pass


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from exc
    return cfg


def _grid(cfg: dict, args) -> GridSpec:
    g = dict(cfg.get("grid", {}))
    if args.grid_points is not None:
        g["points"] = args.grid_points
    if args.grid_extent is not None:
        g["extent"] = args.grid_extent
    return GridSpec(**g)


def _warn_convexity(xi: MixtureXi):
    if xi.is_zero:
        return
    rep = check_convexity_sample(xi, trials=2000, rng_seed=0)
    if not rep.convex:
        print(
            f"warning: xi violates convexity on sampled PSD pairs (max relative violation {rep.max_violation:.2e})",
            file=sys.stderr,
        )


def _section(cfg, name):
    if name not in cfg:
        raise ConfigError(f"config has no '{name}' section")
    return cfg[name]


def cmd_evaluate(cfg, args) -> dict:
    xi = MixtureXi.from_dict(cfg["model"])
    sec = _section(cfg, "evaluate")
    alpha = StepCdf.from_dict(sec["alpha"])
    _warn_convexity(xi)
    grid = default_grid(xi, _grid(cfg, args)) if not xi.is_zero else _grid(cfg, args)
    terms = f_terms(xi, alpha, grid)
    out = {"value": terms.value, "terms": terms.to_dict(), "grid": grid.to_dict(), "alpha": alpha.to_dict()}
    if args.check_lemma or sec.get("check_lemma", False):
        p = p_functional(xi, lemma_path(alpha, xi.dim), grid)
        out["p_value"] = p
        out["discrepancy"] = abs(p - terms.value)
    return out


def cmd_minimize(cfg, args) -> dict:
    xi = MixtureXi.from_dict(cfg["model"])
    sec = dict(cfg.get("minimize", {}))
    starts = sec.pop("starts", 1)
    _warn_convexity(xi)
    opts = MinimizeOptions(grid=_grid(cfg, args), starts=starts, check_convexity=False, **sec)
    if starts > 1:
        rep = multistart(xi, opts, n_starts=starts, seed=args.seed)
        best = min(rep.results, key=lambda r: r.value)
        out = best.to_dict()
        out["uniqueness"] = rep.to_dict()
        return out
    return minimize_f(xi, opts, seed=args.seed).to_dict()


def cmd_oracle(cfg, args) -> dict:
    xi = MixtureXi.from_dict(cfg["model"])
    sec = _section(cfg, "oracle")
    alpha = StepCdf.from_dict(sec["alpha"])
    pi = lemma_path(alpha, xi.dim)
    q = half_grad_path(xi, pi)
    kw = {k: sec[k] for k in ("atoms", "min_atoms", "replicas") if k in sec}
    spec = spec_for_path(q, **kw)
    if sec.get("target", "p") == "psi":
        est = mc_psi(q, spec, seed=args.seed)
        ref = psi_of_path(q, _grid(cfg, args))
    else:
        est = mc_p_functional(xi, pi, spec, seed=args.seed)
        ref = p_functional(xi, pi, _grid(cfg, args))
    out = est.to_dict()
    out["recursion_value"] = ref
    out["z_score"] = (est.mean - ref) / est.std_error if est.std_error > 0 else 0.0
    return out


def cmd_finite_n(cfg, args) -> list:
    xi = MixtureXi.from_dict(cfg["model"])
    sec = _section(cfg, "finite_n")
    rows = []
    for N in sec["N"]:
        est = estimate_FN(xi, N, sec.get("samples", 400), seed=args.seed, control_variate=sec.get("control_variate", True))
        rows.append(est.to_dict())
    return rows


def cmd_verify(cfg, args) -> dict:
    xi = MixtureXi.from_dict(cfg["model"])
    rows = default_suite(xi, _grid(cfg, args), seed=args.seed)
    ok = all(r.passed for r in rows if not r.informational)
    return {"passed": ok, "checks": [r.to_dict() for r in rows]}


COMMANDS = {
    "evaluate": cmd_evaluate,
    "minimize": cmd_minimize,
    "oracle": cmd_oracle,
    "finite-n": cmd_finite_n,
    "verify": cmd_verify,
}


def _to_csv(command: str, result) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    if command == "finite-n":
        w.writerow(["N", "mean", "se", "samples", "seed"])
        for r in result:
            w.writerow([r["N"], r["mean"], r["se"], r["samples"], r["seed"]])
    elif command == "minimize":
        w.writerow(["iteration", "value"])
        for i, v in enumerate(result["trace"]):
            w.writerow([i, v])
    elif command == "verify":
        w.writerow(["check", "status", "value", "threshold", "detail"])
        for r in result["checks"]:
            status = "info" if r["informational"] else ("pass" if r["passed"] else "FAIL")
            w.writerow([r["name"], status, r["value"], r["threshold"], r["detail"]])
    else:
        w.writerow(["key", "value"])
        flat = dict(result)
        for key in ("terms",):
            for k, v in flat.pop(key, {}).items():
                flat[f"{key}.{k}"] = v
        for k, v in flat.items():
            if not isinstance(v, (dict, list)):
                w.writerow([k, v])
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="potts-parisi", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="JSON config file")
    p.add_argument("--seed", type=int, default=None, help="overrides config seed")
    p.add_argument("--grid-points", type=int, default=None)
    p.add_argument("--grid-extent", type=float, default=None)
    p.add_argument("--threads", type=int, default=1, help="worker cap (computations are single-threaded)")
    p.add_argument("--out", default=None, help="output file (default stdout)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--check-lemma", action="store_true", help="evaluate: also compute P(Psi o alpha^-1)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is None:
            args.seed = cfg.get("seed", 0)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            result = COMMANDS[args.command](cfg, args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ComputationError as exc:
        print(f"computation failed: {exc}", file=sys.stderr)
        return 1
    if args.format == "csv":
        text = _to_csv(args.command, result)
    else:
        text = json.dumps(result, indent=2) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.command == "verify" and not result["passed"]:
        return 1
    return 0
