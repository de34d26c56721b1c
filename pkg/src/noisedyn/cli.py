"""Batch command-line interface.

Every subcommand reads a flat ``key=value`` configuration (defaults,
then an optional ``--config`` file, then positional overrides), runs
one analysis, writes its outputs under ``--out``, and prints a one-line
summary.  A 16-hex-digit hash of the effective configuration is stamped
into every output file, so artifacts can be traced back to the exact
run that produced them.  ``--workers`` only parallelizes embarrassingly
parallel trial loops and never changes any output byte; it is excluded
from the configuration hash.

Exit codes: 0 success, 2 configuration error, 3 stationary solve did
not converge, 4 an ``--assert`` condition failed.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import measures
from .domains import detect_domains, verify_r_transitivity
from .families import BUILTIN_NAMES, make_builtin
from .perturbation import (
    PerturbationSpace,
    PerturbationStream,
    iterate,
    write_orbit_csv,
)
from .phase_space import GridSpec
from .ulam import (
    NonConvergenceError,
    build_transition,
    stationary_vector,
    write_matrix_coo,
    write_vector_csv,
)


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


# ---------------------------------------------------------------------------
# Config plumbing


def _parse_scalar(text: str):
    text = text.strip()
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def _parse_value(text: str):
    if "," in text:
        return [_parse_scalar(p) for p in text.split(",") if p.strip() != ""]
    return _parse_scalar(text)


def _load_config_file(path: str) -> dict:
    out = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line without '=': {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = _parse_value(value)
    return out


def _merge_config(defaults: dict, file_cfg: dict, overrides: dict) -> dict:
    cfg = dict(defaults)
    for source in (file_cfg, overrides):
        for key, value in source.items():
            if key not in defaults and not key.startswith("family."):
                raise ConfigError(f"unknown configuration key {key!r}")
            cfg[key] = value
    return cfg


def config_hash(command: str, cfg: dict) -> str:
    """First 16 hex digits of the sha256 of the canonical configuration."""
    payload = json.dumps({"command": command, **cfg}, sort_keys=True, default=str)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _as_float_list(value, name: str):
    if isinstance(value, (int, float)):
        return [float(value)]
    if isinstance(value, list):
        return [float(v) for v in value]
    raise ConfigError(f"{name} must be a number or comma-separated numbers")


def _as_int_list(value, name: str):
    out = _as_float_list(value, name)
    ints = [int(v) for v in out]
    if any(i != v for i, v in zip(ints, out)):
        raise ConfigError(f"{name} must contain integers")
    return ints


def _family_from_cfg(cfg: dict):
    name = cfg.get("family")
    if name not in BUILTIN_NAMES:
        raise ConfigError(f"family must be one of {', '.join(BUILTIN_NAMES)}")
    options = {
        key.split(".", 1)[1]: value
        for key, value in cfg.items()
        if key.startswith("family.")
    }
    try:
        return make_builtin(name, **options)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _grid_from_cfg(fam, cfg: dict) -> GridSpec:
    cells = _as_int_list(cfg["cells"], "cells")
    if len(cells) == 1 and fam.dim > 1:
        cells = cells * fam.dim
    if len(cells) != fam.dim:
        raise ConfigError("cells must match the family dimension")
    return GridSpec(cells)


def _space_from_cfg(fam, cfg: dict) -> PerturbationSpace:
    try:
        return PerturbationSpace(fam.n_params, float(cfg["epsilon"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _x0_from_cfg(fam, cfg: dict) -> np.ndarray:
    x0 = np.asarray(_as_float_list(cfg["x0"], "x0"))
    if x0.size != fam.dim:
        raise ConfigError(f"x0 must have {fam.dim} coordinates")
    return x0


def _json_ready(obj):
    if isinstance(obj, dict):
        return {str(k): _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_json_ready(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


def _write_json(path: Path, command: str, digest: str, seed, payload: dict) -> None:
    doc = {"command": command, "config_hash": digest, "seed": seed}
    doc.update(_json_ready(payload))
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def _domain_payload(domains) -> list:
    return [
        {
            "cells": dom.cells.tolist(),
            "parts": [p.tolist() for p in dom.parts],
            "period": dom.period,
            "minimal": dom.minimal,
            "volume": dom.volume,
        }
        for dom in domains
    ]


# ---------------------------------------------------------------------------
# Subcommands

_DEFAULTS = {
    "orbit": {
        "family": "linear-sink",
        "epsilon": 0.1,
        "seed": 0,
        "x0": 0.0,
        "steps": 1000,
    },
    "ulam": {
        "family": "linear-sink",
        "epsilon": 0.1,
        "seed": 0,
        "cells": 64,
        "points_per_cell": 32,
        "samples_per_point": 32,
    },
    "domains": {
        "family": "double-sink",
        "epsilon": 0.05,
        "seed": 0,
        "cells": 128,
        "points_per_cell": 32,
        "samples_per_point": 32,
        "theta": 0.0,
        "check_transitivity": False,
    },
    "stationary": {
        "family": "linear-sink",
        "epsilon": 0.1,
        "seed": 0,
        "cells": 64,
        "points_per_cell": 32,
        "samples_per_point": 32,
        "theta": 0.0,
        "tol": 1e-8,
    },
    "basins": {
        "family": "double-sink",
        "epsilon": 0.05,
        "seed": 0,
        "cells": 128,
        "points_per_cell": 32,
        "samples_per_point": 32,
        "theta": 0.0,
        "x0": 0.8,
        "trials": 400,
        "horizon": 400,
    },
    "hypa": {
        "family": "torus-additive",
        "epsilon": 0.02,
        "seed": 0,
        "x0": 0.25,
        "samples": 4096,
        "sectors": 16,
    },
    "hypb": {
        "family": "linear-sink",
        "epsilon": 0.1,
        "seed": 0,
        "x0": 0.0,
        "k_steps": 20,
        "samples": 4096,
        "ladder": [16, 32, 64, 128],
        "ratio_threshold": 0.8,
    },
    "bowen": {
        "family": "bowen-eye",
        "epsilon": 0.0,
        "seed": 0,
        "x0": [0.5, 0.3],
        "checkpoints": [1000, 10000, 100000],
        "axis": 1,
        "separatrix_samples": 256,
    },
    "sinkcheck": {
        "family": "linear-sink",
        "epsilon": 0.1,
        "seed": 0,
        "orbit": 0.0,
        "delta": 0.5,
        "epsilons": [0.01, 0.05, 0.1],
        "trials": 8,
        "horizon": 2000,
        "diam_slope": 4.0,
    },
    "sweep": {
        "family": "triple-sink",
        "seed": 0,
        "epsilon": 0.0,
        "epsilons": [0.01, 0.02, 0.05, 0.1, 0.2, 0.3],
        "cells": 160,
        "points_per_cell": 20,
        "samples_per_point": 25,
        "theta": 0.0,
    },
}


def _cmd_orbit(cfg, out_dir, digest, workers):
    fam = _family_from_cfg(cfg)
    space = _space_from_cfg(fam, cfg)
    stream = PerturbationStream(int(cfg["seed"]), 0)
    sample = iterate(fam, _x0_from_cfg(fam, cfg), space, stream, int(cfg["steps"]))
    path = out_dir / "orbit.csv"
    write_orbit_csv(
        path,
        sample,
        comments=[
            f"config_hash={digest}",
            f"seed={cfg['seed']}",
            f"family={fam.name}",
            f"epsilon={space.epsilon:.17g}",
        ],
    )
    return {
        "files": [path.name],
        "n_steps": sample.n_steps,
        "final_state": sample.states[-1],
    }


def _build_tm(fam, cfg):
    space = _space_from_cfg(fam, cfg)
    grid = _grid_from_cfg(fam, cfg)
    return build_transition(
        fam,
        space,
        grid,
        seed=int(cfg["seed"]),
        points_per_cell=int(cfg["points_per_cell"]),
        samples_per_point=int(cfg["samples_per_point"]),
    )


def _cmd_ulam(cfg, out_dir, digest, workers):
    fam = _family_from_cfg(cfg)
    tm = _build_tm(fam, cfg)
    path = out_dir / "matrix.coo.csv"
    write_matrix_coo(
        path,
        tm,
        comments=[f"config_hash={digest}", f"seed={cfg['seed']}", f"family={fam.name}"],
    )
    row_sums = np.asarray(tm.P.sum(axis=1)).ravel()
    return {
        "files": [path.name],
        "n_cells": tm.n_cells,
        "nnz": int(tm.P.nnz),
        "max_row_sum_error": float(np.abs(row_sums - 1.0).max()),
    }


def _cmd_domains(cfg, out_dir, digest, workers):
    fam = _family_from_cfg(cfg)
    tm = _build_tm(fam, cfg)
    domains = detect_domains(tm.P, theta=float(cfg["theta"]))
    payload = {"n_domains": len(domains), "domains": _domain_payload(domains)}
    if cfg.get("check_transitivity"):
        payload["transitivity"] = [
            dict(zip(("ok", "min_coverage"), verify_r_transitivity(tm.P, dom)))
            for dom in domains
        ]
    _write_json(out_dir / "domains.json", "domains", digest, cfg["seed"], payload)
    payload["files"] = ["domains.json"]
    return payload


def _cmd_stationary(cfg, out_dir, digest, workers):
    fam = _family_from_cfg(cfg)
    tm = _build_tm(fam, cfg)
    domains = detect_domains(tm.P, theta=float(cfg["theta"]))
    files = []
    masses = []
    for i, dom in enumerate(domains):
        v = stationary_vector(tm, dom, tol=float(cfg["tol"]))
        name = f"stationary_{i}.csv"
        write_vector_csv(
            out_dir / name,
            v,
            comments=[
                f"config_hash={digest}",
                f"seed={cfg['seed']}",
                f"domain={i}",
                f"period={dom.period}",
            ],
        )
        files.append(name)
        masses.append(float(v.sum()))
    return {
        "files": files,
        "n_domains": len(domains),
        "masses": masses,
        "periods": [dom.period for dom in domains],
    }


def _cmd_basins(cfg, out_dir, digest, workers):
    fam = _family_from_cfg(cfg)
    tm = _build_tm(fam, cfg)
    domains = detect_domains(tm.P, theta=float(cfg["theta"]))
    profile = measures.basin_classify(
        fam,
        tm.grid,
        _x0_from_cfg(fam, cfg),
        _space_from_cfg(fam, cfg),
        domains,
        n_trials=int(cfg["trials"]),
        horizon=int(cfg["horizon"]),
        seed=int(cfg["seed"]),
        workers=workers,
    )
    payload = {
        "n_domains": len(domains),
        "fractions": profile.fractions,
        "unresolved": profile.unresolved,
        "n_trials": profile.n_trials,
        "horizon": profile.horizon,
    }
    _write_json(out_dir / "basins.json", "basins", digest, cfg["seed"], payload)
    payload["files"] = ["basins.json"]
    return payload


def _cmd_hypa(cfg, out_dir, digest, workers):
    fam = _family_from_cfg(cfg)
    report = measures.check_hypothesis_A(
        fam,
        _x0_from_cfg(fam, cfg),
        _space_from_cfg(fam, cfg),
        seed=int(cfg["seed"]),
        n_samples=int(cfg["samples"]),
        n_sectors=int(cfg["sectors"]),
    )
    payload = {
        "xi_hat": report.xi_hat,
        "epsilon": report.epsilon,
        "center": report.center,
        "sector_radii": report.sector_radii,
        "n_samples": report.n_samples,
    }
    _write_json(out_dir / "hypa.json", "hypa", digest, cfg["seed"], payload)
    payload["files"] = ["hypa.json"]
    return payload


def _cmd_hypb(cfg, out_dir, digest, workers):
    fam = _family_from_cfg(cfg)
    report = measures.check_no_atoms(
        fam,
        _x0_from_cfg(fam, cfg),
        _space_from_cfg(fam, cfg),
        seed=int(cfg["seed"]),
        k_steps=int(cfg["k_steps"]),
        n_samples=int(cfg["samples"]),
        cells_ladder=_as_int_list(cfg["ladder"], "ladder"),
        ratio_threshold=float(cfg["ratio_threshold"]),
    )
    payload = {
        "cells_per_axis": report.cells_per_axis,
        "max_masses": report.max_masses,
        "halving_ratios": report.halving_ratios,
        "atom_suspected": report.atom_suspected,
        "k_steps": report.k_steps,
        "epsilon": report.epsilon,
    }
    _write_json(out_dir / "hypb.json", "hypb", digest, cfg["seed"], payload)
    payload["files"] = ["hypb.json"]
    return payload


def _cmd_bowen(cfg, out_dir, digest, workers):
    from . import bowen

    fam = _family_from_cfg(cfg)
    aux = fam.aux
    kappa, sigma, eta = aux["kappa"], aux["sigma"], aux["eta"]
    saddle_data = bowen.saddles(kappa, sigma, eta)
    stable, unstable = bowen.eigenvalue_products(kappa, sigma, eta)
    pts = bowen.separatrix_points(int(cfg["separatrix_samples"]))
    flowed = bowen.flow_time_one_many(pts, kappa, sigma, eta, aux["step"])
    h_dev = float(np.abs(bowen.hamiltonian(flowed[:, 0], flowed[:, 1]) - bowen.H_SADDLE).max())

    epsilon = float(cfg["epsilon"])
    space = PerturbationSpace(fam.n_params, epsilon) if epsilon > 0 else None
    osc, averages = measures.time_average_oscillation(
        fam,
        _x0_from_cfg(fam, cfg),
        measures.make_observable("coord", axis=int(cfg["axis"])),
        _as_int_list(cfg["checkpoints"], "checkpoints"),
        space=space,
        seed=int(cfg["seed"]),
    )
    payload = {
        "saddles": [p for p, _ in saddle_data],
        "saddle_eigenvalues": [ev for _, ev in saddle_data],
        "stable_product": stable,
        "unstable_product": unstable,
        "product_margin": stable - unstable,
        "separatrix_return_deviation": h_dev,
        "oscillation": osc,
        "averages": {str(k): v for k, v in averages.items()},
        "epsilon": epsilon,
    }
    _write_json(out_dir / "bowen.json", "bowen", digest, cfg["seed"], payload)
    payload["files"] = ["bowen.json"]
    return payload


def _cmd_sinkcheck(cfg, out_dir, digest, workers):
    fam = _family_from_cfg(cfg)
    orbit_vals = _as_float_list(cfg["orbit"], "orbit")
    pts = np.asarray(orbit_vals, dtype=float).reshape(-1, fam.dim)
    report = measures.verify_sink_perturbation(
        fam,
        pts,
        delta=float(cfg["delta"]),
        epsilons=_as_float_list(cfg["epsilons"], "epsilons"),
        seed=int(cfg["seed"]),
        n_trials=int(cfg["trials"]),
        horizon=int(cfg["horizon"]),
        diam_slope=float(cfg["diam_slope"]),
    )
    payload = {
        "passed": report.passed,
        "cond1_ok": report.cond1_ok,
        "cond1_margin": report.cond1_margin,
        "cond2_ok": report.cond2_ok,
        "beta_hat": report.beta_hat,
        "cond3_ok": report.cond3_ok,
        "diameters": {f"{k:.17g}": v for k, v in report.diameters.items()},
        "delta": report.delta,
    }
    _write_json(out_dir / "sinkcheck.json", "sinkcheck", digest, cfg["seed"], payload)
    payload["files"] = ["sinkcheck.json"]
    return payload


def _cmd_sweep(cfg, out_dir, digest, workers):
    fam = _family_from_cfg(cfg)
    grid = _grid_from_cfg(fam, cfg)
    results = []
    for eps in _as_float_list(cfg["epsilons"], "epsilons"):
        space = PerturbationSpace(fam.n_params, eps)
        tm = build_transition(
            fam,
            space,
            grid,
            seed=int(cfg["seed"]),
            points_per_cell=int(cfg["points_per_cell"]),
            samples_per_point=int(cfg["samples_per_point"]),
        )
        domains = detect_domains(tm.P, theta=float(cfg["theta"]))
        results.append(
            {
                "epsilon": eps,
                "n_domains": len(domains),
                "periods": [dom.period for dom in domains],
                "volumes": [dom.volume for dom in domains],
            }
        )
    payload = {"sweep": results, "n_domains": [r["n_domains"] for r in results]}
    _write_json(out_dir / "sweep.json", "sweep", digest, cfg["seed"], payload)
    payload["files"] = ["sweep.json"]
    return payload


_HANDLERS = {
    "orbit": _cmd_orbit,
    "ulam": _cmd_ulam,
    "domains": _cmd_domains,
    "stationary": _cmd_stationary,
    "basins": _cmd_basins,
    "hypa": _cmd_hypa,
    "hypb": _cmd_hypb,
    "bowen": _cmd_bowen,
    "sinkcheck": _cmd_sinkcheck,
    "sweep": _cmd_sweep,
}


# ---------------------------------------------------------------------------
# Assertions


def _flatten(prefix: str, obj, out: dict) -> None:
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, out)
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            _flatten(f"{prefix}.{i}", v, out)
    else:
        out[prefix] = obj


_OPS = {
    "<=": lambda a, b: a <= b,
    ">=": lambda a, b: a >= b,
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    ">": lambda a, b: a > b,
}


def _check_assertion(expr: str, flat: dict) -> bool:
    for op in ("<=", ">=", "==", "!=", "<", ">"):
        if op in expr:
            key, raw = expr.split(op, 1)
            key = key.strip()
            if key not in flat:
                raise ConfigError(f"assertion key {key!r} not found in result")
            left = flat[key]
            right = _parse_scalar(raw)
            if isinstance(left, bool):
                left = float(left)
            if isinstance(right, bool):
                right = float(right)
            try:
                return _OPS[op](float(left), float(right))
            except (TypeError, ValueError):
                return _OPS[op](str(left), str(raw.strip()))
    raise ConfigError(f"assertion {expr!r} has no comparison operator")


# ---------------------------------------------------------------------------
# Entry point


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="noisedyn",
        description="Numerical experiments on maps driven by bounded parameter noise.",
    )
    parser.add_argument("command", choices=sorted(_HANDLERS))
    parser.add_argument("overrides", nargs="*", help="key=value configuration overrides")
    parser.add_argument("--config", help="file of key=value lines")
    parser.add_argument("--out", default="noisedyn-out", help="output directory")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument(
        "--assert",
        dest="assertions",
        action="append",
        default=[],
        metavar="EXPR",
        help="post-run check like 'xi_hat>=0.018'; exit 4 on failure",
    )
    args = parser.parse_intermixed_args(argv)

    try:
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1")
        overrides = {}
        for item in args.overrides:
            if "=" not in item:
                raise ConfigError(f"override {item!r} is not key=value")
            key, value = item.split("=", 1)
            overrides[key.strip()] = _parse_value(value)
        file_cfg = _load_config_file(args.config) if args.config else {}
        cfg = _merge_config(_DEFAULTS[args.command], file_cfg, overrides)
        digest = config_hash(args.command, cfg)

        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        payload = _HANDLERS[args.command](cfg, out_dir, digest, args.workers)
        _write_json(out_dir / f"{args.command}.summary.json", args.command, digest, cfg["seed"], payload)

        flat: dict = {}
        _flatten("", _json_ready(payload), flat)
        for expr in args.assertions:
            if not _check_assertion(expr, flat):
                print(f"assertion failed: {expr}", file=sys.stderr)
                return 4
        print(f"{args.command} ok config_hash={digest} out={out_dir}")
        return 0
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NonConvergenceError as exc:
        print(f"stationary solve failed: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
