"""Command-line front end.

Subcommands build lattices and run the Monte Carlo experiments, writing CSV
artifacts, a rendered PNG, and a manifest.json into the output directory.
Configs are TOML with a versioned `schema` key and strict key checking;
re-running with a manifest.json as the config reproduces the artifact
byte-for-byte.

Exit codes: 0 success, 2 config error, 3 cap exceeded, 4 invariant violation.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ImportError:  # Python 3.10
    import tomli as tomllib

from . import __version__
from .algebra import CrtMap, MapKind, PrimeTower
from .codes import LinearCode
from .errors import CapExceededError, ConfigError, InvariantViolation
from .lattice import MultilevelLattice, ensemble_quantization_sweep
from .nested import NestedLatticeCode
from .plots import (
    plot_complexity,
    plot_cosets,
    plot_error_rates,
    plot_nested_summary,
    plot_quantization_sweep,
    plot_rate_curve,
)
from .sim import (
    complexity_table,
    error_rate_sim,
    nested_error_sim,
    rate_curve,
    write_complexity_csv,
    write_csv,
    write_error_rate_csv,
    write_nested_trials_csv,
    write_rate_curve_csv,
)

_SCHEMAS = {
    "construct": {
        "required": {"schema", "lattice"},
        "optional": set(),
    },
    "decode-sim": {
        "required": {"schema", "lattice", "snr_db", "trials"},
        "optional": {"decoders", "wraps", "seed"},
    },
    "rate-curve": {
        "required": {"schema", "snr_db", "samples"},
        "optional": {"primes", "tower", "map", "wraps", "seed"},
    },
    "nested-sim": {
        "required": {"schema", "code", "snr_db", "trials"},
        "optional": {"wraps", "seed"},
    },
    "gquant": {
        "required": {"schema", "n_values", "trials"},
        "optional": {"ensemble", "xi", "levels", "delta", "seed"},
    },
    "complexity": {
        "required": {"schema", "q_values"},
        "optional": set(),
    },
}

_LATTICE_KEYS = {"tower", "map", "scale", "codes"}
_CODE_KEYS = {"modulus", "generator"}
_NESTED_KEYS = {"tower", "n", "m_c", "m_f", "power", "P", "seed"}


def _check_keys(table: dict, allowed: set, where: str):
    unknown = set(table) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def load_config(path: Path, command: str) -> tuple[dict, int | None]:
    """Load a TOML config or a previously written manifest.

    Returns (config, seed-from-manifest).  Manifests carry the fully resolved
    config so reruns regenerate artifacts byte-for-byte.
    """
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    if path.suffix == ".json":
        with open(path, "rb") as fh:
            data = json.load(fh)
        if not isinstance(data, dict) or "config" not in data or "command" not in data:
            raise ConfigError(f"{path} is not a manifest")
        if data["command"] != command:
            raise ConfigError(f"manifest was written by {data['command']!r}, not {command!r}")
        return data["config"], int(data.get("seed", 0))
    try:
        with open(path, "rb") as fh:
            config = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}") from exc
    return config, None


def validate_config(config: dict, command: str) -> dict:
    spec = _SCHEMAS[command]
    expected_schema = f"{command}-v1"
    if config.get("schema") != expected_schema:
        raise ConfigError(f"config schema must be {expected_schema!r}, got {config.get('schema')!r}")
    _check_keys(config, spec["required"] | spec["optional"], "config")
    missing = spec["required"] - set(config)
    if missing:
        raise ConfigError(f"missing config keys: {sorted(missing)}")
    if "lattice" in config:
        _check_keys(config["lattice"], _LATTICE_KEYS, "lattice")
        for i, code in enumerate(config["lattice"].get("codes", [])):
            _check_keys(code, _CODE_KEYS, f"lattice.codes[{i}]")
    if "code" in config:
        _check_keys(config["code"], _NESTED_KEYS, "code")
    return config


def _build_lattice(table: dict) -> MultilevelLattice:
    try:
        tower = PrimeTower(tuple((int(p), int(e)) for p, e in table["tower"]))
        kind = MapKind(table.get("map", "ring"))
        cmap = CrtMap.ring_iso(tower) if kind is MapKind.RING else CrtMap.module_iso(tower)
        codes = []
        for entry in table["codes"]:
            gen = np.asarray(entry["generator"], dtype=np.int64)
            if gen.ndim == 1:
                gen = gen[:, None]
            codes.append(LinearCode(int(entry["modulus"]), gen))
        return MultilevelLattice(cmap, tuple(codes), float(table.get("scale", 1.0)))
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"bad lattice spec: {exc}") from exc


def _build_map(config: dict) -> CrtMap:
    try:
        if "tower" in config:
            tower = PrimeTower(tuple((int(p), int(e)) for p, e in config["tower"]))
        elif "primes" in config:
            tower = PrimeTower.squarefree(tuple(int(p) for p in config["primes"]))
        else:
            raise ConfigError("need `primes` or `tower`")
        kind = MapKind(config.get("map", "ring"))
        return CrtMap.ring_iso(tower) if kind is MapKind.RING else CrtMap.module_iso(tower)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad map spec: {exc}") from exc


def _config_digest(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()


def _write_json(path: Path, payload: dict):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _write_manifest(out: Path, command: str, config: dict, seed: int, artifacts: list[str]):
    _write_json(
        out / "manifest.json",
        {
            "tool": "crtlattice",
            "version": __version__,
            "command": command,
            "seed": seed,
            "config_sha256": _config_digest(config),
            "config": config,
            "artifacts": sorted(artifacts),
        },
    )


# -- subcommand runners -------------------------------------------------------


def _run_construct(config: dict, out: Path, seed: int, threads: int) -> list[str]:
    lattice = _build_lattice(config["lattice"])
    reps = lattice.coset_representatives()
    _write_json(out / "lattice.json", lattice.to_dict())
    with open(out / "cosets.csv", "w", encoding="utf-8", newline="\n") as fh:
        for row in reps:
            fh.write(",".join(str(int(v)) for v in row) + "\n")
    plot_cosets(reps, lattice.q, out / "cosets.png")
    return ["lattice.json", "cosets.csv", "cosets.png"]


def _run_decode_sim(config: dict, out: Path, seed: int, threads: int) -> list[str]:
    lattice = _build_lattice(config["lattice"])
    points = error_rate_sim(
        lattice,
        [float(s) for s in config["snr_db"]],
        trials=int(config["trials"]),
        seed=seed,
        decoders=tuple(config.get("decoders", ("msd", "smd", "pmd"))),
        wraps=int(config.get("wraps", 4)),
        threads=threads,
    )
    write_error_rate_csv(points, out / "error_rate.csv")
    plot_error_rates(points, out / "error_rate.png")
    return ["error_rate.csv", "error_rate.png"]


def _run_rate_curve(config: dict, out: Path, seed: int, threads: int) -> list[str]:
    cmap = _build_map(config)
    points = rate_curve(
        cmap,
        [float(s) for s in config["snr_db"]],
        samples=int(config["samples"]),
        seed=seed,
        wraps=int(config.get("wraps", 6)),
        threads=threads,
    )
    write_rate_curve_csv(points, out / "rate_curve.csv")
    plot_rate_curve(points, cmap.q, out / "rate_curve.png")
    return ["rate_curve.csv", "rate_curve.png"]


def _run_nested_sim(config: dict, out: Path, seed: int, threads: int) -> list[str]:
    try:
        code = NestedLatticeCode.from_config(config["code"])
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"bad nested-code spec: {exc}") from exc
    trials_log, summaries = nested_error_sim(
        code,
        [float(s) for s in config["snr_db"]],
        trials=int(config["trials"]),
        seed=seed,
        wraps=int(config.get("wraps", 6)),
        threads=threads,
    )
    write_nested_trials_csv(trials_log, out / "nested_trials.csv")
    write_csv(
        out / "nested_summary.csv",
        [
            "snr_db",
            "trials",
            "errors",
            "wer",
            "wer_lo",
            "wer_hi",
            "mean_power",
            "mean_effective_noise",
            "effective_noise_bound",
        ],
        [
            (
                s.snr_db,
                s.trials,
                s.errors,
                s.wer,
                s.wer_lo,
                s.wer_hi,
                s.mean_power,
                s.mean_effective_noise,
                s.effective_noise_bound,
            )
            for s in summaries
        ],
    )
    plot_nested_summary(summaries, out / "nested_sim.png")
    return ["nested_trials.csv", "nested_summary.csv", "nested_sim.png"]


def _run_gquant(config: dict, out: Path, seed: int, threads: int) -> list[str]:
    rows = ensemble_quantization_sweep(
        [int(n) for n in config["n_values"]],
        trials=int(config["trials"]),
        seed=seed,
        xi=float(config.get("xi", 0.75)),
        num_levels=int(config.get("levels", 2)),
        delta=float(config.get("delta", 0.1)),
        ensemble=int(config.get("ensemble", 6)),
        threads=threads,
    )
    write_csv(
        out / "gquant.csv",
        ["kind", "n", "q", "tower", "dims", "nsm_mean", "nsm_se", "sphere_bound"],
        [
            (r.kind, r.n, r.q, r.tower, "x".join(map(str, r.dims)) or "-", r.nsm_mean, r.nsm_se, r.sphere_bound)
            for r in rows
        ],
    )
    plot_quantization_sweep(rows, out / "gquant.png")
    return ["gquant.csv", "gquant.png"]


def _run_complexity(config: dict, out: Path, seed: int, threads: int) -> list[str]:
    try:
        rows = complexity_table(config["q_values"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    write_complexity_csv(rows, out / "complexity.csv")
    plot_complexity(rows, out / "complexity.png")
    return ["complexity.csv", "complexity.png"]


_RUNNERS = {
    "construct": _run_construct,
    "decode-sim": _run_decode_sim,
    "rate-curve": _run_rate_curve,
    "nested-sim": _run_nested_sim,
    "gquant": _run_gquant,
    "complexity": _run_complexity,
}


def _parse_snr_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --snr list {text!r}") from exc


def _apply_overrides(config: dict, command: str, args) -> dict:
    config = dict(config)
    if args.snr is not None:
        if "snr_db" not in _SCHEMAS[command]["required"] | _SCHEMAS[command]["optional"] and "snr_db" not in config:
            raise ConfigError(f"--snr does not apply to {command}")
        config["snr_db"] = _parse_snr_list(args.snr)
    if args.trials is not None:
        key = "samples" if command == "rate-curve" else "trials"
        config[key] = args.trials
    if args.decoders is not None:
        config["decoders"] = [d.strip() for d in args.decoders.split(",") if d.strip()]
    if args.wraps is not None:
        config["wraps"] = args.wraps
    return config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crtlattice",
        description="Multilevel lattice constructions and Monte Carlo experiments",
    )
    parser.add_argument("--version", action="version", version=f"crtlattice {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _RUNNERS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, type=Path, help="TOML config (or a manifest.json)")
        cmd.add_argument("--out", required=True, type=Path, help="output directory")
        cmd.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
        cmd.add_argument("--trials", type=int, default=None, help="trial/sample count override")
        cmd.add_argument("--snr", type=str, default=None, help="comma-separated SNR grid in dB")
        cmd.add_argument("--decoders", type=str, default=None, help="comma list from msd,smd,pmd")
        cmd.add_argument("--wraps", type=int, default=None, help="wrapped-density truncation")
        cmd.add_argument("--threads", type=int, default=None, help="worker threads")
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    command = args.command
    config, manifest_seed = load_config(args.config, command)
    config = _apply_overrides(config, command, args)
    config = validate_config(config, command)
    seed = args.seed if args.seed is not None else config.get("seed", manifest_seed if manifest_seed is not None else 0)
    seed = int(seed)
    if "seed" in config:
        config = dict(config)
        config["seed"] = seed
    threads = args.threads if args.threads is not None else 1
    if threads < 1:
        raise ConfigError("--threads must be >= 1")
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    artifacts = _RUNNERS[command](config, out, seed, threads)
    _write_manifest(out, command, config, seed, artifacts)
    for name in artifacts + ["manifest.json"]:
        print(out / name)
    return 0


def main(argv=None) -> int:
    try:
        return run(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CapExceededError as exc:
        print(f"cap exceeded: {exc}", file=sys.stderr)
        return 3
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
