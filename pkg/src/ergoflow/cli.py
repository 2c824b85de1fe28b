"""Command-line front end.

Every subcommand reads `key = value` settings from an optional --config file
and from flags of the same names (flags win). Exit codes: 0 success,
2 configuration error, 3 validation or verification failure, 4 numeric
instability under --strict.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np

from . import __version__
from .entropy import METHODS, count_curve, section_lattice, shift_lattice
from .expansivity import SEED_SETS, arc_seeds, cw_search, discrete_cw_check
from .sections import SectionValidationError, build_pair, build_triple, validation_report
from .spaces import ParameterError, SymbolWord, TorusPoint
from .systems import (
    CAT_LAMBDA,
    SYSTEMS,
    UnsupportedSystemError,
    make_system,
    suspend,
    suspension_distance,
)
from .witness import (
    ConstructionFailure,
    NotFoundError,
    SplitFailure,
    build_witness_tree,
    calibrate_delta0,
    find_unstable_continuum,
    tree_to_dict,
    verify_separated,
)

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY, EXIT_UNSTABLE = 0, 2, 3, 4
MAX_SEED = 2 ** 64


class ConfigError(ValueError):
    def __init__(self, messages):
        super().__init__("; ".join(messages))
        self.messages = list(messages)


# ---------------------------------------------------------------- schema


def _positive(v):
    return v > 0


@dataclass(frozen=True)
class Key:
    kind: type
    default: object = None
    required: bool = False
    check: object = None
    constraint: str = ""
    choices: tuple = ()


def _int_key(default=None, required=False, minimum=None):
    check = None if minimum is None else (lambda v, m=minimum: v >= m)
    return Key(int, default, required, check, f">= {minimum}" if minimum is not None else "")


def _pos(default=None, required=False):
    return Key(float, default, required, _positive, "> 0")


def _choice(choices, default=None, required=False):
    return Key(str, default, required, None, "", tuple(choices))


COMMON = {
    "rng_seed": _int_key(0, minimum=0),
    "threads": _int_key(None, minimum=1),
    "out": Key(str),
}

SCHEMAS = {
    "entropy": {
        "system": _choice(SYSTEMS, required=True),
        "method": _choice(METHODS, required=True),
        "gamma": _pos(required=True),
        "n_min": _int_key(2, minimum=0),
        "n_max": _int_key(None, minimum=0),
        "t_max": _int_key(None, minimum=0),
        "grid": _int_key(None, minimum=1),
        "delta": _pos(),
        "dt": _pos(),
    },
    "expansivity": {
        "system": _choice(SYSTEMS, required=True),
        "delta": _pos(required=True),
        "eps": _pos(0.5),
        "window": _pos(50.0),
        "budget": _int_key(10_000, minimum=1),
        "seed_set": _choice(SEED_SETS, "default"),
        "t_step": _pos(0.25),
        "check": _choice(("flow", "map"), "flow"),
        "n_max": _int_key(20, minimum=1),
    },
    "sections-validate": {
        "system": _choice(SYSTEMS, required=True),
        "delta": _pos(),
        "resolution": _int_key(64, minimum=2),
    },
    "witness": {
        "system": _choice(SYSTEMS, "cat-suspension"),
        "m": _int_key(None, required=True, minimum=1),
        "delta1": _pos(required=True),
        "N": _int_key(None, minimum=1),
        "delta": _pos(0.3),
        "trials": _int_key(200, minimum=1),
    },
    "suspend-metric": {
        "system": _choice(SYSTEMS, required=True),
        "p": Key(str, required=True),
        "q": Key(str, required=True),
        "levels": _int_key(32, minimum=1),
    },
}

DEFAULT_DELTA = {"shift2-suspension": 0.2}
DEFAULT_GRID = {"weak-span": 4}


def parse_config(text: str) -> dict:
    """`key = value` lines with `#` comments -> {key: (value, line)}.

    Keys may use dashes or underscores. Duplicates are rejected citing both
    line numbers.
    """
    entries, errors = {}, []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value'")
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if not key:
            errors.append(f"line {lineno}: missing key")
            continue
        if key in entries:
            errors.append(f"duplicate key {key!r} on lines {entries[key][1]} and {lineno}")
            continue
        entries[key] = (value, lineno)
    if errors:
        raise ConfigError(errors)
    return entries


def _coerce(name: str, spec: Key, raw: str):
    try:
        if spec.kind is int:
            value = int(raw, 0)
        elif spec.kind is float:
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError
        else:
            value = raw
    except ValueError:
        raise ConfigError([f"{name}: expected {spec.kind.__name__}, got {raw!r}"]) from None
    if spec.choices and value not in spec.choices:
        raise ConfigError([f"{name}: must be one of {', '.join(spec.choices)}, got {value!r}"])
    if spec.check is not None and not spec.check(value):
        raise ConfigError([f"{name}: must be {spec.constraint}, got {raw}"])
    return value


@dataclass(frozen=True)
class RunConfig:
    command: str
    params: dict
    rng_seed: int = 0
    threads: int | None = None
    out: str | None = None
    strict: bool = False
    defaulted: tuple = field(default_factory=tuple)

    def echo(self) -> dict:
        return {"command": self.command, **self.params, "rng_seed": self.rng_seed,
                "out": self.out, "strict": self.strict, "defaulted": list(self.defaulted)}


def build_config(command: str, file_entries: dict, flag_entries: dict, strict: bool = False) -> RunConfig:
    """Merge file and flag settings (flags win), type-check and fill defaults.

    Unknown keys are rejected and all missing required keys are reported
    together.
    """
    schema = {**SCHEMAS[command], **COMMON}
    merged = {k: v for k, (v, _) in file_entries.items()}
    merged.update({k: v for k, v in flag_entries.items() if v is not None})
    errors = [f"unknown key {k!r} for {command}" for k in merged if k not in schema]
    missing = [k for k, s in schema.items() if s.required and k not in merged]
    if missing:
        errors.append("missing required keys: " + ", ".join(missing))
    values, defaulted = {}, []
    for k, spec in schema.items():
        if k in merged and k in schema:
            try:
                values[k] = _coerce(k, spec, str(merged[k]))
            except ConfigError as exc:
                errors.extend(exc.messages)
        else:
            values[k] = spec.default
            if not spec.required:
                defaulted.append(k)
    if errors:
        raise ConfigError(errors)
    values.update(_derived_defaults(command, values, defaulted, errors))
    if errors:
        raise ConfigError(errors)
    rng_seed = values.pop("rng_seed")
    if rng_seed >= MAX_SEED:
        raise ConfigError([f"rng_seed: must be a 64-bit unsigned integer, got {rng_seed}"])
    threads, out = values.pop("threads"), values.pop("out")
    return RunConfig(command, values, rng_seed, threads, out, strict, tuple(defaulted))


def _derived_defaults(command, values, defaulted, errors) -> dict:
    out = {}
    system = values.get("system")
    if "delta" in values and values["delta"] is None:
        out["delta"] = DEFAULT_DELTA.get(system, 0.3)
    if command == "entropy":
        if (values["n_max"] is None) == (values["t_max"] is None):
            errors.append("give exactly one of n_max and t_max")
        elif values["n_max"] is None:
            out["n_max"] = values["t_max"]
        n_max = out.get("n_max", values["n_max"])
        if n_max is not None and n_max < values["n_min"]:
            errors.append("n_max must be >= n_min")
        if values["grid"] is None:
            out["grid"] = 9 if system == "shift2-suspension" else DEFAULT_GRID.get(values["method"], 256)
        if system == "interval-logistic":
            errors.append("entropy estimators need a suspension system")
    if command == "witness":
        if values["N"] is None:
            if system != "cat-suspension":
                errors.append("N is required for systems other than cat-suspension")
            else:
                out["N"] = int(math.ceil(math.log(3.0) / math.log(CAT_LAMBDA)))
    return out


# -------------------------------------------------------------- emission


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _metadata(cfg: RunConfig) -> dict:
    return {"version": __version__, "config": cfg.echo()}


def _emit_json(cfg: RunConfig, payload: dict, path: str | None = None):
    text = _dumps({"metadata": _metadata(cfg), **payload})
    target = path or cfg.out
    if target:
        Path(target).write_text(text, encoding="utf-8")
    sys.stdout.write(text)


# ------------------------------------------------------------- commands


def run_entropy(cfg: RunConfig) -> int:
    p = cfg.params
    flow = make_system(p["system"])
    pair = None
    if p["method"].startswith("section") or p["system"] != "shift2-suspension":
        pair = build_pair(flow, p["delta"])
    if p["system"] == "shift2-suspension":
        F = shift_lattice(p["grid"])
    else:
        F = section_lattice(pair, p["grid"])
    ns = range(p["n_min"], p["n_max"] + 1)
    curve = count_curve(p["method"], flow, F, p["gamma"], ns, pair, dt=p["dt"])
    summary = {
        "method": curve.method,
        "gamma": curve.gamma,
        "slope": curve.fit.slope if curve.fit else None,
        "endpoint_rate": curve.fit.endpoint_rate if curve.fit else None,
        "stable": curve.fit.stable if curve.fit else None,
        "fit_window": list(curve.fit_window),
        "resolution": curve.resolution,
        "entries": [{"n": n, "count": c} for n, c in curve.entries],
    }
    if pair is not None:
        summary["section_pair"] = pair.constants()
    if cfg.out:
        buf = io.StringIO()
        buf.write(f"# ergoflow {__version__}\n")
        buf.write("# config " + json.dumps(cfg.echo(), default=_json_default) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "count", "log_count"])
        for n, c in curve.entries:
            w.writerow([n, c, repr(math.log(c))])
        Path(cfg.out).write_text(buf.getvalue(), encoding="utf-8")
        _emit_json(cfg, summary, str(Path(cfg.out).with_suffix(".json")))
    else:
        _emit_json(cfg, summary)
    if curve.fit is not None and not curve.fit.stable:
        print("warning: growth fit flagged unstable", file=sys.stderr)
        if cfg.strict:
            return EXIT_UNSTABLE
    return EXIT_OK


def run_expansivity(cfg: RunConfig) -> int:
    p = cfg.params
    flow = make_system(p["system"])
    if p["check"] == "map":
        if flow.kind != "suspension":
            raise ConfigError(["check = map needs a suspension system"])
        seeds = None
        if flow.base.is_torus:
            seeds = arc_seeds("torus", p["delta"], p["seed_set"], flow.base)
        verdict = discrete_cw_check(flow.base, p["delta"], p["n_max"], seeds)
    else:
        if flow.kind == "suspension" and not flow.base.is_torus:
            raise ConfigError([f"{p['system']}: flow search needs a torus base"])
        verdict = cw_search(flow, p["eps"], p["delta"], p["window"], p["budget"], p["seed_set"],
                            cfg.rng_seed, p["t_step"])
    _emit_json(cfg, {"verdict": verdict.to_dict()})
    return EXIT_OK


def run_sections_validate(cfg: RunConfig) -> int:
    p = cfg.params
    flow = make_system(p["system"])
    if flow.kind != "suspension":
        raise ConfigError([f"{p['system']} has fixed points; sections need a suspension"])
    try:
        pair = build_pair(flow, p["delta"], resolution=p["resolution"])
    except SectionValidationError as exc:
        _emit_json(cfg, {"valid": False, "error": str(exc)})
        return EXIT_VERIFY
    report = validation_report(pair)
    ok = all(report["covering"].values()) and all(report["inequalities"].values())
    _emit_json(cfg, {"valid": ok, "report": report})
    return EXIT_OK if ok else EXIT_VERIFY


def run_witness(cfg: RunConfig) -> int:
    p = cfg.params
    flow = make_system(p["system"])
    if not (flow.kind == "suspension" and flow.base.is_affine):
        raise ConfigError([f"{p['system']}: witness trees need an affine torus suspension"])
    triple = build_triple(flow, p["delta"])
    p1, _, p3 = triple.pairs
    try:
        cal = calibrate_delta0(p1, flow, p1.eps0, p["trials"], seed=cfg.rng_seed)
        if not p["delta1"] < cal.delta0:
            _emit_json(cfg, {"verified": False,
                             "error": f"delta1={p['delta1']} must be below delta0={cal.delta0}"})
            return EXIT_VERIFY
        seeds = [(a, len(a) // 2) for a in arc_seeds("torus", p1.eps0, "default", flow.base,
                                                    levels=1)]
        uc = find_unstable_continuum(p1, flow, seeds, cal.delta0, p1.eps0)
        tree = build_witness_tree(triple, flow, uc.arc, uc.anchor, p["m"], p["N"], p["delta1"])
    except (ConstructionFailure, SplitFailure, NotFoundError) as exc:
        diag = getattr(exc, "diagnostics", {})
        _emit_json(cfg, {"verified": False, "error": str(exc), "diagnostics": diag})
        return EXIT_VERIFY
    report = verify_separated(tree, p3, flow)
    payload = {
        "verified": report.ok,
        "lower_bound": report.bound,
        "separation": {
            "pairs_checked": report.pairs_checked, "steps": report.steps,
            "gamma": report.gamma, "min_separation": report.min_separation,
            "latest_first_step": report.latest_first_step,
            "offending": report.offending,
        },
        "calibration": {"delta0": cal.delta0, "witness_min": cal.witness_min, "hits": cal.hits},
        "tree": tree_to_dict(tree),
    }
    _emit_json(cfg, payload)
    return EXIT_OK if report.ok else EXIT_VERIFY


def _parse_point(system: str, text: str) -> tuple:
    parts = [s.strip() for s in text.split(",")]
    try:
        if system == "shift2-suspension":
            word, h = parts
            base = SymbolWord(tuple(int(c) for c in word))
            height = float(h)
        else:
            x, y, h = (float(s) for s in parts)
            base, height = TorusPoint(x, y), h
    except (ValueError, ParameterError) as exc:
        raise ConfigError([f"cannot parse point {text!r}: {exc}"]) from None
    return base, height


def run_suspend_metric(cfg: RunConfig) -> int:
    p = cfg.params
    flow = make_system(p["system"])
    if flow.kind != "suspension":
        raise ConfigError([f"{p['system']} is not a suspension"])
    pts = [suspend(flow.base, *_parse_point(p["system"], p[k])) for k in ("p", "q")]
    d = suspension_distance(flow.base, pts[0], pts[1], p["levels"])
    canon = [{"base": (list(q.base.window) if isinstance(q.base, SymbolWord)
                       else [q.base.x, q.base.y]), "height": q.height} for q in pts]
    _emit_json(cfg, {"distance": d, "points": canon})
    return EXIT_OK


RUNNERS = {
    "entropy": run_entropy,
    "expansivity": run_expansivity,
    "sections-validate": run_sections_validate,
    "witness": run_witness,
    "suspend-metric": run_suspend_metric,
}


# --------------------------------------------------------------- parsing


def _add_schema_flags(parser: argparse.ArgumentParser, command: str):
    for key in {**SCHEMAS[command], **COMMON}:
        parser.add_argument("--" + key.replace("_", "-"), dest=key, default=None)
    parser.add_argument("--config", default=None, help="file of `key = value` lines")
    parser.add_argument("--strict", action="store_true",
                        help="promote numeric instability flags to exit code 4")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ergoflow", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"ergoflow {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_schema_flags(sub.add_parser("entropy", help="entropy count curves"), "entropy")
    _add_schema_flags(sub.add_parser("expansivity", help="cw-expansivity searches"), "expansivity")
    _add_schema_flags(sub.add_parser("witness", help="binary witness tree"), "witness")
    sec = sub.add_parser("sections", help="section pairs").add_subparsers(dest="action", required=True)
    _add_schema_flags(sec.add_parser("validate", help="validate a section pair"), "sections-validate")
    sus = sub.add_parser("suspend", help="suspension tools").add_subparsers(dest="action", required=True)
    _add_schema_flags(sus.add_parser("metric", help="chain distance of two points"), "suspend-metric")
    return parser


def _set_threads(n: int | None):
    env = os.environ.get("ERGOFLOW_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError([f"ERGOFLOW_THREADS: expected an integer, got {env!r}"]) from None
        if n < 1:
            raise ConfigError(["ERGOFLOW_THREADS: must be >= 1"])
    if n is not None:
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    command = args.command
    if command in ("sections", "suspend"):
        command = f"{command}-{args.action}"
    schema = {**SCHEMAS[command], **COMMON}
    flags = {k: getattr(args, k) for k in schema}
    started = time.perf_counter()
    try:
        entries = {}
        if args.config:
            try:
                text = Path(args.config).read_text(encoding="utf-8")
            except (OSError, UnicodeDecodeError) as exc:
                raise ConfigError([f"cannot read config: {exc}"]) from None
            entries = parse_config(text)
        cfg = build_config(command, entries, flags, args.strict)
        _set_threads(cfg.threads)
        code = RUNNERS[command](cfg)
    except ConfigError as exc:
        for msg in exc.messages:
            print(f"config error: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParameterError, UnsupportedSystemError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"wall time: {time.perf_counter() - started:.3f} s", file=sys.stderr)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
