"""Command line: ``kgzlab run | check-data | fit | identities``.

Exit codes: 0 all verdicts pass, 1 a verdict failed, 2 invalid configuration,
3 the evolution blew up.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import spectral
from .config import ConfigError, ExperimentConfig, load, load_preset, parse_text, from_mapping, preset_names
from .data import DataError, certify, make_data
from .diagnostics import DiagnosticError, Observable, decay_fit
from .grid import GridKind
from .hypotheses import hypothesis_check, scaling_check
from .runner import EXIT_BLOWUP, EXIT_CONFIG, EXIT_OK, EXIT_VERDICT, run
from .suites import SUITES


def _overrides(pairs: list[str] | None) -> dict[str, str]:
    out = {}
    for p in pairs or ():
        key, sep, value = p.partition("=")
        if not sep:
            raise ConfigError(p, "overrides take the form key=value")
        out[key.strip()] = value.strip()
    return out


def _config(args) -> ExperimentConfig:
    if (args.config is None) == (args.preset is None):
        raise ConfigError("--config", "give exactly one of --config and --preset")
    extra = _overrides(args.set)
    if args.seed is not None:
        extra["seed"] = str(args.seed)
    if args.preset is not None:
        return load_preset(args.preset, **extra)
    if not extra:
        return load(args.config)
    path = Path(args.config)
    if not path.exists():
        raise ConfigError("--config", f"file {path} does not exist")
    raw = parse_text(path.read_text(), str(path))
    raw.update(extra)
    return from_mapping(raw)


def _threads(args) -> None:
    # the flag wins; the environment variable only applies without it
    n = args.threads if args.threads is not None else spectral.threads_from_env()
    spectral.set_threads(n)


def _print(doc) -> None:
    print(json.dumps(doc, indent=2, sort_keys=True, default=str))


def cmd_run(args) -> int:
    cfg = _config(args)
    res = run(cfg, args.out)
    m = res.manifest
    for name, ok in sorted(m.verdicts.items()):
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    if m.exit_code == EXIT_BLOWUP:
        print(f"blow-up detected at t = {m.blowup_time:.6g}", file=sys.stderr)
    out = Path(args.out) if args.out else cfg.output_dir
    print(f"artifacts in {out}")
    return m.exit_code


def cmd_check_data(args) -> int:
    cfg = _config(args)
    grid = cfg.grid
    if cfg.system == "linear-only":
        raise ConfigError("system.kind", "check-data needs kgz or dkg data")
    data = make_data(cfg["data.family"], cfg.data_parameters(), grid, cfg.system)
    doc = {}
    ok = True
    if cfg.system == "kgz" and grid.kind is GridKind.BOX:
        v = certify(data, grid)
        doc["positivity"] = {"certified": v.certified, "margin": v.margin, "witness": v.witness}
        ok &= v.certified
    hyp = [cfg[f"diagnostics.hypotheses.{k}"] for k in ("K0", "epsilon", "N", "C_KS")]
    rep = hypothesis_check(data, *hyp)
    doc["hypotheses"] = rep.to_json()
    ok &= rep.passed
    if args.scalings:
        sc = scaling_check(data, *hyp, count=args.scalings, seed=args.seed or 0)
        doc["scaling"] = sc.to_json()
        ok &= sc.passed
    _print(doc)
    return EXIT_OK if ok else EXIT_VERDICT


def cmd_fit(args) -> int:
    with open(args.csv, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise DiagnosticError(f"{args.csv} has no rows")
    column = args.column or [c for c in rows[0] if c != args.time][0]
    t = np.array([float(r[args.time]) for r in rows])
    v = np.array([float(r[column]) for r in rows])
    window = tuple(float(x) for x in args.window.split(",")) if args.window else None
    fit = decay_fit((t, v), Observable(args.observable), window=window, name=column)
    doc = fit.to_json()
    ok = True
    if args.max_ratio is not None:
        ok = fit.bounded(args.max_ratio)
        doc["max_ratio"] = args.max_ratio
    _print(doc)
    return EXIT_OK if ok else EXIT_VERDICT


def cmd_identities(args) -> int:
    names = list(SUITES) if args.suite == "all" else [args.suite]
    ok = True
    docs = []
    for name in names:
        kw = {"seed": args.seed or 0} if name in ("algebra", "kirchhoff") else {}
        res = SUITES[name](**kw)
        for c in res.checks:
            print(f"{'PASS' if c.passed else 'FAIL'}  {name}/{c.name}  {c.value:.6g} ({'<=' if c.kind == 'max' else '>='} {c.bound:g})")
        docs.append(res.to_json())
        ok &= res.passed
    if args.json:
        Path(args.json).write_text(json.dumps(docs, indent=2, sort_keys=True, default=str))
    return EXIT_OK if ok else EXIT_VERDICT


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kgzlab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", help="configuration file")
            sp.add_argument("--preset", help=f"shipped configuration: {', '.join(preset_names())}")
            sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one key")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--threads", type=int, help="FFT worker threads (overrides KGZLAB_THREADS)")

    r = sub.add_parser("run", help="evolve a configuration and write its artifacts")
    common(r)
    r.add_argument("--out", help="output directory (overrides output.dir)")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("check-data", help="positivity and data-hypothesis report for a configuration")
    common(c)
    c.add_argument("--scalings", type=int, default=0, help="also check linearity and monotonicity on this many random scalings")
    c.set_defaults(func=cmd_check_data)

    f = sub.add_parser("fit", help="power-law fit of a CSV series")
    f.add_argument("--csv", required=True)
    f.add_argument("--time", default="t", help="time column (default t)")
    f.add_argument("--column", help="value column (default: first non-time column)")
    f.add_argument("--window", help="t_min,t_max")
    f.add_argument("--observable", default=Observable.SUP_FIELD.value, choices=[o.value for o in Observable])
    f.add_argument("--max-ratio", type=float, help="also require max/min <= this on the window")
    common(f, config=False)
    f.set_defaults(func=cmd_fit)

    i = sub.add_parser("identities", help="algebraic, commutator, Kirchhoff, Sobolev-constant and integrator suites")
    i.add_argument("--suite", default="algebra", choices=list(SUITES) + ["all"])
    i.add_argument("--json", help="write the suite results here")
    common(i, config=False)
    i.set_defaults(func=cmd_identities)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _threads(args)
        return args.func(args)
    except ConfigError as e:
        print(f"invalid configuration: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, DiagnosticError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
