"""Command-line entry points.

Exit codes: 0 success, 1 validation error, 2 runtime divergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import scenarios
from .platform import ConfigError, validate
from .scenarios import (
    DivergenceError,
    run_scenario,
    validate_scenario,
    write_run_outputs,
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_DIVERGENCE = 2


def _load_json(path_or_name: str, what: str) -> tuple[dict, Path | None]:
    """Load a JSON document from a file path or a canned fixture name."""
    p = Path(path_or_name)
    if p.exists():
        with open(p) as f:
            return json.load(f), p.parent
    if "/" not in path_or_name and not path_or_name.endswith(".json"):
        try:
            return scenarios.load_canned(path_or_name), None
        except FileNotFoundError:
            pass
    raise ConfigError([(path_or_name, f"no such {what} file or canned name")])


def _cmd_validate(args) -> int:
    doc, _ = _load_json(args.config, "config")
    validate(doc)
    print(f"{args.config}: valid")
    return EXIT_OK


def _cmd_list_scenarios(args) -> int:
    for name in scenarios.list_canned():
        print(name)
    return EXIT_OK


def _cmd_sim(args) -> int:
    cfg_doc, _ = _load_json(args.config, "config")
    cfg = validate(cfg_doc)
    scen_doc, base = _load_json(args.scenario, "scenario")
    scenario = validate_scenario(scen_doc, cfg, base)
    metrics, rows, header = run_scenario(cfg, scenario, seed=args.seed)
    out = Path(args.out)
    write_run_outputs(out, cfg, metrics, rows, header, seed=args.seed)
    print(f"wrote {out}/log.csv ({len(rows)} rows), metrics.json, config.resolved.json")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg_doc, _ = _load_json(args.config, "config")
    scen_doc, base = _load_json(args.scenario, "scenario")
    values = [float(v) for v in args.values.split(",") if v != ""]
    header, table = scenarios.sweep(cfg_doc, scen_doc, args.param, values, base)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.csv", "w") as f:
        f.write(",".join(header) + "\n")
        for row in table:
            f.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in row) + "\n")
    print(f"wrote {out}/sweep.csv ({len(table)} rows)")
    return EXIT_OK


def _cmd_serve(args) -> int:
    from . import telemetry

    cfg_doc, _ = _load_json(args.config, "config")
    cfg = validate(cfg_doc)
    telemetry.serve(cfg, port=args.port, rate=args.rate, speed=args.speed)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vsoftpro")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a platform config")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("sim", help="run one scenario and write its outputs")
    p.add_argument("--config", required=True)
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_sim)

    p = sub.add_parser("sweep", help="run a scenario across parameter values")
    p.add_argument("--config", required=True)
    p.add_argument("--scenario", required=True)
    p.add_argument("--param", required=True)
    p.add_argument("--values", required=True, help="comma-separated numbers")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("serve", help="run the live telemetry server")
    p.add_argument("--config", required=True)
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--rate", type=float, default=50.0)
    p.add_argument("--speed", type=float, default=1.0)
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("list-scenarios", help="list the canned scenarios")
    p.set_defaults(func=_cmd_list_scenarios)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        for path, msg in exc.errors:
            print(f"error: {path}: {msg}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE


if __name__ == "__main__":
    sys.exit(main())
