"""Command-line entry points for the propulsion model and the allocation solvers.

Verbs: propulsion, bemt, surrogate-fit, solve, sweep, ablation.  Each takes
--config <json> plus verb-specific flags and an optional --out path.  Exit
codes: 0 success, 2 config error, 3 power-budget infeasibility.  The
environment variable HPP_SEED overrides any configured seed (useful in CI).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import bemt as bemt_mod
from . import harness, propulsion
from .channel import load_scenario, scenario_from_dict
from .config import (
    BudgetInfeasibleError,
    ConfigError,
    isa_properties,
    ledger_from_dict,
    load_platform_config,
    platform_from_dict,
    rf_budget,
)
from .q3e import q3e, scenario_beamformer, solution_to_dict

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3


def _read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _seeds(raw, default=(0,)) -> list[int]:
    env = os.environ.get("HPP_SEED")
    if env is not None:
        return [int(env)]
    if raw is None:
        return list(default)
    if isinstance(raw, list):
        return [int(s) for s in raw]
    return [int(raw)]


def _write_or_print(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_propulsion(args) -> int:
    geom, _, altitude = load_platform_config(args.config)
    atm = isa_properties(altitude)
    v0 = args.v0
    if v0 is None:
        raise ConfigError("propulsion needs --v0 (m/s)")
    coeffs = propulsion.reference_coeffs()
    table = harness.run_airspeed_sweep(geom, atm, [v0], coeffs)
    _write_or_print(harness.table_to_csv(table), args.out)
    return EXIT_OK


def _cmd_bemt(args) -> int:
    cfg = _read_json(args.config) if args.config else {}
    spec_dir = args.spec or cfg.get("spec_dir")
    v0 = args.v0 if args.v0 is not None else cfg.get("v0_mps")
    n_s = args.ns if args.ns is not None else cfg.get("ns_rps")
    altitude = args.altitude if args.altitude is not None else float(cfg.get("altitude_m", 20000.0))
    if spec_dir is None or v0 is None or n_s is None:
        raise ConfigError("bemt needs --spec <dir>, --v0 (m/s), and --ns (rev/s), "
                          "via flags or the JSON config")
    try:
        spec = bemt_mod.load_spec_dir(spec_dir)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load propeller spec {spec_dir}: {exc}") from exc
    atm = isa_properties(altitude)
    op = bemt_mod.propeller_performance(spec, float(v0), float(n_s), atm)
    text = "t_p_n,p_p_w,eta_p\n" + f"{op.thrust!r},{op.shaft_power!r},{op.eta_p!r}\n"
    _write_or_print(text, args.out)
    return EXIT_OK


def _cmd_surrogate_fit(args) -> int:
    cfg = _read_json(args.config) if args.config else {}
    if "samples_csv" in cfg:
        samples = propulsion.read_samples_csv(cfg["samples_csv"])
    else:
        samples = propulsion.reference_samples()
    try:
        coeffs = propulsion.fit_inverse_power_surrogate(samples)
    except propulsion.SurrogateFitError as exc:
        raise ConfigError(str(exc)) from exc
    text = (
        "c,alpha,beta,rmse,n_samples\n"
        + f"{coeffs.c!r},{coeffs.alpha!r},{coeffs.beta!r},{coeffs.rmse!r},{coeffs.n_samples}\n"
    )
    _write_or_print(text, args.out)
    return EXIT_OK


def _budget_from_config(cfg: dict) -> tuple[float, object]:
    """(RF budget, ledger) from an explicit value or the propulsion chain."""
    if "platform" in cfg:
        geom = platform_from_dict(cfg["platform"])
        ledger = ledger_from_dict(cfg["ledger"])
        atm = isa_properties(float(cfg.get("altitude_m", 20000.0)))
        v0 = float(cfg.get("v0_mps", 10.0))
        p_prop = propulsion.propulsion_power(atm, geom, v0, propulsion.reference_coeffs())
        return rf_budget(ledger, p_prop), ledger
    if "ledger" not in cfg or "p_tot_w" not in cfg:
        raise ConfigError("solve config needs 'p_tot_w' and 'ledger', or a 'platform' block")
    return float(cfg["p_tot_w"]), ledger_from_dict(cfg["ledger"])


def _scenario_from_config(cfg: dict, base: Path):
    if "scenario_path" in cfg:
        return load_scenario(base / cfg["scenario_path"])
    if "scenario" not in cfg:
        raise ConfigError("config needs 'scenario' or 'scenario_path'")
    return scenario_from_dict(cfg["scenario"])


def _cmd_solve(args) -> int:
    cfg = _read_json(args.config)
    scenario = _scenario_from_config(cfg, Path(args.config).parent)
    p_tot, ledger = _budget_from_config(cfg)
    backend = cfg.get("backend", "numeric")
    bf = scenario_beamformer(scenario)
    if backend == "mlp":
        from .neuro import TrainConfig

        seed = _seeds(cfg.get("seed"), default=(0,))[0]
        sol = q3e(scenario, bf, p_tot, ledger, cfg=TrainConfig(seed=seed), backend="mlp")
    else:
        sol = q3e(scenario, bf, p_tot, ledger, backend="numeric")
    doc = solution_to_dict(sol)
    doc["p_tot_w"] = p_tot
    _write_or_print(json.dumps(doc, indent=2) + "\n", args.out)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = _read_json(args.config)
    kind = cfg.get("kind")
    grid = cfg.get("grid")
    if not isinstance(grid, list) or not grid:
        raise ConfigError("sweep config needs a non-empty 'grid' list")
    if kind == "airspeed":
        geom = platform_from_dict(cfg["platform"]) if "platform" in cfg else None
        if geom is None:
            raise ConfigError("airspeed sweep needs a 'platform' block")
        atm = isa_properties(float(cfg.get("altitude_m", 20000.0)))
        table = harness.run_airspeed_sweep(
            geom, atm, grid, legacy_eta_p=float(cfg.get("legacy_eta_p", 0.73))
        )
    elif kind == "rf_budget":
        scenario = _scenario_from_config(cfg, Path(args.config).parent)
        ledger = ledger_from_dict(cfg["ledger"])
        table = harness.run_budget_sweep(
            scenario,
            ledger,
            grid,
            backends=tuple(cfg.get("backends", harness.BUDGET_BACKENDS)),
            seeds=_seeds(cfg.get("seeds")),
            workers=int(cfg.get("workers", 1)),
        )
    else:
        raise ConfigError("sweep 'kind' must be 'airspeed' or 'rf_budget'")
    _write_or_print(harness.table_to_csv(table), args.out)
    if args.svg:
        harness.emit_report(table, "svg", args.svg)
    return EXIT_OK


def _cmd_ablation(args) -> int:
    cfg = _read_json(args.config)
    scenario = _scenario_from_config(cfg, Path(args.config).parent)
    ledger = ledger_from_dict(cfg["ledger"])
    env = os.environ.get("HPP_SEED")
    if env is not None:  # keep the >= 10 seeds the ablation needs
        seeds = list(range(int(env), int(env) + 10))
    else:
        seeds = [int(s) for s in cfg.get("seeds", range(10))]
    table = harness.run_ablation(
        scenario,
        ledger,
        float(cfg["p_tot_w"]),
        seeds=seeds,
        max_epochs=int(cfg.get("max_epochs", 2000)),
    )
    _write_or_print(harness.table_to_csv(table), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hapalloc",
        description="Platform propulsion power model and QoS-first RF power allocation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("propulsion", help="drag, efficiency, and propulsion power at one airspeed")
    p.add_argument("--config", required=True, help="platform JSON config")
    p.add_argument("--v0", type=float, help="airspeed, m/s")
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_propulsion)

    p = sub.add_parser("bemt", help="propeller thrust, shaft power, and efficiency")
    p.add_argument("--spec", help="propeller spec directory")
    p.add_argument("--v0", type=float, help="airspeed, m/s")
    p.add_argument("--ns", type=float, help="rotational speed, rev/s")
    p.add_argument("--altitude", type=float, default=None)
    p.add_argument("--config", help="JSON with spec_dir, v0_mps, ns_rps, altitude_m")
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_bemt)

    p = sub.add_parser("surrogate-fit", help="fit the inverse-power efficiency surrogate")
    p.add_argument("--config", help="JSON with optional samples_csv path")
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_surrogate_fit)

    p = sub.add_parser("solve", help="run the two-stage allocation on one scenario")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_solve)

    p = sub.add_parser("sweep", help="airspeed or RF-budget sweep to CSV (and SVG)")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--svg", help="also write an SVG line chart here")
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("ablation", help="neural-backend ablation table")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_ablation)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetInfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
