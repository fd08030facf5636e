"""Command-line entry points.

Exit codes: 0 success; 1 failed science assertion (energy monotonicity,
non-positive relaxation coefficient, integration failure); 2+ usage or
configuration problems (2 missing file, 3 syntax, 4 unknown key, 5 bad
value).  Every run writes the effective configuration and the library
version into the output directory.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__, harness, integrator
from .config import (ConfigError, ConfigValueError, RunConfig, config_from_preset,
                     echo_config, parse_config)
from .fileio import atomic_write_text, write_field_csv, write_field_pgm
from .harness import EnergyMonotonicityError
from .integrator import EnergyIncreaseError, IntegrationError, NonPositiveRelaxationError
from .presets import PRESETS, get_preset
from .tableau import (BUILTIN_TABLEAUX, TableauError, builtin_tableau,
                      load_tableau, validate)

SCIENCE_FAILURES = (EnergyMonotonicityError, EnergyIncreaseError,
                    NonPositiveRelaxationError, IntegrationError)


def _build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="run-configuration file")
    common.add_argument("--preset", metavar="NAME",
                        help="builtin experiment preset"
                             f" ({', '.join(sorted(PRESETS))})")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--seed", type=int, help="override the RNG seed")
    common.add_argument("--threads", type=int, default=1,
                        help="parallel runs for sweeps (default 1)")
    common.add_argument("--mode", choices=integrator.MODES,
                        help="override the stepping mode")
    common.add_argument("--tableau", metavar="NAME",
                        help="override the tableau"
                             f" ({', '.join(sorted(BUILTIN_TABLEAUX))})")

    parser = argparse.ArgumentParser(
        prog="savrrk",
        description="Energy-stable IMEX relaxation Runge-Kutta experiments"
                    " for phase-field gradient flows.")
    parser.add_argument("--version", action="version",
                        version=f"savrrk {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
            ("run", "integrate once and write energy trace / final state"),
            ("converge", "accuracy table over the configured step list"),
            ("gamma-study", "max |gamma - 1| versus step size"),
            ("gn-study", "max |energy defect at gamma = 1| versus step size"),
            ("energy", "energy trace with monotonicity check"),
            ("snapshot", "phase-separation snapshots at configured times")):
        sub.add_parser(name, parents=[common], help=help_text)
    vt = sub.add_parser("validate-tableau", parents=[common],
                        help="print validation reports for tableaux")
    vt.add_argument("--tableau-file", metavar="PATH",
                    help="validate a tableau from a coefficient file")
    return parser


def _resolve_config(args) -> RunConfig:
    if args.config and args.preset:
        raise ConfigValueError("--config and --preset are mutually exclusive")
    if args.config:
        cfg = parse_config(args.config)
    elif args.preset:
        try:
            cfg = config_from_preset(get_preset(args.preset))
        except KeyError as exc:
            raise ConfigValueError(str(exc.args[0])) from None
    else:
        raise ConfigValueError("one of --config or --preset is required")
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.mode is not None:
        cfg = replace(cfg, mode=args.mode)
    if args.tableau is not None:
        if args.tableau not in BUILTIN_TABLEAUX:
            raise ConfigValueError(
                f"unknown tableau {args.tableau!r};"
                f" builtins: {', '.join(sorted(BUILTIN_TABLEAUX))}")
        cfg = replace(cfg, tableau=args.tableau)
    if args.out:
        cfg = replace(cfg, directory=args.out)
    return cfg


def _prepare_outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.directory)
    out.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out / "config-effective.ini", echo_config(cfg))
    atomic_write_text(out / "version.txt", f"savrrk {__version__}\n")
    return out


def _require_tau(cfg):
    tau = cfg.tau if cfg.tau else (cfg.tau_list[0] if cfg.tau_list else 0.0)
    if not tau:
        raise ConfigValueError("this command needs [time] tau")
    return tau


def _cmd_run(cfg: RunConfig, args) -> int:
    out = _prepare_outdir(cfg)
    preset = cfg.to_preset()
    tau = _require_tau(cfg)
    keep = cfg.energy_csv
    state, records = harness.run_preset(
        preset, tau, cfg.mode, gn_diagnostics=cfg.gn_diagnostics,
        keep_records=keep)
    if keep:
        spec = preset.model_spec()
        mass_cols = [f"mass_{l + 1}" for l in range(spec.k)]
        rows = [(n + 1, r.t_hat_after, r.gamma, r.energy_modified,
                 r.energy_original, *r.mass) for n, r in enumerate(records)]
        harness.write_csv(out / "energy.csv",
                          ["step", "t_hat", "gamma", "energy_modified",
                           "energy_original", *mass_cols], rows)
    for l, ul in enumerate(state.u, start=1):
        suffix = "" if len(state.u) == 1 else f"_u{l}"
        write_field_csv(out / f"final{suffix}.csv", ul)
        write_field_pgm(out / f"final{suffix}.pgm", ul)
    harness.write_summary(out / "summary.txt", {
        "command": "run", "steps": len(records) if keep else "",
        "t_final_achieved": state.t_hat, "r_final": state.r,
    })
    print(f"run finished at t_hat = {state.t_hat!r} -> {out}")
    return 0


def _cmd_converge(cfg: RunConfig, args) -> int:
    if len(cfg.tau_list) < 3:
        raise ConfigValueError("converge needs [time] tau_list with >= 3 entries")
    out = _prepare_outdir(cfg)
    preset = cfg.to_preset()
    rows = harness.convergence_study(
        preset, tau_ref=(cfg.tau_ref or None), workers=max(1, args.threads))
    harness.write_convergence_csv(out / "convergence.csv", rows)
    last = rows[-1]
    harness.write_summary(out / "summary.txt", {
        "command": "converge", "rows": len(rows),
        "final_order_idt": "" if last.order_idt is None else last.order_idt,
        "final_order_rt": "" if last.order_rt is None else last.order_rt,
    })
    print(f"convergence table ({len(rows)} rows) -> {out / 'convergence.csv'}")
    return 0


def _cmd_slope(cfg: RunConfig, args, which: str) -> int:
    if len(cfg.tau_list) < 2:
        raise ConfigValueError(f"{which} needs [time] tau_list with >= 2 entries")
    out = _prepare_outdir(cfg)
    preset = cfg.to_preset()
    if which == "gamma-study":
        study = harness.gamma_slope_study(preset)
        label, csv_name = "max_abs_gamma_minus_1", "gamma_study.csv"
    else:
        study = harness.gn_slope_study(preset)
        label, csv_name = "max_abs_defect_at_1", "gn_study.csv"
    harness.write_slope_csv(out / csv_name, study, label)
    harness.write_summary(out / "summary.txt", {
        "command": which,
        "fitted_slope": "" if study.fitted_slope is None else study.fitted_slope,
        "degenerate": study.degenerate,
    })
    slope = "degenerate" if study.degenerate else f"{study.fitted_slope:.3f}"
    print(f"{which}: fitted slope {slope} -> {out / csv_name}")
    return 0


def _cmd_energy(cfg: RunConfig, args) -> int:
    out = _prepare_outdir(cfg)
    preset = cfg.to_preset()
    tau = _require_tau(cfg)
    rows = harness.energy_trace(preset, out_csv=out / "energy.csv", tau=tau,
                                mode=cfg.mode)
    harness.write_summary(out / "summary.txt", {
        "command": "energy", "steps": len(rows) - 1,
        "energy_monotone": True,
        "energy_initial": rows[0][3], "energy_final": rows[-1][3],
    })
    print(f"energy trace over {len(rows) - 1} steps is monotone"
          f" -> {out / 'energy.csv'}")
    return 0


def _cmd_snapshot(cfg: RunConfig, args) -> int:
    if not cfg.snapshot_times:
        raise ConfigValueError("snapshot needs [output] snapshot_times")
    out = _prepare_outdir(cfg)
    preset = cfg.to_preset()
    tau = _require_tau(cfg)
    written = harness.phase_separation(preset, out, tau=tau, mode=cfg.mode)
    harness.write_summary(out / "summary.txt", {
        "command": "snapshot", "files": len(written),
    })
    print(f"wrote {len(written)} snapshot files -> {out}")
    return 0


def _cmd_validate_tableau(args) -> int:
    if getattr(args, "tableau_file", None):
        tabs = [load_tableau(args.tableau_file)]
    elif args.tableau:
        tabs = [builtin_tableau(args.tableau)]
    else:
        tabs = [builtin_tableau(name) for name in sorted(BUILTIN_TABLEAUX)]
    all_ok = True
    for tab in tabs:
        report = validate(tab)
        print(report.summary())
        all_ok = all_ok and report.passed
    return 0 if all_ok else 1


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "validate-tableau":
            return _cmd_validate_tableau(args)
        cfg = _resolve_config(args)
        if args.command == "run":
            return _cmd_run(cfg, args)
        if args.command == "converge":
            return _cmd_converge(cfg, args)
        if args.command in ("gamma-study", "gn-study"):
            return _cmd_slope(cfg, args, args.command)
        if args.command == "energy":
            return _cmd_energy(cfg, args)
        if args.command == "snapshot":
            return _cmd_snapshot(cfg, args)
        raise AssertionError(f"unhandled command {args.command}")
    except ConfigError as exc:
        print(f"savrrk: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except TableauError as exc:
        print(f"savrrk: error: {exc}", file=sys.stderr)
        return 5
    except SCIENCE_FAILURES as exc:
        print(f"savrrk: failed check: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
