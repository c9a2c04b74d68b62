"""
Command-line interface for antipt_spdc.

Subcommands:
    evolve    z-trajectory of one phase, CSV plus JSON sidecar
    sweep     endpoint observables over a phase grid, CSV plus JSON sidecar
    design    chip design numbers, JSON
    fit       heater phase calibration fit, JSON
    validate  acceptance suite, JSON report
"""

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

from antipt_spdc.config import RunConfig, load_config, parse_theta_grid
from antipt_spdc.design import g_exp_from_shg, load_calibration_samples, phase_calibration_fit
from antipt_spdc.exceptions import AntiPTError, ConfigError, IntegrationError, RegimeError, SweepPointError
from antipt_spdc.helpers import format_float, parse_angle, parse_quantity
from antipt_spdc.observables import CorrelationRecord, visibility
from antipt_spdc.sweep import default_theta_grid, iter_sweep, run_engine
from antipt_spdc.validate import ValidationOptions, run_all
from antipt_spdc.version import __version__

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NUMERICAL = 2


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format_float(value)
    return str(value)


def write_csv(path: Path, fieldnames: Sequence[str], rows: Iterable[Dict[str, Any]], footer: Dict[str, Any]) -> None:
    """
    Writes rows with fixed float formatting and a '# key: value' comment footer.
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(fieldnames), extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({key: _cell(row.get(key)) for key in fieldnames})
        for key, value in footer.items():
            f.write(f"# {key}: {_cell(value)}\n")
    logger.info("wrote %s", path)


def write_json(path: Path, payload: Dict[str, Any]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as f:
        json.dump(payload, f, indent=2, sort_keys=True, default=str)
        f.write("\n")
    logger.info("wrote %s", path)


def _sidecar(config: RunConfig, command: str, extra: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    payload = {
        "command": command,
        "version": __version__,
        "config": config.to_dict(),
        "config_hash": config.config_hash(),
    }
    payload.update(extra or {})
    return payload


def _theta_grid_flag(text: str):
    """'0,pi/2,pi' or 'start:stop:points'."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError("theta grid range must be start:stop:points")
        try:
            return parse_theta_grid({"start": parts[0], "stop": parts[1], "points": int(parts[2])})
        except ValueError as e:
            raise argparse.ArgumentTypeError(str(e)) from None
    try:
        return parse_theta_grid([item.strip() for item in text.split(",") if item.strip()])
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _quantity_flag(dimension: str):
    def parse(text: str) -> float:
        try:
            return parse_quantity(text, dimension)
        except ValueError as e:
            raise argparse.ArgumentTypeError(str(e)) from None
    return parse


def _angle_flag(text: str) -> float:
    try:
        return parse_angle(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--scheme", help="antipt_master, antipt_nhh, coherent or three_mode")
    parser.add_argument("--engine", help="me, nhh, gaussian or coherent")
    parser.add_argument("--g-eps", type=_quantity_flag("rate"), help="Pair-generation strength, e.g. '6.93 m^-1'")
    parser.add_argument("--gamma", type=_quantity_flag("rate"), help="Dissipative coupling, e.g. '7.22 cm^-1'")
    parser.add_argument("--kappa", type=_quantity_flag("rate"), help="Hopping to the lossy waveguide")
    parser.add_argument("--gamma-c", type=_quantity_flag("rate"), help="Loss of the lossy waveguide")
    parser.add_argument("--theta", type=_angle_flag, help="Pump relative phase, e.g. 'pi/2'")
    parser.add_argument("--theta-grid", type=_theta_grid_flag, help="'0,pi/2,pi' or 'start:stop:points'")
    parser.add_argument("--length", type=_quantity_flag("length"), help="Propagation length, e.g. '4 mm'")
    parser.add_argument("--samples", type=int, help="Number of z samples")
    parser.add_argument("--step", type=_quantity_flag("length"), help="RK4 step override, e.g. '1 um'")
    parser.add_argument("--per-mode-cap", type=int, help="Fock cap per mode")
    parser.add_argument("--total-cap", type=int, help="Fock cap on the total photon number")
    parser.add_argument("--no-jumps", action="store_true", help="Drop the jump term of the master equation")
    parser.add_argument("--normalize-nhh", action="store_true", help="Normalize NHH states before extraction")
    parser.add_argument("--workers", type=int, help="Worker processes for sweeps")
    parser.add_argument("--compare-engine", help="Second engine reported in the sweep footer")


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML configuration file")
    parser.add_argument("--output-dir", help="Directory for output files")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="More logging (repeatable)")
    parser.add_argument("--quiet", action="store_true", help="Only log errors")


def build_config(args: argparse.Namespace) -> RunConfig:
    """
    Loads the configuration file, if any, and applies command-line overrides.

    Raises:
        ConfigError: On invalid files or values.
    """
    config = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    try:
        if getattr(args, "scheme", None):
            config.set_scheme(args.scheme)
        if getattr(args, "engine", None):
            config.set_engine(args.engine)
        for name in ("g_eps", "gamma", "kappa", "gamma_c"):
            value = getattr(args, name, None)
            if value is not None:
                config.set_rate(name, value)
        if getattr(args, "theta", None) is not None:
            config.set_theta(args.theta)
        if getattr(args, "theta_grid", None) is not None:
            config.set_theta_grid(args.theta_grid)
        length = getattr(args, "length", None)
        samples = getattr(args, "samples", None)
        step = getattr(args, "step", None)
        if length is not None or samples is not None or step is not None:
            config.set_propagation(
                length if length is not None else config.length,
                samples if samples is not None else config.samples,
                step if step is not None else config.step,
            )
        per_mode_cap = getattr(args, "per_mode_cap", None)
        total_cap = getattr(args, "total_cap", None)
        if per_mode_cap is not None or total_cap is not None:
            config.set_truncation(
                per_mode_cap if per_mode_cap is not None else config.per_mode_cap,
                total_cap if total_cap is not None else config.total_cap,
            )
        if getattr(args, "no_jumps", False):
            config.jumps = False
        if getattr(args, "normalize_nhh", False):
            config.normalize_nhh = True
        if getattr(args, "workers", None) is not None:
            config.set_workers(args.workers)
        if getattr(args, "compare_engine", None):
            config.set_compare_engine(args.compare_engine)
        if getattr(args, "output_dir", None):
            config.output_dir = args.output_dir
    except ValueError as e:
        raise ConfigError(f"command line: {e}") from None
    return config


def cmd_evolve(args: argparse.Namespace) -> int:
    config = build_config(args)
    if config.theta_grid is not None:
        raise ConfigError("evolve needs a single theta; use sweep for theta_grid")
    config.validate()
    params = config.model_params()
    trajectory = run_engine(
        params, config.engine, include_jumps=config.jumps, normalize_nhh=config.normalize_nhh
    )
    stem = f"evolve_{config.engine.value}"
    out = Path(config.output_dir)
    write_csv(
        out / f"{stem}.csv",
        CorrelationRecord.columns(),
        (record.to_row() for record in trajectory.records),
        {"config_hash": config.config_hash(), "version": __version__},
    )
    write_json(out / f"{stem}.json", _sidecar(config, "evolve", {"scheme": trajectory.scheme.value}))
    return EXIT_OK


def _max_g4_deviation(points, other_points) -> Optional[float]:
    deviations = [
        abs(p.record.corr4 - q.record.corr4) / max(abs(p.record.corr4), 1e-300)
        for p, q in zip(points, other_points)
        if p.ok and q.ok
    ]
    return max(deviations) if deviations else None


def cmd_sweep(args: argparse.Namespace) -> int:
    config = build_config(args)
    if config.theta_grid is None:
        config.set_theta_grid(default_theta_grid())
    config.validate()
    template = config.model_params(0.0)
    options = {"workers": config.workers, "include_jumps": config.jumps, "normalize_nhh": config.normalize_nhh}
    points = list(iter_sweep(template, config.theta_grid, config.engine, **options))
    failed = [point for point in points if not point.ok]

    footer: Dict[str, Any] = {"config_hash": config.config_hash(), "version": __version__}
    curve = [point.record.corr4 for point in points if point.ok]
    try:
        footer["G4_visibility"] = visibility(curve)
    except (ValueError, AntiPTError) as e:
        footer["G4_visibility"] = f"undefined ({e})"
    if config.compare_engine is not None:
        other = list(iter_sweep(template, config.theta_grid, config.compare_engine, **options))
        footer[f"max_G4_deviation_vs_{config.compare_engine.value}"] = _max_g4_deviation(points, other)
    footer["failed_points"] = len(failed)

    def rows():
        for point in points:
            row = point.record.to_row() if point.ok else {}
            row["theta"] = point.theta
            row["error"] = point.error
            yield row

    stem = f"sweep_{config.engine.value}"
    out = Path(config.output_dir)
    write_csv(out / f"{stem}.csv", CorrelationRecord.columns() + ["error"], rows(), footer)
    write_json(out / f"{stem}.json", _sidecar(config, "sweep", {"footer": footer}))
    for point in failed:
        logger.error("%s", SweepPointError(point.theta, AntiPTError(point.error)))
    return EXIT_OK


def cmd_design(args: argparse.Namespace) -> int:
    config = build_config(args)
    waveguide = config.waveguide_design()
    report = waveguide.report()
    report["g_exp"] = {
        "m^-1 J^-1/2": g_exp_from_shg(
            config.p_fund_in, config.p_shg_out, config.shg_length, waveguide.lambda_fund, waveguide.lambda_2omega
        )
    }
    payload = _sidecar(config, "design", {"inputs": waveguide.to_dict(), "outputs": report})
    write_json(Path(config.output_dir) / "design.json", payload)
    print(f"qpm period: {report['qpm_period']['um']:.4f} um")
    print(f"kappa: {report['kappa']['cm^-1']:.4f} cm^-1, Gamma: {report['gamma']['cm^-1']:.4f} cm^-1")
    print(f"g: {report['g']['m^-1 J^-1/2']:.4g} m^-1 J^-1/2, g*eps: {report['g_eps']['m^-1']:.4g} m^-1")
    return EXIT_OK


def cmd_fit(args: argparse.Namespace) -> int:
    config = build_config(args)
    path = args.samples_csv or config.calibration_csv
    if not path:
        raise ConfigError("fit needs a calibration CSV (argument or design.calibration_csv)")
    fit = phase_calibration_fit(load_calibration_samples(path))
    write_json(Path(config.output_dir) / "fit.json", _sidecar(config, "fit", {"samples": path, "fit": fit.to_dict()}))
    print(f"b = {fit.b:.6g} rad/mW, theta0 = {fit.theta0:.6g} rad, a = {fit.a:.6g} W, c = {fit.c:.6g} W")
    print(f"residual = {fit.residual:.3g} W over {fit.samples} samples")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    config = build_config(args)
    options = ValidationOptions(
        cap=args.cap,
        theta_points=args.theta_points,
        workers=config.workers,
        flip_lambda_co=args.flip_lambda_co,
    )
    results = run_all(options, args.only)
    for result in results:
        status = "PASS" if result.passed else "FAIL"
        print(f"{result.name:4s} {status}  residual={result.residual:.3g}  {result.detail}")
    payload = _sidecar(
        config,
        "validate",
        {
            "options": asdict(options),
            "results": [result.to_dict() for result in results],
            "passed": all(result.passed for result in results),
        },
    )
    write_json(Path(config.output_dir) / "validate.json", payload)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="antipt_spdc", description="Anti-PT SPDC waveguide simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command")

    evolve = sub.add_parser("evolve", help="z-trajectory of one phase")
    _add_common_flags(evolve)
    _add_run_flags(evolve)
    evolve.set_defaults(func=cmd_evolve)

    sweep = sub.add_parser("sweep", help="Endpoint observables over a phase grid")
    _add_common_flags(sweep)
    _add_run_flags(sweep)
    sweep.set_defaults(func=cmd_sweep)

    design = sub.add_parser("design", help="Chip design numbers")
    _add_common_flags(design)
    design.set_defaults(func=cmd_design)

    fit = sub.add_parser("fit", help="Heater phase calibration fit")
    _add_common_flags(fit)
    fit.add_argument("samples_csv", nargs="?", help="CSV with P_heater_mW, P_a_W, P_b_W")
    fit.set_defaults(func=cmd_fit)

    validate = sub.add_parser("validate", help="Run the acceptance suite")
    _add_common_flags(validate)
    validate.add_argument("--workers", type=int, help="Worker processes for sweeps")
    validate.add_argument("--cap", type=int, default=6, help="Fock cap of the two-waveguide runs")
    validate.add_argument("--theta-points", type=int, default=33, help="Points of the phase sweeps")
    validate.add_argument("--flip-lambda-co", action="store_true", help="Negate the co-generation amplitude")
    validate.add_argument("--only", nargs="+", help="Subset of checks, e.g. A1 A7")
    validate.set_defaults(func=cmd_validate)
    return parser


def _configure_logging(args: argparse.Namespace) -> None:
    if getattr(args, "quiet", False):
        level = logging.ERROR
    elif getattr(args, "verbose", 0) >= 2:
        level = logging.DEBUG
    elif getattr(args, "verbose", 0) == 1:
        level = logging.INFO
    else:
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "command", None):
        parser.print_help()
        return EXIT_OK
    _configure_logging(args)
    try:
        return args.func(args)
    except (IntegrationError, RegimeError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, ValueError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except AntiPTError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
