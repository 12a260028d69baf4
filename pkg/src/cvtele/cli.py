"""Command line front end.

Exit codes: 0 on success, 2 for config/usage errors, 3 when a value is
physically invalid.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .calibration import classical_floor, gain_bound_from_suppression, simulate_cancellation
from .config import ExperimentConfig, emit_report, format_table, gain_range, load_config, with_overrides
from .errors import ConfigError, CvteleError
from .opo import OpoParams, squeezing_spectrum
from .teleporter import run, sequential, sweep_gain

EXIT_CONFIG = 2
EXIT_PHYSICS = 3

SWEEP_HEADER = ["g", "sigma_x_db", "sigma_p_db", "fidelity", "n_s", "sigma_x", "sigma_p"]
SEQUENCE_HEADER = ["n", "sigma_x", "sigma_x_db", "sigma_p", "sigma_p_db", "fidelity", "first_below_half"]
OPO_HEADER = ["freq_mhz", "s_minus", "s_minus_db", "s_plus", "s_plus_db"]
# F_n equal to 1/2 up to round-off is not counted as a crossing
THRESHOLD_TOL = 1e-12

TELEPORT_HEADER = ["engine", "sigma_x", "sigma_x_db", "sigma_p", "sigma_p_db", "fidelity", "n_s"]


def _metadata() -> dict:
    return {"timestamp": datetime.now(timezone.utc).isoformat()}


def _rows_document(command: str, header: list[str], rows: list[list]) -> str:
    doc = {
        "command": command,
        "tool_version": __version__,
        "rows": [dict(zip(header, row)) for row in rows],
        "metadata": _metadata(),
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    return with_overrides(
        cfg,
        seed=args.seed,
        shots=args.shots,
        workers=args.workers,
        engine=getattr(args, "engine", None),
    )


def cmd_teleport(args) -> int:
    cfg = _load(args)
    report = run(cfg.teleporter)
    out = args.out or cfg.outputs.get("report" if args.format == "report" else "table")
    if args.format == "table":
        row = [report.engine, report.sigma_x, report.sigma_x_db, report.sigma_p, report.sigma_p_db,
               report.fidelity, report.n_s]
        _write(format_table(TELEPORT_HEADER, [row]), out)
    else:
        _write(emit_report(report, cfg, "teleport", _metadata()), out)
    return 0


def _parse_range(text: str) -> tuple[float, ...]:
    try:
        start, stop, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise ConfigError(f"range must look like START:STOP:STEP, got {text!r}") from None
    return gain_range(start, stop, step)


def _parse_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"expected comma separated numbers, got {text!r}") from None


def cmd_sweep_gain(args) -> int:
    cfg = _load(args)
    if args.g_range:
        gains = _parse_range(args.g_range)
    elif args.gains is not None:
        gains = _parse_list(args.gains)
    else:
        gains = cfg.gains
    if not gains:
        raise ConfigError("no gains to sweep: give --g-range, --gains or a [sweep] section")
    rows = [[r.gain, r.sigma_x_db, r.sigma_p_db, r.fidelity, r.n_s, r.sigma_x, r.sigma_p]
            for r in sweep_gain(cfg.teleporter, sorted(gains))]
    out = args.out or cfg.outputs.get("table")
    if args.format == "report":
        _write(_rows_document("sweep-gain", SWEEP_HEADER, rows), out)
    else:
        _write(format_table(SWEEP_HEADER, rows), out)
    return 0


def cmd_sequential(args) -> int:
    cfg = _load(args)
    n_max = args.n_max if args.n_max is not None else cfg.n_max
    if n_max is None or n_max < 1:
        raise ConfigError(f"n-max must be >= 1, got {n_max}")
    _, reports = sequential(cfg.teleporter, n_max)
    rows, flagged = [], False
    for n, rep in enumerate(reports, start=1):
        below = rep.fidelity < 0.5 - THRESHOLD_TOL and not flagged
        flagged = flagged or below
        rows.append([n, rep.sigma_x, rep.sigma_x_db, rep.sigma_p, rep.sigma_p_db, rep.fidelity, int(below)])
    out = args.out or cfg.outputs.get("table")
    if args.format == "report":
        _write(_rows_document("sequential", SEQUENCE_HEADER, rows), out)
    else:
        _write(format_table(SEQUENCE_HEADER, rows), out)
    return 0


def cmd_opo_spectrum(args) -> int:
    if args.freqs:
        freqs = _parse_list(args.freqs)
    else:
        if args.freq_step <= 0 or args.freq_max < 0:
            raise ConfigError("need --freq-step > 0 and --freq-max >= 0")
        freqs = gain_range(0.0, args.freq_max, args.freq_step)
    rows = []
    for f in sorted(freqs):
        params = OpoParams(args.gain, args.efficiency, args.jitter, f, args.bandwidth)
        lv = squeezing_spectrum(params, with_jitter=True)
        rows.append([f, lv.squeezed, lv.squeezed_db, lv.antisqueezed, lv.antisqueezed_db])
    if args.format == "report":
        _write(_rows_document("opo-spectrum", OPO_HEADER, rows), args.out)
    else:
        _write(format_table(OPO_HEADER, rows), args.out)
    return 0


def cmd_calibrate(args) -> int:
    result: dict = {}
    if args.gain is not None:
        c = simulate_cancellation(args.gain, args.tone)
        result["simulated"] = {"gain": args.gain, "suppression_db": c.suppression_db,
                               "gain_bound": c.gain_bound, "floored": c.floored}
    for name, value in (("x", args.suppression_db_x), ("p", args.suppression_db_p)):
        if value is not None:
            result[f"measured_{name}"] = {"suppression_db": value, "gain_bound": gain_bound_from_suppression(value)}
    floor = classical_floor()
    result["classical_floor"] = {"variance": floor, "db": float(10 * np.log10(floor))}
    if args.format == "table":
        rows = [[k, v.get("suppression_db", float("nan")), v.get("gain_bound", float("nan"))]
                for k, v in result.items() if k != "classical_floor"]
        rows.append(["classical_floor", result["classical_floor"]["db"], result["classical_floor"]["variance"]])
        _write(format_table(["item", "db", "value"], rows), args.out)
    else:
        result["tool_version"] = __version__
        _write(json.dumps(result, indent=2, sort_keys=True) + "\n", args.out)
    return 0


def _common(p: argparse.ArgumentParser, default_format: str) -> None:
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=("table", "report"), default=default_format)


def _run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="config file or bundled name (e.g. paper_fig3)")
    p.add_argument("--seed", type=int)
    p.add_argument("--shots", type=int)
    p.add_argument("--workers", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cvtele", description="CV quantum teleportation simulator")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("teleport", help="run one teleportation experiment")
    _run_flags(p)
    p.add_argument("--engine", choices=("heisenberg", "monte_carlo"))
    _common(p, "report")
    p.set_defaults(func=cmd_teleport)

    p = sub.add_parser("sweep-gain", help="output variances against channel gain")
    _run_flags(p)
    p.add_argument("--g-range", help="START:STOP:STEP, inclusive")
    p.add_argument("--gains", help="comma separated gains")
    _common(p, "table")
    p.set_defaults(func=cmd_sweep_gain)

    p = sub.add_parser("sequential", help="fidelity of chained teleporters")
    _run_flags(p)
    p.add_argument("--n-max", type=int)
    _common(p, "table")
    p.set_defaults(func=cmd_sequential)

    p = sub.add_parser("opo-spectrum", help="squeezing levels against sideband frequency")
    p.add_argument("--gain", type=float, required=True, help="parametric gain G+")
    p.add_argument("--efficiency", type=float, default=1.0)
    p.add_argument("--jitter", type=float, default=0.0, help="RMS phase jitter, degrees")
    p.add_argument("--bandwidth", type=float, default=10.0, help="cavity HWHM, MHz")
    p.add_argument("--freq-max", type=float, default=10.0, help="MHz")
    p.add_argument("--freq-step", type=float, default=0.25, help="MHz")
    p.add_argument("--freqs", help="comma separated frequencies in MHz")
    _common(p, "table")
    p.set_defaults(func=cmd_opo_spectrum)

    p = sub.add_parser("calibrate", help="gain bound from tone cancellation")
    p.add_argument("--gain", type=float, help="simulate cancellation at this gain")
    p.add_argument("--tone", type=float, default=1.0, help="tone amplitude")
    p.add_argument("--suppression-db-x", type=float)
    p.add_argument("--suppression-db-p", type=float)
    _common(p, "report")
    p.set_defaults(func=cmd_calibrate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"cvtele: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CvteleError as exc:
        print(f"cvtele: invalid physics: {exc}", file=sys.stderr)
        return EXIT_PHYSICS


if __name__ == "__main__":
    sys.exit(main())
