"""Command-line entry point: ``eprsim {stats,run,spectrum,scan,diag}``.

Exit codes: 0 success, 1 invalid input, 2 degenerate data, 3 calibration failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from . import bell_statistics as bs
from .config import DEFAULT_SEED, PRESETS, ConfigError, dump_config, load_config
from .harness import (
    SETTINGS,
    enhancement_diagnostic,
    factorability_diagnostic,
    run_bell_scan,
    subtraction_audit,
    window_sensitivity_scan,
)
from .optics_detector import CalibrationError

EXIT_OK, EXIT_INVALID, EXIT_DEGENERATE, EXIT_CALIBRATION = 0, 1, 2, 3
STATS_HEADER = ["s_std", "s_chsh", "s_freedman", "violated_std", "violated_chsh", "violated_freedman"]


class InputError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    # usage errors are invalid input (exit 1); argparse would use 2, which means degenerate data here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def read_quads(path) -> list[bs.CountQuad]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["x", "y", "z", "Z"]:
            raise InputError(f"{path}: header must be x,y,z,Z")
        quads = []
        for i, row in enumerate(reader, 2):
            try:
                vals = [float(row[k]) for k in ("x", "y", "z", "Z")]
            except (TypeError, ValueError) as exc:
                raise InputError(f"{path}:{i}: {exc}") from exc
            if any(v < 0 for v in vals):
                raise InputError(f"{path}:{i}: counts must be >= 0")
            quads.append(bs.CountQuad(*vals))
    if not quads:
        raise InputError(f"{path}: no data rows")
    return quads


def stats_row(res: bs.BellResult | None) -> list[str]:
    if res is None:
        return ["nan"] * 3 + [""] * 3
    return [repr(res.s_std), repr(res.s_chsh), repr(res.s_freedman)] + [
        str(v).lower() for v in (res.violated_std, res.violated_chsh, res.violated_freedman)
    ]


def cmd_stats(args) -> int:
    raw = read_quads(args.counts)
    if args.accidentals:
        acc = read_quads(args.accidentals)
        if len(acc) == 1:
            acc = acc * len(raw)
        if len(acc) != len(raw):
            raise InputError("accidentals file must have one row or as many rows as the counts file")
    else:
        acc = [bs.CountQuad(0.0, 0.0, 0.0, 0.0)] * len(raw)
    rows = []
    degenerate = False
    for i, (q, a) in enumerate(zip(raw, acc), 1):
        report = subtraction_audit(q, a)
        degenerate |= report.degenerate
        if len(raw) > 1:
            print(f"dataset {i}")
        print(report.text())
        rows.append(stats_row(report.raw_result))
        if args.accidentals:
            rows.append(stats_row(report.corrected_result))
    if args.csv:
        _write_csv(args.csv, STATS_HEADER, rows)
    return EXIT_DEGENERATE if degenerate else EXIT_OK


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(r) + "\n")


def _config(args):
    overrides = [("window", args.window)] if args.window else []
    for item in args.set or []:
        if "=" not in item:
            raise InputError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        overrides.append((k, v))
    return load_config(args.config, preset=args.preset, overrides=overrides, seed=args.seed)


def write_run(out, outdir: Path) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "config.txt").write_text(dump_config(out.config))
    quad_rows = [
        [name] + [repr(v) for v in q.as_tuple()]
        for name, q in (("raw", out.raw_quad), ("accidentals", out.accidental_quad), ("corrected", out.corrected_quad))
    ]
    _write_csv(outdir / "quads.csv", ["row", "x", "y", "z", "Z"], quad_rows)
    stat_rows = [["raw"] + stats_row(out.raw_result), ["corrected"] + stats_row(out.corrected_result)]
    _write_csv(outdir / "statistics.csv", ["row"] + STATS_HEADER, stat_rows)
    setting_rows = [
        [s, str(r.singles_a), str(r.singles_b), str(r.coincidences), str(r.accidentals), repr(r.delay)]
        for s, r in out.settings.items()
    ]
    _write_csv(
        outdir / "settings.csv",
        ["setting", "singles_a", "singles_b", "coincidences", "accidentals", "delay_ns"],
        setting_rows,
    )
    for s, r in out.settings.items():
        (outdir / f"spectrum_{s}.csv").write_text(r.spectrum.to_csv())


def cmd_run(args) -> int:
    out = run_bell_scan(_config(args))
    write_run(out, Path(args.out))
    print(subtraction_audit(out.raw_quad, out.accidental_quad).text(), end="")
    for e in out.errors:
        print(f"warning: {e}", file=sys.stderr)
    return EXIT_DEGENERATE if out.degenerate else EXIT_OK


def cmd_spectrum(args) -> int:
    out = run_bell_scan(_config(args))
    text = out.settings[args.setting].spectrum.to_csv()
    _emit(text, args.out)
    return EXIT_OK


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise InputError(f"expected comma-separated numbers, got {text!r}") from exc


def cmd_scan(args) -> int:
    grid = window_sensitivity_scan(_config(args), _floats(args.window_starts), _floats(args.window_lengths))
    _emit(grid.to_csv(), args.out)
    return EXIT_DEGENERATE if any(c.output.degenerate for c in grid.cells) else EXIT_OK


def cmd_diag(args) -> int:
    cfg = _config(args)
    fact = factorability_diagnostic(cfg, args.buckets)
    enh = enhancement_diagnostic(cfg, args.buckets)
    text = "# factorability\n" + fact.to_csv() + "\n# enhancement\n" + enh.to_csv()
    _emit(text, args.out)
    for t in (fact, enh):
        for w in t.warnings:
            print(f"warning: {t.kind}: {w}", file=sys.stderr)
        verdict = "pass" if t.passes() else "FLAGGED"
        print(f"{t.kind}: max |deviation| = {t.max_abs_deviation:.4g} ({t.max_abs_sigmas:.2f} sigma) {verdict}", file=sys.stderr)
    return EXIT_DEGENERATE if not (fact.rows and enh.rows) else EXIT_OK


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _add_scenario_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value scenario file")
    p.add_argument("--preset", choices=PRESETS)
    p.add_argument("--seed", type=int, default=None, help=f"master seed (default {DEFAULT_SEED})")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key (repeatable)")
    p.add_argument("--window", metavar="START:LENGTH", help="coincidence window in ns, e.g. -3:20")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="eprsim", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="Bell statistics and accidental-subtraction audit for count quads")
    p.add_argument("counts")
    p.add_argument("--accidentals")
    p.add_argument("--csv", help="write s_std,s_chsh,... rows here (raw then corrected per dataset)")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("run", help="simulate the four-setting Bell scan")
    _add_scenario_args(p)
    p.add_argument("--out", default="eprsim_run", help="output directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("spectrum", help="time spectrum of one setting as CSV")
    _add_scenario_args(p)
    p.add_argument("--setting", choices=SETTINGS, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("scan", help="coincidence-window sensitivity grid")
    _add_scenario_args(p)
    p.add_argument("--window-starts", required=True, help="comma-separated ns offsets, e.g. -3,0,2")
    p.add_argument("--window-lengths", required=True, help="comma-separated ns lengths, e.g. 8,20")
    p.add_argument("--out")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("diag", help="factorability and no-enhancement tables")
    _add_scenario_args(p)
    p.add_argument("--buckets", type=int, default=16)
    p.add_argument("--out")
    p.set_defaults(func=cmd_diag)
    return parser


# options whose values usually start with a minus sign
_DASH_VALUED = ("--window", "--window-starts", "--window-lengths")


def _join_dash_values(argv: list[str]) -> list[str]:
    """Rewrite ``--window -3:20`` as ``--window=-3:20`` so argparse does not read -3:20 as an option."""
    out, i = [], 0
    while i < len(argv):
        if argv[i] in _DASH_VALUED and i + 1 < len(argv):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(_join_dash_values(sys.argv[1:] if argv is None else list(argv)))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except CalibrationError as exc:
        print(f"calibration failed: {exc}", file=sys.stderr)
        return EXIT_CALIBRATION
    except (InputError, ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
