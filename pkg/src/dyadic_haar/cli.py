"""Command-line interface: ``validate``, ``analyze``, ``verify`` and ``reproduce``."""

from __future__ import annotations

import argparse
import json
import re
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dyadic_core import (
    DyadicFamily,
    FamilyStructureError,
    InvalidCubeError,
    load_family,
    validate_family,
)
from .families_2d import FAMILY_KINDS, TEMPLATE_FOR_FAMILY, make_family
from .regularity import FitError, fit_power_law, lawc_series, verify
from .signal_model import (
    GeometryError,
    PGMError,
    Signal,
    image_to_signal,
    load_pgm,
    parse_field,
    sample_field,
)
from .tables import DESK, table1, table1_csv, table2, table2_csv

EXIT_OK, EXIT_FAILED, EXIT_INPUT = 0, 1, 2

# Default AWC level ranges for the built-in families.
DEFAULT_LEVELS = {"squares": (1, 9), "parabolic": (1, 5), "bands": (1, 11)}


class InputError(Exception):
    """Bad command-line input; reported with exit status 2."""


@dataclass(frozen=True)
class RunConfig:
    family: DyadicFamily
    family_kind: str | None
    levels: tuple[int, int]
    field: str | None
    image: Path | None
    quad: tuple[int, int]
    mode: str
    log_base: float | str
    alpha: float | None
    out: Path | None
    fmt: str

    @property
    def signal_level(self) -> int:
        return self.levels[1] + 1


def _parse_levels(text: str) -> tuple[int, int]:
    m = re.fullmatch(r"\s*(\d+)\s*\.\.\s*(\d+)\s*", text)
    if not m:
        raise argparse.ArgumentTypeError(f"levels must look like A..B, got {text!r}")
    lo, hi = int(m.group(1)), int(m.group(2))
    if lo > hi:
        raise argparse.ArgumentTypeError(f"empty level range {text!r}")
    return lo, hi


def _parse_mode(text: str) -> str:
    if text == "full":
        return "full"
    m = re.fullmatch(r"template:(I|II|III)", text)
    if not m:
        raise argparse.ArgumentTypeError("mode must be template:I, template:II, template:III or full")
    return m.group(1)


def _parse_log_base(text: str) -> float | str:
    if text == "auto":
        return "auto"
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"log base must be 'auto' or a number, got {text!r}") from None
    if not value > 1:
        raise argparse.ArgumentTypeError("log base must exceed 1")
    return value


def _load_family_arg(args) -> tuple[DyadicFamily | None, str | None]:
    if args.family_file:
        try:
            return load_family(args.family_file), None
        except (OSError, json.JSONDecodeError, FamilyStructureError) as exc:
            raise InputError(f"cannot load family {args.family_file}: {exc}") from exc
    return None, args.family


def _config(args, need_alpha: bool = False) -> RunConfig:
    explicit, kind = _load_family_arg(args)
    if args.levels is not None:
        levels = args.levels
    elif kind is not None:
        levels = DEFAULT_LEVELS[kind]
    else:
        levels = (0, explicit.max_level - 1)
    J = levels[1] + 1
    if explicit is not None:
        family = explicit
        if J > family.max_level:
            raise InputError(f"levels up to {levels[1]} need a family of depth {J}; file has {family.max_level}")
    else:
        try:
            family = make_family(kind, J)
        except (OverflowError, MemoryError) as exc:
            raise InputError(str(exc)) from exc
    if args.quad is not None:
        quad = (args.quad, args.quad)
    elif kind is not None:
        quad = DESK[kind].quad
    else:
        quad = (4, 4)
    mode = args.mode or (TEMPLATE_FOR_FAMILY[kind] if kind else "full")
    if need_alpha and (args.alpha is None or args.alpha <= 0):
        raise InputError("--alpha must be given and positive")
    if args.field is None and args.image is None:
        raise InputError("one of --field or --image is required")
    return RunConfig(
        family=family,
        family_kind=kind,
        levels=levels,
        field=args.field,
        image=Path(args.image) if args.image else None,
        quad=quad,
        mode=mode,
        log_base=args.log_base,
        alpha=getattr(args, "alpha", None),
        out=Path(args.out) if args.out else None,
        fmt=args.format,
    )


def build_signal(cfg: RunConfig) -> Signal:
    J = cfg.signal_level
    if cfg.image is not None:
        try:
            image = load_pgm(cfg.image.read_bytes())
        except OSError as exc:
            raise InputError(f"cannot read {cfg.image}: {exc}") from exc
        return image_to_signal(image, cfg.family, J)
    m = re.fullmatch(r"random:(\d+)", cfg.field)
    if m:
        rng = np.random.default_rng(int(m.group(1)))
        return Signal(cfg.family, J, rng.uniform(0.0, 255.0, cfg.family.level_size(J)))
    try:
        fld = parse_field(cfg.field)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    return sample_field(fld, cfg.family, J, cfg.quad)


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")


def cmd_validate(args) -> int:
    try:
        family = load_family(args.path)
    except (OSError, json.JSONDecodeError, FamilyStructureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    report = validate_family(family)
    for v in report.violations:
        print(v)
    status = "ok" if report.ok else f"{len(report.violations)} violation(s)"
    print(f"{status}; computed_B={report.computed_B:.6g} gamma={report.computed_gamma:.6g}")
    return EXIT_OK if report.ok else EXIT_FAILED


def cmd_analyze(args) -> int:
    cfg = _config(args)
    signal = build_signal(cfg)
    lo, hi = cfg.levels
    series = lawc_series(signal, range(lo, hi + 1), cfg.mode, cfg.log_base)
    try:
        fit = fit_power_law(series)
    except FitError as exc:
        if all(e.zero for e in series.entries):
            print("error: all AWC entries zero; the field has no detail along this family", file=sys.stderr)
        else:
            print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED
    doc = json.loads(fit.to_json())
    doc["mode"] = "full" if cfg.mode == "full" else f"template:{cfg.mode}"
    fit_json = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    summary = f"alpha={fit.alpha:.6g} logC={fit.logC:.6g} r2={fit.r2:.6g}"
    if fit.skipped:
        summary += f" (skipped zero levels {list(fit.skipped)})"
    if cfg.out is not None:
        series_path = cfg.out.parent / f"{cfg.out.name}_series.csv"
        fit_path = cfg.out.parent / f"{cfg.out.name}_fit.json"
        series_path.write_text(series.to_csv(), encoding="utf-8")
        fit_path.write_text(fit_json, encoding="utf-8")
        print(summary)
    else:
        sys.stdout.write(series.to_csv() if cfg.fmt == "csv" else fit_json)
        print(summary, file=sys.stderr)
    return EXIT_OK


def _corruption_hook(spec: str | None):
    if not spec:
        return None
    try:
        j, k, lam, value = spec.split(":")
        j, k, lam, value = int(j), int(k), int(lam), float(value)
    except ValueError:
        raise InputError("--corrupt-coefficient takes J:K:LAMBDA:VALUE") from None

    def hook(level, coeffs):
        if level != j:
            return coeffs
        out = np.array(coeffs, copy=True)
        out[k, lam - 1] = value
        return out

    return hook


def cmd_verify(args) -> int:
    cfg = _config(args, need_alpha=True)
    signal = build_signal(cfg)
    report = verify(signal, cfg.alpha, _corruption_hook(args.corrupt_coefficient))
    _emit(report.to_json() if cfg.fmt == "json" else report.render(), cfg.out)
    return EXIT_OK if report.ok else EXIT_FAILED


def cmd_reproduce(args) -> int:
    quad = None if args.quad is None else (args.quad, args.quad)
    if args.table == 1:
        text = table1_csv(table1(args.levels, quad))
    else:
        text = table2_csv(table2(args.levels, quad))
    _emit(text, Path(args.out) if args.out else None)
    return EXIT_OK


def _add_run_options(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--family", choices=FAMILY_KINDS, help="built-in rectangle family")
    src.add_argument("--family-file", metavar="PATH", help="explicit family JSON")
    data = p.add_mutually_exclusive_group()
    data.add_argument(
        "--field",
        metavar="SPEC",
        help="F1, F2, G1..G5, constant:C, indicator:J:K, haar:J:K[:LAMBDA] or random:SEED",
    )
    data.add_argument("--image", metavar="PATH", help="PGM image (P2 or P5)")
    p.add_argument("--levels", type=_parse_levels, metavar="A..B", help="coefficient levels; cells are sampled at B+1")
    p.add_argument("--quad", type=int, metavar="N", help="midpoint subsamples per cell axis")
    p.add_argument("--mode", type=_parse_mode, metavar="template:I|II|III|full")
    p.add_argument("--log-base", type=_parse_log_base, default="auto", metavar="auto|NUM")
    p.add_argument("--out", metavar="PATH")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dyadic-haar", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a family JSON file against the dyadic axioms")
    p.add_argument("path")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("analyze", help="AWC series and power-law fit for a field or image")
    _add_run_options(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("verify", help="check the coefficient/semi-norm bounds for a signal")
    _add_run_options(p)
    p.add_argument("--alpha", type=float, metavar="X")
    p.add_argument("--corrupt-coefficient", metavar="J:K:LAMBDA:VALUE", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("reproduce", help="regenerate the template-wavelet tables as CSV")
    p.add_argument("--table", type=int, choices=(1, 2), required=True)
    p.add_argument("--levels", type=_parse_levels, metavar="A..B", help="regression window for every family")
    p.add_argument("--quad", type=int, metavar="N")
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    if getattr(args, "quad", None) is not None and args.quad < 1:
        print("error: --quad must be at least 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except (InputError, PGMError, GeometryError, InvalidCubeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
