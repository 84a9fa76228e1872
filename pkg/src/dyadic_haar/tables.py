"""Desk-scale reproduction of the template-wavelet regularity tables."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

from .families_2d import TEMPLATE_FOR_FAMILY, make_family
from .regularity import FitError, PowerLawFit, fit_power_law, lawc_series
from .signal_model import AnalyticField, sample_field


@dataclass(frozen=True)
class DeskSetup:
    """Sampling level, quadrature and default regression window for one family."""

    signal_level: int
    quad: tuple[int, int]
    fit_levels: tuple[int, int]


# The fit starts at the first level whose cells are narrower than half a
# period of the test fields (1/20 in x); coarser levels average whole periods.
DESK = {
    "squares": DeskSetup(10, (4, 4), (5, 9)),
    "parabolic": DeskSetup(6, (4, 4), (3, 5)),
    "bands": DeskSetup(12, (1, 64), (5, 11)),
}

FAMILY_ORDER = ("squares", "parabolic", "bands")


def estimate(
    field: AnalyticField,
    kind: str,
    fit_levels: tuple[int, int] | None = None,
    quad: tuple[int, int] | int | None = None,
) -> PowerLawFit | None:
    """Template-mode power-law fit of ``field`` on a built-in family.

    Returns ``None`` when every AWC in the window vanishes.
    """
    setup = DESK[kind]
    lo, hi = fit_levels or setup.fit_levels
    level = max(setup.signal_level, hi + 1) if fit_levels is None else hi + 1
    q = setup.quad if quad is None else quad
    family = make_family(kind, level)
    signal = sample_field(field, family, level, q)
    series = lawc_series(signal, range(lo, hi + 1), TEMPLATE_FOR_FAMILY[kind], "auto")
    try:
        return fit_power_law(series, (lo, hi))
    except FitError:
        return None


def table1(fit_levels=None, quad=None) -> dict[tuple[str, str], PowerLawFit | None]:
    fields = {"F1": AnalyticField.F1(), "F2": AnalyticField.F2()}
    return {
        (TEMPLATE_FOR_FAMILY[kind], name): estimate(fld, kind, fit_levels, quad)
        for kind in FAMILY_ORDER
        for name, fld in fields.items()
    }


def table2(fit_levels=None, quad=None) -> dict[tuple[str, str], PowerLawFit | None]:
    return {
        (TEMPLATE_FOR_FAMILY[kind], f"G{i}"): estimate(AnalyticField.G(i), kind, fit_levels, quad)
        for kind in FAMILY_ORDER
        for i in range(1, 6)
    }


def _fmt(fit: PowerLawFit | None, attr: str) -> str:
    return "nan" if fit is None else f"{getattr(fit, attr):.4f}"


def table1_csv(results) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["template", "alpha_F1", "alpha_F2"])
    for t in ("I", "II", "III"):
        w.writerow([t, _fmt(results[(t, "F1")], "alpha"), _fmt(results[(t, "F2")], "alpha")])
    return buf.getvalue()


def table2_csv(results) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = ["template"]
    for i in range(1, 6):
        header += [f"alpha_G{i}", f"logC_G{i}"]
    w.writerow(header)
    for t in ("I", "II", "III"):
        row = [t]
        for i in range(1, 6):
            fit = results[(t, f"G{i}")]
            row += [_fmt(fit, "alpha"), _fmt(fit, "logC")]
        w.writerow(row)
    return buf.getvalue()
