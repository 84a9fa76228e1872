"""Wavelet-coefficient decay, Lipschitz semi-norms and the two-way bound checks."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .dyadic_core import DyadicFamily, InvalidCubeError, validate_family
from .haar_system import haar_level, level_coefficients
from .signal_model import Signal

__all__ = [
    "SLACK",
    "AwcEntry",
    "AwcSeries",
    "FitError",
    "PowerLawFit",
    "RegularityReport",
    "auto_log_base",
    "awc",
    "coefficient_bound_constant",
    "converse_constant",
    "fit_power_law",
    "lawc_series",
    "pixelated_seminorm",
    "power_law_signal",
    "signal_from_coefficients",
    "verify",
    "verify_converse",
    "verify_direct",
]

SLACK = 1e-9
# An AWC below this fraction of the signal's amplitude is treated as zero.
ZERO_REL = 1e-12

CoefficientHook = Callable[[int, np.ndarray], np.ndarray]


class FitError(ValueError):
    """Too few usable points for a regression."""


def _coefficients(signal: Signal, j: int, mode: str, hook: CoefficientHook | None = None) -> np.ndarray:
    c = level_coefficients(signal, j, mode)
    return hook(j, c) if hook is not None else c


def awc(signal: Signal, j: int, mode: str = "full") -> float:
    """Average absolute haar coefficient at level ``j``.

    In full mode each cube contributes the mean over its own haar functions,
    then cubes are averaged.  Template modes average the one coefficient per cube.
    """
    c = np.abs(level_coefficients(signal, j, mode))
    if mode == "full":
        counts = haar_level(signal.family, j).counts
        per_cube = c.sum(axis=1) / counts
    else:
        per_cube = c[:, 0]
    return float(per_cube.mean())


def auto_log_base(family: DyadicFamily) -> float:
    """Branching factor of a geometric family, else the family's inheritance coefficient."""
    branching = getattr(family, "branching", None)
    if branching is not None:
        return float(branching)
    return float(family.inheritance_coefficient)


@dataclass(frozen=True)
class AwcEntry:
    j: int
    K_j: int
    mu_j: float
    awc: float
    lawc: float
    zero: bool


@dataclass(frozen=True)
class AwcSeries:
    entries: tuple[AwcEntry, ...]
    mode: str
    log_base: float
    uniform: bool = True

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["j", "K_j", "mu_j", "awc", "lawc"])
        for e in self.entries:
            lawc = "nan" if e.zero else f"{e.lawc:.6g}"
            w.writerow([e.j, e.K_j, f"{e.mu_j:.6g}", f"{e.awc:.6g}", lawc])
        return buf.getvalue()


def lawc_series(
    signal: Signal,
    j_range: range | None = None,
    mode: str = "full",
    log_base: float | str = "auto",
) -> AwcSeries:
    if j_range is None:
        j_range = range(0, signal.level)
    j_range = range(j_range.start, j_range.stop)
    if len(j_range) == 0:
        raise ValueError("empty level range")
    if j_range.start < 0 or j_range.stop > signal.level:
        raise InvalidCubeError(
            f"levels {j_range.start}..{j_range.stop - 1} need cells below level {signal.level}"
        )
    base = auto_log_base(signal.family) if log_base == "auto" else float(log_base)
    if not base > 1:
        raise ValueError(f"log base must exceed 1, got {base}")
    threshold = ZERO_REL * max(signal.scale(), 1.0)
    fam = signal.family
    uniform = True
    entries = []
    for j in j_range:
        mu = fam.measures(j)
        mu_j = float(mu.mean())
        if np.ptp(mu) > 1e-12 * mu_j:
            uniform = False
        a = awc(signal, j, mode)
        zero = a <= threshold
        lawc = float("nan") if zero else math.log(a) / math.log(base)
        entries.append(AwcEntry(j, fam.level_size(j), mu_j, a, lawc, zero))
    return AwcSeries(tuple(entries), mode, base, uniform)


@dataclass(frozen=True)
class PowerLawFit:
    slope: float
    intercept: float
    alpha: float
    logC: float
    r2: float
    j_range: tuple[int, int]
    mode: str = "full"
    log_base: float = 2.0
    skipped: tuple[int, ...] = field(default=())

    def to_json(self) -> str:
        doc = asdict(self)
        doc["j_range"] = list(self.j_range)
        doc["skipped"] = list(self.skipped)
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def fit_power_law(series: AwcSeries, j_range: tuple[int, int] | None = None) -> PowerLawFit:
    """Least-squares line through ``(j, lawc_j)``; ``alpha = -slope - 1/2``.

    Without ``j_range`` every unflagged entry is used, except ``j = 0`` when
    other levels are available.
    """
    if j_range is None:
        js = [e.j for e in series.entries if not e.zero]
        if len(js) > 2 and js[0] == 0:
            js = js[1:]
        if not js:
            raise FitError("all AWC entries zero; nothing to fit")
        j_range = (js[0], js[-1])
    lo, hi = j_range
    inside = [e for e in series.entries if lo <= e.j <= hi]
    skipped = tuple(e.j for e in inside if e.zero)
    used = [e for e in inside if not e.zero]
    if len(used) < 2:
        if inside and len(skipped) == len(inside):
            raise FitError("all AWC entries zero; nothing to fit")
        raise FitError(f"need at least 2 usable levels in {lo}..{hi}, have {len(used)}")
    x = np.array([e.j for e in used], dtype=float)
    y = np.array([e.lawc for e in used])
    xm, ym = x.mean(), y.mean()
    slope = float(np.sum((x - xm) * (y - ym)) / np.sum((x - xm) ** 2))
    intercept = float(ym - slope * xm)
    resid = y - (intercept + slope * x)
    ss_tot = float(np.sum((y - ym) ** 2))
    r2 = 1.0 if ss_tot == 0 else max(0.0, 1.0 - float(np.sum(resid**2)) / ss_tot)
    return PowerLawFit(slope, intercept, -slope - 0.5, intercept, r2, (lo, hi), series.mode, series.log_base, skipped)


# -- semi-norms ------------------------------------------------------------------


def _child_extremes(kids: np.ndarray, hi: np.ndarray, lo: np.ndarray):
    present = kids >= 0
    safe = np.where(present, kids, 0)
    return np.where(present, hi[safe], -np.inf), np.where(present, lo[safe], np.inf)


def pixelated_seminorm(signal: Signal, alpha: float, J: int | None = None) -> float:
    """Largest ``|f_Q - f_Q'| / delta(Q, Q')**alpha`` over same-level pairs up to level ``J``.

    Pairs are grouped by their smallest common ancestor ``A``: two cubes in
    different children of ``A`` are at distance ``mu(A)``, so each ``A`` only
    needs the extreme descendant means of its children.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    J = signal.level if J is None else J
    if not 0 <= J <= signal.level:
        raise InvalidCubeError(f"level {J} outside 0..{signal.level}")
    fam = signal.family
    best = 0.0
    for j in range(1, J + 1):
        hi = lo = signal.means(j)
        for a in range(j - 1, -1, -1):
            ch_hi, ch_lo = _child_extremes(fam.children_matrix(a), hi, lo)
            n = ch_hi.shape[1]
            spread = ch_hi[:, :, None] - ch_lo[:, None, :]
            spread[:, np.arange(n), np.arange(n)] = -np.inf
            cand = spread.reshape(len(spread), -1).max(axis=1)
            ok = np.isfinite(cand)
            if ok.any():
                best = max(best, float(np.max(cand[ok] / fam.measures(a)[ok] ** alpha)))
            hi, lo = ch_hi.max(axis=1), ch_lo.min(axis=1)
    return best


def coefficient_bound_constant(
    signal: Signal,
    alpha: float,
    j_range: range | None = None,
    mode: str = "full",
    hook: CoefficientHook | None = None,
) -> float:
    """``max |<f, psi>| / mu**(alpha + 1/2)`` over the haar functions of ``j_range``."""
    if j_range is None:
        j_range = range(0, signal.level)
    best = 0.0
    for j in j_range:
        c = np.abs(_coefficients(signal, j, mode, hook))
        if c.size == 0:
            continue
        mu = signal.family.measures(j)
        best = max(best, float(np.max(c.max(axis=1) / mu ** (alpha + 0.5))))
    return best


def converse_constant(C: float, B: float, alpha: float) -> float:
    """Semi-norm bound implied by coefficient decay with constant ``C``."""
    return 2 * C * B**alpha * math.sqrt(B * (B - 1)) / (B**alpha - (B - 1) ** alpha)


@dataclass(frozen=True)
class RegularityReport:
    alpha: float
    seminorm: float
    C_est: float
    computed_B: float
    converse_constant: float
    direct_ok: bool
    converse_ok: bool
    edge_bound_ok: bool = True
    sharp_edge_bound_ok: bool = True
    worst_direct_excess: float = 0.0
    worst_edge_excess: float = 0.0

    @property
    def ok(self) -> bool:
        return self.direct_ok and self.converse_ok and self.edge_bound_ok and self.sharp_edge_bound_ok

    def to_json(self) -> str:
        doc = asdict(self)
        doc["ok"] = self.ok
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def render(self) -> str:
        lines = [
            f"alpha              {self.alpha:.6g}",
            f"seminorm           {self.seminorm:.6g}",
            f"C_est              {self.C_est:.6g}",
            f"computed_B         {self.computed_B:.6g}",
            f"converse_constant  {self.converse_constant:.6g}",
            f"direct             {'ok' if self.direct_ok else 'VIOLATED'}",
            f"converse           {'ok' if self.converse_ok else 'VIOLATED'}",
            f"edge bound         {'ok' if self.edge_bound_ok else 'VIOLATED'}",
            f"sharp edge bound   {'ok' if self.sharp_edge_bound_ok else 'VIOLATED'}",
        ]
        return "\n".join(lines) + "\n"


def verify_direct(signal: Signal, alpha: float, hook: CoefficientHook | None = None) -> tuple[bool, float, float]:
    """Check ``|<f, psi>| <= s * mu**(alpha + 1/2)`` with ``s`` the pixelated semi-norm.

    Covers levels ``j < J - 1`` (``J`` the signal level), where coefficients
    are not affected by the pixelation.  Returns ``(ok, s, worst excess)``.
    """
    s = pixelated_seminorm(signal, alpha)
    worst = -np.inf
    for j in range(0, signal.level - 1):
        c = np.abs(_coefficients(signal, j, "full", hook)).max(axis=1)
        bound = s * signal.family.measures(j) ** (alpha + 0.5)
        worst = max(worst, float(np.max(c - bound)))
    ok = worst <= SLACK
    return ok, s, float(max(worst, 0.0)) if np.isfinite(worst) else 0.0


def _edge_checks(signal: Signal, alpha: float, C: float, B: float) -> tuple[bool, bool, float]:
    fam = signal.family
    worst_edge = worst_sharp = -np.inf
    for j in range(1, signal.level + 1):
        parents = fam.parents(j)
        mu_child = fam.measures(j)
        mu_parent = fam.measures(j - 1)[parents]
        n_parent = fam.fanouts(j - 1)[parents]
        diff = np.abs(signal.means(j) - signal.means(j - 1)[parents])
        edge = C * math.sqrt(B * (B - 1)) * mu_parent**alpha
        sharp = (
            C
            * np.sqrt(np.clip(mu_parent - mu_child, 0.0, None) / (mu_parent * mu_child))
            * np.sqrt(n_parent - 1)
            * mu_parent ** (alpha + 0.5)
        )
        worst_edge = max(worst_edge, float(np.max(diff - edge)))
        worst_sharp = max(worst_sharp, float(np.max(diff - sharp)))
    return worst_edge <= SLACK, worst_sharp <= SLACK, float(max(worst_edge, worst_sharp, 0.0))


def verify_converse(signal: Signal, alpha: float, hook: CoefficientHook | None = None) -> RegularityReport:
    """Check that coefficient decay bounds the semi-norm and every parent-child mean jump."""
    return verify(signal, alpha, hook, direct=False)


def verify(
    signal: Signal, alpha: float, hook: CoefficientHook | None = None, direct: bool = True
) -> RegularityReport:
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    B = validate_family(signal.family).computed_B
    C = coefficient_bound_constant(signal, alpha, range(0, signal.level), "full", hook)
    const = converse_constant(C, B, alpha)
    if direct:
        direct_ok, s, excess = verify_direct(signal, alpha, hook)
    else:
        direct_ok, s, excess = True, pixelated_seminorm(signal, alpha), 0.0
    edge_ok, sharp_ok, edge_excess = _edge_checks(signal, alpha, C, B)
    return RegularityReport(
        alpha=alpha,
        seminorm=s,
        C_est=C,
        computed_B=B,
        converse_constant=const,
        direct_ok=direct_ok,
        converse_ok=s <= const + SLACK,
        edge_bound_ok=edge_ok,
        sharp_edge_bound_ok=sharp_ok,
        worst_direct_excess=excess,
        worst_edge_excess=edge_excess,
    )


# -- synthetic signals -----------------------------------------------------------


def signal_from_coefficients(
    family: DyadicFamily, J: int, coefficients: Callable[[int], np.ndarray], mean: float = 0.0
) -> Signal:
    """Level-``J`` signal with the given haar coefficients on levels ``0..J-1``.

    ``coefficients(j)`` returns a ``(K_j, n-1)`` array laid out like
    :func:`level_coefficients` in full mode.
    """
    means = np.array([mean], dtype=float)
    for j in range(J):
        hl = haar_level(family, j)
        c = np.asarray(coefficients(j), dtype=float)
        beta = np.broadcast_to(hl.beta, (family.level_size(j),) + hl.beta.shape[1:])
        # value of sum_l c_l psi_l on each child slot
        on_child = np.einsum("kl,kln->kn", c, beta)
        nxt = np.empty(family.level_size(j + 1))
        present = hl.children >= 0
        nxt[hl.children[present]] = (means[:, None] + on_child)[present]
        means = nxt
    return Signal(family, J, means)


def power_law_signal(family: DyadicFamily, alpha: float, J: int, amplitude: float = 1.0) -> Signal:
    """Signal whose every full-basis coefficient is ``amplitude * mu**(alpha + 1/2)``."""

    def coeffs(j):
        hl = haar_level(family, j)
        mu = family.measures(j)
        width = hl.beta.shape[1]
        c = amplitude * np.repeat((mu ** (alpha + 0.5))[:, None], width, axis=1)
        return np.where(np.arange(width)[None, :] < hl.counts[:, None], c, 0.0)

    return signal_from_coefficients(family, J, coeffs)

