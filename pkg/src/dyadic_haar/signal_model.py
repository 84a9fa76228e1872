"""Signals as finest-level cell means, analytic test fields and PGM input."""

from __future__ import annotations

import csv
import io
import math
import threading
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dyadic_core import CubeRef, DyadicFamily, InvalidCubeError

__all__ = [
    "G_CUTOFFS",
    "AnalyticField",
    "GeometryError",
    "ImageGrid",
    "PGMError",
    "Signal",
    "cube_mean",
    "f1_cell_mean",
    "image_to_signal",
    "load_pgm",
    "parse_field",
    "sample_field",
]

AMPLITUDE = 255.0 / 2.0
FREQ = 20.0 * math.pi
G_CUTOFFS = (1 / 8, 1 / 4, 1 / 2, 3 / 4, 7 / 8)


class GeometryError(ValueError):
    """The family's cells cannot be matched with the requested sampling grid."""


class PGMError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class Signal:
    """A function on the space, known through its means on the level-``J`` cells.

    Cube integrals for all coarser levels are aggregated bottom-up on first
    use and cached; the cache build is guarded by a lock and idempotent.
    """

    def __init__(self, family: DyadicFamily, level: int, cell_means):
        if not 0 <= level <= family.max_level:
            raise InvalidCubeError(f"level {level} outside 0..{family.max_level}")
        means = np.array(cell_means, dtype=float).ravel()
        if means.size != family.level_size(level):
            raise ValueError(
                f"expected {family.level_size(level)} cell means at level {level}, got {means.size}"
            )
        means.setflags(write=False)
        self.family = family
        self.level = level
        self.cell_means = means
        self._integrals: list[np.ndarray] | None = None
        self._lock = threading.Lock()

    def __repr__(self) -> str:
        return f"Signal(level={self.level}, cells={self.cell_means.size})"

    def _build(self) -> list[np.ndarray]:
        fam = self.family
        ints = [None] * (self.level + 1)
        ints[self.level] = self.cell_means * fam.measures(self.level)
        for j in range(self.level, 0, -1):
            ints[j - 1] = np.bincount(fam.parents(j), weights=ints[j], minlength=fam.level_size(j - 1))
        for arr in ints:
            arr.setflags(write=False)
        return ints

    def integrals(self, j: int) -> np.ndarray:
        """Integral of the signal over every cube of level ``j``."""
        if not 0 <= j <= self.level:
            raise InvalidCubeError(f"level {j} outside 0..{self.level}")
        if self._integrals is None:
            with self._lock:
                if self._integrals is None:
                    self._integrals = self._build()
        return self._integrals[j]

    def means(self, j: int) -> np.ndarray:
        return self.integrals(j) / self.family.measures(j)

    def scale(self) -> float:
        return float(np.max(np.abs(self.cell_means))) if self.cell_means.size else 0.0

    def __add__(self, other: "Signal") -> "Signal":
        self._check_compatible(other)
        return Signal(self.family, self.level, self.cell_means + other.cell_means)

    def __mul__(self, c: float) -> "Signal":
        return Signal(self.family, self.level, c * self.cell_means)

    __rmul__ = __mul__

    def _check_compatible(self, other: "Signal") -> None:
        if other.family is not self.family or other.level != self.level:
            raise ValueError("signals live on different families or levels")

    def repixelate(self, level: int) -> "Signal":
        """The coarser signal holding this signal's means at ``level``."""
        return Signal(self.family, level, self.means(level))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "measure", "mean"])
        for k, (m, v) in enumerate(zip(self.family.measures(self.level), self.cell_means)):
            w.writerow([k, f"{m:.6g}", f"{v:.6g}"])
        return buf.getvalue()


def cube_mean(signal: Signal, cube: CubeRef) -> float:
    signal.family.check(cube)
    if cube.level > signal.level:
        raise InvalidCubeError(f"{cube} is finer than the signal level {signal.level}")
    if cube.level == signal.level:
        return float(signal.cell_means[cube.index])
    return float(signal.integrals(cube.level)[cube.index] / signal.family.measure(cube))


# -- analytic fields -------------------------------------------------------------


def _f1(x, y):
    return AMPLITUDE * (1.0 + np.sin(FREQ * x))


def _f2(x, y):
    return AMPLITUDE * (1.0 + np.sin(FREQ * (x + y)))


def f1_cell_mean(x0, x1):
    """Exact mean of F1 over cells spanning ``[x0, x1]`` in x (any y extent)."""
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    return AMPLITUDE * (1.0 + (np.cos(FREQ * x0) - np.cos(FREQ * x1)) / (FREQ * (x1 - x0)))


@dataclass(frozen=True)
class AnalyticField:
    """A test function on the unit square or on a family's cubes.

    ``kind`` is one of ``F1``, ``F2``, ``G``, ``constant``, ``indicator``,
    ``haar``, ``tabulated``.  Point-evaluated kinds need cell geometry; the
    others have exact cell means on any family.
    """

    kind: str
    params: dict = field(default_factory=dict)

    @classmethod
    def F1(cls):
        return cls("F1")

    @classmethod
    def F2(cls):
        return cls("F2")

    @classmethod
    def G(cls, i: int, shape: str = "slab"):
        if not 1 <= i <= len(G_CUTOFFS):
            raise ValueError(f"G index must be 1..{len(G_CUTOFFS)}, got {i}")
        if shape not in ("slab", "square"):
            raise ValueError("G cutoff shape must be 'slab' or 'square'")
        return cls("G", {"i": i, "b": G_CUTOFFS[i - 1], "shape": shape})

    @classmethod
    def constant(cls, c: float):
        return cls("constant", {"c": float(c)})

    @classmethod
    def indicator(cls, cube: CubeRef):
        return cls("indicator", {"cube": cube})

    @classmethod
    def haar(cls, cube: CubeRef, lam: int = 1):
        return cls("haar", {"cube": cube, "lam": lam})

    @classmethod
    def tabulated(cls, level: int, means):
        return cls("tabulated", {"level": level, "means": np.asarray(means, dtype=float)})

    @property
    def pointwise(self) -> Callable | None:
        if self.kind == "F1":
            return _f1
        if self.kind == "F2":
            return _f2
        if self.kind == "G":
            b = self.params["b"]
            if self.params.get("shape", "slab") == "square":
                return lambda x, y: _f1(x, y) * ((x <= b) & (y <= b))
            return lambda x, y: _f1(x, y) * (x <= b)
        return None

    def __str__(self) -> str:
        if self.kind == "G":
            return f"G{self.params['i']}"
        if self.kind == "constant":
            return f"constant:{self.params['c']:g}"
        return self.kind


def parse_field(spec: str) -> AnalyticField:
    """Parse CLI field specs: ``F1``, ``F2``, ``G1``..``G5``, ``constant:C``,
    ``indicator:J:K``, ``haar:J:K[:LAMBDA]``."""
    s = spec.strip()
    if s in ("F1", "F2"):
        return AnalyticField(s)
    if len(s) == 2 and s[0] == "G" and s[1].isdigit():
        return AnalyticField.G(int(s[1]))
    head, _, rest = s.partition(":")
    parts = rest.split(":") if rest else []
    try:
        if head == "constant" and len(parts) == 1:
            return AnalyticField.constant(float(parts[0]))
        if head == "indicator" and len(parts) == 2:
            return AnalyticField.indicator(CubeRef(int(parts[0]), int(parts[1])))
        if head == "haar" and len(parts) in (2, 3):
            lam = int(parts[2]) if len(parts) == 3 else 1
            return AnalyticField.haar(CubeRef(int(parts[0]), int(parts[1])), lam)
    except ValueError:
        pass
    raise ValueError(f"cannot parse field spec {spec!r}")


def _descendant_values(family: DyadicFamily, cube: CubeRef, values: np.ndarray, J: int) -> np.ndarray:
    """Level-``J`` cell means of a function that is piecewise constant at ``cube.level``."""
    out = np.zeros(family.level_size(J))
    anc = family.ancestor_indices(J, cube.level)
    out[:] = values[anc]
    return out


def _exact_means(fld: AnalyticField, family: DyadicFamily, J: int) -> np.ndarray:
    from .haar_system import build_cube_basis

    if fld.kind == "constant":
        return np.full(family.level_size(J), fld.params["c"])
    if fld.kind == "indicator":
        q = family.check(fld.params["cube"])
        if J >= q.level:
            vals = np.zeros(family.level_size(q.level))
            vals[q.index] = 1.0
            return _descendant_values(family, q, vals, J)
        out = np.zeros(family.level_size(J))
        host = family.ancestor(q, J)
        out[host.index] = family.measure(q) / family.measure(host)
        return out
    if fld.kind == "haar":
        q = family.check(fld.params["cube"])
        basis = build_cube_basis(family, q)
        lam = fld.params["lam"]
        if not 1 <= lam <= len(basis.haars):
            raise ValueError(f"{q} has haar indices 1..{len(basis.haars)}")
        h = basis.haars[lam - 1]
        if J <= q.level:
            # zero mean on its support, zero elsewhere
            return np.zeros(family.level_size(J))
        vals = np.zeros(family.level_size(q.level + 1))
        for c, v in zip(h.children, h.values):
            vals[c.index] = v
        return _descendant_values(family, CubeRef(q.level + 1, 0), vals, J)
    if fld.kind == "tabulated":
        L = fld.params["level"]
        src = Signal(family, L, fld.params["means"])
        if J <= L:
            return src.means(J)
        return src.cell_means[family.ancestor_indices(J, L)]
    raise ValueError(f"field {fld.kind} has no exact cell means")


def _block_mean_regular(fn, nx: int, ny: int, qx: int, qy: int, chunk_rows: int = 64) -> np.ndarray:
    """Midpoint-rule cell means on a regular ``ny x nx`` grid of the unit square."""
    out = np.empty((ny, nx))
    xs = (np.arange(nx * qx) + 0.5) / (nx * qx)
    for r0 in range(0, ny, chunk_rows):
        r1 = min(ny, r0 + chunk_rows)
        ys = (np.arange(r0 * qy, r1 * qy) + 0.5) / (ny * qy)
        vals = fn(xs[None, :], ys[:, None])
        vals = np.broadcast_to(vals, (ys.size, xs.size))
        out[r0:r1] = vals.reshape(r1 - r0, qy, nx, qx).mean(axis=(1, 3))
    return out.ravel()


def sample_field(fld: AnalyticField, family: DyadicFamily, J: int, quad=4) -> Signal:
    """Cell means of ``fld`` at level ``J``.

    ``quad`` is the number of midpoint subsamples per axis, or a pair
    ``(qx, qy)``.  Exact kinds ignore it.
    """
    if not 0 <= J <= family.max_level:
        raise InvalidCubeError(f"level {J} outside 0..{family.max_level}")
    qx, qy = (quad, quad) if np.isscalar(quad) else quad
    if qx < 1 or qy < 1:
        raise ValueError("quad must be at least 1")
    fn = fld.pointwise
    if fn is None:
        return Signal(family, J, _exact_means(fld, family, J))
    if not family.has_geometry():
        raise GeometryError(f"field {fld} needs cell geometry; the family has none")
    if hasattr(family, "grid_shape"):
        ny, nx = family.grid_shape(J)
        return Signal(family, J, _block_mean_regular(fn, nx, ny, qx, qy))
    rects = family.cell_rects(J)
    u = (np.arange(qx) + 0.5) / qx
    v = (np.arange(qy) + 0.5) / qy
    xs = rects[:, 0:1] + (rects[:, 1:2] - rects[:, 0:1]) * u[None, :]
    ys = rects[:, 2:3] + (rects[:, 3:4] - rects[:, 2:3]) * v[None, :]
    vals = fn(xs[:, None, :], ys[:, :, None])
    vals = np.broadcast_to(vals, (len(rects), qy, qx))
    return Signal(family, J, vals.mean(axis=(1, 2)))


# -- images ----------------------------------------------------------------------


@dataclass(frozen=True)
class ImageGrid:
    width: int
    height: int
    maxval: int
    samples: np.ndarray = field(repr=False)

    def as_array(self) -> np.ndarray:
        return self.samples.reshape(self.height, self.width)


_WS = b" \t\n\r\v\f"


def _header_tokens(data: bytes, count: int, pos: int) -> tuple[list[tuple[bytes, int]], int]:
    tokens = []
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos] in _WS:
            pos += 1
        if pos < n and data[pos] == ord("#"):
            while pos < n and data[pos] not in b"\n\r":
                pos += 1
            continue
        if pos >= n:
            raise PGMError("truncated header", pos)
        start = pos
        while pos < n and data[pos] not in _WS and data[pos] != ord("#"):
            pos += 1
        tokens.append((data[start:pos], start))
    return tokens, pos


def _int_token(tok: bytes, offset: int, what: str) -> int:
    if not tok.isdigit():
        raise PGMError(f"invalid {what} {tok!r}", offset)
    return int(tok)


def load_pgm(data: bytes) -> ImageGrid:
    """Parse a plain (P2) or raw (P5) PGM image."""
    if isinstance(data, str):
        data = data.encode("ascii")
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise PGMError(f"bad magic number {magic!r}", 0)
    tokens, pos = _header_tokens(data, 3, 2)
    width = _int_token(*tokens[0], "width")
    height = _int_token(*tokens[1], "height")
    maxval = _int_token(*tokens[2], "maxval")
    if width < 1 or height < 1:
        raise PGMError("image dimensions must be positive", tokens[0][1])
    if not 0 < maxval <= 65535:
        raise PGMError(f"maxval {maxval} outside 1..65535", tokens[2][1])
    count = width * height
    if magic == b"P5":
        if pos >= len(data) or data[pos] not in _WS:
            raise PGMError("missing whitespace after maxval", pos)
        pos += 1
        width_bytes = 2 if maxval > 255 else 1
        need = count * width_bytes
        if len(data) - pos < need:
            raise PGMError(f"truncated raster: need {need} bytes, have {len(data) - pos}", len(data))
        dtype = ">u2" if width_bytes == 2 else "u1"
        samples = np.frombuffer(data, dtype=dtype, count=count, offset=pos).astype(np.int64)
        bad = np.flatnonzero(samples > maxval)
        if bad.size:
            raise PGMError(f"sample {samples[bad[0]]} exceeds maxval {maxval}", pos + int(bad[0]) * width_bytes)
    else:
        values = []
        n = len(data)
        while len(values) < count:
            while pos < n and data[pos] in _WS:
                pos += 1
            if pos < n and data[pos] == ord("#"):
                while pos < n and data[pos] not in b"\n\r":
                    pos += 1
                continue
            if pos >= n:
                raise PGMError(f"truncated raster: {len(values)} of {count} samples", pos)
            start = pos
            while pos < n and data[pos] not in _WS:
                pos += 1
            v = _int_token(data[start:pos], start, "sample")
            if v > maxval:
                raise PGMError(f"sample {v} exceeds maxval {maxval}", start)
            values.append(v)
        samples = np.array(values, dtype=np.int64)
    samples.setflags(write=False)
    return ImageGrid(width, height, maxval, samples)


def image_to_signal(image: ImageGrid, family: DyadicFamily, J: int) -> Signal:
    """Average pixels over the level-``J`` cells.

    Image row 0 maps to the cells with ``y`` index 0.
    """
    if not 0 <= J <= family.max_level:
        raise InvalidCubeError(f"level {J} outside 0..{family.max_level}")
    pix = image.as_array().astype(float)
    if hasattr(family, "grid_shape"):
        ny, nx = family.grid_shape(J)
        if image.width % nx:
            raise GeometryError(f"x axis: {nx} cells do not divide image width {image.width}")
        if image.height % ny:
            raise GeometryError(f"y axis: {ny} cells do not divide image height {image.height}")
        blocks = pix.reshape(ny, image.height // ny, nx, image.width // nx)
        return Signal(family, J, blocks.mean(axis=(1, 3)).ravel())
    if not family.has_geometry():
        raise GeometryError("family carries no cell geometry")
    rects = family.cell_rects(J)
    means = np.empty(len(rects))
    for k, (x0, x1, y0, y1) in enumerate(rects):
        cols = np.array([x0, x1]) * image.width
        rows = np.array([y0, y1]) * image.height
        if not np.allclose(cols, np.round(cols)):
            raise GeometryError(f"x axis: cell {k} does not cover whole pixels")
        if not np.allclose(rows, np.round(rows)):
            raise GeometryError(f"y axis: cell {k} does not cover whole pixels")
        c0, c1 = np.round(cols).astype(int)
        r0, r1 = np.round(rows).astype(int)
        means[k] = pix[r0:r1, c0:c1].mean()
    return Signal(family, J, means)

