"""Built-in rectangle families on the unit square and their template wavelets.

Level ``j`` of each family is a regular grid of ``nx_j * ny_j`` cells, indexed
row-major as ``k = ky * nx_j + kx``.  A cell splits into ``fx * fy`` children
listed with x varying fastest.

==========  =========  =========  ========
kind        nx_j       ny_j       children
==========  =========  =========  ========
squares     2**j       2**j       2 x 2
parabolic   4**j       2**j       4 x 2
bands       2**j       1          2 x 1
==========  =========  =========  ========
"""

from __future__ import annotations

import numpy as np

from .dyadic_core import CubeRef, DyadicFamily, InvalidCubeError

__all__ = [
    "FAMILY_KINDS",
    "TEMPLATE_FOR_FAMILY",
    "GeometricFamily",
    "make_family",
    "template_child_values",
    "template_wavelet",
]

# kind -> (x refinement, y refinement)
_SPLITS = {"squares": (2, 2), "parabolic": (4, 2), "bands": (2, 1)}
FAMILY_KINDS = tuple(_SPLITS)
TEMPLATE_FOR_FAMILY = {"squares": "I", "parabolic": "II", "bands": "III"}
FAMILY_FOR_TEMPLATE = {v: k for k, v in TEMPLATE_FOR_FAMILY.items()}

# Index arrays are int64; stay well clear of overflow in K_j.
_MAX_CELLS = 2**40


class GeometricFamily(DyadicFamily):
    """Equal-measure rectangle family addressed by index arithmetic."""

    def __init__(self, kind: str, max_level: int):
        if kind not in _SPLITS:
            raise ValueError(f"unknown family kind {kind!r}; expected one of {FAMILY_KINDS}")
        if max_level < 1:
            raise ValueError("max_level must be at least 1")
        self.kind = kind
        self.fx, self.fy = _SPLITS[kind]
        if (self.fx * self.fy) ** max_level > _MAX_CELLS:
            raise OverflowError(f"{kind} family at level {max_level} exceeds the index space")
        self.max_level = max_level
        self.declared_B = None
        self._cache: dict = {}

    def __repr__(self) -> str:
        return f"GeometricFamily({self.kind!r}, max_level={self.max_level})"

    @property
    def branching(self) -> int:
        return self.fx * self.fy

    def grid_shape(self, j: int) -> tuple[int, int]:
        """``(ny_j, nx_j)`` of level ``j``."""
        self._check_level(j)
        return self.fy**j, self.fx**j

    def _check_level(self, j: int) -> None:
        if not 0 <= j <= self.max_level:
            raise InvalidCubeError(f"level {j} outside 0..{self.max_level}")

    def level_size(self, j: int) -> int:
        self._check_level(j)
        return self.branching**j

    def measures(self, j: int) -> np.ndarray:
        key = ("mu", j)
        if key not in self._cache:
            arr = np.full(self.level_size(j), 1.0 / self.level_size(j))
            arr.setflags(write=False)
            self._cache[key] = arr
        return self._cache[key]

    def measure(self, cube: CubeRef) -> float:
        self.check(cube)
        return 1.0 / self.level_size(cube.level)

    def position(self, cube: CubeRef) -> tuple[int, int]:
        """``(kx, ky)`` of a cube."""
        self.check(cube)
        nx = self.fx**cube.level
        return cube.index % nx, cube.index // nx

    def cube_at(self, j: int, kx: int, ky: int) -> CubeRef:
        ny, nx = self.grid_shape(j)
        if not (0 <= kx < nx and 0 <= ky < ny):
            raise InvalidCubeError(f"position ({kx}, {ky}) outside level {j}")
        return CubeRef(j, ky * nx + kx)

    def parent(self, cube: CubeRef) -> CubeRef:
        if cube.level == 0:
            raise InvalidCubeError("the root has no parent")
        kx, ky = self.position(cube)
        return self.cube_at(cube.level - 1, kx // self.fx, ky // self.fy)

    def parent_index(self, j: int, k: int) -> int:
        nx = self.fx**j
        return (k // nx) // self.fy * (nx // self.fx) + (k % nx) // self.fx

    def ancestor(self, cube: CubeRef, level: int) -> CubeRef:
        if level > cube.level or level < 0:
            raise InvalidCubeError(f"no ancestor of {cube} at level {level}")
        kx, ky = self.position(cube)
        d = cube.level - level
        return self.cube_at(level, kx // self.fx**d, ky // self.fy**d)

    def offspring(self, cube: CubeRef) -> list[CubeRef]:
        self.check(cube)
        if cube.level == self.max_level:
            return []
        kx, ky = self.position(cube)
        return [
            self.cube_at(cube.level + 1, self.fx * kx + a, self.fy * ky + b)
            for b in range(self.fy)
            for a in range(self.fx)
        ]

    def parents(self, j: int) -> np.ndarray:
        if j < 1:
            raise InvalidCubeError("level 0 has no parents")
        key = ("parents", j)
        if key not in self._cache:
            ny, nx = self.grid_shape(j)
            kx = np.arange(nx) // self.fx
            ky = np.arange(ny) // self.fy
            arr = (ky[:, None] * (nx // self.fx) + kx[None, :]).ravel()
            arr.setflags(write=False)
            self._cache[key] = arr
        return self._cache[key]

    def children_matrix(self, j: int) -> np.ndarray:
        key = ("children", j)
        if key not in self._cache:
            ny, nx = self.grid_shape(j)
            if j == self.max_level:
                arr = np.full((nx * ny, 1), -1, dtype=np.int64)
            else:
                nx1 = nx * self.fx
                kx = np.arange(nx)
                ky = np.arange(ny)
                base = (self.fy * ky)[:, None] * nx1 + (self.fx * kx)[None, :]
                offs = np.array([b * nx1 + a for b in range(self.fy) for a in range(self.fx)])
                arr = base.reshape(-1, 1) + offs[None, :]
            arr.setflags(write=False)
            self._cache[key] = arr
        return self._cache[key]

    def fanouts(self, j: int) -> np.ndarray:
        n = 0 if j == self.max_level else self.branching
        return np.full(self.level_size(j), n)

    @property
    def inheritance_coefficient(self) -> float:
        return float(self.branching)

    def has_geometry(self) -> bool:
        return True

    def cell_rects(self, j: int) -> np.ndarray:
        ny, nx = self.grid_shape(j)
        kx = np.tile(np.arange(nx), ny)
        ky = np.repeat(np.arange(ny), nx)
        return np.column_stack([kx / nx, (kx + 1) / nx, ky / ny, (ky + 1) / ny])


def make_family(kind: str, max_level: int) -> GeometricFamily:
    return GeometricFamily(kind, max_level)


def template_child_values(kind: str, j: int) -> np.ndarray:
    """Values of the template wavelet on the children of any level-``j`` cube.

    The order matches :meth:`GeometricFamily.offspring`.
    """
    if kind == "I":
        # 2**j on the left column of quadrants, -2**j on the right
        return 2.0**j * np.array([1.0, -1.0, 1.0, -1.0])
    if kind == "II":
        amp = 8.0 ** (j / 2)
        row = np.array([1.0, 1.0, -1.0, -1.0])
        return amp * np.concatenate([row, row])
    if kind == "III":
        return 2.0 ** (j / 2) * np.array([1.0, -1.0])
    raise ValueError(f"unknown template kind {kind!r}; expected I, II or III")


def template_wavelet(kind: str, j: int, k: tuple[int, int] | int, family: GeometricFamily | None = None):
    """The closed-form template wavelet of ``kind`` on cube ``(j, k)``.

    ``k`` is ``(k1, k2)`` for I and II and a single integer for III.
    """
    from .haar_system import HaarFunction

    fam_kind = FAMILY_FOR_TEMPLATE.get(kind)
    if fam_kind is None:
        raise ValueError(f"unknown template kind {kind!r}; expected I, II or III")
    if family is None:
        family = GeometricFamily(fam_kind, j + 1)
    elif getattr(family, "kind", None) != fam_kind:
        raise ValueError(f"template {kind} lives on the {fam_kind} family")
    if j >= family.max_level:
        raise InvalidCubeError(f"template at level {j} needs cells at level {j + 1}")
    if kind == "III":
        if not isinstance(k, (int, np.integer)):
            raise InvalidCubeError("template III takes a single position index")
        cube = family.cube_at(j, int(k), 0)
    else:
        try:
            k1, k2 = k
        except TypeError:
            raise InvalidCubeError(f"template {kind} takes a position pair (k1, k2)") from None
        cube = family.cube_at(j, int(k1), int(k2))
    return HaarFunction(cube, 1, tuple(family.offspring(cube)), template_child_values(kind, j))

