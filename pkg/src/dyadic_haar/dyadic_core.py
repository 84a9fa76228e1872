"""Dyadic families on probability spaces and the pseudo-ultrametric they induce.

A family is stored level by level: every level ``j`` is a dense array of cube
measures indexed ``0..K_j-1`` and (for ``j >= 1``) an array holding the index
of each cube's parent at level ``j-1``.  Offspring are kept as a padded
``(K_j, n_max)`` index matrix in a fixed order, ``-1`` marking unused slots.

Points of the space are represented by leaf cells at ``max_level``; two
distinct points inside the same leaf are indistinguishable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "AXIOMS",
    "CubeRef",
    "DyadicFamily",
    "ExplicitFamily",
    "FamilyStructureError",
    "InvalidCubeError",
    "LeafPoint",
    "ResolutionExhaustedError",
    "ValidationReport",
    "Violation",
    "ball",
    "cube_distance",
    "family_from_dict",
    "family_to_dict",
    "load_family",
    "point_distance",
    "random_family",
    "smallest_common_ancestor",
    "validate_family",
]

DEFAULT_TOL = 1e-9

AXIOMS = (
    "2.1.b-partition",
    "2.1.c-positive",
    "2.1.d-nesting",
    "2.1.e-inheritance",
    "2.2.1-additivity",
)


class FamilyStructureError(ValueError):
    """Raised when parent/offspring links of a family cannot be resolved."""


class InvalidCubeError(ValueError):
    """Raised for a cube address outside the family."""


class ResolutionExhaustedError(ValueError):
    """Raised when a query needs cubes finer than the materialized depth."""


@dataclass(frozen=True, order=True)
class CubeRef:
    level: int
    index: int

    def __str__(self) -> str:
        return f"Q[{self.level},{self.index}]"


@dataclass(frozen=True)
class LeafPoint:
    """A point of the space, known only through its finest materialized cell."""

    family: "DyadicFamily" = field(compare=False, repr=False)
    cube: CubeRef

    def __eq__(self, other):
        if not isinstance(other, LeafPoint):
            return NotImplemented
        return self.family is other.family and self.cube == other.cube

    def __hash__(self):
        return hash((id(self.family), self.cube))


@dataclass(frozen=True)
class Violation:
    axiom: str
    cube: CubeRef
    detail: str

    def __str__(self) -> str:
        return f"{self.axiom} {self.cube}: {self.detail}"


@dataclass
class ValidationReport:
    violations: list[Violation]
    computed_B: float
    computed_gamma: float

    @property
    def ok(self) -> bool:
        return not self.violations


class DyadicFamily:
    """Base class for finite-depth dyadic families.

    Subclasses provide the per-level arrays; everything else (ancestors,
    offspring lists, the inheritance coefficient) is derived here.
    """

    max_level: int
    declared_B: float | None = None

    # -- primitive per-level data, overridden by subclasses --------------------

    def level_size(self, j: int) -> int:
        raise NotImplementedError

    def measures(self, j: int) -> np.ndarray:
        raise NotImplementedError

    def parents(self, j: int) -> np.ndarray:
        """Index of the parent (at level j-1) of every cube at level ``j >= 1``."""
        raise NotImplementedError

    def children_matrix(self, j: int) -> np.ndarray:
        """Offspring of every cube at level ``j``, padded with -1."""
        raise NotImplementedError

    def has_geometry(self) -> bool:
        return False

    def cell_rects(self, j: int) -> np.ndarray:
        """Axis-aligned cell rectangles ``(K_j, 4)`` as ``x0, x1, y0, y1``."""
        raise FamilyStructureError("family carries no cell geometry")

    # -- derived -----------------------------------------------------------------

    @property
    def level_sizes(self) -> list[int]:
        return [self.level_size(j) for j in range(self.max_level + 1)]

    @property
    def root(self) -> CubeRef:
        return CubeRef(0, 0)

    def fanouts(self, j: int) -> np.ndarray:
        return np.count_nonzero(self.children_matrix(j) >= 0, axis=1)

    def check(self, cube: CubeRef) -> CubeRef:
        if not isinstance(cube, CubeRef):
            raise InvalidCubeError(f"not a cube reference: {cube!r}")
        if not 0 <= cube.level <= self.max_level:
            raise InvalidCubeError(f"{cube}: level outside 0..{self.max_level}")
        if not 0 <= cube.index < self.level_size(cube.level):
            raise InvalidCubeError(
                f"{cube}: index outside 0..{self.level_size(cube.level) - 1}"
            )
        return cube

    def measure(self, cube: CubeRef) -> float:
        self.check(cube)
        return float(self.measures(cube.level)[cube.index])

    def parent(self, cube: CubeRef) -> CubeRef:
        self.check(cube)
        if cube.level == 0:
            raise InvalidCubeError("the root has no parent")
        return CubeRef(cube.level - 1, int(self.parents(cube.level)[cube.index]))

    def offspring(self, cube: CubeRef) -> list[CubeRef]:
        self.check(cube)
        if cube.level == self.max_level:
            return []
        row = self.children_matrix(cube.level)[cube.index]
        return [CubeRef(cube.level + 1, int(c)) for c in row if c >= 0]

    def parent_index(self, j: int, k: int) -> int:
        """Index of the parent of the (unchecked) cube ``(j, k)``; scalar fast path."""
        lists = self.__dict__.setdefault("_parent_lists", {})
        if j not in lists:
            lists[j] = self.parents(j).tolist()
        return lists[j][k]

    def ancestor(self, cube: CubeRef, level: int) -> CubeRef:
        """The cube at ``level`` containing ``cube`` (``cube`` itself if same level)."""
        self.check(cube)
        if level > cube.level or level < 0:
            raise InvalidCubeError(f"no ancestor of {cube} at level {level}")
        k = cube.index
        for j in range(cube.level, level, -1):
            k = int(self.parents(j)[k])
        return CubeRef(level, k)

    def ancestor_indices(self, j: int, level: int) -> np.ndarray:
        """Vectorized ancestor lookup for all cubes of level ``j``."""
        idx = np.arange(self.level_size(j))
        for jj in range(j, level, -1):
            idx = self.parents(jj)[idx]
        return idx

    def contains(self, outer: CubeRef, inner: CubeRef) -> bool:
        return outer.level <= inner.level and self.ancestor(inner, outer.level) == outer

    def leaf(self, index: int) -> LeafPoint:
        return LeafPoint(self, self.check(CubeRef(self.max_level, index)))

    @property
    def inheritance_coefficient(self) -> float:
        """Smallest B with measure(parent) <= B * measure(child) for all pairs."""
        cached = getattr(self, "_computed_B", None)
        if cached is None:
            ratios = [
                np.max(self.measures(j - 1)[self.parents(j)] / self.measures(j))
                for j in range(1, self.max_level + 1)
            ]
            cached = float(max(ratios)) if ratios else 2.0
            self._computed_B = cached
        return cached

    @property
    def decay_ratio(self) -> float:
        return 1.0 - 1.0 / self.inheritance_coefficient


class ExplicitFamily(DyadicFamily):
    """A family given node by node, as loaded from a JSON family file."""

    def __init__(
        self,
        measures: Sequence[Sequence[float]],
        children: Sequence[Sequence[Sequence[int]]],
        rects: Sequence[Sequence[Sequence[float]]] | None = None,
        declared_B: float | None = None,
    ):
        if len(measures) < 2:
            raise FamilyStructureError("a family needs at least two levels")
        if len(children) != len(measures):
            raise FamilyStructureError("children lists must cover every level")
        if len(measures[0]) != 1:
            raise FamilyStructureError("level 0 must hold exactly one cube")
        self.max_level = len(measures) - 1
        self.declared_B = declared_B
        self._measures = [np.asarray(m, dtype=float) for m in measures]
        for arr in self._measures:
            arr.setflags(write=False)
        self._children: list[np.ndarray] = []
        self._parents: list[np.ndarray | None] = [None]
        for j in range(self.max_level + 1):
            K = len(self._measures[j])
            if len(children[j]) != K:
                raise FamilyStructureError(f"level {j}: {K} cubes but {len(children[j])} child lists")
            if j == self.max_level:
                if any(len(c) for c in children[j]):
                    raise FamilyStructureError(f"level {j} is the deepest; it cannot have children")
                continue
            K_next = len(measures[j + 1])
            parent = np.full(K_next, -1, dtype=np.int64)
            width = max((len(c) for c in children[j]), default=0)
            mat = np.full((K, max(width, 1)), -1, dtype=np.int64)
            for k, kids in enumerate(children[j]):
                for slot, c in enumerate(sorted(int(c) for c in kids)):
                    if not 0 <= c < K_next:
                        raise FamilyStructureError(
                            f"cube {CubeRef(j, k)} links to missing child index {c}"
                        )
                    if parent[c] >= 0:
                        raise FamilyStructureError(
                            f"cube {CubeRef(j + 1, c)} claimed by two parents"
                        )
                    parent[c] = k
                    mat[k, slot] = c
            orphans = np.flatnonzero(parent < 0)
            if orphans.size:
                raise FamilyStructureError(
                    f"cube {CubeRef(j + 1, int(orphans[0]))} has no parent"
                )
            mat.setflags(write=False)
            parent.setflags(write=False)
            self._children.append(mat)
            self._parents.append(parent)
        self._children.append(np.full((len(self._measures[-1]), 1), -1, dtype=np.int64))
        self._rects = None
        if rects is not None:
            self._rects = [np.asarray(r, dtype=float).reshape(-1, 4) for r in rects]
            for j, r in enumerate(self._rects):
                if len(r) != len(self._measures[j]):
                    raise FamilyStructureError(f"level {j}: rect count mismatch")

    def level_size(self, j: int) -> int:
        return len(self._measures[j])

    def measures(self, j: int) -> np.ndarray:
        return self._measures[j]

    def parents(self, j: int) -> np.ndarray:
        if j < 1:
            raise InvalidCubeError("level 0 has no parents")
        return self._parents[j]

    def children_matrix(self, j: int) -> np.ndarray:
        return self._children[j]

    def has_geometry(self) -> bool:
        return self._rects is not None

    def cell_rects(self, j: int) -> np.ndarray:
        if self._rects is None:
            return super().cell_rects(j)
        return self._rects[j]


def family_from_dict(doc: dict) -> ExplicitFamily:
    """Build a family from the ``{"levels": [[{measure, children}, ...], ...]}`` schema."""
    try:
        levels = doc["levels"]
        measures = [[float(node["measure"]) for node in level] for level in levels]
        children = [[list(node.get("children", [])) for node in level] for level in levels]
        rects = None
        if levels and all("rect" in node for level in levels for node in level):
            rects = [[node["rect"] for node in level] for level in levels]
    except (KeyError, TypeError) as exc:
        raise FamilyStructureError(f"malformed family document: {exc}") from exc
    return ExplicitFamily(measures, children, rects, doc.get("inheritance_coefficient"))


def family_to_dict(family: DyadicFamily) -> dict:
    levels = []
    for j in range(family.max_level + 1):
        mu = family.measures(j)
        level = []
        for k in range(family.level_size(j)):
            node = {"measure": float(mu[k])}
            if j < family.max_level:
                node["children"] = [c.index for c in family.offspring(CubeRef(j, k))]
            if family.has_geometry():
                node["rect"] = [float(v) for v in family.cell_rects(j)[k]]
            level.append(node)
        levels.append(level)
    doc = {"levels": levels}
    if family.declared_B is not None:
        doc["inheritance_coefficient"] = family.declared_B
    return doc


def load_family(path: str | Path) -> ExplicitFamily:
    with open(path, encoding="utf-8") as fh:
        return family_from_dict(json.load(fh))


def validate_family(family: DyadicFamily, tol: float = DEFAULT_TOL) -> ValidationReport:
    """Check the dyadic family axioms, reporting every violation found."""
    violations: list[Violation] = []
    for j in range(family.max_level + 1):
        mu = family.measures(j)
        total = float(np.sum(mu))
        if abs(total - 1.0) > tol:
            violations.append(
                Violation("2.1.b-partition", CubeRef(j, 0), f"level {j} measures sum to {total!r}")
            )
        for k in np.flatnonzero(~(mu > 0)):
            violations.append(
                Violation("2.1.c-positive", CubeRef(j, int(k)), f"measure {mu[k]!r}")
            )
    ratios = []
    for j in range(family.max_level):
        mu = family.measures(j)
        mu_next = family.measures(j + 1)
        kids = family.children_matrix(j)
        present = kids >= 0
        n = present.sum(axis=1)
        child_mu = np.where(present, mu_next[np.where(present, kids, 0)], 0.0)
        sums = child_mu.sum(axis=1)
        for k in np.flatnonzero(n < 2):
            violations.append(
                Violation("2.1.d-nesting", CubeRef(j, int(k)), f"{int(n[k])} offspring; need at least 2")
            )
        bad = np.abs(sums - mu) > tol * np.maximum(np.abs(mu), 1e-300)
        for k in np.flatnonzero(bad & (n > 0)):
            violations.append(
                Violation(
                    "2.2.1-additivity",
                    CubeRef(j, int(k)),
                    f"offspring measures sum to {sums[k]!r}, cube measure {mu[k]!r}",
                )
            )
        positive = present & (child_mu > 0)
        if positive.any():
            ratios.append(np.max(np.where(positive, mu[:, None] / np.where(positive, child_mu, 1.0), 0.0)))
    computed_B = float(max(ratios)) if ratios else 2.0
    B = family.declared_B if family.declared_B is not None else computed_B
    if family.declared_B is not None:
        if family.declared_B < 2:
            violations.append(
                Violation("2.1.e-inheritance", CubeRef(0, 0), f"declared B={family.declared_B!r} < 2")
            )
        if computed_B > family.declared_B * (1 + tol):
            violations.append(
                Violation(
                    "2.1.e-inheritance",
                    CubeRef(0, 0),
                    f"parent/child ratio {computed_B!r} exceeds declared B={family.declared_B!r}",
                )
            )
    for j in range(family.max_level):
        n = family.fanouts(j)
        for k in np.flatnonzero(n > B * (1 + tol)):
            violations.append(
                Violation("2.1.e-inheritance", CubeRef(j, int(k)), f"{int(n[k])} offspring exceed B={B!r}")
            )
    gamma = 1.0 - 1.0 / computed_B if computed_B > 0 else float("nan")
    return ValidationReport(violations, computed_B, gamma)


def smallest_common_ancestor(family: DyadicFamily, a: CubeRef, b: CubeRef) -> CubeRef:
    family.check(a)
    family.check(b)
    ia, ib = a.index, b.index
    for j in range(a.level, b.level, -1):
        ia = family.parent_index(j, ia)
    for j in range(b.level, a.level, -1):
        ib = family.parent_index(j, ib)
    level = min(a.level, b.level)
    while ia != ib:
        ia = family.parent_index(level, ia)
        ib = family.parent_index(level, ib)
        level -= 1
    return CubeRef(level, ia)


def cube_distance(family: DyadicFamily, a: CubeRef, b: CubeRef) -> float:
    """Measure of the smallest cube containing both ``a`` and ``b``.

    For nested cubes this is the measure of the outer one.
    """
    return family.measure(smallest_common_ancestor(family, a, b))


def point_distance(family: DyadicFamily, x: LeafPoint, y: LeafPoint) -> float:
    for p in (x, y):
        if p.family is not family:
            raise InvalidCubeError("leaf point belongs to a different family")
        if p.cube.level != family.max_level:
            raise InvalidCubeError(f"{p.cube} is not a leaf")
    if x.cube == y.cube:
        return 0.0
    return cube_distance(family, x.cube, y.cube)


def ball(family: DyadicFamily, x: LeafPoint, r: float) -> CubeRef:
    """Largest cube containing ``x`` whose measure is strictly less than ``r``."""
    if x.family is not family:
        raise InvalidCubeError("leaf point belongs to a different family")
    leaf = family.check(x.cube)
    if r <= family.measure(leaf):
        raise ResolutionExhaustedError(
            f"radius {r!r} is not above the leaf measure {family.measure(leaf)!r}"
        )
    chain = [leaf]
    while chain[-1].level > 0:
        chain.append(family.parent(chain[-1]))
    for cube in reversed(chain):
        if family.measure(cube) < r:
            return cube
    raise AssertionError("unreachable: the leaf measure is below r")


def random_family(
    rng: np.random.Generator,
    depth: int,
    max_fanout: int = 4,
    min_share: float = 0.05,
) -> ExplicitFamily:
    """Random explicit family with ``depth`` levels below the root.

    Each cube is split into 2..max_fanout children whose shares are drawn
    uniformly and floored at ``min_share`` of the even split.
    """
    if depth < 1 or max_fanout < 2:
        raise ValueError("need depth >= 1 and max_fanout >= 2")
    measures: list[list[float]] = [[1.0]]
    children: list[list[list[int]]] = []
    for j in range(depth):
        next_mu: list[float] = []
        kids_j: list[list[int]] = []
        for m in measures[j]:
            n = int(rng.integers(2, max_fanout + 1))
            w = rng.uniform(0.0, 1.0, n) + min_share
            w = w / w.sum()
            start = len(next_mu)
            parts = list(m * w[:-1])
            parts.append(m - sum(parts))
            next_mu.extend(parts)
            kids_j.append(list(range(start, start + n)))
        measures.append(next_mu)
        children.append(kids_j)
    children.append([[] for _ in measures[-1]])
    return ExplicitFamily(measures, children)


def iter_cubes(family: DyadicFamily, levels: Iterable[int] | None = None):
    for j in levels if levels is not None else range(family.max_level + 1):
        for k in range(family.level_size(j)):
            yield CubeRef(j, k)
