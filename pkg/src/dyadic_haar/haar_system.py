"""Haar systems generated by dyadic families.

Every function in the span of a cube's offspring is stored as the vector of
its values on those offspring, in the family's child order.  Under
``L^2(mu)`` the inner product of two such vectors is ``sum(u * v * mu_child)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dyadic_core import CubeRef, DyadicFamily, InvalidCubeError

__all__ = [
    "CubeBasis",
    "HaarFunction",
    "HaarLevel",
    "NoOffspringError",
    "build_cube_basis",
    "gram_schmidt_haar",
    "haar_coefficient",
    "haar_level",
    "inner_product",
    "level_coefficients",
    "orthonormality_check",
    "template_level",
]

DROP_TOL = 1e-12


class NoOffspringError(InvalidCubeError):
    """The cube sits at the deepest level and spans no Haar functions."""


@dataclass(frozen=True)
class HaarFunction:
    support: CubeRef
    lam: int
    children: tuple[CubeRef, ...]
    values: np.ndarray = field(repr=False)

    def value_on(self, child: CubeRef) -> float:
        return float(self.values[self.children.index(child)])


@dataclass(frozen=True)
class CubeBasis:
    support: CubeRef
    scaling_norm: float
    haars: tuple[HaarFunction, ...]


def gram_schmidt_haar(child_measures: np.ndarray) -> np.ndarray:
    """Haar values for a cube whose children have the given measures.

    Orthonormalizes ``[1, e_0, ..., e_{n-2}]`` in the weighted inner product
    (modified Gram-Schmidt, one re-orthogonalization pass) and returns the
    ``(n-1, n)`` array of everything after the normalized constant.
    """
    w = np.asarray(child_measures, dtype=float)
    n = w.size
    if n < 2:
        raise NoOffspringError(f"need at least two children, got {n}")

    def dot(u, v):
        return float(np.sum(u * v * w))

    basis = []
    start = [np.ones(n)] + [np.eye(n)[i] for i in range(n - 1)]
    for v in start:
        v = v.copy()
        for _ in range(2):
            for q in basis:
                v -= dot(v, q) * q
        norm = np.sqrt(dot(v, v))
        if norm < DROP_TOL:
            raise FloatingPointError("degenerate child measures in Gram-Schmidt")
        basis.append(v / norm)
    return np.array(basis[1:])


def build_cube_basis(family: DyadicFamily, cube: CubeRef) -> CubeBasis:
    family.check(cube)
    kids = family.offspring(cube)
    if not kids:
        raise NoOffspringError(f"{cube} is at the deepest level {family.max_level}")
    mu = np.array([family.measure(c) for c in kids])
    values = gram_schmidt_haar(mu)
    haars = tuple(
        HaarFunction(cube, lam + 1, tuple(kids), values[lam]) for lam in range(len(values))
    )
    return CubeBasis(cube, family.measure(cube) ** -0.5, haars)


@dataclass(frozen=True)
class HaarLevel:
    """All Haar functions of one level in array form.

    ``children`` is the padded ``(K_j, n)`` child index matrix, ``beta`` has
    shape ``(K_j, n-1, n)`` or ``(1, n-1, n)`` when shared by every cube, and
    ``counts`` holds the number of genuine Haar functions per cube.  Padded
    rows of ``beta`` are zero.
    """

    level: int
    children: np.ndarray
    beta: np.ndarray
    counts: np.ndarray

    def beta_for(self, k: int) -> np.ndarray:
        return self.beta[0 if self.beta.shape[0] == 1 else k]


def _shared_measure_pattern(family: DyadicFamily, j: int) -> bool:
    # Geometric families split every cube identically.
    return hasattr(family, "kind")


def haar_level(family: DyadicFamily, j: int) -> HaarLevel:
    """Gram-Schmidt Haar functions for every cube of level ``j`` (cached)."""
    cache = family.__dict__.setdefault("_haar_levels", {})
    if j in cache:
        return cache[j]
    if not 0 <= j < family.max_level:
        raise NoOffspringError(f"level {j} has no offspring in a family of depth {family.max_level}")
    kids = family.children_matrix(j)
    mu_next = family.measures(j + 1)
    counts = family.fanouts(j) - 1
    if _shared_measure_pattern(family, j):
        beta = gram_schmidt_haar(mu_next[kids[0]])[None, :, :]
    else:
        K, n = kids.shape
        beta = np.zeros((K, max(n - 1, 1), n))
        for k in range(K):
            m = counts[k] + 1
            if m < 2:
                raise NoOffspringError(f"{CubeRef(j, k)} has fewer than two offspring")
            beta[k, : m - 1, :m] = gram_schmidt_haar(mu_next[kids[k, :m]])
    beta.setflags(write=False)
    out = HaarLevel(j, kids, beta, counts)
    cache[j] = out
    return out


def template_level(family: DyadicFamily, j: int, kind: str) -> HaarLevel:
    """The single template wavelet of ``kind`` on every cube of level ``j``."""
    from .families_2d import FAMILY_FOR_TEMPLATE, template_child_values

    if getattr(family, "kind", None) != FAMILY_FOR_TEMPLATE.get(kind):
        raise ValueError(f"template {kind} needs the {FAMILY_FOR_TEMPLATE.get(kind)} family")
    if not 0 <= j < family.max_level:
        raise NoOffspringError(f"level {j} has no offspring in a family of depth {family.max_level}")
    beta = template_child_values(kind, j)[None, None, :]
    return HaarLevel(j, family.children_matrix(j), beta, np.ones(family.level_size(j), dtype=int))


def _gather(values: np.ndarray, index: np.ndarray) -> np.ndarray:
    return np.where(index >= 0, values[np.where(index >= 0, index, 0)], 0.0)


def level_coefficients(signal, j: int, mode: str = "full") -> np.ndarray:
    """Haar coefficients of ``signal`` on every cube of level ``j``.

    Returns ``(K_j, n-1)`` for ``mode="full"`` (padded entries are 0) and
    ``(K_j, 1)`` for a template kind ``"I"``, ``"II"`` or ``"III"``.
    """
    if j + 1 > signal.level:
        raise InvalidCubeError(
            f"coefficients at level {j} need cell means at level {j + 1}; signal stops at {signal.level}"
        )
    hl = haar_level(signal.family, j) if mode == "full" else template_level(signal.family, j, mode)
    child_int = _gather(signal.integrals(j + 1), hl.children)
    if hl.beta.shape[0] == 1:
        return child_int @ hl.beta[0].T
    return np.einsum("kln,kn->kl", hl.beta, child_int)


def haar_coefficient(signal, haar: HaarFunction) -> float:
    """``<f, psi>`` as the beta-weighted sum of the child integrals of ``f``."""
    if haar.support.level + 1 > signal.level:
        raise InvalidCubeError(
            f"{haar.support}: coefficient is not determined by level-{signal.level} means"
        )
    ints = signal.integrals(haar.support.level + 1)
    return float(sum(v * ints[c.index] for c, v in zip(haar.children, haar.values)))


def _expand(family: DyadicFamily, haar: HaarFunction, level: int) -> dict[int, float]:
    """Values of ``haar`` on the level-``level`` cells inside its support."""
    out = {c.index: float(v) for c, v in zip(haar.children, haar.values)}
    for j in range(haar.support.level + 1, level):
        kids = family.children_matrix(j)
        out = {int(c): v for k, v in out.items() for c in kids[k] if c >= 0}
    return out


def inner_product(family: DyadicFamily, a: HaarFunction, b: HaarFunction) -> float:
    """``<a, b>`` computed cell by cell at the finer of the two child levels."""
    level = max(a.support.level, b.support.level) + 1
    ea = _expand(family, a, level)
    eb = _expand(family, b, level)
    mu = family.measures(level)
    return float(sum(v * eb[k] * mu[k] for k, v in ea.items() if k in eb))


def orthonormality_check(
    family: DyadicFamily,
    levels: range | None = None,
    sample: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Largest deviation of haar inner products from the Kronecker delta.

    With ``sample=None`` every pair is covered: pairs on the same cube and
    pairs with nested supports are computed in bulk, and pairs with disjoint
    supports vanish identically (no common cell).  Otherwise ``sample`` random
    pairs are evaluated one by one with :func:`inner_product`.
    """
    if levels is None:
        levels = range(family.max_level)
    levels = [j for j in levels if 0 <= j < family.max_level]
    if sample is not None:
        rng = rng or np.random.default_rng()
        haars = []
        for _ in range(2 * sample):
            j = int(rng.choice(levels))
            k = int(rng.integers(family.level_size(j)))
            basis = build_cube_basis(family, CubeRef(j, k))
            haars.append(basis.haars[int(rng.integers(len(basis.haars)))])
        dev = 0.0
        for a, b in zip(haars[::2], haars[1::2]):
            target = 1.0 if (a.support == b.support and a.lam == b.lam) else 0.0
            dev = max(dev, abs(inner_product(family, a, b) - target))
        return dev

    dev = 0.0
    for j in levels:
        hl = haar_level(family, j)
        mu_kids = _gather(family.measures(j + 1), hl.children)
        # same cube: beta diag(mu) beta^T against the identity on genuine rows
        if hl.beta.shape[0] == 1:
            gram = (hl.beta[0] * mu_kids[0]) @ hl.beta[0].T
            n = int(hl.counts[0])
            dev = max(dev, float(np.max(np.abs(gram[:n, :n] - np.eye(n)))))
        else:
            gram = np.einsum("kln,kn,kmn->klm", hl.beta, mu_kids, hl.beta)
            eye = np.zeros_like(gram)
            for k, n in enumerate(hl.counts):
                eye[k, :n, :n] = np.eye(n)
            dev = max(dev, float(np.max(np.abs(gram - eye))))
        # nested: the coarser haar on ancestor level a is constant on this cube
        weighted = np.einsum("kln,kn->kl", np.broadcast_to(hl.beta, (len(mu_kids),) + hl.beta.shape[1:]), mu_kids)
        for a in levels:
            if a >= j:
                continue
            hla = haar_level(family, a)
            anc = family.ancestor_indices(j, a)
            via = family.ancestor_indices(j, a + 1)
            slot = np.argmax(hla.children[anc] == via[:, None], axis=1)
            coarse = hla.beta if hla.beta.shape[0] > 1 else np.broadcast_to(
                hla.beta, (family.level_size(a),) + hla.beta.shape[1:]
            )
            const = coarse[anc, :, slot]  # (K_j, n_a - 1)
            cross = weighted[:, :, None] * const[:, None, :]
            dev = max(dev, float(np.max(np.abs(cross))))
    return dev

