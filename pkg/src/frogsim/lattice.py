"""Integer lattice geometry: points, norms, boxes and neighbourhoods.

Sites are plain tuples of ints.  All region membership tests are done in
exact integer arithmetic (the Euclidean ball compares squared lengths).
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

SitePoint = tuple[int, ...]


class Norm(str, enum.Enum):
    L1 = "L1"
    L2 = "L2"
    L2SQ = "L2sq"
    LINF = "LInf"


def as_site(p: Sequence[int]) -> SitePoint:
    return tuple(int(c) for c in p)


def origin(d: int) -> SitePoint:
    return (0,) * d


def norm(p: Sequence[int], kind: Norm | str = Norm.L1) -> int:
    """Integer norm of ``p``.  ``L2``/``L2sq`` both return the squared length."""
    kind = Norm(kind)
    if kind is Norm.L1:
        return sum(abs(int(c)) for c in p)
    if kind is Norm.LINF:
        return max((abs(int(c)) for c in p), default=0)
    return sum(int(c) * int(c) for c in p)


def distance(p: Sequence[int], q: Sequence[int], kind: Norm | str = Norm.L1) -> int:
    return norm(tuple(int(a) - int(b) for a, b in zip(p, q)), kind)


def add(p: Sequence[int], q: Sequence[int]) -> SitePoint:
    return tuple(int(a) + int(b) for a, b in zip(p, q))


def scale(p: Sequence[int], k: int) -> SitePoint:
    return tuple(int(k) * int(c) for c in p)


def unit_vector(axis: int, d: int) -> SitePoint:
    if not 0 <= axis < d:
        raise ValueError(f"axis {axis} out of range for dimension {d}")
    return tuple(1 if i == axis else 0 for i in range(d))


def neighbors(p: Sequence[int], star: bool = False) -> set[SitePoint]:
    """Nearest neighbours (``star=False``: 2d sites) or the 3^d - 1 star neighbours."""
    p = as_site(p)
    d = len(p)
    if not star:
        out = set()
        for i in range(d):
            for s in (1, -1):
                q = list(p)
                q[i] += s
                out.add(tuple(q))
        return out
    return {
        add(p, off)
        for off in itertools.product((-1, 0, 1), repeat=d)
        if any(off)
    }


@dataclass(frozen=True)
class BoxRegion:
    """Closed ball ``{y : |y - center| <= radius}`` in the chosen norm.

    For ``L2`` the radius is compared after squaring.
    """

    center: SitePoint
    radius: int
    norm_kind: Norm = Norm.LINF

    def __post_init__(self):
        object.__setattr__(self, "center", as_site(self.center))
        object.__setattr__(self, "norm_kind", Norm(self.norm_kind))
        if self.norm_kind is Norm.L2SQ:
            object.__setattr__(self, "norm_kind", Norm.L2)
        if int(self.radius) < 0:
            raise ValueError("radius must be nonnegative")
        object.__setattr__(self, "radius", int(self.radius))

    @property
    def dim(self) -> int:
        return len(self.center)

    def __contains__(self, p) -> bool:
        diff = tuple(int(a) - int(b) for a, b in zip(p, self.center))
        if self.norm_kind is Norm.L2:
            return norm(diff, Norm.L2SQ) <= self.radius * self.radius
        return norm(diff, self.norm_kind) <= self.radius

    def contains_box(self, other: "BoxRegion") -> bool:
        """True when every lattice point of ``other`` lies in ``self``."""
        if self.norm_kind is Norm.LINF and other.norm_kind in (Norm.LINF, Norm.L1, Norm.L2):
            off = distance(self.center, other.center, Norm.LINF)
            # the LInf extent of any of the three balls equals its radius
            return off + other.radius <= self.radius
        return all(p in self for p in enumerate_box(other))

    def __len__(self) -> int:
        return box_cardinality(self.dim, self.radius, self.norm_kind)


def enumerate_box(b: BoxRegion) -> list[SitePoint]:
    """All lattice points of ``b`` in lexicographic order, each exactly once."""
    rng = range(-b.radius, b.radius + 1)
    out = []
    for off in itertools.product(rng, repeat=b.dim):
        p = add(b.center, off)
        if b.norm_kind is Norm.LINF or p in b:
            out.append(p)
    return out


def box_array(b: BoxRegion) -> np.ndarray:
    """``enumerate_box`` as an ``(N, d)`` int64 array (same order)."""
    d, R = b.dim, b.radius
    axes = [np.arange(-R, R + 1, dtype=np.int64)] * d
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    if b.norm_kind is Norm.L1:
        grid = grid[np.abs(grid).sum(axis=1) <= R]
    elif b.norm_kind is Norm.L2:
        grid = grid[(grid * grid).sum(axis=1) <= R * R]
    return grid + np.asarray(b.center, dtype=np.int64)


def box_cardinality(d: int, radius: int, kind: Norm | str = Norm.LINF) -> int:
    """Number of lattice points in a ball of the given radius."""
    kind = Norm(kind)
    if kind is Norm.LINF:
        return (2 * radius + 1) ** d
    if kind is Norm.L1:
        # points of Z^d with |x|_1 <= R: sum_k 2^k C(d,k) C(R,k)
        from math import comb

        return sum(2**k * comb(d, k) * comb(radius, k) for k in range(d + 1))
    return int(len(box_array(BoxRegion(origin(d), radius, Norm.L2))))


def l1_sphere(center: Sequence[int], radius: int) -> list[SitePoint]:
    """Sites at L1 distance exactly ``radius`` from ``center``, sorted lexicographically."""
    c = as_site(center)
    d = len(c)
    if radius == 0:
        return [c]
    out = []

    def rec(prefix, remaining, dims_left):
        if dims_left == 1:
            for v in sorted({remaining, -remaining}):
                out.append(prefix + (v,))
            return
        for v in range(-remaining, remaining + 1):
            rec(prefix + (v,), remaining - abs(v), dims_left - 1)

    rec((), radius, d)
    return [add(c, off) for off in out]
