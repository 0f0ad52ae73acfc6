"""Seed-keyed Bernoulli configurations and per-site simple random walks.

An experiment is a pure function of a 64-bit master seed: the occupancy of a
site and the k-th step of the walk started there are both hashes of
``(seed, site, k)``.  Nothing is drawn from a stateful stream, so regions can
be grown lazily and trials can run in any order.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _kernels as K
from .lattice import BoxRegion, Norm, SitePoint, as_site, box_array, distance, l1_sphere, origin

SEED_ENV = "FROGSIM_SEED"
DEFAULT_SEED = 20240601
_MASK64 = (1 << 64) - 1

_REGION_CODE = {Norm.L1: K.REGION_L1, Norm.L2: K.REGION_L2, Norm.LINF: K.REGION_LINF}


def _u64(x: int) -> np.uint64:
    return np.uint64(int(x) & _MASK64)


def seed_from_env(default: int = DEFAULT_SEED) -> int:
    """Master seed from ``FROGSIM_SEED`` (decimal), else ``default``."""
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw.strip() == "":
        return int(default)
    value = int(raw.strip(), 10)
    if not 0 <= value <= _MASK64:
        raise ValueError(f"{SEED_ENV} must be a 64-bit unsigned integer")
    return value


def derive_seed(seed: int, *labels: int | str) -> int:
    """Child seed for an independent keyed substream (trial index, tag, ...)."""
    h = int(K.mix64(_u64(seed) ^ _u64(0x632BE59BD9B4E019)))
    for lab in labels:
        if isinstance(lab, str):
            v = 0
            for ch in lab.encode():
                v = (v * 131 + ch) & _MASK64
        else:
            v = int(lab) & _MASK64
        h = int(K.mix64(_u64(h ^ int(K.mix64(_u64(v + 0x9E3779B97F4A7C15))))))
    return h


def _arr(p: Sequence[int]) -> np.ndarray:
    return np.asarray(p, dtype=np.int64)


@dataclass(frozen=True)
class MasterSeed:
    seed: int
    run_label: str = ""

    def __post_init__(self):
        if not 0 <= int(self.seed) <= _MASK64:
            raise ValueError("seed must fit in 64 unsigned bits")
        object.__setattr__(self, "seed", int(self.seed))

    @classmethod
    def from_env(cls, run_label: str = "") -> "MasterSeed":
        return cls(seed_from_env(), run_label)

    def child(self, *labels) -> "MasterSeed":
        return MasterSeed(derive_seed(self.seed, *labels), self.run_label)


@dataclass(frozen=True)
class WalkOracle:
    """Lazy access to the walk family ``S^x`` for a fixed seed and dimension."""

    master: MasterSeed
    dimension: int

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be positive")

    @property
    def seed(self) -> int:
        return self.master.seed

    def position(self, x: Sequence[int], k: int) -> SitePoint:
        return walk_position(self, x, k)

    def path(self, x: Sequence[int], n: int) -> np.ndarray:
        """``(n+1, d)`` array of S^x_0..S^x_n."""
        if n < 0:
            raise ValueError("n must be nonnegative")
        return K.walk_path(_u64(self.seed), _arr(x), int(n))

    def directions(self, x: Sequence[int], k0: int, k1: int) -> np.ndarray:
        return K.walk_directions(_u64(self.seed), _arr(x), int(k0), int(k1))


def walk_position(o: WalkOracle, x: Sequence[int], k: int) -> SitePoint:
    """S^x_k.  Step j is one of the 2d unit moves keyed on (seed, x, j)."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    if len(x) != o.dimension:
        raise ValueError("site dimension mismatch")
    return as_site(K.walk_position(_u64(o.seed), _arr(x), int(k)))


def range_set(o: WalkOracle, starts: Iterable[Sequence[int]], n: int) -> set[SitePoint]:
    """Union over starts of {S^x_k : 0 <= k <= n}."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    out: set[SitePoint] = set()
    for x in starts:
        path = o.path(x, n)
        out.update(map(tuple, np.unique(path, axis=0).tolist()))
    return out


def range_in_box(o: WalkOracle, starts: Sequence[Sequence[int]], n: int, box: BoxRegion) -> np.ndarray:
    """Sites of ``box`` (LInf) visited by walks from ``starts`` by time n, lexicographic ``(M, d)``."""
    if box.norm_kind is not Norm.LINF:
        raise ValueError("range_in_box needs an LInf box")
    starts = np.asarray(list(starts), dtype=np.int64).reshape(-1, o.dimension)
    c = _arr(box.center)
    idx = K.range_in_box(_u64(o.seed), starts, int(n), c, int(box.radius))
    return _unflatten_many(idx, c, box.radius)


def _unflatten_many(idx: np.ndarray, center: np.ndarray, radius: int) -> np.ndarray:
    d = center.shape[0]
    side = 2 * radius + 1
    out = np.empty((idx.shape[0], d), dtype=np.int64)
    rem = idx.copy()
    for i in range(d - 1, -1, -1):
        out[:, i] = rem % side - radius + center[i]
        rem //= side
    return out


@dataclass(frozen=True)
class Configuration:
    """Bernoulli(r) occupancy restricted to ``domain`` (``None`` means all of Z^d).

    ``force_origin`` realises the conditioning on the origin being occupied.
    Occupancy of a site depends only on (seed, site, r), so enlarging the domain
    never changes occupancy inside the smaller one.
    """

    master: MasterSeed
    dimension: int
    density: float
    domain: BoxRegion | None = None
    force_origin: bool = False
    _thresh: int = field(init=False, repr=False, compare=False, default=0)

    def __post_init__(self):
        r = float(self.density)
        if not 0.0 < r <= 1.0:
            raise ValueError(f"density must lie in (0, 1], got {self.density!r}")
        object.__setattr__(self, "density", r)
        if self.domain is not None and self.domain.dim != self.dimension:
            raise ValueError("domain dimension mismatch")
        thresh = 0 if r >= 1.0 else min(int(r * 2.0**64), _MASK64)
        object.__setattr__(self, "_thresh", thresh)

    @property
    def seed(self) -> int:
        return self.master.seed

    @property
    def full(self) -> bool:
        return self.density >= 1.0

    def kernel_args(self):
        """Positional occupancy arguments shared by the compiled kernels."""
        d = self.dimension
        if self.domain is None:
            kind, center, radius = K.REGION_ALL, np.zeros(d, dtype=np.int64), 0
        else:
            kind = _REGION_CODE[self.domain.norm_kind]
            center, radius = _arr(self.domain.center), int(self.domain.radius)
        return (_u64(self.seed), _u64(self._thresh), self.full, bool(self.force_origin), kind, center, radius)

    def is_occupied(self, x: Sequence[int]) -> bool:
        seed, thresh, full, force, kind, center, radius = self.kernel_args()
        return bool(K.is_occupied(seed, _arr(x), thresh, full, force, kind, center, radius))

    def occupied_mask(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.int64).reshape(-1, self.dimension)
        seed, thresh, full, force, kind, center, radius = self.kernel_args()
        return K.occupancy_many(seed, pts, thresh, full, force, kind, center, radius)

    def occupied_in(self, region: BoxRegion) -> np.ndarray:
        """Occupied sites of ``region`` as a lexicographically ordered ``(M, d)`` array."""
        pts = box_array(region)
        return pts[self.occupied_mask(pts)]

    @property
    def occupied(self) -> set[SitePoint]:
        if self.domain is None:
            raise ValueError("occupied set of an unbounded configuration is infinite")
        return set(map(tuple, self.occupied_in(self.domain).tolist()))

    def with_domain(self, domain: BoxRegion | None) -> "Configuration":
        return Configuration(self.master, self.dimension, self.density, domain, self.force_origin)


def sample_configuration(
    m: MasterSeed,
    domain: BoxRegion | None,
    r: float,
    force_origin: bool = False,
    dimension: int | None = None,
) -> Configuration:
    if dimension is None:
        if domain is None:
            raise ValueError("dimension is required for an unbounded domain")
        dimension = domain.dim
    return Configuration(m, int(dimension), r, domain, bool(force_origin))


def closest_occupied(c: Configuration, target: Sequence[int], max_radius: int | None = None) -> SitePoint | None:
    """L1-nearest occupied site, ties broken lexicographically; ``None`` if there is none."""
    target = as_site(target)
    d = c.dimension
    if max_radius is None:
        if c.domain is None:
            raise ValueError("max_radius is required for an unbounded configuration")
        # every site of the domain lies within this L1 distance of target
        max_radius = distance(target, c.domain.center, Norm.L1) + d * c.domain.radius
        if c.force_origin:
            max_radius = max(max_radius, distance(target, origin(d), Norm.L1))
    for rad in range(0, int(max_radius) + 1):
        shell = l1_sphere(target, rad)
        mask = c.occupied_mask(np.asarray(shell, dtype=np.int64))
        if mask.any():
            return shell[int(np.argmax(mask))]
    return None
