"""Hitting times, (restricted) first passage times and activation fronts.

Passage times are computed by running the frog dynamics in time order up to a
horizon H: every occupied relay site starts its own walk at the moment it is
first visited.  This is Dijkstra's algorithm over occupied sites with unit
time buckets, so a ``Finite`` answer is the exact restricted passage time
whenever it does not exceed H; anything longer is reported ``Censored(H)``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels as K
from .lattice import BoxRegion, Norm, SitePoint, as_site, box_array, distance
from .randomness import Configuration, WalkOracle, _REGION_CODE, _arr, _u64


class DomainError(ValueError):
    """A required box does not fit in the domain that was supplied."""


DomainTooSmall = DomainError


@functools.total_ordering
@dataclass(frozen=True)
class ExtendedTime:
    """``Finite(k)``, ``Censored(H)`` (known only to exceed H) or ``Infinite``."""

    kind: str
    value: int | None = None

    FINITE = "finite"
    CENSORED = "censored"
    INFINITE = "infinite"

    @classmethod
    def finite(cls, k: int) -> "ExtendedTime":
        if k < 0:
            raise ValueError("finite times are nonnegative")
        return cls(cls.FINITE, int(k))

    @classmethod
    def censored(cls, horizon: int) -> "ExtendedTime":
        return cls(cls.CENSORED, int(horizon))

    @classmethod
    def infinite(cls) -> "ExtendedTime":
        return cls(cls.INFINITE, None)

    @property
    def is_finite(self) -> bool:
        return self.kind == self.FINITE

    @property
    def is_censored(self) -> bool:
        return self.kind == self.CENSORED

    @property
    def is_infinite(self) -> bool:
        return self.kind == self.INFINITE

    def _key(self):
        if self.kind == self.FINITE:
            return (self.value, 0)
        if self.kind == self.CENSORED:
            return (self.value, 1)
        return (math.inf, 2)

    def __lt__(self, other):
        if isinstance(other, int):
            other = ExtendedTime.finite(other)
        if not isinstance(other, ExtendedTime):
            return NotImplemented
        return self._key() < other._key()

    def __add__(self, k: int) -> "ExtendedTime":
        if self.is_finite:
            return ExtendedTime.finite(self.value + int(k))
        return self

    def __str__(self) -> str:
        if self.is_finite:
            return str(self.value)
        if self.is_censored:
            return "CENSORED"
        return "INF"


Finite = ExtendedTime.finite
Censored = ExtendedTime.censored
INFINITE = ExtendedTime.infinite()


@dataclass
class PassageResult:
    value: ExtendedTime
    realized_path: list[SitePoint] = field(default_factory=list)
    per_leg_times: list[int] = field(default_factory=list)
    boundary_touched: bool = False


@dataclass
class ActivationFront:
    """First-visit time of every site of a domain, from a single source."""

    source: SitePoint
    domain: BoxRegion
    horizon: int
    times: dict[SitePoint, ExtendedTime]

    def __getitem__(self, z) -> ExtendedTime:
        return self.times[as_site(z)]

    def __iter__(self):
        return iter(self.times.items())


def default_horizon(x: Sequence[int], y: Sequence[int], r: float, d: int) -> int:
    """50 * |x - y|_1^2 * delta_d(r)^2, floored at a small absolute minimum."""
    from .estimator import delta

    l1 = distance(x, y, Norm.L1)
    return max(int(math.ceil(50 * l1 * l1 * delta(d, r) ** 2)), 1000)


def tau(o: WalkOracle, c: Configuration, u: Sequence[int], v: Sequence[int], horizon: int) -> ExtendedTime:
    """Hitting time of v by the frog of u, ``Infinite`` when u is vacant."""
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    if not c.is_occupied(u):
        return INFINITE
    k = K.first_hit(_u64(o.seed), _arr(u), _arr(v), int(horizon))
    return Finite(int(k)) if k >= 0 else Censored(horizon)


@dataclass
class _Run:
    times: np.ndarray
    f_site: np.ndarray
    f_act: np.ndarray
    f_parent: np.ndarray
    f_leg: np.ndarray
    hit_time: np.ndarray
    hit_frog: np.ndarray
    t_end: int
    exited: bool
    box_center: np.ndarray
    box_radius: int

    def chain_to(self, frog: int) -> list[int]:
        chain = []
        while frog >= 0:
            chain.append(frog)
            frog = int(self.f_parent[frog])
        return chain[::-1]


def _simulate(
    o: WalkOracle,
    c: Configuration,
    source: SitePoint,
    relay: BoxRegion | np.ndarray,
    box_center: Sequence[int],
    box_radius: int,
    horizon: int,
    targets: np.ndarray | None = None,
    groups: np.ndarray | None = None,
    stop_on_groups: bool = False,
    front_count: int = -1,
) -> tuple[_Run, np.ndarray]:
    """Run the compiled frog dynamics.  Returns the run and the target order used."""
    d = c.dimension
    bc = _arr(box_center)
    if isinstance(relay, BoxRegion):
        rkind = _REGION_CODE[relay.norm_kind]
        rcenter, rradius = _arr(relay.center), int(relay.radius)
        rmask = np.zeros(1, dtype=np.uint8)
    else:
        rkind, rcenter, rradius = K.REGION_MASK, np.zeros(d, dtype=np.int64), 0
        rmask = np.ascontiguousarray(relay, dtype=np.uint8)
    if targets is None or len(targets) == 0:
        tidx = np.zeros(0, dtype=np.int64)
        tgrp = np.zeros(0, dtype=np.int64)
        n_groups = 0
        order = np.zeros(0, dtype=np.int64)
    else:
        targets = np.asarray(targets, dtype=np.int64).reshape(-1, d)
        raw = np.array([K.flat_index(t, bc, int(box_radius)) for t in targets], dtype=np.int64)
        if (raw < 0).any():
            raise DomainError("target outside the simulation box")
        if groups is None:
            groups = np.arange(len(targets), dtype=np.int64)
        groups = np.asarray(groups, dtype=np.int64)
        order = np.argsort(raw, kind="stable")
        tidx = raw[order]
        if np.any(np.diff(tidx) == 0):
            raise ValueError("duplicate targets")
        tgrp = groups[order]
        n_groups = int(groups.max()) + 1
    occ = c.kernel_args()
    out = K.simulate_front(
        _u64(o.seed),
        occ[0],
        occ[1],
        occ[2],
        occ[3],
        occ[4],
        occ[5],
        occ[6],
        rkind,
        rcenter,
        rradius,
        rmask,
        bc,
        int(box_radius),
        _arr(source),
        int(horizon),
        tidx,
        tgrp,
        n_groups,
        bool(stop_on_groups),
        int(front_count),
    )
    run = _Run(*out[:7], int(out[7]), bool(out[8]), bc, int(box_radius))
    # hit arrays come back in sorted-target order; map them back to input order
    if len(order):
        inv = np.empty_like(order)
        inv[order] = np.arange(len(order))
        run.hit_time = run.hit_time[inv]
        run.hit_frog = run.hit_frog[inv]
    return run, order


def _realized(run: _Run, target_slot: int, target: SitePoint) -> tuple[list[SitePoint], list[int]]:
    frog = int(run.hit_frog[target_slot])
    chain = run.chain_to(frog)
    path = [as_site(run.f_site[f]) for f in chain] + [target]
    legs = [int(run.f_leg[f]) for f in chain[1:]]
    legs.append(int(run.hit_time[target_slot]) - int(run.f_act[frog]))
    return path, legs


def _check_relay_domain(c: Configuration, A: BoxRegion):
    if A.dim != c.dimension:
        raise ValueError("domain dimension mismatch")


def passage_time(
    o: WalkOracle,
    c: Configuration,
    x: Sequence[int],
    y: Sequence[int],
    domain: BoxRegion,
    horizon: int,
) -> PassageResult:
    """Restricted first passage time T_A(x, y) with relays confined to ``domain``."""
    x, y = as_site(x), as_site(y)
    _check_relay_domain(c, domain)
    if x not in domain:
        raise DomainError(f"source {x} is not in the domain")
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    if not c.is_occupied(x):
        return PassageResult(INFINITE)
    if x == y:
        return PassageResult(Finite(0), [x, x], [0])
    radius = max(domain.radius, distance(domain.center, y, Norm.LINF))
    run, _ = _simulate(
        o, c, x, domain, domain.center, radius, horizon,
        targets=np.asarray([y]), stop_on_groups=True,
    )
    if run.hit_time[0] < 0:
        return PassageResult(Censored(horizon), boundary_touched=run.exited)
    path, legs = _realized(run, 0, y)
    return PassageResult(Finite(int(run.hit_time[0])), path, legs, run.exited)


def passage_times_many(
    o: WalkOracle,
    c: Configuration,
    x: Sequence[int],
    targets: Sequence[Sequence[int]],
    relay: BoxRegion | np.ndarray,
    horizon: int,
    box: BoxRegion | None = None,
    groups: Sequence[int] | None = None,
    first_per_group: bool = False,
) -> list[ExtendedTime]:
    """T_A(x, y) for several targets from one dynamics run.

    ``relay`` is a domain or a uint8 mask over ``box`` (required for masks).
    With ``first_per_group`` the run stops once every group has been reached,
    so only the earliest target of each group is guaranteed to be exact.
    """
    x = as_site(x)
    if isinstance(relay, BoxRegion):
        if box is None:
            box = BoxRegion(relay.center, relay.radius)
        if x not in relay:
            raise DomainError(f"source {x} is not in the domain")
    elif box is None:
        raise ValueError("a mask relay region needs its box")
    if not c.is_occupied(x):
        return [INFINITE] * len(targets)
    if len(targets) == 0:
        return []
    tg = np.asarray(targets, dtype=np.int64).reshape(-1, c.dimension)
    uniq, inverse = np.unique(tg, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    if groups is None:
        ugroups = None
        stop = True
    else:
        g = np.asarray(groups, dtype=np.int64)
        ugroups = np.empty(len(uniq), dtype=np.int64)
        ugroups[inverse] = g
        stop = first_per_group
    if ugroups is None:
        ugroups = np.arange(len(uniq), dtype=np.int64)
    run, _ = _simulate(o, c, x, relay, box.center, box.radius, horizon,
                       targets=uniq, groups=ugroups, stop_on_groups=stop)
    out = []
    for j in inverse:
        h = int(run.hit_time[j])
        out.append(Finite(h) if h >= 0 else Censored(horizon))
    return out


def activation_front(
    o: WalkOracle,
    c: Configuration,
    source: Sequence[int],
    domain: BoxRegion,
    horizon: int,
) -> ActivationFront:
    """T_A(source, z) for every z of the domain at once."""
    source = as_site(source)
    _check_relay_domain(c, domain)
    if source not in domain:
        raise DomainError(f"source {source} is not in the domain")
    pts = box_array(domain)
    if not c.is_occupied(source):
        times = {tuple(p): INFINITE for p in pts.tolist()}
        return ActivationFront(source, domain, horizon, times)
    run, _ = _simulate(o, c, source, domain, domain.center, domain.radius, horizon,
                       front_count=len(pts))
    bc, br = run.box_center, run.box_radius
    idx = np.array([K.flat_index(p, bc, br) for p in pts], dtype=np.int64)
    raw = run.times[idx]
    times = {}
    for p, v in zip(pts.tolist(), raw.tolist()):
        times[tuple(p)] = Finite(v - 1) if v > 0 else Censored(horizon)
    return ActivationFront(source, domain, horizon, times)


def visited_region(front: ActivationFront, t: int) -> set[SitePoint]:
    """Sites with a finite first-visit time of at most t."""
    return {z for z, v in front.times.items() if v.is_finite and v.value <= t}
