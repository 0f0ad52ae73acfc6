"""Chains of active frogs built from an index sequence I = (I_1, ..., I_nu).

Leg l follows the walk of its anchor a(l) until it has stepped on I_l occupied
sites that are fresh, meaning not in the range of any earlier leg nor earlier
in its own range.  The last of them becomes the next anchor.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .dynamics import Censored, ExtendedTime, Finite, PassageResult, passage_time
from .estimator import delta
from .lattice import BoxRegion, Norm, SitePoint, as_site, origin
from .randomness import Configuration, MasterSeed, WalkOracle


@dataclass(frozen=True)
class ChainSpec:
    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if not idx:
            raise ValueError("a chain needs at least one leg")
        if min(idx) < 1:
            raise ValueError("chain indices must be positive")
        object.__setattr__(self, "indices", idx)

    @property
    def nu(self) -> int:
        return len(self.indices)

    @property
    def total(self) -> int:
        return sum(self.indices)


@dataclass
class ChainTrace:
    spec: ChainSpec
    anchors: list[SitePoint]
    leg_times: list[list[ExtendedTime]]
    visited_occupied: list[list[SitePoint]]
    max_range: int = 0
    censored: bool = False

    @property
    def leg_totals(self) -> list[ExtendedTime]:
        return [legs[-1] for legs in self.leg_times]

    @property
    def total_time(self) -> ExtendedTime:
        if self.censored:
            return next(t for t in self.leg_totals if not t.is_finite)
        return Finite(sum(t.value for t in self.leg_totals))


class _LegWalker:
    """Replays one walk in growing chunks and yields (k, site) for occupied steps."""

    def __init__(self, o: WalkOracle, c: Configuration, start: SitePoint, horizon: int):
        self.o, self.c, self.start, self.horizon = o, c, start, horizon

    def occupied_steps(self):
        done = 0
        chunk = 256
        while done < self.horizon:
            upto = min(self.horizon, done + chunk)
            path = self.o.path(self.start, upto)
            seg = path[done + 1 : upto + 1]
            mask = self.c.occupied_mask(seg)
            for j in np.flatnonzero(mask):
                yield done + 1 + int(j), tuple(int(v) for v in seg[j])
            done = upto
            chunk *= 2

    def max_l1(self, upto: int) -> int:
        path = self.o.path(self.start, upto)
        return int(np.abs(path).sum(axis=1).max())


def build_chain(o: WalkOracle, c: Configuration, spec: ChainSpec, horizon: int) -> ChainTrace:
    """sigma_I(l, i) for every leg, with Censored(H) once a leg needs more than H steps."""
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    d = o.dimension
    anchor = origin(d)
    used: set[SitePoint] = set()
    anchors, legs, fresh_lists = [], [], []
    max_range = 0
    for need in spec.indices:
        anchors.append(anchor)
        used.add(anchor)
        times = [Finite(0)]
        fresh = []
        walker = _LegWalker(o, c, anchor, horizon)
        for k, site in walker.occupied_steps():
            if site in used:
                continue
            used.add(site)
            fresh.append(site)
            times.append(Finite(k))
            if len(fresh) == need:
                break
        if len(fresh) < need:
            times.extend([Censored(horizon)] * (need - len(fresh)))
            legs.append(times)
            fresh_lists.append(fresh)
            return ChainTrace(spec, anchors, legs, fresh_lists, max_range, censored=True)
        max_range = max(max_range, walker.max_l1(times[-1].value))
        legs.append(times)
        fresh_lists.append(fresh)
        anchor = fresh[-1]
    return ChainTrace(spec, anchors, legs, fresh_lists, max_range)


def extract_minimizing_chain(p: PassageResult, o: WalkOracle, c: Configuration) -> tuple[ChainSpec, ChainTrace]:
    """Index sequence I behind a realized passage time, with its replayed trace.

    I_l counts the fresh occupied sites the l-th walk of the realized path steps
    on, up to and including its arrival at the next path site.
    """
    if not p.value.is_finite:
        raise ValueError("a minimizing chain exists only for finite passage times")
    path = [as_site(s) for s in p.realized_path]
    if len(path) < 2 or path[0] == path[-1]:
        raise ValueError("source and target must differ")
    if any(path[0]):
        raise ValueError("chains start at the origin")
    used: set[SitePoint] = set()
    counts = []
    for u, v, leg in zip(path, path[1:], p.per_leg_times):
        used.add(u)
        count = 0
        arrived = False
        for k, site in _LegWalker(o, c, u, leg).occupied_steps():
            if site in used:
                continue
            used.add(site)
            count += 1
            if k == leg:
                arrived = site == v
        if not arrived:
            raise ValueError(f"leg {u} -> {v} does not end on a fresh occupied site")
        counts.append(count)
    spec = ChainSpec(tuple(counts))
    horizon = max(p.per_leg_times)
    return spec, build_chain(o, c, spec, horizon)


@dataclass
class ChainRow:
    seed: int
    d: int
    r: float
    nu: int
    sum_I: int
    sum_sigma: int | None
    max_range: int | None
    censored: bool


@dataclass
class ChainStats:
    rows: list[ChainRow]
    censor_rate: float
    duration_freq: float
    range_freq: float
    tail_freq: float | None
    params: dict = field(default_factory=dict)


CHAIN_COLUMNS = ("seed", "d", "r", "nu", "sum_I", "sum_sigma", "max_range", "censored")


def _chain_env(master: MasterSeed, d: int, r: float, spec: ChainSpec, trial: int):
    sub = master.child("chain", *spec.indices, trial)
    c = Configuration(sub.child("occ"), d, r, None, force_origin=True)
    o = WalkOracle(sub.child("walk"), d)
    return sub.seed, o, c


def chain_statistics(
    specs: Iterable[Sequence[int] | ChainSpec],
    d: int,
    r: float,
    trials: int,
    horizon: int,
    master: MasterSeed | int | None = None,
    c_duration: float = 1.0,
    c_range: float = 1.0,
    t_range: float = 1.0,
    t_tail: float | None = None,
) -> ChainStats:
    """Run every spec ``trials`` times and tabulate the chain duration and range.

    ``duration_freq`` is the frequency of sum sigma <= c_duration * delta^2 * sum I;
    ``range_freq`` that of {max range >= c_range * delta * t, sum sigma <= delta^2 * t}
    at t = t_range.  ``tail_freq`` is P(sum sigma >= t_tail) when t_tail is given.
    Censored traces count toward the censor rate and are left out of the frequencies.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    if master is None:
        master = MasterSeed.from_env()
    elif isinstance(master, int):
        master = MasterSeed(master)
    dl = delta(d, r)
    rows = []
    for raw in specs:
        spec = raw if isinstance(raw, ChainSpec) else ChainSpec(tuple(raw))
        for i in range(trials):
            seed, o, c = _chain_env(master, d, r, spec, i)
            tr = build_chain(o, c, spec, horizon)
            if tr.censored:
                rows.append(ChainRow(seed, d, r, spec.nu, spec.total, None, None, True))
            else:
                rows.append(ChainRow(seed, d, r, spec.nu, spec.total, tr.total_time.value, tr.max_range, False))
    ok = [row for row in rows if not row.censored]
    m = max(len(ok), 1)
    dur = sum(row.sum_sigma <= c_duration * dl * dl * row.sum_I for row in ok) / m
    rng = sum(row.max_range >= c_range * dl * t_range and row.sum_sigma <= dl * dl * t_range for row in ok) / m
    tail = None if t_tail is None else sum(row.sum_sigma >= t_tail for row in ok) / m
    return ChainStats(rows, 1 - len(ok) / len(rows) if rows else 0.0, dur, rng, tail,
                      dict(d=d, r=r, trials=trials, horizon=horizon, seed=master.seed))


def single_term_crosscheck(
    spec: Sequence[int] | ChainSpec,
    d: int,
    r: float,
    trials: int,
    horizon: int,
    master: MasterSeed | int | None = None,
):
    """Two-sample KS test of sum sigma under I against the single-term chain (sum I).

    The two laws coincide, so a small p-value flags a bug, not a theorem.
    """
    spec = spec if isinstance(spec, ChainSpec) else ChainSpec(tuple(spec))
    single = ChainSpec((spec.total,))
    a = chain_statistics([spec], d, r, trials, horizon, master)
    b = chain_statistics([single], d, r, trials, horizon, master)
    xa = [row.sum_sigma for row in a.rows if not row.censored]
    xb = [row.sum_sigma for row in b.rows if not row.censored]
    return stats.ks_2samp(xa, xb)


@dataclass
class RealizationCheck:
    trial: int
    target: SitePoint
    value: ExtendedTime
    sum_sigma: int | None
    nu: int | None

    @property
    def exact(self) -> bool | None:
        if not self.value.is_finite:
            return None
        return self.sum_sigma == self.value.value


REALIZATION_COLUMNS = ("trial", "target", "T", "sum_sigma", "nu", "exact")


def realization_checks(
    d: int,
    r: float,
    trials: int,
    box_radius: int,
    max_l1: int,
    horizon: int,
    master: MasterSeed | int | None = None,
) -> list[RealizationCheck]:
    """Compare T_A(0, y) with the chain total rebuilt from its extracted index sequence.

    Each trial draws a fresh configuration in B_inf(0, box_radius) with the
    origin occupied and picks an occupied target with 0 < |y|_1 <= max_l1.
    """
    if master is None:
        master = MasterSeed.from_env()
    elif isinstance(master, int):
        master = MasterSeed(master)
    A = BoxRegion(origin(d), box_radius)
    ball = BoxRegion(origin(d), max_l1, Norm.L1)
    out = []
    for i in range(trials):
        sub = master.child("realize", d, repr(r), i)
        c = Configuration(sub.child("occ"), d, r, A, force_origin=True)
        o = WalkOracle(sub.child("walk"), d)
        cands = [tuple(p) for p in c.occupied_in(ball).tolist() if any(p)]
        if not cands:
            continue
        pick = np.random.default_rng(sub.child("pick").seed).integers(len(cands))
        y = cands[int(pick)]
        p = passage_time(o, c, origin(d), y, A, horizon)
        if not p.value.is_finite:
            out.append(RealizationCheck(i, y, p.value, None, None))
            continue
        spec, trace = extract_minimizing_chain(p, o, c)
        total = None if trace.censored else trace.total_time.value
        out.append(RealizationCheck(i, y, p.value, total, spec.nu))
    return out
