"""Block constructions for the upper bound: r-good sites, sowing and activating
events, the box-to-box recursion, and the good-site graph distance.

Real radii are floored before they meet the lattice.  ``RenormParams.override``
replaces the r-dependent sizes by small integers so the event logic can be
exercised on desk-sized boxes.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import stats

from ._parallel import map_ordered
from .dynamics import DomainError, _simulate
from .estimator import delta
from .lattice import BoxRegion, SitePoint, as_site, box_array, neighbors, origin, scale
from .randomness import Configuration, MasterSeed, WalkOracle, range_in_box

MIN_PHYSICAL_R = 0.05


class MaxIndexReached(Exception):
    pass


@dataclass(frozen=True)
class RenormParams:
    """Every size and budget used by the block events.

    ``physical`` derives them from (d, r, c_ckn); ``override`` starts from a
    small template and lets any field be set directly.
    """

    d: int
    r: float
    c_ckn: float
    override: bool
    R: int
    good_radius: int
    good_budget: float
    theta_step: int
    theta_in: int
    theta: int
    theta_out: int
    n_r: int
    sow_budget: float
    lambda_radius: int
    v_radius: int
    act_budget: float
    w_budget: float
    hit_budget: float
    w_min: float
    q_half: int
    q_step: int
    nu: int
    gamma_threshold: float
    epsilon: float
    rho: float
    delta_rec: float
    psi: float

    @classmethod
    def physical(cls, d: int, r: float, c_ckn: float = 0.5) -> "RenormParams":
        if not 0 < c_ckn < 1:
            raise ValueError("c_ckn must lie in (0, 1)")
        dl = delta(d, r)
        eps = 1.0 / (12 * d)
        rho = 410.0 * d * d / c_ckn
        psi = 2.0 * d * dl * dl / c_ckn
        s = r ** -(0.5 + eps)
        R = math.ceil(r ** (-d / 2))
        big = r ** (-(d + 1) / 2)
        q_half = math.ceil(math.sqrt(psi))
        return cls(
            d=d, r=r, c_ckn=c_ckn, override=False,
            R=R,
            good_radius=math.floor(s),
            good_budget=rho * r ** (-d / 2) * dl,
            theta_step=7 * math.ceil(s),
            theta_in=math.floor(s),
            theta=math.floor(2 * s),
            theta_out=math.floor(3 * s),
            n_r=121 * d * math.ceil(r ** -(1 + 2 * eps)),
            sow_budget=r ** -(1 + 3 * eps),
            lambda_radius=math.floor(r ** (-(d + 1) / 4)),
            v_radius=math.floor(r ** (-(d - 1) / 4 + 2 * eps)),
            act_budget=5 * d * big,
            w_budget=2 * big,
            hit_budget=4 * d * big,
            w_min=r ** (-d * ((d - 1) / 4 - 2 * eps)),
            q_half=q_half,
            q_step=3 * q_half,
            nu=100 * d * math.ceil(psi),
            gamma_threshold=2 * d / c_ckn * abs(math.log(r)),
            epsilon=eps,
            rho=rho,
            delta_rec=(50 * d) ** (-d / 2),
            psi=psi,
        )

    @classmethod
    def override_mode(cls, d: int, r: float, c_ckn: float = 0.5, scale_: int = 2, **fields) -> "RenormParams":
        """Small integer boxes built around a mesoscopic unit ``scale_``."""
        base = cls.physical(d, r, c_ckn)
        s = int(scale_)
        tmpl = dict(
            override=True,
            R=3 * s + 1,
            good_radius=s,
            good_budget=60.0 * s * s,
            theta_step=7 * s,
            theta_in=s,
            theta=2 * s,
            theta_out=3 * s,
            n_r=12 * s * s,
            sow_budget=24.0 * s * s,
            lambda_radius=7 * s + 3 * s,
            v_radius=1,
            act_budget=5.0 * d * 16 * s * s,
            w_budget=2.0 * 16 * s * s,
            hit_budget=4.0 * d * 16 * s * s,
            w_min=1.0,
            q_half=s,
            q_step=3 * s,
            nu=12 * s * s,
        )
        tmpl.update(fields)
        return replace(base, **tmpl)

    @classmethod
    def compact(cls, d: int, r: float, c_ckn: float = 0.5, **fields) -> "RenormParams":
        """Override geometry with neighbouring blocks three sites apart and long walks.

        Small enough that the sub-event premises of the sowing and activating
        events hold on a fair share of seeds, so the implication audits bite.
        """
        n = 800
        tmpl = dict(theta_step=3, lambda_radius=6, n_r=n, sow_budget=2.0 * n,
                    w_budget=2.0 * n, hit_budget=4.0 * n, act_budget=6.0 * n)
        tmpl.update(fields)
        return cls.override_mode(d, r, c_ckn, scale_=1, **tmpl)

    def as_record(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------- helpers


def _require(c: Configuration, box: BoxRegion):
    if c.domain is not None and not c.domain.contains_box(box):
        raise DomainError(f"configuration domain does not cover {box}")


def _occupied(c: Configuration, box: BoxRegion) -> list[SitePoint]:
    return [tuple(p) for p in c.occupied_in(box).tolist()]


def _fi(budget: float) -> int:
    """Largest integer time within a real budget."""
    return int(math.floor(budget + 1e-9))


def _reach(o, c, x, relay, box, horizon, target_sets: Sequence[Sequence[SitePoint]]):
    """Earliest T_relay(x, .) over each target set, as (time, site), or ``None``
    when no member is reached by ``horizon``."""
    out: list[tuple[int, SitePoint] | None] = [None] * len(target_sets)
    sites = sorted({t for ts in target_sets for t in ts})
    if not sites:
        return out
    owner: dict[SitePoint, int] = {}
    overlap = False
    for g, ts in enumerate(target_sets):
        for t in ts:
            overlap |= owner.setdefault(t, g) != g
    # disjoint sets can stop at the first hit of every set; otherwise wait for all sites
    groups = np.asarray([owner[t] for t in sites]) if not overlap else None
    run, _ = _simulate(o, c, x, relay, box.center, box.radius, horizon,
                       targets=np.asarray(sites), groups=groups, stop_on_groups=True)
    hit = {t: int(h) for t, h in zip(sites, run.hit_time.tolist()) if h >= 0}
    for g, ts in enumerate(target_sets):
        cands = [(hit[t], t) for t in ts if t in hit]
        if cands:
            out[g] = min(cands)
    return out


# ---------------------------------------------------------------- r-good sites


@dataclass
class GoodReport:
    good: bool
    reason: str
    certificates: list[tuple[SitePoint, SitePoint, SitePoint, int]] = field(default_factory=list)
    failure: tuple[SitePoint, SitePoint] | None = None


def good_boxes(v: Sequence[int], p: RenormParams):
    v = as_site(v)
    center = scale(v, p.R)
    home = BoxRegion(center, p.good_radius)
    A = BoxRegion(center, 2 * p.R)
    nbrs = sorted(neighbors(v))
    return home, A, [(u, BoxRegion(scale(u, p.R), p.good_radius)) for u in nbrs]


def is_r_good(o: WalkOracle, c: Configuration, v: Sequence[int], p: RenormParams) -> GoodReport:
    """Both conditions of an r-good site, with the certificates that decided it."""
    home, A, nbrs = good_boxes(v, p)
    _require(c, A)
    xs = _occupied(c, home)
    if not xs:
        return GoodReport(False, "empty central box")
    H = _fi(p.good_budget)
    certs = []
    sets = [_occupied(c, b) for _, b in nbrs]
    for x in xs:
        hits = _reach(o, c, x, A, A, H, sets)
        for (u, _), h in zip(nbrs, hits):
            if h is None:
                return GoodReport(False, "neighbour box not reached within budget", certs, (x, u))
            certs.append((x, u, h[1], h[0]))
    return GoodReport(True, "ok", certs)


def is_r_good_bruteforce(o: WalkOracle, c: Configuration, v: Sequence[int], p: RenormParams) -> bool:
    """Independent check: pairwise hitting times by walk replay, then shortest chains.

    Every occupied site of the domain box gets its walk replayed up to the
    budget; tau(u, w) is read off the first-visit index, and chain minima come
    from a textbook Dijkstra over that complete graph.
    """
    home, A, nbrs = good_boxes(v, p)
    _require(c, A)
    H = _fi(p.good_budget)
    occ = _occupied(c, A)
    xs = [x for x in occ if x in home]
    if not xs:
        return False
    index = {s: i for i, s in enumerate(occ)}
    first: list[dict[SitePoint, int]] = []
    for s in occ:
        path = o.path(s, H)
        seen: dict[SitePoint, int] = {}
        for k, q in enumerate(map(tuple, path.tolist())):
            if q not in seen:
                seen[q] = k
        first.append(seen)
    for x in xs:
        dist = {x: 0}
        pq = [(0, x)]
        done = set()
        while pq:
            dv, u = heapq.heappop(pq)
            if u in done:
                continue
            done.add(u)
            for w, k in first[index[u]].items():
                if w not in index:
                    continue
                nd = dv + k
                if nd <= H and nd < dist.get(w, H + 1):
                    dist[w] = nd
                    heapq.heappush(pq, (nd, w))
        for _, b in nbrs:
            if not any(dist.get(y, H + 1) <= H for y in _occupied(c, b)):
                return False
    return True


def good_distance(goodmap: Mapping[SitePoint, bool], u: Sequence[int], v: Sequence[int]) -> float:
    """Length of the shortest nearest-neighbour path through good sites (inf if none)."""
    u, v = as_site(u), as_site(v)
    if not goodmap.get(u, False) or not goodmap.get(v, False):
        return math.inf
    dist = {u: 0}
    q = deque([u])
    while q:
        a = q.popleft()
        if a == v:
            return dist[a]
        for b in neighbors(a):
            if b not in dist and goodmap.get(b, False):
                dist[b] = dist[a] + 1
                q.append(b)
    return math.inf


# ---------------------------------------------------------------- sowing


@dataclass(frozen=True)
class ThetaBoxes:
    center: SitePoint
    theta_in: BoxRegion
    theta: BoxRegion
    outer: BoxRegion  # Theta_out is outer minus theta

    def in_out(self, z) -> bool:
        return z in self.outer and z not in self.theta

    def out_sites(self) -> list[SitePoint]:
        return [tuple(q) for q in box_array(self.outer).tolist() if tuple(q) not in self.theta]


def theta_boxes(v: Sequence[int], p: RenormParams) -> ThetaBoxes:
    ctr = scale(v, p.theta_step)
    return ThetaBoxes(ctr, BoxRegion(ctr, p.theta_in), BoxRegion(ctr, p.theta), BoxRegion(ctr, p.theta_out))


def star_neighbors(v: Sequence[int]) -> list[SitePoint]:
    return sorted(neighbors(v, star=True))


@dataclass
class SowingReport:
    event: bool
    s1: bool
    s2: bool
    s3: bool
    premise: bool
    counterexample: bool
    g_sizes: dict[SitePoint, int] = field(default_factory=dict)


def sowing_event(o: WalkOracle, c: Configuration, v: Sequence[int], p: RenormParams,
                 with_subevents: bool = True) -> SowingReport:
    """S_r(v) exactly, plus the three sub-events around v and the implication audit."""
    v = as_site(v)
    tb = theta_boxes(v, p)
    nb = [theta_boxes(u, p) for u in star_neighbors(v)]
    reach = p.theta_step + max(p.theta_in, p.theta_out)
    box = BoxRegion(tb.center, reach)
    _require(c, box)
    xs = _occupied(c, tb.theta_in)
    H = _fi(p.sow_budget)
    event = bool(xs)
    if event:
        nb_occ = [_occupied(c, b.theta_in) for b in nb]
        out_occ = [z for z in tb.out_sites() if c.is_occupied(z)]
        for x in xs:
            hits = _reach(o, c, x, tb.theta, box, H, nb_occ + [out_occ])
            if any(h is None for h in hits):
                event = False
                break
    if not with_subevents:
        return SowingReport(event, False, False, False, False, False)

    s1 = bool(xs)
    s2 = s3 = True
    sizes = {}
    in_sites = [tuple(q) for q in box_array(tb.theta_in).tolist()]
    for x in in_sites:
        path = o.path(x, p.n_r)
        on_path = {tuple(q) for q in path.tolist()}
        G = sorted(z for z in on_path if z != x and z in tb.theta and c.is_occupied(z))
        sizes[x] = len(G)
        if not G:
            s2 = s3 = False
            continue
        hit = range_in_box(o, G, p.n_r, box)
        hit_occ = {tuple(q) for q, ok in zip(hit.tolist(), c.occupied_mask(hit)) if ok}
        for b in nb:
            if not any(z in b.theta_in for z in hit_occ):
                s2 = False
        if not any(tb.in_out(z) for z in hit_occ):
            s3 = False
    premise = 2 * p.n_r <= H
    counter = premise and s1 and s2 and s3 and not event
    return SowingReport(event, s1, s2, s3, premise, counter, sizes)


# ---------------------------------------------------------------- activating


@dataclass
class ActivatingReport:
    event: bool
    a1: bool
    a2: bool
    w_sizes: dict[SitePoint, int]
    premise: bool
    counterexample: bool
    w_bound_checked: bool
    w_bound_violations: int


def activating_event(o: WalkOracle, c: Configuration, p: RenormParams) -> ActivatingReport:
    """A_r around the origin, its two sub-events, #W_r(x), and both audits."""
    d = p.d
    lam = BoxRegion(origin(d), p.lambda_radius)
    tb0 = theta_boxes(origin(d), p)
    V = [tuple(q) for q in box_array(BoxRegion(origin(d), p.v_radius)).tolist()]
    tbs = [theta_boxes(v, p) for v in V]
    span = p.theta_step * p.v_radius + p.theta_out
    big = BoxRegion(origin(d), max(span + p.theta_step + p.theta_out, p.lambda_radius))
    _require(c, big)
    xs = _occupied(c, tb0.theta_in)

    # A_r: every occupied x of Theta_in(0) visits all of Lambda in time
    event = bool(xs) and all(x in lam for x in xs)
    lam_sites = [tuple(q) for q in box_array(lam).tolist()]
    H = _fi(p.act_budget)
    if event:
        for x in xs:
            run, _ = _simulate(o, c, x, lam, lam.center, lam.radius, H,
                               targets=np.asarray(lam_sites), stop_on_groups=True)
            if (run.hit_time < 0).any():
                event = False
                break

    a1 = all(sowing_event(o, c, v, p, with_subevents=False).event for v in V)

    # W_r(x): occupied Theta_out sites reached within w_budget using relays in the union of Theta
    wbox = BoxRegion(origin(d), span)
    pts = box_array(wbox)
    mask = np.zeros(len(pts), dtype=np.uint8)
    out_sites = []
    for tb in tbs:
        lo = np.asarray(tb.theta.center) - tb.theta.radius
        hi = np.asarray(tb.theta.center) + tb.theta.radius
        mask |= np.all((pts >= lo) & (pts <= hi), axis=1).astype(np.uint8)
        out_sites.extend(tb.out_sites())
    out_occ = sorted({z for z in out_sites if c.is_occupied(z)})
    Hw = _fi(p.w_budget)
    Hh = _fi(p.hit_budget)
    w_sizes = {}
    a2 = bool(xs)
    for x in xs:
        if out_occ:
            run, _ = _simulate(o, c, x, mask, wbox.center, wbox.radius, Hw,
                               targets=np.asarray(out_occ), stop_on_groups=True)
            W = [w for w, h in zip(out_occ, run.hit_time.tolist()) if h >= 0]
        else:
            W = []
        w_sizes[x] = len(W)
        if not W:
            a2 = False
            continue
        covered = range_in_box(o, W, Hh, lam)
        if len(covered) < len(lam_sites):
            a2 = False

    premise = all(lam.contains_box(tb.outer) for tb in tbs) and p.w_budget + p.hit_budget <= p.act_budget
    counter = premise and a1 and a2 and not event
    w_checked = premise and a1
    viol = sum(1 for n in w_sizes.values() if n < p.w_min) if w_checked else 0
    return ActivatingReport(event, a1, a2, w_sizes, premise, counter, w_checked, viol)


# ---------------------------------------------------------------- recursion


@dataclass
class RecursionState:
    xi: SitePoint
    sizes: list[int]
    sigma: int | None
    max_index_reached: bool
    gammas: list[np.ndarray] = field(default_factory=list, repr=False)


def q_box(i: int, xi: Sequence[int], p: RenormParams) -> BoxRegion:
    return BoxRegion(scale(xi, p.q_step * i), p.q_half)


def run_recursion(o: WalkOracle, c: Configuration, xi: Sequence[int], p: RenormParams,
                  max_index: int = 20, keep_sets: bool = False) -> RecursionState:
    """Grow Gamma_i box by box until it falls below the threshold or max_index is passed."""
    xi = as_site(xi)
    if sum(abs(a) for a in xi) != 1:
        raise ValueError("xi must be a unit vector")
    for i in range(max_index + 1):
        _require(c, q_box(i, xi, p))
    box = q_box(0, xi, p)
    gamma = c.occupied_in(box)
    sizes, sets = [len(gamma)], [gamma] if keep_sets else []
    if len(gamma) < p.gamma_threshold:
        return RecursionState(xi, sizes, 0, False, sets)
    for i in range(1, max_index + 1):
        box = q_box(i, xi, p)
        hit = range_in_box(o, gamma, p.nu, box)
        gamma = hit[c.occupied_mask(hit)]
        sizes.append(len(gamma))
        if keep_sets:
            sets.append(gamma)
        if len(gamma) < p.gamma_threshold:
            return RecursionState(xi, sizes, i, False, sets)
    return RecursionState(xi, sizes, None, True, sets)


# ---------------------------------------------------------------- probability of goodness


@dataclass
class GoodProbRow:
    d: int
    r: float
    c_ckn: float
    override_mode: bool
    trials: int
    p_hat: float
    ci_low: float
    ci_high: float


def good_env(master: MasterSeed, p: RenormParams, trial: int):
    sub = master.child("good", repr(p.r), int(p.override), trial)
    A = BoxRegion(origin(p.d), 2 * p.R)
    c = Configuration(sub.child("occ"), p.d, p.r, A)
    o = WalkOracle(sub.child("walk"), p.d)
    return o, c


def estimate_good_probability(
    r_grid: Sequence[float],
    params: Callable[[float], RenormParams],
    trials: int,
    master: MasterSeed | int | None = None,
    threads: int | None = 1,
) -> list[GoodProbRow]:
    """Empirical P(0 is r-good) with a Clopper-Pearson interval per r."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if master is None:
        master = MasterSeed.from_env()
    elif isinstance(master, int):
        master = MasterSeed(master)
    rows = []
    for r in r_grid:
        p = params(float(r))

        def one(t, p=p):
            o, c = good_env(master, p, t)
            return is_r_good(o, c, origin(p.d), p).good

        hits = sum(map_ordered(one, range(trials), threads))
        ci = stats.binomtest(hits, trials).proportion_ci(0.95, method="exact")
        rows.append(GoodProbRow(p.d, p.r, p.c_ckn, p.override, trials, hits / trials, ci.low, ci.high))
    return rows


GOOD_COLUMNS = ("d", "r", "c_ckn", "override_mode", "trials", "p_hat", "ci_low", "ci_high")
RECURSION_COLUMNS = ("d", "r", "xi", "seed", "sigma_index", "censored")
