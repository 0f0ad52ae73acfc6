"""Exact and Monte Carlo checks on simple random walk inputs.

Exact quantities come from enumerating every (2d)^n path with integer
counts, so results are ``Fraction`` values and the inequality verdicts carry
no tolerance.  Monte Carlo quantities use keyed walk families, one substream
per trial.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from . import _kernels as K
from ._parallel import map_ordered
from .estimator import mean_ci, phi
from .lattice import SitePoint, as_site, origin
from .randomness import Configuration, MasterSeed, WalkOracle, _arr, _u64

MAX_PATHS = 5_000_000
MAX_ENUM_STEPS = 7


class RegimeWarning(UserWarning):
    """Parameters outside the regime where a cited bound applies."""


def _master(master) -> MasterSeed:
    if master is None:
        return MasterSeed.from_env()
    if isinstance(master, int):
        return MasterSeed(master)
    return master


def proportion_ci(k: int, m: int) -> tuple[float, float]:
    """Clopper-Pearson 95% interval."""
    ci = stats.binomtest(k, m).proportion_ci(0.95, method="exact")
    return float(ci.low), float(ci.high)


# ---------------------------------------------------------------- exact enumeration


def _unit_moves(d: int) -> np.ndarray:
    moves = np.zeros((2 * d, d), dtype=np.int8)
    for i in range(d):
        moves[2 * i, i] = 1
        moves[2 * i + 1, i] = -1
    return moves


def enumerate_paths(d: int, n: int) -> np.ndarray:
    """Every n-step path from the origin as an ``((2d)^n, n+1, d)`` int8 array."""
    total = (2 * d) ** n
    if n > MAX_ENUM_STEPS or total > MAX_PATHS:
        raise ValueError(f"(2d)^n = {total} paths is beyond the enumeration guard")
    seq = np.indices((2 * d,) * n, dtype=np.int8).reshape(n, -1).T if n else np.zeros((1, 0), dtype=np.int8)
    steps = _unit_moves(d)[seq]
    pos = np.zeros((total, n + 1, d), dtype=np.int8)
    if n:
        np.cumsum(steps, axis=1, out=pos[:, 1:, :])
    return pos


def _visits(paths: np.ndarray, offsets: Sequence[SitePoint]) -> np.ndarray:
    """Boolean ``(paths, offsets)``: does the path ever sit on the offset."""
    out = np.zeros((paths.shape[0], len(offsets)), dtype=bool)
    for j, g in enumerate(offsets):
        out[:, j] = (paths == np.asarray(g, dtype=np.int8)).all(axis=2).any(axis=1)
    return out


@dataclass
class EnumerationReport:
    d: int
    n: int
    gamma: tuple[SitePoint, ...]
    total_paths: int
    mean: Fraction
    second_moment: Fraction
    sup_mean: Fraction
    p_half: Fraction
    pz_bound: Fraction
    goal_bound: Fraction
    mass: Fraction
    pz_holds: bool
    holds: bool
    sup_site: SitePoint | None = None

    def fractions(self) -> dict[str, Fraction]:
        return dict(mean=self.mean, second_moment=self.second_moment, sup_mean=self.sup_mean,
                    p_half=self.p_half, pz_bound=self.pz_bound, goal_bound=self.goal_bound)


def pz_exact_check(d: int, n: int, gamma, paths: np.ndarray | None = None) -> EnumerationReport:
    """Both sides of the Paley-Zygmund chain for #(R_n^0 ∩ Γ), exactly.

    ``holds`` is the final form P(X >= E X / 2) >= E X / (12 sup_x E #(R_n^x ∩ Γ));
    ``pz_holds`` is the intermediate P(X >= E X / 2) >= (E X)^2 / (4 E X^2).
    ``paths`` may carry a cached ``enumerate_paths(d, n)``.
    """
    g = tuple(sorted({as_site(z) for z in gamma}))
    if not g:
        raise ValueError("gamma must be nonempty")
    if any(len(z) != d for z in g):
        raise ValueError("gamma sites must have dimension d")
    if paths is None:
        paths = enumerate_paths(d, n)
    N = paths.shape[0]
    starts = [origin(d)] + list(g)
    offsets = sorted({tuple(a - b for a, b in zip(z, x)) for x in starts for z in g})
    col = {o: j for j, o in enumerate(offsets)}
    vis = _visits(paths, offsets)

    def counts_from(x):
        cols = [col[tuple(a - b for a, b in zip(z, x))] for z in g]
        return vis[:, cols].sum(axis=1).astype(np.int64)

    c0 = counts_from(origin(d))
    s1 = int(c0.sum())
    s2 = int((c0 * c0).sum())
    sup_sum, sup_site = -1, None
    for x in g:
        s = int(counts_from(x).sum())
        if s > sup_sum:
            sup_sum, sup_site = s, x
    mean = Fraction(s1, N)
    # X >= mean/2  <=>  2 N X >= s1
    ok = int((2 * N * c0 >= s1).sum())
    p_half = Fraction(ok, N)
    hist = np.bincount(c0, minlength=len(g) + 1)
    mass = sum((Fraction(int(h), N) for h in hist), Fraction(0))
    second = Fraction(s2, N)
    pz_bound = mean * mean / (4 * second) if s2 else Fraction(0)
    goal_bound = Fraction(s1, 12 * sup_sum)
    return EnumerationReport(d, n, g, N, mean, second, Fraction(sup_sum, N), p_half,
                             pz_bound, goal_bound, mass, p_half >= pz_bound, p_half >= goal_bound, sup_site)


def pz_sweep(d: int, n_values: Sequence[int], radius: int = 1) -> list[EnumerationReport]:
    """Every nonempty Γ ⊆ B_inf(0, radius) minus the origin, for each n."""
    ring = [p for p in itertools.product(range(-radius, radius + 1), repeat=d) if any(p)]
    out = []
    for n in n_values:
        paths = enumerate_paths(d, n)
        for mask in range(1, 1 << len(ring)):
            g = [ring[i] for i in range(len(ring)) if mask >> i & 1]
            out.append(pz_exact_check(d, n, g, paths))
    return out


def hitting_probability_exact(d: int, z: Sequence[int], n: int) -> Fraction:
    """P(H(0, z) <= n) by enumeration."""
    z = as_site(z)
    if not any(z):
        return Fraction(1)
    paths = enumerate_paths(d, n)
    hits = _visits(paths, [z])[:, 0]
    return Fraction(int(hits.sum()), paths.shape[0])


# ---------------------------------------------------------------- range growth


def _table_bits(n: int) -> int:
    return max(4, int(math.ceil(math.log2(2 * (n + 1)))) + 1)


def range_size(o: WalkOracle, x: Sequence[int], n: int) -> int:
    """#R_n^x."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if o.dimension > 3 or n >= 1 << 20:
        path = o.path(x, n)
        return int(np.unique(path, axis=0).shape[0])
    return int(K.range_size(_u64(o.seed), _arr(x), int(n), _table_bits(n)))


@dataclass
class RangeRow:
    d: int
    n: int
    trials: int
    mean: float
    ci_low: float
    ci_high: float
    phi: float
    ratio: float
    per_step: float


def range_growth(d: int, n_list: Sequence[int], trials: int, master=None, threads: int | None = 1) -> list[RangeRow]:
    """Monte Carlo E[#R_n^0], its ratio to phi_d(n) and to n."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    master = _master(master)
    rows = []
    for n in n_list:
        n = int(n)

        def one(i, n=n):
            return range_size(WalkOracle(master.child("range", d, n, i), d), origin(d), n)

        vals = map_ordered(one, range(trials), threads)
        mean, lo, hi = mean_ci(vals)
        try:
            ph = phi(d, n)
        except ValueError:
            ph = math.nan
        rows.append(RangeRow(d, n, trials, mean, lo, hi, ph, mean / ph if ph == ph else math.nan,
                             mean / n if n else math.nan))
    return rows


# ---------------------------------------------------------------- hitting


@dataclass
class HitEstimate:
    d: int
    z: SitePoint
    n: int
    trials: int
    hits: int
    p_hat: float
    ci_low: float
    ci_high: float
    c_hat: float
    in_regime: bool


def hitting_probability(d: int, z: Sequence[int], n: int, trials: int, master=None,
                        threads: int | None = 1) -> HitEstimate:
    """Empirical P(H(0, z) <= n) and the implied constant of the lower bound."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    z = as_site(z)
    if len(z) != d:
        raise ValueError("z must have dimension d")
    norm2 = math.sqrt(sum(a * a for a in z))
    in_regime = n >= norm2 * norm2
    if not in_regime:
        warnings.warn(f"n = {n} is below |z|_2^2 = {norm2 * norm2:g}", RegimeWarning, stacklevel=2)
    master = _master(master)
    if not any(z):
        hits = trials
    else:
        zz = _arr(z)

        def one(i):
            seed = master.child("hit", d, *z, n, i).seed
            return bool(K.hit_within(_u64(seed), np.zeros(d, dtype=np.int64), zz, int(n)))

        hits = sum(map_ordered(one, range(trials), threads))
    p = hits / trials
    lo, hi = proportion_ci(hits, trials)
    if not any(z):
        c_hat = math.nan
    elif d == 2:
        c_hat = p * math.log(1 + norm2)
    else:
        c_hat = p * norm2 ** (d - 2)
    return HitEstimate(d, z, n, trials, hits, p, lo, hi, c_hat, in_regime)


# ---------------------------------------------------------------- range in a ball


@dataclass
class FrequencyRow:
    name: str
    trials: int
    hits: int
    freq: float
    ci_low: float
    ci_high: float
    bound: float
    params: dict = field(default_factory=dict)


def _freq_row(name, hits, trials, bound, **params) -> FrequencyRow:
    lo, hi = proportion_ci(hits, trials)
    return FrequencyRow(name, trials, hits, hits / trials, lo, hi, bound, params)


def range_ball_deviation(d: int, n: int, beta: float, trials: int, master=None,
                         threads: int | None = 1) -> FrequencyRow:
    """Frequency of #(R_n^0 ∩ B_2(0, n^(1/2+beta))) < n^(1-2 beta)."""
    if n < 2:
        raise ValueError("n must be at least 2")
    if not 0 < beta <= 0.5:
        raise ValueError("beta must lie in (0, 1/2]")
    master = _master(master)
    r2 = n ** (1 + 2 * beta)
    need = n ** (1 - 2 * beta)

    def one(i):
        o = WalkOracle(master.child("ball", d, n, repr(beta), i), d)
        path = o.path(origin(d), n).astype(np.int64)
        inside = path[(path * path).sum(axis=1) <= r2]
        return np.unique(inside, axis=0).shape[0] < need

    hits = sum(map_ordered(one, range(trials), threads))
    return _freq_row("range_ball", hits, trials, 2 * math.exp(-(n**beta)), d=d, n=n, beta=beta)


# ---------------------------------------------------------------- shortfall events


@dataclass
class CKNReport:
    prop: FrequencyRow
    lemma: FrequencyRow
    admissible_c: float
    prop_counts: list[int] = field(repr=False, default_factory=list)
    lemma_counts: list[int] = field(repr=False, default_factory=list)
    diagnostics: dict | None = None


def _check_ckn(d, n, A, B, delta_):
    if n < 2:
        raise ValueError("n must be at least 2")
    if not 0 < delta_ < 1:
        raise ValueError("delta must lie in (0, 1)")
    if not A or not B:
        raise ValueError("A and B must be nonempty")
    far = max(math.dist(a, b) for a in A for b in B)
    if far > math.sqrt(n) + 1e-12:
        raise ValueError(f"max distance {far:.3f} between A and B exceeds sqrt(n)")
    if len(B) < delta_ * n ** (d / 2):
        raise ValueError("#B is below delta * n^(d/2)")


def ckn_threshold(d: int, n: int, nA: int, nB: int, delta_: float, c: float) -> float:
    return min(c * phi(d, n) * nA, (1 - delta_) * nB)


def ckn_event_frequency(
    d: int,
    n: int,
    A: Sequence[Sequence[int]],
    B: Sequence[Sequence[int]],
    delta_: float,
    r: float,
    trials: int,
    c_ckn: float = 0.2,
    master=None,
    diagnostic: bool = False,
    threads: int | None = 1,
) -> CKNReport:
    """Shortfall frequencies of #(R_n^A ∩ B) and of #(R_n^A ∩ B ∩ O).

    Walks are keyed by start site, so enlarging A can only enlarge the range
    in every trial.  With ``diagnostic`` the ordered decomposition Γ_i, τ and
    Y_i (with c_ckn standing in for the range constant) is tabulated.
    """
    A = [as_site(a) for a in dict.fromkeys(as_site(a) for a in A)]
    B = sorted({as_site(b) for b in B})
    _check_ckn(d, n, A, B, delta_)
    if trials < 1:
        raise ValueError("trials must be at least 1")
    master = _master(master)
    Bset = set(B)
    Barr = np.asarray(B, dtype=np.int64)
    thr = ckn_threshold(d, n, len(A), len(B), delta_, c_ckn)
    ph = phi(d, n)

    def one(i):
        sub = master.child("ckn", d, n, i)
        o = WalkOracle(sub.child("walk"), d)
        c = Configuration(sub.child("occ"), d, r)
        seen: set[SitePoint] = set()
        gamma_sizes, ys = [], []
        gamma = set(Bset)
        for a in A:
            gamma_sizes.append(len(gamma))
            hit = {tuple(p) for p in o.path(a, n).tolist()} & Bset
            ys.append(len(hit & gamma) < c_ckn * ph)
            gamma -= hit
            seen |= hit
        occ = c.occupied_mask(Barr)
        n_occ = sum(1 for b, ok in zip(B, occ) if ok and b in seen)
        return len(seen), n_occ, gamma_sizes, ys

    res = map_ordered(one, range(trials), threads)
    pc = [t[0] for t in res]
    lc = [t[1] for t in res]
    prop_hits = sum(v < thr for v in pc)
    lemma_hits = sum(v < r / 2 * thr for v in lc)
    prop = _freq_row("ckn_prop", prop_hits, trials, math.exp(-c_ckn * len(A)),
                     d=d, n=n, nA=len(A), nB=len(B), delta=delta_, c=c_ckn)
    lemma = _freq_row("ckn_lemma", lemma_hits, trials,
                      math.exp(-c_ckn * len(A)) + math.exp(-r / 8 * thr),
                      d=d, n=n, nA=len(A), nB=len(B), delta=delta_, c=c_ckn, r=r)
    diag = None
    if diagnostic:
        ell = len(A)
        taus, ysum, branch_tau, branch_y = [], [], 0, 0
        for (cnt, _, sizes, ys) in res:
            tau = next((i + 1 for i, s in enumerate(sizes) if s <= delta_ * len(B)), math.inf)
            taus.append(tau)
            s = sum(y for i, y in enumerate(ys) if tau >= i + 1)
            ysum.append(s)
            if cnt < thr:
                if tau < ell:
                    branch_tau += 1
                else:
                    branch_y += 1
        diag = dict(tau_lt_ell=sum(t < ell for t in taus) / trials,
                    mean_y_sum=float(np.mean(ysum)) / ell,
                    shortfall_with_tau_lt_ell=branch_tau,
                    shortfall_with_tau_ge_ell=branch_y)
    return CKNReport(prop, lemma, admissible_c(d, n, len(A), len(B), delta_, pc), pc, lc, diag)


def admissible_c(d: int, n: int, nA: int, nB: int, delta_: float, counts: Sequence[int],
                 grid: int = 1000) -> float:
    """Largest c on a grid of (0, 1) with freq(#R < threshold(c)) <= exp(-c #A); 0 if none."""
    counts = np.asarray(counts)
    best = 0.0
    for k in range(1, grid):
        c = k / grid
        thr = ckn_threshold(d, n, nA, nB, delta_, c)
        if (counts < thr).mean() <= math.exp(-c * nA):
            best = c
        else:
            break
    return best


# ---------------------------------------------------------------- adapted Chernoff


Schedule = Callable[[int, np.ndarray], np.ndarray]


def _schedule(name_or_fn, q: float) -> Schedule:
    if callable(name_or_fn):
        return name_or_fn
    if name_or_fn == "iid":
        return lambda i, prev: np.full(prev.shape[0], q)
    if name_or_fn == "alternating":
        return lambda i, prev: np.full(prev.shape[0], q if i % 2 == 0 else q / 2)
    if name_or_fn == "adaptive":
        # full q right after a success, q/2 otherwise
        return lambda i, prev: np.where(prev, q, q / 2)
    raise ValueError(f"unknown schedule {name_or_fn!r}")


def adapted_chernoff_check(q: float, n: int, schedule="iid", trials: int = 10_000, c: float = 0.1,
                           seed: int | None = None) -> FrequencyRow:
    """P(sum X_i >= (1-c) n) for indicators with conditional success at most q.

    ``schedule(i, prev)`` returns the conditional success probability of step
    i for every trial given the previous outcomes; values above q are
    rejected.
    """
    if not 0 <= q < 1:
        raise ValueError("q must lie in [0, 1)")
    if not 0 < c < 1:
        raise ValueError("c must lie in (0, 1)")
    if n < 1 or trials < 1:
        raise ValueError("n and trials must be positive")
    label = schedule if isinstance(schedule, str) else getattr(schedule, "__name__", "custom")
    fn = _schedule(schedule, q)
    ss = np.random.SeedSequence(_master(seed).child("chernoff", label, repr(q), n).seed)
    rng = np.random.default_rng(ss)
    total = np.zeros(trials, dtype=np.int64)
    prev = np.zeros(trials, dtype=bool)
    for i in range(n):
        p = np.asarray(fn(i, prev), dtype=float)
        if (p > q + 1e-12).any() or (p < 0).any():
            raise ValueError(f"schedule exceeds q = {q} at step {i}")
        prev = rng.random(trials) < p
        total += prev
    hits = int((total >= (1 - c) * n).sum())
    return _freq_row("chernoff", hits, trials, math.exp(-c * n), q=q, n=n, c=c, schedule=label)

