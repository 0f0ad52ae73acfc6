"""Monte Carlo estimation of the time constant and its scaling in the density.

Trial i of an estimate at (d, x, n) uses the keyed substream
``master.child("mu", d, x, n, i)`` for both walks and occupancy, whatever r
is.  Occupancy is a threshold on a per-site hash, so configurations at
different densities are coupled monotonically (common random numbers).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._parallel import map_ordered
from .dynamics import _simulate
from .lattice import BoxRegion, Norm, as_site, norm, origin, scale
from .randomness import Configuration, MasterSeed, WalkOracle, closest_occupied

Z95 = 1.959963984540054


class EstimationFailure(RuntimeError):
    """Every trial of a batch was censored."""


def delta(d: int, r: float) -> float:
    """sqrt(|log r| / r) in d = 2, r^(-1/2) in d >= 3."""
    if not 0.0 < r <= 1.0:
        raise ValueError(f"r must lie in (0, 1], got {r!r}")
    if d < 2:
        raise ValueError("d must be at least 2")
    if d == 2:
        return math.sqrt(abs(math.log(r)) / r)
    return 1.0 / math.sqrt(r)


def phi(d: int, t: float) -> float:
    """Range-growth scale: t / log t in d = 2, t in d >= 3."""
    if d < 2:
        raise ValueError("d must be at least 2")
    if d == 2:
        if t <= 1:
            raise ValueError("phi_2 needs t > 1")
        return t / math.log(t)
    if t <= 0:
        raise ValueError("phi_d needs t > 0")
    return float(t)


def stable_mean(values: Sequence[float]) -> float:
    """Mean that does not depend on the order the values arrived in."""
    return math.fsum(sorted(values)) / len(values)


def mean_ci(values: Sequence[float], z: float = Z95) -> tuple[float, float, float]:
    """(mean, low, high) from the normal approximation."""
    m = len(values)
    if m == 0:
        return math.nan, math.nan, math.nan
    mean = stable_mean(values)
    if m == 1:
        return mean, mean, mean
    var = math.fsum(sorted((v - mean) ** 2 for v in values)) / (m - 1)
    half = z * math.sqrt(var / m)
    return mean, mean - half, mean + half


@dataclass
class TrialOutcome:
    trial: int
    target: tuple[int, ...] | None
    value: int | None
    censored: bool
    boundary_touched: bool


@dataclass
class MuEstimate:
    d: int
    r: float
    x: tuple[int, ...]
    n: int
    trials: int
    seed: int
    mu_hat: float
    ci_low: float
    ci_high: float
    delta: float
    ratio: float
    censor_rate: float
    boundary_rate: float
    values: list[float] = field(default_factory=list, repr=False)
    outcomes: list[TrialOutcome] = field(default_factory=list, repr=False)

    @property
    def ci_half(self) -> float:
        return (self.ci_high - self.ci_low) / 2


def default_margin(n: int, x: Sequence[int], d: int, r: float) -> int:
    """Half-width of the simulated box around the origin."""
    ext = n * norm(x, Norm.LINF)
    return int(math.ceil(1.5 * ext)) + 4 * int(math.ceil(delta(d, r))) + 2


def _one_trial(master: MasterSeed, d, r, x, n, i, margin, horizon_factor, horizon) -> TrialOutcome:
    sub = master.child("mu", d, *x, n, i)
    A = BoxRegion(origin(d), margin)
    c = Configuration(sub.child("occ"), d, r, A, force_origin=True)
    o = WalkOracle(sub.child("walk"), d)
    target = closest_occupied(c, scale(x, n))
    if target is None:
        return TrialOutcome(i, None, None, True, False)
    if horizon is None:
        l1 = norm(target, Norm.L1)
        H = max(int(math.ceil(horizon_factor * l1 * l1 * delta(d, r) ** 2)), 1000)
    else:
        H = int(horizon)
    run, _ = _simulate(o, c, origin(d), A, A.center, A.radius, H,
                       targets=np.asarray([target]), stop_on_groups=True)
    h = int(run.hit_time[0])
    if h < 0:
        return TrialOutcome(i, target, None, True, run.exited)
    return TrialOutcome(i, target, h, False, run.exited)


def estimate_mu(
    d: int,
    r: float,
    x: Sequence[int],
    n: int,
    trials: int,
    master: MasterSeed | int | None = None,
    horizon_factor: float = 50.0,
    horizon: int | None = None,
    margin: int | None = None,
    threads: int | None = 1,
) -> MuEstimate:
    """Estimate mu_r(x) by T(0, v_n^x)/n over independent trials with the origin forced occupied."""
    if trials < 2:
        raise ValueError("trials must be at least 2")
    if n < 1:
        raise ValueError("n must be positive")
    x = as_site(x)
    if len(x) != d or not any(x):
        raise ValueError("x must be a nonzero site of dimension d")
    if master is None:
        master = MasterSeed.from_env()
    elif isinstance(master, int):
        master = MasterSeed(master)
    if margin is None:
        margin = default_margin(n, x, d, r)

    def fn(i):
        return _one_trial(master, d, r, x, n, i, margin, horizon_factor, horizon)

    outcomes = map_ordered(fn, range(trials), threads)
    vals = [o.value / n for o in outcomes if not o.censored]
    cens = sum(o.censored for o in outcomes) / trials
    if not vals:
        raise EstimationFailure(f"all {trials} trials censored at d={d}, r={r}, n={n}")
    mu, lo, hi = mean_ci(vals)
    dl = delta(d, r)
    l1 = norm(x, Norm.L1)
    ratio = mu / (dl * l1) if dl > 0 else math.nan
    return MuEstimate(
        d, r, x, n, trials, master.seed, mu, lo, hi, dl, ratio, cens,
        sum(o.boundary_touched for o in outcomes) / trials, vals, outcomes,
    )


@dataclass
class SweepResult:
    d: int
    x: tuple[int, ...]
    n: int
    estimates: list[MuEstimate]
    slope: float
    intercept: float
    residuals: list[float]
    fit_r: list[float]


def fit_loglog(deltas: Sequence[float], mus: Sequence[float]) -> tuple[float, float, list[float]]:
    lx = np.log(np.asarray(deltas, dtype=float))
    ly = np.log(np.asarray(mus, dtype=float))
    res = stats.linregress(lx, ly)
    resid = ly - (res.intercept + res.slope * lx)
    return float(res.slope), float(res.intercept), [float(v) for v in resid]


def _check_r_list(d: int, r_list: Sequence[float]) -> list[float]:
    rs = [float(r) for r in r_list]
    usable = sorted({r for r in rs if delta(d, r) > 0}, reverse=True)
    if len(usable) < 3:
        raise ValueError("a scaling fit needs at least 3 distinct r values with delta > 0")
    return rs


def scaling_sweep(
    d: int,
    r_list: Sequence[float],
    x: Sequence[int],
    n: int,
    trials: int,
    master: MasterSeed | int | None = None,
    threads: int | None = 1,
    **kw,
) -> SweepResult:
    """Estimate mu at each r, then fit log mu_hat = a + b log delta_d(r)."""
    rs = _check_r_list(d, r_list)
    ests = [estimate_mu(d, r, x, n, trials, master, threads=threads, **kw) for r in rs]
    fit = [e for e in ests if e.delta > 0]
    slope, intercept, resid = fit_loglog([e.delta for e in fit], [e.mu_hat for e in fit])
    return SweepResult(d, as_site(x), n, ests, slope, intercept, resid, [e.r for e in fit])


class TimeConstantEstimator(RegressorMixin, BaseEstimator):
    """Power-law model mu_r(x) = exp(intercept) * delta_d(r)^slope fitted by simulation.

    ``fit`` takes densities (shape ``(n_samples,)`` or ``(n_samples, 1)``)
    and runs one Monte Carlo estimate per density; ``y`` is ignored.
    """

    def __init__(self, d=2, x=(1, 0), n=40, trials=200, seed=None, threads=1, horizon_factor=50.0):
        self.d = d
        self.x = x
        self.n = n
        self.trials = trials
        self.seed = seed
        self.threads = threads
        self.horizon_factor = horizon_factor

    @staticmethod
    def _densities(X) -> np.ndarray:
        arr = np.asarray(X, dtype=float)
        if arr.ndim == 2:
            if arr.shape[1] != 1:
                raise ValueError("X must hold a single column of densities")
            arr = arr[:, 0]
        return arr.reshape(-1)

    def fit(self, X, y=None):
        rs = self._densities(X)
        master = MasterSeed(self.seed) if self.seed is not None else MasterSeed.from_env()
        sweep = scaling_sweep(self.d, rs, self.x, self.n, self.trials, master,
                              threads=self.threads, horizon_factor=self.horizon_factor)
        self.sweep_ = sweep
        self.slope_ = sweep.slope
        self.intercept_ = sweep.intercept
        self.mu_hat_ = np.array([e.mu_hat for e in sweep.estimates])
        self.densities_ = rs
        return self

    def predict(self, X):
        check_is_fitted(self, "slope_")
        rs = self._densities(X)
        dl = np.array([delta(self.d, r) for r in rs])
        return np.exp(self.intercept_) * dl**self.slope_
