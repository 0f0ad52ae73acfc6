import math
import warnings
from fractions import Fraction

import numpy as np
import pytest

from frogsim.lattice import origin
from frogsim.randomness import MasterSeed, WalkOracle
from frogsim.walkstats import (
    RegimeWarning,
    adapted_chernoff_check,
    admissible_c,
    ckn_event_frequency,
    ckn_threshold,
    enumerate_paths,
    hitting_probability,
    hitting_probability_exact,
    proportion_ci,
    pz_exact_check,
    pz_sweep,
    range_ball_deviation,
    range_growth,
    range_size,
)


def test_enumerate_paths_shape():
    p = enumerate_paths(2, 3)
    assert p.shape == (64, 4, 2)
    assert not p[:, 0].any()
    steps = np.abs(np.diff(p, axis=1)).sum(axis=2)
    assert (steps == 1).all()
    assert len({tuple(x.ravel()) for x in p}) == 64


def test_hitting_exact():
    assert hitting_probability_exact(2, (1, 0), 1) == Fraction(1, 4)
    assert hitting_probability_exact(2, (0, 0), 3) == 1
    # two steps to (1,1): 2 of 16 direct paths, plus none via revisits
    assert hitting_probability_exact(2, (1, 1), 2) == Fraction(2, 16)
    assert hitting_probability_exact(3, (1, 0, 0), 1) == Fraction(1, 6)


def test_pz_single_neighbour():
    rep = pz_exact_check(2, 1, [(1, 0)])
    assert rep.total_paths == 4
    assert rep.mean == Fraction(1, 4)
    assert rep.second_moment == Fraction(1, 4)
    assert rep.p_half == Fraction(1, 4)
    assert rep.pz_bound == Fraction(1, 16)
    assert rep.mass == 1
    assert rep.holds and rep.pz_holds


def test_pz_rejects_empty():
    with pytest.raises(ValueError):
        pz_exact_check(2, 2, [])
    with pytest.raises(ValueError):
        pz_exact_check(2, 2, [(1, 0, 0)])


def test_pz_sweep_small():
    reps = pz_sweep(2, [2, 3])
    assert len(reps) == 2 * 255
    assert all(r.holds and r.pz_holds and r.mass == 1 for r in reps)


def test_range_size_matches_unique():
    o = WalkOracle(MasterSeed(5), 2)
    for n in (0, 1, 10, 1000):
        ref = np.unique(o.path((0, 0), n), axis=0).shape[0]
        assert range_size(o, (0, 0), n) == ref
    o3 = WalkOracle(MasterSeed(5), 3)
    assert range_size(o3, (0, 0, 0), 500) == np.unique(o3.path((0, 0, 0), 500), axis=0).shape[0]


def test_range_growth_rows():
    rows = range_growth(3, [100, 1000], 20, 3)
    for row in rows:
        assert 1 <= row.mean <= row.n + 1
        assert row.ci_low <= row.mean <= row.ci_high
        assert row.per_step == pytest.approx(row.mean / row.n)
    assert range_growth(3, [100], 20, 3, threads=3)[0].mean == rows[0].mean


def test_hitting_mc_matches_exact():
    est = hitting_probability(2, (1, 0), 4, 4000, 9)
    exact = float(hitting_probability_exact(2, (1, 0), 4))
    assert est.ci_low - 0.01 <= exact <= est.ci_high + 0.01
    assert hitting_probability(2, (0, 0), 5, 10, 1).p_hat == 1


def test_hitting_regime_warning():
    with pytest.warns(RegimeWarning):
        est = hitting_probability(2, (5, 0), 10, 10, 1)
    assert not est.in_regime
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert hitting_probability(2, (2, 0), 4, 10, 1).in_regime


def test_ball_deviation():
    # beta = 1/2 asks for fewer than one site: never happens
    assert range_ball_deviation(2, 100, 0.5, 50, 1).hits == 0
    row = range_ball_deviation(2, 400, 0.1, 50, 1)
    assert row.bound == pytest.approx(2 * math.exp(-(400 ** 0.1)))
    for n, beta in ((1, 0.1), (10, 0.0), (10, 0.6)):
        with pytest.raises(ValueError):
            range_ball_deviation(2, n, beta, 5)


def test_ckn_validation():
    with pytest.raises(ValueError):
        ckn_event_frequency(2, 100, [(0, 0)], [(30, 0)], 0.01, 0.5, 5)
    with pytest.raises(ValueError):
        ckn_event_frequency(2, 100, [(0, 0)], [(1, 0)], 0.5, 0.5, 5)
    with pytest.raises(ValueError):
        ckn_event_frequency(2, 100, [], [(1, 0)], 0.005, 0.5, 5)


def test_ckn_lemma_consistency_dense():
    A = [(0, 0), (1, 0)]
    B = [(i, j) for i in range(-1, 2) for j in range(-1, 2)]
    rep = ckn_event_frequency(2, 100, A, B, 0.05, 1.0, 60, master=3, diagnostic=True)
    # with every site occupied the occupied count is the full count
    assert rep.prop_counts == rep.lemma_counts
    assert rep.diagnostics is not None
    assert 0 <= rep.admissible_c < 1


def test_ckn_monotone_in_A():
    B = [(i, j) for i in range(4, 7) for j in range(-1, 2)]
    small = ckn_event_frequency(2, 100, [(0, 0)], B, 0.05, 0.5, 40, master=8)
    big = ckn_event_frequency(2, 100, [(0, 0), (1, 0), (0, 1)], B, 0.05, 0.5, 40, master=8)
    assert all(b >= s for s, b in zip(small.prop_counts, big.prop_counts))


def test_admissible_c_edges():
    assert admissible_c(2, 100, 5, 9, 0.09, [0] * 10) == 0.0
    assert admissible_c(2, 100, 5, 9, 0.09, [9] * 10) == pytest.approx(0.999)
    assert ckn_threshold(2, 100, 5, 9, 0.09, 0.5) == pytest.approx(min(0.5 * 100 / math.log(100) * 5, 0.91 * 9))


@pytest.mark.parametrize("sched", ["iid", "alternating", "adaptive"])
def test_chernoff_schedules(sched):
    row = adapted_chernoff_check(0.5, 100, sched, 2000, 0.1, seed=1)
    assert row.hits == 0 and row.bound == pytest.approx(math.exp(-10))


def test_chernoff_q_zero_and_violation():
    assert adapted_chernoff_check(0.0, 20, trials=100, seed=1).hits == 0

    def greedy(i, prev):
        return np.full(prev.shape[0], 0.9)

    with pytest.raises(ValueError):
        adapted_chernoff_check(0.5, 10, greedy, 10, seed=1)
    with pytest.raises(ValueError):
        adapted_chernoff_check(0.5, 10, "nope", 10, seed=1)


def test_proportion_ci():
    lo, hi = proportion_ci(0, 100)
    assert lo == 0 and 0 < hi < 0.05
    lo, hi = proportion_ci(50, 100)
    assert lo < 0.5 < hi
