"""Acceptance criteria 1-11.  Each test records one PASS/FAIL line via ``record``."""

import hashlib
import math
import time
from functools import lru_cache

import numpy as np
import pytest

from conftest import brute_passage, record, small_instance
from frogsim.chains import realization_checks
from frogsim.cli import main as cli_main
from frogsim.dynamics import activation_front, passage_time
from frogsim.estimator import estimate_mu, fit_loglog
from frogsim.lattice import BoxRegion, norm, origin
from frogsim.randomness import Configuration, MasterSeed, WalkOracle
from frogsim.renormalization import (
    RenormParams,
    activating_event,
    good_env,
    is_r_good,
    is_r_good_bruteforce,
    sowing_event,
)
from frogsim.walkstats import hitting_probability, pz_sweep, range_growth

SEED = 20240601
# (source, target, value) of every Finite passage seen in this module
FINITE_SEEN: list[tuple] = []


def test_c01_chain_realization():
    t0 = time.perf_counter()
    rows = realization_checks(2, 0.3, 200, 15, 10, 20000, master=SEED)
    dt = time.perf_counter() - t0
    fin = [r for r in rows if r.value.is_finite]
    FINITE_SEEN.extend(((0, 0), r.target, r.value.value) for r in fin)
    bad = [r for r in fin if not r.exact]
    ok = len(rows) == 200 and len(fin) == 200 and not bad and dt < 60
    record(1, ok, f"{len(fin) - len(bad)}/{len(rows)} realizations exact, {dt:.1f}s")
    assert ok


def test_c02_triangle_inequality():
    m = MasterSeed(SEED).child("triangle")
    A = BoxRegion(origin(2), 12)
    H = 20000
    checked = violations = 0
    k = 0
    while checked < 500:
        sub = m.child(k)
        k += 1
        c = Configuration(sub.child("occ"), 2, 0.3, A)
        o = WalkOracle(sub.child("walk"), 2)
        occ = [tuple(p) for p in c.occupied_in(A).tolist()]
        if len(occ) < 3:
            continue
        rng = np.random.default_rng(sub.child("pick").seed)
        x, y, z = (occ[i] for i in rng.choice(len(occ), 3, replace=False))
        fx = activation_front(o, c, x, A, H)
        fy = activation_front(o, c, y, A, H)
        txy, tyz, txz = fx[y], fy[z], fx[z]
        if not (txy.is_finite and tyz.is_finite and txz.is_finite):
            continue
        checked += 1
        FINITE_SEEN.extend([(x, y, txy.value), (y, z, tyz.value), (x, z, txz.value)])
        violations += txz.value > txy.value + tyz.value
    ok = violations == 0
    record(2, ok, f"{checked} triples, {violations} violations")
    assert ok


def test_c04_exhaustive_oracle():
    H = 5000
    done = mismatches = 0
    seed = 0
    while done < 50:
        o, c, A = small_instance(5000 + seed)
        seed += 1
        occ = [tuple(p) for p in c.occupied_in(A).tolist()]
        if len(occ) > 10:
            continue
        rng = np.random.default_rng(seed)
        ys = [occ[int(rng.integers(len(occ)))], tuple(int(v) for v in rng.integers(-6, 7, size=2))]
        for y in ys:
            got = passage_time(o, c, (0, 0), y, A, H).value
            want = brute_passage(o, c, (0, 0), y, A, H)
            mismatches += got != want
            if got.is_finite:
                FINITE_SEEN.append(((0, 0), y, got.value))
        done += 1
    ok = mismatches == 0
    record(4, ok, f"{done} instances ({2 * done} queries), {mismatches} mismatches")
    assert ok


def test_c03_speed_bound():
    # fresh queries on top of everything gathered by criteria 1, 2 and 4
    m = MasterSeed(SEED).child("speed")
    for k in range(100):
        sub = m.child(k)
        A = BoxRegion(origin(2), 10)
        c = Configuration(sub.child("occ"), 2, 0.25, A, force_origin=True)
        o = WalkOracle(sub.child("walk"), 2)
        front = activation_front(o, c, (0, 0), A, 5000)
        FINITE_SEEN.extend(((0, 0), z, t.value) for z, t in front if t.is_finite)
    bad = [(x, y, v) for x, y, v in FINITE_SEEN if v < norm(np.subtract(y, x))]
    ok = not bad and len(FINITE_SEEN) > 1000
    record(3, ok, f"{len(FINITE_SEEN)} finite values, {len(bad)} below the L1 distance")
    assert ok


def test_c05_pz_audit():
    t0 = time.perf_counter()
    reps = pz_sweep(2, range(2, 7))
    dt = time.perf_counter() - t0
    bad = [r for r in reps if not (r.holds and r.pz_holds)]
    ok = len(reps) == 5 * 255 and not bad and dt < 120
    record(5, ok, f"{len(reps) - len(bad)}/{len(reps)} (n, gamma) pairs hold, {dt:.1f}s")
    assert ok


@lru_cache(maxsize=None)
def mu_cell(d, r, n):
    x = (1,) + (0,) * (d - 1)
    return estimate_mu(d, r, x, n, 200, SEED, threads=None)


def test_c06_monotone_in_r():
    rs = [0.8, 0.4, 0.2, 0.1]
    ests = [mu_cell(2, r, 60) for r in rs]
    worst = -math.inf
    for hi_r, lo_r in zip(ests, ests[1:]):
        slack = 2 * math.hypot(hi_r.ci_half, lo_r.ci_half)
        worst = max(worst, hi_r.mu_hat - lo_r.mu_hat - slack)
    ok = worst <= 0
    vals = " ".join(f"{e.mu_hat:.3f}" for e in ests)
    record(6, ok, f"mu_hat at r=0.8..0.1: {vals}")
    assert ok


@pytest.mark.slow
@pytest.mark.parametrize("d,n", [(2, 60), (3, 40)])
def test_c07_scaling_trend(d, n):
    rs = [0.4, 0.2, 0.1, 0.05, 0.025]
    ests = [mu_cell(d, r, n) for r in rs]
    slope, _, _ = fit_loglog([e.delta for e in ests], [e.mu_hat for e in ests])
    cens = max(e.censor_rate for e in ests)
    ok = 0.6 <= slope <= 1.4 and cens < 0.2
    record(7, ok, f"d={d} n={n}: slope {slope:.3f}, max censor rate {cens:.3f}")
    assert ok


def test_c08_range_constant():
    (row,) = range_growth(3, [100_000], 1000, SEED, threads=None)
    ok = 0.62 <= row.per_step <= 0.70
    record(8, ok, f"E#R_n/n = {row.per_step:.4f} at n=1e5 over 1e3 walks")
    assert ok


def test_c09_hitting_regime():
    zs = [(5, 0), (0, 10), (7, 7), (12, 9), (20, 0)]
    parts, ok = [], True
    for z in zs:
        n = math.ceil(z[0] ** 2 + z[1] ** 2)
        est = hitting_probability(2, z, n, 10_000, SEED, threads=None)
        ok &= est.c_hat > 0.05
        parts.append(f"{z}:{est.c_hat:.3f}")
    record(9, ok, "c_hat " + " ".join(parts))
    assert ok


@pytest.mark.slow
def test_c10_renormalization_audit():
    p = RenormParams.compact(2, 0.6)
    m = MasterSeed(SEED).child("audit")
    A = BoxRegion(origin(2), 80)
    s_prem = a_prem = counter = 0
    for k in range(200):
        sub = m.child(k)
        c = Configuration(sub.child("occ"), 2, 0.6, A)
        o = WalkOracle(sub.child("walk"), 2)
        s = sowing_event(o, c, origin(2), p)
        a = activating_event(o, c, p)
        s_prem += s.premise and s.s1 and s.s2 and s.s3
        a_prem += a.premise and a.a1 and a.a2
        counter += s.counterexample + a.counterexample
    q = RenormParams.override_mode(2, 0.1)
    gm = MasterSeed(SEED).child("good")
    agree = good = 0
    for k in range(50):
        o, c = good_env(gm, q, k)
        fast = is_r_good(o, c, origin(2), q).good
        agree += fast == is_r_good_bruteforce(o, c, origin(2), q)
        good += fast
    ok = counter == 0 and s_prem > 0 and a_prem > 0 and agree == 50
    record(10, ok, f"200 seeds: S1-S3 held {s_prem}x, A1-A2 held {a_prem}x, {counter} counterexamples; "
                   f"is_r_good agrees {agree}/50 ({good} good)")
    assert ok


def _digests(out):
    return {f.name: hashlib.sha256(f.read_bytes()).hexdigest() for f in sorted(out.glob("*.csv"))}


def test_c11_cli_determinism(tmp_path):
    cmds = {
        "mu": ["mu", "--r", "0.3", "--x", "1,0", "--n", "15", "--trials", "24"],
        "sweep": ["sweep", "--r-list", "0.4,0.2,0.1", "--x", "1,0", "--n", "8", "--trials", "12"],
        "shape": ["shape", "--r", "0.4", "--t-list", "20,100", "--box-radius", "15"],
        "chain": ["chain-check", "--r", "0.3", "--trials", "12", "--indices", "3,2;4"],
        "good": ["good", "--r-list", "0.5", "--override-exponents", "--trials", "6"],
        "range": ["stats", "range", "--dim", "3", "--n-list", "1000,5000", "--trials", "16"],
        "hit": ["stats", "hit", "--z", "3,0", "--n", "20", "--trials", "200"],
    }
    diffs = []
    for name, argv in cmds.items():
        runs = []
        for tag, threads in (("a", "1"), ("b", "1"), ("c", "3")):
            out = tmp_path / f"{name}_{tag}"
            code = cli_main([*argv, "--seed", "11", "--threads", threads, "--out", str(out)])
            assert code == 0, name
            runs.append(_digests(out))
        if not runs[0] or not runs[0] == runs[1] == runs[2]:
            diffs.append(name)
    ok = not diffs
    record(11, ok, f"{len(cmds)} subcommands x 3 runs byte-identical" if ok else f"differ: {diffs}")
    assert ok
