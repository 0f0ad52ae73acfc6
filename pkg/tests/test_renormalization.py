import math

import numpy as np
import pytest

from frogsim.dynamics import DomainError
from frogsim.lattice import BoxRegion, box_array, origin
from frogsim.randomness import Configuration, MasterSeed, WalkOracle
from frogsim.renormalization import (
    RenormParams,
    activating_event,
    estimate_good_probability,
    good_distance,
    good_env,
    is_r_good,
    is_r_good_bruteforce,
    q_box,
    run_recursion,
    sowing_event,
    star_neighbors,
    theta_boxes,
)


def world(seed, r, radius, d=2):
    m = MasterSeed(seed)
    A = BoxRegion(origin(d), radius)
    return WalkOracle(m.child("walk"), d), Configuration(m.child("occ"), d, r, A)


def sites(box):
    return {tuple(p) for p in box_array(box).tolist()}


def test_physical_floors():
    p = RenormParams.physical(2, 0.3)
    assert p.R == math.ceil(0.3 ** -1)
    assert p.good_radius == math.floor(0.3 ** -(0.5 + 1 / 24))
    assert p.n_r == 121 * 2 * math.ceil(0.3 ** -(1 + 2 / 24))
    with pytest.raises(ValueError):
        RenormParams.physical(2, 0.3, c_ckn=1.5)


@pytest.mark.parametrize("p", [RenormParams.physical(2, 0.1), RenormParams.override_mode(2, 0.35),
                               RenormParams.physical(3, 0.2)])
def test_theta_geometry(p):
    V = [tuple(q) for q in box_array(BoxRegion(origin(p.d), p.v_radius)).tolist()]
    outs = []
    for v in V:
        tb = theta_boxes(v, p)
        t_in, t, outer = sites(tb.theta_in), sites(tb.theta), sites(tb.outer)
        out = outer - t
        assert t_in <= t
        assert not (t & out)
        assert set(tb.out_sites()) == out
        outs.append(out)
    for i in range(len(outs)):
        for j in range(i + 1, len(outs)):
            assert not outs[i] & outs[j]


def test_empty_center_not_good():
    p = RenormParams.override_mode(2, 0.5)
    o, c = world(1, 1e-15, 2 * p.R)
    rep = is_r_good(o, c, origin(2), p)
    assert not rep.good and rep.reason == "empty central box"


def test_dense_override_good():
    p = RenormParams.override_mode(2, 1.0, good_budget=10_000.0)
    o, c = world(1, 1.0, 2 * p.R)
    assert is_r_good(o, c, origin(2), p).good


def test_good_needs_domain():
    p = RenormParams.override_mode(2, 0.5)
    o, c = world(1, 0.5, p.R)
    with pytest.raises(DomainError):
        is_r_good(o, c, origin(2), p)


@pytest.mark.parametrize("seed", range(8))
def test_good_matches_bruteforce_override(seed):
    p = RenormParams.override_mode(2, 0.1)
    o, c = good_env(MasterSeed(99), p, seed)
    assert is_r_good(o, c, origin(2), p).good == is_r_good_bruteforce(o, c, origin(2), p)


def test_good_distance():
    grid = {(i, j): True for i in range(5) for j in range(5)}
    assert good_distance(grid, (0, 0), (0, 0)) == 0
    assert good_distance(grid, (0, 0), (4, 4)) == 8
    grid[(2, 2)] = False
    assert good_distance(grid, (2, 2), (0, 0)) == math.inf
    wall = {(i, j): j != 2 for i in range(3) for j in range(5)}
    assert good_distance(wall, (0, 0), (0, 4)) == math.inf


def test_sowing_empty_center():
    p = RenormParams.override_mode(2, 0.5)
    o, c = world(2, 1e-15, 80)
    rep = sowing_event(o, c, origin(2), p)
    assert not rep.s1 and not rep.event


def test_sowing_dense_tiny_boxes():
    p = RenormParams.override_mode(2, 1.0, scale_=1, theta_step=2, n_r=50, sow_budget=10_000.0)
    o, c = world(2, 1.0, 40)
    assert sowing_event(o, c, origin(2), p).event


def test_activating_empty_center():
    p = RenormParams.compact(2, 0.5)
    o, c = world(3, 1e-15, 80)
    assert not activating_event(o, c, p).event


def test_activating_lone_site():
    # a single occupied site with Lambda = {x}: T(x, x) = 0 meets any budget
    p = RenormParams.compact(2, 0.5, lambda_radius=0, theta_in=0)
    m = MasterSeed(4)
    c = Configuration(m.child("occ"), 2, 1e-15, BoxRegion(origin(2), 80), force_origin=True)
    o = WalkOracle(m.child("walk"), 2)
    assert activating_event(o, c, p).event


def test_compact_audit_small():
    p = RenormParams.compact(2, 0.6)
    for s in range(6):
        o, c = world(100 + s, 0.6, 80)
        srep = sowing_event(o, c, origin(2), p)
        arep = activating_event(o, c, p)
        assert srep.premise and not srep.counterexample
        assert arep.premise and not arep.counterexample


def test_recursion_empty_first_box():
    p = RenormParams.physical(2, 0.2)
    o, c = world(5, 1e-15, 10 * p.q_step + p.q_half)
    st = run_recursion(o, c, (1, 0), p, max_index=5)
    assert st.sigma == 0 and st.sizes == [0]


def test_recursion_r_one_never_triggers():
    p = RenormParams.override_mode(2, 1.0, q_half=1, q_step=3, nu=5)
    assert p.gamma_threshold == 0
    o, c = world(5, 1.0, 3 * 4 + 1)
    st = run_recursion(o, c, (1, 0), p, max_index=4)
    assert st.sigma is None and st.max_index_reached


def test_recursion_sets_in_boxes():
    p = RenormParams.physical(2, 0.3)
    o, c = world(6, 0.3, 6 * p.q_step + p.q_half)
    st = run_recursion(o, c, (0, 1), p, max_index=6, keep_sets=True)
    for i, g in enumerate(st.gammas):
        box = q_box(i, (0, 1), p)
        assert all(tuple(z) in box and c.is_occupied(z) for z in g.tolist())


def test_recursion_bad_direction():
    p = RenormParams.physical(2, 0.3)
    o, c = world(6, 0.3, 200)
    with pytest.raises(ValueError):
        run_recursion(o, c, (1, 1), p)


def test_good_probability_dense():
    rows = estimate_good_probability([0.9], lambda r: RenormParams.override_mode(2, r), 20, 3)
    assert rows[0].p_hat >= 0.9 and rows[0].ci_low <= rows[0].p_hat <= rows[0].ci_high
    with pytest.raises(ValueError):
        estimate_good_probability([0.9], lambda r: RenormParams.override_mode(2, r), 0, 3)


def test_star_neighbors():
    assert len(star_neighbors((0, 0))) == 8
    assert np.all(np.asarray(star_neighbors((0, 0, 0))).shape == (26, 3))
