from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from frogsim.chains import ChainSpec, build_chain
from frogsim.dynamics import Censored, ExtendedTime, Finite, INFINITE, passage_time
from frogsim.lattice import BoxRegion, Norm, box_array, box_cardinality, distance, neighbors, norm, origin
from frogsim.randomness import Configuration, MasterSeed, WalkOracle

coord = st.integers(-50, 50)
site2 = st.tuples(coord, coord)
site3 = st.tuples(coord, coord, coord)
sites = st.one_of(site2, site3)
seeds = st.integers(0, 2**63 - 1)
quick = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@given(st.data())
def test_triangle_inequality(data):
    d = data.draw(st.sampled_from([2, 3]))
    pt = st.tuples(*[coord] * d)
    a, b, c = data.draw(pt), data.draw(pt), data.draw(pt)
    for kind in (Norm.L1, Norm.LINF):
        assert distance(a, c, kind) <= distance(a, b, kind) + distance(b, c, kind)


@given(sites)
def test_neighbour_symmetry(p):
    for q in neighbors(p):
        assert p in neighbors(q) and distance(p, q) == 1
    for q in neighbors(p, star=True):
        assert p in neighbors(q, star=True) and distance(p, q, Norm.LINF) == 1
    assert len(neighbors(p)) == 2 * len(p)
    assert len(neighbors(p, star=True)) == 3 ** len(p) - 1


@given(st.sampled_from([1, 2, 3]), st.integers(0, 6), st.sampled_from(list(Norm)))
def test_box_cardinality(d, radius, kind):
    b = BoxRegion(origin(d), radius, kind)
    pts = box_array(b)
    assert len(pts) == box_cardinality(d, radius, kind) == len(b)
    assert all(tuple(p) in b for p in pts.tolist())


times = st.one_of(st.integers(0, 100).map(Finite), st.integers(0, 100).map(Censored), st.just(INFINITE))


@given(times, times, times)
def test_extended_time_total_order(a, b, c):
    assert (a < b) + (b < a) + (a._key() == b._key()) == 1
    if a < b and b < c:
        assert a < c
    assert not INFINITE < a


@given(st.integers(0, 100))
def test_extended_time_tiers(k):
    assert Finite(k) < Censored(k) < INFINITE
    assert Finite(k) + 3 == Finite(k + 3) and Censored(k) + 3 == Censored(k)


@quick
@given(seeds, st.sampled_from([2, 3]), st.integers(1, 300))
def test_walk_steps_are_unit(seed, d, n):
    path = WalkOracle(MasterSeed(seed), d).path(origin(d), n)
    assert path.shape == (n + 1, d)
    steps = abs(path[1:] - path[:-1]).sum(axis=1)
    assert (steps == 1).all()


@quick
@given(seeds, st.floats(0.05, 1.0), st.tuples(st.integers(-6, 6), st.integers(-6, 6)))
def test_passage_at_least_distance(seed, r, y):
    m = MasterSeed(seed)
    A = BoxRegion(origin(2), 8)
    c = Configuration(m.child("occ"), 2, r, A, force_origin=True)
    o = WalkOracle(m.child("walk"), 2)
    p = passage_time(o, c, origin(2), y, A, 5000)
    if p.value.is_finite:
        assert p.value.value >= norm(y)
        assert sum(p.per_leg_times) == p.value.value
    else:
        assert p.value.is_censored


@quick
@given(seeds, st.floats(0.1, 1.0), st.lists(st.integers(1, 4), min_size=1, max_size=3))
def test_chain_sigma_strictly_increasing(seed, r, idx):
    m = MasterSeed(seed)
    c = Configuration(m.child("occ"), 2, r, None, force_origin=True)
    o = WalkOracle(m.child("walk"), 2)
    tr = build_chain(o, c, ChainSpec(tuple(idx)), 20000)
    for legs in tr.leg_times:
        fin = [t.value for t in legs if t.is_finite]
        assert fin == sorted(set(fin))
    seen = [s for leg in tr.visited_occupied for s in leg]
    assert len(seen) == len(set(seen))
    assert all(c.is_occupied(s) for s in seen)
