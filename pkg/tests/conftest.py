import heapq
import itertools
import math

import pytest

from frogsim.dynamics import Censored, Finite, INFINITE
from frogsim.lattice import BoxRegion, origin
from frogsim.randomness import Configuration, MasterSeed, WalkOracle

ACCEPTANCE_LINES: list[str] = []


def record(criterion: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'} criterion {criterion:>2}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


def first_visits(o: WalkOracle, u, horizon: int) -> dict:
    """Replay S^u and keep the first index of every site."""
    seen = {}
    for k, q in enumerate(map(tuple, o.path(u, horizon).tolist())):
        seen.setdefault(q, k)
    return seen


def brute_passage(o: WalkOracle, c: Configuration, x, y, A: BoxRegion, horizon: int):
    """Exhaustive minimum over simple chains of occupied sites of A, by replay.

    Returns Finite, Censored(horizon) or INFINITE.
    """
    x, y = tuple(x), tuple(y)
    if not c.is_occupied(x):
        return INFINITE
    if x == y:
        return Finite(0)
    occ = [tuple(p) for p in c.occupied_in(A).tolist() if tuple(p) != x]
    fv = {u: first_visits(o, u, horizon) for u in [x] + occ}
    best = math.inf

    def dfs(u, used, acc):
        nonlocal best
        if acc >= best:
            return
        k = fv[u].get(y)
        if k is not None and acc + k < best:
            best = acc + k
        for w in occ:
            if w in used or w == y:
                continue
            kw = fv[u].get(w)
            if kw is not None and acc + kw < best:
                used.add(w)
                dfs(w, used, acc + kw)
                used.discard(w)

    dfs(x, {x}, 0)
    if best <= horizon:
        return Finite(best)
    return Censored(horizon)


def replay_dijkstra(o: WalkOracle, c: Configuration, x, y, A: BoxRegion, horizon: int):
    """Textbook heap Dijkstra over occupied sites of A with replayed hitting times."""
    x, y = tuple(x), tuple(y)
    if not c.is_occupied(x):
        return INFINITE
    occ = {tuple(p) for p in c.occupied_in(A).tolist()}
    dist = {x: 0}
    pq = [(0, x)]
    best = math.inf
    done = set()
    while pq:
        du, u = heapq.heappop(pq)
        if u in done or du >= best:
            continue
        done.add(u)
        for w, k in first_visits(o, u, horizon - du).items():
            if w == y:
                best = min(best, du + k)
            if w in occ and du + k < dist.get(w, math.inf):
                dist[w] = du + k
                heapq.heappush(pq, (du + k, w))
    return Finite(best) if best <= horizon else Censored(horizon)


def small_instance(seed: int, radius: int = 6, r: float = 0.06):
    m = MasterSeed(seed)
    A = BoxRegion(origin(2), radius)
    c = Configuration(m.child("occ"), 2, r, A, force_origin=True)
    o = WalkOracle(m.child("walk"), 2)
    return o, c, A


@pytest.fixture
def rng_sites():
    def gen(n, d, lo, hi, seed=0):
        import numpy as np

        rng = np.random.default_rng(seed)
        return [tuple(int(v) for v in rng.integers(lo, hi + 1, size=d)) for _ in range(n)]

    return gen


def all_subsets(items):
    for k in range(1, len(items) + 1):
        yield from itertools.combinations(items, k)
