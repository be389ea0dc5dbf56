"""Running-buffer minimization.

Labeled problems are solved over subsets ``S`` of objects already lifted
from their starts. The objects of ``S`` parked in the buffer are exactly
``b(S) = {o in S : o depends on some object outside S}``; picking an object
whose goal is still blocked adds a transient unit on top of ``|b(S)|``.

Unlabeled problems are solved over sets ``g`` of removed goal vertices; the
buffer holds ``max(0, |N(g)| - |g|)`` objects where ``N(g)`` are the start
vertices adjacent to ``g``.
"""
from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import networkx as nx
import numpy as np

from .depgraph import LabeledDepGraph, UnlabeledDepGraph

SEPPLAN_CONSTANT = 20.0 / (1.0 - math.sqrt(2.0 / 3.0))


class BudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class OrderingPlan:
    ordering: tuple
    rb_profile: tuple
    mrb: float
    buffered_ids: frozenset = frozenset()
    kind: str = "labeled"

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "ordering": list(self.ordering),
            "rb_profile": list(self.rb_profile),
            "mrb": self.mrb,
            "buffered_ids": sorted(self.buffered_ids),
        }


@dataclass
class SolverResult:
    mrb: float | None
    plan: OrderingPlan | None
    elapsed_ms: float
    complete: bool
    info: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "mrb": self.mrb,
            "ordering": list(self.plan.ordering) if self.plan else None,
            "rb_profile": list(self.plan.rb_profile) if self.plan else None,
            "elapsed_ms": self.elapsed_ms,
            "complete": self.complete,
            **({"info": self.info} if self.info else {}),
        }


class _Clock:
    def __init__(self, budget_ms: float | None):
        self.t0 = time.perf_counter()
        self.deadline = None if budget_ms is None else self.t0 + budget_ms / 1000.0
        self.ticks = 0

    def check(self):
        self.ticks += 1
        if self.deadline is not None and (self.ticks & 255) == 0 and time.perf_counter() > self.deadline:
            raise BudgetExceeded

    @property
    def ms(self) -> float:
        return (time.perf_counter() - self.t0) * 1000.0


def _bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


# ---------------------------------------------------------------------------
# replay


def replay_ordering(g: LabeledDepGraph, phi: Sequence[int], weights: Mapping[int, float] | None = None) -> OrderingPlan:
    """Execute an ordering: pick each object, send it to its goal if free, else buffer.

    After every pick, buffered objects whose dependencies are gone move to
    their goals in ascending id order. The profile has one entry after each
    pick and one after each such flush.
    """
    phi = tuple(phi)
    if sorted(phi) != sorted(g.nodes):
        raise ValueError("ordering is not a permutation of the graph's vertices")
    deps = {v: set() for v in g.nodes}
    for a, b in g.arcs:
        deps[a].add(b)
    w = (lambda o: 1) if weights is None else (lambda o: weights[o])
    at_start = set(g.nodes)
    buffer: set[int] = set()
    used: set[int] = set()
    occ = 0
    profile = []
    for o in phi:
        at_start.discard(o)
        if deps[o] & at_start:
            buffer.add(o)
            used.add(o)
            occ += w(o)
        profile.append(occ)
        for x in sorted(buffer):
            if not deps[x] & at_start:
                buffer.discard(x)
                occ -= w(x)
                profile.append(occ)
    return OrderingPlan(phi, tuple(profile), max(profile, default=0), frozenset(used))


def replay_removal(g: UnlabeledDepGraph, seq: Sequence[int]) -> OrderingPlan:
    """Running-buffer profile of a goal-removal sequence."""
    seq = tuple(seq)
    if sorted(seq) != sorted(g.goals):
        raise ValueError("sequence is not a permutation of the goal vertices")
    nbrs = {v: g.goal_neighbors(v) for v in g.goals}
    cleared: set[int] = set()
    profile = []
    for k, v in enumerate(seq, 1):
        cleared |= nbrs[v]
        profile.append(max(0, len(cleared) - k))
    return OrderingPlan(seq, tuple(profile), max(profile, default=0), frozenset(), "unlabeled")


# ---------------------------------------------------------------------------
# labeled helpers


class _Labeled:
    def __init__(self, g: LabeledDepGraph, weights: Mapping[int, float] | None = None):
        self.ids, self.deps = g.masks()
        self.n = len(self.ids)
        self.full = (1 << self.n) - 1
        if weights is None:
            self.w = [1] * self.n
        else:
            self.w = [weights[v] for v in self.ids]

    def occ(self, S: int) -> float:
        out = ~S & self.full
        return sum(self.w[x] for x in _bits(S) if self.deps[x] & out)

    def closure(self, S: int) -> tuple[int, list[int]]:
        """Pick every object whose goal is free until none is left.

        Such picks never enlarge the buffer and never hurt later steps.
        """
        added = []
        changed = True
        while changed:
            changed = False
            R = self.full & ~S
            for o in _bits(R):
                if not self.deps[o] & R & ~(1 << o):
                    S |= 1 << o
                    R &= ~(1 << o)
                    added.append(o)
                    changed = True
        return S, added


# ---------------------------------------------------------------------------
# dynamic programming over subsets


class DPTable:
    """Full subset table: best running buffer for every set of lifted objects."""

    def __init__(self, g: LabeledDepGraph, limit: int = 24):
        ids, deps = g.masks()
        n = len(ids)
        if n > limit:
            raise ValueError(f"graph has {n} vertices, dynamic programming limit is {limit}")
        self.g, self.ids, self.deps, self.n = g, ids, deps, n
        self.index = {v: k for k, v in enumerate(ids)}
        N = 1 << n
        masks = np.arange(N, dtype=np.int64)
        bsize = np.zeros(N, dtype=np.int16)
        for o in range(n):
            bsize += (((masks >> o) & 1) == 1) & ((deps[o] & ~masks) != 0)
        popc = np.bitwise_count(masks).astype(np.int64)
        T = np.full(N, np.iinfo(np.int16).max, dtype=np.int16)
        T[0] = 0
        last = np.full(N, -1, dtype=np.int8)
        order = np.argsort(popc, kind="stable")
        bounds = np.searchsorted(popc[order], np.arange(n + 2))
        big = np.int16(np.iinfo(np.int16).max)
        for k in range(1, n + 1):
            layer = order[bounds[k]:bounds[k + 1]]
            best = np.full(len(layer), big, dtype=np.int16)
            arg = np.full(len(layer), -1, dtype=np.int8)
            for o in range(n):
                has = ((layer >> o) & 1) == 1
                p = layer ^ (1 << o)
                to_buffer = (deps[o] & ~layer) != 0
                cost = np.where(to_buffer, np.maximum(T[p], bsize[p] + 1), T[p])
                cost = np.where(has, cost, big)
                better = cost < best
                best = np.where(better, cost, best)
                arg = np.where(better, o, arg)
            T[layer] = best
            last[layer] = arg
        self.T, self.last, self.bsize = T, last, bsize

    def _mask(self, S: Iterable[int]) -> int:
        m = 0
        for v in S:
            m |= 1 << self.index[v]
        return m

    def mrb(self, S: Iterable[int] | None = None) -> int:
        m = (1 << self.n) - 1 if S is None else self._mask(S)
        return int(self.T[m])

    def buffer(self, S: Iterable[int]) -> set[int]:
        m = self._mask(S)
        return {self.ids[o] for o in _bits(m) if self.deps[o] & ~m}

    def by_last_object(self, S: Iterable[int]) -> dict[int, int]:
        """Value of the table entry for ``S`` when each member is the last one lifted."""
        m = self._mask(S)
        out = {}
        for o in _bits(m):
            p = m ^ (1 << o)
            val = int(self.T[p])
            if self.deps[o] & ~m:
                val = max(val, int(self.bsize[p]) + 1)
            out[self.ids[o]] = val
        return out

    def witness(self) -> list[int]:
        m = (1 << self.n) - 1
        seq = []
        while m:
            o = int(self.last[m])
            seq.append(self.ids[o])
            m ^= 1 << o
        return seq[::-1]


def mrb_dp(g: LabeledDepGraph, limit: int = 24) -> SolverResult:
    clock = _Clock(None)
    table = DPTable(g, limit)
    plan = replay_ordering(g, table.witness())
    assert plan.mrb == table.mrb(), "witness does not reproduce the table value"
    return SolverResult(table.mrb(), plan, clock.ms, True)


# ---------------------------------------------------------------------------
# depth-first search with iterative deepening


def _dfs_labeled(L: _Labeled, cap: float, clock: _Clock, rng) -> list[int] | None:
    s0, seq0 = L.closure(0)
    if s0 == L.full:
        return seq0
    parent = {s0: (None, seq0)}

    def children(S):
        occ = L.occ(S)
        R = L.full & ~S
        out = []
        for o in _bits(R):
            blocked = L.deps[o] & R & ~(1 << o)
            if blocked and occ + L.w[o] > cap:
                continue
            child, add = L.closure(S | (1 << o))
            out.append((L.occ(child), child, [o] + add))
        if rng is not None:
            rng.shuffle(out)
        out.sort(key=lambda t: t[0])
        return iter(out)

    stack = [(s0, children(s0))]
    while stack:
        clock.check()
        S, it = stack[-1]
        nxt = next(it, None)
        if nxt is None:
            stack.pop()
            continue
        _, child, add = nxt
        if child in parent:
            continue
        parent[child] = (S, add)
        if child == L.full:
            seq = []
            cur = child
            while cur is not None:
                prev, add = parent[cur]
                seq = add + seq
                cur = prev
            return seq
        stack.append((child, children(child)))
    return None


class _Unlabeled:
    def __init__(self, g: UnlabeledDepGraph):
        self.goals, self.starts, self.nb = g.masks()
        self.m = len(self.goals)
        self.full = (1 << self.m) - 1

    def cover(self, G: int) -> int:
        N = 0
        for v in _bits(G):
            N |= self.nb[v]
        return N

    @staticmethod
    def rb(G: int, N: int) -> int:
        return max(0, N.bit_count() - G.bit_count())

    def closure(self, G: int, N: int) -> tuple[int, int, list[int]]:
        """Remove goals with at most one uncleared neighbor until none is left."""
        added = []
        changed = True
        while changed:
            changed = False
            for v in _bits(self.full & ~G):
                if (self.nb[v] & ~N).bit_count() <= 1:
                    G |= 1 << v
                    N |= self.nb[v]
                    added.append(v)
                    changed = True
        return G, N, added


def free_goals(g: UnlabeledDepGraph, removed: Iterable[int]) -> set[int]:
    """Goals with at most one start neighbor left once ``removed`` goals and their neighbors are gone."""
    removed = set(removed)
    cleared = set().union(*(g.goal_neighbors(v) for v in removed)) if removed else set()
    return {v for v in g.goals if v not in removed and len(g.goal_neighbors(v) - cleared) <= 1}


def _dfs_unlabeled(U: _Unlabeled, cap: int, clock: _Clock, rng) -> list[int] | None:
    G0, N0, seq0 = U.closure(0, 0)
    if G0 == U.full:
        return seq0
    parent = {G0: (None, seq0)}

    def children(G, N):
        out = []
        for v in _bits(U.full & ~G):
            G2, N2 = G | (1 << v), N | U.nb[v]
            if U.rb(G2, N2) > cap:
                continue
            G3, N3, add = U.closure(G2, N2)
            out.append((U.rb(G3, N3), G3, N3, [v] + add))
        if rng is not None:
            rng.shuffle(out)
        out.sort(key=lambda t: t[0])
        return iter(out)

    stack = [(G0, N0, children(G0, N0))]
    while stack:
        clock.check()
        G, N, it = stack[-1]
        nxt = next(it, None)
        if nxt is None:
            stack.pop()
            continue
        _, G2, N2, add = nxt
        if G2 in parent:
            continue
        parent[G2] = (G, add)
        if G2 == U.full:
            seq = []
            cur = G2
            while cur is not None:
                prev, add = parent[cur]
                seq = add + seq
                cur = prev
            return seq
        stack.append((G2, N2, children(G2, N2)))
    return None


def mrb_dfdp(
    g: LabeledDepGraph | UnlabeledDepGraph,
    budget_ms: float | None = None,
    weights: Mapping[int, float] | None = None,
    rng=None,
    start_cap: int = 0,
) -> SolverResult:
    """Exact MRB by iterative deepening on the buffer cap.

    ``weights`` (labeled only) makes each buffered object consume its weight
    of the cap; weights must be non-negative integers.
    """
    clock = _Clock(budget_ms)
    labeled = isinstance(g, LabeledDepGraph)
    if labeled:
        L = _Labeled(g, weights)
        top = sum(L.w)
        search = lambda cap: _dfs_labeled(L, cap, clock, rng)
        ids = L.ids
    else:
        U = _Unlabeled(g)
        top = U.m
        search = lambda cap: _dfs_unlabeled(U, cap, clock, rng)
        ids = U.goals
    cap = start_cap
    try:
        while cap <= top:
            seq = search(cap)
            if seq is not None:
                order = [ids[k] for k in seq]
                plan = replay_ordering(g, order, weights) if labeled else replay_removal(g, order)
                assert plan.mrb <= cap
                return SolverResult(plan.mrb, plan, clock.ms, True, {"cap": cap})
            cap += 1
    except BudgetExceeded:
        return SolverResult(None, None, clock.ms, False, {"lower_bound": cap})
    raise AssertionError("no ordering found below the trivial bound")


# ---------------------------------------------------------------------------
# best-first search for unlabeled instances


def mrb_pqs(g: UnlabeledDepGraph, budget_ms: float | None = None) -> SolverResult:
    """Best-first search over goal sets, keyed by the worst buffer so far.

    Only key nodes (no free goal left) are stored; free goals are removed
    greedily on the way.
    """
    clock = _Clock(budget_ms)
    U = _Unlabeled(g)
    G0, N0, seq0 = U.closure(0, 0)
    best = {G0: 0}
    parent = {G0: (None, seq0)}
    counter = itertools.count()
    heap = [(0, next(counter), G0, N0)]
    try:
        while heap:
            clock.check()
            cost, _, G, N = heapq.heappop(heap)
            if cost > best[G]:
                continue
            if G == U.full:
                seq = []
                cur = G
                while cur is not None:
                    prev, add = parent[cur]
                    seq = add + seq
                    cur = prev
                plan = replay_removal(g, [U.goals[k] for k in seq])
                assert plan.mrb == cost
                return SolverResult(cost, plan, clock.ms, True, {"key_nodes": len(best)})
            for v in _bits(U.full & ~G):
                G2, N2 = G | (1 << v), N | U.nb[v]
                c = max(cost, U.rb(G2, N2))
                G3, N3, add = U.closure(G2, N2)
                if c < best.get(G3, math.inf):
                    best[G3] = c
                    parent[G3] = (G, [v] + add)
                    heapq.heappush(heap, (c, next(counter), G3, N3))
    except BudgetExceeded:
        return SolverResult(None, None, clock.ms, False)
    raise AssertionError("search exhausted without reaching the goal set")


# ---------------------------------------------------------------------------
# separator-based construction


@dataclass
class SepPlanResult:
    plan: OrderingPlan
    bound: float
    fallbacks: int
    oversized: int

    @property
    def rb(self) -> float:
        return self.plan.mrb

    @property
    def within_bound(self) -> bool:
        return self.plan.mrb <= self.bound


def _min_cover(crossing: list[tuple], tops: set) -> set:
    if not crossing:
        return set()
    B = nx.Graph()
    B.add_edges_from(crossing)
    top = {v for v in B if v in tops}
    matching = nx.bipartite.hopcroft_karp_matching(B, top)
    return set(nx.bipartite.to_vertex_cover(B, matching, top))


def sepplan(g: UnlabeledDepGraph) -> SepPlanResult:
    """Divide-and-conquer goal-removal plan with an O(sqrt(n)) running buffer.

    Splits the vertex set with straight median cuts through the pose centres
    (vertical and horizontal cuts alternate with recursion depth). The cut
    edges are covered by a minimum vertex cover, which becomes the separator.
    """
    if g.start_pos is None or g.goal_pos is None:
        raise ValueError("sepplan needs pose centres for the separator")
    pos = {("s", s): g.start_pos[s] for s in g.starts}
    pos.update({("g", t): g.goal_pos[t] for t in g.goals})
    adj = {v: set() for v in pos}
    for s, t in g.edges:
        adj[("s", s)].add(("g", t))
        adj[("g", t)].add(("s", s))
    starts = {v for v in pos if v[0] == "s"}
    stats = {"fallbacks": 0, "oversized": 0}

    def trivial(V: set) -> tuple[list, set]:
        out = []
        V = set(V)
        changed = True
        while changed:
            changed = False
            for v in sorted(x for x in V if x[0] == "g"):
                nb = adj[v] & V
                if len(nb) <= 1:
                    out.append(v[1])
                    V.discard(v)
                    V -= nb
                    changed = True
        return out, V

    def split(order: list, k: int):
        A, B = set(order[:k]), set(order[k:])
        crossing = [(a, b) for a in A for b in adj[a] if b in B]
        C = _min_cover(crossing, starts)
        return A - C, B - C, C

    def separator(V: set, depth: int):
        size = len(V)
        cap_c = 2.0 * math.sqrt(2.0 * size)
        cap_side = 2.0 * size / 3.0

        def ok(parts):
            A, B, C = parts
            return len(A) <= cap_side and len(B) <= cap_side and len(C) <= cap_c

        axis = depth % 2
        order = sorted(V, key=lambda v: (pos[v][axis], pos[v][1 - axis], v))
        parts = split(order, size // 2)
        if ok(parts):
            return parts
        stats["fallbacks"] += 1
        best = parts
        lo, hi = math.ceil(size / 3), math.floor(2 * size / 3)
        for ax in (0, 1):
            order = sorted(V, key=lambda v: (pos[v][ax], pos[v][1 - ax], v))
            for k in range(max(1, lo), min(size - 1, hi) + 1):
                cand = split(order, k)
                if ok(cand):
                    return cand
                if len(cand[2]) < len(best[2]):
                    best = cand
        stats["oversized"] += 1
        return best

    def solve(V: set, depth: int) -> list:
        plan, V = trivial(V)
        if not any(v[0] == "g" for v in V):
            return plan
        A, B, C = separator(V, depth)
        goals_c = sorted(v for v in C if v[0] == "g")
        plan += [v[1] for v in goals_c]
        cleared = set()
        for v in goals_c:
            cleared |= adj[v] & V
        A2, B2 = A - cleared, B - cleared

        def delta(X):
            return sum(1 for v in X if v[0] == "g") - sum(1 for v in X if v[0] == "s")

        first, second = (A2, B2) if delta(A2) >= delta(B2) else (B2, A2)
        plan += solve(first, depth + 1)
        plan += solve(second, depth + 1)
        return plan

    seq = solve(set(pos), 0)
    plan = replay_removal(g, seq)
    n = len(g.goals)
    return SepPlanResult(plan, SEPPLAN_CONSTANT * math.sqrt(n), stats["fallbacks"], stats["oversized"])


# ---------------------------------------------------------------------------
# exhaustive oracles


def _perms(n: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(n))), dtype=np.int64).reshape(-1, n)


def _subset_table(n: int, fn) -> np.ndarray:
    masks = np.arange(1 << n, dtype=np.int64)
    return fn(masks)


def ordering_rb_all(g: LabeledDepGraph) -> tuple[np.ndarray, np.ndarray]:
    """Every ordering of ``g`` (as index permutations) with its running buffer."""
    ids, deps = g.masks()
    n = len(ids)
    perms = _perms(n)
    if n == 0:
        return perms, np.zeros(1, dtype=np.int64)
    bits = np.left_shift(1, perms)
    after = np.cumsum(bits, axis=1)
    before = after - bits
    dep = np.array(deps, dtype=np.int64)

    def buffered(masks):
        out = np.zeros(len(masks), dtype=np.int64)
        for o in range(n):
            out += (((masks >> o) & 1) == 1) & ((dep[o] & ~masks) != 0)
        return out

    bsize = _subset_table(n, buffered)
    transient = (dep[perms] & ~after) != 0
    rb = (bsize[before] + transient).max(axis=1)
    return perms, rb


def mrb_bruteforce(g: LabeledDepGraph | UnlabeledDepGraph, limit: int = 9) -> int:
    """Exact MRB by enumerating every ordering (labeled) or removal sequence (unlabeled)."""
    if isinstance(g, LabeledDepGraph):
        if g.n > limit:
            raise ValueError("graph too large for enumeration")
        return int(ordering_rb_all(g)[1].min())
    goals, starts, nb = g.masks()
    m = len(goals)
    if m > limit:
        raise ValueError("graph too large for enumeration")
    if m == 0:
        return 0
    nbarr = np.array(nb, dtype=np.int64)

    def covered(masks):
        out = np.zeros(len(masks), dtype=np.int64)
        for v in range(m):
            out |= np.where(((masks >> v) & 1) == 1, nbarr[v], 0)
        return np.bitwise_count(out).astype(np.int64)

    cover = _subset_table(m, covered)
    perms = _perms(m)
    prefix = np.cumsum(np.left_shift(1, perms), axis=1)
    rb = np.maximum(0, cover[prefix] - np.arange(1, m + 1)).max(axis=1)
    return int(rb.min())


def _undirected(graph) -> tuple[list, list[tuple]]:
    if isinstance(graph, nx.Graph):
        return sorted(graph.nodes), list(graph.edges)
    nodes, edges = graph
    return sorted(nodes), list(edges)


def vertex_separation(graph, phi: Sequence) -> int:
    """Largest number of already-placed vertices with a later neighbor."""
    nodes, edges = _undirected(graph)
    pos = {v: k for k, v in enumerate(phi)}
    if sorted(pos) != nodes:
        raise ValueError("ordering is not a permutation of the vertices")
    last = {v: pos[v] for v in nodes}
    for u, v in edges:
        last[u] = max(last[u], pos[v])
        last[v] = max(last[v], pos[u])
    best = 0
    for i in range(len(nodes)):
        best = max(best, sum(1 for v in nodes if pos[v] <= i < last[v]))
    return best


def vertex_separation_bruteforce(graph, limit: int = 9) -> int:
    nodes, edges = _undirected(graph)
    n = len(nodes)
    if n > limit:
        raise ValueError("graph too large for enumeration")
    if n == 0:
        return 0
    idx = {v: k for k, v in enumerate(nodes)}
    nbr = np.zeros(n, dtype=np.int64)
    for u, v in edges:
        if u != v:
            nbr[idx[u]] |= 1 << idx[v]
            nbr[idx[v]] |= 1 << idx[u]

    def boundary(masks):
        out = np.zeros(len(masks), dtype=np.int64)
        for o in range(n):
            out += (((masks >> o) & 1) == 1) & ((nbr[o] & ~masks) != 0)
        return out

    table = _subset_table(n, boundary)
    prefix = np.cumsum(np.left_shift(1, _perms(n)), axis=1)
    return int(table[prefix].max(axis=1).min())
