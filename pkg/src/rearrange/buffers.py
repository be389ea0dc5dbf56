"""Total-buffer minimization and the mixed-integer model export.

The minimum number of objects that ever visit a buffer equals the minimum
feedback vertex set of the labeled dependency graph. Adding a cap on the
running buffer turns this into a search over lifting orders.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Mapping

import networkx as nx

from .depgraph import LabeledDepGraph
from .rbm import BudgetExceeded, OrderingPlan, _bits, _Clock, _Labeled, replay_ordering

EXACT_LIMIT = 20


@dataclass(frozen=True)
class FvsResult:
    fvs: frozenset
    certificate: tuple
    weight: float
    complete: bool = True

    @property
    def size(self) -> int:
        return len(self.fvs)

    def verify(self, g: LabeledDepGraph) -> bool:
        """Certificate must be a topological order of ``g`` minus the set."""
        rest = [v for v in g.nodes if v not in self.fvs]
        if sorted(self.certificate) != sorted(rest):
            return False
        pos = {v: k for k, v in enumerate(self.certificate)}
        return all(pos[a] < pos[b] for a, b in g.arcs if a in pos and b in pos)


def _adjacency(g: LabeledDepGraph) -> dict[int, set[int]]:
    adj = {v: set() for v in g.nodes}
    for a, b in g.arcs:
        adj[a].add(b)
    return adj


def _sub(adj: dict[int, set[int]], keep: set[int]) -> dict[int, set[int]]:
    return {v: adj[v] & keep for v in keep}


def _prune(adj: dict[int, set[int]]) -> dict[int, set[int]]:
    """Drop vertices that cannot lie on a cycle (no in- or no out-arcs)."""
    keep = set(adj)
    while True:
        indeg = {v: 0 for v in keep}
        for v in keep:
            for w in adj[v] & keep:
                indeg[w] += 1
        drop = {v for v in keep if indeg[v] == 0 or not adj[v] & keep}
        if not drop:
            return _sub(adj, keep)
        keep -= drop


def _components(adj: dict[int, set[int]]) -> list[set[int]]:
    dg = nx.DiGraph()
    dg.add_nodes_from(adj)
    dg.add_edges_from((a, b) for a in adj for b in adj[a])
    return [c for c in nx.strongly_connected_components(dg) if len(c) > 1]


def _shortest_cycle(adj: dict[int, set[int]]) -> list[int]:
    best = None
    for s in sorted(adj):
        prev = {s: None}
        frontier = [s]
        found = None
        while frontier and found is None:
            nxt = []
            for u in frontier:
                for w in sorted(adj[u]):
                    if w == s:
                        found = u
                        break
                    if w not in prev:
                        prev[w] = u
                        nxt.append(w)
                if found is not None:
                    break
            frontier = nxt
        if found is not None:
            cyc = []
            u = found
            while u is not None:
                cyc.append(u)
                u = prev[u]
            if best is None or len(cyc) < len(best):
                best = cyc
                if len(best) == 2:
                    break
    return best or []


def _lower_bound(adj, w) -> float:
    return sum(min(w[v] for v in c) for c in _components(adj))


def _exact_component(adj, w, clock: _Clock) -> tuple[float, set[int]]:
    """Depth-first branch and bound: every cycle contains a member of the answer."""
    greedy = _greedy(adj, w)
    best = [sum(w[v] for v in greedy), set(greedy)]

    def go(a, chosen: set[int], cost: float):
        clock.check()
        a = _prune(a)
        if not a:
            if cost < best[0] - 1e-12:
                best[0], best[1] = cost, set(chosen)
            return
        if cost + _lower_bound(a, w) >= best[0] - 1e-12:
            return
        cyc = _shortest_cycle(a)
        for v in sorted(cyc, key=lambda x: (w[x], -len(a[x]), x)):
            chosen.add(v)
            go(_sub(a, set(a) - {v}), chosen, cost + w[v])
            chosen.discard(v)

    go(adj, set(), 0.0)
    return best[0], best[1]


def _greedy(adj, w) -> set[int]:
    a = _prune(adj)
    chosen = set()
    while a:
        indeg = {v: 0 for v in a}
        for v in a:
            for x in a[v]:
                indeg[x] += 1
        v = max(a, key=lambda x: (indeg[x] * len(a[x]) / max(w[x], 1e-9), -x))
        chosen.add(v)
        a = _prune(_sub(a, set(a) - {v}))
    for v in sorted(chosen, key=lambda x: -w[x]):
        rest = chosen - {v}
        if _is_acyclic(_sub(adj, set(adj) - rest)):
            chosen = rest
    return chosen


def _is_acyclic(adj) -> bool:
    return not _prune(adj)


def min_fvs(
    g: LabeledDepGraph,
    weights: Mapping[int, float] | None = None,
    exact_limit: int = EXACT_LIMIT,
    budget_ms: float | None = None,
) -> FvsResult:
    """Minimum (weighted) feedback vertex set, solved per strongly connected component.

    Components larger than ``exact_limit`` fall back to a greedy answer and
    the result is flagged incomplete, as is any budget overrun.
    """
    w = {v: 1.0 for v in g.nodes} if weights is None else {v: float(weights[v]) for v in g.nodes}
    if any(x < 0 for x in w.values()):
        raise ValueError("weights must be non-negative")
    adj = _adjacency(g)
    clock = _Clock(budget_ms)
    chosen: set[int] = set()
    complete = True
    for comp in sorted(_components(_prune(adj)), key=min):
        sub = _sub(adj, comp)
        if len(comp) > exact_limit:
            chosen |= _greedy(sub, w)
            complete = False
            continue
        try:
            _, s = _exact_component(sub, w, clock)
        except BudgetExceeded:
            s = _greedy(sub, w)
            complete = False
        chosen |= s
    rest = g.subgraph(v for v in g.nodes if v not in chosen).digraph()
    cert = tuple(nx.lexicographical_topological_sort(rest))
    return FvsResult(frozenset(chosen), cert, sum(w[v] for v in chosen), complete)


# ---------------------------------------------------------------------------
# total buffers under a running-buffer cap


@dataclass
class TotalBufferResult:
    total: int | None
    plan: OrderingPlan | None
    complete: bool
    info: dict = field(default_factory=dict)


def _residual_scc_count(L: _Labeled, R: int) -> int:
    adj = {o: set(_bits(L.deps[o] & R)) for o in _bits(R)}
    return len(_components(_prune(adj)))


def total_buffers_given_mrb(
    g: LabeledDepGraph,
    mrb_cap: float | None,
    budget_ms: float | None = None,
) -> TotalBufferResult:
    """Fewest buffered objects over all lifting orders whose running buffer stays within ``mrb_cap``.

    Branch and bound over sets of lifted objects. Objects whose goals are
    free are lifted eagerly; the bound adds one buffer per nontrivial
    strongly connected component left.
    """
    cap = math.inf if mrb_cap is None else mrb_cap
    L = _Labeled(g)
    clock = _Clock(budget_ms)
    memo: dict[int, int] = {}
    best: list = [math.inf, None]

    def go(S: int, cost: int, seq: list[int]):
        clock.check()
        S, add = L.closure(S)
        seq = seq + add
        if S == L.full:
            if cost < best[0]:
                best[0], best[1] = cost, seq
            return
        if memo.get(S, math.inf) <= cost:
            return
        memo[S] = cost
        R = L.full & ~S
        if cost + _residual_scc_count(L, R) >= best[0]:
            return
        occ = L.occ(S)
        moves = []
        for o in _bits(R):
            if L.deps[o] & R & ~(1 << o):
                if occ + 1 > cap:
                    continue
                S2 = S | (1 << o)
                moves.append((L.occ(S2), o))
        for _, o in sorted(moves):
            go(S | (1 << o), cost + 1, seq + [o])

    complete = True
    try:
        go(0, 0, [])
    except BudgetExceeded:
        complete = False
    if best[1] is None:
        if complete:
            raise ValueError(f"no ordering keeps the running buffer within {mrb_cap}")
        return TotalBufferResult(None, None, False, {"elapsed_ms": clock.ms})
    plan = replay_ordering(g, [L.ids[k] for k in best[1]])
    assert len(plan.buffered_ids) == best[0] and plan.mrb <= cap
    return TotalBufferResult(int(best[0]), plan, complete, {"elapsed_ms": clock.ms})


# ---------------------------------------------------------------------------
# mixed-integer model in CPLEX LP format


def mip_constraint_counts(n: int) -> dict[str, int]:
    """Closed-form row counts per constraint family for ``n`` objects.

    Double-sided families are written as two rows each (``lo``/``hi``).
    """
    pairs, triples = math.comb(n, 2), math.comb(n, 3)
    counts = {
        "c1": 2 * triples,
        "c2": n,
        "c3": n,
        "c4": n * n,
        "c5": n * n,
        "c6": 2 * pairs,
        "c7": 2 * pairs,
        "c8": n,
    }
    counts["total"] = sum(counts.values())
    return counts


def mip_variable_counts(n: int) -> dict[str, int]:
    return {"y": math.comb(n, 2), "g": n * n, "b": n * n, "B": n, "K": 1}


def _num(x: float) -> str:
    if float(x).is_integer():
        return str(int(x))
    return repr(float(x))


def _terms(terms: list[tuple[float, str]]) -> str:
    parts = []
    for c, v in terms:
        if c == 0:
            continue
        mag = abs(c)
        coef = "" if mag == 1 else _num(mag) + " "
        parts.append(f"{'-' if c < 0 else '+'} {coef}{v}")
    if not parts:
        parts = ["0 K"]
    body, line = "", ""
    for p in parts:
        if len(line) + len(p) > 200:
            body += line + "\n   "
            line = ""
        line += " " + p
    return body + line


def _row(terms: list[tuple[float, str]], sense: str, rhs: float) -> str:
    return f"{_terms(terms)} {sense} {_num(rhs)}"


def export_mip(g: LabeledDepGraph, alpha: float = 1.0, beta: float | None = None) -> str:
    """Write the lifting-order model as CPLEX LP text.

    Objects are indexed 1..n in ascending id order. Variables are
    ``y_i_j`` (i<j, i lifted before j), ``g_i_j`` (j's goal free when i is
    lifted), ``b_i_j`` (j buffered when i is lifted), ``B_j`` and ``K``.
    The default ``beta`` is ``n`` so the running buffer dominates.
    """
    ids = list(g.nodes)
    n = len(ids)
    if beta is None:
        beta = float(n)
    idx = {v: k + 1 for k, v in enumerate(ids)}
    c = [[0] * (n + 1) for _ in range(n + 1)]
    for a, b in g.arcs:
        c[idx[a]][idx[b]] = 1
    R = range(1, n + 1)

    def y(i, j):
        return f"y_{i}_{j}"

    out = ["\\ rearrangement lifting-order model"]
    out += [f"\\ index {idx[v]} = object {v}" for v in ids]
    obj = [(alpha, f"B_{i}") for i in R] + [(beta, "K")]
    out.append("Minimize")
    out.append(" obj:" + _terms(obj))
    out.append("Subject To")
    for i, j, k in combinations(R, 3):
        t = [(1, y(i, j)), (1, y(j, k)), (-1, y(i, k))]
        out.append(f" c1lo_{i}_{j}_{k}:" + _row(t, ">=", 0))
        out.append(f" c1hi_{i}_{j}_{k}:" + _row(t, "<=", 1))
    for j in R:
        t = [(1, f"B_{j}")] + [(-1.0 / n, f"b_{i}_{j}") for i in R]
        out.append(f" c2_{j}:" + _row(t, ">=", 0))
    for i in R:
        t = [(1, "K")] + [(-1, f"b_{i}_{j}") for j in R]
        out.append(f" c3_{i}:" + _row(t, ">=", 0))
    for i in R:
        for j in R:
            before = [k for k in R if k < i]
            after = [k for k in R if k > i]
            const = sum(c[j][k] for k in before)
            t = [(-c[j][k] / n, y(k, i)) for k in before] + [(c[j][k] / n, y(i, k)) for k in after]
            out.append(f" c4_{i}_{j}:" + _row(t + [(1, f"g_{i}_{j}")], "<=", 1 - const / n))
    for i in R:
        for j in R:
            before = [k for k in R if k < i]
            after = [k for k in R if k > i]
            const = sum(c[j][k] for k in before)
            t = [(-c[j][k], y(k, i)) for k in before] + [(c[j][k], y(i, k)) for k in after]
            out.append(f" c5_{i}_{j}:" + _row(t + [(1, f"g_{i}_{j}")], ">=", 1 - const))
    for i, j in combinations(R, 2):
        out.append(f" c6lo_{i}_{j}:" + _row([(0.5, f"g_{i}_{j}"), (0.5, y(i, j)), (1, f"b_{i}_{j}")], "<=", 1))
        out.append(f" c6hi_{i}_{j}:" + _row([(1, f"g_{i}_{j}"), (1, y(i, j)), (1, f"b_{i}_{j}")], ">=", 1))
    for i, j in combinations(R, 2):
        out.append(f" c7lo_{i}_{j}:" + _row([(0.5, f"g_{j}_{i}"), (-0.5, y(i, j)), (1, f"b_{j}_{i}")], "<=", 0.5))
        out.append(f" c7hi_{i}_{j}:" + _row([(1, f"g_{j}_{i}"), (-1, y(i, j)), (1, f"b_{j}_{i}")], ">=", 0))
    for i in R:
        out.append(f" c8_{i}:" + _row([(1, f"b_{i}_{i}"), (1, f"g_{i}_{i}")], "=", 1))
    out.append("Bounds")
    out.append(" K >= 0")
    out.append("Binaries")
    binaries = [y(i, j) for i, j in combinations(R, 2)]
    binaries += [f"{p}_{i}_{j}" for p in ("g", "b") for i in R for j in R]
    binaries += [f"B_{i}" for i in R]
    for k in range(0, len(binaries), 10):
        out.append(" " + " ".join(binaries[k:k + 10]))
    out.append("Generals")
    out.append(" K")
    out.append("End")
    return "\n".join(out) + "\n"
