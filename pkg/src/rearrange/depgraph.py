"""Labeled and unlabeled dependency graphs derived from pose overlaps."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import networkx as nx

from .geometry import Disc, Instance, Polygon, collide


@dataclass(frozen=True)
class LabeledDepGraph:
    """Directed graph; arc (i, j) means object i's goal overlaps object j's start."""

    nodes: tuple[int, ...]
    arcs: frozenset[tuple[int, int]]
    weights: Mapping[int, float] | None = None
    self_blocked: frozenset[int] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(sorted(self.nodes)))
        object.__setattr__(self, "arcs", frozenset((int(a), int(b)) for a, b in self.arcs))
        for a, b in self.arcs:
            if a == b:
                raise ValueError("self arcs are not allowed")

    @classmethod
    def from_arcs(cls, nodes: Iterable[int], arcs: Iterable[tuple[int, int]], weights=None) -> "LabeledDepGraph":
        return cls(tuple(nodes), frozenset(arcs), weights)

    @classmethod
    def bidirected(cls, nodes: Iterable[int], edges: Iterable[tuple[int, int]]) -> "LabeledDepGraph":
        arcs = set()
        for u, v in edges:
            if u != v:
                arcs.add((u, v))
                arcs.add((v, u))
        return cls(tuple(nodes), frozenset(arcs))

    @property
    def n(self) -> int:
        return len(self.nodes)

    def deps(self, i: int) -> set[int]:
        return {b for a, b in self.arcs if a == i}

    def digraph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.nodes)
        g.add_edges_from(self.arcs)
        return g

    def subgraph(self, keep: Iterable[int]) -> "LabeledDepGraph":
        keep = set(keep)
        w = None if self.weights is None else {k: v for k, v in self.weights.items() if k in keep}
        return LabeledDepGraph(
            tuple(k for k in self.nodes if k in keep),
            frozenset((a, b) for a, b in self.arcs if a in keep and b in keep),
            w,
            frozenset(self.self_blocked & keep),
        )

    def with_weights(self, weights: Mapping[int, float] | None) -> "LabeledDepGraph":
        return LabeledDepGraph(self.nodes, self.arcs, weights, self.self_blocked)

    def masks(self) -> tuple[list[int], list[int]]:
        """Node ids in index order and per-node dependency bitmasks."""
        idx = {v: k for k, v in enumerate(self.nodes)}
        deps = [0] * len(self.nodes)
        for a, b in self.arcs:
            deps[idx[a]] |= 1 << idx[b]
        return list(self.nodes), deps

    def to_json(self) -> dict:
        d = {
            "kind": "labeled",
            "nodes": list(self.nodes),
            "adjacency": {str(v): sorted(self.deps(v)) for v in self.nodes},
            "self_blocked": sorted(self.self_blocked),
        }
        if self.weights is not None:
            d["weights"] = {str(k): v for k, v in self.weights.items()}
        return d

    @classmethod
    def from_json(cls, d: Mapping) -> "LabeledDepGraph":
        arcs = [(int(a), int(b)) for a, bs in d["adjacency"].items() for b in bs]
        w = d.get("weights")
        w = None if w is None else {int(k): float(v) for k, v in w.items()}
        return cls(tuple(int(v) for v in d["nodes"]), frozenset(arcs), w, frozenset(d.get("self_blocked", ())))

    def to_dot(self) -> str:
        lines = ["digraph dependencies {"]
        for v in self.nodes:
            style = ' [style=dashed]' if v in self.self_blocked else ""
            lines.append(f'  "{v}"{style};')
        for a, b in sorted(self.arcs):
            lines.append(f'  "{a}" -> "{b}";')
        lines.append("}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class UnlabeledDepGraph:
    """Bipartite overlap graph between start poses and goal poses.

    Start and goal vertices are named by the object id that owns the pose.
    ``edges`` holds (start_id, goal_id) pairs. Optional planar positions of
    the pose centres are kept for geometric routines.
    """

    starts: tuple[int, ...]
    goals: tuple[int, ...]
    edges: frozenset[tuple[int, int]]
    start_pos: Mapping[int, tuple[float, float]] | None = None
    goal_pos: Mapping[int, tuple[float, float]] | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "starts", tuple(sorted(self.starts)))
        object.__setattr__(self, "goals", tuple(sorted(self.goals)))

    def goal_neighbors(self, g: int) -> set[int]:
        return {s for s, gg in self.edges if gg == g}

    def start_neighbors(self, s: int) -> set[int]:
        return {g for ss, g in self.edges if ss == s}

    def graph(self) -> nx.Graph:
        G = nx.Graph()
        G.add_nodes_from((("s", s) for s in self.starts), bipartite=0)
        G.add_nodes_from((("g", g) for g in self.goals), bipartite=1)
        G.add_edges_from((("s", s), ("g", g)) for s, g in self.edges)
        return G

    def masks(self) -> tuple[list[int], list[int], list[int]]:
        """Goal ids, start ids and per-goal start-neighbor bitmasks."""
        sidx = {s: k for k, s in enumerate(self.starts)}
        gidx = {g: k for k, g in enumerate(self.goals)}
        nb = [0] * len(self.goals)
        for s, g in self.edges:
            nb[gidx[g]] |= 1 << sidx[s]
        return list(self.goals), list(self.starts), nb

    def restrict(self, objects: Iterable[int]) -> "UnlabeledDepGraph":
        keep = set(objects)
        sp = None if self.start_pos is None else {k: v for k, v in self.start_pos.items() if k in keep}
        gp = None if self.goal_pos is None else {k: v for k, v in self.goal_pos.items() if k in keep}
        return UnlabeledDepGraph(
            tuple(s for s in self.starts if s in keep),
            tuple(g for g in self.goals if g in keep),
            frozenset((s, g) for s, g in self.edges if s in keep and g in keep),
            sp, gp,
        )

    def to_json(self) -> dict:
        return {
            "kind": "unlabeled",
            "starts": list(self.starts),
            "goals": list(self.goals),
            "edges": sorted([s, g] for s, g in self.edges),
        }

    def to_dot(self) -> str:
        lines = ["graph overlaps {"]
        lines += [f'  "s{s}" [shape=box];' for s in self.starts]
        lines += [f'  "g{g}" [shape=ellipse];' for g in self.goals]
        lines += [f'  "s{s}" -- "g{g}";' for s, g in sorted(self.edges)]
        lines.append("}")
        return "\n".join(lines) + "\n"


def build_labeled(instance: Instance) -> LabeledDepGraph:
    arcs, blocked = set(), set()
    ids = instance.ids
    for i in ids:
        gi, si = instance.shape(i), instance.goal[i]
        for j in ids:
            if collide(gi, si, instance.shape(j), instance.start[j]):
                if i == j:
                    blocked.add(i)
                else:
                    arcs.add((i, j))
    weights = None
    if all(o.weight is not None for o in instance.objects):
        weights = {o.id: float(o.weight) for o in instance.objects}
    return LabeledDepGraph(tuple(ids), frozenset(arcs), weights, frozenset(blocked))


def build_unlabeled(instance: Instance) -> UnlabeledDepGraph:
    ids = instance.ids
    edges = set()
    for s in ids:
        for g in ids:
            if collide(instance.shape(s), instance.start[s], instance.shape(g), instance.goal[g]):
                edges.add((s, g))
    return UnlabeledDepGraph(
        tuple(ids), tuple(ids), frozenset(edges),
        {i: instance.start[i].xy for i in ids},
        {i: instance.goal[i].xy for i in ids},
    )


def scc_decompose(g: LabeledDepGraph) -> list[list[int]]:
    """Strongly connected components, dependencies first.

    Every arc either stays inside a component or points from a later
    component to an earlier one.
    """
    dg = g.digraph()
    cond = nx.condensation(dg)
    order = list(nx.lexicographical_topological_sort(cond, key=lambda c: min(cond.nodes[c]["members"])))
    return [sorted(cond.nodes[c]["members"]) for c in reversed(order)]


def weakly_connected(g: LabeledDepGraph) -> list[list[int]]:
    return sorted((sorted(c) for c in nx.weakly_connected_components(g.digraph())), key=lambda c: c[0])


def _orient(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def segments_cross(p1, p2, q1, q2, tol: float = 1e-12) -> bool:
    """Proper crossing of two segments (shared endpoints and touching excluded)."""
    d1, d2 = _orient(q1, q2, p1), _orient(q1, q2, p2)
    d3, d4 = _orient(p1, p2, q1), _orient(p1, p2, q2)
    return ((d1 > tol and d2 < -tol) or (d1 < -tol and d2 > tol)) and (
        (d3 > tol and d4 < -tol) or (d3 < -tol and d4 > tol))


@dataclass
class DegreeReport:
    max_degree: int
    bound: int
    crossings: list[tuple[tuple[int, int], tuple[int, int]]]
    kind: str

    @property
    def ok(self) -> bool:
        return self.max_degree <= self.bound and not self.crossings


def check_disc_degree_bound(g: UnlabeledDepGraph, instance: Instance) -> DegreeReport:
    """Max degree and straight-line crossings of the centre embedding.

    Valid only for instances whose objects share one disc radius (degree
    bound 5) or one regular polygon (degree bound 19).
    """
    shapes = {instance.shape(i) for i in instance.ids}
    if len(shapes) != 1:
        raise ValueError("instance is not uniform")
    shape = next(iter(shapes))
    if isinstance(shape, Disc):
        bound, kind = 5, "disc"
    elif isinstance(shape, Polygon) and shape.is_regular():
        bound, kind = 19, "regular-polygon"
    else:
        raise ValueError("degree bound applies to uniform discs or regular polygons only")
    deg = dict(g.graph().degree())
    max_deg = max(deg.values(), default=0)
    sp = {s: instance.start[s].xy for s in g.starts}
    gp = {t: instance.goal[t].xy for t in g.goals}
    edges = sorted(g.edges)
    segs = [(sp[s], gp[t]) for s, t in edges]
    crossings = []
    for a in range(len(edges)):
        for b in range(a + 1, len(edges)):
            (p1, p2), (q1, q2) = segs[a], segs[b]
            if max(p1[0], p2[0]) < min(q1[0], q2[0]) or max(q1[0], q2[0]) < min(p1[0], p2[0]):
                continue
            if segments_cross(p1, p2, q1, q2):
                crossings.append((edges[a], edges[b]))
    return DegreeReport(max_deg, bound, crossings, kind)


def graph_to_json_text(g: LabeledDepGraph | UnlabeledDepGraph) -> str:
    return json.dumps(g.to_json(), indent=2)


def random_labeled_graph(n: int, p: float, rng) -> LabeledDepGraph:
    """Erdos-Renyi style random digraph (testing and benchmarks)."""
    arcs = {(i, j) for i in range(n) for j in range(n) if i != j and rng.random() < p}
    return LabeledDepGraph(tuple(range(n)), frozenset(arcs))


def density_of(g: LabeledDepGraph) -> float:
    n = g.n
    return len(g.arcs) / (n * (n - 1)) if n > 1 else 0.0


def is_simple_cycle(g: LabeledDepGraph) -> bool:
    dg = g.digraph()
    return (dg.number_of_nodes() >= 2 and nx.is_strongly_connected(dg)
            and all(dg.out_degree(v) == 1 and dg.in_degree(v) == 1 for v in dg))

