import json

import networkx as nx
import pytest

from rearrange.cli import load_bundled
from rearrange.depgraph import (LabeledDepGraph, build_labeled, build_unlabeled, check_disc_degree_bound,
                                scc_decompose)
from rearrange.geometry import (Disc, Instance, ObjectSpec, Pose, Workspace, collide,
                                construct_special_instance, generate_random_instance)


def _cans() -> Instance:
    """Two cans that trade places plus a third whose goal sits on one of them."""
    ws = Workspace(6.0, 3.0)
    objs = [ObjectSpec(1, Disc(0.5)), ObjectSpec(2, Disc(0.5)), ObjectSpec(3, Disc(0.5))]
    start = {1: Pose(2, 1.5), 2: Pose(3, 1.5), 3: Pose(5, 1.5)}
    goal = {1: Pose(3, 1.5), 2: Pose(2, 1.5), 3: Pose(2.2, 2.3)}
    return Instance(ws, objs, start, goal)


def test_cans_cycle_and_tail():
    g = build_labeled(_cans())
    assert (1, 2) in g.arcs and (2, 1) in g.arcs
    assert g.deps(3) and g.deps(3) <= {1, 2}
    comps = scc_decompose(g)
    assert [1, 2] in comps and [3] in comps


def test_seven_object_cycles():
    g = build_labeled(load_bundled("seven_objects"))
    for a, b in ((3, 5), (2, 7)):
        assert (a, b) in g.arcs and (b, a) in g.arcs


def test_seven_object_scc():
    g = build_labeled(load_bundled("seven_objects"))
    comps = scc_decompose(g)
    big = max(comps, key=len)
    assert {2, 5, 6, 7, 3} <= set(big)
    # oracle: mutual reachability
    dg = g.digraph()
    reach = {v: nx.descendants(dg, v) | {v} for v in dg}
    brute = {frozenset(u for u in dg if u in reach[v] and v in reach[u]) for v in dg}
    assert {frozenset(c) for c in comps} == brute


def test_identity_instance_has_no_arcs():
    inst = generate_random_instance(8, 0.3, "disc", 3)
    same = inst.with_arrangements(inst.start, inst.start)
    g = build_labeled(same)
    assert not g.arcs
    assert g.self_blocked == frozenset(same.ids)


def test_arcs_match_geometry():
    for seed in range(20):
        inst = generate_random_instance(10, 0.4, "rand", seed)
        g = build_labeled(inst)
        for i in inst.ids:
            for j in inst.ids:
                if i == j:
                    continue
                hit = collide(inst.shape(i), inst.goal[i], inst.shape(j), inst.start[j])
                assert ((i, j) in g.arcs) == hit


def test_unlabeled_bipartite_and_geometric():
    for seed in range(20):
        inst = generate_random_instance(10, 0.4, "disc", seed)
        ug = build_unlabeled(inst)
        G = ug.graph()
        assert nx.is_bipartite(G)
        for s, t in ug.edges:
            assert collide(inst.shape(s), inst.start[s], inst.shape(t), inst.goal[t])


def test_unlabeled_seven_objects():
    ug = build_unlabeled(load_bundled("seven_objects"))
    assert len(ug.starts) == len(ug.goals) == 7
    assert nx.is_bipartite(ug.graph())
    assert (3, 3) in ug.edges  # object 3's own start and goal overlap


def test_unlabeled_disjoint_is_edgeless():
    ws = Workspace(4, 2)
    objs = [ObjectSpec(1, Disc(0.4)), ObjectSpec(2, Disc(0.4))]
    inst = Instance(ws, objs, {1: Pose(0.5, 0.5), 2: Pose(1.5, 0.5)}, {1: Pose(2.5, 1.5), 2: Pose(3.5, 1.5)})
    assert not build_unlabeled(inst).edges


def test_sticks_unlabeled_complete_bipartite():
    ug = build_unlabeled(construct_special_instance("sticks", 5))
    assert len(ug.edges) == 25


def test_scc_dag_singletons():
    g = LabeledDepGraph.from_arcs(range(5), [(0, 1), (1, 2), (3, 4)])
    comps = scc_decompose(g)
    assert sorted(map(tuple, comps)) == [(0,), (1,), (2,), (3,), (4,)]


def test_scc_two_cycles():
    comps = scc_decompose(build_labeled(construct_special_instance("two_cycles", 3)))
    assert sorted(len(c) for c in comps) == [2, 2, 2]


def test_scc_order_property():
    import random

    rng = random.Random(5)
    for _ in range(100):
        n = rng.randint(2, 9)
        arcs = {(a, b) for a in range(n) for b in range(n) if a != b and rng.random() < 0.25}
        g = LabeledDepGraph.from_arcs(range(n), arcs)
        comps = scc_decompose(g)
        where = {v: k for k, c in enumerate(comps) for v in c}
        assert all(where[a] >= where[b] for a, b in arcs)


def test_disc_degree_bound_random():
    for seed in range(200):
        rho = 0.2 + 0.4 * (seed % 5) / 4
        inst = generate_random_instance(15, min(rho, 0.6), "disc", seed)
        rep = check_disc_degree_bound(build_unlabeled(inst), inst)
        assert rep.max_degree <= 5 and not rep.crossings


def test_square_degree_bound():
    for seed in range(10):
        inst = generate_random_instance(12, 0.35, "square", seed)
        assert len({inst.shape(i) for i in inst.ids}) == 1
        rep = check_disc_degree_bound(build_unlabeled(inst), inst)
        assert rep.max_degree <= 19


def test_grid_degree():
    inst = construct_special_instance("dependency_grid", 4)
    rep = check_disc_degree_bound(build_unlabeled(inst), inst)
    assert rep.max_degree <= 4 and not rep.crossings


def test_degree_check_rejects_mixed():
    inst = generate_random_instance(6, 0.3, "rand", 0)
    with pytest.raises(ValueError):
        check_disc_degree_bound(build_unlabeled(inst), inst)


def test_graph_json_round_trip():
    g = build_labeled(load_bundled("seven_objects"))
    back = LabeledDepGraph.from_json(json.loads(json.dumps(g.to_json())))
    assert back.arcs == g.arcs and back.self_blocked == g.self_blocked
    assert "digraph" in g.to_dot()


def test_pareto_graph_matches_listing():
    g = load_bundled("pareto_ten")
    expected = {(2, 1), (2, 4), (2, 9), (2, 10), (3, 4), (3, 10), (4, 5), (4, 7), (4, 9), (6, 3), (6, 4), (6, 7),
                (7, 6), (9, 2), (9, 8), (10, 3)}
    assert set(g.arcs) == expected
