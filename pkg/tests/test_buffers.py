import itertools
import random
import re

import networkx as nx
import pytest

from rearrange.buffers import (export_mip, min_fvs, mip_constraint_counts, mip_variable_counts,
                               total_buffers_given_mrb)
from rearrange.cli import load_bundled
from rearrange.depgraph import LabeledDepGraph, build_labeled
from rearrange.geometry import construct_special_instance
from rearrange.rbm import mrb_dfdp, replay_ordering


def _random_digraph(rng: random.Random, n: int, p: float | None = None) -> LabeledDepGraph:
    p = rng.uniform(0.1, 0.4) if p is None else p
    return LabeledDepGraph.from_arcs(range(n), [(a, b) for a in range(n) for b in range(n)
                                                if a != b and rng.random() < p])


def _fvs_oracle(g: LabeledDepGraph, w=None) -> float:
    w = w or {v: 1 for v in g.nodes}
    dg = g.digraph()
    best = float("inf")
    for k in range(g.n + 1):
        for S in itertools.combinations(g.nodes, k):
            if nx.is_directed_acyclic_graph(dg.subgraph(set(g.nodes) - set(S))):
                best = min(best, sum(w[v] for v in S))
    return best


def _total_oracle(g: LabeledDepGraph, cap: float) -> int:
    best = None
    for p in itertools.permutations(g.nodes):
        plan = replay_ordering(g, p)
        if plan.mrb <= cap and (best is None or len(plan.buffered_ids) < best):
            best = len(plan.buffered_ids)
    return best


def test_fvs_pareto_graph():
    g = load_bundled("pareto_ten")
    res = min_fvs(g)
    assert res.size == 3 and res.complete
    assert res.verify(g)


def test_fvs_two_cycles():
    g = build_labeled(construct_special_instance("two_cycles", 3))
    assert min_fvs(g).size == 3


def test_fvs_dag_empty():
    g = LabeledDepGraph.from_arcs(range(6), [(0, 1), (1, 2), (0, 5), (4, 3)])
    res = min_fvs(g)
    assert res.size == 0 and res.verify(g)


def test_fvs_matches_subset_oracle():
    rng = random.Random(4)
    for _ in range(80):
        g = _random_digraph(rng, rng.randint(1, 8))
        res = min_fvs(g)
        assert res.size == _fvs_oracle(g)
        assert res.verify(g)


def test_weighted_fvs_matches_oracle():
    rng = random.Random(9)
    for _ in range(40):
        g = _random_digraph(rng, rng.randint(2, 7))
        w = {v: rng.randint(1, 5) for v in g.nodes}
        assert min_fvs(g, w).weight == _fvs_oracle(g, w)


def test_fvs_negative_weight_rejected():
    g = LabeledDepGraph.bidirected([0, 1], [(0, 1)])
    with pytest.raises(ValueError):
        min_fvs(g, {0: -1, 1: 1})


def test_fvs_oversized_flagged():
    g = build_labeled(construct_special_instance("sticks", 6))
    res = min_fvs(g, exact_limit=3)
    assert not res.complete and res.verify(g)


def test_mrb_not_above_fvs():
    rng = random.Random(21)
    for _ in range(300):
        g = _random_digraph(rng, rng.randint(2, 12), rng.uniform(0.05, 0.3))
        assert mrb_dfdp(g).mrb <= min_fvs(g).size


def test_total_pareto_at_mrb_cap():
    res = total_buffers_given_mrb(load_bundled("pareto_ten"), 2)
    assert res.total == 4 and res.complete
    assert res.plan.mrb <= 2 and len(res.plan.buffered_ids) == 4


def test_total_two_cycles():
    g = build_labeled(construct_special_instance("two_cycles", 3))
    assert total_buffers_given_mrb(g, 1).total == 3


def test_total_dag_zero():
    g = LabeledDepGraph.from_arcs(range(4), [(0, 1), (1, 2)])
    assert total_buffers_given_mrb(g, 0).total == 0


def test_total_cap_below_mrb_raises():
    with pytest.raises(ValueError):
        total_buffers_given_mrb(load_bundled("pareto_ten"), 1)


def test_total_relaxed_equals_fvs():
    rng = random.Random(3)
    for _ in range(100):
        g = _random_digraph(rng, rng.randint(2, 10))
        assert total_buffers_given_mrb(g, None).total == min_fvs(g).size


def test_total_matches_permutation_oracle():
    rng = random.Random(8)
    for _ in range(60):
        g = _random_digraph(rng, rng.randint(2, 6), 0.35)
        mrb = mrb_dfdp(g).mrb
        for cap in (mrb, mrb + 1):
            res = total_buffers_given_mrb(g, cap)
            assert res.total == _total_oracle(g, cap)
            assert res.total >= min_fvs(g).size


def test_mip_counts_two():
    g = LabeledDepGraph.bidirected([1, 2], [(1, 2)])
    text = export_mip(g)
    assert mip_variable_counts(2)["y"] == 1
    assert set(re.findall(r"\by_\d+_\d+\b", text)) == {"y_1_2"}
    counts = mip_constraint_counts(2)
    assert counts == {"c1": 0, "c2": 2, "c3": 2, "c4": 4, "c5": 4, "c6": 2, "c7": 2, "c8": 2, "total": 18}


@pytest.mark.parametrize("n", [2, 3, 4, 6])
def test_mip_row_names_match_formula(n):
    g = LabeledDepGraph.from_arcs(range(n), [(a, (a + 1) % n) for a in range(n)])
    text = export_mip(g)
    counts = mip_constraint_counts(n)
    rows = re.findall(r"^ (c\d)(?:lo|hi)?_[\d_]+:", text, flags=re.M)
    for fam in ("c1", "c2", "c3", "c4", "c5", "c6", "c7", "c8"):
        assert rows.count(fam) == counts[fam]
    assert len(rows) == counts["total"]


def test_mip_single_triple_for_three():
    text = export_mip(LabeledDepGraph.from_arcs(range(3), []))
    assert len(re.findall(r"^ c1(?:lo|hi)_1_2_3:", text, flags=re.M)) == 2


def test_mip_parses_with_highs(tmp_path):
    highspy = pytest.importorskip("highspy")
    g = load_bundled("pareto_ten")
    path = tmp_path / "m.lp"
    path.write_text(export_mip(g))
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    assert h.readModel(str(path)) == highspy.HighsStatus.kOk
    lp = h.getLp()
    assert lp.num_row_ == mip_constraint_counts(10)["total"]
    assert lp.num_col_ == sum(mip_variable_counts(10).values())
    h.run()
    names = [h.getColName(i)[1] for i in range(lp.num_col_)]
    sol = dict(zip(names, h.getSolution().col_value))
    assert round(sol["K"]) == 2
