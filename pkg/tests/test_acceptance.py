"""End-to-end acceptance checks, one per criterion.

Each test prints a single ``CRITERION <k>: PASS|FAIL <details>`` line to the
terminal, then asserts. Run as a script to get the same lines without pytest.
"""
from __future__ import annotations

import itertools
import math
import random
import re
import sys
import time
from pathlib import Path

import networkx as nx
import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))
from _oracles import collision_probability_mc, random_convex_polygon  # noqa: E402

from rearrange.buffers import export_mip, min_fvs, total_buffers_given_mrb  # noqa: E402
from rearrange.cli import load_bundled  # noqa: E402
from rearrange.depgraph import (LabeledDepGraph, build_labeled, build_unlabeled, check_disc_degree_bound,  # noqa: E402
                                weakly_connected)
from rearrange.dualarm import cdr_example, mc_bfs, mchs, random_world  # noqa: E402
from rearrange.geometry import (Instance, ObjectSpec, Pose, Rectangle, Track, Workspace,  # noqa: E402
                               construct_special_instance, generate_random_instance)
from rearrange.orla import (CostModel, distance_refinement, optimal_buffer_region, orla_star,  # noqa: E402
                            swap_example)
from rearrange.plans import validate_plan  # noqa: E402
from rearrange.rbm import (DPTable, mrb_bruteforce, mrb_dfdp, mrb_dp, mrb_pqs, replay_ordering,  # noqa: E402
                           replay_removal, sepplan, vertex_separation)
from rearrange.trlb import hecp_weight, preprocess_unlabeled, trlb_solve  # noqa: E402

SEPPLAN_CONST = 20 / (1 - math.sqrt(2 / 3))


@pytest.fixture
def report(request):
    tr = request.config.pluginmanager.getplugin("terminalreporter")

    def emit(k: int, ok: bool, detail: str) -> None:
        line = f"CRITERION {k}: {'PASS' if ok else 'FAIL'} {detail}"
        print(line)
        if tr is not None:
            tr.write_line("")
            tr.write_line(line)
    return emit


def _random_digraph(rng: random.Random, n: int, p: float) -> LabeledDepGraph:
    return LabeledDepGraph.from_arcs(range(n), [(a, b) for a in range(n) for b in range(n)
                                                if a != b and rng.random() < p])


def check_exact_solvers() -> tuple[bool, str]:
    t0 = time.perf_counter()
    rng = random.Random(1)
    bad = 0
    for _ in range(500):
        g = _random_digraph(rng, rng.randint(1, 8), rng.uniform(0.1, 0.5))
        a, b, c = mrb_dp(g).mrb, mrb_dfdp(g).mrb, mrb_bruteforce(g)
        bad += not (a == b == c)
    for seed in range(200):
        inst = generate_random_instance(2 + seed % 9, 0.1 + 0.3 * (seed % 4) / 3, "disc", seed, labeled=False)
        ug = build_unlabeled(inst)
        bad += mrb_pqs(ug).mrb != mrb_dfdp(ug).mrb
    dt = time.perf_counter() - t0
    return bad == 0 and dt < 60, f"mismatches={bad} runtime={dt:.1f}s (limit 60s)"


def check_bundled_values() -> tuple[bool, str]:
    seven = build_labeled(load_bundled("seven_objects"))
    pareto = load_bundled("pareto_ten")
    got = {
        "seven_mrb": mrb_dfdp(seven).mrb,
        "seven_replay": replay_ordering(seven, (1, 5, 6, 3, 4, 2, 7)).mrb,
        "table_row": DPTable(seven).by_last_object({2, 5, 6}),
        "pareto_mfvs": min_fvs(pareto).size,
        "pareto_mrb": mrb_dfdp(pareto).mrb,
        "pareto_total": total_buffers_given_mrb(pareto, 2).total,
    }
    want = {"seven_mrb": 2, "seven_replay": 3, "table_row": {2: 2, 5: 3, 6: 2},
            "pareto_mfvs": 3, "pareto_mrb": 2, "pareto_total": 4}
    ok = got == want
    for k in (1, 2, 3, 4):
        g = build_labeled(construct_special_instance("two_cycles", k))
        ok &= min_fvs(g).size == k and mrb_dfdp(g).mrb == 1
    for n in (3, 4, 5, 6):
        ok &= mrb_dfdp(build_labeled(construct_special_instance("sticks", n))).mrb == n - 1
    return ok, f"{got}"


def _sandwich_violations(G: nx.Graph) -> int:
    g = LabeledDepGraph.bidirected(list(G.nodes), list(G.edges))
    bad = 0
    for phi in itertools.permutations(G.nodes):
        vs = vertex_separation(G, phi)
        bad += not (vs <= replay_ordering(g, phi).mrb <= vs + 1)
    return bad


def check_sandwich() -> tuple[bool, str]:
    graphs = []
    for n in range(1, 5):
        pairs = list(itertools.combinations(range(n), 2))
        for bits in range(2 ** len(pairs)):
            G = nx.Graph()
            G.add_nodes_from(range(n))
            G.add_edges_from(p for k, p in enumerate(pairs) if bits >> k & 1)
            graphs.append(G)
    rng = random.Random(5)
    for _ in range(200):
        graphs.append(nx.gnp_random_graph(rng.choice((5, 6)), rng.uniform(0.1, 0.9), seed=rng.randint(0, 10 ** 6)))
    bad = sum(_sandwich_violations(G) for G in graphs)
    return bad == 0, f"graphs={len(graphs)} violations={bad}"


def check_sepplan() -> tuple[bool, str]:
    t0 = time.perf_counter()
    cases = [build_unlabeled(construct_special_instance("dependency_grid", m)) for m in range(2, 7)]
    cases += [build_unlabeled(generate_random_instance(20 + 20 * (s % 5), 0.5, "disc", s, labeled=False))
              for s in range(50)]
    bad, worst = 0, 0.0
    for ug in cases:
        res = sepplan(ug)
        n = len(ug.goals)
        valid = sorted(res.plan.ordering) == sorted(ug.goals) and replay_removal(ug, res.plan.ordering).mrb == res.rb
        bad += not (valid and res.rb <= SEPPLAN_CONST * math.sqrt(n))
        worst = max(worst, res.rb / math.sqrt(n))
    dt = time.perf_counter() - t0
    return bad == 0 and dt < 120, f"cases={len(cases)} failures={bad} max rb/sqrt(n)={worst:.2f} runtime={dt:.1f}s"


def check_structure() -> tuple[bool, str]:
    deg_bad, deg_max = 0, 0
    for seed in range(200):
        inst = generate_random_instance(10 + seed % 30, 0.2 + 0.3 * (seed % 4) / 3, "disc", seed, labeled=False)
        rep = check_disc_degree_bound(build_unlabeled(inst), inst)
        deg_max = max(deg_max, rep.max_degree)
        deg_bad += rep.max_degree > 5 or bool(rep.crossings)
    rng = random.Random(21)
    fvs_bad = 0
    for _ in range(300):
        g = _random_digraph(rng, rng.randint(2, 12), rng.uniform(0.05, 0.3))
        fvs_bad += mrb_dfdp(g).mrb > min_fvs(g).size
    return deg_bad == 0 and fvs_bad == 0, f"max degree={deg_max} degree/crossing failures={deg_bad} mrb>mfvs={fvs_bad}"


def _component_mrbs(inst) -> list[int]:
    g = build_labeled(inst)
    ug = build_unlabeled(inst)
    return [mrb_dfdp(ug.restrict(c)).mrb for c in weakly_connected(g)]


def check_trlb() -> tuple[bool, str]:
    solved = 0
    for seed in range(30):
        inst = generate_random_instance(20, 0.3, "disc", seed)
        res = trlb_solve(inst, "BST", "RBM", "SP", seed=seed, budget_ms=300_000)
        solved += bool(res.success and validate_plan(inst, res.plan) and len(res.plan.actions) >= 20)
    pre_bad, hard_before = 0, 0
    cases = [generate_random_instance(40, 0.5, "disc", seed) for seed in range(50)] + [_three_bars()]
    for seed, inst in enumerate(cases):
        hard_before += max(_component_mrbs(inst), default=0) >= 2
        pre = preprocess_unlabeled(inst, seed)
        pre_bad += max(_component_mrbs(pre.residual), default=0) > 1
    ok = solved >= math.ceil(0.95 * 30) and pre_bad == 0
    return ok, (f"solved={solved}/30 (need 29); preprocessing: instances with a component of MRB>1 "
                f"before={hard_before}/{len(cases)} after={pre_bad}/{len(cases)}")


def _three_bars() -> Instance:
    """Three long bars turned by a right angle: a complete dependency graph with room to spare."""
    bar = Rectangle(3.0, 0.3)
    return Instance(Workspace(4.0, 7.0), tuple(ObjectSpec(i, bar) for i in range(3)),
                    {i: Pose(2.0, 1.0 + i) for i in range(3)},
                    {i: Pose(1.0 + i, 2.0, math.pi / 2) for i in range(3)})


def check_hecp() -> tuple[bool, str]:
    rng = np.random.default_rng(11)
    worst = 0.0
    for k in range(20):
        poly = random_convex_polygon(rng, rng.uniform(0.3, 1.0))
        r = float(rng.uniform(0.2, 0.6))
        w, h = 8.0, 6.0
        mc = collision_probability_mc(poly, r, w, h, 1_000_000, k)
        worst = max(worst, abs(hecp_weight(poly, math.pi * r * r, w, h) - mc))
    return worst <= 0.02, f"max |formula - MC| over 20 polygons={worst:.4f} (limit 0.02)"


def check_mchs() -> tuple[bool, str]:
    bad = 0
    for seed in range(50):
        w = random_world(2 + seed % 3, 0.45, [0.0, 0.3, 0.5, 1.0][seed % 4], seed)
        res = mchs(w, record=True)
        bad += res.makespan != mc_bfs(w)
        bad += any(h > mc_bfs(w, s) for s, _, h in res.info["trace"])
        bad += any(h1 > 1 + h2 for h1, h2 in res.info["edges"])
    cdr = mchs(cdr_example()).makespan
    return bad == 0 and cdr == 2, f"violations={bad} swap-and-handoff makespan={cdr}"


def _grid_min(pts: list[tuple[float, float]], n: int = 401) -> float:
    """Summed distance minimized over a dense grid, refined once around the best cell."""
    P = np.asarray(pts)
    lo, hi = P.min(axis=0), P.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    best = None
    for _ in range(3):
        xs = np.linspace(lo[0], hi[0], n)
        ys = np.linspace(lo[1], hi[1], n)
        X, Y = np.meshgrid(xs, ys)
        F = sum(np.hypot(X - p[0], Y - p[1]) for p in P)
        k = np.unravel_index(np.argmin(F), F.shape)
        best = float(F[k])
        c = np.array([X[k], Y[k]])
        span = span * 4 / n
        lo, hi = c - span, c + span
    return best


def _track_scan(model: CostModel, pts) -> float:
    tr = model.track
    s = np.linspace(0, tr.length, 400_001)
    total = np.zeros_like(s)
    for p in pts:
        d = np.abs(s - model.base(p)) % tr.length
        total += np.minimum(d, tr.length - d)
    return float(total.min())


def check_orla() -> tuple[bool, str]:
    rng = np.random.default_rng(2024)
    ee = CostModel("EE")
    mb = CostModel("MB", 10.0, Track(1.0, 1.0))
    worst = 0.0
    for _ in range(100):
        tri = [tuple(p) for p in rng.uniform(0, 1, (3, 2))]
        quad = [tuple(p) for p in rng.uniform(0, 1, (4, 2))]
        worst = max(worst,
                    abs(distance_refinement(*tri, ee) + ee.dist(tri[0], tri[1]) - _grid_min(tri)),
                    abs(distance_refinement(*tri, mb) + mb.dist(tri[0], tri[1]) - _track_scan(mb, tri)),
                    abs(optimal_buffer_region(quad, ee).value - _grid_min(quad)),
                    abs(optimal_buffer_region(quad, mb).value - _track_scan(mb, quad)))
    inst = swap_example()
    sw = orla_star(inst, CostModel.for_instance(inst))
    swap_ok = sw.success and len(sw.plan.actions) == 3 and sw.info["states"] == ["DS", "NDS", "NDS", "DS"]
    jf, ja, le = [], [], 0
    for seed in range(50):
        inst = generate_random_instance(7, 0.2, "disc", seed, Workspace(1.0, 1.0))
        m = CostModel.for_instance(inst)
        f = orla_star(inst, m, seed=seed)
        a = orla_star(inst, m, objective="action", seed=seed)
        jf.append(f.J)
        ja.append(a.J)
        le += f.J <= a.J + 1e-9
    mf, ma = float(np.mean(jf)), float(np.mean(ja))
    ok = worst <= 1e-3 and swap_ok and mf <= ma and le >= 35
    return ok, (f"geometry max error={worst:.2e} swap ok={swap_ok} mean J full={mf:.4f} action={ma:.4f} "
                f"full<=action on {le}/50")


def check_mip() -> tuple[bool, str]:
    details = []
    ok = True
    for n in (2, 3, 4):
        g = LabeledDepGraph.from_arcs(range(n), [(a, (a + 1) % n) for a in range(n)])
        text = export_mip(g)
        rows = re.findall(r"^ (c\d)(?:lo|hi)?_[\d_]+:", text, flags=re.M)
        pairs, triples = math.comb(n, 2), math.comb(n, 3)
        want = {"c1": 2 * triples, "c2": n, "c3": n, "c4": n * n, "c5": n * n,
                "c6": 2 * pairs, "c7": 2 * pairs, "c8": n}
        got = {f: rows.count(f) for f in want}
        ok &= got == want and len(rows) == sum(want.values())
        details.append(f"n={n} rows={len(rows)}")
    parsed = _parses_with_highs(export_mip(load_bundled("pareto_ten")))
    ok &= parsed is not False
    details.append(f"highs parse={parsed}")
    return ok, " ".join(details)


def _parses_with_highs(text: str) -> bool | None:
    try:
        import highspy
    except ImportError:
        return None
    import tempfile

    with tempfile.TemporaryDirectory() as d:
        path = Path(d) / "m.lp"
        path.write_text(text)
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        return h.readModel(str(path)) == highspy.HighsStatus.kOk


CHECKS = [check_exact_solvers, check_bundled_values, check_sandwich, check_sepplan, check_structure,
          check_trlb, check_hecp, check_mchs, check_orla, check_mip]


@pytest.mark.parametrize("k", range(1, 11))
def test_criterion(k, report):
    ok, detail = CHECKS[k - 1]()
    report(k, ok, detail)
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for k, check in enumerate(CHECKS, 1):
        ok, detail = check()
        print(f"CRITERION {k}: {'PASS' if ok else 'FAIL'} {detail}", flush=True)
        failed += not ok
    sys.exit(1 if failed else 0)
