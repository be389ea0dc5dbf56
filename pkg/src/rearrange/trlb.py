"""Rearrangement with buffers inside the workspace.

A primitive plan is computed on the dependency graph as if free space
were unlimited; concrete buffer poses are chosen afterwards, once the
schedule tells each buffer which footprints it has to avoid.
"""
from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import minimize

from .buffers import min_fvs
from .depgraph import LabeledDepGraph, UnlabeledDepGraph, is_simple_cycle, scc_decompose, weakly_connected
from .geometry import (
    EPS, Disc, Instance, Polygon, Pose, Shape, arrangement_distance, collide, inside_workspace,
)
from .plans import Action, Plan, validate_plan
from .rbm import mrb_dfdp

S2G, S2B, B2G = "s->g", "s->b", "b->g"
MODES = ("RBM", "TBM", "RO")
SAMPLE_ATTEMPTS = 1000
OPT_RESTARTS = 50


@dataclass(frozen=True)
class PrimitiveAction:
    obj: int
    kind: str

    def __post_init__(self):
        if self.kind not in (S2G, S2B, B2G):
            raise ValueError(f"unknown primitive {self.kind!r}")


def check_primitive(actions: Sequence[PrimitiveAction]) -> None:
    """Each object does one s->g, or s->b followed later by b->g."""
    seen: dict[int, list[str]] = {}
    for a in actions:
        seen.setdefault(a.obj, []).append(a.kind)
    for o, kinds in seen.items():
        if kinds not in ([S2G], [S2B, B2G]):
            raise ValueError(f"object {o} has primitive sequence {kinds}")


def ordering_to_primitive(g: LabeledDepGraph, order: Sequence[int]) -> list[PrimitiveAction]:
    """Lift objects in ``order``; buffered ones go home as soon as their goal frees up."""
    deps = {v: set() for v in g.nodes}
    for a, b in g.arcs:
        deps[a].add(b)
    at_start = set(g.nodes)
    buf: list[int] = []
    out = []
    for o in order:
        at_start.discard(o)
        if deps[o] & at_start:
            out.append(PrimitiveAction(o, S2B))
            buf.append(o)
        else:
            out.append(PrimitiveAction(o, S2G))
        for x in sorted(buf):
            if not deps[x] & at_start:
                buf.remove(x)
                out.append(PrimitiveAction(x, B2G))
    return out


def erbm_weights(weights: Mapping[int, float]) -> dict[int, int]:
    """Integer buffer weights: scale by the smallest positive weight and round half up."""
    pos = [w for w in weights.values() if w > 0]
    if not pos:
        return {k: 1 for k in weights}
    base = min(pos)
    return {k: int(math.floor(w / base + 0.5)) for k, w in weights.items()}


def _greedy_order(g: LabeledDepGraph, allowed: set[int] | None, rng: random.Random) -> list[int]:
    """Lift goal-free objects first; otherwise lift an allowed object into the buffer."""
    deps = {v: set() for v in g.nodes}
    for a, b in g.arcs:
        deps[a].add(b)
    remaining = set(g.nodes)
    order = []
    while remaining:
        free = sorted(v for v in remaining if not (deps[v] & remaining) - {v})
        if free:
            v = rng.choice(free)
        else:
            pool = sorted(remaining if allowed is None else remaining & allowed)
            v = rng.choice(pool)
        order.append(v)
        remaining.discard(v)
    return order


def primitive_plan(
    g: LabeledDepGraph,
    mode: str = "RBM",
    weights: Mapping[int, float] | None = None,
    rng: random.Random | None = None,
) -> list[PrimitiveAction]:
    rng = rng or random.Random(0)
    mode = mode.upper()
    if mode == "RBM":
        w = None if weights is None else erbm_weights(weights)
        order: list[int] = []
        for comp in scc_decompose(g):
            if len(comp) == 1:
                order += comp
                continue
            sub = g.subgraph(comp)
            res = mrb_dfdp(sub, weights=None if w is None else {k: w[k] for k in comp}, rng=rng)
            order += list(res.plan.ordering)
    elif mode == "TBM":
        fvs = min_fvs(g, weights).fvs
        order = _greedy_order(g, set(fvs), rng)
    elif mode == "RO":
        order = _greedy_order(g, None, rng)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    out = ordering_to_primitive(g, order)
    check_primitive(out)
    return out


# ---------------------------------------------------------------------------
# buffer allocation


Obstacle = tuple[Shape, Pose]


@dataclass
class AllocationResult:
    plan: Plan
    success: bool
    terminating_step: int | None
    buffers: dict[int, Pose]
    constraints: dict[int, list[Obstacle]]
    history: list[dict[int, Pose]]
    end: dict[int, Pose]


def _disc_arrays(obstacles: list[Obstacle]):
    c = np.array([p.xy for _, p in obstacles], dtype=float).reshape(-1, 2)
    r = np.array([s.radius for s, _ in obstacles], dtype=float)
    return c, r


def _pose_ok(inst: Instance, shape: Shape, pose: Pose, obstacles: list[Obstacle]) -> bool:
    if not inside_workspace(shape, pose, inst.workspace):
        return False
    return not any(collide(shape, pose, s, p) for s, p in obstacles)


def _sample_pose(inst: Instance, shape: Shape, obstacles: list[Obstacle], rng: np.random.Generator,
                 attempts: int = SAMPLE_ATTEMPTS) -> Pose | None:
    ws = inst.workspace
    if isinstance(shape, Disc) and all(isinstance(s, Disc) for s, _ in obstacles):
        r = shape.radius
        if 2 * r > min(ws.w, ws.h):
            return None
        pts = np.column_stack((rng.uniform(r, ws.w - r, attempts), rng.uniform(r, ws.h - r, attempts)))
        if obstacles:
            c, rr = _disc_arrays(obstacles)
            d = np.linalg.norm(pts[:, None, :] - c[None, :, :], axis=2)
            ok = np.all(d >= r + rr[None, :] - EPS, axis=1)
        else:
            ok = np.ones(attempts, dtype=bool)
        idx = np.flatnonzero(ok)
        if idx.size == 0:
            return None
        x, y = pts[idx[0]]
        return Pose(float(x), float(y), 0.0)
    rad = shape.bounding_radius()
    for _ in range(attempts):
        theta = 0.0 if isinstance(shape, Disc) else float(rng.uniform(0, 2 * math.pi))
        lo_x, lo_y = min(rad, ws.w / 2), min(rad, ws.h / 2)
        pose = Pose(float(rng.uniform(lo_x, ws.w - lo_x)), float(rng.uniform(lo_y, ws.h - lo_y)), theta)
        if _pose_ok(inst, shape, pose, obstacles):
            return pose
    return None


def _optimize_discs(inst: Instance, objs: list[int], fixed: dict[int, list[Obstacle]],
                    rng: np.random.Generator, restarts: int = OPT_RESTARTS) -> dict[int, Pose] | None:
    """Joint penalty minimization of separation violations for disc buffers."""
    ws = inst.workspace
    radii = np.array([inst.shape(o).radius for o in objs])
    k = len(objs)
    fixed_c = [_disc_arrays(fixed[o]) for o in objs]
    bounds = []
    for r in radii:
        if 2 * r > min(ws.w, ws.h):
            return None
        bounds += [(r, ws.w - r), (r, ws.h - r)]
    margin = 1e-7

    def f(z):
        p = z.reshape(k, 2)
        val = 0.0
        grad = np.zeros_like(p)
        for a in range(k):
            c, rr = fixed_c[a]
            if len(rr):
                diff = p[a] - c
                d = np.linalg.norm(diff, axis=1)
                viol = radii[a] + rr + margin - d
                m = viol > 0
                if m.any():
                    val += float(np.sum(viol[m] ** 2))
                    dd = np.maximum(d[m], 1e-12)
                    grad[a] += np.sum(-2 * viol[m][:, None] * diff[m] / dd[:, None], axis=0)
            for b in range(a + 1, k):
                diff = p[a] - p[b]
                d = float(np.hypot(*diff))
                viol = radii[a] + radii[b] + margin - d
                if viol > 0:
                    val += viol ** 2
                    u = diff / max(d, 1e-12)
                    grad[a] += -2 * viol * u
                    grad[b] += 2 * viol * u
        return val, grad.ravel()

    for _ in range(restarts):
        z0 = np.array([rng.uniform(lo, hi) for lo, hi in bounds])
        res = minimize(f, z0, jac=True, method="L-BFGS-B", bounds=bounds)
        p = res.x.reshape(k, 2)
        poses = {o: Pose(float(p[a, 0]), float(p[a, 1])) for a, o in enumerate(objs)}
        ok = all(_pose_ok(inst, inst.shape(o), poses[o], fixed[o]) for o in objs)
        ok = ok and all(not collide(inst.shape(a), poses[a], inst.shape(b), poses[b])
                        for i, a in enumerate(objs) for b in objs[i + 1:])
        if ok:
            return poses
    return None


def _generate(inst: Instance, order: list[int], constraints: dict[int, list[Obstacle]],
              old: dict[int, Pose], method: str, rng: np.random.Generator) -> dict[int, Pose] | None:
    """Buffers for every currently buffered object.

    Old buffers that still satisfy their constraints are reused; if the
    remaining ones cannot be placed, everything is regenerated.
    """
    use_opt = method == "OPT" and all(isinstance(inst.shape(o), Disc) for o in inst.ids)

    def place(keep_old: bool) -> dict[int, Pose] | None:
        chosen: dict[int, Pose] = {}
        if keep_old:
            for o in order:
                if o in old:
                    obst = constraints[o] + [(inst.shape(x), chosen[x]) for x in chosen]
                    if _pose_ok(inst, inst.shape(o), old[o], obst):
                        chosen[o] = old[o]
        todo = [o for o in order if o not in chosen]
        if not todo:
            return chosen
        if use_opt:
            fixed = {o: constraints[o] + [(inst.shape(x), chosen[x]) for x in chosen] for o in todo}
            got = _optimize_discs(inst, todo, fixed, rng)
            if got is None:
                return None
            chosen.update(got)
            return chosen
        for o in todo:
            obst = constraints[o] + [(inst.shape(x), chosen[x]) for x in chosen]
            p = _sample_pose(inst, inst.shape(o), obst, rng)
            if p is None:
                return None
            chosen[o] = p
        return chosen

    got = place(True)
    if got is None and old:
        got = place(False)
    return got


def allocate_buffers(
    instance: Instance,
    primitive: Sequence[PrimitiveAction],
    method: str = "SP",
    seed: int | np.random.Generator = 0,
    start: Mapping[int, Pose] | None = None,
    goal: Mapping[int, Pose] | None = None,
) -> AllocationResult:
    """Turn a primitive plan into concrete pick-and-place actions.

    Constraints per buffered object: poses of objects at start or goal when
    it is buffered, every goal filled during its stay, and the final buffer
    pose of any buffered object that leaves before it. On failure the plan
    holds the actions before the terminating step.
    """
    method = method.upper()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    cur0 = dict(instance.start if start is None else start)
    tgt = dict(instance.goal if goal is None else goal)
    check_primitive(primitive)
    at_start = {o for o in cur0 if not cur0[o].close_to(tgt[o])}
    at_goal = set(cur0) - at_start
    in_buf: list[int] = []
    constraints: dict[int, list[Obstacle]] = {}
    B: dict[int, Pose] = {}
    history: list[dict[int, Pose]] = []
    done: list[PrimitiveAction] = []
    step = None

    def pose_now(o: int) -> Pose:
        return cur0[o] if o in at_start else tgt[o]

    for k, act in enumerate(primitive):
        o = act.obj
        cons = {x: list(v) for x, v in constraints.items()}
        buf = list(in_buf)
        if act.kind == S2B:
            buf.append(o)
            cons[o] = [(instance.shape(x), pose_now(x)) for x in sorted(at_start | at_goal) if x != o]
        elif act.kind == B2G:
            buf.remove(o)
            for x in buf:
                cons[x].append((instance.shape(o), tgt[o]))
                cons[x].append((instance.shape(o), B[o]))
        else:
            for x in buf:
                cons[x].append((instance.shape(o), tgt[o]))
        new_b = _generate(instance, buf, cons, {x: B[x] for x in buf if x in B}, method, rng)
        if new_b is None:
            step = k
            break
        B.update(new_b)
        constraints = cons
        in_buf = buf
        if act.kind == S2B:
            at_start.discard(o)
        elif act.kind == S2G:
            at_start.discard(o)
            at_goal.add(o)
        else:
            at_goal.add(o)
        history.append(dict(new_b))
        done.append(act)

    actions = []
    end = dict(cur0)
    for act in done:
        o = act.obj
        if act.kind == S2G:
            a = Action(o, cur0[o], tgt[o])
        elif act.kind == S2B:
            a = Action(o, cur0[o], B[o])
        else:
            a = Action(o, B[o], tgt[o])
        actions.append(a)
        end[o] = a.dst
    return AllocationResult(Plan(actions), step is None, step, dict(B), constraints, history, end)


# ---------------------------------------------------------------------------
# frameworks


def dependency_graph_between(instance: Instance, cur: Mapping[int, Pose], tgt: Mapping[int, Pose]) -> LabeledDepGraph:
    """Labeled graph of the objects not yet at their target poses."""
    active = [o for o in instance.ids if not cur[o].close_to(tgt[o])]
    arcs = set()
    for i in active:
        for j in active:
            if i != j and collide(instance.shape(i), tgt[i], instance.shape(j), cur[j]):
                arcs.add((i, j))
    return LabeledDepGraph(tuple(active), frozenset(arcs))


def lazy_buffer_allocation(instance: Instance, cur: Mapping[int, Pose], tgt: Mapping[int, Pose],
                           mode: str, method: str, rng: random.Random,
                           weights: Mapping[int, float] | None = None) -> AllocationResult:
    g = dependency_graph_between(instance, cur, tgt)
    w = None if weights is None else {k: weights[k] for k in g.nodes}
    prim = primitive_plan(g, mode, w, rng)
    return allocate_buffers(instance, prim, method, np.random.default_rng(rng.getrandbits(63)), cur, tgt)


@dataclass
class _Node:
    arr: dict[int, Pose]
    parent: int | None
    actions: list[Action]


class _Tree:
    def __init__(self, root: Mapping[int, Pose]):
        self.nodes = [_Node(dict(root), None, [])]

    def add(self, parent: int, res: AllocationResult) -> int:
        self.nodes.append(_Node(res.end, parent, list(res.plan.actions)))
        return len(self.nodes) - 1

    def path(self, idx: int) -> list[Action]:
        """Actions from the root to node ``idx``."""
        chunks = []
        while idx is not None:
            n = self.nodes[idx]
            chunks.append(n.actions)
            idx = n.parent
        return [a for c in reversed(chunks) for a in c]

    def nearest(self, arr: Mapping[int, Pose]) -> int:
        return min(range(len(self.nodes)), key=lambda k: (arrangement_distance(self.nodes[k].arr, arr), k))


def reverse_actions(actions: Sequence[Action]) -> list[Action]:
    return [Action(a.obj, a.dst, a.src) for a in reversed(actions)]


@dataclass
class TrlbResult:
    success: bool
    plan: Plan | None
    elapsed_ms: float
    attempts: int
    info: dict = field(default_factory=dict)


def _solve_from(instance: Instance, framework: str, mode: str, method: str, rng: random.Random,
                deadline: float, weights) -> tuple[list[Action] | None, int]:
    A_s, A_g = dict(instance.start), dict(instance.goal)
    n = instance.n
    if framework == "OS":
        for attempt in range(1, 30 * max(n, 1) + 1):
            res = lazy_buffer_allocation(instance, A_s, A_g, mode, method, rng, weights)
            if res.success:
                return list(res.plan.actions), attempt
            if time.perf_counter() > deadline:
                return None, attempt
        return None, 30 * n
    if framework == "ST":
        tree = _Tree(A_s)
        attempt = 0
        while True:
            attempt += 1
            k = rng.randrange(len(tree.nodes))
            res = lazy_buffer_allocation(instance, tree.nodes[k].arr, A_g, mode, method, rng, weights)
            if res.success:
                return tree.path(k) + list(res.plan.actions), attempt
            if res.plan.actions:
                tree.add(k, res)
            if time.perf_counter() > deadline:
                return None, attempt
    if framework == "BST":
        t1, t2 = _Tree(A_s), _Tree(A_g)
        forward = True
        attempt = 0
        while True:
            attempt += 1
            k = rng.randrange(len(t1.nodes))
            res = lazy_buffer_allocation(instance, t1.nodes[k].arr, t2.nodes[0].arr, mode, method, rng, weights)
            new1 = t1.add(k, res) if res.plan.actions else k
            if res.success:
                a, b = t1.path(new1), []
                return (a + b, attempt) if forward else (reverse_actions(a), attempt)
            near = t2.nearest(t1.nodes[new1].arr)
            res2 = lazy_buffer_allocation(instance, t2.nodes[near].arr, t1.nodes[new1].arr, mode, method, rng, weights)
            new2 = t2.add(near, res2) if res2.plan.actions else near
            if res2.success:
                p1, p2 = t1.path(new1), t2.path(new2)
                if forward:
                    return p1 + reverse_actions(p2), attempt
                return p2 + reverse_actions(p1), attempt
            if time.perf_counter() > deadline:
                return None, attempt
            t1, t2 = t2, t1
            forward = not forward
    raise ValueError(f"unknown framework {framework!r}")


def trlb_solve(
    instance: Instance,
    framework: str = "BST",
    mode: str = "RBM",
    method: str = "SP",
    preprocess: bool = False,
    seed: int = 0,
    budget_ms: float = 300_000.0,
    weights: Mapping[int, float] | None = None,
) -> TrlbResult:
    """Plan with lazy buffer allocation inside one of the OS/ST/BST frameworks."""
    t0 = time.perf_counter()
    deadline = t0 + budget_ms / 1000.0
    rng = random.Random(seed)
    framework, mode, method = framework.upper(), mode.upper(), method.upper()
    prefix: list[Action] = []
    work = instance
    info: dict = {}
    if preprocess:
        pre = preprocess_unlabeled(instance, seed)
        prefix = list(pre.prefix.actions)
        work = pre.residual
        info["skipped_components"] = pre.skipped
    actions, attempts = _solve_from(work, framework, mode, method, rng, deadline, weights)
    elapsed = (time.perf_counter() - t0) * 1000.0
    meta = {"framework": framework, "mode": mode, "method": method, "seed": seed,
            "preprocess": preprocess, "elapsed_ms": elapsed}
    if actions is None:
        return TrlbResult(False, None, elapsed, attempts, info)
    plan = Plan(prefix + actions, meta)
    check = validate_plan(instance, plan)
    if not check.ok:
        raise AssertionError(f"planner produced an invalid plan: step {check.index}: {check.message}")
    return TrlbResult(True, plan, elapsed, attempts, info)


# ---------------------------------------------------------------------------
# unlabeled preprocessing


@dataclass
class PreprocessResult:
    prefix: Plan
    residual: Instance
    skipped: list[list[int]]
    processed: list[list[int]]


def _component_unlabeled(instance: Instance, comp: list[int], cur: Mapping[int, Pose]) -> UnlabeledDepGraph:
    edges = set()
    for s in comp:
        for g in comp:
            if collide(instance.shape(s), cur[s], instance.shape(g), instance.goal[g]):
                edges.add((s, g))
    return UnlabeledDepGraph(tuple(comp), tuple(comp), frozenset(edges))


def _closes_cycle(sits: dict[int, int], obj: int, owner: int) -> bool:
    """Would putting ``obj`` on ``owner``'s goal close a waiting cycle?

    ``sits[x] = y`` means x occupies y's goal, so y waits for x.
    """
    if obj == owner:
        return False
    x = obj
    seen = set()
    while x not in seen:
        seen.add(x)
        if x == owner:
            return True
        nxt = [y for y, z in sits.items() if z == x]
        if not nxt:
            return False
        x = nxt[0]
    return False


def preprocess_unlabeled(instance: Instance, seed: int = 0) -> PreprocessResult:
    """Move objects of each tangled component onto goal poses of that component.

    The assignment follows an optimal unlabeled removal order. Objects go to
    their own goal when possible and never close a waiting cycle; whatever
    is still in a buffer at the end stays there, clear of every goal.
    """
    rng = np.random.default_rng(seed)
    g = dependency_graph_between(instance, instance.start, instance.goal)
    cur = dict(instance.start)
    actions: list[Action] = []
    skipped, processed = [], []
    for comp in weakly_connected(g):
        sub = g.subgraph(comp)
        if len(comp) < 2 or is_simple_cycle(sub) or not sub.arcs or _acyclic(sub):
            continue
        if len({instance.shape(o) for o in comp}) != 1:
            skipped.append(comp)
            continue
        out = _preprocess_component(instance, comp, cur, rng)
        if out is None:
            skipped.append(comp)
            continue
        actions += out
        for a in out:
            cur[a.obj] = a.dst
        processed.append(comp)
    residual = instance.with_arrangements(cur, instance.goal, preprocessed=True)
    return PreprocessResult(Plan(actions, {"stage": "preprocess"}), residual, skipped, processed)


def _acyclic(g: LabeledDepGraph) -> bool:
    import networkx as nx
    return nx.is_directed_acyclic_graph(g.digraph())


def _preprocess_component(instance: Instance, comp: list[int], cur0: Mapping[int, Pose],
                          rng: np.random.Generator, rounds: int = 5, orders: int = 10) -> list[Action] | None:
    """Try several optimal unlabeled removal orders.

    Buffered objects are held back when that avoids waiting cycles; if no
    buffer pose can be found that way, buffers drain into any free goal.
    """
    order_rng = random.Random(int(rng.integers(1 << 62)))
    for attempt in range(orders):
        for strict in (True, False):
            out = _assign_component(instance, comp, cur0, rng, rounds, strict,
                                    None if attempt == 0 else order_rng)
            if out is not None:
                return out
    return None


def _assign_component(instance: Instance, comp: list[int], cur0: Mapping[int, Pose],
                      rng: np.random.Generator, rounds: int, strict: bool,
                      order_rng: random.Random | None) -> list[Action] | None:
    ug = _component_unlabeled(instance, comp, cur0)
    seq = list(mrb_dfdp(ug, rng=order_rng).plan.ordering)
    at_start = set(comp)
    removed: set[int] = set()
    filled: dict[int, int] = {}    # goal owner -> object sitting on it
    sits: dict[int, int] = {}      # object -> goal owner
    buffered: list[int] = []
    moves: list[tuple[int, str, int]] = []   # (object, "goal" | "buf", goal owner or stint id)
    stints: list[list] = []        # [object, entry move index, exit move index or None]
    open_stint: dict[int, int] = {}

    def free_goals() -> list[int]:
        return [v for v in sorted(removed) if v not in filled]

    def put(o: int, owner: int):
        if o in open_stint:
            stints[open_stint.pop(o)][2] = len(moves)
        moves.append((o, "goal", owner))
        filled[owner] = o
        sits[o] = owner

    def to_buffer(o: int):
        open_stint[o] = len(stints)
        stints.append([o, len(moves), None])
        moves.append((o, "buf", open_stint[o]))
        buffered.append(o)

    def pick_goal(o: int, cands: list[int], force: bool = False) -> int | None:
        if o in cands:
            return o
        ok = [v for v in cands if not _closes_cycle(sits, o, v)]
        if not ok and force:
            ok = cands
        return ok[0] if ok else None

    def drain():
        moved = True
        while moved:
            moved = False
            for o in list(buffered):
                v = pick_goal(o, free_goals(), not strict)
                if v is not None:
                    buffered.remove(o)
                    put(o, v)
                    moved = True

    for v in seq:
        blockers = sorted(s for s in ug.goal_neighbors(v) if s in at_start)
        for k, o in enumerate(blockers):
            at_start.discard(o)
            last = k == len(blockers) - 1
            cands = free_goals() + ([v] if last and v not in filled else [])
            t = pick_goal(o, cands)
            if t is None:
                to_buffer(o)
            else:
                if t == v:
                    removed.add(v)
                put(o, t)
        removed.add(v)
        drain()
    drain()
    return _realize_moves(instance, cur0, moves, stints, rng, rounds)


def _realize_moves(instance: Instance, cur0: Mapping[int, Pose], moves, stints, rng, rounds) -> list[Action] | None:
    """Concrete buffer poses for symbolic moves.

    A buffer avoids everything on the table when it is entered, every pose
    placed while it is occupied, and buffers whose stays overlap it.
    """
    snapshots = []
    cur = dict(cur0)
    for o, kind, ref in moves:
        snapshots.append(dict(cur))
        cur[o] = instance.goal[ref] if kind == "goal" else None
    n_moves = len(moves)
    base = []
    for o, entry, exit_ in stints:
        stop = n_moves if exit_ is None else exit_
        obst = [(instance.shape(x), p) for x, p in snapshots[entry].items() if x != o and p is not None]
        obst += [(instance.shape(m[0]), instance.goal[m[2]]) for m in moves[entry + 1:stop] if m[1] == "goal"]
        base.append((stop, obst))
    for _ in range(rounds):
        poses: list[Pose | None] = []
        for k, (o, entry, exit_) in enumerate(stints):
            stop, obst = base[k]
            extra = [(instance.shape(stints[j][0]), poses[j]) for j in range(k)
                     if base[j][0] > entry]
            p = None
            if exit_ is None:
                goals = [(instance.shape(x), instance.goal[x]) for x in instance.ids]
                p = _sample_pose(instance, instance.shape(o), obst + extra + goals, rng)
            if p is None:
                p = _sample_pose(instance, instance.shape(o), obst + extra, rng)
            if p is None:
                break
            poses.append(p)
        else:
            break
    else:
        return None
    actions = []
    cur = dict(cur0)
    for o, kind, ref in moves:
        dst = instance.goal[ref] if kind == "goal" else poses[ref]
        actions.append(Action(o, cur[o], dst))
        cur[o] = dst
    return actions


# ---------------------------------------------------------------------------
# weighting heuristics and costs


def hecp_weight(shape: Shape, mean_area: float, w: float, h: float) -> float:
    if mean_area <= 0 or shape.area() <= 0:
        raise ValueError("footprint areas must be positive")
    r = math.sqrt(mean_area / math.pi)
    if r >= min(w, h) / 2:
        raise ValueError("average disc does not fit into the workspace")
    if isinstance(shape, Polygon):
        from .geometry import _is_convex
        if not _is_convex(shape.local()):
            raise ValueError("footprint must be convex")
    return (shape.area() + mean_area + r * shape.perimeter()) / ((h - 2 * r) * (w - 2 * r))


def hecp_weights(instance: Instance) -> dict[int, float]:
    """Collision probability of each footprint against a disc of average area."""
    areas = [instance.shape(o).area() for o in instance.ids]
    if min(areas) <= 0:
        raise ValueError("footprint areas must be positive")
    mean = sum(areas) / len(areas)
    ws = instance.workspace
    return {o: hecp_weight(instance.shape(o), mean, ws.w, ws.h) for o in instance.ids}


def heti_weights(instance: Instance) -> dict[int, float]:
    out = {}
    for o in instance.ids:
        f = instance.spec(o).impedance
        if f is None:
            raise ValueError(f"object {o} has no impedance")
        if f < 0:
            raise ValueError("impedance must be non-negative")
        out[o] = float(f)
    return out


def plan_cost(plan: Plan, objective: str = "PP", impedances: Mapping[int, float] | None = None) -> float:
    objective = objective.upper()
    if objective == "PP":
        return float(plan.action_count)
    if objective == "TI":
        if impedances is None:
            raise ValueError("TI needs impedances")
        return float(sum(impedances[a.obj] for a in plan.actions))
    raise ValueError(f"unknown objective {objective!r}")
