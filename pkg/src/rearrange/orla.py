"""Travel-aware rearrangement with lazily placed buffers.

Search states come in two kinds. Deterministic states have every object at a
known pose. Pending states have some object parked at a buffer whose pose is
only chosen once all parked objects have left again; the cost of a pending
state is a lower bound that never looks at concrete buffer poses.

Travel is either the Euclidean path of the end effector (``EE``) or the arc
length a mobile base covers along the table boundary (``MB``).
"""
from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .geometry import EPS, Disc, Instance, Pose, Track, collide, inside_workspace
from .plans import Action, Plan, validate_plan

DEFAULT_C = 10.0
ACTION_WEIGHT = 1e6
SAMPLES_PER_ROUND = 64
Point = tuple[float, float]
PoseCheck = Callable[[Instance, int, Pose], bool]


@dataclass(frozen=True)
class CostModel:
    scenario: str = "EE"
    C: float = DEFAULT_C
    track: Track | None = None

    def __post_init__(self):
        if self.scenario not in ("EE", "MB"):
            raise ValueError("scenario must be EE or MB")
        if self.C < 0:
            raise ValueError("manipulation cost must be non-negative")
        if self.scenario == "MB" and self.track is None:
            raise ValueError("the MB scenario needs a track")

    @classmethod
    def for_instance(cls, instance: Instance, scenario: str = "EE", C: float = DEFAULT_C) -> "CostModel":
        scenario = scenario.upper()
        return cls(scenario, C, Track.of(instance.workspace) if scenario == "MB" else None)

    def base(self, p: Point) -> float:
        return self.track.project(p[0], p[1])

    def dist(self, a: Point, b: Point) -> float:
        if self.scenario == "EE":
            return math.dist(a, b)
        return self.track.distance(self.base(a), self.base(b))

    def path(self, pts: Sequence[Point]) -> float:
        return sum(self.dist(a, b) for a, b in zip(pts, pts[1:]))


def home_point(instance: Instance) -> Point:
    """Where the robot starts: the middle of the table's near edge."""
    return (instance.workspace.w / 2, 0.0)


def plan_waypoints(instance: Instance, plan: Plan) -> list[Point]:
    pts = [home_point(instance)]
    for a in plan.actions:
        pts += [a.src.xy, a.dst.xy]
    return pts


def plan_cost(instance: Instance, plan: Plan, model: CostModel) -> dict:
    pts = plan_waypoints(instance, plan)
    dist = model.path(pts)
    mani = model.C * len(plan.actions)
    out = {"J": dist + mani, "dist": dist, "mani": mani}
    if model.scenario == "MB":
        out["base_trace"] = [model.base(p) for p in pts]
    return out


# ---------------------------------------------------------------------------
# buffer-pose geometry


def fermat_point(a: Point, b: Point, c: Point) -> Point:
    """Point minimizing the summed distance to three points."""
    P = [np.asarray(a, float), np.asarray(b, float), np.asarray(c, float)]
    sides = [np.linalg.norm(P[(k + 1) % 3] - P[(k + 2) % 3]) for k in range(3)]
    if min(sides) < 1e-15:
        # two coincide: the doubled point wins
        for k in range(3):
            for m in range(k + 1, 3):
                if np.linalg.norm(P[k] - P[m]) < 1e-15:
                    return tuple(P[k])
    angles = []
    for k in range(3):
        u, v = P[(k + 1) % 3] - P[k], P[(k + 2) % 3] - P[k]
        cosang = float(np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v)))
        angles.append(math.acos(max(-1.0, min(1.0, cosang))))
    for k in range(3):
        if angles[k] >= 2 * math.pi / 3 - 1e-12:
            return tuple(P[k])
    w = [sides[k] / math.sin(angles[k] + math.pi / 3) for k in range(3)]
    s = sum(w)
    q = sum(w[k] * P[k] for k in range(3)) / s
    return (float(q[0]), float(q[1]))


def _segments_intersection(p1, p2, p3, p4) -> Point | None:
    """Proper crossing point of segments p1p2 and p3p4."""
    d1 = np.subtract(p2, p1)
    d2 = np.subtract(p4, p3)
    den = d1[0] * d2[1] - d1[1] * d2[0]
    if abs(den) < 1e-14:
        return None
    r = np.subtract(p3, p1)
    t = (r[0] * d2[1] - r[1] * d2[0]) / den
    u = (r[0] * d1[1] - r[1] * d1[0]) / den
    if -1e-12 <= t <= 1 + 1e-12 and -1e-12 <= u <= 1 + 1e-12:
        return (p1[0] + t * d1[0], p1[1] + t * d1[1])
    return None


def _sum_dist(p: Point, pts: Sequence[Point], model: CostModel) -> float:
    return sum(model.dist(p, q) for q in pts)


@dataclass(frozen=True)
class BufferRegion:
    """Points (EE) or track arcs (MB) attaining the least summed travel."""

    scenario: str
    points: tuple[Point, ...] = ()
    arcs: tuple[tuple[float, float], ...] = ()
    value: float = 0.0


def distance_refinement(p_s: Point, p_n: Point | None, p_g: Point, model: CostModel) -> float:
    """Extra travel a parked object adds beyond the straight hop p_s -> p_n.

    With ``p_n`` unknown only the two transfer legs through the buffer are
    bounded, which is at least the straight line from p_s to p_g.
    """
    if p_n is None:
        return model.dist(p_s, p_g)
    pts = (p_s, p_n, p_g)
    if model.scenario == "EE":
        pb = fermat_point(*pts)
        total = _sum_dist(pb, pts, model)
    else:
        total = min(_sum_dist(p, pts, model) for p in pts)
    return total - model.dist(p_s, p_n)


def optimal_buffer_region(points: Sequence[Point], model: CostModel) -> BufferRegion:
    pts = [tuple(map(float, p)) for p in points]
    if not pts:
        raise ValueError("need at least one visit point")
    if model.scenario == "EE":
        if len(pts) == 1:
            best = pts[0]
        elif len(pts) == 2:
            best = ((pts[0][0] + pts[1][0]) / 2, (pts[0][1] + pts[1][1]) / 2)
        elif len(pts) == 3:
            best = fermat_point(*pts)
        else:
            best = None
            for a, b, c, d in ((0, 1, 2, 3), (0, 2, 1, 3), (0, 3, 1, 2)):
                x = _segments_intersection(pts[a], pts[b], pts[c], pts[d])
                if x is not None and len({pts[a], pts[b], pts[c], pts[d]}) == 4:
                    best = x
                    break
            if best is None:
                best = min(pts, key=lambda p: _sum_dist(p, pts, model))
            else:
                alt = min(pts, key=lambda p: _sum_dist(p, pts, model))
                if _sum_dist(alt, pts, model) < _sum_dist(best, pts, model) - 1e-12:
                    best = alt
        return BufferRegion("EE", (best,), (), _sum_dist(best, pts, model))
    tr = model.track
    bases = [model.base(p) for p in pts]
    cands = sorted({b % tr.length for b in bases} | {tr.opposite(b) for b in bases})

    def total(s: float) -> float:
        return sum(tr.distance(s, b) for b in bases)

    vals = [total(s) for s in cands]
    low = min(vals)
    tol = 1e-9 * max(1.0, tr.length)
    best_pts = tuple(tr.point(s) for s, v in zip(cands, vals) if v <= low + tol)
    arcs = []
    k = len(cands)
    for m in range(k):
        s0, s1 = cands[m], cands[(m + 1) % k]
        if k > 1 and vals[m] <= low + tol and vals[(m + 1) % k] <= low + tol:
            arcs.append((s0, s1 if m + 1 < k else s1 + tr.length))
    arcs_t = tuple(arcs) or tuple((s, s) for s, v in zip(cands, vals) if v <= low + tol)
    return BufferRegion("MB", best_pts, arcs_t, low)


def _inward(tr: Track, s: float) -> tuple[float, float]:
    s %= tr.length
    if s < tr.w:
        return (0.0, 1.0)
    if s < tr.w + tr.h:
        return (-1.0, 0.0)
    if s < 2 * tr.w + tr.h:
        return (0.0, -1.0)
    return (1.0, 0.0)


def _flat_ok(instance: Instance, obj: int, pose: Pose, avoid: Sequence[tuple[int, Pose]]) -> bool:
    shape = instance.shape(obj)
    if not inside_workspace(shape, pose, instance.workspace):
        return False
    return not any(collide(shape, pose, instance.shape(j), q) for j, q in avoid)


@dataclass
class SampledBuffer:
    pose: Pose | None
    rounds: int
    cost: float


def _feasible_mask(instance: Instance, obj: int, xs: np.ndarray, ys: np.ndarray, ths: np.ndarray,
                   avoid: Sequence[tuple[int, Pose]], pose_check: PoseCheck | None) -> np.ndarray:
    shape = instance.shape(obj)
    ws = instance.workspace
    if isinstance(shape, Disc) and pose_check is None and all(isinstance(instance.shape(j), Disc) for j, _ in avoid):
        r = shape.radius
        ok = (xs >= r - EPS) & (xs <= ws.w - r + EPS) & (ys >= r - EPS) & (ys <= ws.h - r + EPS)
        for j, q in avoid:
            rr = r + instance.shape(j).radius
            ok &= (xs - q.x) ** 2 + (ys - q.y) ** 2 >= (rr - EPS) ** 2
        return ok
    out = np.zeros(len(xs), dtype=bool)
    for k in range(len(xs)):
        p = Pose(float(xs[k]), float(ys[k]), float(ths[k]))
        out[k] = _flat_ok(instance, obj, p, avoid) and (pose_check is None or pose_check(instance, obj, p))
    return out


def buffer_sampling(instance: Instance, obj: int, visits: Sequence[Point], avoid: Sequence[tuple[int, Pose]],
                    model: CostModel, rng: np.random.Generator, candidates: Sequence[Pose] | None = None,
                    pose_check: PoseCheck | None = None, per_round: int = SAMPLES_PER_ROUND) -> SampledBuffer:
    """Sample near the cheapest region and widen it until a feasible pose shows up.

    Within the first round that yields feasible poses the cheapest one is kept.
    With ``candidates`` only those poses are considered.
    """

    def cost(p: Pose) -> float:
        return _sum_dist(p.xy, visits, model) if visits else 0.0

    if candidates is not None:
        feas = [p for p in candidates if _flat_ok(instance, obj, p, avoid)
                and (pose_check is None or pose_check(instance, obj, p))]
        if not feas:
            return SampledBuffer(None, 1, math.inf)
        best = min(feas, key=cost)
        return SampledBuffer(best, 1, cost(best))
    ws = instance.workspace
    shape = instance.shape(obj)
    rotate = not isinstance(shape, Disc)
    region = optimal_buffer_region(visits, model) if visits else BufferRegion(
        model.scenario, ((ws.w / 2, ws.h / 2),), ((0.0, model.track.length),) if model.track else (), 0.0)
    if model.scenario == "EE":
        limit, step = math.hypot(ws.w, ws.h), 0.04 * math.hypot(ws.w, ws.h)
    else:
        limit, step = model.track.length / 2, 0.04 * model.track.length
    rounds = 0
    radius = 0.0
    while True:
        rounds += 1
        k = per_round if radius > 0 or model.scenario == "MB" else len(region.points)
        if model.scenario == "EE":
            c = np.asarray(region.points, float)[rng.integers(len(region.points), size=k)] if radius > 0 \
                else np.asarray(region.points, float)
            ang = rng.uniform(0, 2 * math.pi, k)
            rr = radius * np.sqrt(rng.uniform(0, 1, k))
            xs, ys = c[:, 0] + rr * np.cos(ang), c[:, 1] + rr * np.sin(ang)
        else:
            tr = model.track
            depth_max = max(min(ws.w, ws.h) / 2, 1e-9)
            arcs = np.asarray(region.arcs, float)[rng.integers(len(region.arcs), size=k)]
            s = rng.uniform(arcs[:, 0] - radius, arcs[:, 1] + radius)
            depth = rng.uniform(min(shape.bounding_radius(), depth_max), depth_max, k)
            pts = np.array([tr.point(v) for v in s])
            nrm = np.array([_inward(tr, v) for v in s])
            xs, ys = pts[:, 0] + nrm[:, 0] * depth, pts[:, 1] + nrm[:, 1] * depth
        ths = rng.uniform(0, 2 * math.pi, k) if rotate else np.zeros(k)
        mask = _feasible_mask(instance, obj, xs, ys, ths, avoid, pose_check)
        if mask.any():
            feas = [Pose(float(x), float(y), float(t)) for x, y, t in zip(xs[mask], ys[mask], ths[mask])]
            best = min(feas, key=cost)
            return SampledBuffer(best, rounds, cost(best))
        if radius >= limit:
            return SampledBuffer(None, rounds, math.inf)
        radius += step


# ---------------------------------------------------------------------------
# search

# a pending move: (object index, from pose or None, to pose or None); None is a parked buffer
_Mv = tuple[int, Pose | None, Pose | None]


@dataclass(eq=False)
class _Node:
    kind: str
    poses: tuple[Pose | None, ...]
    f: float
    g: float | None = None
    anchor: "_Node | None" = None
    pending: tuple[_Mv, ...] = ()
    segment: tuple[Action, ...] = ()
    robot: Point | None = None
    prev: "_Node | None" = None
    actions: int = 0
    repair: bool = False


@dataclass
class OrlaResult:
    success: bool
    plan: Plan | None
    J: float | None
    dist: float | None
    mani: float | None
    expanded: int
    elapsed_ms: float
    info: dict = field(default_factory=dict)


class _Orla:
    def __init__(self, instance: Instance, model: CostModel, objective: str, seed: int,
                 candidates: Sequence[Pose] | None, pose_check: PoseCheck | None):
        self.inst = instance
        self.model = model
        self.ids = list(instance.ids)
        self.n = len(self.ids)
        self.goal = [instance.goal[o] for o in self.ids]
        self.shapes = [instance.shape(o) for o in self.ids]
        self.wc = model.C if objective == "FULL" else ACTION_WEIGHT
        self.rng = np.random.default_rng(seed)
        self.candidates = candidates
        self.pose_check = pose_check

    def d(self, a: Point, b: Point) -> float:
        return self.model.dist(a, b)

    def at_goal(self, i: int, p: Pose | None) -> bool:
        return p is not None and p.close_to(self.goal[i], 1e-9)

    def h_ds(self, poses: Sequence[Pose]) -> float:
        return sum(self.d(p.xy, self.goal[i].xy) + self.wc for i, p in enumerate(poses) if not self.at_goal(i, p))

    def moves(self, poses: Sequence[Pose | None]) -> list[tuple[int, Pose | None]]:
        out = []
        for i, p in enumerate(poses):
            if self.at_goal(i, p):
                continue
            free = all(q is None or j == i or not collide(self.shapes[i], self.goal[i], self.shapes[j], q)
                       for j, q in enumerate(poses))
            if free:
                out.append((i, self.goal[i]))
            elif p is not None:
                blocks = any(j != i and not self.at_goal(j, q) and
                             collide(self.shapes[i], p, self.shapes[j], self.goal[j])
                             for j, q in enumerate(poses))
                if blocks:
                    out.append((i, None))
        return out

    def waypoints(self, anchor: _Node, pending: Sequence[_Mv]) -> list[Point | None]:
        pts: list[Point | None] = [anchor.robot]
        for _, src, dst in pending:
            pts.append(None if src is None else src.xy)
            pts.append(None if dst is None else dst.xy)
        return pts

    def f_pending(self, anchor: _Node, pending: Sequence[_Mv], poses: Sequence[Pose | None]) -> float:
        """Lower bound on any completion through a state with parked objects."""
        c = anchor.g + self.wc * len(pending)
        pts = self.waypoints(anchor, pending)
        det = [p for p in pts if p is not None]
        c += self.model.path(det)
        for i, p in enumerate(poses):
            if self.at_goal(i, p):
                continue
            c += self.wc
            if p is not None:
                c += self.d(p.xy, self.goal[i].xy)
                continue
            k = max(m for m, mv in enumerate(pending) if mv[0] == i and mv[2] is None)
            place_at = 2 + 2 * k
            p_s = pts[place_at - 1]
            if place_at + 1 >= len(pts):
                c += distance_refinement(p_s, None, self.goal[i].xy, self.model)
            elif pts[place_at + 1] is not None:
                c += distance_refinement(p_s, pts[place_at + 1], self.goal[i].xy, self.model)
        return c

    def allocate(self, anchor: _Node, pending: Sequence[_Mv]) -> tuple[dict[int, Pose], int | None]:
        """Concrete poses for every parked stint, in the order objects were parked."""
        stints = []
        for k, (i, src, dst) in enumerate(pending):
            if dst is None:
                out = next(m for m in range(k + 1, len(pending)) if pending[m][0] == i)
                stints.append((k, out, i))
        chosen: dict[int, Pose] = {}  # keyed by the parking move index
        state = list(anchor.poses)
        snapshots = [list(state)]
        for i, src, dst in pending:
            state[i] = dst
            snapshots.append(list(state))

        def resolve(k: int, which: int) -> Pose | None:
            i, src, dst = pending[k]
            p = src if which == 0 else dst
            if p is not None:
                return p
            if which == 1:
                return chosen.get(k)
            back = max(m for m in range(k) if pending[m][0] == i and pending[m][2] is None)
            return chosen.get(back)

        def resolved_state(step: int) -> list[tuple[int, Pose]]:
            out = []
            for j, p in enumerate(snapshots[step]):
                if p is None:
                    back = [m for m in range(step) if pending[m][0] == j and pending[m][2] is None]
                    p = chosen.get(back[-1]) if back else None
                if p is not None:
                    out.append((j, p))
            return out

        def avoid_for(k_in: int, k_out: int, i: int) -> list[tuple[int, Pose]]:
            avoid = [(self.ids[j], p) for j, p in resolved_state(k_in) if j != i]
            for m in range(k_in + 1, k_out):
                j = pending[m][0]
                if j == i:
                    continue
                for which in (0, 1):
                    p = resolve(m, which)
                    if p is not None:
                        avoid.append((self.ids[j], p))
            return avoid

        if self.candidates is not None and len(stints) > 1:
            # small candidate sets: pick all stints jointly so the segment cost is exact
            best, best_cost = None, math.inf
            for combo in itertools.product(self.candidates, repeat=len(stints)):
                chosen = {k_in: p for (k_in, _, _), p in zip(stints, combo)}
                if not all(_flat_ok(self.inst, self.ids[i], chosen[k_in], avoid_for(k_in, k_out, i))
                           and (self.pose_check is None or self.pose_check(self.inst, self.ids[i], chosen[k_in]))
                           for k_in, k_out, i in stints):
                    continue
                c = self.realize(anchor, pending, chosen, len(pending)).g
                if c < best_cost:
                    best, best_cost = dict(chosen), c
            if best is not None:
                return best, None
            chosen = {}

        for k_in, k_out, i in stints:
            avoid = avoid_for(k_in, k_out, i)
            visits: list[Point] = []
            for p in (resolve(k_in, 0), resolve(k_in + 1, 0) if k_in + 1 < len(pending) else None,
                      resolve(k_out - 1, 1), resolve(k_out, 1)):
                if p is not None:
                    visits.append(p.xy)
            res = buffer_sampling(self.inst, self.ids[i], visits, avoid, self.model, self.rng,
                                  self.candidates, self.pose_check)
            if res.pose is None:
                return chosen, k_in
            chosen[k_in] = res.pose
        return chosen, None

    def realize(self, anchor: _Node, pending: Sequence[_Mv], chosen: dict[int, Pose], upto: int) -> _Node:
        acts = []
        poses = list(anchor.poses)
        last = {}
        for k in range(upto):
            i, src, dst = pending[k]
            s = src if src is not None else chosen[last[i]]
            t = dst if dst is not None else chosen[k]
            if dst is None:
                last[i] = k
            acts.append(Action(self.ids[i], s, t))
            poses[i] = t
        pts = [anchor.robot] + [p for a in acts for p in (a.src.xy, a.dst.xy)]
        g = anchor.g + self.model.path(pts) + self.wc * len(acts)
        robot = pts[-1]
        f = g + self.h_ds(poses)
        return _Node("DS", tuple(poses), f, g, None, (), tuple(acts), robot, anchor, anchor.actions + len(acts))


def f_nds(instance: Instance, model: CostModel, moves: Sequence[tuple[int, str]], objective: str = "full") -> float:
    """Lower bound for the state reached from the start by ``moves``.

    Each move is ``(object id, "G" | "B")``; ``B`` parks the object at a
    buffer that has not been placed yet.
    """
    S = _Orla(instance, model, objective.upper(), 0, None, None)
    root = _Node("DS", tuple(instance.start[o] for o in S.ids), 0.0, 0.0, None, (), (), home_point(instance))
    poses = list(root.poses)
    pending: list[_Mv] = []
    for obj, where in moves:
        i = S.ids.index(obj)
        dst = S.goal[i] if where.upper() == "G" else None
        pending.append((i, poses[i], dst))
        poses[i] = dst
    return S.f_pending(root, pending, poses)


def _ds_key(node: _Node) -> tuple:
    return (tuple((round(p.x, 9), round(p.y, 9), round(p.theta, 9)) for p in node.poses),
            (round(node.robot[0], 9), round(node.robot[1], 9)))


def orla_star(instance: Instance, model: CostModel | None = None, objective: str = "full",
              budget: int = 200_000, budget_ms: float | None = None, seed: int = 0,
              candidates: Sequence[Pose] | None = None, pose_check: PoseCheck | None = None) -> OrlaResult:
    """Lazy A* from the start to the goal arrangement.

    ``objective`` is ``full`` (travel plus C per action) or ``action`` (fewest
    actions, travel as tie-break).
    """
    t0 = time.perf_counter()
    objective = objective.upper()
    if objective not in ("FULL", "ACTION"):
        raise ValueError("objective must be full or action")
    model = model or CostModel.for_instance(instance)
    S = _Orla(instance, model, objective, seed, candidates, pose_check)
    root_poses = tuple(instance.start[o] for o in S.ids)
    root = _Node("DS", root_poses, 0.0, 0.0, None, (), (), home_point(instance))
    root.f = S.h_ds(root_poses)
    tick = itertools.count()
    pq = [(root.f, next(tick), root)]
    best_g = {_ds_key(root): 0.0}
    expanded = 0
    last_f = -math.inf
    monotone = True
    repairs = 0
    while pq:
        f, _, node = heapq.heappop(pq)
        if node.kind == "DS" and node.g > best_g.get(_ds_key(node), math.inf) + 1e-12:
            continue
        if f < last_f - 1e-9:
            monotone = False
        last_f = max(last_f, f)
        if node.kind == "DS" and all(S.at_goal(i, p) for i, p in enumerate(node.poses)):
            segs = []
            cur = node
            kinds = []
            while cur is not None:
                segs.append(cur.segment)
                cur = cur.prev
            acts = [a for seg in reversed(segs) for a in seg]
            plan = Plan(acts, {"objective": objective.lower(), "scenario": model.scenario})
            cost = plan_cost(instance, plan, model)
            plan.meta.update(cost)
            ok = validate_plan(instance, plan)
            if not ok:
                raise RuntimeError(f"planner produced an invalid plan: {ok.message}")
            kinds = _state_kinds(instance, plan)
            info = {"f_monotone": monotone, "states": kinds, "repairs": repairs, "g_goal": node.g}
            if "base_trace" in cost:
                info["base_trace"] = cost["base_trace"]
            return OrlaResult(True, plan, cost["J"], cost["dist"], cost["mani"], expanded,
                              (time.perf_counter() - t0) * 1e3, info)
        expanded += 1
        if expanded > budget or (budget_ms is not None and (time.perf_counter() - t0) * 1e3 > budget_ms):
            break
        anchor = node if node.kind == "DS" else node.anchor
        pending = node.pending if node.kind == "NDS" else ()
        for i, dst in S.moves(node.poses):
            src = node.poses[i]
            new_pending = pending + ((i, src, dst),)
            poses = list(node.poses)
            poses[i] = dst
            if any(p is None for p in poses):
                cf = S.f_pending(anchor, new_pending, poses)
                child = _Node("NDS", tuple(poses), max(cf, f), None, anchor, new_pending)
                heapq.heappush(pq, (child.f, next(tick), child))
                continue
            chosen, failed = S.allocate(anchor, new_pending)
            if failed is None:
                child = S.realize(anchor, new_pending, chosen, len(new_pending))
            else:
                repairs += 1
                if failed == 0:
                    continue
                child = S.realize(anchor, new_pending, chosen, failed)
                child.repair = True
            child.f = max(child.f, f)
            key = _ds_key(child)
            if child.g < best_g.get(key, math.inf) - 1e-12:
                best_g[key] = child.g
                heapq.heappush(pq, (child.f, next(tick), child))
    return OrlaResult(False, None, None, None, None, expanded, (time.perf_counter() - t0) * 1e3,
                      {"f_monotone": monotone, "repairs": repairs})


def _state_kinds(instance: Instance, plan: Plan) -> list[str]:
    """Label each visited arrangement as DS or NDS from the plan alone."""
    kinds = ["DS"]
    parked: set[int] = set()
    for a in plan.actions:
        if a.dst.close_to(instance.goal[a.obj], 1e-9):
            parked.discard(a.obj)
        else:
            parked.add(a.obj)
        kinds.append("NDS" if parked else "DS")
    return kinds


# ---------------------------------------------------------------------------
# exhaustive oracle for tiny instances


def grid_candidates(instance: Instance) -> list[Pose]:
    """Eight buffer candidates: a 3 x 3 grid inside the table minus its center."""
    ws = instance.workspace
    r = max(instance.shape(o).bounding_radius() for o in instance.ids)
    xs = (r, ws.w / 2, ws.w - r)
    ys = (r, ws.h / 2, ws.h - r)
    return [Pose(x, y, 0.0) for x in xs for y in ys if not (x == ws.w / 2 and y == ws.h / 2)]


def exhaustive_concrete(instance: Instance, model: CostModel, candidates: Sequence[Pose],
                        objective: str = "full") -> float | None:
    """Dijkstra over concrete arrangements with buffers drawn from ``candidates``.

    Parked objects may block other goals here, so this space contains every
    plan the lazy search can return and its optimum is a lower bound.
    """
    S = _Orla(instance, model, objective.upper(), 0, candidates, None)
    poses0 = tuple(instance.start[o] for o in S.ids)
    tick = itertools.count()
    pq = [(0.0, next(tick), poses0, home_point(instance))]
    seen: set = set()
    while pq:
        g, _, poses, robot = heapq.heappop(pq)
        if (poses, robot) in seen:
            continue
        seen.add((poses, robot))
        if all(S.at_goal(i, p) for i, p in enumerate(poses)):
            return g
        for i, dst in S.moves(poses):
            others = [(S.ids[j], q) for j, q in enumerate(poses) if j != i]
            targets = [dst] if dst is not None else [c for c in candidates if _flat_ok(instance, S.ids[i], c, others)]
            for t in targets:
                nxt = list(poses)
                nxt[i] = t
                cost = g + model.dist(robot, poses[i].xy) + model.dist(poses[i].xy, t.xy) + S.wc
                if (tuple(nxt), t.xy) not in seen:
                    heapq.heappush(pq, (cost, next(tick), tuple(nxt), t.xy))
    return None


def exhaustive_orla(instance: Instance, model: CostModel, candidates: Sequence[Pose],
                    objective: str = "full") -> float | None:
    """Cheapest plan over every rule-following move order with parked objects
    kept out of the way, times every candidate choice for each stint."""
    S = _Orla(instance, model, objective.upper(), 0, candidates, None)
    root = _Node("DS", tuple(instance.start[o] for o in S.ids), 0.0, 0.0, None, (), (), home_point(instance))
    seqs: list[tuple[_Mv, ...]] = []

    def walk(poses: tuple, pending: tuple) -> None:
        if all(S.at_goal(i, p) for i, p in enumerate(poses)):
            seqs.append(pending)
            return
        for i, dst in S.moves(poses):
            nxt = list(poses)
            nxt[i] = dst
            walk(tuple(nxt), pending + ((i, poses[i], dst),))

    walk(root.poses, ())
    best = math.inf
    for pend in seqs:
        stints = [k for k, mv in enumerate(pend) if mv[2] is None]
        for combo in itertools.product(candidates, repeat=len(stints)):
            chosen = dict(zip(stints, combo))
            node = S.realize(root, pend, chosen, len(pend))
            if node.g < best and validate_plan(instance, Plan(list(node.segment))) \
                    and _stays_clear(pend, chosen, S):
                best = node.g
    return None if best == math.inf else best


def _stays_clear(pend: Sequence[_Mv], chosen: dict[int, Pose], S: _Orla) -> bool:
    """A parked object must clear both ends of every move made during its stay."""
    parked_at: dict[int, int] = {}
    spans = []
    for m, (j, src, dst) in enumerate(pend):
        if src is None:
            spans.append((parked_at.pop(j), m, j))
        if dst is None:
            parked_at[j] = m
    for k_in, k_out, i in spans:
        where: dict[int, int] = {}
        for m in range(k_in + 1, k_out):
            j, src, dst = pend[m]
            ends = [src if src is not None else chosen[where[j]] if j in where else
                    chosen[max(x for x in range(m) if pend[x][0] == j and pend[x][2] is None)],
                    dst if dst is not None else chosen[m]]
            if dst is None:
                where[j] = m
            if j != i and any(collide(S.shapes[i], chosen[k_in], S.shapes[j], p) for p in ends):
                return False
    return True


def swap_example() -> Instance:
    """Two discs that must trade places."""
    from .geometry import ObjectSpec, Workspace

    ws = Workspace(1.0, 1.0)
    objs = (ObjectSpec(1, Disc(0.12)), ObjectSpec(2, Disc(0.12)))
    start = {1: Pose(0.35, 0.5, 0.0), 2: Pose(0.65, 0.5, 0.0)}
    goal = {1: Pose(0.65, 0.5, 0.0), 2: Pose(0.35, 0.5, 0.0)}
    return Instance(ws, objs, start, goal, True, None, {"name": "two_disc_swap"})
