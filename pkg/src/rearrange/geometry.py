"""Planar footprints, poses, collision predicates and instance generation.

Objects are modelled by their 2-D footprint only. Three footprint kinds are
supported: discs, convex polygons (counter-clockwise, local frame) and
rectangles. Two footprints collide when their interiors intersect; contact
within ``EPS`` is not a collision.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

EPS = 1e-9
TWO_PI = 2.0 * math.pi

RHO_MAX_DISC = 0.6
RHO_MAX_POLYGON = 0.45
JIGGLE_ROUNDS = 200


class GenerationError(RuntimeError):
    """Raised when a random arrangement cannot be produced within budget."""


# ---------------------------------------------------------------------------
# shapes and poses


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        t = math.fmod(float(self.theta), TWO_PI)
        if t < 0.0:
            t += TWO_PI
        if t >= TWO_PI:
            t = 0.0
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", t)

    @property
    def xy(self) -> tuple[float, float]:
        return (self.x, self.y)

    def as_list(self) -> list[float]:
        return [self.x, self.y, self.theta]

    def close_to(self, other: "Pose", tol: float = 1e-7) -> bool:
        dt = abs(self.theta - other.theta)
        dt = min(dt, TWO_PI - dt)
        return abs(self.x - other.x) <= tol and abs(self.y - other.y) <= tol and dt <= tol


@dataclass(frozen=True)
class Disc:
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("disc radius must be positive")

    kind = "disc"

    def area(self) -> float:
        return math.pi * self.radius ** 2

    def perimeter(self) -> float:
        return TWO_PI * self.radius

    def bounding_radius(self) -> float:
        return self.radius

    def to_dict(self) -> dict:
        return {"type": "disc", "radius": self.radius}


@dataclass(frozen=True)
class Polygon:
    vertices: tuple[tuple[float, float], ...]

    kind = "convex-polygon"

    def __post_init__(self):
        pts = tuple((float(x), float(y)) for x, y in self.vertices)
        object.__setattr__(self, "vertices", pts)
        if len(pts) < 3:
            raise ValueError("polygon needs at least 3 vertices")
        if _signed_area(np.asarray(pts)) <= EPS:
            raise ValueError("polygon must be CCW with positive area")
        if not _is_convex(np.asarray(pts)):
            raise ValueError("polygon must be convex")

    def local(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=float)

    def area(self) -> float:
        return _signed_area(self.local())

    def perimeter(self) -> float:
        v = self.local()
        return float(np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1).sum())

    def bounding_radius(self) -> float:
        return float(np.linalg.norm(self.local(), axis=1).max())

    def is_regular(self, tol: float = 1e-6) -> bool:
        v = self.local()
        sides = np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1)
        radii = np.linalg.norm(v - v.mean(axis=0), axis=1)
        return bool(np.ptp(sides) <= tol * sides.max() and np.ptp(radii) <= tol * radii.max())

    def to_dict(self) -> dict:
        return {"type": "polygon", "vertices": [list(p) for p in self.vertices]}


@dataclass(frozen=True)
class Rectangle(Polygon):
    """Axis-aligned (in the local frame) rectangle centred at the origin."""

    w: float = 0.0
    h: float = 0.0

    kind = "rectangle"

    def __init__(self, w: float, h: float):
        if not (w > 0 and h > 0):
            raise ValueError("rectangle sides must be positive")
        object.__setattr__(self, "w", float(w))
        object.__setattr__(self, "h", float(h))
        hw, hh = w / 2.0, h / 2.0
        Polygon.__init__(self, ((-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)))

    def to_dict(self) -> dict:
        return {"type": "rectangle", "w": self.w, "h": self.h}


Shape = Disc | Polygon


def shape_from_dict(d: Mapping) -> Shape:
    t = d.get("type")
    if t == "disc":
        return Disc(float(d["radius"]))
    if t == "rectangle":
        return Rectangle(float(d["w"]), float(d["h"]))
    if t in ("polygon", "convex-polygon"):
        return Polygon(tuple(tuple(p) for p in d["vertices"]))
    raise ValueError(f"unknown shape type {t!r}")


def _signed_area(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _is_convex(v: np.ndarray) -> bool:
    e = np.roll(v, -1, axis=0) - v
    cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
    return bool(np.all(cross >= -1e-12))


def world_vertices(shape: Polygon, pose: Pose) -> np.ndarray:
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    v = shape.local()
    return np.column_stack((c * v[:, 0] - s * v[:, 1] + pose.x, s * v[:, 0] + c * v[:, 1] + pose.y))


# ---------------------------------------------------------------------------
# collision


def _project(v: np.ndarray, axis: np.ndarray) -> tuple[float, float]:
    p = v @ axis
    return float(p.min()), float(p.max())


def _axes(v: np.ndarray) -> np.ndarray:
    e = np.roll(v, -1, axis=0) - v
    n = np.column_stack((-e[:, 1], e[:, 0]))
    return n / np.linalg.norm(n, axis=1, keepdims=True)


def polygon_penetration(va: np.ndarray, vb: np.ndarray) -> tuple[float, np.ndarray]:
    """Smallest overlap over all separating-axis candidates and its axis.

    A value <= EPS means the polygons are separated (or only touch). The axis
    is oriented from ``va`` towards ``vb``.
    """
    best, best_axis = math.inf, None
    for axis in np.vstack((_axes(va), _axes(vb))):
        amin, amax = _project(va, axis)
        bmin, bmax = _project(vb, axis)
        overlap = min(amax, bmax) - max(amin, bmin)
        if overlap < best:
            best, best_axis = overlap, axis
            if overlap <= EPS:
                break
    if np.dot(vb.mean(axis=0) - va.mean(axis=0), best_axis) < 0:
        best_axis = -best_axis
    return best, best_axis


def point_polygon_distance(p: np.ndarray, v: np.ndarray) -> tuple[float, bool]:
    """Distance from ``p`` to the boundary of convex CCW polygon ``v`` and inside flag."""
    a = v
    b = np.roll(v, -1, axis=0)
    e = b - a
    w = p - a
    cross = e[:, 0] * w[:, 1] - e[:, 1] * w[:, 0]
    inside = bool(np.all(cross >= 0))
    t = np.clip((w * e).sum(axis=1) / (e * e).sum(axis=1), 0.0, 1.0)
    d = np.linalg.norm(a + t[:, None] * e - p, axis=1)
    return float(d.min()), inside


def collide(shape_a: Shape, pose_a: Pose, shape_b: Shape, pose_b: Pose) -> bool:
    """True iff the two placed footprints have intersecting interiors."""
    if isinstance(shape_a, Disc) and isinstance(shape_b, Disc):
        d = math.hypot(pose_a.x - pose_b.x, pose_a.y - pose_b.y)
        return d < shape_a.radius + shape_b.radius - EPS
    reach = shape_a.bounding_radius() + shape_b.bounding_radius()
    if math.hypot(pose_a.x - pose_b.x, pose_a.y - pose_b.y) >= reach:
        return False
    if isinstance(shape_a, Disc):
        shape_a, pose_a, shape_b, pose_b = shape_b, pose_b, shape_a, pose_a
    va = world_vertices(shape_a, pose_a)
    if isinstance(shape_b, Disc):
        d, inside = point_polygon_distance(np.array(pose_b.xy), va)
        return inside or d < shape_b.radius - EPS
    overlap, _ = polygon_penetration(va, world_vertices(shape_b, pose_b))
    return overlap > EPS


def inside_workspace(shape: Shape, pose: Pose, ws: "Workspace") -> bool:
    if isinstance(shape, Disc):
        r = shape.radius
        return (pose.x - r >= -EPS and pose.x + r <= ws.w + EPS
                and pose.y - r >= -EPS and pose.y + r <= ws.h + EPS)
    v = world_vertices(shape, pose)
    return bool(v[:, 0].min() >= -EPS and v[:, 0].max() <= ws.w + EPS
                and v[:, 1].min() >= -EPS and v[:, 1].max() <= ws.h + EPS)


def minkowski_area_disc_polygon(polygon: Shape, disc_radius: float) -> float:
    """Area of the Minkowski sum of a convex footprint and a disc."""
    if disc_radius < 0:
        raise ValueError("radius must be non-negative")
    if isinstance(polygon, Polygon):
        v = polygon.local()
        if not _is_convex(v):
            raise ValueError("polygon is not convex")
    elif not isinstance(polygon, Disc):
        raise ValueError("unsupported shape")
    return polygon.area() + math.pi * disc_radius ** 2 + disc_radius * polygon.perimeter()


# ---------------------------------------------------------------------------
# workspace, objects, instances


@dataclass(frozen=True)
class Workspace:
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValueError("workspace sides must be positive")

    @property
    def area(self) -> float:
        return self.w * self.h


@dataclass(frozen=True)
class ObjectSpec:
    id: int
    shape: Shape
    weight: float | None = None
    impedance: float | None = None


Arrangement = dict[int, Pose]


@dataclass
class Instance:
    workspace: Workspace
    objects: tuple[ObjectSpec, ...]
    start: Arrangement
    goal: Arrangement
    labeled: bool = True
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.objects = tuple(self.objects)
        ids = [o.id for o in self.objects]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate object ids")
        if set(self.start) != set(ids) or set(self.goal) != set(ids):
            raise ValueError("start/goal must be keyed by the object ids")
        self._by_id = {o.id: o for o in self.objects}

    @property
    def ids(self) -> list[int]:
        return [o.id for o in self.objects]

    @property
    def n(self) -> int:
        return len(self.objects)

    def shape(self, oid: int) -> Shape:
        return self._by_id[oid].shape

    def spec(self, oid: int) -> ObjectSpec:
        return self._by_id[oid]

    def density(self) -> float:
        return sum(o.shape.area() for o in self.objects) / self.workspace.area

    def with_arrangements(self, start: Arrangement, goal: Arrangement, **meta) -> "Instance":
        m = dict(self.meta)
        m.update(meta)
        return Instance(self.workspace, self.objects, dict(start), dict(goal), self.labeled, self.seed, m)

    def arrangement_issues(self, arr: Mapping[int, Pose]) -> list[str]:
        issues = []
        ids = sorted(arr)
        for i in ids:
            if not inside_workspace(self.shape(i), arr[i], self.workspace):
                issues.append(f"object {i} outside workspace")
        for a_idx, i in enumerate(ids):
            for j in ids[a_idx + 1:]:
                if collide(self.shape(i), arr[i], self.shape(j), arr[j]):
                    issues.append(f"objects {i} and {j} collide")
        return issues

    def is_feasible(self) -> bool:
        return not self.arrangement_issues(self.start) and not self.arrangement_issues(self.goal)

    # json ------------------------------------------------------------
    def to_json(self) -> dict:
        objs = []
        for o in self.objects:
            d = {"id": o.id, "shape": o.shape.to_dict()}
            if o.weight is not None:
                d["weight"] = o.weight
            if o.impedance is not None:
                d["impedance"] = o.impedance
            objs.append(d)
        return {
            "workspace": {"w": self.workspace.w, "h": self.workspace.h},
            "objects": objs,
            "start": {str(k): v.as_list() for k, v in sorted(self.start.items())},
            "goal": {str(k): v.as_list() for k, v in sorted(self.goal.items())},
            "labeled": self.labeled,
            "seed": self.seed,
            "meta": self.meta,
        }

    @classmethod
    def from_json(cls, d: Mapping) -> "Instance":
        ws = Workspace(float(d["workspace"]["w"]), float(d["workspace"]["h"]))
        objs = tuple(
            ObjectSpec(int(o["id"]), shape_from_dict(o["shape"]), o.get("weight"), o.get("impedance"))
            for o in d["objects"]
        )
        start = {int(k): Pose(*v) for k, v in d["start"].items()}
        goal = {int(k): Pose(*v) for k, v in d["goal"].items()}
        return cls(ws, objs, start, goal, bool(d.get("labeled", True)), d.get("seed"), dict(d.get("meta") or {}))


# ---------------------------------------------------------------------------
# random generation


def _random_convex(rng: np.random.Generator, kind: str) -> Polygon:
    """Unit-ish convex footprint of the requested family (scaled later)."""
    if kind == "square":
        return Rectangle(1.0, 1.0)
    if kind == "rect":
        ratio = rng.uniform(1.0, 3.0)
        return Rectangle(math.sqrt(ratio), 1.0 / math.sqrt(ratio))
    k = int(rng.integers(3, 9))
    ang = np.sort(rng.uniform(0, TWO_PI, size=k))
    a, b = 1.0, rng.uniform(0.4, 1.0)
    pts = np.column_stack((a * np.cos(ang), b * np.sin(ang)))
    pts -= pts.mean(axis=0)
    try:
        poly = Polygon(tuple(map(tuple, pts)))
    except ValueError:
        return _random_convex(rng, kind)
    # reject slivers: keep the footprint reasonably round
    if math.pi * poly.bounding_radius() ** 2 > 4.0 * poly.area():
        return _random_convex(rng, kind)
    return poly


def _scaled(shape: Shape, factor: float) -> Shape:
    if isinstance(shape, Disc):
        return Disc(shape.radius * factor)
    if isinstance(shape, Rectangle):
        return Rectangle(shape.w * factor, shape.h * factor)
    return Polygon(tuple(map(tuple, shape.local() * factor)))


def _make_shapes(n: int, rho: float, shape_spec: str, ws: Workspace, rng: np.random.Generator) -> list[Shape]:
    target = rho * ws.area
    if shape_spec == "disc":
        r = math.sqrt(target / (n * math.pi))
        return [Disc(r)] * n
    if shape_spec == "square":
        side = math.sqrt(target / n)
        return [Rectangle(side, side)] * n
    if shape_spec not in ("rect", "poly", "rand"):
        raise ValueError(f"unknown shape spec {shape_spec!r}")
    raw = []
    for _ in range(n):
        fam = shape_spec if shape_spec != "rand" else ("rect" if rng.random() < 0.5 else "poly")
        base = _random_convex(rng, fam)
        rel = rng.uniform(0.3, 1.0)
        raw.append(_scaled(base, math.sqrt(rel / base.area())))
    total = sum(s.area() for s in raw)
    k = math.sqrt(target / total)
    shapes = [_scaled(s, k) for s in raw]
    if max(2 * s.bounding_radius() for s in shapes) > min(ws.w, ws.h):
        raise GenerationError("object does not fit into the workspace")
    return shapes


def _disc_relax(pos: np.ndarray, r: float, ws: Workspace, rng: np.random.Generator, iters: int = 400) -> bool:
    lo = np.array([r, r])
    hi = np.array([ws.w - r, ws.h - r])
    target = 2.0 * r * (1.0 + 1e-6) + 4 * EPS
    n = len(pos)
    for _ in range(iters):
        diff = pos[:, None, :] - pos[None, :, :]
        d = np.linalg.norm(diff, axis=2)
        np.fill_diagonal(d, np.inf)
        over = np.clip(target - d, 0.0, None)
        if not over.any():
            return True
        dd = np.where(np.isfinite(d) & (d > 1e-12), d, 1.0)
        unit = diff / dd[:, :, None]
        tiny = (d <= 1e-12)
        if tiny.any():
            unit[tiny] = rng.normal(size=(int(tiny.sum()), 2))
        push = (over[:, :, None] * unit).sum(axis=1) * 0.5
        pos += push
        np.clip(pos, lo, hi, out=pos)
    d = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=2)
    np.fill_diagonal(d, np.inf)
    return bool((d >= 2.0 * r - EPS).all()) if n > 1 else True


def _place_discs(n: int, r: float, ws: Workspace, rng: np.random.Generator) -> np.ndarray:
    lo, hi = np.array([r, r]), np.array([ws.w - r, ws.h - r])
    pos = np.empty((0, 2))
    for _ in range(n):
        placed = False
        for _ in range(300):
            p = rng.uniform(lo, hi)
            if len(pos) == 0 or np.min(np.linalg.norm(pos - p, axis=1)) >= 2 * r + 1e-7:
                pos = np.vstack((pos, p))
                placed = True
                break
        if not placed:
            break
    if len(pos) == n:
        return pos
    # rejection stalled: drop the rest in and relax with random jiggles
    pos = np.vstack((pos, rng.uniform(lo, hi, size=(n - len(pos), 2))))
    for _ in range(JIGGLE_ROUNDS):
        if _disc_relax(pos, r, ws, rng):
            return pos
        pos += rng.normal(scale=0.05 * r, size=pos.shape)
        np.clip(pos, lo, hi, out=pos)
    raise GenerationError(f"could not place {n} discs of radius {r:.4g}")


def _clamp_polygon(shape: Polygon, pose: Pose, ws: Workspace) -> Pose:
    v = world_vertices(shape, pose)
    dx = max(0.0, -v[:, 0].min()) - max(0.0, v[:, 0].max() - ws.w)
    dy = max(0.0, -v[:, 1].min()) - max(0.0, v[:, 1].max() - ws.h)
    return Pose(pose.x + dx, pose.y + dy, pose.theta)


def _place_polygons(shapes: list[Polygon], ws: Workspace, rng: np.random.Generator) -> list[Pose]:
    n = len(shapes)

    def sample(i: int) -> Pose:
        p = Pose(rng.uniform(0, ws.w), rng.uniform(0, ws.h), rng.uniform(0, TWO_PI))
        return _clamp_polygon(shapes[i], p, ws)

    poses: list[Pose] = []
    for i in range(n):
        for _ in range(300):
            p = sample(i)
            if inside_workspace(shapes[i], p, ws) and not any(
                collide(shapes[i], p, shapes[j], poses[j]) for j in range(len(poses))
            ):
                poses.append(p)
                break
        else:
            break
    poses += [sample(i) for i in range(len(poses), n)]
    for _ in range(JIGGLE_ROUNDS):
        for _ in range(60):
            moved = False
            verts = [world_vertices(s, p) for s, p in zip(shapes, poses)]
            for i in range(n):
                for j in range(i + 1, n):
                    if not collide(shapes[i], poses[i], shapes[j], poses[j]):
                        continue
                    depth, axis = polygon_penetration(verts[i], verts[j])
                    step = 0.5 * (depth + 1e-6)
                    poses[i] = _clamp_polygon(shapes[i], Pose(poses[i].x - step * axis[0], poses[i].y - step * axis[1], poses[i].theta), ws)
                    poses[j] = _clamp_polygon(shapes[j], Pose(poses[j].x + step * axis[0], poses[j].y + step * axis[1], poses[j].theta), ws)
                    verts[i] = world_vertices(shapes[i], poses[i])
                    verts[j] = world_vertices(shapes[j], poses[j])
                    moved = True
            if not moved:
                return poses
        scale = 0.05 * max(s.bounding_radius() for s in shapes)
        poses = [_clamp_polygon(s, Pose(p.x + rng.normal(0, scale), p.y + rng.normal(0, scale), p.theta + rng.normal(0, 0.2)), ws)
                 for s, p in zip(shapes, poses)]
    raise GenerationError(f"could not place {n} polygons")


def generate_random_instance(
    n: int,
    rho: float,
    shape_spec: str = "disc",
    seed: int = 0,
    workspace: Workspace | None = None,
    labeled: bool = True,
) -> Instance:
    """Random start and goal arrangements covering a fraction ``rho`` of the table.

    ``shape_spec`` is one of ``disc``, ``square``, ``rect``, ``poly`` or ``rand``.
    Object sizes are scaled so that the footprint area sum equals
    ``rho * W * H``.
    """
    ws = workspace or Workspace(1.0, 1.0)
    if n < 1 or not 0 < rho < 1:
        raise ValueError("need n >= 1 and 0 < rho < 1")
    limit = RHO_MAX_DISC if shape_spec == "disc" else RHO_MAX_POLYGON
    if rho > limit and n > 1:
        raise GenerationError(f"density {rho} above the supported maximum {limit}")
    rng = np.random.default_rng(seed)
    shapes = _make_shapes(n, rho, shape_spec, ws, rng)
    if any(2 * s.bounding_radius() > min(ws.w, ws.h) + EPS and isinstance(s, Disc) for s in shapes):
        raise GenerationError("object does not fit into the workspace")
    arrangements = []
    for _ in range(2):
        if shape_spec == "disc":
            pos = _place_discs(n, shapes[0].radius, ws, rng)
            arrangements.append({i: Pose(float(x), float(y), 0.0) for i, (x, y) in enumerate(pos)})
        else:
            poses = _place_polygons(shapes, ws, rng)
            arrangements.append(dict(enumerate(poses)))
    objs = tuple(ObjectSpec(i, s) for i, s in enumerate(shapes))
    inst = Instance(ws, objs, arrangements[0], arrangements[1], labeled, seed,
                    {"generator": "random", "n": n, "rho": rho, "shape": shape_spec})
    for arr in (inst.start, inst.goal):
        bad = inst.arrangement_issues(arr)
        if bad:
            raise GenerationError(bad[0])
    return inst


# ---------------------------------------------------------------------------
# perimeter track


@dataclass(frozen=True)
class Track:
    """Workspace boundary parameterised by arc length, counter-clockwise from (0,0)."""

    w: float
    h: float

    @classmethod
    def of(cls, ws: Workspace) -> "Track":
        return cls(ws.w, ws.h)

    @property
    def length(self) -> float:
        return 2.0 * (self.w + self.h)

    def point(self, s: float) -> tuple[float, float]:
        w, h = self.w, self.h
        s = s % self.length
        if s < w:
            return (s, 0.0)
        if s < w + h:
            return (w, s - w)
        if s < 2 * w + h:
            return (w - (s - w - h), h)
        return (0.0, h - (s - 2 * w - h))

    def distance(self, a: float, b: float) -> float:
        d = abs(a - b) % self.length
        return min(d, self.length - d)

    def opposite(self, s: float) -> float:
        return (s + self.length / 2.0) % self.length

    def project(self, x: float, y: float) -> float:
        w, h = self.w, self.h
        xc, yc = min(max(x, 0.0), w), min(max(y, 0.0), h)
        cands = [
            (math.hypot(x - xc, y), xc),
            (math.hypot(x - w, y - yc), w + yc),
            (math.hypot(x - xc, y - h), w + h + (w - xc)),
            (math.hypot(x, y - yc), (2 * w + h + (h - yc)) % self.length),
        ]
        best = min(d for d, _ in cands)
        return min(s % self.length for d, s in cands if d <= best + 1e-12)


def track_project(pose: Pose, track: Track) -> float:
    return track.project(pose.x, pose.y)


# ---------------------------------------------------------------------------
# constructed instances


def _instance(ws, shapes, start, goal, meta) -> Instance:
    objs = tuple(ObjectSpec(i, s) for i, s in enumerate(shapes))
    return Instance(ws, objs, start, goal, True, None, meta)


def sticks(n: int) -> Instance:
    """Thin bars: horizontal at start, vertical at goal, every pair crossing."""
    length, thick = float(n), 0.3
    ws = Workspace(n + 1.0, n + 1.0)
    bar = Rectangle(length, thick)
    start = {i: Pose(ws.w / 2, 1.0 + i, 0.0) for i in range(n)}
    goal = {i: Pose(1.0 + i, ws.h / 2, math.pi / 2) for i in range(n)}
    return _instance(ws, [bar] * n, start, goal, {"special": "sticks", "param": n})


def dependency_grid(m: int) -> Instance:
    """Discs on an m x 2m grid; start/goal alternate by parity of x + y.

    Vertically adjacent cells (x, 2j-1), (x, 2j) form one object.
    """
    r = 0.6
    ws = Workspace(m + 1.0, 2 * m + 1.0)
    start, goal = {}, {}
    oid = 0
    for x in range(1, m + 1):
        for j in range(1, m + 1):
            for y in (2 * j - 1, 2 * j):
                target = start if (x + y) % 2 == 0 else goal
                target[oid] = Pose(float(x), float(y))
            oid += 1
    return _instance(ws, [Disc(r)] * oid, start, goal, {"special": "dependency_grid", "param": m})


def labeled_cycle(m: int) -> Instance:
    """n = m*m discs; object i's goal overlaps the starts of i-1 and i+m (mod n)."""
    n = m * m
    if n < 2:
        ws = Workspace(4.0, 2.0)
        return _instance(ws, [Disc(0.5)], {0: Pose(1, 1)}, {0: Pose(3, 1)}, {"special": "labeled_cycle", "param": m})
    k = 2 * n
    radius = 1.0 / (2.0 * math.sin(math.pi / k))
    c1 = 1.0
    c2 = 2.0 * radius * math.sin(2.0 * math.pi / k)
    r = (c1 + c2) / 4.0
    side = 2.0 * (radius + r) + 1.0
    ws = Workspace(side, side)
    cx = cy = side / 2.0
    start, goal = {}, {}
    for t in range(n):
        for slot, (target, obj) in enumerate(((start, (t * (m + 1)) % n), (goal, (t * (m + 1) + 1) % n))):
            a = 2.0 * math.pi * (2 * t + slot) / k
            target[obj] = Pose(cx + radius * math.cos(a), cy + radius * math.sin(a))
    return _instance(ws, [Disc(r)] * n, start, goal, {"special": "labeled_cycle", "param": m})


def two_cycles(k: int) -> Instance:
    """k disjoint pairs of discs that swap places."""
    ws = Workspace(3.0 * k + 0.5, 2.0)
    start, goal = {}, {}
    for j in range(k):
        p, q = Pose(1.0 + 3 * j, 1.0), Pose(2.2 + 3 * j, 1.0)
        start[2 * j], goal[2 * j] = p, q
        start[2 * j + 1], goal[2 * j + 1] = q, p
    return _instance(ws, [Disc(0.5)] * (2 * k), start, goal, {"special": "two_cycles", "param": k})


SPECIAL_KINDS = {
    "sticks": sticks,
    "dependency_grid": dependency_grid,
    "grid": dependency_grid,
    "labeled_cycle": labeled_cycle,
    "cycle": labeled_cycle,
    "two_cycles": two_cycles,
}


def construct_special_instance(kind: str, param: int) -> Instance:
    if kind not in SPECIAL_KINDS:
        raise ValueError(f"unknown special instance {kind!r}")
    if param < 1:
        raise ValueError("parameter must be >= 1")
    return SPECIAL_KINDS[kind](int(param))


def arrangement_distance(a: Mapping[int, Pose], b: Mapping[int, Pose], tol: float = 1e-7) -> int:
    """Number of objects whose poses differ."""
    return sum(0 if a[i].close_to(b[i], tol) else 1 for i in a)


def centers(arr: Mapping[int, Pose], ids: Iterable[int]) -> np.ndarray:
    return np.array([arr[i].xy for i in ids], dtype=float)
