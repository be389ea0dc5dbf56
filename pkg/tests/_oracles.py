"""Independent numeric oracles shared by several test files."""
from __future__ import annotations

import numpy as np
from scipy.spatial import ConvexHull

from rearrange.geometry import Polygon, Pose, world_vertices


def random_convex_polygon(rng: np.random.Generator, scale: float = 1.0) -> Polygon:
    pts = rng.uniform(-scale, scale, size=(rng.integers(4, 10), 2))
    hull = ConvexHull(pts)
    v = pts[hull.vertices]
    v -= v.mean(axis=0)
    return Polygon(tuple(map(tuple, v)))


def point_polygon_hits(pts: np.ndarray, v: np.ndarray, r: float) -> np.ndarray:
    """True where a disc of radius ``r`` centred at each point overlaps the convex polygon ``v`` (CCW)."""
    e0, e1 = v, np.roll(v, -1, axis=0)
    seg = e1 - e0
    rel = pts[:, None, :] - e0[None, :, :]
    t = np.clip((rel * seg).sum(-1) / (seg * seg).sum(-1), 0, 1)
    near = e0[None] + t[..., None] * seg[None]
    dist = np.linalg.norm(pts[:, None, :] - near, axis=-1).min(axis=1)
    cross = seg[None, :, 0] * rel[..., 1] - seg[None, :, 1] * rel[..., 0]
    return (cross >= 0).all(axis=1) | (dist < r)


def collision_probability_mc(poly: Polygon, r: float, w: float, h: float, n: int, seed: int) -> float:
    """Chance that a disc with a uniformly placed centre hits the polygon sitting mid-table."""
    rng = np.random.default_rng(seed)
    v = world_vertices(poly, Pose(w / 2, h / 2, float(rng.uniform(0, 2 * np.pi))))
    hits = 0
    for _ in range(10):
        m = n // 10
        pts = np.column_stack((rng.uniform(r, w - r, m), rng.uniform(r, h - r, m)))
        hits += int(point_polygon_hits(pts, v, r).sum())
    return hits / (n // 10 * 10)
