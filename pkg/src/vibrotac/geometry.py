"""Minimum enclosing circle of a planar point set.

Randomised incremental construction (Welzl, iterative form) on the convex
hull of the input. The shuffle uses a fixed seed so results are repeatable.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from scipy.spatial import ConvexHull, QhullError

_EPS = 1e-9


class Circle(NamedTuple):
    x: float
    y: float
    radius: float

    def contains(self, px: float, py: float, eps: float = _EPS) -> bool:
        return math.hypot(px - self.x, py - self.y) <= self.radius * (1 + eps) + eps


def _diameter(a, b) -> Circle:
    cx, cy = 0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])
    return Circle(cx, cy, max(math.hypot(a[0] - cx, a[1] - cy), math.hypot(b[0] - cx, b[1] - cy)))


def circumcircle(a, b, c):
    """Circle through three points, or None when they are collinear."""
    ox = (min(a[0], b[0], c[0]) + max(a[0], b[0], c[0])) / 2
    oy = (min(a[1], b[1], c[1]) + max(a[1], b[1], c[1])) / 2
    ax, ay = a[0] - ox, a[1] - oy
    bx, by = b[0] - ox, b[1] - oy
    cx, cy = c[0] - ox, c[1] - oy
    d = 2 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if d == 0:
        return None
    x = ox + ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay)
              + (cx * cx + cy * cy) * (ay - by)) / d
    y = oy + ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx)
              + (cx * cx + cy * cy) * (bx - ax)) / d
    r = max(math.hypot(x - p[0], y - p[1]) for p in (a, b, c))
    return Circle(x, y, r)


def _two_boundary(points, p, q) -> Circle:
    # smallest circle through p and q containing ``points``
    circ = _diameter(p, q)
    left = right = None
    px, py = p
    qx, qy = q
    for r in points:
        if circ.contains(*r):
            continue
        cross = (qx - px) * (r[1] - py) - (qy - py) * (r[0] - px)
        c = circumcircle(p, q, r)
        if c is None:
            continue
        side = (qx - px) * (c.y - py) - (qy - py) * (c.x - px)
        if cross > 0 and (left is None or side > (qx - px) * (left.y - py) - (qy - py) * (left.x - px)):
            left = c
        elif cross < 0 and (right is None or side < (qx - px) * (right.y - py) - (qy - py) * (right.x - px)):
            right = c
    if left is None and right is None:
        return circ
    if left is None:
        return right
    if right is None:
        return left
    return left if left.radius <= right.radius else right


def _one_boundary(points, p) -> Circle:
    circ = Circle(p[0], p[1], 0.0)
    for i, q in enumerate(points):
        if not circ.contains(*q):
            circ = _diameter(p, q) if circ.radius == 0 else _two_boundary(points[: i + 1], p, q)
    return circ


def hull_points(points: np.ndarray) -> np.ndarray:
    """Convex-hull vertices, or the unique points when the hull is degenerate."""
    pts = np.unique(np.asarray(points, dtype=np.float64).reshape(-1, 2), axis=0)
    if pts.shape[0] < 4:
        return pts
    try:
        return pts[ConvexHull(pts).vertices]
    except QhullError:
        # collinear input: the two extremes decide the circle
        d = pts - pts[0]
        axis = d[np.argmax(np.hypot(d[:, 0], d[:, 1]))]
        proj = d @ axis
        return pts[[np.argmin(proj), np.argmax(proj)]]


def min_enclosing_circle(points, seed: int = 0) -> Circle:
    """Smallest circle containing every (x, y) point."""
    pts = hull_points(points)
    if pts.shape[0] == 0:
        raise ValueError("no points")
    order = np.random.default_rng(seed).permutation(pts.shape[0])
    shuffled = [(float(x), float(y)) for x, y in pts[order]]
    circ = None
    for i, p in enumerate(shuffled):
        if circ is None or not circ.contains(*p):
            circ = _one_boundary(shuffled[: i + 1], p)
    return circ
