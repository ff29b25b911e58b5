"""Workspace geometry and trajectory topology.

Obstacle rays, signed ray-crossing words, word reduction and prefix
compatibility.  A crossing word ("h-word") is represented as a plain tuple of
nonzero signed ints, e.g. ``(1, 2, -2)``; the empty tuple is the trivial
class.  Letter ``k`` refers to obstacle ``k`` (1-based, in environment
order); the sign is the crossing orientation relative to the ray direction.

Sign convention: a segment with direction ``s`` crossing the ray with
direction ``d`` (origin -> endpoint) yields ``+k`` when ``cross(d, s) > 0``
and ``-k`` when negative.  With this choice the net signed count of letter
``k`` in a boundary-to-boundary path's word equals the counterclockwise
winding number of the quotient-closed path around obstacle ``k``, which
`winding_number` cross-checks in the test suite.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConstructionFailed, UndefinedWinding

HWord = tuple  # tuple of nonzero signed ints


# ---------------------------------------------------------------------------
# Basic polygon helpers
# ---------------------------------------------------------------------------

def _cross(a, b):
    return a[0] * b[1] - a[1] * b[0]


def polygon_centroid(vertices: np.ndarray) -> np.ndarray:
    """Area centroid of a simple polygon (shoelace formula)."""
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    c = x * yn - xn * y
    area = c.sum() / 2.0
    if abs(area) < 1e-12:
        return v.mean(axis=0)
    cx = ((x + xn) * c).sum() / (6.0 * area)
    cy = ((y + yn) * c).sum() / (6.0 * area)
    return np.array([cx, cy])


def point_in_polygon(p, vertices) -> bool:
    """Ray-casting point-in-polygon test (boundary counts as inside)."""
    x, y = float(p[0]), float(p[1])
    v = np.asarray(vertices, dtype=float)
    n = len(v)
    inside = False
    for i in range(n):
        x0, y0 = v[i]
        x1, y1 = v[(i + 1) % n]
        if _point_on_segment((x, y), (x0, y0), (x1, y1)):
            return True
        if (y0 > y) != (y1 > y):
            x_at = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
            if x_at > x:
                inside = not inside
    return inside


def _point_on_segment(p, a, b, eps=1e-12):
    d = (b[0] - a[0], b[1] - a[1])
    w = (p[0] - a[0], p[1] - a[1])
    if abs(_cross(d, w)) > eps * max(1.0, abs(d[0]) + abs(d[1])):
        return False
    t = (w[0] * d[0] + w[1] * d[1]) / (d[0] * d[0] + d[1] * d[1] + 1e-300)
    return -eps <= t <= 1.0 + eps


def segments_intersect(a0, a1, b0, b1) -> bool:
    """True if closed segments a0-a1 and b0-b1 share a point."""
    d1 = _cross((a1[0] - a0[0], a1[1] - a0[1]), (b0[0] - a0[0], b0[1] - a0[1]))
    d2 = _cross((a1[0] - a0[0], a1[1] - a0[1]), (b1[0] - a0[0], b1[1] - a0[1]))
    d3 = _cross((b1[0] - b0[0], b1[1] - b0[1]), (a0[0] - b0[0], a0[1] - b0[1]))
    d4 = _cross((b1[0] - b0[0], b1[1] - b0[1]), (a1[0] - b0[0], a1[1] - b0[1]))
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)):
        return True
    for d, p, q, r in ((d1, a0, b0, a1), (d2, a0, b1, a1),
                       (d3, b0, a0, b1), (d4, b0, a1, b1)):
        if d == 0 and _point_on_segment(q, p, r):
            return True
    return False


def segment_hits_polygon(p0, p1, vertices) -> bool:
    """True if the open segment p0-p1 touches the polygon (edges or interior)."""
    v = np.asarray(vertices, dtype=float)
    n = len(v)
    for i in range(n):
        if segments_intersect(p0, p1, v[i], v[(i + 1) % n]):
            return True
    mid = ((p0[0] + p1[0]) / 2.0, (p0[1] + p1[1]) / 2.0)
    return point_in_polygon(mid, v)


# ---------------------------------------------------------------------------
# Environment / rays
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Obstacle:
    """Convex polygonal obstacle with a representative interior point."""

    vertices: np.ndarray                 # (K, 2) metres
    rep_point: np.ndarray                # (2,) strictly inside
    ray_endpoint: np.ndarray | None = None   # explicit override, on boundary

    def contains(self, p) -> bool:
        return point_in_polygon(p, self.vertices)


@dataclass(frozen=True)
class Environment:
    """Rectangular workspace with ordered convex obstacles.

    Obstacle order defines ray letters 1..n.
    """

    bounds: tuple            # (xmin, ymin, xmax, ymax) metres
    obstacles: tuple = field(default_factory=tuple)

    def __post_init__(self):
        xmin, ymin, xmax, ymax = self.bounds
        if not (xmax > xmin and ymax > ymin):
            raise ValueError("degenerate bounds")
        for i, ob in enumerate(self.obstacles):
            if not point_in_polygon(ob.rep_point, ob.vertices):
                raise ValueError(f"obstacle {i + 1}: rep_point outside polygon")

    @property
    def extent(self):
        xmin, ymin, xmax, ymax = self.bounds
        return (xmax - xmin, ymax - ymin)

    def contains_point(self, p) -> bool:
        xmin, ymin, xmax, ymax = self.bounds
        return xmin <= p[0] <= xmax and ymin <= p[1] <= ymax

    def boundary_distance(self, p) -> float:
        xmin, ymin, xmax, ymax = self.bounds
        return min(p[0] - xmin, xmax - p[0], p[1] - ymin, ymax - p[1])

    def point_in_obstacle(self, p) -> bool:
        return any(ob.contains(p) for ob in self.obstacles)

    def segment_hits_obstacle(self, p0, p1) -> bool:
        return any(segment_hits_polygon(p0, p1, ob.vertices)
                   for ob in self.obstacles)

    def path_hits_obstacle(self, points) -> bool:
        pts = np.asarray(points, dtype=float)
        return any(self.segment_hits_obstacle(pts[i], pts[i + 1])
                   for i in range(len(pts) - 1))


@dataclass(frozen=True)
class Ray:
    """Directed segment from an obstacle's representative point to the boundary."""

    letter: int              # 1..n
    origin: np.ndarray       # (2,)
    endpoint: np.ndarray     # (2,) on the domain boundary

    @property
    def direction(self) -> np.ndarray:
        return self.endpoint - self.origin

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.direction))


def load_environment(path) -> Environment:
    """Read an environment file (JSON: bounds + obstacles)."""
    with open(path) as fh:
        raw = json.load(fh)
    obstacles = []
    for entry in raw.get("obstacles", []):
        verts = np.asarray(entry["vertices"], dtype=float)
        rep = entry.get("rep_point")
        rep = polygon_centroid(verts) if rep is None else np.asarray(rep, dtype=float)
        end = entry.get("ray_endpoint")
        end = None if end is None else np.asarray(end, dtype=float)
        obstacles.append(Obstacle(verts, rep, end))
    return Environment(tuple(raw["bounds"]), tuple(obstacles))


def save_environment(env: Environment, path) -> None:
    data = {
        "bounds": list(env.bounds),
        "obstacles": [
            {
                "vertices": ob.vertices.tolist(),
                "rep_point": ob.rep_point.tolist(),
                **({"ray_endpoint": ob.ray_endpoint.tolist()}
                   if ob.ray_endpoint is not None else {}),
            }
            for ob in env.obstacles
        ],
    }
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2)


def build_rays(env: Environment) -> list[Ray]:
    """One non-intersecting ray per obstacle.

    Default construction drops a vertical ray from the representative point to
    the bottom boundary, falling back to the top boundary if the downward ray
    pierces another obstacle.  Environments where neither works must supply
    explicit `ray_endpoint` values.
    """
    xmin, ymin, xmax, ymax = env.bounds
    rays: list[Ray] = []
    for i, ob in enumerate(env.obstacles):
        letter = i + 1
        origin = np.asarray(ob.rep_point, dtype=float)
        if ob.ray_endpoint is not None:
            rays.append(Ray(letter, origin, np.asarray(ob.ray_endpoint, dtype=float)))
            continue
        placed = False
        for endpoint in (np.array([origin[0], ymin]), np.array([origin[0], ymax])):
            if _ray_clear(origin, endpoint, env, skip=i):
                rays.append(Ray(letter, origin, endpoint))
                placed = True
                break
        if not placed:
            raise ConstructionFailed(
                f"obstacle {letter}: neither vertical ray is obstacle-free; "
                "supply an explicit ray_endpoint in the environment file")
    _check_ray_invariants(rays, env)
    return rays


def _ray_clear(origin, endpoint, env, skip):
    for j, other in enumerate(env.obstacles):
        if j == skip:
            continue
        if segment_hits_polygon(origin, endpoint, other.vertices):
            return False
    return True


def _check_ray_invariants(rays, env):
    for i, r in enumerate(rays):
        if not _ray_clear(r.origin, r.endpoint, env, skip=r.letter - 1):
            raise ConstructionFailed(
                f"ray {r.letter} intersects a foreign obstacle")
        for s in rays[i + 1:]:
            if segments_intersect(r.origin, r.endpoint, s.origin, s.endpoint):
                raise ConstructionFailed(
                    f"rays {r.letter} and {s.letter} intersect")


# ---------------------------------------------------------------------------
# Crossing words
# ---------------------------------------------------------------------------

def segment_crossings(p0, p1, rays) -> HWord:
    """Signed letters of rays crossed by the half-open segment [p0, p1).

    Letters are ordered by the crossing parameter along p0 -> p1.  A crossing
    at the segment's far endpoint belongs to the next segment; tangential
    touches (zero cross product) do not count.
    """
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    s = p1 - p0
    hits = []
    for ray in rays:
        d = ray.direction
        denom = _cross(s, d)
        if denom == 0.0:
            continue  # parallel or tangential
        w = ray.origin - p0
        t = _cross(w, d) / denom
        tau = _cross(w, s) / denom
        if 0.0 <= t < 1.0 and 0.0 <= tau <= 1.0:
            letter = ray.letter if _cross(d, s) > 0 else -ray.letter
            hits.append((t, ray.letter, letter))
    hits.sort(key=lambda h: (h[0], h[1]))
    return tuple(h[2] for h in hits)


def h_signature(path, rays) -> HWord:
    """Unreduced crossing word of a polyline (>= 2 points)."""
    pts = np.asarray(path, dtype=float)
    if len(pts) < 2:
        raise ValueError("path needs at least 2 points")
    word: list[int] = []
    for i in range(len(pts) - 1):
        word.extend(segment_crossings(pts[i], pts[i + 1], rays))
    return tuple(word)


def partial_h_signature(measurements, rays) -> HWord:
    """Crossing word of the polyline through time-ordered measurements.

    A single measurement yields the empty word.
    """
    pts = np.asarray(measurements, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if len(pts) < 2:
        return ()
    return h_signature(pts, rays)


def reduce_word(word: HWord) -> HWord:
    """Cancel adjacent inverse letters until fixpoint (order-independent)."""
    stack: list[int] = []
    for letter in word:
        if stack and stack[-1] == -letter:
            stack.pop()
        else:
            stack.append(letter)
    return tuple(stack)


def is_compatible(full: HWord, partial: HWord) -> bool:
    """True iff `partial` is a letter-exact prefix of `full` (both unreduced)."""
    return len(partial) <= len(full) and tuple(full[:len(partial)]) == tuple(partial)


def net_letter_count(word: HWord, letter: int) -> int:
    """Signed occurrence count of obstacle `letter` in a word."""
    return sum(1 if v == letter else -1 if v == -letter else 0 for v in word)


# ---------------------------------------------------------------------------
# Winding-number oracle (used by tests to cross-check reduced words)
# ---------------------------------------------------------------------------

def quotient_close(path, env: Environment, offset=None):
    """Close a boundary-to-boundary path with an arc outside the domain.

    Walks counterclockwise along a rectangle `offset` outside the bounds from
    the path's end back to its start.  With downward rays and endpoints away
    from the bottom-right corner arc, the closure crosses no ray or ray
    extension, so the closed loop's winding numbers equal the open path's net
    letter counts.
    """
    pts = np.asarray(path, dtype=float)
    xmin, ymin, xmax, ymax = env.bounds
    if offset is None:
        offset = 0.05 * min(env.extent)
    lo = np.array([xmin - offset, ymin - offset])
    hi = np.array([xmax + offset, ymax + offset])
    w, h = hi[0] - lo[0], hi[1] - lo[1]
    perimeter = 2 * (w + h)
    # CCW walk: bottom (W->E), right (S->N), top (E->W), left (N->S)
    corner_pos = [w, w + h, 2 * w + h, perimeter]
    corner_pts = [np.array([hi[0], lo[1]]), np.array([hi[0], hi[1]]),
                  np.array([lo[0], hi[1]]), np.array([lo[0], lo[1]])]

    def project_out(p):
        # push the point onto the enlarged rectangle through its nearest side
        dists = [p[1] - ymin, xmax - p[0], ymax - p[1], p[0] - xmin]
        side = int(np.argmin(dists))
        q = np.array(p, dtype=float)
        if side == 0:
            q[1] = lo[1]
        elif side == 1:
            q[0] = hi[0]
        elif side == 2:
            q[1] = hi[1]
        else:
            q[0] = lo[0]
        return side, q

    def ccw_pos(side, q):
        if side == 0:
            return q[0] - lo[0]
        if side == 1:
            return w + (q[1] - lo[1])
        if side == 2:
            return w + h + (hi[0] - q[0])
        return 2 * w + h + (hi[1] - q[1])

    end_side, end_q = project_out(pts[-1])
    start_side, start_q = project_out(pts[0])
    s_end = ccw_pos(end_side, end_q)
    s_start = ccw_pos(start_side, start_q)
    walk = (s_start - s_end) % perimeter
    passed = sorted(
        ((c - s_end) % perimeter, pt) for c, pt in zip(corner_pos, corner_pts)
        if 0.0 < (c - s_end) % perimeter < walk
    )
    loop = [p for p in pts] + [end_q]
    loop.extend(pt for _, pt in passed)
    loop.append(start_q)
    loop.append(pts[0])
    return np.asarray(loop)


def winding_number(closed_path, point, eps=1e-9) -> int:
    """Winding number of a closed polyline around `point` (CCW positive).

    Angle accumulation; raises UndefinedWinding if the path passes within
    `eps` of the point.
    """
    pts = np.asarray(closed_path, dtype=float)
    if not np.allclose(pts[0], pts[-1]):
        pts = np.vstack([pts, pts[0]])
    rel = pts - np.asarray(point, dtype=float)
    dist = np.hypot(rel[:, 0], rel[:, 1])
    if dist.min() < eps:
        raise UndefinedWinding("path passes through the reference point")
    total = 0.0
    for i in range(len(rel) - 1):
        a, b = rel[i], rel[i + 1]
        # distance from the point to the segment, not just its endpoints
        seg = b - a
        L2 = seg @ seg
        if L2 > 0:
            t = np.clip(-(a @ seg) / L2, 0.0, 1.0)
            if np.linalg.norm(a + t * seg) < eps:
                raise UndefinedWinding("path passes through the reference point")
        total += math.atan2(_cross(a, b), float(a @ b))
    return int(round(total / (2.0 * math.pi)))


def winding_oracle(closed_path, env: Environment, obstacle_index: int) -> int:
    """Winding of a quotient-closed path around obstacle `obstacle_index` (1-based)."""
    rep = env.obstacles[obstacle_index - 1].rep_point
    return winding_number(closed_path, rep)
