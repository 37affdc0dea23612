"""Planar geometry kernels shared by the simulator, contact inference, and rewards.

Conventions: world y is up, angles are counterclockwise radians, polygons are
convex with counterclockwise vertices centered on their centroid.
"""

from __future__ import annotations

import math

Vec = tuple[float, float]

TWO_PI = 2.0 * math.pi


def wrap_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    w = theta % TWO_PI
    if w > math.pi:
        w -= TWO_PI
    return w


def angle_diff(a: float, b: float) -> float:
    """Wrapped rotation difference a minus b, in (-pi, pi]."""
    return wrap_angle(a - b)


def rotate(v: Vec, angle: float) -> Vec:
    c, s = math.cos(angle), math.sin(angle)
    return (c * v[0] - s * v[1], s * v[0] + c * v[1])


def transform(local: Vec, pos: Vec, angle: float) -> Vec:
    c, s = math.cos(angle), math.sin(angle)
    return (pos[0] + c * local[0] - s * local[1], pos[1] + s * local[0] + c * local[1])


def cross2(a: Vec, b: Vec) -> float:
    return a[0] * b[1] - a[1] * b[0]


def dot2(a: Vec, b: Vec) -> float:
    return a[0] * b[0] + a[1] * b[1]


def norm2(a: Vec) -> float:
    return math.hypot(a[0], a[1])


def polygon_world(vertices: list[Vec], pos: Vec, angle: float) -> list[Vec]:
    c, s = math.cos(angle), math.sin(angle)
    return [(pos[0] + c * vx - s * vy, pos[1] + s * vx + c * vy) for vx, vy in vertices]


def validate_convex_ccw(vertices: list[Vec], tol: float = 1e-9) -> None:
    """Raise ValueError unless the vertices form a convex counterclockwise polygon."""
    n = len(vertices)
    if n < 3:
        raise ValueError("polygon needs at least 3 vertices")
    for i in range(n):
        a, b, c = vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]
        cr = cross2((b[0] - a[0], b[1] - a[1]), (c[0] - b[0], c[1] - b[1]))
        if cr < tol:
            raise ValueError("polygon vertices must be convex and counterclockwise")


def polygon_centroid(vertices: list[Vec]) -> Vec:
    area2 = 0.0
    cx = cy = 0.0
    n = len(vertices)
    for i in range(n):
        x0, y0 = vertices[i]
        x1, y1 = vertices[(i + 1) % n]
        cr = x0 * y1 - x1 * y0
        area2 += cr
        cx += (x0 + x1) * cr
        cy += (y0 + y1) * cr
    return (cx / (3.0 * area2), cy / (3.0 * area2))


def polygon_area(vertices: list[Vec]) -> float:
    area2 = 0.0
    n = len(vertices)
    for i in range(n):
        x0, y0 = vertices[i]
        x1, y1 = vertices[(i + 1) % n]
        area2 += x0 * y1 - x1 * y0
    return 0.5 * area2


def polygon_inertia_per_mass(vertices: list[Vec]) -> float:
    """Second moment of area / area about the origin (vertices must be centered)."""
    num = 0.0
    den = 0.0
    n = len(vertices)
    for i in range(n):
        p0 = vertices[i]
        p1 = vertices[(i + 1) % n]
        cr = cross2(p0, p1)
        num += cr * (dot2(p0, p0) + dot2(p0, p1) + dot2(p1, p1))
        den += cr
    return num / (6.0 * den)


def capsule_inertia_per_mass(half_length: float, radius: float) -> float:
    """Moment of inertia / mass of a capsule (axis +x) about its center."""
    if half_length <= 0.0:
        return 0.5 * radius * radius
    a_rect = 4.0 * half_length * radius
    a_disc = math.pi * radius * radius
    total = a_rect + a_disc
    f_rect = a_rect / total
    f_disc = a_disc / total
    i_rect = f_rect * ((2.0 * half_length) ** 2 + (2.0 * radius) ** 2) / 12.0
    # each cap: half-disc inertia about the segment endpoint, moved to the body center
    d_bar = 4.0 * radius / (3.0 * math.pi)
    i_half_own = 0.5 * radius * radius - d_bar * d_bar
    i_caps = f_disc * (i_half_own + (half_length + d_bar) ** 2)
    return i_rect + i_caps


def point_in_polygon(p: Vec, world_verts: list[Vec]) -> bool:
    n = len(world_verts)
    for i in range(n):
        a = world_verts[i]
        b = world_verts[(i + 1) % n]
        if cross2((b[0] - a[0], b[1] - a[1]), (p[0] - a[0], p[1] - a[1])) < 0.0:
            return False
    return True


def closest_point_on_segment(p: Vec, a: Vec, b: Vec) -> Vec:
    ab = (b[0] - a[0], b[1] - a[1])
    denom = dot2(ab, ab)
    if denom <= 0.0:
        return a
    t = (dot2((p[0] - a[0], p[1] - a[1]), ab)) / denom
    t = min(1.0, max(0.0, t))
    return (a[0] + t * ab[0], a[1] + t * ab[1])


def closest_point_on_polygon(p: Vec, world_verts: list[Vec]) -> Vec:
    """Closest point on the polygon boundary to p (boundary even if p is inside)."""
    best = None
    best_d2 = math.inf
    n = len(world_verts)
    for i in range(n):
        q = closest_point_on_segment(p, world_verts[i], world_verts[(i + 1) % n])
        d2 = (q[0] - p[0]) ** 2 + (q[1] - p[1]) ** 2
        if d2 < best_d2:
            best_d2 = d2
            best = q
    return best


def nearest_vector(point: Vec, world_verts: list[Vec]) -> Vec:
    """Vector from a query point to the closest point on the polygon boundary.

    Returns the zero vector when the point lies inside the polygon.
    """
    if point_in_polygon(point, world_verts):
        return (0.0, 0.0)
    q = closest_point_on_polygon(point, world_verts)
    return (q[0] - point[0], q[1] - point[1])


def segment_segment_closest(a0: Vec, a1: Vec, b0: Vec, b1: Vec) -> tuple[Vec, Vec, float]:
    """Closest points between two segments and their distance."""
    candidates = [
        (closest_point_on_segment(a0, b0, b1), a0, True),
        (closest_point_on_segment(a1, b0, b1), a1, True),
        (closest_point_on_segment(b0, a0, a1), b0, False),
        (closest_point_on_segment(b1, a0, a1), b1, False),
    ]
    best = None
    best_d2 = math.inf
    for q, p, q_on_b in candidates:
        d2 = (q[0] - p[0]) ** 2 + (q[1] - p[1]) ** 2
        if d2 < best_d2:
            best_d2 = d2
            best = (p, q) if q_on_b else (q, p)
    return best[0], best[1], math.sqrt(best_d2)


def segments_intersect(a0: Vec, a1: Vec, b0: Vec, b1: Vec) -> bool:
    d1 = cross2((a1[0] - a0[0], a1[1] - a0[1]), (b0[0] - a0[0], b0[1] - a0[1]))
    d2 = cross2((a1[0] - a0[0], a1[1] - a0[1]), (b1[0] - a0[0], b1[1] - a0[1]))
    d3 = cross2((b1[0] - b0[0], b1[1] - b0[1]), (a0[0] - b0[0], a0[1] - b0[1]))
    d4 = cross2((b1[0] - b0[0], b1[1] - b0[1]), (a1[0] - b0[0], a1[1] - b0[1]))
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


def segment_polygon_closest(a: Vec, b: Vec, world_verts: list[Vec]) -> tuple[Vec, Vec, float]:
    """Closest points (on segment, on polygon boundary) and signed distance.

    Distance is negative when the segment core overlaps the polygon; in that
    case the returned depth is the minimal translation along the polygon face
    normals or the segment normal needed to separate the cores, and the points
    are the overlap witnesses projected along that axis.
    """
    inside_a = point_in_polygon(a, world_verts)
    inside_b = point_in_polygon(b, world_verts)
    crosses = False
    if not (inside_a or inside_b):
        n = len(world_verts)
        for i in range(n):
            if segments_intersect(a, b, world_verts[i], world_verts[(i + 1) % n]):
                crosses = True
                break
    if inside_a or inside_b or crosses:
        return _segment_polygon_penetration(a, b, world_verts)
    best = None
    best_d = math.inf
    n = len(world_verts)
    for i in range(n):
        ps, pp, d = segment_segment_closest(a, b, world_verts[i], world_verts[(i + 1) % n])
        if d < best_d:
            best_d = d
            best = (ps, pp)
    return best[0], best[1], best_d


def _segment_polygon_penetration(a: Vec, b: Vec, world_verts: list[Vec]) -> tuple[Vec, Vec, float]:
    """SAT minimal push-out for an overlapping segment-polygon pair."""
    axes: list[Vec] = []
    n = len(world_verts)
    for i in range(n):
        p0 = world_verts[i]
        p1 = world_verts[(i + 1) % n]
        e = (p1[0] - p0[0], p1[1] - p0[1])
        ln = norm2(e)
        if ln > 0.0:
            axes.append((e[1] / ln, -e[0] / ln))  # outward for CCW
    seg = (b[0] - a[0], b[1] - a[1])
    ln = norm2(seg)
    if ln > 0.0:
        axes.append((-seg[1] / ln, seg[0] / ln))
        axes.append((seg[1] / ln, -seg[0] / ln))
    best_depth = math.inf
    best_axis = None
    for ax in axes:
        poly_proj = [dot2(v, ax) for v in world_verts]
        seg_proj = [dot2(a, ax), dot2(b, ax)]
        # push the segment toward +ax, out of the polygon
        depth = max(poly_proj) - min(seg_proj)
        if depth < 0.0:
            # cores are separated along this axis: no penetration after all
            best = None
            best_d = math.inf
            for i in range(n):
                ps, pp, d = segment_segment_closest(a, b, world_verts[i], world_verts[(i + 1) % n])
                if d < best_d:
                    best_d = d
                    best = (ps, pp)
            return best[0], best[1], best_d
        if depth < best_depth:
            best_depth = depth
            best_axis = ax
    # witness: segment point deepest along -axis
    seg_pt = a if dot2(a, best_axis) <= dot2(b, best_axis) else b
    poly_pt = (seg_pt[0] + best_axis[0] * best_depth, seg_pt[1] + best_axis[1] * best_depth)
    return seg_pt, poly_pt, -best_depth


def capsule_polygon_separation(
    seg_a: Vec, seg_b: Vec, radius: float, world_verts: list[Vec]
) -> tuple[float, Vec, Vec]:
    """Surface separation between a capsule and a polygon.

    Returns (separation, normal, point): separation is the surface gap
    (negative when penetrating), the normal points from the polygon toward the
    capsule, and the point lies on the polygon surface side of the contact.
    """
    ps, pp, d = segment_polygon_closest(seg_a, seg_b, world_verts)
    if d > 1e-12:
        nrm = ((ps[0] - pp[0]) / d, (ps[1] - pp[1]) / d)
        return d - radius, nrm, pp
    if d < 0.0:
        # core penetration: push-out direction from witness pair
        nrm_len = norm2((ps[0] - pp[0], ps[1] - pp[1]))
        if nrm_len > 1e-12:
            nrm = ((ps[0] - pp[0]) / nrm_len, (ps[1] - pp[1]) / nrm_len)
            nrm = (-nrm[0], -nrm[1])  # witness offset points into the polygon
        else:
            nrm = (0.0, 1.0)
        return d - radius, nrm, pp
    return -radius, (0.0, 1.0), ps


def sample_polygon_boundary(vertices: list[Vec], count: int) -> list[Vec]:
    """count points spread by arc length along the polygon boundary (local frame)."""
    n = len(vertices)
    lengths = []
    total = 0.0
    for i in range(n):
        a = vertices[i]
        b = vertices[(i + 1) % n]
        ln = math.hypot(b[0] - a[0], b[1] - a[1])
        lengths.append(ln)
        total += ln
    pts = []
    for k in range(count):
        s = total * k / count
        for i in range(n):
            if s <= lengths[i] or i == n - 1:
                a = vertices[i]
                b = vertices[(i + 1) % n]
                t = s / lengths[i] if lengths[i] > 0.0 else 0.0
                pts.append((a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])))
                break
            s -= lengths[i]
    return pts
