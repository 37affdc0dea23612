import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from planarmimic.sim2d import geometry as geo


UNIT_BOX = [(-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)]


def brute_force_nearest(point, verts, samples=200000):
    """Independent oracle: densely sample the polygon boundary."""
    best = None
    best_d = math.inf
    n = len(verts)
    for i in range(n):
        a, b = verts[i], verts[(i + 1) % n]
        for k in range(samples // n):
            t = k / (samples // n - 1)
            q = (a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]))
            d = math.hypot(q[0] - point[0], q[1] - point[1])
            if d < best_d:
                best_d = d
                best = q
    return best


def test_wrap_angle_range():
    assert geo.wrap_angle(math.pi) == pytest.approx(math.pi)
    assert geo.wrap_angle(-math.pi) == pytest.approx(math.pi)
    assert geo.wrap_angle(0.0) == 0.0


@given(st.floats(-50.0, 50.0))
def test_wrap_angle_property(x):
    w = geo.wrap_angle(x)
    assert -math.pi < w <= math.pi
    assert math.isclose(math.sin(w), math.sin(x), abs_tol=1e-9)
    assert math.isclose(math.cos(w), math.cos(x), abs_tol=1e-9)


def test_angle_diff_wraps():
    # 3.1 vs -3.1 differ by ~0.083 through the wrap, not 6.2
    assert abs(geo.angle_diff(-3.1, 3.1)) == pytest.approx(2 * math.pi - 6.2, abs=1e-12)


def test_nearest_vector_outside_axis():
    assert geo.nearest_vector((2.0, 0.0), UNIT_BOX) == pytest.approx((-1.5, 0.0))


def test_nearest_vector_inside_is_zero():
    assert geo.nearest_vector((0.0, 0.0), UNIT_BOX) == (0.0, 0.0)


def test_nearest_vector_corner_vs_brute_force():
    v = geo.nearest_vector((1.0, 1.0), UNIT_BOX)
    q = brute_force_nearest((1.0, 1.0), UNIT_BOX)
    expected = (q[0] - 1.0, q[1] - 1.0)
    assert v == pytest.approx(expected, abs=1e-6)
    assert v == pytest.approx((-0.5, -0.5), abs=1e-6)


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_nearest_vector_lands_on_boundary(px, py):
    v = geo.nearest_vector((px, py), UNIT_BOX)
    if v == (0.0, 0.0):
        assert geo.point_in_polygon((px, py), UNIT_BOX)
    else:
        q = (px + v[0], py + v[1])
        assert max(abs(q[0]), abs(q[1])) == pytest.approx(0.5, abs=1e-9)


def test_polygon_validation_rejects_cw():
    with pytest.raises(ValueError):
        geo.validate_convex_ccw(list(reversed(UNIT_BOX)))


def test_polygon_validation_rejects_concave():
    verts = [(-1, -1), (1, -1), (0.0, 0.0), (1, 1), (-1, 1)]
    with pytest.raises(ValueError):
        geo.validate_convex_ccw(verts)


def test_polygon_mass_properties():
    assert geo.polygon_area(UNIT_BOX) == pytest.approx(1.0)
    assert geo.polygon_centroid(UNIT_BOX) == pytest.approx((0.0, 0.0))
    # box inertia/mass = (w^2 + h^2)/12
    assert geo.polygon_inertia_per_mass(UNIT_BOX) == pytest.approx(2.0 / 12.0)


def test_capsule_inertia_limits():
    # zero half-length degenerates to a disc
    assert geo.capsule_inertia_per_mass(0.0, 0.3) == pytest.approx(0.5 * 0.09)
    # long thin capsule approaches rod inertia L^2/12
    rod = geo.capsule_inertia_per_mass(1.0, 1e-4)
    assert rod == pytest.approx(4.0 / 12.0, rel=1e-2)


def test_capsule_polygon_separation_gap():
    # horizontal capsule above the unit box
    sep, nrm, _ = geo.capsule_polygon_separation((-0.2, 1.0), (0.2, 1.0), 0.1, UNIT_BOX)
    assert sep == pytest.approx(0.4, abs=1e-9)
    assert nrm == pytest.approx((0.0, 1.0), abs=1e-9)


def test_capsule_polygon_separation_penetration():
    sep, nrm, _ = geo.capsule_polygon_separation((-0.2, 0.45), (0.2, 0.45), 0.1, UNIT_BOX)
    assert sep < 0.0
    assert nrm[1] == pytest.approx(1.0, abs=1e-6)


def test_sample_polygon_boundary_counts_and_location():
    pts = geo.sample_polygon_boundary(UNIT_BOX, 32)
    assert len(pts) == 32
    for x, y in pts:
        assert max(abs(x), abs(y)) == pytest.approx(0.5, abs=1e-9)
