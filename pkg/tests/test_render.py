import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from orientkit.angles import DomainError, circular_abs_error
from orientkit.render import (
    MARKER_COLOR,
    CameraPose,
    Mesh,
    camera_from_orientation,
    count_color,
    make_arrow_object,
    make_symmetric_object,
    orientation_from_camera,
    parse_ppm,
    ppm_bytes,
    rasterize,
    read_obj,
    read_ppm,
    write_ppm,
)


@pytest.mark.parametrize("seed", [0, 1, 7, 123456])
def test_arrow_mesh_invariants(seed):
    m = make_arrow_object(seed)
    lo, hi = m.bounds()
    assert np.all(lo >= -0.5 - 1e-12) and np.all(hi <= 0.5 + 1e-12)
    marker = m.marker_triangles()
    assert marker.any()
    cent = m.vertices[m.triangles[marker]].mean(axis=1)
    assert np.all(cent[:, 0] > 0)
    again = make_arrow_object(seed)
    assert np.array_equal(m.vertices, again.vertices) and np.array_equal(m.colors, again.colors)


def test_arrow_seeds_vary():
    a, b = make_arrow_object(1), make_arrow_object(2)
    assert not (a.vertices.shape == b.vertices.shape and np.allclose(a.vertices, b.vertices))


def test_camera_examples():
    r = 2.0
    p = camera_from_orientation(90, 0, 0, r)
    assert np.allclose(p.position, [r, 0, 0], atol=1e-12)
    assert np.allclose(p.up, [0, 0, 1], atol=1e-12)
    # heading convention: the camera swings counter-clockwise (seen from above) as phi grows
    assert np.allclose(camera_from_orientation(90, 90, 0, r).position, [0, r, 0], atol=1e-12)
    for phi in (0, 45, 200):
        top = camera_from_orientation(0, phi, 0, r)
        assert np.allclose(top.position, [0, 0, r]) and top.degenerate


def test_camera_rejects_bad_input():
    with pytest.raises(DomainError):
        camera_from_orientation(90, 0, 0, 0.0)
    with pytest.raises(DomainError):
        camera_from_orientation(200, 0, 0, 1.0)
    with pytest.raises(DomainError):
        CameraPose(np.zeros(3))


@given(st.floats(1.01, 178.99), st.floats(0, 360, exclude_max=True), st.floats(0, 360, exclude_max=True), st.floats(0.5, 10))
def test_round_trip_and_orthonormal_basis(theta, phi, delta, r):
    pose = camera_from_orientation(theta, phi, delta, r)
    B = np.stack([pose.right, pose.up, pose.forward])
    assert np.allclose(B @ B.T, np.eye(3), atol=1e-9)
    rec = orientation_from_camera(pose)
    assert abs(rec.theta - theta) < 1e-9
    assert circular_abs_error(rec.phi, phi) < 1e-9
    assert circular_abs_error(rec.delta, delta) < 1e-9
    assert 0 <= rec.delta < 360 and not rec.degenerate


def test_round_trip_example_and_pole():
    rec = orientation_from_camera(camera_from_orientation(45, 120, 10, 2))
    assert (rec.theta, rec.phi, rec.delta) == pytest.approx((45, 120, 10), abs=1e-12)
    pole = orientation_from_camera(camera_from_orientation(0, 77, 30, 2))
    assert pole.phi == 0.0 and pole.degenerate and pole.theta == 0.0
    assert orientation_from_camera(camera_from_orientation(90, 10, -20, 1)).delta == pytest.approx(340)


def test_roll_is_clockwise_for_viewer():
    # with a clockwise roll the world's up direction appears rotated counter-clockwise in the image,
    # so a point above the origin drifts to the left of centre
    pose = camera_from_orientation(90, 0, 30, 3)
    v = np.array([0, 0, 0.3]) - pose.position
    assert v @ pose.right < 0


def test_marker_visibility_monotone():
    m = make_arrow_object(0)
    counts = [count_color(rasterize(m, camera_from_orientation(90, phi, 0, 2.0), 64, 64)) for phi in (0, 90, 180)]
    assert counts[0] > counts[1] > counts[2] == 0
    assert counts[0] >= 1


def test_left_facing_view_shows_marker_on_left():
    """At azimuth 90 the object's front points to the viewer's left."""
    img = rasterize(make_arrow_object(0), camera_from_orientation(90, 90, 0, 2.0), 64, 64)
    cols = np.nonzero(np.all(img == MARKER_COLOR, axis=-1))[1]
    assert cols.size and cols.mean() < 32
    img = rasterize(make_arrow_object(0), camera_from_orientation(90, 270, 0, 2.0), 64, 64)
    cols = np.nonzero(np.all(img == MARKER_COLOR, axis=-1))[1]
    assert cols.size and cols.mean() > 32


def test_rasterize_deterministic_and_validates():
    m = make_arrow_object(3)
    pose = camera_from_orientation(60, 33, 12, 2.0)
    a = rasterize(m, pose, 40, 32)
    assert a.shape == (32, 40, 3) and a.dtype == np.uint8
    assert rasterize(m, pose, 40, 32).tobytes() == a.tobytes()
    with pytest.raises(DomainError):
        rasterize(m, pose, 4, 4)


def test_zbuffer_nearer_triangle_wins():
    # two overlapping squares facing +x, the red one nearer to a camera on +x
    def square(x, color):
        v = [(x, -0.3, -0.3), (x, 0.3, -0.3), (x, 0.3, 0.3), (x, -0.3, 0.3)]
        return v, [(0, 1, 2), (0, 2, 3)], [color, color]

    v1, t1, c1 = square(-0.2, (0, 0, 255))
    v2, t2, c2 = square(0.2, (255, 0, 0))
    for order in ((v1, t1, c1, v2, t2, c2), (v2, t2, c2, v1, t1, c1)):
        va, ta, ca, vb, tb, cb = order
        mesh = Mesh(va + vb, ta + [tuple(i + 4 for i in t) for t in tb], ca + cb)
        img = rasterize(mesh, camera_from_orientation(90, 0, 0, 2.0), 32, 32)
        assert tuple(img[16, 16]) == (255, 0, 0)


def test_symmetric_object_has_no_marker():
    assert not make_symmetric_object(0).marker_triangles().any()


def test_ppm_round_trip(tmp_path, rng):
    img = rng.integers(0, 256, (9, 13, 3), dtype=np.uint8)
    write_ppm(tmp_path / "a.ppm", img)
    assert np.array_equal(read_ppm(tmp_path / "a.ppm"), img)
    assert ppm_bytes(img).startswith(b"P6\n13 9\n255\n")


def test_ppm_parser_handles_comments_and_rejects_garbage():
    body = bytes(range(12))
    img = parse_ppm(b"P6\n# comment\n2 2\n255\n" + body)
    assert img.shape == (2, 2, 3)
    with pytest.raises(ValueError):
        parse_ppm(b"P3\n2 2\n255\n")
    with pytest.raises(ValueError):
        parse_ppm(b"P6\n2 2\n255\n" + body[:5])


def test_read_obj(tmp_path):
    text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n"
    m = read_obj(text)
    assert len(m.triangles) == 2 and m.vertices.shape == (4, 3)
    p = tmp_path / "quad.obj"
    p.write_text(text)
    assert np.array_equal(read_obj(p).triangles, m.triangles)
