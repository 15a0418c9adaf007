"""Procedural meshes, the viewing-sphere camera and a z-buffered software rasterizer.

World frame: z is up, objects face +x. A camera at polar ``theta`` and
azimuth ``phi`` sits at elevation ``90 - theta`` above the horizon and at
heading ``phi`` measured counter-clockwise (seen from above) from +x, so that
the object appears turned clockwise by ``phi`` relative to the viewer.

Images are ``(H, W, 3)`` uint8 arrays, row 0 at the top.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .angles import DomainError, wrap_azimuth

MARKER_COLOR = (255, 0, 0)
BACKGROUND = (0, 0, 0)

# base palette for the arrow faces, jittered per seed
_ARROW_PALETTE = {
    "top": (205, 205, 70),
    "bottom": (70, 80, 205),
    "left": (70, 200, 80),
    "right": (200, 70, 205),
    "back": (230, 230, 230),
    "head_base": (215, 130, 45),
}


@dataclass
class Mesh:
    vertices: np.ndarray  # (V, 3) float64
    triangles: np.ndarray  # (T, 3) int64
    colors: np.ndarray  # (T, 3) uint8
    front_axis: tuple = (1.0, 0.0, 0.0)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        self.colors = np.asarray(self.colors, dtype=np.uint8).reshape(-1, 3)
        if len(self.colors) != len(self.triangles):
            raise DomainError("one colour per triangle is required")
        if len(self.triangles) and (self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices)):
            raise DomainError("triangle references a missing vertex")

    def marker_triangles(self) -> np.ndarray:
        return np.all(self.colors == np.array(MARKER_COLOR, dtype=np.uint8), axis=1)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


def _box_faces(x0, x1, y0, y1, z0, z1):
    """Quads of an axis-aligned box keyed by side, each as 4 corners (CCW seen from outside)."""
    return {
        "back": [(x0, y0, z0), (x0, y0, z1), (x0, y1, z1), (x0, y1, z0)],
        "front": [(x1, y0, z0), (x1, y1, z0), (x1, y1, z1), (x1, y0, z1)],
        "right": [(x0, y0, z0), (x1, y0, z0), (x1, y0, z1), (x0, y0, z1)],
        "left": [(x0, y1, z0), (x0, y1, z1), (x1, y1, z1), (x1, y1, z0)],
        "bottom": [(x0, y0, z0), (x0, y1, z0), (x1, y1, z0), (x1, y0, z0)],
        "top": [(x0, y0, z1), (x1, y0, z1), (x1, y1, z1), (x0, y1, z1)],
    }


class _Builder:
    def __init__(self):
        self.verts: list = []
        self.tris: list = []
        self.cols: list = []

    def quad(self, corners, color):
        self.tri(corners[0], corners[1], corners[2], color)
        self.tri(corners[0], corners[2], corners[3], color)

    def tri(self, a, b, c, color):
        n = len(self.verts)
        self.verts.extend([a, b, c])
        self.tris.append((n, n + 1, n + 2))
        self.cols.append(color)

    def build(self) -> Mesh:
        return Mesh(np.array(self.verts), np.array(self.tris), np.array(self.cols))


def normalize_to_unit_cube(mesh: Mesh) -> Mesh:
    """Centre the bounding box on the origin and scale its longest side to 1."""
    lo, hi = mesh.bounds()
    centre = (lo + hi) / 2.0
    scale = float(np.max(hi - lo))
    v = (mesh.vertices - centre) / scale
    return Mesh(np.clip(v, -0.5, 0.5), mesh.triangles.copy(), mesh.colors.copy(), mesh.front_axis)


def _seed_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed) % (1 << 63)))


def _jitter(rng, rgb, amount=25):
    c = np.array(rgb) + rng.integers(-amount, amount + 1, size=3)
    c = np.clip(c, 0, 255)
    # never collide with the reserved marker colour
    if tuple(c) == MARKER_COLOR:
        c[1] = 40
    return tuple(int(v) for v in c)


def make_arrow_object(seed: int) -> Mesh:
    """An asymmetric arrow pointing along +x: box shaft plus pyramid head.

    The four slanted faces of the head carry the marker colour; every other
    side has its own colour so that left/right and top/bottom differ.
    """
    rng = _seed_rng(seed)
    shaft_len = rng.uniform(0.9, 1.4)
    shaft_w = rng.uniform(0.14, 0.24)
    shaft_h = rng.uniform(0.10, 0.20)
    head_len = rng.uniform(0.45, 0.75)
    head_w = shaft_w * rng.uniform(1.6, 2.2)
    head_h = shaft_h * rng.uniform(1.6, 2.2)
    colors = {k: _jitter(rng, v) for k, v in _ARROW_PALETTE.items()}

    b = _Builder()
    faces = _box_faces(0.0, shaft_len, -shaft_w, shaft_w, -shaft_h, shaft_h)
    for side in ("back", "right", "left", "bottom", "top"):
        b.quad(faces[side], colors[side])
    x1 = shaft_len
    base = [(x1, -head_w, -head_h), (x1, -head_w, head_h), (x1, head_w, head_h), (x1, head_w, -head_h)]
    b.quad(base, colors["head_base"])
    apex = (x1 + head_len, 0.0, 0.0)
    for k in range(4):
        b.tri(base[k], base[(k + 1) % 4], apex, MARKER_COLOR)
    return normalize_to_unit_cube(b.build())


def make_symmetric_object(seed: int) -> Mesh:
    """A square prism with identical side faces and no marker: an object without a front."""
    rng = _seed_rng(seed)
    half = rng.uniform(0.2, 0.35)
    height = rng.uniform(0.3, 0.8)
    side = _jitter(rng, (150, 150, 160), 40)
    cap = _jitter(rng, (90, 160, 170), 40)
    b = _Builder()
    faces = _box_faces(-half, half, -half, half, -height / 2, height / 2)
    for s in ("back", "front", "right", "left"):
        b.quad(faces[s], side)
    for s in ("top", "bottom"):
        b.quad(faces[s], cap)
    return normalize_to_unit_cube(b.build())


@dataclass
class CameraPose:
    position: np.ndarray
    roll: float = 0.0
    vertical_fov: float = 45.0
    ortho_half_extent: float | None = None  # None means perspective
    right: np.ndarray = field(init=False, repr=False)
    up: np.ndarray = field(init=False, repr=False)
    forward: np.ndarray = field(init=False, repr=False)
    degenerate: bool = field(init=False)

    def __post_init__(self):
        p = np.asarray(self.position, dtype=np.float64)
        r = float(np.linalg.norm(p))
        if not np.all(np.isfinite(p)) or r == 0.0:
            raise DomainError("camera position must be finite and away from the origin")
        self.position = p
        right0, up0, forward, self.degenerate = _reference_basis(p)
        c, s = math.cos(math.radians(self.roll)), math.sin(math.radians(self.roll))
        # viewer turns clockwise: up swings toward the unrolled right vector
        self.up = c * up0 + s * right0
        self.right = c * right0 - s * up0
        self.forward = forward


def _reference_basis(p: np.ndarray):
    """Zero-roll (right, up, forward) for a camera at ``p`` looking at the origin."""
    r = float(np.linalg.norm(p))
    forward = -p / r
    horiz = math.hypot(p[0], p[1])
    if horiz <= 1e-12 * r:
        up = np.array([-1.0, 0.0, 0.0]) if p[2] > 0 else np.array([1.0, 0.0, 0.0])
        degenerate = True
    else:
        up = np.array([0.0, 0.0, 1.0])
        up = up - np.dot(up, forward) * forward
        up /= np.linalg.norm(up)
        degenerate = False
    right = np.cross(forward, up)
    right /= np.linalg.norm(right)
    up = np.cross(right, forward)
    return right, up, forward, degenerate


def camera_from_orientation(
    theta: float, phi: float, delta: float, radius: float, vertical_fov: float = 45.0
) -> CameraPose:
    if not (math.isfinite(radius) and radius > 0):
        raise DomainError(f"radius must be > 0, got {radius!r}")
    if not (0.0 <= theta <= 180.0):
        raise DomainError(f"theta must lie in [0, 180], got {theta!r}")
    e = math.radians(90.0 - theta)
    f = math.radians(wrap_azimuth(phi))
    if theta in (0.0, 180.0):
        pos = np.array([0.0, 0.0, radius if theta == 0.0 else -radius])
    else:
        pos = radius * np.array([math.cos(f) * math.cos(e), math.sin(f) * math.cos(e), math.sin(e)])
    return CameraPose(pos, roll=wrap_azimuth(delta), vertical_fov=vertical_fov)


@dataclass(frozen=True)
class RecoveredOrientation:
    theta: float
    phi: float
    delta: float
    degenerate: bool


def orientation_from_camera(pose: CameraPose) -> RecoveredOrientation:
    p = pose.position
    r = float(np.linalg.norm(p))
    if r == 0.0:
        raise DomainError("camera at the origin has no orientation")
    right0, up0, _, degenerate = _reference_basis(p)
    theta = 90.0 - math.degrees(math.asin(max(-1.0, min(1.0, p[2] / r))))
    phi = 0.0 if degenerate else wrap_azimuth(math.degrees(math.atan2(p[1], p[0])))
    delta = wrap_azimuth(math.degrees(math.atan2(np.dot(pose.up, right0), np.dot(pose.up, up0))))
    return RecoveredOrientation(theta, phi, delta, degenerate)


def project(points: np.ndarray, pose: CameraPose, width: int, height: int):
    """Screen coordinates (col, row) and view depth of world points."""
    v = np.asarray(points, dtype=np.float64) - pose.position
    xc = v @ pose.right
    yc = v @ pose.up
    zc = v @ pose.forward
    if pose.ortho_half_extent is None:
        focal = (height / 2.0) / math.tan(math.radians(pose.vertical_fov) / 2.0)
        safe = np.where(zc > 1e-9, zc, 1.0)
        col = width / 2.0 + focal * xc / safe
        row = height / 2.0 - focal * yc / safe
    else:
        s = (height / 2.0) / pose.ortho_half_extent
        col = width / 2.0 + s * xc
        row = height / 2.0 - s * yc
    return col, row, zc


def _check_dims(width: int, height: int) -> None:
    if width < 8 or height < 8:
        raise DomainError(f"image must be at least 8x8, got {width}x{height}")


def rasterize(mesh: Mesh, pose: CameraPose, width: int = 64, height: int = 64) -> np.ndarray:
    """Flat-shaded, z-buffered render sampled at pixel centres.

    Triangles are drawn in mesh order regardless of facing; a pixel is
    overwritten only by a strictly nearer fragment. Under perspective, depth
    is compared through interpolated 1/z.
    """
    _check_dims(width, height)
    img = np.empty((height, width, 3), dtype=np.uint8)
    img[:] = BACKGROUND
    zbuf = np.full((height, width), np.inf)
    col, row, zc = project(mesh.vertices, pose, width, height)
    perspective = pose.ortho_half_extent is None

    for t, (i0, i1, i2) in enumerate(mesh.triangles):
        z = zc[[i0, i1, i2]]
        if perspective and np.any(z <= 1e-9):
            continue
        xs = col[[i0, i1, i2]]
        ys = row[[i0, i1, i2]]
        area = (xs[1] - xs[0]) * (ys[2] - ys[0]) - (xs[2] - xs[0]) * (ys[1] - ys[0])
        if area == 0.0:
            continue
        c0 = max(int(math.floor(xs.min() - 0.5)), 0)
        c1 = min(int(math.ceil(xs.max() - 0.5)), width - 1)
        r0 = max(int(math.floor(ys.min() - 0.5)), 0)
        r1 = min(int(math.ceil(ys.max() - 0.5)), height - 1)
        if c0 > c1 or r0 > r1:
            continue
        px, py = np.meshgrid(np.arange(c0, c1 + 1) + 0.5, np.arange(r0, r1 + 1) + 0.5)
        w0 = ((xs[2] - xs[1]) * (py - ys[1]) - (ys[2] - ys[1]) * (px - xs[1])) / area
        w1 = ((xs[0] - xs[2]) * (py - ys[2]) - (ys[0] - ys[2]) * (px - xs[2])) / area
        w2 = 1.0 - w0 - w1
        inside = (w0 >= 0) & (w1 >= 0) & (w2 >= 0)
        if not inside.any():
            continue
        if perspective:
            key = -(w0 / z[0] + w1 / z[1] + w2 / z[2])
        else:
            key = w0 * z[0] + w1 * z[1] + w2 * z[2]
        sub = zbuf[r0 : r1 + 1, c0 : c1 + 1]
        win = inside & (key < sub)
        sub[win] = key[win]
        img[r0 : r1 + 1, c0 : c1 + 1][win] = mesh.colors[t]
    return img


def count_color(img: np.ndarray, rgb=MARKER_COLOR) -> int:
    return int(np.all(img == np.array(rgb, dtype=np.uint8), axis=-1).sum())


def check_image(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise DomainError(f"expected an (H, W, 3) uint8 image, got {img.shape} {img.dtype}")
    _check_dims(img.shape[1], img.shape[0])
    return img


def ppm_bytes(img: np.ndarray) -> bytes:
    img = check_image(img)
    h, w, _ = img.shape
    return f"P6\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(img).tobytes()


def write_ppm(path, img: np.ndarray) -> None:
    Path(path).write_bytes(ppm_bytes(img))


def parse_ppm(data: bytes) -> np.ndarray:
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated PPM header")
        tokens.append(data[start:pos])
    if tokens[0] != b"P6" or int(tokens[3]) != 255:
        raise ValueError("only binary P6 images with maxval 255 are supported")
    w, h = int(tokens[1]), int(tokens[2])
    pos += 1  # single whitespace after maxval
    raw = data[pos : pos + w * h * 3]
    if len(raw) != w * h * 3:
        raise ValueError("truncated PPM pixel data")
    return np.frombuffer(raw, dtype=np.uint8).reshape(h, w, 3).copy()


def read_ppm(path) -> np.ndarray:
    return parse_ppm(Path(path).read_bytes())


def read_obj(source, default_color=(180, 180, 180)) -> Mesh:
    """Minimal Wavefront OBJ reader: ``v`` and ``f`` records only.

    Vertex lines may carry an RGB triple in [0, 1] after the position; a
    face then takes the mean colour of its corners. Polygons are fanned into
    triangles. ``source`` is a path or the file text itself.
    """
    text = Path(source).read_text() if isinstance(source, Path) or "\n" not in str(source) else str(source)
    verts, vcols, tris, cols = [], [], [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        if parts[0] == "v":
            if len(parts) < 4:
                raise ValueError(f"line {lineno}: vertex needs three coordinates")
            verts.append([float(x) for x in parts[1:4]])
            vcols.append([float(x) * 255.0 for x in parts[4:7]] if len(parts) >= 7 else None)
        elif parts[0] == "f":
            idx = []
            for p in parts[1:]:
                k = int(p.split("/")[0])
                idx.append(k - 1 if k > 0 else len(verts) + k)
            if len(idx) < 3:
                raise ValueError(f"line {lineno}: face needs at least three vertices")
            for j in range(1, len(idx) - 1):
                tri = (idx[0], idx[j], idx[j + 1])
                tris.append(tri)
                cs = [vcols[i] for i in tri]
                if all(c is not None for c in cs):
                    cols.append(tuple(int(round(v)) for v in np.mean(cs, axis=0)))
                else:
                    cols.append(default_color)
    return Mesh(np.array(verts, dtype=np.float64), np.array(tris, dtype=np.int64), np.array(cols, dtype=np.uint8))
