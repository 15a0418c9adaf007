"""Canonical-pose filtering and symmetry-gated front-face annotation."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter, uniform_filter

from .angles import DomainError
from .oracle import AnnotationError, OracleRequest, ProtocolError, annotation_prompt, parse_choice
from .render import BACKGROUND, CameraPose, Mesh, camera_from_orientation, check_image, rasterize

VIEW_NAMES = ("view_px", "view_mx", "view_py", "view_my", "view_top")


@dataclass
class OrthoViewSet:
    view_px: np.ndarray
    view_mx: np.ndarray
    view_py: np.ndarray
    view_my: np.ndarray
    view_top: np.ndarray

    def __post_init__(self):
        shapes = {check_image(getattr(self, n)).shape for n in VIEW_NAMES}
        if len(shapes) != 1:
            raise DomainError(f"all five views must share one size, got {sorted(shapes)}")

    def views(self) -> list[np.ndarray]:
        return [getattr(self, n) for n in VIEW_NAMES]


class FrontFaceLabel(enum.Enum):
    PlusX = "A"
    MinusX = "B"
    PlusY = "C"
    MinusY = "D"
    NoFront = "E"


def orthographic_views(
    mesh: Mesh, size: int = 64, half_extent: float = 0.75, roll: float = 0.0, supersample: int = 4
) -> OrthoViewSet:
    """Render the mesh orthographically from +x, -x, +y, -y and from above.

    Views are box-filtered down from ``supersample`` times the resolution so
    that slanted edges keep their true direction.
    """

    def view(theta, phi):
        base = camera_from_orientation(theta, phi, roll, 3.0)
        pose = CameraPose(base.position, roll=base.roll, ortho_half_extent=half_extent)
        n = size * supersample
        big = rasterize(mesh, pose, n, n).astype(np.float64)
        small = big.reshape(size, supersample, size, supersample, 3).mean(axis=(1, 3))
        return np.rint(small).astype(np.uint8)

    return OrthoViewSet(view(90, 0), view(90, 180), view(90, 90), view(90, 270), view(0, 0))


def to_gray(img: np.ndarray) -> np.ndarray:
    x = np.asarray(img, dtype=np.float64)
    if x.ndim == 2:
        return x
    return x[..., 0] * 0.299 + x[..., 1] * 0.587 + x[..., 2] * 0.114


@dataclass(frozen=True)
class EdgeDirection:
    direction: float | None  # degrees in [0, 90); None when degenerate with no edges
    isotropy: float
    degenerate: bool
    n_edges: int


def edge_principal_direction(
    img: np.ndarray, percentile: float = 90.0, isotropy_limit: float = 0.6, smooth_sigma: float = 2.0
) -> EdgeDirection:
    """Dominant edge direction modulo 90 degrees by PCA of gradient vectors.

    Each edge pixel's gradient is encoded with its angle doubled, so that
    perpendicular edge families (both sides of a rectangle) point along the
    same principal axis; half the axis angle is the edge direction mod 90.
    ``isotropy`` is the eigenvalue ratio; above ``isotropy_limit`` the view
    has no dominant direction and is flagged degenerate. A light Gaussian
    blur ahead of the central differences removes the staircase bias of
    pixelated edges.
    """
    g = to_gray(img)
    if min(g.shape) < 16:
        raise DomainError(f"edge analysis needs at least 16x16 pixels, got {g.shape}")
    if smooth_sigma > 0:
        g = gaussian_filter(g, smooth_sigma)
    gy, gx = np.gradient(g)
    mag = np.hypot(gx, gy)
    if not np.any(mag > 0):
        return EdgeDirection(None, 1.0, True, 0)
    edges = mag > np.percentile(mag, percentile)
    if not edges.any():
        edges = mag > 0
    a2 = 2.0 * np.arctan2(gy[edges], gx[edges])
    m = mag[edges]
    u = np.stack([m * np.cos(a2), m * np.sin(a2)], axis=1)
    scatter = u.T @ u / len(u)
    evals, evecs = np.linalg.eigh(scatter)
    lam_small, lam_big = evals
    v = evecs[:, 1]
    isotropy = float(lam_small / lam_big) if lam_big > 0 else 1.0
    direction = (math.degrees(math.atan2(v[1], v[0])) / 2.0) % 90.0
    if direction >= 90.0:
        direction = 0.0
    return EdgeDirection(direction, isotropy, isotropy > isotropy_limit, int(edges.sum()))


def is_canonical(views: OrthoViewSet, tolerance: float = 2.0, **edge_kwargs) -> bool | None:
    """True when every decisive view has its edges within ``tolerance`` of the axes.

    Isotropic views abstain; if all of them abstain the answer is ``None``
    (inconclusive).
    """
    votes = []
    for img in views.views():
        e = edge_principal_direction(img, **edge_kwargs)
        if e.degenerate:
            continue
        off = min(e.direction, 90.0 - e.direction)
        votes.append(off <= tolerance)
    if not votes:
        return None
    return all(votes)


def ssim(a: np.ndarray, b: np.ndarray, win: int = 7, data_range: float = 255.0) -> float:
    """Mean structural similarity of two grey images with a uniform window."""
    x, y = to_gray(a), to_gray(b)
    if x.shape != y.shape:
        raise DomainError(f"image sizes differ: {x.shape} vs {y.shape}")
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    n = win * win
    cov_norm = n / (n - 1.0)
    ux = uniform_filter(x, win)
    uy = uniform_filter(y, win)
    uxx = uniform_filter(x * x, win)
    uyy = uniform_filter(y * y, win)
    uxy = uniform_filter(x * y, win)
    vx = cov_norm * (uxx - ux * ux)
    vy = cov_norm * (uyy - uy * uy)
    vxy = cov_norm * (uxy - ux * uy)
    s = ((2 * ux * uy + c1) * (2 * vxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
    pad = (win - 1) // 2
    return float(s[pad:-pad, pad:-pad].mean())


def color_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """1 minus the mean RGB distance, normalised so black vs white is 0."""
    d = np.linalg.norm(a.astype(np.float64) - b.astype(np.float64), axis=-1)
    return float(1.0 - d.mean() / (255.0 * math.sqrt(3.0)))


def orientation_histogram(img: np.ndarray, bins: int = 36) -> np.ndarray:
    """Magnitude-weighted histogram of signed gradient directions, bins centred on multiples of 360/bins."""
    gy, gx = np.gradient(to_gray(img))
    mag = np.hypot(gx, gy)
    ang = np.degrees(np.arctan2(gy, gx))
    idx = np.rint(ang / (360.0 / bins)).astype(np.int64) % bins
    return np.bincount(idx.ravel(), weights=mag.ravel(), minlength=bins)


def histogram_similarity(a: np.ndarray, b: np.ndarray) -> float:
    ha, hb = orientation_histogram(a), orientation_histogram(b)
    na, nb = np.linalg.norm(ha), np.linalg.norm(hb)
    if na == 0 and nb == 0:
        return 1.0
    if na == 0 or nb == 0:
        return 0.0
    return float(ha @ hb / (na * nb))


def _crop_to_objects(a: np.ndarray, b: np.ndarray, margin: int = 2, min_size: int = 7):
    """Crop both images to the union bounding box of their non-background pixels."""
    fg = np.any(a != np.array(BACKGROUND, np.uint8), axis=-1) | np.any(b != np.array(BACKGROUND, np.uint8), axis=-1)
    if not fg.any():
        return a, b
    rows = np.flatnonzero(fg.any(axis=1))
    cols = np.flatnonzero(fg.any(axis=0))
    H, W = fg.shape
    r0, r1 = max(rows[0] - margin, 0), min(rows[-1] + margin + 1, H)
    c0, c1 = max(cols[0] - margin, 0), min(cols[-1] + margin + 1, W)
    if r1 - r0 < min_size or c1 - c0 < min_size:
        return a, b
    return a[r0:r1, c0:c1], b[r0:r1, c0:c1]


@dataclass(frozen=True)
class SymmetryWeights:
    structure: float = 0.5
    color: float = 0.3
    gradient: float = 0.2


def symmetry_score(a: np.ndarray, b: np.ndarray, weights: SymmetryWeights = SymmetryWeights()) -> float:
    """How closely ``a`` matches the mirror image of ``b``, in [0, 1].

    Opposite orthographic views of a mirror-symmetric object are left-right
    mirrors of one another, hence the flip.
    """
    a = check_image(a)
    b = check_image(b)
    if a.shape != b.shape:
        raise DomainError(f"image sizes differ: {a.shape} vs {b.shape}")
    bm = b[:, ::-1]
    a, bm = _crop_to_objects(a, bm)
    s = (
        weights.structure * max(0.0, ssim(a, bm))
        + weights.color * color_similarity(a, bm)
        + weights.gradient * histogram_similarity(a, bm)
    )
    return float(min(1.0, max(0.0, s)))


@dataclass
class AnnotateConfig:
    symmetry_threshold: float = 0.85
    prune_symmetric_pair: bool = False
    weights: SymmetryWeights = field(default_factory=SymmetryWeights)


_OPTION_VIEWS = {"A": "view_px", "B": "view_mx", "C": "view_py", "D": "view_my"}


@dataclass
class Annotation:
    label: FrontFaceLabel
    audit: dict


def annotate_front(views: OrthoViewSet, oracle, cfg: AnnotateConfig = AnnotateConfig()) -> Annotation:
    """Decide the front face, consulting ``oracle`` unless both axes are symmetric.

    ``oracle`` needs one method, ``ask(OracleRequest) -> str`` returning the
    raw JSON reply.
    """
    sx = symmetry_score(views.view_px, views.view_mx, cfg.weights)
    sy = symmetry_score(views.view_py, views.view_my, cfg.weights)
    audit = {
        "scores": {"x_pair": sx, "y_pair": sy},
        "threshold": cfg.symmetry_threshold,
        "oracle_calls": 0,
        "options": [],
        "raw_response": None,
        "label": None,
    }
    x_sym = sx >= cfg.symmetry_threshold
    y_sym = sy >= cfg.symmetry_threshold
    if x_sym and y_sym:
        audit["label"] = FrontFaceLabel.NoFront.name
        return Annotation(FrontFaceLabel.NoFront, audit)

    options = ["A", "B", "C", "D"]
    if cfg.prune_symmetric_pair:
        if x_sym:
            options = [o for o in options if o not in ("A", "B")]
        if y_sym:
            options = [o for o in options if o not in ("C", "D")]
    audit["options"] = options
    request = OracleRequest(annotation_prompt(), {o: getattr(views, _OPTION_VIEWS[o]) for o in options})
    audit["oracle_calls"] = 1
    try:
        raw = oracle.ask(request)
    except AnnotationError as exc:
        audit["error"] = str(exc)
        raise type(exc)(str(exc), audit) from exc
    except Exception as exc:  # oracle implementations may raise anything on failure
        audit["error"] = str(exc)
        raise AnnotationError(f"oracle failed: {exc}", audit) from exc
    audit["raw_response"] = raw
    try:
        choice = parse_choice(raw, tuple(options) + ("E",))
    except ProtocolError as exc:
        audit["error"] = str(exc)
        raise ProtocolError(str(exc), audit) from exc
    label = FrontFaceLabel(choice)
    audit["label"] = label.name
    return Annotation(label, audit)
