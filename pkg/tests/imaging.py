"""Synthetic image fixtures built by supersampling exact shapes."""
import numpy as np


def _grid(size, ss):
    c = (np.arange(size * ss) + 0.5) / ss - size / 2.0
    return np.meshgrid(c, c)  # x to the right, y down


def _downsample(mask, size, ss):
    return mask.reshape(size, ss, size, ss).mean(axis=(1, 3))


def to_rgb(cover, fg=(255, 255, 255), bg=(0, 0, 0)):
    fg = np.asarray(fg, np.float64)
    bg = np.asarray(bg, np.float64)
    img = bg + cover[..., None] * (fg - bg)
    return np.rint(img).astype(np.uint8)


def rotated_square(angle_deg, size=64, side=30.0, ss=8, **kw):
    """Filled square centred in the frame, rotated by ``angle_deg`` in image coordinates (y down)."""
    x, y = _grid(size, ss)
    a = np.radians(angle_deg)
    u = x * np.cos(a) + y * np.sin(a)
    v = -x * np.sin(a) + y * np.cos(a)
    inside = (np.abs(u) <= side / 2) & (np.abs(v) <= side / 2)
    return to_rgb(_downsample(inside.astype(np.float64), size, ss), **kw)


def disk(size=64, radius=20.0, ss=8, **kw):
    x, y = _grid(size, ss)
    inside = x * x + y * y <= radius * radius
    return to_rgb(_downsample(inside.astype(np.float64), size, ss), **kw)


def checkerboard(size=63, squares=7):
    """Black/white board with an odd square count so the mirror keeps the pattern."""
    cell = size // squares
    idx = np.arange(size) // cell
    board = ((idx[:, None] + idx[None, :]) % 2).astype(np.float64)
    return to_rgb(board)
