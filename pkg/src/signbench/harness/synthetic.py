"""Seeded generator of small synthetic traffic-sign style datasets.

Each class is a coloured geometric sign (ring, triangle, square, octagon,
diamond, ...) with its own inner pictogram, drawn at a random position,
size and tilt over a noisy gradient background.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from ..numeric import SeededRng
from .dataset import LabeledDataset

RED = (0.85, 0.1, 0.1)
BLUE = (0.1, 0.3, 0.85)
YELLOW = (0.95, 0.8, 0.1)
WHITE = (0.97, 0.97, 0.97)
BLACK = (0.05, 0.05, 0.05)

SIGN_CLASSES = ("prohibitory", "warning", "information", "stop", "priority", "mandatory")


def _grid(size):
    r, c = np.mgrid[0:size, 0:size].astype(np.float64)
    return r + 0.5, c + 0.5


def _polygon_mask(rr, cc, verts):
    """Convex polygon given counter-clockwise in (x=col, y=row) order."""
    inside = np.ones(rr.shape, dtype=bool)
    n = len(verts)
    for i in range(n):
        (x0, y0), (x1, y1) = verts[i], verts[(i + 1) % n]
        inside &= (x1 - x0) * (rr - y0) - (y1 - y0) * (cc - x0) >= 0
    return inside


def _regular(cx, cy, radius, sides, phase):
    ang = phase + 2 * np.pi * np.arange(sides) / sides
    return [(cx + radius * np.cos(a), cy + radius * np.sin(a)) for a in ang]


def _paint(img, mask, color):
    img[mask] = color


def draw_sign(cls: int, size: int, rng: SeededRng) -> np.ndarray:
    rr, cc = _grid(size)
    # background: smooth two-colour gradient plus clutter blobs
    c0, c1 = rng.uniform(0.15, 0.75, 3), rng.uniform(0.15, 0.75, 3)
    ang = rng.uniform(0, 2 * np.pi)
    t = ((np.cos(ang) * cc + np.sin(ang) * rr) / size + 1) / 2
    img = c0 * (1 - t[..., None]) + c1 * t[..., None]
    for _ in range(int(rng.integers(0, 3))):
        bx, by, br = rng.uniform(0, size, 2).tolist() + [rng.uniform(4, 14)]
        _paint(img, (cc - bx) ** 2 + (rr - by) ** 2 < br**2, rng.uniform(0.1, 0.9, 3))

    radius = rng.uniform(0.26, 0.38) * size
    cx = size / 2 + rng.uniform(-0.1, 0.1) * size
    cy = size / 2 + rng.uniform(-0.1, 0.1) * size
    tilt = np.deg2rad(rng.uniform(-12, 12))
    d2 = (cc - cx) ** 2 + (rr - cy) ** 2

    # local coordinates rotated by the tilt, for pictograms
    u = np.cos(tilt) * (cc - cx) + np.sin(tilt) * (rr - cy)
    v = -np.sin(tilt) * (cc - cx) + np.cos(tilt) * (rr - cy)

    if cls == 0:  # red ring, white disc, black horizontal bar
        _paint(img, d2 < radius**2, RED)
        _paint(img, d2 < (0.75 * radius) ** 2, WHITE)
        _paint(img, (np.abs(v) < 0.15 * radius) & (np.abs(u) < 0.55 * radius), BLACK)
    elif cls == 1:  # white triangle, red border, black exclamation bar
        outer = _regular(cx, cy, radius, 3, -np.pi / 2 + tilt)
        inner = _regular(cx, cy, 0.62 * radius, 3, -np.pi / 2 + tilt)
        _paint(img, _polygon_mask(rr, cc, outer), RED)
        _paint(img, _polygon_mask(rr, cc, inner), WHITE)
        _paint(img, (np.abs(u) < 0.07 * radius) & (v > -0.35 * radius) & (v < 0.15 * radius), BLACK)
    elif cls == 2:  # blue square, white inner square
        outer = _regular(cx, cy, radius * 1.1, 4, np.pi / 4 + tilt)
        inner = _regular(cx, cy, radius * 0.55, 4, np.pi / 4 + tilt)
        _paint(img, _polygon_mask(rr, cc, outer), BLUE)
        _paint(img, _polygon_mask(rr, cc, inner), WHITE)
    elif cls == 3:  # red octagon, white horizontal band
        _paint(img, _polygon_mask(rr, cc, _regular(cx, cy, radius, 8, np.pi / 8 + tilt)), RED)
        _paint(img, (np.abs(v) < 0.18 * radius) & (np.abs(u) < 0.7 * radius), WHITE)
    elif cls == 4:  # white-bordered yellow diamond
        _paint(img, _polygon_mask(rr, cc, _regular(cx, cy, radius, 4, tilt)), WHITE)
        _paint(img, _polygon_mask(rr, cc, _regular(cx, cy, 0.7 * radius, 4, tilt)), YELLOW)
    elif cls == 5:  # blue disc, white vertical arrow shaft
        _paint(img, d2 < radius**2, BLUE)
        _paint(img, (np.abs(u) < 0.12 * radius) & (np.abs(v) < 0.6 * radius), WHITE)
    else:
        raise ValueError(f"no sign design for class {cls}")

    img = img * rng.uniform(0.75, 1.15) + rng.normal(0, 0.04, img.shape)
    return np.clip(img, 0.0, 1.0).astype(np.float32)


def make_sign_dataset(n_per_class: int = 100, n_classes: int = 5, seed: int = 0,
                      size: int = 128) -> LabeledDataset:
    if not 1 <= n_classes <= len(SIGN_CLASSES):
        raise ValueError(f"n_classes must be in [1, {len(SIGN_CLASSES)}]")
    images, labels = [], []
    for c in range(n_classes):
        rng = SeededRng(seed, 1000 + c)
        for _ in range(n_per_class):
            images.append(draw_sign(c, size, rng))
            labels.append(c)
    return LabeledDataset(np.stack(images), np.array(labels), list(SIGN_CLASSES[:n_classes]))


def write_dataset(ds: LabeledDataset, root, fmt: str = "ppm") -> Path:
    """Write ``root/<class>/<index>.<fmt>`` (8-bit RGB)."""
    root = Path(root)
    for c, name in enumerate(ds.class_names):
        (root / name).mkdir(parents=True, exist_ok=True)
    counters = {}
    for img, label in zip(ds.images, ds.labels):
        i = counters.get(label, 0)
        counters[label] = i + 1
        arr = np.round(np.clip(img, 0, 1) * 255).astype(np.uint8)
        Image.fromarray(arr, "RGB").save(root / ds.class_names[label] / f"{i:05d}.{fmt}")
    return root
