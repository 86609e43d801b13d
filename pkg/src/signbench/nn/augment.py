"""On-the-fly training augmentation: rotation, shift, zoom, brightness."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AugmentConfig:
    p_rotate: float = 0.5
    p_translate: float = 0.5
    p_scale: float = 0.5
    p_brightness: float = 0.5
    max_degrees: float = 10.0
    max_shift: float = 0.1  # fraction of width / height
    scale_range: tuple = (0.9, 1.1)
    brightness_range: tuple = (0.8, 1.2)

    @classmethod
    def disabled(cls) -> "AugmentConfig":
        return cls(0.0, 0.0, 0.0, 0.0)


def warp_affine(image, matrix, offset):
    """Bilinear resample: ``out[p] = image[matrix @ p + offset]`` with edge replication.

    ``p`` is a (row, col) output coordinate.
    """
    h, w = image.shape[:2]
    rr, cc = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    src_r = np.clip(matrix[0, 0] * rr + matrix[0, 1] * cc + offset[0], 0, h - 1)
    src_c = np.clip(matrix[1, 0] * rr + matrix[1, 1] * cc + offset[1], 0, w - 1)
    r0 = np.minimum(np.floor(src_r).astype(np.intp), h - 2) if h > 1 else np.zeros_like(rr, np.intp)
    c0 = np.minimum(np.floor(src_c).astype(np.intp), w - 2) if w > 1 else np.zeros_like(cc, np.intp)
    fr = (src_r - r0)[..., None]
    fc = (src_c - c0)[..., None]
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    top = image[r0, c0] * (1 - fc) + image[r0, c1] * fc
    bot = image[r1, c0] * (1 - fc) + image[r1, c1] * fc
    return (top * (1 - fr) + bot * fr).astype(image.dtype, copy=False)


def augment(image, rng, cfg: AugmentConfig = AugmentConfig()):
    """Randomly perturb one ``(H, W, C)`` image; each transform fires independently."""
    image = np.asarray(image)
    h, w = image.shape[:2]
    # draw every random number up front so the stream advances identically
    fire = rng.random(4) < np.array([cfg.p_rotate, cfg.p_translate, cfg.p_scale, cfg.p_brightness])
    angle = np.deg2rad(rng.uniform(-cfg.max_degrees, cfg.max_degrees))
    shift = rng.uniform(-cfg.max_shift, cfg.max_shift, 2) * np.array([h, w])
    zoom = rng.uniform(*cfg.scale_range)
    gain = rng.uniform(*cfg.brightness_range)

    out = image
    if fire[0] or fire[1] or fire[2]:
        a = angle if fire[0] else 0.0
        z = zoom if fire[2] else 1.0
        t = shift if fire[1] else np.zeros(2)
        # inverse map: output -> source, about the image centre
        rot = np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]]) / z
        centre = np.array([(h - 1) / 2.0, (w - 1) / 2.0])
        offset = centre - rot @ (centre + t)
        out = warp_affine(out, rot, offset)
    if fire[3]:
        out = np.clip(out * gain, 0.0, 1.0).astype(image.dtype, copy=False)
    return out if out is not image else image.copy()
