"""Dense-grid SIFT-style local descriptors.

Keypoints sit on a regular grid (stride 8 px, 16 px square support). Each
descriptor is a 4x4 grid of cells with an 8-bin gradient orientation
histogram per cell, Gaussian weighted around the patch center, then
L2-normalized, clipped at 0.2 and renormalized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])

STRIDE = 8
SCALE = 8.0  # patch radius; support is 2 * SCALE pixels
N_CELLS = 4
N_BINS = 8
CLIP = 0.2
DESCRIPTOR_DIM = N_CELLS * N_CELLS * N_BINS


@dataclass(frozen=True)
class Keypoint:
    x: float
    y: float
    scale: float = SCALE

    @property
    def support(self) -> int:
        return int(round(2 * self.scale))

    def origin(self) -> tuple[int, int]:
        """Top-left ``(row, col)`` of the descriptor patch."""
        half = (self.support - 1) / 2.0
        return int(round(self.y - half)), int(round(self.x - half))


@dataclass
class DescriptorSet:
    descriptors: np.ndarray  # (n, 128)
    source_id: object = None

    def __len__(self):
        return self.descriptors.shape[0]


def to_grayscale(image) -> np.ndarray:
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected an H x W x 3 image, got shape {image.shape}")
    gray = image @ LUMA_WEIGHTS
    return np.clip(gray, 0.0, 1.0)


def detect_keypoints(image, stride: int = STRIDE, scale: float = SCALE) -> list[Keypoint]:
    """Dense grid of keypoints whose full support lies inside the image.

    Leftover margin is split evenly between both sides. Ordering is
    row-major.
    """
    h, w = np.shape(image)[:2]
    support = int(round(2 * scale))
    if h < support or w < support:
        return []
    ny = (h - support) // stride + 1
    nx = (w - support) // stride + 1
    oy = (h - support - (ny - 1) * stride) // 2
    ox = (w - support - (nx - 1) * stride) // 2
    half = (support - 1) / 2.0
    return [
        Keypoint(x=ox + j * stride + half, y=oy + i * stride + half, scale=scale)
        for i in range(ny)
        for j in range(nx)
    ]


def image_gradients(gray) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference gradient magnitude and orientation in [0, 2pi)."""
    g = np.pad(np.asarray(gray, dtype=np.float64), 1, mode="edge")
    gx = (g[1:-1, 2:] - g[1:-1, :-2]) * 0.5
    gy = (g[2:, 1:-1] - g[:-2, 1:-1]) * 0.5
    mag = np.hypot(gx, gy)
    ori = np.mod(np.arctan2(gy, gx), 2 * np.pi)
    return mag, ori


def _gaussian_window(support: int) -> np.ndarray:
    sigma = support / 2.0
    c = (support - 1) / 2.0
    r = np.arange(support) - c
    return np.exp(-(r[:, None] ** 2 + r[None, :] ** 2) / (2 * sigma**2))


def _normalize(raw: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(raw, axis=1, keepdims=True)
    nz = norms[:, 0] > 0
    out = raw.copy()
    out[nz] /= norms[nz]
    np.minimum(out, CLIP, out=out)
    norms = np.linalg.norm(out, axis=1, keepdims=True)
    out[nz] /= norms[nz]
    return out


def _describe(mag: np.ndarray, ori: np.ndarray, keypoints) -> np.ndarray:
    if not keypoints:
        return np.zeros((0, DESCRIPTOR_DIM))
    support = keypoints[0].support
    if any(kp.support != support for kp in keypoints):
        raise ValueError("all keypoints in one call must share a scale")
    if support % N_CELLS:
        raise ValueError(f"support {support} not divisible into {N_CELLS} cells")
    h, w = mag.shape
    origins = np.array([kp.origin() for kp in keypoints])
    if (origins.min() < 0 or origins[:, 0].max() + support > h
            or origins[:, 1].max() + support > w):
        raise ValueError("keypoint patch extends outside the image")

    offs = np.arange(support)
    rows = origins[:, 0, None, None] + offs[None, :, None]
    cols = origins[:, 1, None, None] + offs[None, None, :]
    pm = mag[rows, cols] * _gaussian_window(support)
    po = ori[rows, cols]

    # linear interpolation between the two nearest orientation bins
    # (bin b is centred on b * 45 degrees)
    pos = po * (N_BINS / (2 * np.pi))
    lo = np.floor(pos).astype(np.intp) % N_BINS
    frac = pos - np.floor(pos)
    hi = (lo + 1) % N_BINS
    onehot = np.zeros(pm.shape + (N_BINS,))
    np.put_along_axis(onehot, lo[..., None], (pm * (1 - frac))[..., None], axis=-1)
    # hi != lo always, so this does not clobber the low-bin contribution
    np.put_along_axis(onehot, hi[..., None], (pm * frac)[..., None], axis=-1)

    cell = support // N_CELLS
    n = len(keypoints)
    hist = onehot.reshape(n, N_CELLS, cell, N_CELLS, cell, N_BINS).sum(axis=(2, 4))
    return _normalize(hist.reshape(n, DESCRIPTOR_DIM))


def compute_descriptor(gray, kp: Keypoint) -> np.ndarray:
    mag, ori = image_gradients(gray)
    return _describe(mag, ori, [kp])[0]


def extract_image_descriptors(image, source_id=None) -> DescriptorSet:
    """Grayscale, dense keypoints, one 128-d descriptor per keypoint."""
    gray = to_grayscale(image)
    mag, ori = image_gradients(gray)
    return DescriptorSet(_describe(mag, ori, detect_keypoints(gray)), source_id)
