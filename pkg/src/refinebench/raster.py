"""Pixel-level primitives.

Images are ``numpy.ndarray`` of shape ``(height, width, 3)`` and dtype
``uint8``. Every float -> uint8 conversion goes through :func:`to_u8`
(round half away from zero, then clip) so that results agree bit-for-bit
across modules.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage, UnidentifiedImageError

from .errors import (
    BadKernel,
    DecodeError,
    ImageIoError,
    ImageNotFound,
    OutOfBounds,
    ZeroDim,
)

_READ_FORMATS = {"PNG", "JPEG"}


def to_u8(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    rounded = np.sign(arr) * np.floor(np.abs(arr) + 0.5)
    return np.clip(rounded, 0, 255).astype(np.uint8)


def check_image(image: np.ndarray) -> np.ndarray:
    if not isinstance(image, np.ndarray) or image.dtype != np.uint8:
        raise TypeError("image must be a uint8 numpy array")
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"image must have shape (h, w, 3), got {image.shape}")
    if image.shape[0] < 1 or image.shape[1] < 1:
        raise ZeroDim("image has a zero dimension")
    return image


def dims(image: np.ndarray) -> tuple[int, int]:
    """Return ``(width, height)``."""
    return image.shape[1], image.shape[0]


def new_image(width: int, height: int, color=(0, 0, 0)) -> np.ndarray:
    if width < 1 or height < 1:
        raise ZeroDim(f"bad dimensions {width}x{height}")
    out = np.empty((height, width, 3), dtype=np.uint8)
    out[...] = np.asarray(color, dtype=np.uint8)
    return out


# ---------------------------------------------------------------------------
# I/O


def load_image(path) -> np.ndarray:
    """Decode a PNG (or JPEG) into RGB; alpha is composited over white."""
    path = Path(path)
    if not path.is_file():
        raise ImageNotFound(str(path))
    try:
        with PILImage.open(path) as im:
            if im.format not in _READ_FORMATS:
                raise DecodeError(f"{path}: unsupported format {im.format}")
            im.load()
            has_alpha = im.mode in ("RGBA", "LA", "PA") or (
                im.mode == "P" and "transparency" in im.info
            )
            if has_alpha:
                rgba = np.asarray(im.convert("RGBA"), dtype=np.float64)
                a = rgba[..., 3:4] / 255.0
                return to_u8(a * rgba[..., :3] + (1.0 - a) * 255.0)
            return np.array(im.convert("RGB"), dtype=np.uint8)
    except DecodeError:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise DecodeError(f"{path}: {exc}") from exc


def save_image(image: np.ndarray, path) -> None:
    check_image(image)
    path = Path(path)
    try:
        PILImage.fromarray(image, mode="RGB").save(path, format="PNG")
    except OSError as exc:
        raise ImageIoError(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# geometry


def rotate_cw(image: np.ndarray, degrees: int) -> np.ndarray:
    if degrees % 90:
        raise ValueError(f"rotation must be a multiple of 90, got {degrees}")
    return np.ascontiguousarray(np.rot90(image, k=-(degrees // 90) % 4))


def flip(image: np.ndarray, direction: str) -> np.ndarray:
    if direction == "horizontal":
        out = image[:, ::-1]
    elif direction == "vertical":
        out = image[::-1, :]
    elif direction == "both":
        out = image[::-1, ::-1]
    else:
        raise ValueError(f"unknown flip direction {direction!r}")
    return np.ascontiguousarray(out)


def resize(image: np.ndarray, target: tuple[int, int]) -> np.ndarray:
    """Bilinear resize to ``target = (width, height)`` with half-pixel centers."""
    w, h = int(target[0]), int(target[1])
    if w < 1 or h < 1:
        raise ZeroDim(f"bad target size {w}x{h}")
    src_h, src_w = image.shape[:2]
    if (w, h) == (src_w, src_h):
        return image.copy()

    def axis(n_out, n_in):
        pos = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        pos = np.clip(pos, 0, n_in - 1)
        lo = np.floor(pos).astype(np.intp)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, pos - lo

    x0, x1, fx = axis(w, src_w)
    y0, y1, fy = axis(h, src_h)
    f = image.astype(np.float64)
    top = f[y0][:, x0] * (1 - fx)[None, :, None] + f[y0][:, x1] * fx[None, :, None]
    bot = f[y1][:, x0] * (1 - fx)[None, :, None] + f[y1][:, x1] * fx[None, :, None]
    return to_u8(top * (1 - fy)[:, None, None] + bot * fy[:, None, None])


def paste(base: np.ndarray, patch: np.ndarray, origin: tuple[int, int], alpha: float = 1.0) -> np.ndarray:
    x, y = origin
    ph, pw = patch.shape[:2]
    bh, bw = base.shape[:2]
    if x < 0 or y < 0 or x + pw > bw or y + ph > bh:
        raise OutOfBounds(f"{pw}x{ph} patch at ({x}, {y}) does not fit in {bw}x{bh}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    out = base.copy()
    if alpha == 1.0:
        out[y:y + ph, x:x + pw] = patch
    elif alpha > 0.0:
        region = base[y:y + ph, x:x + pw].astype(np.float64)
        out[y:y + ph, x:x + pw] = to_u8(alpha * patch.astype(np.float64) + (1.0 - alpha) * region)
    return out


# ---------------------------------------------------------------------------
# convolution and noise


def default_sigma(ksize: int) -> float:
    """Gaussian sigma implied by a kernel size (OpenCV's ``getGaussianKernel`` rule)."""
    return 0.3 * ((ksize - 1) * 0.5 - 1) + 0.8


def gaussian_kernel1d(ksize: int, sigma: float | None = None) -> np.ndarray:
    if ksize < 3 or ksize % 2 == 0:
        raise BadKernel(f"kernel size must be odd and >= 3, got {ksize}")
    if sigma is None:
        sigma = default_sigma(ksize)
    if sigma <= 0:
        raise BadKernel(f"sigma must be positive, got {sigma}")
    x = np.arange(ksize) - (ksize - 1) / 2
    k = np.exp(-(x**2) / (2 * sigma**2))
    return k / k.sum()


def correlate_separable(plane: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Correlate a float array (h, w[, c]) with ``kernel`` along both axes.

    Borders are reflect-padded without repeating the edge sample.
    """
    r = len(kernel) // 2
    out = plane
    for axis in (0, 1):
        pad = [(0, 0)] * plane.ndim
        pad[axis] = (r, r)
        padded = np.pad(out, pad, mode="reflect") if out.shape[axis] > 1 else np.pad(out, pad, mode="edge")
        n = out.shape[axis]
        acc = np.zeros_like(out, dtype=np.float64)
        for i, weight in enumerate(kernel):
            acc += weight * np.take(padded, np.arange(i, i + n), axis=axis)
        out = acc
    return out


def gaussian_convolve(image: np.ndarray, ksize: int, sigma: float | None = None) -> np.ndarray:
    kernel = gaussian_kernel1d(ksize, sigma)
    return to_u8(correlate_separable(image.astype(np.float64), kernel))


def add_gaussian_noise(image: np.ndarray, sigma_n: float, rng: np.random.Generator) -> np.ndarray:
    """Additive noise with standard deviation ``sigma_n`` of full scale."""
    if sigma_n < 0:
        raise ValueError("sigma_n must be non-negative")
    if sigma_n == 0:
        return image.copy()
    noise = rng.normal(0.0, sigma_n, size=image.shape) * 255.0
    return to_u8(image.astype(np.float64) + noise)


def psnr(reference: np.ndarray, test: np.ndarray) -> float:
    mse = np.mean((reference.astype(np.float64) - test.astype(np.float64)) ** 2)
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(255.0**2 / mse)


# ---------------------------------------------------------------------------
# boxes


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box; ``(x2, y2)`` is exclusive."""

    x1: int
    y1: int
    x2: int
    y2: int

    @property
    def width(self) -> int:
        return self.x2 - self.x1

    @property
    def height(self) -> int:
        return self.y2 - self.y1

    @property
    def area(self) -> int:
        return max(0, self.width) * max(0, self.height)

    def is_valid(self) -> bool:
        return 0 <= self.x1 < self.x2 and 0 <= self.y1 < self.y2

    def fits(self, width: int, height: int) -> bool:
        return self.is_valid() and self.x2 <= width and self.y2 <= height

    def to_dict(self) -> dict:
        return {"top_left": [self.x1, self.y1], "bottom_right": [self.x2, self.y2]}

    @classmethod
    def from_dict(cls, d) -> "BBox":
        (x1, y1), (x2, y2) = d["top_left"], d["bottom_right"]
        return cls(int(x1), int(y1), int(x2), int(y2))


def iou_matrix(a, b) -> np.ndarray:
    """Pairwise IoU of ``(N, 4)`` and ``(M, 4)`` integer arrays of ``x1, y1, x2, y2``."""
    a = np.asarray(a, dtype=np.int64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.int64).reshape(-1, 4)
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.clip(iw, 0, None) * np.clip(ih, 0, None)
    area_a = np.clip(a[:, 2] - a[:, 0], 0, None) * np.clip(a[:, 3] - a[:, 1], 0, None)
    area_b = np.clip(b[:, 2] - b[:, 0], 0, None) * np.clip(b[:, 3] - b[:, 1], 0, None)
    union = area_a[:, None] + area_b[None, :] - inter
    out = np.zeros(inter.shape)
    np.divide(inter, union, out=out, where=union > 0)
    return out


def bbox_iou(a: BBox, b: BBox) -> float:
    return float(iou_matrix([a.x1, a.y1, a.x2, a.y2], [b.x1, b.y1, b.x2, b.y2])[0, 0])


# ---------------------------------------------------------------------------
# determinism


def derive_seed(*parts) -> int:
    """Stable 64-bit seed from arbitrary printable parts."""
    key = "\x1f".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "little")


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 stream; identical for a given seed on every platform."""
    return np.random.Generator(np.random.PCG64(seed))
