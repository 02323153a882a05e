"""Parameter-free restoration: Richardson-Lucy deblurring and non-local means."""

from __future__ import annotations

import math

import numpy as np

from ..raster import correlate_separable, default_sigma, gaussian_kernel1d, to_u8

RL_KSIZE = 15
RL_ITERATIONS = 30
RL_EPS = 1e-6

NLM_PATCH = 7
NLM_SEARCH = 21
NLM_H = 10.0


def richardson_lucy_deblur(image: np.ndarray, iterations: int = RL_ITERATIONS,
                           ksize: int = RL_KSIZE, sigma: float | None = None,
                           eps: float = RL_EPS) -> np.ndarray:
    """Non-blind RL deconvolution with a ``ksize`` x ``ksize`` Gaussian PSF.

    Channels are processed independently in [0, 1]; the estimate starts at
    the observation. The Gaussian PSF is separable and symmetric, so the
    adjoint (flipped) PSF is the PSF itself.
    """
    psf = gaussian_kernel1d(ksize, default_sigma(ksize) if sigma is None else sigma)
    psf_adj = psf[::-1]
    observed = image.astype(np.float64) / 255.0
    estimate = observed.copy()
    for _ in range(iterations):
        reblurred = correlate_separable(estimate, psf)
        ratio = observed / np.maximum(reblurred, eps)
        estimate = estimate * correlate_separable(ratio, psf_adj)
    return to_u8(estimate * 255.0)


def estimate_noise_sigma(image: np.ndarray) -> float:
    """Immerkaer's fast noise estimate on the luminance, in 8-bit units."""
    gray = image.astype(np.float64).mean(axis=2)
    h, w = gray.shape
    if h < 3 or w < 3:
        return 0.0
    lap = (gray[:-2, :-2] - 2 * gray[:-2, 1:-1] + gray[:-2, 2:]
           - 2 * gray[1:-1, :-2] + 4 * gray[1:-1, 1:-1] - 2 * gray[1:-1, 2:]
           + gray[2:, :-2] - 2 * gray[2:, 1:-1] + gray[2:, 2:])
    sigma_gray = math.sqrt(math.pi / 2) * np.abs(lap).sum() / (6.0 * (w - 2) * (h - 2))
    # averaging three channels with independent noise divides sigma by sqrt(3)
    return float(sigma_gray * math.sqrt(3))


def _box_mean(a: np.ndarray, size: int) -> np.ndarray:
    """Mean over ``size`` x ``size`` windows; output shrinks by ``size - 1``."""
    c = np.cumsum(np.cumsum(a, axis=0), axis=1)
    c = np.pad(c, ((1, 0), (1, 0)))
    s = c[size:, size:] - c[:-size, size:] - c[size:, :-size] + c[:-size, :-size]
    return s / (size * size)


def nlm_denoise(image: np.ndarray, patch: int = NLM_PATCH, search: int = NLM_SEARCH,
                h: float = NLM_H) -> np.ndarray:
    """Colour non-local means.

    Patch distance is the mean squared difference over the patch and the
    three channels. Weights are ``exp(-max(d - 2 s^2, 0) / h_eff^2)`` where
    ``s`` is the estimated noise level and ``h_eff = max(h, 0.4 s)``, so
    ``h`` is the floor used on clean inputs.
    """
    height, width = image.shape[:2]
    r, big_r = patch // 2, search // 2
    sigma = estimate_noise_sigma(image)
    h_eff = max(h, 0.4 * sigma)
    bias = 2.0 * sigma**2

    f = image.astype(np.float64)
    mode = "reflect" if min(height, width) > big_r + r else "symmetric"
    padded = np.pad(f, ((big_r + r, big_r + r), (big_r + r, big_r + r), (0, 0)), mode=mode)
    center = padded[big_r:big_r + height + 2 * r, big_r:big_r + width + 2 * r]

    acc = np.zeros_like(f)
    wsum = np.zeros((height, width))
    for dy in range(-big_r, big_r + 1):
        for dx in range(-big_r, big_r + 1):
            shifted = padded[big_r + dy:big_r + dy + height + 2 * r,
                             big_r + dx:big_r + dx + width + 2 * r]
            d = _box_mean(((center - shifted) ** 2).mean(axis=2), patch)
            wgt = np.exp(-np.maximum(d - bias, 0.0) / (h_eff * h_eff))
            acc += wgt[..., None] * shifted[r:r + height, r:r + width]
            wsum += wgt
    return to_u8(acc / wsum[..., None])
