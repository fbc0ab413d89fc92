"""PSNR, SSIM and bit error rate."""

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

PSNR_CAP = 99.0


@dataclass
class MetricReport:
    psnr_db: float
    ssim: float
    ber_percent: float


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def psnr(a, b, peak=255.0):
    """PSNR in dB over all channels; identical inputs give ``PSNR_CAP``."""
    a, b = _pair(a, b)
    mse = np.mean((a - b) ** 2)
    if mse == 0:
        return PSNR_CAP
    return float(min(PSNR_CAP, 10.0 * np.log10(peak * peak / mse)))


def gaussian_window(size=11, sigma=1.5):
    r = np.arange(size) - (size - 1) / 2
    g = np.exp(-r**2 / (2 * sigma**2))
    return g / g.sum()


def _filter_valid(x, win):
    # separable 'valid' filtering over the two spatial axes of (H,W)
    half = len(win) // 2
    y = correlate1d(x, win, axis=0, mode="constant")
    y = correlate1d(y, win, axis=1, mode="constant")
    return y[half:-half, half:-half]


def ssim(a, b, data_range=255.0, win_size=11, sigma=1.5, k1=0.01, k2=0.03):
    """Mean SSIM of (H,W,3) or (H,W) images, channels averaged.

    Gaussian-weighted local statistics over the fully-covered ('valid')
    region, population covariance.
    """
    a, b = _pair(a, b)
    if min(a.shape[0], a.shape[1]) < win_size:
        raise ValueError(f"image smaller than the {win_size}x{win_size} SSIM window")
    if a.ndim == 2:
        a, b = a[..., None], b[..., None]
    win = gaussian_window(win_size, sigma)
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    scores = []
    for ch in range(a.shape[2]):
        x, y = a[..., ch], b[..., ch]
        mx, my = _filter_valid(x, win), _filter_valid(y, win)
        sxx = _filter_valid(x * x, win) - mx * mx
        syy = _filter_valid(y * y, win) - my * my
        sxy = _filter_valid(x * y, win) - mx * my
        num = (2 * mx * my + c1) * (2 * sxy + c2)
        den = (mx * mx + my * my + c1) * (sxx + syy + c2)
        scores.append(np.mean(num / den))
    return float(np.mean(scores))


def ber(a, b):
    """Percentage of differing bits."""
    a = np.asarray(a).astype(np.uint8).ravel()
    b = np.asarray(b).astype(np.uint8).ravel()
    if a.shape != b.shape:
        raise ValueError(f"message lengths differ: {a.size} vs {b.size}")
    return 100.0 * np.count_nonzero(a != b) / a.size
