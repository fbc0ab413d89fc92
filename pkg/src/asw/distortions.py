"""The benchmark distortion channel.

Every distortion maps an (H,W,3) uint8 image to another of the same size
and is a pure function of (image, spec, host).  Randomised kinds draw
from a Philox stream keyed by ``spec.noise_seed``.  Resize and rotation
transform forward and then back, so extraction always sees the original
geometry.
"""

import io
import math
from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy import ndimage

from . import _kernels
from .prng import philox

LUMA = np.array([0.299, 0.587, 0.114])

KINDS = ("jpeg", "gaussian_blur", "median_blur", "gaussian_noise", "poisson_noise",
         "salt_pepper", "brightness", "contrast", "saturation", "cropout",
         "resize", "rotation")


class DistortionError(ValueError):
    pass


@dataclass(frozen=True)
class DistortionSpec:
    kind: str
    level: float
    noise_seed: int = 0
    axis: str = "both"  # resize only: "both" or "width"

    def validate(self):
        k, v = self.kind, self.level
        if k not in KINDS:
            raise DistortionError(f"unknown distortion {k!r}; choose from {', '.join(KINDS)}")
        if not math.isfinite(v):
            raise DistortionError(f"{k}: level must be finite")
        if k == "jpeg" and not (1 <= v <= 100 and float(v).is_integer()):
            raise DistortionError(f"jpeg quality must be an integer in [1, 100], got {v}")
        if k in ("gaussian_blur", "median_blur") and not (
                float(v).is_integer() and v >= 3 and int(v) % 2 == 1):
            raise DistortionError(f"{k}: kernel size must be odd and >= 3, got {v}")
        if k in ("salt_pepper", "poisson_noise", "cropout") and not 0 <= v <= 1:
            raise DistortionError(f"{k}: level must lie in [0, 1], got {v}")
        if k in ("gaussian_noise", "brightness", "contrast", "saturation") and v < 0:
            raise DistortionError(f"{k}: level must be >= 0, got {v}")
        if k == "resize":
            if not 0 < v <= 2:
                raise DistortionError(f"resize ratio must lie in (0, 2], got {v}")
            if self.axis not in ("both", "width"):
                raise DistortionError(f"resize axis must be 'both' or 'width', got {self.axis!r}")
        return self

    @property
    def label(self):
        return f"{self.kind}_width" if self.kind == "resize" and self.axis == "width" else self.kind


def _to8(x):
    # round half away from zero; x is non-negative after the clip
    return np.floor(np.clip(x, 0.0, 255.0) + 0.5).astype(np.uint8)


def _check(img):
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise DistortionError(f"expected an (H,W,3) uint8 image, got {img.shape} {img.dtype}")
    return img


# ---------------------------------------------------------------------------
# individual kinds
# ---------------------------------------------------------------------------

def jpeg_bytes(img8, quality):
    """Baseline JFIF stream, 4:2:0 chroma, libjpeg quality scaling."""
    buf = io.BytesIO()
    Image.fromarray(img8).save(buf, format="JPEG", quality=int(quality),
                               subsampling=2, optimize=False, progressive=False)
    return buf.getvalue()


def jpeg(img8, quality):
    with Image.open(io.BytesIO(jpeg_bytes(img8, quality))) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()


def blur_sigma(k):
    return 0.3 * ((k - 1) / 2 - 1) + 0.8


def gaussian_blur(img8, k):
    sigma = blur_sigma(k)
    radius = (k - 1) // 2
    out = ndimage.gaussian_filter(img8.astype(np.float64), sigma=(sigma, sigma, 0),
                                  mode="reflect", truncate=radius / sigma)
    return _to8(out)


def median_blur(img8, k):
    return ndimage.median_filter(img8, size=(k, k, 1), mode="reflect")


def gaussian_noise(img8, sigma, rng):
    if sigma == 0:
        return img8.copy()
    return _to8(img8 + rng.normal(0.0, sigma * 255.0, img8.shape))


def poisson_noise(img8, a, rng):
    x = img8.astype(np.float64)
    return _to8((1 - a) * x + a * rng.poisson(x))


def salt_pepper(img8, p, rng):
    out = img8.copy()
    hit = rng.random(img8.shape[:2]) < p
    salt = rng.random(img8.shape[:2]) < 0.5
    out[hit & salt] = 255
    out[hit & ~salt] = 0
    return out


def _luma(x):
    return x @ LUMA


def brightness(img8, b):
    return _to8(img8 * b)


def contrast(img8, c):
    x = img8.astype(np.float64)
    m = _luma(x).mean()
    return _to8(m + c * (x - m))


def saturation(img8, s):
    x = img8.astype(np.float64)
    y = _luma(x)[..., None]
    return _to8(y + s * (x - y))


def cropout(img8, host8, frac, rng):
    """Replace one random rectangle covering ``frac`` of the area with host pixels."""
    h, w = img8.shape[:2]
    out = img8.copy()
    if frac <= 0:
        return out
    side = math.sqrt(frac)
    rh = min(h, max(1, round(h * side)))
    rw = min(w, max(1, round(frac * h * w / rh)))
    y0 = int(rng.integers(0, h - rh + 1))
    x0 = int(rng.integers(0, w - rw + 1))
    out[y0:y0 + rh, x0:x0 + rw] = host8[y0:y0 + rh, x0:x0 + rw]
    return out


def _resample(img, out_h, out_w):
    """Bilinear resize with pixel-centre alignment and clamped borders."""
    h, w = img.shape[:2]
    ys = np.clip((np.arange(out_h) + 0.5) * h / out_h - 0.5, 0, h - 1)
    xs = np.clip((np.arange(out_w) + 0.5) * w / out_w - 0.5, 0, w - 1)
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    return _kernels.bilinear_sample(np.ascontiguousarray(img, dtype=np.float64), yy, xx, 0.0)


def resize(img8, ratio, axis="both"):
    h, w = img8.shape[:2]
    nh = h if axis == "width" else max(1, round(h * ratio))
    nw = max(1, round(w * ratio))
    if (nh, nw) == (h, w):
        return img8.copy()
    small = _to8(_resample(img8, nh, nw))
    return _to8(_resample(small, h, w))


def _rotate(img, deg):
    h, w = img.shape[:2]
    cy, cx = (h - 1) / 2, (w - 1) / 2
    t = math.radians(deg)
    yy, xx = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64),
                         indexing="ij")
    # inverse map: where each output pixel comes from
    dy, dx = yy - cy, xx - cx
    sy = cy + math.cos(t) * dy - math.sin(t) * dx
    sx = cx + math.sin(t) * dy + math.cos(t) * dx
    return _kernels.bilinear_sample(np.ascontiguousarray(img, dtype=np.float64), sy, sx, 0.0)


def rotation(img8, deg):
    if deg % 360 == 0:
        return img8.copy()
    return _to8(_rotate(_to8(_rotate(img8, deg)), -deg))


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def apply(img8, spec, host8=None):
    """Run one distortion; ``host8`` is required for cropout only."""
    spec.validate()
    img8 = _check(img8)
    k, v = spec.kind, spec.level
    rng = philox(spec.noise_seed)
    if k == "jpeg":
        return jpeg(img8, int(v))
    if k == "gaussian_blur":
        return gaussian_blur(img8, int(v))
    if k == "median_blur":
        return median_blur(img8, int(v))
    if k == "gaussian_noise":
        return gaussian_noise(img8, v, rng)
    if k == "poisson_noise":
        return poisson_noise(img8, v, rng)
    if k == "salt_pepper":
        return salt_pepper(img8, v, rng)
    if k == "brightness":
        return brightness(img8, v)
    if k == "contrast":
        return contrast(img8, v)
    if k == "saturation":
        return saturation(img8, v)
    if k == "cropout":
        if host8 is None:
            raise DistortionError("cropout needs the host image")
        host8 = _check(host8)
        if host8.shape != img8.shape:
            raise DistortionError(f"host {host8.shape} and image {img8.shape} differ")
        return cropout(img8, host8, v, rng)
    if k == "resize":
        return resize(img8, v, spec.axis)
    return rotation(img8, v)


# ---------------------------------------------------------------------------
# orthogonal noise pair for the sensitivity probe
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OrthogonalNoisePair:
    n_plus: np.ndarray
    n_minus: np.ndarray
    mask: np.ndarray
    sigma: float


def make_orthogonal_noise(shape, sigma, seed):
    """Gaussian noise split by a Bernoulli(1/2) mask into disjoint supports."""
    if sigma < 0:
        raise DistortionError("sigma must be >= 0")
    rng = philox(seed)
    mask = rng.random(shape) < 0.5
    z = rng.normal(0.0, 1.0, (2, *shape)) * sigma
    return OrthogonalNoisePair(np.where(mask, z[0], 0.0), np.where(mask, 0.0, z[1]),
                               mask, float(sigma))
