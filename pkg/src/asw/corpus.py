"""Image loading and a small built-in photographic corpus.

The desk corpus is cut from the sample photographs that ship with
scikit-image and scikit-learn, so tests and benchmarks run offline.
"""

import logging
from pathlib import Path

import numpy as np
from PIL import Image

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"}


def load_rgb(path, size=None):
    """Read an image file as (H,W,3) uint8, optionally resized (bicubic) to size x size."""
    with Image.open(path) as im:
        im = im.convert("RGB")
        if size is not None and im.size != (size, size):
            im = im.resize((size, size), Image.BICUBIC)
        return np.asarray(im, dtype=np.uint8).copy()


def save_rgb(path, img8):
    Image.fromarray(np.asarray(img8, dtype=np.uint8)).save(path)


def list_images(directory):
    return sorted(p for p in Path(directory).iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def _sources():
    from skimage import data
    from sklearn.datasets import load_sample_images

    out = [("astronaut", data.astronaut()), ("chelsea", data.chelsea()),
           ("coffee", data.coffee()), ("rocket", data.rocket()),
           ("immunohistochemistry", data.immunohistochemistry())]
    left, right, _ = data.stereo_motorcycle()
    out += [("motorcycle_left", left), ("motorcycle_right", right)]
    china, flower = load_sample_images().images
    out += [("china", china), ("flower", flower)]
    return out


def _crop_square(img, frac, cx, cy):
    h, w = img.shape[:2]
    side = int(min(h, w) * frac)
    y0 = int(round((h - side) * cy))
    x0 = int(round((w - side) * cx))
    return img[y0:y0 + side, x0:x0 + side]


# (fraction of the short side, horizontal position, vertical position)
_CROPS = [(1.0, 0.5, 0.5), (0.6, 0.15, 0.3), (0.6, 0.85, 0.7), (0.45, 0.5, 0.2)]


def desk_corpus(n=16, size=256):
    """``n`` deterministic (size,size,3) uint8 photographs with names."""
    sources = _sources()
    out = []
    for frac, cx, cy in _CROPS:
        for name, img in sources:
            if len(out) == n:
                return out
            patch = Image.fromarray(_crop_square(img, frac, cx, cy))
            patch = patch.resize((size, size), Image.BICUBIC)
            out.append((f"{name}_{len(out):02d}", np.asarray(patch, dtype=np.uint8).copy()))
    if len(out) < n:
        raise ValueError(f"desk corpus holds at most {len(out)} images")
    return out


def write_desk_corpus(directory, n=16, size=256):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, img in desk_corpus(n, size):
        p = directory / f"{name}.png"
        save_rgb(p, img)
        paths.append(p)
    return paths


def random_crops(n, size, seed):
    """``n`` random square crops (random scale and position) of the sample photographs."""
    from .prng import philox
    rng = philox(seed)
    sources = [img for _, img in _sources()]
    out = []
    for _ in range(n):
        img = sources[int(rng.integers(len(sources)))]
        frac = rng.uniform(0.3, 1.0)
        patch = _crop_square(img, frac, rng.uniform(), rng.uniform())
        patch = Image.fromarray(patch).resize((size, size), Image.BICUBIC)
        out.append(np.asarray(patch, dtype=np.uint8).copy())
    return out
