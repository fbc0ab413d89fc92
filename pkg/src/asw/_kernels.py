"""Hot inner loops, compiled with numba when available.

Every kernel has a pure-numpy twin with the same signature.  The active
implementation is chosen once at import time:

    ASW_BACKEND=numpy   force the numpy path
    ASW_BACKEND=numba   require numba (ImportError if missing)
    (unset)             numba if importable, else numpy

Both paths are exercised by the test suite and compared in
``benchmarks/bench_kernels.py``.
"""

import os

import numpy as np

_requested = os.environ.get("ASW_BACKEND", "").strip().lower()

try:
    from numba import njit
    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dep in practice
    HAS_NUMBA = False
    if _requested == "numba":
        raise

BACKEND = "numba" if HAS_NUMBA and _requested != "numpy" else "numpy"


# ---------------------------------------------------------------------------
# numpy reference path
# ---------------------------------------------------------------------------

def im2col_np(x, k, stride, pad):
    """(C,H,W) -> (C*k*k, Ho*Wo) patch matrix, zero padded."""
    c, h, w = x.shape
    ho = (h + 2 * pad - k) // stride + 1
    wo = (w + 2 * pad - k) // stride + 1
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad))) if pad else x
    cols = np.empty((c, k, k, ho, wo), dtype=x.dtype)
    for i in range(k):
        for j in range(k):
            cols[:, i, j] = xp[:, i:i + stride * ho:stride, j:j + stride * wo:stride]
    return cols.reshape(c * k * k, ho * wo)


def col2im_np(cols, c, h, w, k, stride, pad):
    """Adjoint of im2col: scatter-add patch columns back onto the image."""
    ho = (h + 2 * pad - k) // stride + 1
    wo = (w + 2 * pad - k) // stride + 1
    cols = cols.reshape(c, k, k, ho, wo)
    xp = np.zeros((c, h + 2 * pad, w + 2 * pad), dtype=cols.dtype)
    for i in range(k):
        for j in range(k):
            xp[:, i:i + stride * ho:stride, j:j + stride * wo:stride] += cols[:, i, j]
    return xp[:, pad:pad + h, pad:pad + w]


def avg_pool_np(x, s):
    c, h, w = x.shape
    return x.reshape(c, h // s, s, w // s, s).mean(axis=(2, 4))


def bilinear_sample_np(img, ys, xs, fill):
    """Sample an (H,W,C) float image at fractional coords; outside -> fill."""
    h, w, _ = img.shape
    inside = (ys >= 0) & (ys <= h - 1) & (xs >= 0) & (xs <= w - 1)
    y0 = np.clip(np.floor(ys).astype(np.int64), 0, h - 1)
    x0 = np.clip(np.floor(xs).astype(np.int64), 0, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[..., None]
    fx = (xs - x0)[..., None]
    top = img[y0, x0] * (1 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1 - fx) + img[y1, x1] * fx
    out = top * (1 - fy) + bot * fy
    out[~inside] = fill
    return out


# ---------------------------------------------------------------------------
# numba path
# ---------------------------------------------------------------------------

if HAS_NUMBA:

    @njit(cache=True)
    def im2col_nb(x, k, stride, pad):
        c, h, w = x.shape
        ho = (h + 2 * pad - k) // stride + 1
        wo = (w + 2 * pad - k) // stride + 1
        cols = np.zeros((c * k * k, ho * wo), dtype=x.dtype)
        for ch in range(c):
            for i in range(k):
                for j in range(k):
                    row = (ch * k + i) * k + j
                    for oy in range(ho):
                        iy = oy * stride + i - pad
                        if iy < 0 or iy >= h:
                            continue
                        base = oy * wo
                        for ox in range(wo):
                            ix = ox * stride + j - pad
                            if 0 <= ix < w:
                                cols[row, base + ox] = x[ch, iy, ix]
        return cols

    @njit(cache=True)
    def col2im_nb(cols, c, h, w, k, stride, pad):
        ho = (h + 2 * pad - k) // stride + 1
        wo = (w + 2 * pad - k) // stride + 1
        out = np.zeros((c, h, w), dtype=cols.dtype)
        for ch in range(c):
            for i in range(k):
                for j in range(k):
                    row = (ch * k + i) * k + j
                    for oy in range(ho):
                        iy = oy * stride + i - pad
                        if iy < 0 or iy >= h:
                            continue
                        base = oy * wo
                        for ox in range(wo):
                            ix = ox * stride + j - pad
                            if 0 <= ix < w:
                                out[ch, iy, ix] += cols[row, base + ox]
        return out

    @njit(cache=True)
    def avg_pool_nb(x, s):
        c, h, w = x.shape
        ho = h // s
        wo = w // s
        out = np.zeros((c, ho, wo), dtype=x.dtype)
        inv = 1.0 / (s * s)
        for ch in range(c):
            for oy in range(ho):
                for ox in range(wo):
                    acc = 0.0
                    for dy in range(s):
                        for dx in range(s):
                            acc += x[ch, oy * s + dy, ox * s + dx]
                    out[ch, oy, ox] = acc * inv
        return out

    @njit(cache=True)
    def bilinear_sample_nb(img, ys, xs, fill):
        h, w, nc = img.shape
        oh, ow = ys.shape
        out = np.empty((oh, ow, nc), dtype=img.dtype)
        for r in range(oh):
            for q in range(ow):
                y = ys[r, q]
                x = xs[r, q]
                if y < 0 or y > h - 1 or x < 0 or x > w - 1:
                    for ch in range(nc):
                        out[r, q, ch] = fill
                    continue
                y0 = min(int(np.floor(y)), h - 1)
                x0 = min(int(np.floor(x)), w - 1)
                y1 = min(y0 + 1, h - 1)
                x1 = min(x0 + 1, w - 1)
                fy = y - y0
                fx = x - x0
                for ch in range(nc):
                    top = img[y0, x0, ch] * (1 - fx) + img[y0, x1, ch] * fx
                    bot = img[y1, x0, ch] * (1 - fx) + img[y1, x1, ch] * fx
                    out[r, q, ch] = top * (1 - fy) + bot * fy
        return out


if BACKEND == "numba":
    im2col = im2col_nb
    col2im = col2im_nb
    avg_pool = avg_pool_nb
    bilinear_sample = bilinear_sample_nb
else:
    im2col = im2col_np
    col2im = col2im_np
    avg_pool = avg_pool_np
    bilinear_sample = bilinear_sample_np
