"""Forward ops and input-gradient backprop for the decoder's layer set.

Tensors are plain float64 ``numpy.ndarray`` objects in (C, H, W) layout.
Only gradients with respect to the network input are produced; weights
are frozen and never differentiated.
"""

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import _kernels


class ShapeError(ValueError):
    """Raised when tensor extents are incompatible with an op."""


def _as3d(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ShapeError(f"expected a (C,H,W) tensor, got shape {x.shape}")
    return x


# ---------------------------------------------------------------------------
# forward ops
# ---------------------------------------------------------------------------

def avg_pool2d(x, stride):
    """Non-overlapping mean pool with window == stride."""
    x = _as3d(x)
    if stride < 1:
        raise ShapeError("stride must be >= 1")
    if stride == 1:
        return x.copy()
    _, h, w = x.shape
    if h % stride or w % stride:
        raise ShapeError(f"spatial size {h}x{w} not divisible by pool stride {stride}")
    return _kernels.avg_pool(np.ascontiguousarray(x), stride)


def conv_out_size(n, k, stride, pad):
    return (n + 2 * pad - k) // stride + 1


def conv2d(x, w, stride=1, pad=0):
    """Bias-free cross-correlation, zero padding.  ``w`` is (Cout,Cin,k,k)."""
    x = _as3d(x)
    w = np.asarray(w, dtype=np.float64)
    cout, cin, k, k2 = w.shape
    if k != k2:
        raise ShapeError(f"kernel must be square, got {k}x{k2}")
    if x.shape[0] != cin:
        raise ShapeError(f"input has {x.shape[0]} channels, kernel expects {cin}")
    _, h, wd = x.shape
    ho, wo = conv_out_size(h, k, stride, pad), conv_out_size(wd, k, stride, pad)
    if ho < 1 or wo < 1:
        raise ShapeError(f"conv output would be {ho}x{wo}")
    cols = _kernels.im2col(np.ascontiguousarray(x), k, stride, pad)
    return (w.reshape(cout, -1) @ cols).reshape(cout, ho, wo)


def instance_norm(x, eps=1e-5):
    """Per-channel standardisation with population variance, no affine."""
    x = _as3d(x)
    if x.shape[1] * x.shape[2] < 2:
        raise ShapeError("instance_norm needs at least 2 spatial positions")
    mu = x.mean(axis=(1, 2), keepdims=True)
    var = x.var(axis=(1, 2), keepdims=True)
    return (x - mu) / np.sqrt(var + eps)


def leaky_relu(x, slope=0.2):
    x = np.asarray(x, dtype=np.float64)
    return np.where(x > 0, x, slope * x)


def adaptive_avg_pool_to_vector(x):
    return _as3d(x).mean(axis=(1, 2))


def adaptive_bins(n, g):
    """Bin edges used by adaptive pooling: [floor(i*n/g), ceil((i+1)*n/g))."""
    return [(i * n // g, -(-(i + 1) * n // g)) for i in range(g)]


def adaptive_avg_pool(x, grid):
    """Adaptive mean pool to a grid x grid map, flattened channel-major.

    ``grid=1`` is :func:`adaptive_avg_pool_to_vector`.
    """
    x = _as3d(x)
    c, h, w = x.shape
    if grid == 1:
        return x.mean(axis=(1, 2))
    if h < grid or w < grid:
        raise ShapeError(f"{h}x{w} map is smaller than the {grid}x{grid} pool grid")
    out = np.empty((c, grid, grid))
    for i, (y0, y1) in enumerate(adaptive_bins(h, grid)):
        for j, (x0, x1) in enumerate(adaptive_bins(w, grid)):
            out[:, i, j] = x[:, y0:y1, x0:x1].mean(axis=(1, 2))
    return out.reshape(-1)


def fully_connected(v, w, b):
    v = np.asarray(v, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if w.ndim != 2 or v.shape != (w.shape[1],) or b.shape != (w.shape[0],):
        raise ShapeError(f"fc shapes disagree: v{v.shape} w{w.shape} b{b.shape}")
    return w @ v + b


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    # split by sign so exp() never sees a large positive argument
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


# ---------------------------------------------------------------------------
# tape + backward
# ---------------------------------------------------------------------------

@dataclass
class TapeRecord:
    op: str
    params: dict[str, Any]
    saved: dict[str, np.ndarray] = field(default_factory=dict)


@dataclass
class LayerTape:
    """Forward-pass records replayed in reverse by :func:`backward_input_grad`."""
    input_shape: tuple
    records: list[TapeRecord] = field(default_factory=list)
    output_shape: tuple = ()
    consumed: bool = False

    def push(self, op, params=None, **saved):
        self.records.append(TapeRecord(op, params or {}, saved))


def _back_pool(rec, g):
    s = rec.params["stride"]
    if s == 1:
        return g
    return np.repeat(np.repeat(g, s, axis=1), s, axis=2) / (s * s)


def _back_conv(rec, g):
    w = rec.params["w"]
    cout, cin, k, _ = w.shape
    c, h, wd = rec.params["in_shape"]
    dcols = w.reshape(cout, -1).T @ g.reshape(cout, -1)
    return _kernels.col2im(np.ascontiguousarray(dcols), c, h, wd, k,
                           rec.params["stride"], rec.params["pad"])


def _back_in(rec, g):
    y = rec.saved["y"]
    inv_std = rec.saved["inv_std"]
    gm = g.mean(axis=(1, 2), keepdims=True)
    gym = (g * y).mean(axis=(1, 2), keepdims=True)
    return inv_std * (g - gm - y * gym)


def _back_lrelu(rec, g):
    return np.where(rec.saved["x"] > 0, g, rec.params["slope"] * g)


def _back_gap(rec, g):
    c, h, w = rec.params["in_shape"]
    grid = rec.params["grid"]
    if grid == 1:
        return np.broadcast_to((g / (h * w))[:, None, None], (c, h, w)).copy()
    g = g.reshape(c, grid, grid)
    dx = np.zeros((c, h, w))
    for i, (y0, y1) in enumerate(adaptive_bins(h, grid)):
        for j, (x0, x1) in enumerate(adaptive_bins(w, grid)):
            dx[:, y0:y1, x0:x1] += (g[:, i, j] / ((y1 - y0) * (x1 - x0)))[:, None, None]
    return dx


def _back_fc(rec, g):
    return rec.params["w"].T @ g


def _back_sigmoid(rec, g):
    p = rec.saved["p"]
    return g * p * (1.0 - p)


_BACKWARD = {
    "avg_pool2d": _back_pool,
    "conv2d": _back_conv,
    "instance_norm": _back_in,
    "leaky_relu": _back_lrelu,
    "adaptive_avg_pool": _back_gap,
    "fully_connected": _back_fc,
    "sigmoid": _back_sigmoid,
}


class Recorder:
    """Runs forward ops while appending what the backward pass needs."""

    def __init__(self, x):
        x = _as3d(x)
        self.tape = LayerTape(input_shape=x.shape)
        self.x = x

    @classmethod
    def resume(cls, tape, x):
        """Continue recording onto an unreplayed tape whose output is ``x``."""
        rec = cls.__new__(cls)
        rec.tape, rec.x = tape, x
        return rec

    def avg_pool2d(self, stride):
        self.tape.push("avg_pool2d", {"stride": stride})
        self.x = avg_pool2d(self.x, stride)
        return self

    def conv2d(self, w, stride, pad):
        self.tape.push("conv2d", {"w": w, "stride": stride, "pad": pad,
                                  "in_shape": self.x.shape})
        self.x = conv2d(self.x, w, stride, pad)
        return self

    def instance_norm(self, eps):
        x = self.x
        if x.shape[1] * x.shape[2] < 2:
            raise ShapeError("instance_norm needs at least 2 spatial positions")
        mu = x.mean(axis=(1, 2), keepdims=True)
        inv_std = 1.0 / np.sqrt(x.var(axis=(1, 2), keepdims=True) + eps)
        y = (x - mu) * inv_std
        self.tape.push("instance_norm", {"eps": eps}, y=y, inv_std=inv_std)
        self.x = y
        return self

    def leaky_relu(self, slope):
        self.tape.push("leaky_relu", {"slope": slope}, x=self.x)
        self.x = leaky_relu(self.x, slope)
        return self

    def adaptive_avg_pool(self, grid=1):
        self.tape.push("adaptive_avg_pool", {"in_shape": self.x.shape, "grid": grid})
        self.x = adaptive_avg_pool(self.x, grid)
        return self

    def fully_connected(self, w, b):
        self.tape.push("fully_connected", {"w": w})
        self.x = fully_connected(self.x, w, b)
        return self

    def sigmoid(self):
        p = sigmoid(self.x)
        self.tape.push("sigmoid", {}, p=p)
        self.x = p
        return self

    def finish(self):
        self.tape.output_shape = np.shape(self.x)
        return self.x, self.tape


def backward_input_grad(tape, d_out, skip_last=0):
    """Replay ``tape`` in reverse, returning dL/d(input).

    ``skip_last`` drops that many trailing records, so a caller holding the
    cotangent at the logits can pass ``skip_last=1`` to bypass the sigmoid.
    """
    if tape.consumed:
        raise RuntimeError("LayerTape already replayed; tapes are single-use")
    records = tape.records[:len(tape.records) - skip_last]
    g = np.asarray(d_out, dtype=np.float64)
    if skip_last == 0 and g.shape != tuple(tape.output_shape):
        raise ShapeError(f"cotangent shape {g.shape} != output {tape.output_shape}")
    for rec in reversed(records):
        g = _BACKWARD[rec.op](rec, g)
    tape.consumed = True
    if g.shape != tuple(tape.input_shape):
        raise ShapeError(f"gradient shape {g.shape} != input {tape.input_shape}")
    return g
