"""The frozen, seeded shallow decoder.

Pipeline::

    AvgPool(s) -> [Conv(k, stride) -> InstanceNorm -> LeakyReLU] x depth
               -> adaptive AvgPool -> FC(t) -> sigmoid

Conv groups use stride 2.  Groups added for depth > 3 sit before the last
conv group; any conv whose stride-2 output would be smaller than the
pooling grid runs at stride 1 instead, so deep stacks never collapse to a
map that instance norm would zero out.  The final pool is adaptive onto a
``pool_grid`` x ``pool_grid`` grid, flattened into the FC input.
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .prng import box_muller


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DecoderConfig:
    seed: int = 1
    bits: int = 36
    pool_stride: int = 4
    depth: int = 3
    channels: int = 64
    kernel_size: int = 3
    leaky_slope: float = 0.2
    in_eps: float = 1e-5
    pool_grid: int = 2

    def validate(self):
        if not isinstance(self.seed, (int, np.integer)) or self.seed < 1:
            raise ConfigError(f"seed must be a positive integer, got {self.seed!r}")
        if self.bits < 1:
            raise ConfigError("bits must be positive")
        if self.pool_stride not in (1, 2, 4, 8):
            raise ConfigError(f"pool_stride must be one of 1,2,4,8, got {self.pool_stride}")
        if self.depth < 3:
            raise ConfigError("depth must be >= 3")
        if self.channels < 1:
            raise ConfigError("channels must be positive")
        if self.kernel_size < 1:
            raise ConfigError("kernel_size must be positive")
        if not 0 < self.leaky_slope < 1:
            raise ConfigError("leaky_slope must lie in (0, 1)")
        if self.in_eps <= 0:
            raise ConfigError("in_eps must be > 0")
        if self.pool_grid < 1:
            raise ConfigError("pool_grid must be positive")
        return self

    @property
    def pad(self):
        return (self.kernel_size - 1) // 2

    @property
    def feature_length(self):
        return self.channels * self.pool_grid ** 2

    def _layout(self, height, width):
        if height % self.pool_stride or width % self.pool_stride:
            raise T.ShapeError(
                f"image {height}x{width} not divisible by pool stride {self.pool_stride}")
        h, w = height // self.pool_stride, width // self.pool_stride
        sizes, strides = [(h, w)], []
        k, pad, floor = self.kernel_size, self.pad, max(self.pool_grid, 2)
        for _ in range(self.depth):
            s = 2
            h2, w2 = T.conv_out_size(h, k, 2, pad), T.conv_out_size(w, k, 2, pad)
            if min(h2, w2) < floor:
                s = 1
                h2, w2 = T.conv_out_size(h, k, 1, pad), T.conv_out_size(w, k, 1, pad)
            h, w = h2, w2
            sizes.append((h, w))
            strides.append(s)
        return sizes, strides

    def conv_strides(self, height, width):
        return self._layout(height, width)[1]

    def feature_sizes(self, height, width):
        """Spatial size after the front pool and after each conv group."""
        return self._layout(height, width)[0]

    def check_image(self, height, width):
        for h, w in self.feature_sizes(height, width):
            if min(h, w) < max(self.pool_grid, 2):
                raise T.ShapeError(
                    f"image {height}x{width} collapses to {h}x{w} inside the decoder "
                    f"(depth={self.depth}, pool_stride={self.pool_stride})")


@dataclass(frozen=True)
class DecoderWeights:
    conv_kernels: list
    fc_weight: np.ndarray
    fc_bias: np.ndarray
    weights_digest: str = field(default="")

    def parameters(self):
        """All parameter tensors in canonical order."""
        return [*self.conv_kernels, self.fc_weight, self.fc_bias]


def parameter_shapes(cfg):
    c, k = cfg.channels, cfg.kernel_size
    shapes = [(c, 3, k, k)] + [(c, c, k, k)] * (cfg.depth - 1)
    return shapes + [(cfg.bits, cfg.feature_length), (cfg.bits,)]


def digest(params):
    h = hashlib.sha256()
    for p in params:
        h.update(np.ascontiguousarray(p, dtype="<f8").tobytes())
    return h.hexdigest()


def build_decoder(cfg):
    """Draw every parameter i.i.d. N(0,1) from the stream keyed by cfg.seed.

    Draw order: conv kernels front to back, then FC weight, then FC bias,
    each tensor in row-major order.
    """
    cfg.validate()
    shapes = parameter_shapes(cfg)
    sizes = [int(np.prod(s)) for s in shapes]
    z = box_muller(cfg.seed, sum(sizes))
    params, at = [], 0
    for shape, n in zip(shapes, sizes):
        p = z[at:at + n].reshape(shape)
        p.setflags(write=False)
        params.append(p)
        at += n
    return DecoderWeights(conv_kernels=params[:-2], fc_weight=params[-2],
                          fc_bias=params[-1], weights_digest=digest(params))


def forward_logits(cfg, weights, image, record=True):
    """Return ``(logits, tape)``; the tape ends at the FC layer."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[0] != 3:
        raise T.ShapeError(f"expected a (3,H,W) image, got {image.shape}")
    cfg.check_image(image.shape[1], image.shape[2])
    rec = T.Recorder(image).avg_pool2d(cfg.pool_stride)
    for kern, s in zip(weights.conv_kernels, cfg.conv_strides(*image.shape[1:])):
        rec.conv2d(kern, s, cfg.pad).instance_norm(cfg.in_eps).leaky_relu(cfg.leaky_slope)
    rec.adaptive_avg_pool(cfg.pool_grid).fully_connected(weights.fc_weight, weights.fc_bias)
    z, tape = rec.finish()
    return z, (tape if record else None)


def forward(cfg, weights, image, record=True):
    """Return ``(probs, tape)`` for a (3,H,W) image in [0,1]."""
    z, tape = forward_logits(cfg, weights, image, record)
    if tape is None:
        return T.sigmoid(z), None
    rec = T.Recorder.resume(tape, z).sigmoid()
    return rec.finish()


def threshold(probs):
    """Heaviside at 0.5, ties resolve to 1."""
    return (np.asarray(probs) >= 0.5).astype(np.uint8)


def extract_message(cfg, weights, image):
    probs, _ = forward(cfg, weights, image, record=False)
    return threshold(probs)
