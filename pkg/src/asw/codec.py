"""Adversarial watermark embedding and extraction.

8-bit images are (H, W, 3) uint8 arrays; the optimiser works on (3, H, W)
float64 tensors in [0, 1].
"""

import logging
import re
from dataclasses import dataclass, field

import numpy as np

from . import decoder as D
from .lbfgs import LbfgsState, lbfgs_step
from .metrics import psnr
from .prng import philox
from .tensor import ShapeError, backward_input_grad, sigmoid

log = logging.getLogger(__name__)

PROB_CLAMP = 1e-12


class MessageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# messages
# ---------------------------------------------------------------------------

def parse_message(text, bits=None):
    """Accept '0101...' or '0x...' hex; returns a uint8 bit vector."""
    text = text.strip()
    if text.lower().startswith("0x"):
        body = text[2:]
        if not body or not re.fullmatch(r"[0-9a-fA-F]+", body):
            raise MessageError(f"malformed hex message {text!r}")
        raw = bin(int(body, 16))[2:].zfill(4 * len(body))
        if bits is not None:
            raw = raw.zfill(bits)
            if "1" in raw[:len(raw) - bits]:
                raise MessageError(f"hex message does not fit in {bits} bits")
            raw = raw[len(raw) - bits:]
    else:
        if not text or not re.fullmatch(r"[01]+", text):
            raise MessageError(f"malformed bit string {text!r}")
        raw = text
    if bits is not None and len(raw) != bits:
        raise MessageError(f"message has {len(raw)} bits, expected {bits}")
    return np.frombuffer(raw.encode(), dtype=np.uint8) - ord("0")


def format_message(bits):
    return "".join("1" if b else "0" for b in np.asarray(bits).ravel())


def random_message(bits, key):
    return philox(key).integers(0, 2, size=bits, dtype=np.uint8)


# ---------------------------------------------------------------------------
# image conversions
# ---------------------------------------------------------------------------

def to_tensor(img8):
    img8 = np.asarray(img8)
    if img8.ndim != 3 or img8.shape[2] != 3:
        raise ShapeError(f"expected an (H,W,3) RGB image, got {img8.shape}")
    return np.ascontiguousarray(img8.transpose(2, 0, 1), dtype=np.float64) / 255.0


def quantize(x):
    """(3,H,W) floats in [0,1] -> (H,W,3) uint8, round half away from zero."""
    v = np.floor(np.clip(x, 0.0, 1.0) * 255.0 + 0.5)
    return np.ascontiguousarray(v.transpose(1, 2, 0)).astype(np.uint8)


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------

def watermark_loss(probs, message):
    p = np.clip(np.asarray(probs, dtype=np.float64), PROB_CLAMP, 1 - PROB_CLAMP)
    w = np.asarray(message, dtype=np.float64)
    return float(-np.mean(w * np.log(p) + (1 - w) * np.log1p(-p)))


def watermark_loss_logits(z, message):
    """Mean BCE evaluated on logits, exact even where the sigmoid saturates."""
    z = np.asarray(z, dtype=np.float64)
    w = np.asarray(message, dtype=np.float64)
    # softplus(z) - w*z, with softplus(z) = max(z, 0) + log1p(exp(-|z|))
    return float(np.mean(np.maximum(z, 0) + np.log1p(np.exp(-np.abs(z))) - w * z))


def image_loss(iw, ih):
    iw = np.asarray(iw, dtype=np.float64)
    ih = np.asarray(ih, dtype=np.float64)
    if iw.shape != ih.shape:
        raise ShapeError(f"image shapes differ: {iw.shape} vs {ih.shape}")
    return float(np.mean((iw - ih) ** 2))


def objective(cfg, weights, host, message, alpha):
    """Build ``fun(x) -> (L_all, dL_all/dx)`` plus a parts accessor."""
    w = np.asarray(message, dtype=np.float64)
    n = host.size
    last = {}

    def fun(x):
        z, tape = D.forward_logits(cfg, weights, x)
        probs = sigmoid(z)
        lw = watermark_loss_logits(z, w)
        li = image_loss(x, host)
        # d(mean BCE)/d(logits) = (p - w) / t
        g = backward_input_grad(tape, (probs - w) / w.size)
        g += alpha * 2.0 * (x - host) / n
        last.update(probs=probs, logits=z, lw=lw, li=li)
        return lw + alpha * li, g

    return fun, last


# ---------------------------------------------------------------------------
# embedding
# ---------------------------------------------------------------------------

@dataclass
class EmbedConfig:
    alpha: float = 0.75
    iters: int = 25
    eta: float = 0.05
    epsilon: float = 0.005
    psnr_floor_db: float = 33.0
    max_retries: int = 5
    conv_tol: float = 1e-3
    conv_window: int = 3
    memory: int = 10
    inner_steps: int = 20
    margin: float = 1.0

    def validate(self):
        if self.alpha < 0 or self.iters < 1 or self.eta <= 0 or self.epsilon < 0:
            raise ValueError(f"invalid embed config {self}")
        if self.max_retries < 0 or self.conv_tol <= 0 or self.conv_window < 2 \
                or self.inner_steps < 1 or self.margin < 0:
            raise ValueError(f"invalid embed config {self}")
        return self


@dataclass
class EmbedResult:
    watermarked: np.ndarray
    success: bool
    iterations_used: int
    retries: int
    final_Lw: float
    final_Li: float
    final_Lall: float
    psnr_db: float
    trace: list = field(default_factory=list, repr=False)


def converged(trace, window, tol):
    if len(trace) <= window:
        return False
    now = trace[-1]
    for j in range(1, window + 1):
        before = trace[-1 - j]
        if abs(now - before) / max(before, 1e-8) >= tol:
            return False
    return True


def logit_margin(z, message):
    """Smallest signed logit over the bits; >= 0 exactly when all bits decode right."""
    z = np.asarray(z, dtype=np.float64)
    return float(np.min(np.where(np.asarray(message) == 1, z, -z)))


def _optimise(cfg, weights, host, message, ec, start):
    """Outer iterations of up to ``inner_steps`` fixed-length quasi-Newton steps.

    Every step has trial length ``eta`` (backtracked only if it would raise
    the loss); pixels are clipped to [0, 1] after each outer iteration.
    Stops once the bits decode and either L_all has converged or every
    logit clears the threshold by ``ec.margin``.
    """
    fun, parts = objective(cfg, weights, host, message, ec.alpha)
    state = LbfgsState(memory=ec.memory, damped=True)
    x = start
    f, g = fun(x)
    trace = [f]
    used = 0
    for i in range(1, ec.iters + 1):
        used = i
        for _ in range(ec.inner_steps):
            res = lbfgs_step(state, fun, x, f, g, ec.eta)
            if not res.ok:
                break
            x, f, g = res.x, res.value, res.grad
            # the accepted trial was the last point evaluated, so parts match x
            if logit_margin(parts["logits"], message) >= ec.margin:
                break
        x_clip = np.clip(x, 0.0, 1.0)
        if not np.array_equal(x_clip, x):
            x = x_clip
            f, g = fun(x)
        trace.append(f)
        z = D.forward_logits(cfg, weights, x, record=False)[0]
        bits_ok = np.array_equal(D.threshold(sigmoid(z)), message)
        if bits_ok and (logit_margin(z, message) >= ec.margin
                        or converged(trace, ec.conv_window, ec.conv_tol)):
            break
    fun(x)
    return x, used, trace, dict(parts)


def embed(cfg, weights, host8, message, ec=None, rng_seed=0):
    """Embed ``message`` into an (H,W,3) uint8 host; never raises on valid input."""
    ec = (ec or EmbedConfig()).validate()
    message = np.asarray(message, dtype=np.uint8).ravel()
    if message.size != cfg.bits:
        raise MessageError(f"message has {message.size} bits, decoder emits {cfg.bits}")
    host = to_tensor(host8)
    cfg.check_image(host.shape[1], host.shape[2])
    host8 = quantize(host)
    rng = philox(rng_seed)

    best = None
    for attempt in range(ec.max_retries + 1):
        if attempt == 0:
            start = host.copy()
        else:
            u = rng.uniform(-1.0, 1.0, size=host.shape)
            start = np.clip(host + u * ec.epsilon, 0.0, 1.0)
        x, used, trace, parts = _optimise(cfg, weights, host, message, ec, start)
        wm = quantize(x)
        ok = np.array_equal(D.extract_message(cfg, weights, to_tensor(wm)), message)
        q = psnr(wm, host8)
        res = EmbedResult(wm, ok, used, attempt, parts["lw"], parts["li"],
                          parts["lw"] + ec.alpha * parts["li"], q, trace)
        if best is None or (res.success, res.psnr_db) > (best.success, best.psnr_db):
            best = res
        if ok and q >= ec.psnr_floor_db:
            break
        log.debug("attempt %d: success=%s psnr=%.2f, re-embedding", attempt, ok, q)
    return best


def extract(cfg, weights, image8):
    """Recover the bit vector from an (H,W,3) uint8 image."""
    return D.extract_message(cfg, weights, to_tensor(image8))
