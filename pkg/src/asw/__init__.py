"""Adversarial shallow watermarking: a frozen random decoder as the key,
pixel-space L-BFGS as the encoder."""

from .codec import EmbedConfig, EmbedResult, embed, extract, format_message, parse_message
from .decoder import DecoderConfig, DecoderWeights, build_decoder
from .distortions import DistortionSpec, apply, make_orthogonal_noise
from .metrics import ber, psnr, ssim

__all__ = [
    "DecoderConfig", "DecoderWeights", "build_decoder",
    "EmbedConfig", "EmbedResult", "embed", "extract", "parse_message", "format_message",
    "DistortionSpec", "apply", "make_orthogonal_noise",
    "psnr", "ssim", "ber",
]
