"""Command line entry point: ``asw embed|extract|distort|bench|probe-depth``."""

import argparse
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import bench
from . import codec as C
from . import corpus
from . import decoder as D
from . import distortions as X

log = logging.getLogger("asw")


def _number(text):
    """Float that also accepts fractions such as ``10/255``."""
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _decoder_args(p):
    p.add_argument("--seed", type=int, required=True, help="decoder key")
    p.add_argument("--bits", type=int, default=36)
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--stride", type=int, default=4, help="front AvgPool stride")


def build_parser():
    ap = argparse.ArgumentParser(prog="asw", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("embed", help="embed a message into an image")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True, help="lossless output (PNG recommended)")
    p.add_argument("--message", required=True, help="bit string or 0x-prefixed hex")
    _decoder_args(p)
    p.add_argument("--alpha", type=float, default=0.75)
    p.add_argument("--iters", type=int, default=25)
    p.add_argument("--eta", type=float, default=0.05)
    p.add_argument("--epsilon", type=float, default=0.005)
    p.add_argument("--rng-seed", type=int, default=0, help="re-embedding noise stream")

    p = sub.add_parser("extract", help="read the message from an image")
    p.add_argument("--in", dest="inp", required=True)
    _decoder_args(p)

    p = sub.add_parser("distort", help="apply one benchmark distortion")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--kind", required=True, type=lambda s: s.replace("-", "_"),
                   choices=X.KINDS)
    p.add_argument("--level", required=True, type=_number)
    p.add_argument("--noise-seed", type=int, default=0)
    p.add_argument("--host", help="host image, required for cropout")
    p.add_argument("--axis", choices=("both", "width"), default="both")

    p = sub.add_parser("bench", help="run a JSON bench plan")
    p.add_argument("--plan", required=True)

    p = sub.add_parser("probe-depth", help="output flip rate under orthogonal-mask noise")
    p.add_argument("--depths", type=_int_list, default=[3, 4, 5, 6])
    p.add_argument("--sigma", type=_number, default=10 / 255)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--size", type=int, default=256)
    return ap


def _decoder(args):
    cfg = D.DecoderConfig(seed=args.seed, bits=args.bits, depth=args.depth,
                          pool_stride=args.stride).validate()
    return cfg, D.build_decoder(cfg)


def _read(path):
    if not Path(path).is_file():
        raise FileNotFoundError(f"no such file: {path}")
    return corpus.load_rgb(path)


def cmd_embed(args):
    cfg, w = _decoder(args)
    msg = C.parse_message(args.message, cfg.bits)
    ec = C.EmbedConfig(alpha=args.alpha, iters=args.iters, eta=args.eta,
                       epsilon=args.epsilon).validate()
    host = _read(args.inp)
    if Path(args.out).suffix.lower() in (".jpg", ".jpeg"):
        log.warning("writing a lossy JPEG will damage the watermark")
    res = C.embed(cfg, w, host, msg, ec, rng_seed=args.rng_seed)
    corpus.save_rgb(args.out, res.watermarked)
    print(json.dumps({
        "success": res.success, "psnr": round(res.psnr_db, 4), "iters": res.iterations_used,
        "retries": res.retries, "weights_digest": w.weights_digest,
    }))
    return 0 if res.success else 3


def cmd_extract(args):
    cfg, w = _decoder(args)
    print(C.format_message(C.extract(cfg, w, _read(args.inp))))
    return 0


def cmd_distort(args):
    img = _read(args.inp)
    host = _read(args.host) if args.host else None
    spec = X.DistortionSpec(args.kind, args.level, args.noise_seed, args.axis)
    corpus.save_rgb(args.out, X.apply(img, spec, host))
    return 0


def cmd_bench(args):
    plan = bench.BenchPlan.from_json(args.plan)
    report = bench.run_bench(plan)
    print(json.dumps(report.to_json(), indent=2, sort_keys=True))
    return 0


def cmd_probe(args):
    table = bench.run_depth_probe(args.depths, args.sigma, args.n, args.seed, args.size)
    print("depth\tflip_plus\tflip_minus\tflip_rate")
    for r in table:
        print(f"{r.depth}\t{r.flip_plus:.3f}\t{r.flip_minus:.3f}\t{r.flip_rate:.3f}")
    return 0


COMMANDS = {"embed": cmd_embed, "extract": cmd_extract, "distort": cmd_distort,
            "bench": cmd_bench, "probe-depth": cmd_probe}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    np.seterr(all="ignore")
    try:
        return COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        # ConfigError, MessageError, DistortionError and ShapeError are ValueErrors
        print(f"asw {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
