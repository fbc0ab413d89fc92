"""Batch embedding, distortion sweeps and the depth-sensitivity probe.

A bench run embeds a fresh random message into every image, pushes each
watermarked image through a grid of distortions and records per-trial
BER next to the embedding's PSNR/SSIM.  Every random draw is keyed off
the decoder seed and the image index, so a (plan, seed) pair fixes every
byte of the per-trial CSV.
"""

import csv
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import codec as C
from . import corpus
from . import decoder as D
from . import distortions as X
from .metrics import ber, psnr, ssim
from .prng import derive_key

log = logging.getLogger(__name__)

CSV_COLUMNS = ["image", "distortion", "level", "ber", "psnr", "ssim", "iters", "retries", "wall_ms"]


def thread_count():
    """Worker cap from ASW_THREADS (default 1)."""
    raw = os.environ.get("ASW_THREADS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"ASW_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"ASW_THREADS must be a positive integer, got {raw!r}")
    return n


@dataclass
class GridCell:
    kind: str
    levels: list
    axis: str = "both"

    def specs(self):
        return [X.DistortionSpec(self.kind, float(v), axis=self.axis).validate()
                for v in self.levels]


@dataclass
class BenchPlan:
    image_dir: str = None         # None -> built-in desk corpus
    n_images: int = 16
    image_size: int = 256
    bits: int = 36
    seed: int = 1
    decoder: dict = field(default_factory=dict)   # depth, pool_stride, channels, ...
    embed: dict = field(default_factory=dict)     # EmbedConfig overrides
    grid: list = field(default_factory=list)      # GridCell or dicts
    trials: int = 1
    csv_path: str = None
    json_path: str = None
    record_timing: bool = False
    keep_images: bool = False     # hold watermarked images and messages on the report

    def __post_init__(self):
        self.grid = [g if isinstance(g, GridCell) else GridCell(**g) for g in self.grid]

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            raw = json.load(fh)
        unknown = set(raw) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown plan keys: {sorted(unknown)}")
        plan = cls(**raw)
        base = Path(path).parent
        for name in ("image_dir", "csv_path", "json_path"):
            v = getattr(plan, name)
            if v is not None and not Path(v).is_absolute():
                setattr(plan, name, str(base / v))
        return plan

    def decoder_config(self):
        return D.DecoderConfig(seed=self.seed, bits=self.bits, **self.decoder).validate()

    def embed_config(self):
        return C.EmbedConfig(**self.embed).validate()

    def validate(self):
        if self.n_images < 1 or self.trials < 1 or self.image_size < 1:
            raise ValueError("n_images, trials and image_size must be positive")
        for cell in self.grid:
            cell.specs()
        cfg = self.decoder_config()
        cfg.check_image(self.image_size, self.image_size)
        self.embed_config()
        return self


@dataclass
class CellStats:
    distortion: str
    level: float
    ber_mean: float
    ber_std: float
    n: int


@dataclass
class BenchReport:
    cells: list
    psnr_mean: float
    ssim_mean: float
    success_rate: float
    n_images: int
    clean_ber_success: float
    embed_ms_mean: float = None
    extract_ms_mean: float = None
    weights_digest: str = ""
    rows: list = field(default_factory=list, repr=False)
    images: list = field(default_factory=list, repr=False)

    def cell(self, distortion, level):
        for c in self.cells:
            if c.distortion == distortion and np.isclose(c.level, level):
                return c
        raise KeyError((distortion, level))

    def to_json(self):
        d = asdict(self)
        d.pop("rows")
        d.pop("images")
        return d


def _load_images(plan):
    if plan.image_dir is None:
        return corpus.desk_corpus(plan.n_images, plan.image_size)
    out = []
    for p in corpus.list_images(plan.image_dir):
        if len(out) == plan.n_images:
            break
        try:
            out.append((p.stem, corpus.load_rgb(p, plan.image_size)))
        except (OSError, ValueError) as exc:
            log.warning("skipping unreadable image %s: %s", p, exc)
    if not out:
        raise FileNotFoundError(f"no readable images in {plan.image_dir}")
    return out


def _fmt(v):
    return f"{v:.6f}"


def _run_image(plan, cfg, weights, ec, index, name, host8):
    msg = C.random_message(cfg.bits, derive_key("message", cfg.seed, index))
    t0 = time.perf_counter()
    res = C.embed(cfg, weights, host8, msg, ec, rng_seed=derive_key("embed", cfg.seed, index))
    embed_ms = (time.perf_counter() - t0) * 1e3
    wm = res.watermarked
    q, s = psnr(wm, host8), ssim(wm, host8)
    rows, extract_ms = [], []

    def row(dist, level, b, ms):
        wall = f"{ms:.3f}" if plan.record_timing else ""
        return [name, dist, level, _fmt(b), _fmt(q), _fmt(s),
                str(res.iterations_used), str(res.retries), wall]

    t0 = time.perf_counter()
    clean = ber(C.extract(cfg, weights, wm), msg)
    extract_ms.append((time.perf_counter() - t0) * 1e3)
    rows.append(row("none", "", clean, embed_ms))
    for cell in plan.grid:
        for spec in cell.specs():
            for trial in range(plan.trials):
                seed = derive_key("noise", cfg.seed, index, spec.label, repr(spec.level), trial)
                spec_t = X.DistortionSpec(spec.kind, spec.level, seed, spec.axis)
                t0 = time.perf_counter()
                out = X.apply(wm, spec_t, host8)
                b = ber(C.extract(cfg, weights, out), msg)
                ms = (time.perf_counter() - t0) * 1e3
                rows.append(row(spec.label, repr(spec.level), b, ms))
    return dict(success=res.success, psnr=q, ssim=s, clean=clean, rows=rows,
                image=(name, host8, wm, msg) if plan.keep_images else None,
                embed_ms=embed_ms, extract_ms=float(np.mean(extract_ms)))


def run_bench(plan):
    """Embed, distort and extract per ``plan``; writes CSV/JSON if paths are set."""
    plan.validate()
    cfg, ec = plan.decoder_config(), plan.embed_config()
    weights = D.build_decoder(cfg)
    images = _load_images(plan)
    log.info("bench: %d images, decoder %s", len(images), weights.weights_digest[:12])

    jobs = [(i, name, img) for i, (name, img) in enumerate(images)]
    workers = min(thread_count(), len(jobs))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(lambda j: _run_image(plan, cfg, weights, ec, *j), jobs))
    else:
        results = [_run_image(plan, cfg, weights, ec, *j) for j in jobs]

    rows = [r for res in results for r in res["rows"]]
    cells = []
    for cell in plan.grid:
        for spec in cell.specs():
            vals = [float(r[3]) for r in rows
                    if r[1] == spec.label and r[2] == repr(spec.level)]
            cells.append(CellStats(spec.label, spec.level, float(np.mean(vals)),
                                   float(np.std(vals)), len(vals)))
    ok = [r for r in results if r["success"]]
    report = BenchReport(
        cells=cells,
        psnr_mean=float(np.mean([r["psnr"] for r in ok])) if ok else float("nan"),
        ssim_mean=float(np.mean([r["ssim"] for r in ok])) if ok else float("nan"),
        success_rate=len(ok) / len(results),
        n_images=len(results),
        clean_ber_success=float(np.mean([r["clean"] for r in ok])) if ok else float("nan"),
        weights_digest=weights.weights_digest,
        rows=rows,
        images=[r["image"] for r in results if r["image"] is not None],
    )
    if plan.record_timing:
        report.embed_ms_mean = float(np.mean([r["embed_ms"] for r in results]))
        report.extract_ms_mean = float(np.mean([r["extract_ms"] for r in results]))
    if plan.csv_path:
        write_csv(plan.csv_path, rows)
    if plan.json_path:
        Path(plan.json_path).parent.mkdir(parents=True, exist_ok=True)
        with open(plan.json_path, "w") as fh:
            json.dump(report.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    return report


def write_csv(path, rows):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        w.writerows(rows)


# ---------------------------------------------------------------------------
# depth-sensitivity probe
# ---------------------------------------------------------------------------

@dataclass
class ProbeRow:
    depth: int
    flip_plus: float
    flip_minus: float

    @property
    def flip_rate(self):
        return (self.flip_plus + self.flip_minus) / 2


def run_depth_probe(depths, sigma, n_images, seed=1, size=256, bits=36, pool_stride=4):
    """Mean % of output bits flipped by orthogonal-mask Gaussian noise, per depth."""
    depths = list(depths)
    if not depths or any(d < 3 or d > 8 for d in depths):
        raise ValueError("depths must lie in 3..8")
    images = corpus.random_crops(n_images, size, derive_key("probe-images", seed))
    table = []
    for d in depths:
        cfg = D.DecoderConfig(seed=seed, bits=bits, depth=d, pool_stride=pool_stride).validate()
        weights = D.build_decoder(cfg)
        fp, fm = [], []
        for i, img in enumerate(images):
            x = C.to_tensor(img)
            ref = D.extract_message(cfg, weights, x)
            pair = X.make_orthogonal_noise(x.shape, sigma, derive_key("probe-noise", seed, i))
            for noise, acc in ((pair.n_plus, fp), (pair.n_minus, fm)):
                y = np.clip(x + noise, 0.0, 1.0)
                acc.append(ber(D.extract_message(cfg, weights, y), ref))
        table.append(ProbeRow(d, float(np.mean(fp)), float(np.mean(fm))))
    return table
