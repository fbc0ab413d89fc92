"""Time the numba kernels against their numpy twins, plus one full extraction
and one embedding per backend.

    python benchmarks/bench_kernels.py [--repeat N]

Each backend is measured in a fresh interpreter (the backend is fixed at
import time by ASW_BACKEND), so the numbers are directly comparable.
"""

import argparse
import json
import os
import subprocess
import sys
import timeit

WORKER = r"""
import json, sys, timeit
import numpy as np
from asw import _kernels as K, codec as C, corpus, decoder as D

repeat = int(sys.argv[1])
rng = np.random.default_rng(0)
x3 = rng.uniform(size=(3, 64, 64))
x64 = rng.normal(size=(64, 32, 32))
cols = K.im2col(x64, 3, 2, 1)
img = rng.uniform(0, 255, size=(256, 256, 3))
yy, xx = np.meshgrid(np.linspace(0, 255, 180), np.linspace(0, 255, 180), indexing="ij")
big = rng.uniform(size=(3, 256, 256))

cases = {
    "im2col 3x64x64 k3 s2": lambda: K.im2col(x3, 3, 2, 1),
    "im2col 64x32x32 k3 s2": lambda: K.im2col(x64, 3, 2, 1),
    "col2im 64x32x32 k3 s2": lambda: K.col2im(cols, 64, 32, 32, 3, 2, 1),
    "avg_pool 3x256x256 s4": lambda: K.avg_pool(big, 4),
    "bilinear 256->180": lambda: K.bilinear_sample(img, yy, xx, 0.0),
}
cfg = D.DecoderConfig(seed=1)
w = D.build_decoder(cfg)
host = corpus.desk_corpus(1, 256)[0][1]
cases["extract 256x256"] = lambda: C.extract(cfg, w, host)

out = {"backend": K.BACKEND}
for name, fn in cases.items():
    fn()  # warm-up, includes jit compilation
    out[name] = min(timeit.repeat(fn, number=1, repeat=repeat)) * 1e3
msg = C.random_message(36, 0)
out["embed 256x256"] = min(timeit.repeat(lambda: C.embed(cfg, w, host, msg), number=1, repeat=2)) * 1e3
print(json.dumps(out))
"""


def run(backend, repeat):
    env = dict(os.environ, ASW_BACKEND=backend)
    res = subprocess.run([sys.executable, "-c", WORKER, str(repeat)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    nb, np_ = run("numba", args.repeat), run("numpy", args.repeat)
    print(f"{'case':28s} {'numba ms':>10s} {'numpy ms':>10s} {'speedup':>8s}")
    for key in nb:
        if key == "backend":
            continue
        print(f"{key:28s} {nb[key]:10.3f} {np_[key]:10.3f} {np_[key] / nb[key]:8.2f}x")


if __name__ == "__main__":
    main()
