"""Compare the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Times conv forward+backward per layer shape of the default 32x32 network,
max-pooling, and one full training step on a batch of 32 patches.
"""
import argparse
import time

import numpy as np

from scriptorium import kernels
from scriptorium.classifier import loss_and_gradient
from scriptorium.patching import PatchSpec
from scriptorium.pipeline import default_model_config
from scriptorium.classifier import init_params


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def cases(rng):
    for name, xs, ws in [
        ("conv1 GS  1->8   32x32", (32, 1, 32, 32), (8, 1, 3, 3)),
        ("conv1 RGB 3->8   32x32", (32, 3, 32, 32), (8, 3, 3, 3)),
        ("conv2     8->16  15x15", (32, 8, 15, 15), (16, 8, 3, 3)),
        ("conv3     16->16 6x6", (32, 16, 6, 6), (16, 16, 3, 3)),
    ]:
        x, w, b = rng.normal(size=xs), rng.normal(size=ws), np.zeros(ws[0])

        def conv(backend, x=x, w=w, b=b):
            out = kernels.conv2d_forward(x, w, b, 1, backend=backend)
            kernels.conv2d_backward(out, x, w, 1, backend=backend)
        yield name, conv

    xp = rng.normal(size=(32, 8, 30, 30))

    def pool(backend):
        out, idx = kernels.maxpool2_forward(xp, backend=backend)
        kernels.maxpool2_backward(out, idx, xp.shape, backend=backend)
    yield "maxpool   8x30x30", pool

    for mode in ("GS_MASK", "RGB"):
        params = init_params(default_model_config(mode, PatchSpec(32, 32), [f"S{i}" for i in range(7)]))
        xb = rng.normal(size=(32, params.config.input_channels, 32, 32))
        yb = rng.integers(0, 7, 32)

        def step(backend, params=params, xb=xb, yb=yb):
            loss_and_gradient(params, xb, yb, backend)
        yield f"train step {mode}", step


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    backends = {"python": kernels.get_backend("python")}
    try:
        backends["cython"] = kernels.get_backend("cython")
        backends["auto"] = kernels.get_backend("auto")
    except ImportError:
        print("compiled kernels not built; timing numpy only")
    rng = np.random.default_rng(0)
    print(f"{'case':28s}" + "".join(f"{name:>12s}" for name in backends) + ("   cython/auto speedup" if len(backends) > 1 else ""))
    for name, fn in cases(rng):
        t = {b: best_of(lambda: fn(impl), args.repeat) for b, impl in backends.items()}
        row = f"{name:28s}" + "".join(f"{t[b] * 1e3:10.2f}ms" for b in backends)
        if "cython" in t:
            row += f"   {t['python'] / t['cython']:6.2f}x {t['python'] / t['auto']:6.2f}x"
        print(row)


if __name__ == "__main__":
    main()
