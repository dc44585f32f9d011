"""Compiled vs pure-Python kernel timings.

Times the two Monte-Carlo kernels through their public entry points
(``histogram.trial_losses`` and ``spherekit.expected_pairwise_distance``)
on each available backend, checks that the backends agree, and prints a
small table.  Run with::

    python3 benchmarks/bench_kernels.py --trials 100000 --repeat 3
"""

import argparse
import time

import numpy as np

from losslab import backend as B
from losslab import data as D
from losslab import histogram as H
from losslab import nanonet as nn
from losslab import spherekit as sk


def best_of(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases(trials):
    data = D.load_bundled()
    for width, depth in ((3, 3), (6, 3), (12, 6)):
        cfg = H.HistogramConfig(nn.NetworkSpec(6, width, depth), (0, 1, 2), trials)
        yield (f"mc_losses w{width} d{depth}",
               lambda be, cfg=cfg: H.trial_losses(cfg, data, 0, trials, backend=be))
    for n in (2, 32, 128):
        yield (f"pair_distances n={n}",
               lambda be, n=n: np.array(sk.expected_pairwise_distance(n, 1.0, trials, seed=0, backend=be)))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    backends = ["python"] + (["compiled"] if B._ckernels is not None else [])
    if len(backends) == 1:
        print("compiled extension not built; timing the python backend only")
    print(f"{'kernel':<24}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}{'max |diff|':>12}")
    for name, fn in cases(args.trials):
        results = {b: best_of(lambda: fn(b), args.repeat) for b in backends}
        row = f"{name:<24}" + "".join(f"{results[b][0]:>11.3f}s" for b in backends)
        if len(backends) == 2:
            (tp, op), (tc, oc) = results["python"], results["compiled"]
            row += f"{tp / tc:>9.1f}x{float(np.max(np.abs(op - oc))):>12.1e}"
        print(row)


if __name__ == "__main__":
    main()
