"""Compare the compiled and numpy sample-rate loops.

    python3 benchmarks/bench_kernels.py [--seconds 2] [--repeat 3]

Runs fullband FxNLMS, SAF-FxNLMS and the fixed-filter FIR loop on the same
noise with each available backend, checks that the outputs agree and prints
best-of-N wall times.
"""

import argparse
import time

import numpy as np

from sasfanc import kernels
from sasfanc.adaptive import NlmsConfig, fullband_fxnlms, saf_fxnlms
from sasfanc.signals import (
    BandSpec,
    apply_path,
    default_primary_path,
    default_secondary_path,
    gen_bandlimited_noise,
)
from sasfanc.sim import cached_bank


def _best(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seconds", type=float, default=2.0)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    x = gen_bandlimited_noise(BandSpec(((20.0, 7980.0),)), args.seconds, seed=1)
    p, s = default_primary_path(), default_secondary_path()
    d = apply_path(p, x)
    cfg = NlmsConfig()
    bank = cached_bank(8, 128)
    w = np.random.default_rng(0).standard_normal(cfg.L) * 0.01

    def fir(impl):
        r = np.concatenate([np.zeros(cfg.L - 1), x.samples])
        y = np.zeros(len(x))
        impl.fir_loop(r, w, y, 0, len(x))
        return y

    jobs = {
        "fxnlms": lambda impl: fullband_fxnlms(x, d, s, s, cfg, backend=impl).error.samples,
        "saf_fxnlms": lambda impl: saf_fxnlms(x, d, s, s, bank, cfg, backend=impl).error.samples,
        "fir": fir,
    }
    backends = ["python"]
    try:
        kernels.get_backend("cython")
        backends.append("cython")
    except ImportError:
        print("compiled extension not built; timing the numpy backend only")

    print(f"{args.seconds:g} s of 16 kHz noise, L={cfg.L}, best of {args.repeat}")
    print(f"{'kernel':<12}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}{'max |diff|':>14}")
    for name, job in jobs.items():
        row, outs = [], []
        for b in backends:
            t, out = _best(lambda: job(kernels.get_backend(b)), args.repeat)
            row.append(t)
            outs.append(out)
        line = f"{name:<12}" + "".join(f"{t:>11.3f}s" for t in row)
        if len(row) == 2:
            diff = float(np.max(np.abs(outs[0] - outs[1])))
            line += f"{row[0] / row[1]:>9.1f}x{diff:>14.2e}"
        print(line)


if __name__ == "__main__":
    main()
