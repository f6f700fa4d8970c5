"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from fbmsteer import _backend
from fbmsteer.fbm import fgn_autocov
from fbmsteer.model import ExampleParams, build_example
from fbmsteer.solver import Grid, simulate_mild


def cases():
    rng = np.random.default_rng(0)
    gam = fgn_autocov(1024, 0.7)
    z = rng.standard_normal((16, 1024))
    decay = np.exp(-np.arange(1, 9) ** 2 / 512)
    data = rng.standard_normal((512, 8))
    spec = build_example(ExampleParams(
        n_modes=8, g_amp=5e-4, f_amp=2e-3, f_map="tanh", sigma=0.1, impulse_times=(0.25, 0.5),
        impulse_gain=0.05, phi_amp=1.0, phi_rate=1.0, phi_vector=np.r_[1.0, 0.5, np.zeros(6)]))
    grid = Grid.for_spec(spec, 1 / 512)
    noise = spec.sample_noise(grid.times, 1)
    return {
        "hosking (16 x 1024)": lambda core, name: core.hosking(gam, z),
        "exp_scan (512 x 8)": lambda core, name: core.exp_scan(decay, data),
        "memory_sweep (example, dt=1/512)": lambda core, name: simulate_mild(spec, None, noise, grid, backend=name),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    names = _backend.available()
    print(f"{'kernel':<34}" + "".join(f"{n:>12}" for n in names) + ("     speedup" if len(names) == 2 else ""))
    for label, fn in cases().items():
        best = {}
        for name in names:
            core = _backend.get(name)
            fn(core, name)  # warm caches
            best[name] = min(timeit.repeat(lambda: fn(core, name), number=1, repeat=args.repeat))
        row = f"{label:<34}" + "".join(f"{best[n] * 1e3:>10.3f}ms" for n in names)
        if len(names) == 2:
            row += f"{best['python'] / best['cython']:>11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
