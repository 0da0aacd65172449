"""Time the numba and numpy kernels side by side.

    python3 benchmarks/bench_kernels.py --repeat 5

Numba functions are called once before timing so compilation is excluded.
"""
import argparse
import timeit

import numpy as np

from nlsbeam import _kernels


def cases(n_theta, n_x, n_modes, n_points):
    rng = np.random.default_rng(1)
    field = rng.normal(size=(n_theta, n_x)) + 1j * rng.normal(size=(n_theta, n_x))
    m2 = np.fft.fftfreq(n_theta, d=1.0 / n_theta) ** 2
    x = np.linspace(-np.pi, np.pi, n_x, endpoint=False)
    w = 1.0 / (0.5 * (1 + np.cos(x) ** 2))
    v = -0.25 * np.ones(n_x)
    nodes = np.linspace(-12, 12, n_points)
    coef = rng.normal(size=512) + 0j
    freqs = np.arange(512, dtype=float) - 256
    pts = rng.uniform(-3, 3, size=n_points)
    return {
        "hermite_table": lambda impl: impl.hermite_table(nodes, n_modes),
        "trig_eval": lambda impl: impl.trig_eval(coef, freqs, pts),
        "nonlinear_phase": lambda impl: impl.nonlinear_phase(field.copy(), 1.0, 2.0, 1e-3),
        "potential_phase": lambda impl: impl.potential_phase(field.copy(), m2, w, v, 1e-3),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-theta", type=int, default=256)
    ap.add_argument("--n-x", type=int, default=1024)
    ap.add_argument("--modes", type=int, default=256)
    ap.add_argument("--points", type=int, default=4096)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    if _kernels.numba_impl is None:
        print("numba not installed; nothing to compare")
        return 1
    table = cases(args.n_theta, args.n_x, args.modes, args.points)
    print(f"{'kernel':<18}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}{'max diff':>12}")
    for name, fn in table.items():
        ref = fn(_kernels.numpy_impl)
        got = fn(_kernels.numba_impl)      # also triggers compilation
        diff = float(np.max(np.abs(np.asarray(ref) - np.asarray(got))))
        t_np = min(timeit.repeat(lambda: fn(_kernels.numpy_impl), number=1, repeat=args.repeat))
        t_nb = min(timeit.repeat(lambda: fn(_kernels.numba_impl), number=1, repeat=args.repeat))
        print(f"{name:<18}{1e3 * t_np:>12.3f}{1e3 * t_nb:>12.3f}{t_np / t_nb:>10.2f}{diff:>12.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
