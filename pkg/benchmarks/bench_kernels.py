"""Time the numba and numpy paths of each hot kernel.

    python benchmarks/bench_kernels.py [--repeat N]

Both paths are called directly, so ``RISISAC_NUMBA`` has no effect here.
"""

import argparse
import time

import numpy as np

from risisac import kernels


def _best(fn, repeat):
    fn()  # warm-up / JIT compile
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    rng = np.random.default_rng(0)

    cases = []
    for m_f, t in ((64, 100), (256, 100)):
        d = rng.standard_normal((m_f, m_f, t)) + 1j * rng.standard_normal((m_f, m_f, t))
        y = rng.standard_normal(t) + 1j * rng.standard_normal(t)
        ref = kernels.eps_surface_numpy(d, y)
        got = kernels.eps_surface_numba(d, y)
        assert np.allclose(ref, got, rtol=1e-10)
        cases.append((f"eps_surface {m_f}x{m_f}x{t}",
                      lambda d=d, y=y: kernels.eps_surface_numpy(d, y),
                      lambda d=d, y=y: kernels.eps_surface_numba(d, y)))

    for pop, k in ((200, 4), (200, 16)):
        p = rng.uniform(1, 2, k)
        q = rng.uniform(1, 2, k)
        chi = rng.uniform(0.1, 1, (pop, k))
        c = rng.uniform(0.1, 1, (pop, k))
        lam = rng.uniform(0.1, 1, (pop, k))
        delta = rng.uniform(1, 2, (pop, k))
        om = rng.uniform(0, 1, (pop, k, k))
        xi = rng.uniform(0, 1, (pop, k, k))
        argv = (p, q, 100.0, 100.0, chi, c, lam, delta, om, xi)
        assert np.allclose(kernels.pi_terms_numpy(*argv), kernels.pi_terms_numba(*argv), rtol=1e-10)
        cases.append((f"pi_terms P={pop} K={k}",
                      lambda a=argv: kernels.pi_terms_numpy(*a),
                      lambda a=argv: kernels.pi_terms_numba(*a)))

    print(f"{'kernel':32s} {'numpy [ms]':>12s} {'numba [ms]':>12s} {'speed-up':>9s}")
    for name, f_np, f_nb in cases:
        t_np = _best(f_np, args.repeat) * 1e3
        t_nb = _best(f_nb, args.repeat) * 1e3
        print(f"{name:32s} {t_np:12.3f} {t_nb:12.3f} {t_np / t_nb:9.1f}")


if __name__ == "__main__":
    main()
