"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat N] [--cutoff N]

The first numba call compiles (or loads the on-disk cache); it is excluded by
a warm-up call. Results agree between the two paths, which is asserted.
"""
import argparse
import time

import numpy as np

from entsim import kernels
from entsim._accel import HAVE_NUMBA
from entsim.bridge import generating_kernel
from entsim.fock import tmss_fock
from entsim.gaussian import absorb, make_tmss
from entsim.jumpmc import IonCavityParams, _Propagator, basis_state, effective_hamiltonian


def _best(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(cutoff):
    rho = tmss_fock(0.4, 0.0, cutoff).to_density().entries
    _, A = generating_kernel(absorb(make_tmss(0.5), 0.7).covariance)
    rng = np.random.default_rng(1)
    m = rng.normal(size=((cutoff + 1) ** 2,) * 2) + 1j * rng.normal(size=((cutoff + 1) ** 2,) * 2)
    dense = (m @ m.conj().T).reshape((cutoff + 1,) * 4)
    dense /= np.einsum("abab->", dense)
    small = dense[:4, :4, :4, :4]
    p = IonCavityParams(Delta=200)
    U = _Propagator(effective_hamiltonian(p, 2), 10.0).U
    a0 = basis_state(1, 0)
    return {
        "wick_table": lambda b: kernels.wick_table(A, (cutoff + 1,) * 4, b),
        "gaussify_block": lambda b: kernels.gaussify_block(rho, rho, cutoff, b),
        "gaussify_block_dense": lambda b: kernels.gaussify_block(dense, dense, cutoff, b),
        "gaussify_diagonal": lambda b: kernels.gaussify_diagonal(rho, rho, 2 * cutoff, b),
        "inefficient_block": lambda b: kernels.inefficient_block(small, small, 0.7, 3, backend=b)[0],
        "norm_curve": lambda b: kernels.norm_curve(U, a0, 100_000, b),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--cutoff", type=int, default=6)
    args = ap.parse_args(argv)
    if not HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    print(f"{'kernel':<20}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}")
    for name, fn in cases(args.cutoff).items():
        ref = fn("numba")  # warm-up and reference
        np.testing.assert_allclose(fn("numpy"), ref, rtol=1e-10, atol=1e-13)
        t_nb = _best(lambda: fn("numba"), args.repeat)
        t_np = _best(lambda: fn("numpy"), args.repeat)
        print(f"{name:<20}{t_nb:>12.4g}{t_np:>12.4g}{t_np / t_nb:>10.1f}")


if __name__ == "__main__":
    main()
