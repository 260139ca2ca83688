"""Time the compiled core against the pure-Python fallback.

    python3 benchmarks/bench_backends.py [--repeat 5]

Both backends are fed identical inputs and their outputs are checked for
agreement before timing.
"""
import argparse
import timeit

import numpy as np

from idp import _backend
from idp.kernel import poisson_mean
from idp.simulate import oc_like_census


def likelihood_inputs(n_pairs, seed=0):
    rng = np.random.default_rng(seed)
    src = rng.integers(20, 400, n_pairs)
    dst = np.clip(src + rng.integers(-25, 25, n_pairs), 0, None)
    lam = poisson_mean(1.0, rng.uniform(5, 80, n_pairs), 0.2)
    return lam, src, dst, float(np.exp(-0.2)), 2048


def simulation_inputs(seed=0):
    rates = 0.1 * oc_like_census(200, 43)[:-1].astype(float)
    rng = np.random.default_rng(seed)
    n = 200_000
    return rates, rng.standard_exponential(n), rng.random(n)


def run_simulation(backend, rates, exps, unifs):
    out = np.empty(len(rates) + 1, dtype=np.int64)
    out[0] = 25
    *_, used = backend.simulate_chunk(rates, 0.2, 25, 0, 0.0, exps, unifs, out)
    return out, used


def best_of(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--pairs", type=int, default=200,
                        help="transitions per likelihood evaluation")
    args = parser.parse_args(argv)
    if _backend.NAME != "cython":
        parser.exit(1, "compiled core not available; build it with "
                       "`python3 setup.py build_ext --inplace`\n")
    core, fallback = _backend.core, _backend.fallback

    lik = likelihood_inputs(args.pairs)
    gap = np.max(np.abs(core.pgf_coefficients(*lik) - fallback.pgf_coefficients(*lik)))
    sim = simulation_inputs()
    (path_c, used), (path_py, _) = run_simulation(core, *sim), run_simulation(fallback, *sim)
    same = np.array_equal(path_c, path_py)
    print(f"agreement: max coefficient gap {gap:.2e}, identical paths: {same}")

    rows = [
        (f"pgf_coefficients ({args.pairs} pairs, N=2048)",
         best_of(lambda: core.pgf_coefficients(*lik), args.repeat, 20),
         best_of(lambda: fallback.pgf_coefficients(*lik), args.repeat, 5)),
        (f"simulate_chunk (200 days, {used} draws)",
         best_of(lambda: run_simulation(core, *sim), args.repeat, 20),
         best_of(lambda: run_simulation(fallback, *sim), args.repeat, 2)),
    ]
    print(f"{'kernel':<44}{'cython':>12}{'python':>12}{'speedup':>10}")
    for name, fast, slow in rows:
        print(f"{name:<44}{fast * 1e3:>10.3f}ms{slow * 1e3:>10.3f}ms{slow / fast:>9.1f}x")


if __name__ == "__main__":
    main()
