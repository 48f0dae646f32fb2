"""Numba loop kernels vs the numpy fallback, plus a whole-sweep comparison.

    python3 benchmarks/bench_kernels.py [--repeat 20]

Kernel timings call both implementations directly in one process. The sweep
timing runs a short Gibbs chain in two subprocesses, one per value of
SIMPLEX_DRIFT_NUMBA, since the switch is read at import time.
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from simplex_drift import kernels

SWEEP = r"""
import json, time, numpy as np
from simplex_drift import ModelSpec, SamplerConfig, run_chain, generate, ScenarioConfig, backend
from simplex_drift.model import prior_state
tr, _, _ = generate(ScenarioConfig("SvM-c", n_train=200, n_test=1, seed=1))
spec = ModelSpec(K=2, D=2, gp_means=[[-1.0, 0.0], [1.0, 0.0]])
rng = np.random.default_rng(0)
init = prior_state(spec, tr, rng)
run_chain(spec, tr, init, SamplerConfig(iterations=5, burn_in=0, thin=1, chains=1), rng)
t = time.perf_counter()
run_chain(spec, tr, init, SamplerConfig(iterations=200, burn_in=0, thin=1, chains=1), rng)
print(json.dumps({"backend": backend(), "ms_per_sweep": 1e3 * (time.perf_counter() - t) / 200}))
"""


def bench_kernels(repeat, n=2000, dim=2):
    rng = np.random.default_rng(0)
    rho = rng.gamma(2.0, 3.0, n)
    align = rng.uniform(-1, 1, n)
    weight = (rng.uniform(size=n) < 0.5).astype(float)
    z = rng.standard_normal((dim, n))
    y = rng.standard_normal((n, dim))
    y /= np.linalg.norm(y, axis=1, keepdims=True)
    v = 0.5 * dim - 1.0
    cases = {
        "log_iv": (kernels._nb_log_iv, kernels._np_log_iv, (v, rho)),
        "iv_ratio": (kernels._nb_iv_ratio, kernels._np_iv_ratio, (v, rho)),
        "log_norm": (kernels._nb_log_norm, kernels._np_log_norm, (dim, rho)),
        "concentration_terms": (kernels._nb_concentration_terms, kernels._np_concentration_terms,
                                (dim, rho, align, weight)),
        "alignment": (kernels._nb_alignment, kernels._np_alignment, (z, y)),
    }
    rows = []
    for name, (nb, npf, args) in cases.items():
        nb(*args)  # compile outside the timer
        t_nb = min(timeit.repeat(lambda: nb(*args), number=repeat, repeat=3)) / repeat
        t_np = min(timeit.repeat(lambda: npf(*args), number=repeat, repeat=3)) / repeat
        rows.append((name, t_nb * 1e6, t_np * 1e6))
    return rows


def bench_sweep():
    out = []
    for flag in ("1", "0"):
        env = dict(os.environ, SIMPLEX_DRIFT_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", SWEEP], env=env, capture_output=True, text=True, check=True)
        out.append(json.loads(res.stdout.strip().splitlines()[-1]))
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--no-sweep", action="store_true")
    args = ap.parse_args()
    print(f"{'kernel (N=2000, D=2)':<24}{'numba us':>12}{'numpy us':>12}{'speedup':>10}")
    for name, a, b in bench_kernels(args.repeat):
        print(f"{name:<24}{a:>12.1f}{b:>12.1f}{b / a:>10.2f}")
    if not args.no_sweep:
        print()
        for r in bench_sweep():
            print(f"SvM-c Gibbs sweep, N=200, backend {r['backend']:<6}: {r['ms_per_sweep']:.2f} ms")


if __name__ == "__main__":
    main()
