"""Truncation sensitivity of the exact oracle for linear births / quadratic deaths.

    python scripts/ex2_truncation.py [--N 15] [--k 2]
"""
import argparse

import numpy as np

from qsdkit import catalog, exact_qsd, tau_asymptotic
from qsdkit.oracle import default_truncation


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--N", type=int, default=15)
    ap.add_argument("--k", type=int, default=2)
    ap.add_argument("--factors", default="0.5,1,2")
    a = ap.parse_args()

    m = catalog("linear_birth_quadratic_death", {"k": a.k})
    base = np.asarray(default_truncation(m, a.N))
    print(f"default truncation {base.tolist()}, asymptotic tau {tau_asymptotic(m, a.N).tau:.10g}")
    ref = None
    for f in (float(s) for s in a.factors.split(",")):
        bounds = np.maximum(np.ceil(f * base).astype(int), 2)
        r = exact_qsd(m, a.N, bounds.tolist(), check_truncation=False)
        ref = ref or r.tau_exact
        print(f"bounds {bounds.tolist()}: {r.chain.n:7d} states  tau {r.tau_exact:.12g}  "
              f"face mass {r.truncation_mass:.2e}  rel to first {abs(r.tau_exact / ref - 1):.2e}")


if __name__ == "__main__":
    main()
