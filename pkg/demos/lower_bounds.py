"""How many state copies does tomography fundamentally need?

For a rank-r state in dimension d, an asymptotically efficient method has
infidelity distributed like d0 * chi^2_nu with nu = (2d - r) r - 1 free
parameters and d0 = nu / (4 N (d - 1)). Inverting the 95th percentile of that
distribution gives the smallest sample size N_B any method could need to hit
a target fidelity with 95% probability. This script tabulates the bound for
the systems and tests the benchmark suite covers.
"""

import numpy as np

from qtbench import TestKind, lower_bound_NB, nu
from qtbench.stats import rank_for_test

F_TARGET = 0.999

print(f"target fidelity {F_TARGET} reached with 95% probability\n")
print(f"{'system':<12} {'test':<8} {'d':>3} {'r':>3} {'nu':>4} {'N_B':>12}")
for dims in ((2,), (2, 2), (2, 2, 2)):
    d = int(np.prod(dims))
    label = "x".join(str(x) for x in dims) + " qubit" + ("s" if len(dims) > 1 else "")
    for test in TestKind:
        r = rank_for_test(test, d)
        n_b = lower_bound_NB(F_TARGET, d, r)
        print(f"{label:<12} {test.value:<8} {d:>3} {r:>3} {nu(d, r):>4} {n_b:>12.0f}")
    print()

print("Pure states (rank 1) are the cheap case; full-rank noisy preparations")
print("cost roughly five times more copies at the same dimension.")
