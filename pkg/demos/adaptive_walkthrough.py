"""Watch adaptive protocols pick their measurements.

Adaptive handlers receive only the number of copies consumed so far and the
measurement records; they never see the true state. This script drives an
AMUB handler and an FO handler by hand against a fixed true state and shows
how the issued bases react to the accumulating data: AMUB rotates its first
basis into the eigenbasis of the running estimate, FO hunts for product
vectors orthogonal to the estimate's principal components.
"""

import numpy as np

from qtbench import MeasurementRecord, born_probabilities, sample_counts
from qtbench.engine import resolve_method, CampaignConfig
from qtbench.qcore import eig_hermitian, fidelity
from qtbench.states import TestKind, gen_rps

BUDGET = 3_000
rng = np.random.default_rng(5)
state_rng = np.random.default_rng(99)

for protocol in ("amub", "fo"):
    print(f"=== {protocol} on a two-qubit random pure state ===")
    config = CampaignConfig(dims=(2, 2), test=TestKind.RPS, protocol=protocol,
                            estimator="frml", n_grid=(BUDGET,), runs_per_n=2,
                            base_seed=0)
    rho = gen_rps((2, 2), np.random.default_rng(7))
    handler, estimator = resolve_method(config, BUDGET, rng)
    records, measured, step = [], 0, 0
    while measured < BUDGET:
        spec = handler.next(measured, records)
        if spec is None:
            break
        shots = min(spec.shots, BUDGET - measured)
        probs = born_probabilities(rho, spec.povm)
        records.append(MeasurementRecord(spec, sample_counts(probs, shots, rng)))
        measured += shots
        step += 1
        if step % 5 == 1 or protocol == "fo":
            # how well does this basis align with the true eigenbasis?
            truth = eig_hermitian(rho.mat)[1][:, 0]
            best = float(np.max(np.abs(spec.basis.conj().T @ truth) ** 2))
            print(f"  setting {step:>3}: {shots:>4} shots, best overlap of a "
                  f"basis vector with the true state: {best:.4f}")
    report = estimator(records)
    print(f"  {len(records)} settings, {measured} copies, "
          f"final fidelity {fidelity(rho, report.estimate):.5f}\n")

print("AMUB quickly locks a basis vector onto the true state (overlap -> 1),")
print("which is exactly why eigenbasis measurements are optimal for pure")
print("states. FO instead drives one vector to be orthogonal to the estimate")
print("(overlap -> 0) while staying factorized.")
