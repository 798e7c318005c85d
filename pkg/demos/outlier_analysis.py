"""Why tomography outlier counts need a skewness-adjusted fence.

Infidelity samples from efficient methods follow a chi-squared-like law,
which is strongly right-skewed: the classic Tukey fence (Q3 + 1.5 IQR) then
flags a big chunk of perfectly ordinary runs as outliers. The medcouple
statistic measures that skew and stretches the fence asymmetrically, so only
genuinely anomalous runs are counted.
"""

import numpy as np

from qtbench import medcouple, outlier_ratio, percentile

rng = np.random.default_rng(12)


def tukey_ratio(v):
    q1, q3 = percentile(v, 0.25), percentile(v, 0.75)
    iqr = q3 - q1
    return float(np.mean((v < q1 - 1.5 * iqr) | (v > q3 + 1.5 * iqr)))


print(f"{'sample':<34} {'medcouple':>10} {'tukey':>8} {'adjusted':>9}")
cases = [
    ("symmetric normal", rng.standard_normal(10_000)),
    ("chi^2, 6 dof (typical infidelity)", rng.chisquare(6, 10_000)),
    ("chi^2, 2 dof (heavier skew)", rng.chisquare(2, 10_000)),
    ("chi^2_6 plus 1% genuine failures",
     np.concatenate([rng.chisquare(6, 9_900), 60 + rng.chisquare(6, 100)])),
]
for label, sample in cases:
    print(f"{label:<34} {medcouple(sample):>10.3f} {tukey_ratio(sample):>8.3f} "
          f"{outlier_ratio(sample):>9.4f}")

print("\nThe adjusted fence keeps the false-alarm rate on skewed samples near")
print("zero while still catching the injected 1% failure cluster.")
