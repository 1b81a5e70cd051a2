#!/usr/bin/env python3
"""Regenerates stats_fixtures.json.

Reference values come from scipy/numpy so the C++ implementations are
checked against an independent implementation. Output is committed; rerun
only when the fixture set itself needs to change.
"""
import json
import math

import numpy as np
from scipy import stats


def cohens_d(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = len(a), len(b)
    pooled_var = ((na - 1) * a.var(ddof=1) + (nb - 1) * b.var(ddof=1)) / (na + nb - 2)
    return float((a.mean() - b.mean()) / math.sqrt(pooled_var))


def posthoc_power(d, na, nb, alpha):
    z_crit = stats.norm.ppf(1.0 - alpha / 2.0)
    arg = abs(d) * math.sqrt(na * nb / (na + nb)) - z_crit
    return float(min(1.0, max(0.0, stats.norm.cdf(arg))))


def main():
    rng = np.random.default_rng(20240817)
    pairs = []
    for i in range(50):
        na = int(rng.integers(5, 41))
        nb = int(rng.integers(5, 41))
        loc_shift = float(rng.uniform(-3.0, 3.0))
        scale_a = float(rng.uniform(0.5, 3.0))
        scale_b = float(rng.uniform(0.5, 3.0))
        a = rng.normal(0.0, scale_a, size=na)
        b = rng.normal(loc_shift, scale_b, size=nb)
        p = float(stats.ttest_ind(a, b, equal_var=False).pvalue)
        pairs.append(
            {
                "a": [float(x) for x in a],
                "b": [float(x) for x in b],
                "welch_p": p,
                "cohens_d": cohens_d(a, b),
                "power": posthoc_power(cohens_d(a, b), na, nb, 0.05),
            }
        )

    power_cases = []
    for d, na, nb, alpha in [
        (1.0, 20, 20, 0.05),
        (0.5, 10, 10, 0.05),
        (0.2, 30, 25, 0.05),
        (2.5, 8, 12, 0.01),
        (0.0, 20, 20, 0.05),
        (1.3, 15, 40, 0.10),
    ]:
        power_cases.append(
            {
                "d": d,
                "n_a": na,
                "n_b": nb,
                "alpha": alpha,
                "power": posthoc_power(d, na, nb, alpha),
            }
        )

    # Discrete Hellinger via the Bhattacharyya form H = sqrt(1 - sum(sqrt(p*q))).
    p = np.array([0.5, 0.5])
    q = np.array([0.9, 0.1])
    hellinger = float(math.sqrt(1.0 - np.sum(np.sqrt(p * q))))

    out = {
        "two_sample_pairs": pairs,
        "power_cases": power_cases,
        "hellinger_example": {
            "p": [0.5, 0.5],
            "q": [0.9, 0.1],
            "h": hellinger,
        },
    }
    with open("stats_fixtures.json", "w") as f:
        json.dump(out, f, indent=1)
    print("hellinger([0.5,0.5],[0.9,0.1]) =", hellinger)
    print("power(d=1,20,20,0.05) =", power_cases[0]["power"])


if __name__ == "__main__":
    main()
