"""Shared oracles and helpers for the test suite.

These stay independent of the package internals they are used to check:
the KS statistics are computed from sorted-sample definitions and the
normal CDF from math.erf.
"""

from __future__ import annotations

import json
import math
import re

import numpy as np


def normal_cdf(x, mu=0.0, sigma=1.0):
    z = (np.asarray(x, dtype=np.float64) - mu) / (sigma * math.sqrt(2.0))
    return 0.5 * (1.0 + np.vectorize(math.erf)(z))


def ks_one_sample(samples, cdf) -> float:
    """sup_x |F_emp(x) - F(x)| via the order-statistics formula."""
    s = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    n = s.size
    f = np.asarray(cdf(s), dtype=np.float64)
    upper = np.max(np.arange(1, n + 1) / n - f)
    lower = np.max(f - np.arange(0, n) / n)
    return float(max(upper, lower))


def ks_vs_normal(samples, mu=0.0, sigma=1.0) -> float:
    return ks_one_sample(samples, lambda s: normal_cdf(s, mu, sigma))


VOLATILE_JSON_KEYS = ("timestamp", "timings", "seconds_per_trial")


def stable_json(path) -> str:
    """Artifact content with volatile clock fields removed."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    for key in VOLATILE_JSON_KEYS:
        doc.pop(key, None)
    return json.dumps(doc, indent=2, sort_keys=True)


def stable_csv(path) -> str:
    """CSV content with any 'seconds' column masked."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    header = lines[0].split(",")
    if "seconds" not in header:
        return "\n".join(lines)
    drop = header.index("seconds")
    out = []
    for line in lines:
        parts = line.split(",")
        del parts[drop]
        out.append(",".join(parts))
    return "\n".join(out)
