"""Regenerates stats_reference.json from scipy and scikit-posthocs.

Run offline; the JSON output is committed and read by the C++ tests.
"""
import json

import numpy as np
import scikit_posthocs as sp
from scipy import stats

rng = np.random.default_rng(20240611)
cases = []


def add(name, groups):
    h, p = stats.kruskal(*groups)
    dunn = sp.posthoc_dunn([list(g) for g in groups], p_adjust="bonferroni")
    raw = sp.posthoc_dunn([list(g) for g in groups])
    cases.append({
        "name": name,
        "groups": [list(map(float, g)) for g in groups],
        "h": float(h),
        "p": float(p),
        "dunn_bonferroni": dunn.to_numpy().tolist(),
        "dunn_raw": raw.to_numpy().tolist(),
    })


for i in range(6):
    k = int(rng.integers(2, 6))
    groups = []
    for j in range(k):
        n = int(rng.integers(4, 25))
        groups.append(np.round(rng.normal(0.7 + 0.03 * j * (i % 3), 0.08, n), 4))
    add(f"normal_{i}", groups)

for i in range(3):
    groups = [np.round(rng.uniform(0.5, 0.9, int(rng.integers(5, 15))), 2) for _ in range(3)]
    add(f"ties_{i}", groups)

add("separated_three", [np.arange(1, 11) / 100.0, np.arange(11, 21) / 100.0, np.arange(21, 31) / 100.0])

chi2 = [{"x": x, "df": df, "sf": float(stats.chi2.sf(x, df))}
        for df in (1, 2, 3, 4, 7, 10, 25)
        for x in (0.01, 0.5, 1.0, 3.0, 7.815, 15.0, 40.0, 120.0)]

with open("stats_reference.json", "w") as f:
    json.dump({"kruskal_dunn": cases, "chi2_sf": chi2}, f, indent=1)
