"""Regenerate the Nemenyi q table embedded in tabench.ranking.

q_alpha(k) is the (1 - alpha) quantile of the studentized range for k groups
and infinite degrees of freedom, divided by sqrt(2).

    python scripts/derive_nemenyi_q.py
"""
import numpy as np
from scipy.stats import studentized_range

for alpha in (0.05, 0.10):
    qs = [studentized_range.ppf(1 - alpha, k, np.inf) / np.sqrt(2) for k in range(2, 21)]
    print(f"{alpha:.2f}: ({', '.join(f'{q:.6f}' for q in qs)}),")
