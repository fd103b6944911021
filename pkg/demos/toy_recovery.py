"""Recover a scalar delay system from three samples.

Run with ``python3 demos/toy_recovery.py``.
"""

import numpy as np

from structloewner import parse_structure, partition_groups, solve_additional_points, tangential_sample, toy_delay

model, H = toy_delay(1.0, -2.0, 0.5, 1.0, 1.0)
structure = parse_structure("s,-1,-exp(-s)")

# one left point and two right points: one group each for K = 3
data = tangential_sample(H, [0.5], [1.0, -1.0])
R = solve_additional_points(partition_groups(data, 1, 2), structure)

print("recovered coefficients:", np.round(R.A.ravel().real, 12))
for w in (0.1, 1.0, 10.0):
    s = 1j * w
    print(f"omega={w:5.1f}  |H - H_rom| = {abs(H(s) - R(s)[0, 0]):.2e}")
