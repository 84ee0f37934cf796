"""
Basins of a planar map
======================

Two contractions of the unit square by a factor 0.4 share one attracting
orbit of period three. Grid points are labeled by the cycle they reach.
"""

import numpy as np

from pwcert import certify
from pwcert.certifier import AMBIGUOUS, basin_labels, grid_points
from pwcert.fixtures import planar
from pwcert.orbits import iterate_batch

F = planar()
C = certify(F)
(orbit,) = C.cycles
print(f"k0 = {C.k0}, d = {C.d}, word {orbit.word_cycle}")
print(np.round(orbit.as_array(), 6))

# %%
# Labels on a 41 x 41 grid. Points whose orbit meets a cut are ambiguous.
X = grid_points([0, 0], [1, 1], [41, 41])
labels = basin_labels(F, C, X).reshape(41, 41)
print(f"{(labels == 0).sum()} points reach the cycle, {(labels == AMBIGUOUS).sum()} ambiguous")

# %%
# How quickly orbits settle: the first step count at which every grid orbit
# is within 1e-6 of the cycle.
P = orbit.as_array()
for steps in range(1, 200):
    Y, _, _ = iterate_batch(F, X, steps)
    gap = np.max(np.min(np.max(np.abs(Y[:, None, :] - P[None]), axis=2), axis=1))
    if gap < 1e-6:
        print(f"all {len(X)} orbits within 1e-6 after {steps} steps")
        break
