"""
How far cycles move under small perturbations
=============================================

A certificate comes with a radius epsilon. Any map within epsilon has the
same number of cycles with the same periods, and each cycle moves by at most
epsilon* = 2 epsilon / (1 - lambda - epsilon).
"""

from fractions import Fraction

import numpy as np

from pwcert import certify, match_cycles
from pwcert.fixtures import m2
from pwcert.pwmap import PiecewiseMap

F = m2()
C = certify(F)
eps = C.epsilon_persist / 2
print(f"persistence radius {float(C.epsilon_persist):.5f}; testing at {float(eps):.5f}")
print(f"bound on cycle displacement: {C.epsilon_star(eps):.5f}")

# %%
# Shift both offsets and the cut by random amounts below eps / 2.
rng = np.random.default_rng(0)
for trial in range(5):
    shift = [Fraction(int(v), 1000) * eps / 2 for v in rng.integers(-999, 1000, size=3)]
    G = PiecewiseMap.affine_1d(
        0, 1, [Fraction(1, 2) + shift[0]],
        [(Fraction(1, 2), Fraction(3, 5) + shift[1]), (Fraction(1, 2), shift[2])],
    )
    CG = certify(G)
    moved = max(m.distance for m in match_cycles(C, CG))
    print(f"trial {trial}: periods {[c.period for c in CG.cycles]}, cycle moved {moved:.5f}")
