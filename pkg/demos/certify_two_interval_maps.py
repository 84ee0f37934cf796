"""
Certifying limit cycles of two interval maps
============================================

Both maps below send the unit interval into itself with slope 1/2 on each
half. The first has two attracting fixed points. The second has a single
attracting orbit of period two.
"""

from pwcert import certify, emit_certificate
from pwcert.fixtures import m1, m2

# %%
# A map with two fixed points
# ---------------------------
# Pieces are [0, 1/2) and [1/2, 1]; the maps are x/2 + 1/10 and x/2 + 2/5.
F = m1()
C = certify(F)
print(f"k0 = {C.k0}, d = {C.d}")
for cycle in C.cycles:
    print(f"period {cycle.period}, word {cycle.word_cycle}, points {cycle.points}")

# %%
# Every point of [0, 1] converges to one of these two fixed points, and the
# separation distance d says how far the orbits stay from the cut at 1/2.
print(f"any map within {float(C.epsilon_persist):.4f} keeps the same cycles")

# %%
# A period-two orbit
# ------------------
# Offsets 0.6 and 0 swap the two halves, so the only attractor is 0.4 <-> 0.8.
G = m2()
C2 = certify(G)
(orbit,) = C2.cycles
print(f"k0 = {C2.k0}, d = {C2.d}, period {orbit.period}, points {orbit.points}")

# %%
# The certificate serializes to deterministic JSON.
print(emit_certificate(C2, G))
