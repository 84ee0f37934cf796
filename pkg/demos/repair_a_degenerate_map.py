"""
Repairing a map whose orbit lands on a cut
==========================================

With offsets 1/4 and 3/10 the left branch maps 1/2 onto itself, so the fixed
point sits exactly on the boundary between the pieces. No depth of refinement
separates the atoms from the cut. A small move of the cut fixes that.
"""

from pwcert import certify, is_epsilon_perturbation, repair
from pwcert.fixtures import m3

F = m3()
R = certify(F, k_max=32)
print(f"status ok={R.ok}, tried up to k={R.k_max_tried}, closest approach {R.min_distance_seen}")

# %%
# Repair within an epsilon budget
# -------------------------------
# The repaired map G differs from F only in where the cut sits.
eps = "0.04"
result = repair(F, eps)
for axis, old, new in result.moved_faces:
    print(f"axis {axis}: cut {float(old)} -> {float(new)}")
print("epsilon-perturbation:", is_epsilon_perturbation(F, result.G, eps).verdict)

# %%
# G certifies, and its single fixed point is 0.6 on the right branch.
CG = result.certificate
for cycle in CG.cycles:
    print(f"period {cycle.period}, point {cycle.points[0][0]:.12f}")
