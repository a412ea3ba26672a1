"""Integration by parts on S^2 picks up curvature terms.

The flat-space forms of the sigma_2 identities are compared with the forms
that keep the Ricci contributions of the round sphere.
"""

from quermass.spheregeom import SphereGrid, integral_identities, random_field

grid = SphereGrid.for_lmax(8, oversample=4)
for seed in range(3):
    f = random_field(8, 0.05, seed=seed)
    print(f"field {seed}")
    for c in integral_identities(f, grid):
        print(f"  ({c.name}) lhs={c.lhs:+.3e}  flat err={c.printed_error:.1e}  corrected err={c.corrected_error:.1e}")
