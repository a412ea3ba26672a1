"""Compensated deficits over a family of small axisymmetric perturbations.

The ratio deficit / Dirichlet energy is the number the theory only bounds
abstractly; here we simply look at how small it gets.
"""

import warnings

from quermass.stability import NormalizationNotice, deficit_compensated, random_axisym_family, sweep

warnings.simplefilter("ignore", NormalizationNotice)

fam = random_axisym_family(size=30, n=5, c1=0.02, seed=0)
for k in (1, 2):
    reps = sweep(fam, lambda p: deficit_compensated(p, k))
    ratios = sorted(r.ratio for r in reps)
    print(f"k={k}: min deficit {min(r.deficit for r in reps):.3e}, "
          f"ratio min {ratios[0]:.3f} median {ratios[len(ratios) // 2]:.3f}")
