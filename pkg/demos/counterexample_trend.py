"""Packing dimples on S^3 drags I_1 below the round value.

Each bump has C^1 size eps, so the surface stays close to the sphere, yet the
odd-order curvature integral keeps falling as the bumps shrink and multiply.
"""

from quermass.counterexample import assemble_counterexample, dirichlet_sigma_integral, make_bump

n, k, eps = 3, 1, 0.3

print("single bump, value * kappa^(n-k) should not move:")
for kappa in (8, 16, 32, 64):
    d = dirichlet_sigma_integral(make_bump(eps, kappa), k, n)
    print(f"  kappa={kappa:>3}  value={d.value:.4e}  scaled={d.value * kappa ** (n - k):.6e}")

print("\nassembled surface:")
for kappa in (16, 32, 64, 128):
    c = assemble_counterexample(n, k, eps, kappa)
    print(f"  kappa={kappa:>3}  caps={c.q:>7}  I_1={c.I_k:.4f}  minus baseline={c.margin:+.4f}")
