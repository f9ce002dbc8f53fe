"""Admissible shapes: how fast the corrector's dilatation dies off, and leftover area."""
from flexweld.shapes import (admissibility, comb_shape, epsilon_bound, leftover_percentage,
                             minimal_T, shape_with_leftover)

for M in (3, 4, 5):
    rep, _ = admissibility(comb_shape(2 * M + 8, 2 * M, 0.5), M, grid=128)
    print(f"M={M}: sup|mu|={rep.measured_sup_dilatation:.3g}  bound e^(-pi(M-1)/2)/M="
          f"{epsilon_bound(M):.3g}  identity error={rep.identity_error:.2g}  leakage={rep.leakage:.2g}")

# the measured dilatation falls much faster than the bound: the shape only
# departs from the identity block at x = 2M, so mu ~ e^(-pi (2M - 1))

eps = 0.05
for a in (0.25, 0.5, 0.9):
    T = minimal_T(eps, a) + 1
    s = shape_with_leftover(eps, a, T)
    print(f"a={a}: T={T:.0f} leftover={leftover_percentage(s):.6f} modulus R={s.R:.2f}")
try:
    shape_with_leftover(eps, 0.5, minimal_T(eps, 0.5) - 1)
except ValueError as exc:
    print("too short:", exc)
