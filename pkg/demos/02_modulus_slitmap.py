"""Moduli of quadrilaterals and annuli, harmonic measure in rectangles, and slit maps."""
import numpy as np

from flexweld.core_geom import MarkedQuadrilateral, circle_polyline, rectangle_quad
from flexweld.modulus import annulus_modulus, quad_modulus, quad_uniformize, rect_harmonic_measure
from flexweld.slitmap import (SlitMapConfig, build_E, disk_sandwich, interior_deviation,
                              sector_quads, slit_map)

print("rectangle 3x1:", quad_modulus(rectangle_quad(3.0)).modulus)

L = MarkedQuadrilateral.from_sides([0, 2], [2, 2 + 1j], [2 + 1j, 1 + 1j, 1 + 2j], [1 + 2j, 2j, 0])
m = quad_modulus(L).modulus
print("L-shape:", m, " swapped * original:", m * quad_modulus(L.swapped()).modulus)

for ratio in (2.0, 10.0):
    got = annulus_modulus(circle_polyline(1, 256), circle_polyline(ratio, 256)).modulus
    print(f"annulus 1<|z|<{ratio}: {got:.6f} vs log(R)/2pi = {np.log(ratio) / (2 * np.pi):.6f}")

# conformal coordinates of the L-shape, as a table
T = quad_uniformize(L)
print("L-shape image of (1.5, 0.5):", T.forward(1.5 + 0.5j)[0], "residual", T.residual)

for Lr in (2, 3, 4):
    w = rect_harmonic_measure(Lr)
    print(f"harmonic measure L={Lr}: {w:.5f} in [{np.exp(-np.pi * Lr / 2):.5f}, "
          f"{8 / np.pi * np.exp(-np.pi * Lr / 2):.5f}]")

# %% slit map: N tiny arcs opened into radial slits
N, A = 16, 20.0
sd = slit_map(build_E(N, A), SlitMapConfig(N, A, N, 0.5 / N))
print({k: sd.checks[k] for k in ("argument_monotone", "calibration_max")})
print("disk sandwich", disk_sandwich(sd))
print("interior deviation from identity", interior_deviation(sd))
r = [q.ratio for q in sector_quads(sd)]
print("sector modulus over pi N |dx| / A: %.3f .. %.3f" % (min(r), max(r)))
