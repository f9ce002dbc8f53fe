"""Logarithmic capacity of arc sets, and the log-singular inputs built from it."""
import numpy as np

from flexweld.core_geom import ArcSet, TWO_PI
from flexweld.logcap import (capacity, capacity_segment, equilibrium_measure, far_set_capacity,
                             koebe_boundary_samples, make_log_singular_homeo,
                             panel_midpoint_potential)

# %% closed forms first: a segment has capacity length/4, an arc of angle a has sin(a/4)
print("segment [0,1]   ", capacity_segment(0, 1))
for a in (np.pi, 0.1, 1e-6):
    print(f"arc of angle {a:<8.3g}", capacity(ArcSet.from_arcs([(0, a)])).capacity, np.sin(a / 4))

# %% the equilibrium potential is flat on the set
mu = equilibrium_measure(ArcSet.from_arcs([(0, 1), (2, 2.5)]), 16)
g = panel_midpoint_potential(mu)
print("potential on the set: min %.4f max %.4f" % (g.min(), g.max()))

# %% N tiny arcs spread evenly: the preimage of one arc under z^N
N, w = 16, 1e-9
E = ArcSet.from_centers(TWO_PI * (np.arange(N) + 0.5) / N, np.full(N, w))
print("robin of N arcs", capacity(E, 8).robin, "closed form", -np.log(np.sin(N * w / 4)) / N)

# %% a piecewise-linear homeomorphism squeezing a small set onto almost everything
for level in (1, 2, 3):
    h, cert = make_log_singular_homeo(level, seed=0)
    print(f"level {level}: cap(E)={cert.cap_E:.3g} cap(h(E^c))={cert.cap_image_complement:.3g} "
          f"valid={cert.valid} breakpoints={h.theta.size}")

# %% far parts of a slit-plane boundary: capacity decays like R^-1/2
samples = koebe_boundary_samples()
Rs = np.array([4.0, 16.0, 64.0, 256.0])
caps = np.array([far_set_capacity(samples, 1.0, R)[1] for R in Rs])
print("cap(E_R)", caps, "slope", np.polyfit(np.log(Rs), np.log(caps), 1)[0])
