"""One welding step between two circles, and why longer runs stop.

Writes step_0.svg and step_1.svg into demo-out/.
"""
from pathlib import Path

from flexweld.core_geom import CircleHomeo
from flexweld.logcap import make_log_singular_homeo
from flexweld.weld_iter import concentric_config, run

out = Path("demo-out")
out.mkdir(exist_ok=True)

# %% a rotation weld between |z| = 1 and |z| = 400, eight leaves
cfg = concentric_config(CircleHomeo.rotation(0.1), 1.0, 400.0, steps=1, samples=256,
                        eps_seq=(0.5,), N_schedule=(8,))
trace = run(cfg)
step = trace.steps[-1]
print("shrink t", step["t"], "ratio", step["shrink_ratio"])
print("dilatation K", step["ledger"]["K"], "budget", step["ledger"]["budget"])
print("extension error, own chart", step["extension_error_chart"])
print("area ratio", step["area_ratio"], "Robin parameters", step["A"])
for k in range(len(trace.annuli)):
    (out / f"step_{k}.svg").write_text(trace.to_svg(k))

# %% the generated log-singular input at level 3: the exterior angles cluster,
# the sector quads get long, and the slit arcs would need widths ~ e^-165
h, cert = make_log_singular_homeo(3, seed=0)
cfg = concentric_config(h, 1.0, 40.0, steps=3, samples=512, certificate=cert, N_schedule=(16,))
trace = run(cfg)
print("log-singular run:", trace.failure)
