"""Multipath channels from the image-method tracer on the shipped desk scene.

Buildings are full-height boxes.  Each user gets its direct path if nothing
blocks it, plus wall reflections of first and second order.  The strongest
few paths are summed into the channel vector.
"""

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
from matplotlib.patches import Rectangle

from lbbnet.array import ArrayConfig
from lbbnet.scene import default_scene, sample_users, trace_many, trace_paths, user_channels

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

scene = default_scene()
cfg = ArrayConfig(4, 3.5e9)
print(f"scene {scene.bounds}, {len(scene.buildings)} buildings, BS at {scene.bs_position}, "
      f"free area {scene.free_area():.0f} m^2")

# A user in an open street and one tucked behind the first building.
users = np.array([[30.0, 120.0], [90.0, 80.0]])
for u in users:
    print(f"\nuser at {tuple(u)}")
    for p in trace_paths(scene, cfg, u):
        d = p.departure
        print(f"  {p.bounces} bounce(s)  length {p.length:7.2f} m  |gain| {abs(p.gain):.2e}  "
              f"az {np.degrees(d.azimuth):7.2f}  el {np.degrees(d.elevation):6.2f}")

h, los = user_channels(scene, cfg, users)
print("\nchannel norms:", np.linalg.norm(h, axis=1), "direct path:", los)

# Share of users with a direct path, with reflections only, or with nothing at all.
pts = sample_users(scene, 3000, rng_seed=0)
res = trace_many(scene, cfg, pts)
n_paths = np.bincount(res.user, minlength=len(pts))
print(f"\ndirect path {res.los.mean():.1%}, reflections only "
      f"{((n_paths > 0) & ~res.los).mean():.1%}, no path {(n_paths == 0).mean():.1%}")

fig, ax = plt.subplots(figsize=(7, 5.5))
for b in scene.buildings:
    ax.add_patch(Rectangle((b.xmin, b.ymin), b.xmax - b.xmin, b.ymax - b.ymin, color="0.6"))
colors = np.where(res.los, "tab:green", np.where(n_paths > 0, "tab:orange", "tab:red"))
ax.scatter(pts[:, 0], pts[:, 1], s=2, c=colors)
for u in users:
    for p in trace_paths(scene, cfg, u):
        xy = np.array([scene.bs_position, *p.points, u])
        ax.plot(xy[:, 0], xy[:, 1], lw=0.8, color="k")
ax.plot(*scene.bs_position, "r^", ms=10)
ax.set_xlim(scene.bounds[0], scene.bounds[2])
ax.set_ylim(scene.bounds[1], scene.bounds[3])
ax.set_aspect("equal")
ax.set_title("green: direct path, orange: reflections only, red: no path")
fig.tight_layout()
fig.savefig(OUT / "scene_paths.png", dpi=120)
print("wrote", OUT / "scene_paths.png")
