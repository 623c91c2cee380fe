"""Comparing precoders by their correlation with the true channel.

The direction baseline points a beam along the straight line to the user.
That is optimal with a clear line of sight and poor behind buildings, where
energy arrives by reflection.  The learned model knows nothing about
geometry but has seen channels near every position.  Run 04_training.py
first to produce the model file.
"""

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from lbbnet import neuralnet as nn
from lbbnet.array import ArrayConfig
from lbbnet.dataset import build_dataset
from lbbnet.precoders import capacity, direction_precoder, evaluate, spatial_channels, spatial_map
from lbbnet.scene import default_scene

OUT = Path(__file__).parent / "out"
scene = default_scene()
cfg = ArrayConfig(4, 3.5e9)
model = nn.load_model(OUT / "desk_rff.lbbm")
test_ds = build_dataset(scene, cfg, 2000, seed=101)

reports = {"direction": evaluate(direction_precoder(scene, cfg), test_ds),
           "rff": evaluate(model, test_ds)}
fig, ax = plt.subplots(figsize=(6, 3.5))
for name, rep in reports.items():
    print(f"{name:9s} median {rep.median:.3f} mean {rep.mean:.3f}  "
          f"capacity at 20 dB {capacity(rep.median, 100.0):.2f} bit/s/Hz")
    ax.step(rep.cdf_x, rep.cdf_y, where="post", label=name)
    rep.write_cdf_csv(OUT / f"cdf_{name}.csv")
ax.set_xlabel("correlation")
ax.set_ylabel("CDF")
ax.legend()
fig.tight_layout()
fig.savefig(OUT / "correlation_cdf.png", dpi=120)

# Coverage maps on a 2 m lattice; black cells are buildings or have no path.
chans = spatial_channels(scene, cfg, 2.0)
for name, fn in (("direction", direction_precoder(scene, cfg)), ("rff", model)):
    m = spatial_map(fn, scene, cfg, 2.0, channels=chans)
    print(f"{name:9s} mean over streets with a direct path {m.region_mean(m.los & ~m.inside):.3f}, "
          f"behind buildings {m.region_mean(m.nlos):.3f}")
    m.write_svg(OUT / f"map_{name}.svg")
print("wrote CDFs and maps to", OUT)
