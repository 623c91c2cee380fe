"""Training the location-to-precoder network with and without Fourier features.

The network maps a user position to a unit-norm precoder.  With random
Fourier features the position first passes through fixed sinusoids of
random spatial frequencies; the plain variant learns that first layer
instead.  Both minimize one minus the mean correlation with the channel.
"""

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from lbbnet import neuralnet as nn
from lbbnet.array import ArrayConfig
from lbbnet.dataset import Split, build_dataset
from lbbnet.precoders import evaluate
from lbbnet.scene import default_scene

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

scene = default_scene()
cfg = ArrayConfig(4, 3.5e9)
train_ds = build_dataset(scene, cfg, 4000, seed=1)
test_ds = build_dataset(scene, cfg, 2000, seed=101)
everything = Split(np.arange(len(train_ds)), np.zeros(0, int), np.zeros(0, int))

rff = nn.RffConfig(num_frequencies=256, sigma=1 / 100, seed=1)
mlp = nn.MlpConfig(depth=4, width=128, output_dim=2 * cfg.num_antennas)
tc = nn.TrainConfig(epochs=50, batch_size=100, rng_seed=1)

fig, ax = plt.subplots(figsize=(6, 3.5))
for arch in ("rff", "mlp"):
    res = nn.train(train_ds, everything, rff, mlp, tc, arch=arch)
    rep = evaluate(res.model, test_ds)
    print(f"{arch}: {res.steps} steps in {res.seconds:.1f} s, final cost "
          f"{res.epoch_costs[-1]:.3f}, test median {rep.median:.3f}")
    ax.plot(np.arange(1, tc.epochs + 1), res.epoch_costs, label=arch)
    nn.save_model(res.model, OUT / f"desk_{arch}.lbbm")

ax.set_xlabel("epoch")
ax.set_ylabel("training cost")
ax.legend()
fig.tight_layout()
fig.savefig(OUT / "training_cost.png", dpi=120)
print("wrote", OUT / "training_cost.png")

# The saved model reproduces its predictions exactly.
model = nn.load_model(OUT / "desk_rff.lbbm")
print("precoder at (100, 75):", np.round(nn.forward(model, [100.0, 75.0]), 3))
