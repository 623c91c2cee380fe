"""How many measured channels does the network need?

One model is trained per database size and all are scored on the same
held-out users.  Small databases already beat the direction baseline; the
gain flattens once the scene is densely covered.
"""

import numpy as np

from lbbnet import neuralnet as nn
from lbbnet.array import ArrayConfig
from lbbnet.precoders import n_sweep
from lbbnet.scene import default_scene

cfg = ArrayConfig(4, 3.5e9)
rows = n_sweep(default_scene(), cfg, [250, 500, 1000, 2000, 4000], eval_size=2000, seed=0,
               rff_cfg=nn.RffConfig(256, 1 / 100, seed=0),
               mlp_cfg=nn.MlpConfig(4, 128, 2 * cfg.num_antennas),
               train_cfg=nn.TrainConfig(epochs=50, batch_size=100, rng_seed=0),
               log=print)
med = np.array([r.median for r in rows])
print("median gain from smallest to largest database:", round(float(med[-1] - med[0]), 3))
