"""Building, saving, splitting and importing (location, channel) databases."""

import tempfile
from pathlib import Path

import numpy as np

from lbbnet import dataset as dsmod
from lbbnet.array import ArrayConfig
from lbbnet.scene import default_scene

cfg = ArrayConfig(4, 3.5e9)
ds = dsmod.build_dataset(default_scene(), cfg, 1000, seed=1)
print(f"{len(ds)} records, {ds.dim}-D locations, {cfg.num_antennas} antennas, "
      f"{ds.zero_norm.sum()} users without any path")

tmp = Path(tempfile.mkdtemp())
dsmod.save(ds, tmp / "desk.lbbd")
size = (tmp / "desk.lbbd").stat().st_size
back = dsmod.load(tmp / "desk.lbbd")
print(f"saved {size} bytes, reload identical: {back.equals(ds)}")

# Users without a path carry no information for training; the split keeps them aside.
sp = dsmod.split(ds, test_fraction=0.5, seed=0)
print(f"train {len(sp.train_indices)}, test {len(sp.test_indices)}, "
      f"excluded {len(sp.excluded_indices)}")

# Channels measured or simulated elsewhere come in as two CSV files:
# rows of [real parts, imaginary parts] and rows of coordinates.
live = np.flatnonzero(~ds.zero_norm)[:5]
np.savetxt(tmp / "h.csv", np.hstack([ds.channels[live].real, ds.channels[live].imag]), delimiter=",")
np.savetxt(tmp / "loc.csv", ds.locations[live], delimiter=",")
ext = dsmod.ingest_external(tmp / "h.csv", tmp / "loc.csv", cfg)
print(f"imported {len(ext)} external records, provenance {ext.provenance!r}, "
      f"max difference {np.abs(ext.channels - ds.channels[live]).max():.1e}")
