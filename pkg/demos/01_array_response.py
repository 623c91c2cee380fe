"""Steering vectors of the square planar array and the beam they form.

The array sits in the y-z plane and looks along +x.  A steering vector
holds the per-antenna phase of a plane wave leaving in a given direction;
using its normalized version as the precoder gives full array gain toward
that direction and much less elsewhere.
"""

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from lbbnet.array import ArrayConfig, Direction, element_positions, steering_vector, steering_vectors

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

cfg = ArrayConfig(antennas_per_side=8, carrier_frequency=3.5e9)
print(f"{cfg.num_antennas} antennas, wavelength {cfg.wavelength * 100:.2f} cm, "
      f"spacing {cfg.element_spacing * 100:.2f} cm")

pos = element_positions(cfg)
print("first and last element positions [m]:", pos[0], pos[-1])

# Broadside: every antenna sees the same phase.
a = steering_vector(cfg, Direction(0.0, 0.0))
print("broadside entries all 1:", np.allclose(a, 1))

# Point a beam at 30 degrees azimuth, 10 degrees down, and scan the pattern.
target = Direction(np.radians(30), np.radians(-10))
w = steering_vector(cfg, target) / np.sqrt(cfg.num_antennas)

az = np.radians(np.linspace(-90, 90, 721))
pattern = np.abs(steering_vectors(cfg, az, np.full_like(az, target.elevation)) @ w.conj()) ** 2
pattern /= cfg.num_antennas
print(f"gain toward the target {pattern.max():.3f} of A at "
      f"{np.degrees(az[np.argmax(pattern)]):.2f} deg")

fig, ax = plt.subplots(figsize=(6, 3.5))
ax.plot(np.degrees(az), 10 * np.log10(np.maximum(pattern, 1e-4)))
ax.axvline(30, color="k", lw=0.5)
ax.set_xlabel("azimuth [deg]")
ax.set_ylabel("normalized gain [dB]")
ax.set_ylim(-40, 1)
ax.set_title("8 x 8 array steered to 30 deg azimuth")
fig.tight_layout()
fig.savefig(OUT / "beam_pattern.png", dpi=120)
print("wrote", OUT / "beam_pattern.png")
