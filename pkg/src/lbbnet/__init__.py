"""Location-based beamforming: learn user location -> massive-MIMO precoder."""

__version__ = "0.1.0"
DATASET_FORMAT_VERSION = 1
MODEL_FORMAT_VERSION = 1
