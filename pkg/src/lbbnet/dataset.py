"""Labeled (location, channel) databases and their on-disk format.

Binary layout (all little-endian)::

    b"LBBD" | version u32 | A u32 | D u32 | N u64 | carrier f64
    N records of [D x f64 location | A x f32 real parts | A x f32 imag parts]
    optional trailer: b"META" | u32 length | UTF-8 JSON

The trailer carries what the fixed header cannot (element spacing,
provenance, generator seed, source scene).  Readers that stop after the
records still see a complete dataset.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .array import ArrayConfig
from .errors import DimensionMismatch, FormatError, RowCountMismatch
from .scene import Scene, sample_users, trace_many

MAGIC = b"LBBD"
VERSION = 1
_HEADER = struct.Struct("<4sIIIQd")
_TRAILER_MAGIC = b"META"


def _record_dtype(a: int, d: int) -> np.dtype:
    return np.dtype([("loc", "<f8", (d,)), ("re", "<f4", (a,)), ("im", "<f4", (a,))])


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """N (location, channel) pairs.

    ``locations`` is (N, D) float64 in meters and ``channels`` is (N, A)
    complex64, the precision the file format stores.
    """

    array_cfg: ArrayConfig
    locations: np.ndarray
    channels: np.ndarray
    provenance: str = ""
    seed: Optional[int] = None
    scene: Optional[dict] = None

    def __post_init__(self):
        loc = np.ascontiguousarray(self.locations, dtype=np.float64)
        ch = np.ascontiguousarray(self.channels, dtype=np.complex64)
        if loc.ndim != 2 or loc.shape[1] not in (2, 3):
            raise DimensionMismatch("locations must be (N, D) with D in {2, 3}")
        if ch.ndim != 2 or ch.shape[1] != self.array_cfg.num_antennas:
            raise DimensionMismatch(
                f"channels must be (N, {self.array_cfg.num_antennas})")
        if len(loc) != len(ch):
            raise RowCountMismatch("location and channel counts differ")
        if len(loc) < 1:
            raise ValueError("a dataset needs at least one record")
        loc.setflags(write=False)
        ch.setflags(write=False)
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "channels", ch)

    def __len__(self):
        return len(self.locations)

    @property
    def dim(self) -> int:
        return self.locations.shape[1]

    @property
    def records(self):
        return list(zip(self.locations, self.channels))

    @property
    def zero_norm(self) -> np.ndarray:
        return ~np.any(self.channels != 0, axis=1)

    def get_scene(self) -> Optional[Scene]:
        return Scene.from_dict(self.scene) if self.scene else None

    def subset(self, indices) -> "LabeledDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(self.array_cfg, self.locations[idx], self.channels[idx],
                              self.provenance, self.seed, self.scene)

    def equals(self, other: "LabeledDataset") -> bool:
        """Field-by-field, bit-exact comparison."""
        return (self.array_cfg == other.array_cfg
                and self.provenance == other.provenance
                and self.seed == other.seed
                and self.scene == other.scene
                and self.locations.shape == other.locations.shape
                and self.channels.shape == other.channels.shape
                and self.locations.tobytes() == other.locations.tobytes()
                and self.channels.tobytes() == other.channels.tobytes())


@dataclass(frozen=True)
class Split:
    train_indices: np.ndarray
    test_indices: np.ndarray
    excluded_indices: np.ndarray  # zero-norm records, in neither part


def build_dataset(scene: Scene, array_cfg: ArrayConfig, n: int, seed: int) -> LabeledDataset:
    users = sample_users(scene, n, seed)
    channels = trace_many(scene, array_cfg, users).channels(array_cfg)
    return LabeledDataset(array_cfg, users, channels, provenance="scene", seed=seed,
                          scene=scene.to_dict())


def to_bytes(ds: LabeledDataset) -> bytes:
    a = ds.array_cfg.num_antennas
    d = ds.dim
    n = len(ds)
    rec = np.empty(n, dtype=_record_dtype(a, d))
    rec["loc"] = ds.locations
    rec["re"] = ds.channels.real
    rec["im"] = ds.channels.imag
    meta = {
        "antennas_per_side": ds.array_cfg.antennas_per_side,
        "element_spacing": ds.array_cfg.element_spacing,
        "provenance": ds.provenance,
        "seed": ds.seed,
        "scene": ds.scene,
    }
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    return b"".join([
        _HEADER.pack(MAGIC, VERSION, a, d, n, ds.array_cfg.carrier_frequency),
        rec.tobytes(),
        _TRAILER_MAGIC, struct.pack("<I", len(blob)), blob,
    ])


def from_bytes(buf: bytes) -> LabeledDataset:
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise FormatError("not an LBBD file (bad magic)")
    if len(buf) < _HEADER.size:
        raise DimensionMismatch("file shorter than the LBBD header")
    _, version, a, d, n, carrier = _HEADER.unpack_from(buf)
    if version != VERSION:
        raise FormatError(f"unsupported LBBD version {version}")
    if d not in (2, 3) or a < 1 or n < 1:
        raise FormatError(f"invalid header dimensions A={a} D={d} N={n}")
    dt = _record_dtype(a, d)
    end = _HEADER.size + n * dt.itemsize
    if len(buf) < end:
        raise DimensionMismatch(
            f"payload holds {len(buf) - _HEADER.size} bytes, header implies {n * dt.itemsize}")
    rec = np.frombuffer(buf, dtype=dt, count=n, offset=_HEADER.size)
    meta = {}
    rest = buf[end:]
    if rest:
        if len(rest) < 8 or rest[:4] != _TRAILER_MAGIC:
            raise FormatError("unrecognized bytes after the LBBD records")
        (length,) = struct.unpack_from("<I", rest, 4)
        if len(rest) != 8 + length:
            raise DimensionMismatch("metadata trailer length disagrees with the file size")
        try:
            meta = json.loads(rest[8:].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError(f"corrupt metadata trailer: {exc}") from exc
    side = meta.get("antennas_per_side") or math.isqrt(a)
    if side * side != a:
        raise FormatError(f"A={a} is not a square array size")
    cfg = ArrayConfig(side, carrier, meta.get("element_spacing"))
    channels = rec["re"].astype(np.complex64)
    channels.imag = rec["im"]
    return LabeledDataset(cfg, rec["loc"].copy(), channels,
                          provenance=meta.get("provenance", ""), seed=meta.get("seed"),
                          scene=meta.get("scene"))


def save(ds: LabeledDataset, path) -> None:
    Path(path).write_bytes(to_bytes(ds))


def load(path) -> LabeledDataset:
    return from_bytes(Path(path).read_bytes())


def split(ds: LabeledDataset, test_fraction: float, seed: int) -> Split:
    """Random train/test partition of the records with nonzero channels."""
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie strictly between 0 and 1")
    zero = ds.zero_norm
    valid = np.flatnonzero(~zero)
    perm = np.random.default_rng(seed).permutation(valid)
    n_test = int(round(test_fraction * len(valid)))
    if len(valid) >= 2:
        n_test = min(max(n_test, 1), len(valid) - 1)
    return Split(np.sort(perm[n_test:]), np.sort(perm[:n_test]), np.flatnonzero(zero))


def ingest_external(channel_file, location_file, array_cfg: ArrayConfig) -> LabeledDataset:
    """Read comma-separated channel and location rows exported by another tool.

    Channel rows hold 2A floats (all real parts, then all imaginary parts);
    location rows hold D floats.  Row i of both files describes the same user.
    """
    ch = _read_csv(channel_file)
    loc = _read_csv(location_file)
    if len(ch) != len(loc):
        raise RowCountMismatch(f"{len(ch)} channel rows vs {len(loc)} location rows")
    a = array_cfg.num_antennas
    if ch.shape[1] != 2 * a:
        raise DimensionMismatch(f"channel rows hold {ch.shape[1]} values, expected {2 * a}")
    if loc.shape[1] not in (2, 3):
        raise DimensionMismatch(f"location rows hold {loc.shape[1]} values, expected 2 or 3")
    channels = (ch[:, :a] + 1j * ch[:, a:]).astype(np.complex64)
    return LabeledDataset(array_cfg, loc, channels, provenance="external")


def _read_csv(path) -> np.ndarray:
    rows = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            vals = [float(v) for v in line.split(",")]
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise DimensionMismatch(f"{path}:{lineno}: {len(vals)} values, expected {width}")
            rows.append(vals)
    if not rows:
        raise RowCountMismatch(f"{path} holds no rows")
    return np.asarray(rows, dtype=np.float64)
