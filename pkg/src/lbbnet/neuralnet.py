"""Location-to-precoder network written directly in numpy.

Pipeline for a batch of locations ``X`` (n, D)::

    x = (X - input_offset) * input_scale
    f = [cos(2 pi x B^T), sin(2 pi x B^T)]          (rff)    | relu(x W0 + b0)  (mlp)
    z = relu(... relu(f W1 + b1) ...) Wq + bq           -> (n, 2A)
    w = (z[:, :A] + 1j z[:, A:]) / max(||z||, 1e-12)

Weights are stored as (fan_in, fan_out) so that a layer is ``x @ W + b``.
Gradients are derived by hand; the head and the correlation cost are
differentiated through their real (stacked) representation.
"""

from __future__ import annotations

import struct
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Tuple

import numpy as np

from .array import ArrayConfig
from .errors import DimensionMismatch, EmptyTrainingSet, FormatError, ZeroNormChannel

NORM_FLOOR = 1e-12
ARCHS = ("rff", "mlp")


@dataclass(frozen=True)
class RffConfig:
    num_frequencies: int = 1000
    sigma: float = 1 / 50.0  # 1/m
    seed: int = 0

    def __post_init__(self):
        if self.num_frequencies < 1:
            raise ValueError("num_frequencies must be >= 1")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")


@dataclass(frozen=True)
class MlpConfig:
    depth: int = 4
    width: int = 512
    output_dim: int = 128

    def __post_init__(self):
        if self.depth < 1 or self.width < 1:
            raise ValueError("depth and width must be >= 1")
        if self.output_dim < 2 or self.output_dim % 2:
            raise ValueError("output_dim must be even")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 100
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    rng_seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")


def rff_features(B: np.ndarray, locations: np.ndarray) -> np.ndarray:
    """[cos(2 pi B l), sin(2 pi B l)] for one location (D,) or a batch (n, D)."""
    proj = 2 * np.pi * (np.asarray(locations, dtype=np.float64) @ np.asarray(B).T)
    return np.concatenate([np.cos(proj), np.sin(proj)], axis=-1)


@dataclass(eq=False)
class RffModel:
    """Network parameters plus everything needed to rebuild the forward map.

    For ``arch == "mlp"`` the fixed RFF layer is replaced by a trainable
    affine layer of width 2R followed by ReLU; ``B`` is then empty.
    """

    arch: str
    array_cfg: ArrayConfig
    rff: RffConfig
    mlp: MlpConfig
    B: np.ndarray
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    input_offset: np.ndarray
    input_scale: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.input_offset)

    @property
    def dtype(self):
        return self.weights[0].dtype

    @property
    def params(self) -> List[np.ndarray]:
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    def copy(self) -> "RffModel":
        return RffModel(self.arch, self.array_cfg, self.rff, self.mlp, self.B.copy(),
                        [W.copy() for W in self.weights], [b.copy() for b in self.biases],
                        self.input_offset.copy(), self.input_scale.copy())

    def astype(self, dtype) -> "RffModel":
        m = self.copy()
        m.weights = [W.astype(dtype) for W in m.weights]
        m.biases = [b.astype(dtype) for b in m.biases]
        return m

    def __call__(self, locations) -> np.ndarray:
        return predict(self, locations)


def layer_sizes(arch: str, dim: int, rff: RffConfig, mlp: MlpConfig) -> List[Tuple[int, int]]:
    feat = 2 * rff.num_frequencies
    sizes = [(dim, feat)] if arch == "mlp" else []
    widths = [feat] + [mlp.width] * (mlp.depth - 1) + [mlp.output_dim]
    sizes += list(zip(widths[:-1], widths[1:]))
    return sizes


def init_model(array_cfg: ArrayConfig, rff: RffConfig, mlp: MlpConfig, dim: int = 2,
               arch: str = "rff", seed: int = 0, input_offset=None, input_scale=None,
               dtype=np.float32) -> RffModel:
    if arch not in ARCHS:
        raise ValueError(f"arch must be one of {ARCHS}")
    if mlp.output_dim != 2 * array_cfg.num_antennas:
        raise ValueError("output_dim must equal 2A")
    if arch == "rff":
        B = np.random.default_rng(rff.seed).normal(0.0, rff.sigma, size=(rff.num_frequencies, dim))
    else:
        B = np.zeros((0, dim))
    rng = np.random.default_rng(seed)
    sizes = layer_sizes(arch, dim, rff, mlp)
    weights, biases = [], []
    for k, (fan_in, fan_out) in enumerate(sizes):
        lim = np.sqrt(6.0 / fan_in)
        if k == len(sizes) - 1:
            lim *= 0.1
        weights.append(rng.uniform(-lim, lim, size=(fan_in, fan_out)).astype(dtype))
        biases.append(np.zeros(fan_out, dtype=dtype))
    offset = np.zeros(dim) if input_offset is None else np.asarray(input_offset, dtype=float)
    scale = np.ones(dim) if input_scale is None else np.asarray(input_scale, dtype=float)
    return RffModel(arch, array_cfg, rff, mlp, B, weights, biases, offset, scale)


# -- forward / backward ---------------------------------------------------


def _inputs(model: RffModel, locations) -> np.ndarray:
    x = np.atleast_2d(np.asarray(locations, dtype=np.float64))
    if x.shape[1] != model.dim:
        raise DimensionMismatch(f"locations have {x.shape[1]} coordinates, model expects {model.dim}")
    x = (x - model.input_offset) * model.input_scale
    if model.arch == "rff":
        return rff_features(model.B, x).astype(model.dtype)
    return x.astype(model.dtype)


def _forward(model: RffModel, locations):
    """Raw 2A head output plus the activations needed by the backward pass."""
    a = _inputs(model, locations)
    acts = [a]
    pre = []
    last = len(model.weights) - 1
    for k, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ W + b
        pre.append(z)
        a = z if k == last else np.maximum(z, 0)
        acts.append(a)
    return a, acts, pre


def _unit_head(v: np.ndarray):
    nrm = np.sqrt(np.sum(v * v, axis=1))
    den = np.maximum(nrm, NORM_FLOOR)
    return v / den[:, None], nrm, den


def raw_output(model: RffModel, locations) -> np.ndarray:
    return _forward(model, locations)[0]


def head(v: np.ndarray) -> np.ndarray:
    """Stacked (n, 2A) reals -> unit-norm complex (n, A); zero rows stay zero."""
    w, _, _ = _unit_head(np.atleast_2d(v))
    a = w.shape[1] // 2
    return w[:, :a] + 1j * w[:, a:]


def predict(model: RffModel, locations) -> np.ndarray:
    """Precoders (n, A) complex128 for a batch of locations."""
    return head(raw_output(model, locations).astype(np.float64))


def forward(model: RffModel, location) -> np.ndarray:
    """Precoder (A,) for a single location."""
    return predict(model, np.asarray(location, dtype=float)[None, :])[0]


def _normalized_channels(channels, dtype):
    h = np.atleast_2d(np.asarray(channels)).astype(np.complex128)
    nrm = np.linalg.norm(h, axis=1)
    if np.any(nrm == 0):
        raise ZeroNormChannel("batch contains a zero-norm channel")
    hn = h / nrm[:, None]
    return hn.real.astype(dtype), hn.imag.astype(dtype)


def _correlations(w, hr, hi):
    a = hr.shape[1]
    wr, wi = w[:, :a], w[:, a:]
    sr = np.sum(wr * hr + wi * hi, axis=1)
    si = np.sum(wr * hi - wi * hr, axis=1)
    return sr, si


def cost(model: RffModel, locations, channels) -> float:
    """Mean misalignment 1 - mean(|w^H h|^2 / ||h||^2) over a batch."""
    hr, hi = _normalized_channels(channels, model.dtype)
    v = raw_output(model, locations)
    w, _, _ = _unit_head(v)
    sr, si = _correlations(w, hr, hi)
    return float(1.0 - np.mean(sr * sr + si * si))


def backward(model: RffModel, locations, channels):
    """Batch cost and its gradient with respect to ``model.params``."""
    hr, hi = _normalized_channels(channels, model.dtype)
    n = hr.shape[0]
    v, acts, pre = _forward(model, locations)
    w, nrm, den = _unit_head(v)
    sr, si = _correlations(w, hr, hi)
    c = 1.0 - np.mean(sr * sr + si * si)

    scale = model.dtype.type(-2.0 / n)
    gw = np.concatenate([sr[:, None] * hr + si[:, None] * hi,
                         sr[:, None] * hi - si[:, None] * hr], axis=1) * scale
    radial = np.sum(w * gw, axis=1)
    live = (nrm > NORM_FLOOR)[:, None]
    g = np.where(live, gw - w * radial[:, None], gw) / den[:, None]

    grads = [None] * (2 * len(model.weights))
    for k in range(len(model.weights) - 1, -1, -1):
        grads[2 * k] = acts[k].T @ g
        grads[2 * k + 1] = g.sum(axis=0)
        if k > 0:
            g = (g @ model.weights[k].T) * (pre[k - 1] > 0)
    return float(c), grads


# -- optimizer --------------------------------------------------------------


@dataclass
class AdamState:
    m: List[np.ndarray]
    v: List[np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(params: List[np.ndarray], grads: List[np.ndarray], state: AdamState,
              cfg: TrainConfig) -> AdamState:
    """Bias-corrected Adam update, applied to ``params`` in place."""
    state.t += 1
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= cfg.learning_rate * (m / c1) / (np.sqrt(v / c2) + cfg.adam_epsilon)
    return state


# -- training ---------------------------------------------------------------


@dataclass
class TrainResult:
    model: RffModel
    epoch_costs: List[float] = field(default_factory=list)
    steps: int = 0
    seconds: float = 0.0


def default_offset(ds, train_idx) -> np.ndarray:
    """Scene centroid when the dataset knows its scene, else the mean training location."""
    offset = ds.locations[train_idx].mean(axis=0)
    scene = ds.get_scene()
    if scene is not None:
        offset[:2] = scene.centroid
    return offset


def train(ds, split, rff_cfg: RffConfig, mlp_cfg: MlpConfig, train_cfg: TrainConfig,
          arch: str = "rff", dtype=np.float32, log=None) -> TrainResult:
    """Minibatch Adam on the misalignment cost over the split's training part."""
    idx = np.asarray(split.train_indices, dtype=np.int64)
    idx = idx[~ds.zero_norm[idx]]
    if len(idx) == 0:
        raise EmptyTrainingSet("no nonzero channels in the training split")
    if train_cfg.batch_size > len(idx):
        raise ValueError(f"batch_size {train_cfg.batch_size} exceeds the {len(idx)} training samples")
    model = init_model(ds.array_cfg, rff_cfg, mlp_cfg, ds.dim, arch=arch,
                       seed=train_cfg.rng_seed, input_offset=default_offset(ds, idx), dtype=dtype)
    X = ds.locations[idx]
    H = ds.channels[idx]
    params = model.params
    state = AdamState.zeros_like(params)
    rng = np.random.default_rng(train_cfg.rng_seed + 1)
    result = TrainResult(model)
    t0 = time.perf_counter()
    for epoch in range(train_cfg.epochs):
        order = rng.permutation(len(idx))
        total = 0.0
        for start in range(0, len(idx), train_cfg.batch_size):
            b = order[start:start + train_cfg.batch_size]
            c, grads = backward(model, X[b], H[b])
            adam_step(params, grads, state, train_cfg)
            total += c * len(b)
            result.steps += 1
        result.epoch_costs.append(total / len(idx))
        if log is not None:
            log(f"epoch {epoch + 1}/{train_cfg.epochs} cost {result.epoch_costs[-1]:.5f}")
    result.seconds = time.perf_counter() - t0
    return result


# -- model file ---------------------------------------------------------------

MODEL_MAGIC = b"LBBM"
MODEL_VERSION = 1
_MHEAD = struct.Struct("<4sIBBIIddIdqIII")
_DTYPES = {4: np.dtype("<f4"), 8: np.dtype("<f8")}


def model_to_bytes(model: RffModel) -> bytes:
    """Serialize header, configs, B (f64) and layers (row-major, model dtype)."""
    dt = np.dtype(model.dtype).newbyteorder("<")
    cfg = model.array_cfg
    parts = [_MHEAD.pack(
        MODEL_MAGIC, MODEL_VERSION, ARCHS.index(model.arch), dt.itemsize, model.dim,
        cfg.antennas_per_side, cfg.carrier_frequency, cfg.element_spacing,
        model.rff.num_frequencies, model.rff.sigma, model.rff.seed,
        model.mlp.depth, model.mlp.width, model.mlp.output_dim)]
    parts.append(np.asarray(model.input_offset, "<f8").tobytes())
    parts.append(np.asarray(model.input_scale, "<f8").tobytes())
    parts.append(struct.pack("<I", model.B.shape[0]))
    parts.append(np.ascontiguousarray(model.B, "<f8").tobytes())
    parts.append(struct.pack("<I", len(model.weights)))
    for W, b in zip(model.weights, model.biases):
        parts.append(struct.pack("<II", *W.shape))
        parts.append(np.ascontiguousarray(W, dt).tobytes())
        parts.append(np.ascontiguousarray(b, dt).tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise DimensionMismatch("model file is truncated")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        s = struct.Struct(fmt)
        return s.unpack(self.take(s.size))

    def array(self, dtype, shape):
        dtype = np.dtype(dtype)
        count = int(np.prod(shape))
        return np.frombuffer(self.take(count * dtype.itemsize), dtype=dtype).reshape(shape).copy()


def model_from_bytes(buf: bytes) -> RffModel:
    if len(buf) < 4 or buf[:4] != MODEL_MAGIC:
        raise FormatError("not an LBBM file (bad magic)")
    r = _Reader(buf)
    (_, version, arch, itemsize, dim, side, carrier, spacing, R, sigma, rseed,
     depth, width, out_dim) = r.unpack(_MHEAD.format)
    if version != MODEL_VERSION:
        raise FormatError(f"unsupported LBBM version {version}")
    if arch >= len(ARCHS) or itemsize not in _DTYPES or dim not in (2, 3):
        raise FormatError("corrupt LBBM header")
    dt = _DTYPES[itemsize]
    cfg = ArrayConfig(side, carrier, spacing)
    rff = RffConfig(R, sigma, rseed)
    mlp = MlpConfig(depth, width, out_dim)
    offset = r.array("<f8", (dim,))
    scale = r.array("<f8", (dim,))
    (nb,) = r.unpack("<I")
    B = r.array("<f8", (nb, dim))
    (nl,) = r.unpack("<I")
    expected = layer_sizes(ARCHS[arch], dim, rff, mlp)
    if nl != len(expected):
        raise DimensionMismatch(f"{nl} layers stored, configuration implies {len(expected)}")
    weights, biases = [], []
    for shape in expected:
        stored = r.unpack("<II")
        if tuple(stored) != shape:
            raise DimensionMismatch(f"layer shape {stored} disagrees with configuration {shape}")
        weights.append(r.array(dt, shape).astype(dt.newbyteorder("=")))
        biases.append(r.array(dt, (shape[1],)).astype(dt.newbyteorder("=")))
    if r.pos != len(buf):
        raise DimensionMismatch("trailing bytes after the last layer")
    return RffModel(ARCHS[arch], cfg, rff, mlp, B, weights, biases, offset, scale)


def save_model(model: RffModel, path) -> None:
    Path(path).write_bytes(model_to_bytes(model))


def load_model(path) -> RffModel:
    return model_from_bytes(Path(path).read_bytes())
