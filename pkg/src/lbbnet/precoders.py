"""Precoders, the correlation metric, and evaluation reports.

A precoder function maps a batch of locations (n, D) to precoders (n, A).
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from typing import Callable, List, Sequence

import numpy as np

from .array import ArrayConfig, steering_vectors
from .errors import DegenerateGeometry, ZeroNormChannel
from .scene import Scene, grid_points, trace_many

PrecoderFn = Callable[[np.ndarray], np.ndarray]


def correlation(w, h) -> float:
    """|w^H h|^2 / ||h||^2."""
    h = np.asarray(h)
    hh = np.vdot(h, h).real
    if hh == 0:
        raise ZeroNormChannel("correlation is undefined for a zero channel")
    return float(abs(np.vdot(w, h)) ** 2 / hh)


def correlations(W, H) -> np.ndarray:
    """Row-wise correlation for (n, A) precoders and channels."""
    W = np.atleast_2d(W).astype(np.complex128)
    H = np.atleast_2d(H).astype(np.complex128)
    hh = np.sum(np.abs(H) ** 2, axis=1)
    if np.any(hh == 0):
        raise ZeroNormChannel("correlation is undefined for a zero channel")
    return np.abs(np.sum(W.conj() * H, axis=1)) ** 2 / hh


def capacity(eta, snr_opt):
    """Single-user spectral efficiency log2(1 + eta * snr_opt) in bits/s/Hz."""
    return np.log2(1.0 + np.asarray(eta) * np.asarray(snr_opt))


def direction_lbb(array_cfg: ArrayConfig, bs_position, bs_height: float, users,
                  user_height: float = 1.5) -> np.ndarray:
    """Normalized steering vector toward the geometric user direction.

    ``users`` may be a single location or (n, D); with D = 3 the third
    coordinate overrides ``user_height``.
    """
    u = np.asarray(users, dtype=float)
    single = u.ndim == 1
    u = np.atleast_2d(u)
    dz = (u[:, 2] if u.shape[1] == 3 else np.full(len(u), user_height)) - bs_height
    d = u[:, :2] - np.asarray(bs_position, dtype=float)
    ground = np.hypot(d[:, 0], d[:, 1])
    if np.any(ground == 0):
        raise DegenerateGeometry("user coincides with the base station ground position")
    az = np.arctan2(d[:, 1], d[:, 0])
    el = np.arctan2(dz, ground)
    w = steering_vectors(array_cfg, az, el) / np.sqrt(array_cfg.num_antennas)
    return w[0] if single else w


def direction_precoder(scene: Scene, array_cfg: ArrayConfig) -> PrecoderFn:
    def fn(locations):
        return direction_lbb(array_cfg, scene.bs_position, scene.bs_height,
                             np.atleast_2d(locations), scene.user_height)
    return fn


def oracle_precoders(H) -> np.ndarray:
    """w = h / ||h|| (zero rows stay zero)."""
    H = np.atleast_2d(H).astype(np.complex128)
    n = np.linalg.norm(H, axis=1, keepdims=True)
    return np.divide(H, n, out=np.zeros_like(H), where=n > 0)


def orthogonal_precoders(H) -> np.ndarray:
    """Unit-norm precoders with w^H h = 0 (needs A >= 2)."""
    H = np.atleast_2d(H).astype(np.complex128)
    if H.shape[1] < 2:
        raise ValueError("an orthogonal precoder needs at least two antennas")
    W = np.zeros_like(H)
    W[:, 0] = -np.conj(H[:, 1])
    W[:, 1] = np.conj(H[:, 0])
    n = np.linalg.norm(W, axis=1)
    W[n == 0, 0] = 1.0
    n[n == 0] = 1.0
    return W / n[:, None]


# -- reports ----------------------------------------------------------------


def median(x) -> float:
    """Sample median; even sizes average the two central order statistics."""
    s = np.sort(np.asarray(x, dtype=float))
    if s.size == 0:
        return float("nan")
    k = s.size // 2
    return float(s[k]) if s.size % 2 else float((s[k - 1] + s[k]) / 2)


def empirical_cdf(x):
    """Distinct sorted values and the right-continuous CDF at each of them."""
    s = np.sort(np.asarray(x, dtype=float))
    if s.size == 0:
        return s, s
    vals, counts = np.unique(s, return_counts=True)
    return vals, np.cumsum(counts) / s.size


@dataclass
class EvalReport:
    eta: np.ndarray
    indices: np.ndarray  # dataset rows behind each eta value
    excluded_count: int = 0
    cdf_x: np.ndarray = field(default=None)
    cdf_y: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.cdf_x is None:
            self.cdf_x, self.cdf_y = empirical_cdf(self.eta)

    @property
    def median(self) -> float:
        return median(self.eta)

    @property
    def mean(self) -> float:
        return float(np.mean(self.eta)) if self.eta.size else float("nan")

    def summary(self) -> dict:
        return {"median": self.median, "mean": self.mean, "count": int(self.eta.size),
                "excluded_count": int(self.excluded_count)}

    def write_cdf_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["eta", "cdf"])
            for x, y in zip(self.cdf_x, self.cdf_y):
                wr.writerow([repr(float(x)), repr(float(y))])

    def write_values_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["index", "eta"])
            order = np.argsort(self.eta, kind="stable")
            for i in order:
                wr.writerow([int(self.indices[i]), repr(float(self.eta[i]))])

    def write_summary_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def report_from(W, H, indices=None) -> EvalReport:
    """Report for given precoders and channels; zero channels are counted, not scored."""
    H = np.atleast_2d(H)
    W = np.atleast_2d(W)
    idx = np.arange(len(H)) if indices is None else np.asarray(indices)
    live = np.any(H != 0, axis=1)
    eta = correlations(W[live], H[live]) if live.any() else np.zeros(0)
    return EvalReport(eta, idx[live], int((~live).sum()))


def evaluate(precoder_fn: PrecoderFn, ds, indices=None) -> EvalReport:
    """Score ``precoder_fn`` on dataset rows ``indices`` (all rows by default)."""
    idx = np.arange(len(ds)) if indices is None else np.asarray(indices, dtype=np.int64)
    if idx.size == 0:
        raise ValueError("indices must be non-empty")
    H = ds.channels[idx]
    live = np.any(H != 0, axis=1)
    W = np.zeros(H.shape, dtype=complex)
    if live.any():
        W[live] = precoder_fn(ds.locations[idx[live]])
    return report_from(W, H, idx)


# -- spatial maps -----------------------------------------------------------


@dataclass
class SpatialMap:
    """Correlation on a regular lattice; NaN marks no-data cells.

    Arrays are (len(ys), len(xs)).  ``inside`` flags lattice points inside
    buildings, ``zero`` flags points with no propagation path and ``los``
    flags points with a direct path.
    """

    xs: np.ndarray
    ys: np.ndarray
    eta: np.ndarray
    inside: np.ndarray
    zero: np.ndarray
    los: np.ndarray
    bs_position: tuple = (0.0, 0.0)

    @property
    def cells(self) -> int:
        return self.eta.size

    @property
    def nlos(self) -> np.ndarray:
        return ~self.inside & ~self.zero & ~self.los

    def region_mean(self, mask) -> float:
        vals = self.eta[mask & ~np.isnan(self.eta)]
        return float(vals.mean()) if vals.size else float("nan")

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["x", "y", "eta", "los"])
            for j, y in enumerate(self.ys):
                for i, x in enumerate(self.xs):
                    e = self.eta[j, i]
                    wr.writerow([repr(float(x)), repr(float(y)),
                                 "" if np.isnan(e) else repr(float(e)), int(self.los[j, i])])

    def to_svg(self, cell_px: int = 4) -> str:
        return heatmap_svg(self.eta, self.xs, self.ys, self.bs_position, cell_px)

    def write_svg(self, path, cell_px: int = 4) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_svg(cell_px))


def spatial_channels(scene: Scene, array_cfg: ArrayConfig, pitch: float):
    """Trace fresh channels at every free lattice point."""
    xs, ys, pts = grid_points(scene, pitch)
    inside = scene.inside_building(pts)
    at_bs = np.all(pts == np.asarray(scene.bs_position), axis=1)
    free = ~inside & ~at_bs
    H = np.zeros((len(pts), array_cfg.num_antennas), dtype=complex)
    los = np.zeros(len(pts), dtype=bool)
    if free.any():
        res = trace_many(scene, array_cfg, pts[free], check=False)
        H[free] = res.channels(array_cfg)
        los[free] = res.los
    return xs, ys, pts, H, inside | at_bs, los


def spatial_map(precoder_fn: PrecoderFn, scene: Scene, array_cfg: ArrayConfig,
                grid_pitch: float, channels=None) -> SpatialMap:
    """Correlation of ``precoder_fn`` over a lattice covering the scene.

    ``channels`` may pass a precomputed :func:`spatial_channels` result so
    several precoders can share one tracing pass.
    """
    xs, ys, pts, H, blocked, los = channels or spatial_channels(scene, array_cfg, grid_pitch)
    zero = ~np.any(H != 0, axis=1) & ~blocked
    live = ~blocked & ~zero
    eta = np.full(len(pts), np.nan)
    if live.any():
        eta[live] = correlations(precoder_fn(pts[live]), H[live])
    shape = (len(ys), len(xs))
    return SpatialMap(xs, ys, eta.reshape(shape), blocked.reshape(shape), zero.reshape(shape),
                      los.reshape(shape), tuple(scene.bs_position))


def colormap(v) -> tuple:
    """Linear blue (0) -> yellow (1); NaN -> black."""
    if v is None or np.isnan(v):
        return (0, 0, 0)
    t = float(np.clip(v, 0.0, 1.0))
    return (int(round(255 * t)), int(round(255 * t)), int(round(255 * (1 - t))))


def heatmap_svg(eta, xs, ys, bs_position=None, cell_px: int = 4) -> str:
    """Raster SVG of a (len(ys), len(xs)) grid, +y pointing up, BS as a red cross."""
    ny, nx = eta.shape
    w, h = nx * cell_px, ny * cell_px
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
           f'viewBox="0 0 {w} {h}" shape-rendering="crispEdges">']
    for j in range(ny):
        row = ny - 1 - j
        for i in range(nx):
            r, g, b = colormap(eta[j, i])
            out.append(f'<rect x="{i * cell_px}" y="{row * cell_px}" width="{cell_px}" '
                       f'height="{cell_px}" fill="#{r:02x}{g:02x}{b:02x}"/>')
    if bs_position is not None and nx > 1 and ny > 1:
        px = (bs_position[0] - xs[0]) / (xs[-1] - xs[0]) * (nx - 1) * cell_px + cell_px / 2
        py = (ny - 1 - (bs_position[1] - ys[0]) / (ys[-1] - ys[0]) * (ny - 1)) * cell_px + cell_px / 2
        s = 3 * cell_px
        out.append(f'<path d="M{px - s:.1f} {py - s:.1f} L{px + s:.1f} {py + s:.1f} '
                   f'M{px - s:.1f} {py + s:.1f} L{px + s:.1f} {py - s:.1f}" '
                   f'stroke="#ff0000" stroke-width="{max(1, cell_px // 2)}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# -- training-set size sweep ------------------------------------------------


@dataclass
class SweepRow:
    n: int
    median: float
    mean: float
    train_seconds: float


def n_sweep(scene: Scene, array_cfg: ArrayConfig, n_values: Sequence[int], eval_size: int,
            seed: int = 0, rff_cfg=None, mlp_cfg=None, train_cfg=None, arch: str = "rff",
            log=None) -> List[SweepRow]:
    """Train one model per training-set size and score all on one held-out set.

    The evaluation set is drawn with ``seed``; the training set for size N is
    drawn with ``seed + 1 + position``, so the rows differ only through training.
    """
    from .dataset import build_dataset, Split
    from .neuralnet import MlpConfig, RffConfig, TrainConfig, train

    if not len(n_values):
        raise ValueError("n_values must be non-empty")
    rff_cfg = rff_cfg or RffConfig()
    mlp_cfg = mlp_cfg or MlpConfig(output_dim=2 * array_cfg.num_antennas)
    train_cfg = train_cfg or TrainConfig()
    eval_ds = build_dataset(scene, array_cfg, eval_size, seed)
    rows = []
    for k, n in enumerate(n_values):
        ds = build_dataset(scene, array_cfg, int(n), seed + 1 + k)
        sp = Split(np.arange(len(ds)), np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64))
        cfg = train_cfg
        n_live = int((~ds.zero_norm).sum())
        if cfg.batch_size > n_live:
            cfg = type(cfg)(**{**cfg.__dict__, "batch_size": n_live})
        t0 = time.perf_counter()
        res = train(ds, sp, rff_cfg, mlp_cfg, cfg, arch=arch)
        secs = time.perf_counter() - t0
        rep = evaluate(res.model, eval_ds)
        rows.append(SweepRow(int(n), rep.median, rep.mean, secs))
        if log is not None:
            log(f"N={n}: median {rep.median:.4f} mean {rep.mean:.4f} ({secs:.1f} s)")
    return rows


def write_sweep_csv(rows: Sequence[SweepRow], path, include_seconds: bool = True) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        header = ["N", "median_eta", "mean_eta"] + (["train_seconds"] if include_seconds else [])
        wr.writerow(header)
        for r in rows:
            vals = [r.n, repr(r.median), repr(r.mean)]
            if include_seconds:
                vals.append(f"{r.train_seconds:.3f}")
            wr.writerow(vals)
