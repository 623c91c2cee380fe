"""Procedural 2.5D urban scenes and a specular image-method ray model.

Buildings are axis-aligned footprints extruded to infinite height, so every
obstruction and reflection test happens in the ground plane; the vertical
coordinate only enters through the unfolded path length and the departure
elevation.  Exterior building walls and the four scene boundary walls reflect
with a per-wall amplitude reflectivity.

Tracing is vectorized over users: :func:`trace_many` evaluates every candidate
(LOS, each wall, each ordered wall pair) for all users at once and keeps the
valid ones.  :func:`trace_paths` is the single-user view of the same code.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path as FsPath
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .array import ArrayConfig, Direction, steering_vectors
from .errors import SceneError, SceneFull, UserInsideBuilding

SCHEMA_VERSION = 1

# Shrink applied to footprints in obstruction tests so that legs starting or
# ending on a wall are not blocked by the wall's own building.
_EDGE_TOL = 1e-7


@dataclass(frozen=True)
class Building:
    xmin: float
    ymin: float
    xmax: float
    ymax: float
    reflectivity: float = 0.6

    def __post_init__(self):
        if not (self.xmin < self.xmax and self.ymin < self.ymax):
            raise SceneError(f"degenerate building footprint {self}")
        if not 0.0 <= self.reflectivity <= 1.0:
            raise SceneError("building reflectivity must lie in [0, 1]")

    @property
    def rect(self) -> Tuple[float, float, float, float]:
        return (self.xmin, self.ymin, self.xmax, self.ymax)

    def contains(self, x, y):
        return (x >= self.xmin) & (x <= self.xmax) & (y >= self.ymin) & (y <= self.ymax)

    def interior(self, x, y):
        return (x > self.xmin) & (x < self.xmax) & (y > self.ymin) & (y < self.ymax)


@dataclass
class Scene:
    bounds: Tuple[float, float, float, float]
    buildings: List[Building] = field(default_factory=list)
    bs_position: Tuple[float, float] = (0.0, 0.0)
    bs_height: float = 6.0
    user_height: float = 1.5
    max_paths: int = 5
    max_bounces: int = 2
    boundary_reflectivity: float = 0.6

    def __post_init__(self):
        self.bounds = tuple(float(v) for v in self.bounds)
        self.bs_position = tuple(float(v) for v in self.bs_position)
        self.buildings = [b if isinstance(b, Building) else Building(*b) for b in self.buildings]
        x0, y0, x1, y1 = self.bounds
        if not (x0 < x1 and y0 < y1):
            raise SceneError("scene bounds must have positive area")
        for b in self.buildings:
            if b.xmin < x0 or b.ymin < y0 or b.xmax > x1 or b.ymax > y1:
                raise SceneError(f"building {b.rect} extends outside the scene bounds")
        bx, by = self.bs_position
        if not (x0 <= bx <= x1 and y0 <= by <= y1):
            raise SceneError("base station lies outside the scene bounds")
        # a base station may sit on a facade, but not inside a footprint
        if any(b.interior(bx, by) for b in self.buildings):
            raise SceneError("base station lies inside a building")
        if int(self.max_paths) != self.max_paths or self.max_paths < 1:
            raise SceneError("max_paths must be a positive integer")
        if self.max_bounces not in (0, 1, 2):
            raise SceneError("max_bounces must be 0, 1 or 2")
        if not 0.0 <= self.boundary_reflectivity <= 1.0:
            raise SceneError("boundary_reflectivity must lie in [0, 1]")

    @property
    def centroid(self) -> np.ndarray:
        x0, y0, x1, y1 = self.bounds
        return np.array([(x0 + x1) / 2, (y0 + y1) / 2])

    def inside_building(self, points) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        inside = np.zeros(len(p), dtype=bool)
        for b in self.buildings:
            inside |= b.contains(p[:, 0], p[:, 1])
        return inside

    def in_bounds(self, points) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        x0, y0, x1, y1 = self.bounds
        return (p[:, 0] >= x0) & (p[:, 0] <= x1) & (p[:, 1] >= y0) & (p[:, 1] <= y1)

    def free_area(self) -> float:
        """Bounds area minus the union of building footprints."""
        x0, y0, x1, y1 = self.bounds
        total = (x1 - x0) * (y1 - y0)
        if not self.buildings:
            return total
        xs = np.unique([v for b in self.buildings for v in (b.xmin, b.xmax)])
        ys = np.unique([v for b in self.buildings for v in (b.ymin, b.ymax)])
        cx = (xs[:-1] + xs[1:]) / 2
        cy = (ys[:-1] + ys[1:]) / 2
        gx, gy = np.meshgrid(cx, cy, indexing="ij")
        covered = self.inside_building(np.column_stack([gx.ravel(), gy.ravel()])).reshape(gx.shape)
        cell = np.outer(np.diff(xs), np.diff(ys))
        return total - float(cell[covered].sum())

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "bounds": list(self.bounds),
            "buildings": [{"rect": list(b.rect), "reflectivity": b.reflectivity}
                          for b in self.buildings],
            "bs_position": list(self.bs_position),
            "bs_height": self.bs_height,
            "user_height": self.user_height,
            "max_paths": int(self.max_paths),
            "max_bounces": int(self.max_bounces),
            "boundary_reflectivity": self.boundary_reflectivity,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scene":
        version = d.get("schema_version")
        if version != SCHEMA_VERSION:
            raise SceneError(f"unsupported scene schema_version {version!r}")
        try:
            buildings = [Building(*b["rect"], reflectivity=b.get("reflectivity", 0.6))
                         for b in d.get("buildings", [])]
            return cls(
                bounds=tuple(d["bounds"]),
                buildings=buildings,
                bs_position=tuple(d["bs_position"]),
                bs_height=float(d.get("bs_height", 6.0)),
                user_height=float(d.get("user_height", 1.5)),
                max_paths=int(d.get("max_paths", 5)),
                max_bounces=int(d.get("max_bounces", 2)),
                boundary_reflectivity=float(d.get("boundary_reflectivity", 0.6)),
            )
        except (KeyError, TypeError) as exc:
            raise SceneError(f"malformed scene description: {exc}") from exc


def load_scene(path) -> Scene:
    try:
        text = FsPath(path).read_text()
    except OSError:
        raise
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneError(f"scene file is not valid JSON: {exc}") from exc
    return Scene.from_dict(d)


def save_scene(scene: Scene, path) -> None:
    FsPath(path).write_text(json.dumps(scene.to_dict(), indent=2) + "\n")


def default_scene() -> Scene:
    """The shipped 200 x 150 m desk scene."""
    text = resources.files("lbbnet.data").joinpath("desk_scene.json").read_text()
    return Scene.from_dict(json.loads(text))


# -- walls --------------------------------------------------------------


@dataclass(frozen=True)
class Wall:
    p0: np.ndarray
    p1: np.ndarray
    normal: np.ndarray  # unit normal pointing to the reflecting side
    reflectivity: float


def scene_walls(scene: Scene) -> List[Wall]:
    """Exterior building walls followed by the four boundary walls."""
    walls = []

    def add(p0, p1, n, g):
        walls.append(Wall(np.array(p0, float), np.array(p1, float), np.array(n, float), g))

    for b in scene.buildings:
        g = b.reflectivity
        add((b.xmin, b.ymin), (b.xmax, b.ymin), (0, -1), g)
        add((b.xmax, b.ymin), (b.xmax, b.ymax), (1, 0), g)
        add((b.xmin, b.ymax), (b.xmax, b.ymax), (0, 1), g)
        add((b.xmin, b.ymin), (b.xmin, b.ymax), (-1, 0), g)
    x0, y0, x1, y1 = scene.bounds
    g = scene.boundary_reflectivity
    add((x0, y0), (x1, y0), (0, 1), g)
    add((x1, y0), (x1, y1), (-1, 0), g)
    add((x0, y1), (x1, y1), (0, -1), g)
    add((x0, y0), (x0, y1), (1, 0), g)
    return walls


def _side(points, wall: Wall):
    return (points - wall.p0) @ wall.normal


def _mirror(points, wall: Wall):
    return points - 2.0 * _side(points, wall)[..., None] * wall.normal


def _hit(src, dst, wall: Wall):
    """Intersection of segments src->dst with the wall line, plus the
    position along the wall (0..1 inside the segment)."""
    ds = _side(src, wall)
    dd = _side(dst, wall)
    denom = ds - dd
    with np.errstate(divide="ignore", invalid="ignore"):
        t = ds / denom
        p = src + t[..., None] * (dst - src)
    e = wall.p1 - wall.p0
    s = ((p - wall.p0) @ e) / (e @ e)
    return p, s


def segments_blocked(a, b, rects) -> np.ndarray:
    """True where segment a->b passes through the interior of any rectangle.

    ``a``, ``b`` are (n, 2); ``rects`` is a sequence of (xmin, ymin, xmax, ymax).
    """
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    d = b - a
    blocked = np.zeros(len(a), dtype=bool)
    for r in rects:
        lo = np.array([r[0], r[1]]) + _EDGE_TOL
        hi = np.array([r[2], r[3]]) - _EDGE_TOL
        tmin = np.zeros(len(a))
        tmax = np.ones(len(a))
        ok = np.ones(len(a), dtype=bool)
        for k in range(2):
            dk = d[:, k]
            par = np.abs(dk) < 1e-15
            ok &= ~(par & ((a[:, k] <= lo[k]) | (a[:, k] >= hi[k])))
            with np.errstate(divide="ignore", invalid="ignore"):
                t1 = (lo[k] - a[:, k]) / dk
                t2 = (hi[k] - a[:, k]) / dk
            tn = np.where(par, -np.inf, np.minimum(t1, t2))
            tf = np.where(par, np.inf, np.maximum(t1, t2))
            tmin = np.maximum(tmin, tn)
            tmax = np.minimum(tmax, tf)
        blocked |= ok & (tmin < tmax)
    return blocked


# -- tracing ------------------------------------------------------------


@dataclass(frozen=True)
class Path:
    length: float
    bounces: int
    departure: Direction
    gain: complex
    points: Tuple[Tuple[float, float], ...] = ()  # ground-plane reflection points


@dataclass
class _Candidates:
    """Flat arrays of valid candidate paths across all users."""

    user: list = field(default_factory=list)
    length2d: list = field(default_factory=list)
    gamma: list = field(default_factory=list)
    launch: list = field(default_factory=list)  # 2D first-leg vector
    bounces: list = field(default_factory=list)
    points: list = field(default_factory=list)  # (k, 4) reflection points, NaN padded

    def add(self, user, length2d, gamma, launch, bounces, pts):
        if len(user) == 0:
            return
        n = len(user)
        self.user.append(user)
        self.length2d.append(length2d)
        self.gamma.append(np.full(n, gamma, dtype=float))
        self.launch.append(launch)
        self.bounces.append(np.full(n, bounces, dtype=np.int64))
        padded = np.full((n, 4), np.nan)
        padded[:, : pts.shape[1]] = pts
        self.points.append(padded)


@dataclass
class TraceResult:
    """Selected paths for a batch of users, stored flat and grouped by user.

    Rows of every array are sorted by user index, then by descending gain.
    """

    n_users: int
    user: np.ndarray
    length: np.ndarray
    bounces: np.ndarray
    azimuth: np.ndarray
    elevation: np.ndarray
    gain: np.ndarray
    points: np.ndarray
    los: np.ndarray  # (n_users,) bool, direct path present

    def paths_for(self, i: int) -> List[Path]:
        rows = np.flatnonzero(self.user == i)
        out = []
        for r in rows:
            pts = self.points[r]
            pts = tuple((float(pts[2 * k]), float(pts[2 * k + 1])) for k in range(int(self.bounces[r])))
            out.append(Path(float(self.length[r]), int(self.bounces[r]),
                            Direction(float(self.azimuth[r]), float(self.elevation[r])),
                            complex(self.gain[r]), pts))
        return out

    def channels(self, cfg: ArrayConfig) -> np.ndarray:
        """(n_users, A) complex128 channels; users without paths get zeros."""
        h = np.zeros((self.n_users, cfg.num_antennas), dtype=complex)
        if len(self.user):
            a = steering_vectors(cfg, self.azimuth, self.elevation)
            np.add.at(h, self.user, self.gain[:, None] * a)
        return h


def _user_heights(scene: Scene, users: np.ndarray) -> np.ndarray:
    if users.shape[1] == 3:
        return users[:, 2].astype(float)
    return np.full(len(users), scene.user_height)


def trace_many(scene: Scene, cfg: ArrayConfig, users, check: bool = True) -> TraceResult:
    """Trace all users at once.  ``users`` is (n, 2) or (n, 3) with z as height."""
    users = np.atleast_2d(np.asarray(users, dtype=float))
    if users.shape[1] not in (2, 3):
        raise ValueError("user locations must have 2 or 3 coordinates")
    n = len(users)
    u2 = users[:, :2]
    if check:
        bad = scene.inside_building(u2)
        if bad.any():
            raise UserInsideBuilding(f"user {users[np.argmax(bad)]} lies inside a building")
        if not scene.in_bounds(u2).all():
            raise ValueError("user location outside the scene bounds")
    rects = [b.rect for b in scene.buildings]
    s = np.asarray(scene.bs_position, dtype=float)
    cand = _Candidates()
    idx = np.arange(n)

    # direct path
    d = u2 - s
    ok = ~segments_blocked(np.broadcast_to(s, u2.shape), u2, rects)
    ok &= np.hypot(d[:, 0], d[:, 1]) > 0
    cand.add(idx[ok], np.hypot(d[ok, 0], d[ok, 1]), 1.0, d[ok], 0, np.empty((ok.sum(), 0)))
    los = ok.copy()

    walls = scene_walls(scene) if scene.max_bounces >= 1 else []
    s_side = [float(_side(s, w)) for w in walls]
    user_side = [_side(u2, w) for w in walls]

    for wi, w in enumerate(walls):
        if s_side[wi] <= 0 or w.reflectivity == 0:
            continue
        img = _mirror(s, w)
        sel = idx[user_side[wi] > 0]
        if not len(sel):
            continue
        p, t = _hit(np.broadcast_to(img, (len(sel), 2)), u2[sel], w)
        good = (t >= 0) & (t <= 1)
        sel, p = sel[good], p[good]
        src = np.broadcast_to(s, p.shape)
        good = ~segments_blocked(src, p, rects) & ~segments_blocked(p, u2[sel], rects)
        sel, p = sel[good], p[good]
        length = np.linalg.norm(u2[sel] - img, axis=1)
        cand.add(sel, length, w.reflectivity, p - s, 1, p)

    if scene.max_bounces >= 2:
        for w1i, w1 in enumerate(walls):
            if s_side[w1i] <= 0 or w1.reflectivity == 0:
                continue
            img1 = _mirror(s, w1)
            for w2i, w2 in enumerate(walls):
                if w2i == w1i or w2.reflectivity == 0:
                    continue
                # the first reflection must face the second wall's reflecting side
                if np.dot(w1.normal, w2.normal) > 1 - 1e-12:
                    continue
                img2 = _mirror(img1, w2)
                sel = idx[user_side[w2i] > 0]
                if not len(sel):
                    continue
                p2, t2 = _hit(np.broadcast_to(img2, (len(sel), 2)), u2[sel], w2)
                good = (t2 >= 0) & (t2 <= 1)
                sel, p2 = sel[good], p2[good]
                if not len(sel):
                    continue
                good = _side(p2, w1) > 0
                sel, p2 = sel[good], p2[good]
                if not len(sel):
                    continue
                p1, t1 = _hit(np.broadcast_to(img1, p2.shape), p2, w1)
                good = (t1 >= 0) & (t1 <= 1) & (_side(p1, w2) > 0)
                sel, p1, p2 = sel[good], p1[good], p2[good]
                if not len(sel):
                    continue
                src = np.broadcast_to(s, p1.shape)
                good = ~segments_blocked(src, p1, rects)
                good &= ~segments_blocked(p1, p2, rects)
                good &= ~segments_blocked(p2, u2[sel], rects)
                sel, p1, p2 = sel[good], p1[good], p2[good]
                length = np.linalg.norm(u2[sel] - img2, axis=1)
                cand.add(sel, length, w1.reflectivity * w2.reflectivity, p1 - s, 2,
                         np.hstack([p1, p2]))

    return _select(scene, cfg, users, cand, los)


def _select(scene, cfg, users, cand: _Candidates, los) -> TraceResult:
    n = len(users)
    lam = cfg.wavelength
    if cand.user:
        user = np.concatenate(cand.user)
        l2 = np.concatenate(cand.length2d)
        gamma = np.concatenate(cand.gamma)
        launch = np.concatenate(cand.launch)
        bounces = np.concatenate(cand.bounces)
        pts = np.concatenate(cand.points)
    else:
        user = np.zeros(0, dtype=np.int64)
        l2 = gamma = np.zeros(0)
        launch = np.zeros((0, 2))
        bounces = np.zeros(0, dtype=np.int64)
        pts = np.zeros((0, 4))
    dh = _user_heights(scene, users)[user] - scene.bs_height
    length = np.sqrt(l2 ** 2 + dh ** 2)
    amp = lam * gamma / (4 * np.pi * length)
    # stable order: user, then descending amplitude, then candidate order
    order = np.lexsort((-amp, user))
    user, length, amp, launch, bounces, pts, l2, dh = (
        user[order], length[order], amp[order], launch[order], bounces[order], pts[order],
        l2[order], dh[order])
    # rank within each user's group
    starts = np.searchsorted(user, np.arange(n))
    rank = np.arange(len(user)) - starts[user] if len(user) else np.zeros(0, dtype=np.int64)
    keep = (rank < scene.max_paths) & (amp > 0)
    user, length, amp, launch, bounces, pts, l2, dh = (
        user[keep], length[keep], amp[keep], launch[keep], bounces[keep], pts[keep],
        l2[keep], dh[keep])
    az = np.arctan2(launch[:, 1], launch[:, 0])
    az = np.where(az == -np.pi, np.pi, az)
    el = np.arctan2(dh, l2)
    # length/lam is ~1e3 cycles; reduce before the exponential to keep phase accuracy
    cycles = np.mod(length / lam, 1.0)
    gain = amp * np.exp(-2j * np.pi * cycles)
    return TraceResult(n, user, length, bounces, az, el, gain, pts, los)


def trace_paths(scene: Scene, cfg: ArrayConfig, user) -> List[Path]:
    """Paths from the base station to one user, strongest first."""
    return trace_many(scene, cfg, np.asarray(user, dtype=float)[None, :]).paths_for(0)


def synthesize_channel(paths: Sequence[Path], cfg: ArrayConfig) -> np.ndarray:
    """Sum of path gains times steering vectors; zero vector for no paths."""
    h = np.zeros(cfg.num_antennas, dtype=complex)
    for p in paths:
        h = h + p.gain * steering_vectors(cfg, p.departure.azimuth, p.departure.elevation)
    return h


def user_channels(scene: Scene, cfg: ArrayConfig, users) -> Tuple[np.ndarray, np.ndarray]:
    """Channels (n, A) and LOS flags (n,) for a batch of user locations."""
    res = trace_many(scene, cfg, users)
    return res.channels(cfg), res.los


# -- user sampling ------------------------------------------------------


def grid_points(scene: Scene, pitch: float):
    """Regular lattice over the scene bounds.

    Returns ``(xs, ys, points)`` where ``points`` is (len(ys)*len(xs), 2) in
    row-major order over (y, x).
    """
    if not pitch > 0:
        raise ValueError("grid pitch must be positive")
    x0, y0, x1, y1 = scene.bounds
    nx = int(np.floor((x1 - x0) / pitch + 1e-9)) + 1
    ny = int(np.floor((y1 - y0) / pitch + 1e-9)) + 1
    xs = x0 + pitch * np.arange(nx)
    ys = y0 + pitch * np.arange(ny)
    gx, gy = np.meshgrid(xs, ys)
    return xs, ys, np.column_stack([gx.ravel(), gy.ravel()])


def sample_users(scene: Scene, n: Optional[int] = None, rng_seed: int = 0,
                 grid_pitch: Optional[float] = None) -> np.ndarray:
    """User locations outside all buildings.

    Random mode draws ``n`` points uniformly over the free area.  Grid mode
    (``grid_pitch`` given) returns every free lattice point and ignores ``n``.
    """
    if scene.free_area() <= 0:
        raise SceneFull("no free area left outside the buildings")
    if grid_pitch is not None:
        _, _, pts = grid_points(scene, grid_pitch)
        return pts[~scene.inside_building(pts)]
    if n is None or n < 1:
        raise ValueError("n must be >= 1")
    x0, y0, x1, y1 = scene.bounds
    rng = np.random.default_rng(rng_seed)
    out = np.empty((0, 2))
    while len(out) < n:
        m = max(2 * (n - len(out)), 64)
        pts = np.column_stack([rng.uniform(x0, x1, m), rng.uniform(y0, y1, m)])
        pts = pts[~scene.inside_building(pts)]
        # the base station spot itself has an undefined LOS direction
        pts = pts[np.any(pts != np.asarray(scene.bs_position), axis=1)]
        out = np.vstack([out, pts])
    return out[:n]
