"""Initial motor plans from traces or images.

Recorded traces are reduced to a handful of significant vertices with
discrete curve evolution and turned into a default-parameter plan.
For plain images, a luminance/edge importance map is stippled with
weighted Lloyd relaxation and the resulting points are chained into a
single drawing path by a nearest-neighbor + 2-opt tour.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .model import MotorPlan, VirtualTarget
from .render import RasterImage

LLOYD_MIN_ITERS = 30
LLOYD_TOL_PX = 0.1
TWO_OPT_MAX_MOVES = 10_000


@dataclass
class Polyline:
    """Ordered 2D points in pixels, with optional per-point timestamps."""

    points: np.ndarray
    times: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)
        if len(self.points) < 2:
            raise ValueError("a polyline needs at least 2 points")
        if not np.all(np.isfinite(self.points)):
            raise ValueError("polyline coordinates must be finite")
        if self.times is not None:
            self.times = np.asarray(self.times, dtype=float).reshape(-1)
            if len(self.times) != len(self.points):
                raise ValueError("one timestamp per point required")

    def __len__(self) -> int:
        return len(self.points)


# ---------------------------------------------------------------------------
# Discrete curve evolution
# ---------------------------------------------------------------------------

def _relevance(prev: np.ndarray, vert: np.ndarray, nxt: np.ndarray) -> float:
    """Turn angle weighted by the harmonic mean of the adjacent lengths."""
    u = vert - prev
    w = nxt - vert
    l1 = float(np.hypot(*u))
    l2 = float(np.hypot(*w))
    if l1 == 0.0 or l2 == 0.0:
        return 0.0
    cosb = np.clip(np.dot(u, w) / (l1 * l2), -1.0, 1.0)
    beta = float(np.arccos(cosb))
    return beta * l1 * l2 / (l1 + l2)


def dce_simplify(line: Polyline, m_target: int) -> Polyline:
    """Discrete curve evolution down to m_target + 1 vertices.

    Repeatedly removes the interior vertex with the least relevance
    (turn angle times a length factor); endpoints are never touched,
    so the output is a subsequence of the input.
    """
    keep = max(m_target + 1, 0)
    if keep < 3:
        raise ValueError("m_target + 1 must be at least 3")
    if keep > len(line):
        raise ValueError(
            f"cannot keep {keep} vertices from a {len(line)}-point polyline")
    pts = line.points
    idx = list(range(len(pts)))
    scores = [None] + [
        _relevance(pts[idx[i - 1]], pts[idx[i]], pts[idx[i + 1]])
        for i in range(1, len(idx) - 1)
    ] + [None]
    while len(idx) > keep:
        interior = range(1, len(idx) - 1)
        drop = min(interior, key=lambda i: scores[i])
        del idx[drop], scores[drop]
        for i in (drop - 1, drop):
            if 0 < i < len(idx) - 1:
                scores[i] = _relevance(pts[idx[i - 1]], pts[idx[i]], pts[idx[i + 1]])
    times = line.times[idx] if line.times is not None else None
    return Polyline(points=pts[idx], times=times)


def plan_from_polyline(line: Polyline) -> MotorPlan:
    """Default-parameter plan visiting the polyline vertices.

    First point becomes the start position, the rest become virtual
    targets with unit offsets and durations, zero turning angle and a
    mildly skewed profile; heights start at zero.
    """
    pts3 = np.hstack([line.points, np.zeros((len(line), 1))])
    strokes = [VirtualTarget(p=p) for p in pts3[1:]]
    return MotorPlan(p0=pts3[0], strokes=strokes)


# ---------------------------------------------------------------------------
# Importance map, stippling, tour
# ---------------------------------------------------------------------------

def importance_map(img: RasterImage) -> RasterImage:
    """Darkness/edge proxy for where ink should go, rescaled to [0, 1]."""
    data = img.data
    gx = ndimage.sobel(data, axis=1, mode="reflect")
    gy = ndimage.sobel(data, axis=0, mode="reflect")
    edges = np.hypot(gx, gy)
    if edges.max() > 0:
        edges = edges / edges.max()
    combined = 0.5 * (1.0 - data) + 0.5 * edges
    lo, hi = combined.min(), combined.max()
    if hi > lo:
        combined = (combined - lo) / (hi - lo)
    else:
        combined = np.zeros_like(combined)
    return RasterImage.from_array(combined)


def _weighted_centroids(points: np.ndarray, coords: np.ndarray,
                        mass: np.ndarray) -> np.ndarray:
    """Move each point to the density-weighted centroid of its cell.

    Cells are discrete: every pixel belongs to its nearest point.
    Points whose cell carries no mass stay where they are.
    """
    owner = cKDTree(points).query(coords)[1]
    k = len(points)
    msum = np.bincount(owner, weights=mass, minlength=k)
    cx = np.bincount(owner, weights=mass * coords[:, 0], minlength=k)
    cy = np.bincount(owner, weights=mass * coords[:, 1], minlength=k)
    out = points.copy()
    ok = msum > 0
    out[ok, 0] = cx[ok] / msum[ok]
    out[ok, 1] = cy[ok] / msum[ok]
    return out


def _lloyd(density: np.ndarray, points: np.ndarray,
           max_iters: int = LLOYD_MIN_ITERS,
           tol: float = LLOYD_TOL_PX) -> tuple[np.ndarray, list[float]]:
    """Relax until the iteration budget is spent or movement stalls."""
    h, w = density.shape
    ys, xs = np.mgrid[0:h, 0:w]
    coords = np.column_stack([xs.ravel() + 0.5, ys.ravel() + 0.5])
    mass = density.ravel()
    residuals = []
    for _ in range(max_iters):
        moved = _weighted_centroids(points, coords, mass)
        residual = float(np.max(np.hypot(*(moved - points).T)))
        residuals.append(residual)
        points = moved
        if residual < tol:
            break
    return points, residuals


def voronoi_stipple(map_img: RasterImage, k: int, seed: int) -> np.ndarray:
    """k stipple points matching the importance map density.

    Initial points are rejection-sampled from the map, then relaxed
    with weighted Lloyd iterations on the pixel grid.  Deterministic
    for a fixed seed.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    density = map_img.data
    total = density.sum()
    if total <= 0:
        raise ValueError("importance map carries no mass")
    rng = np.random.default_rng(seed)
    flat = density.ravel() / total
    picks = rng.choice(flat.size, size=k, replace=True, p=flat)
    ys, xs = np.divmod(picks, map_img.width)
    points = np.column_stack([
        xs + rng.uniform(0.0, 1.0, size=k),
        ys + rng.uniform(0.0, 1.0, size=k),
    ])
    points, _ = _lloyd(density, points)
    return points


def _tour_length(points: np.ndarray, order: np.ndarray) -> float:
    p = points[order]
    return float(np.sum(np.hypot(*(p[1:] - p[:-1]).T)))


def tsp_order(points: np.ndarray, seed: int) -> np.ndarray:
    """Open drawing tour over the points: nearest neighbor, then 2-opt.

    The seed picks the construction start; 2-opt applies improving
    segment reversals (including prefix and suffix reversals) until no
    move helps or a move budget runs out.  Never worse than the
    nearest-neighbor tour it starts from.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(points)
    if n < 2:
        raise ValueError("need at least 2 points for a tour")
    rng = np.random.default_rng(seed)
    start = int(rng.integers(n))
    dist = np.hypot(points[:, 0, None] - points[None, :, 0],
                    points[:, 1, None] - points[None, :, 1])
    order = [start]
    free = np.ones(n, dtype=bool)
    free[start] = False
    while len(order) < n:
        row = dist[order[-1]].copy()
        row[~free] = np.inf
        nxt = int(np.argmin(row))
        order.append(nxt)
        free[nxt] = False
    order = np.asarray(order)

    moves = 0
    improved = True
    while improved and moves < TWO_OPT_MAX_MOVES:
        improved = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                # reverse order[i..j]; only the boundary edges change
                before = 0.0
                after = 0.0
                if i > 0:
                    before += dist[order[i - 1], order[i]]
                    after += dist[order[i - 1], order[j]]
                if j < n - 1:
                    before += dist[order[j], order[j + 1]]
                    after += dist[order[i], order[j + 1]]
                if after < before - 1e-12:
                    order[i:j + 1] = order[i:j + 1][::-1]
                    moves += 1
                    improved = True
                    if moves >= TWO_OPT_MAX_MOVES:
                        break
            if moves >= TWO_OPT_MAX_MOVES:
                break
    return order
