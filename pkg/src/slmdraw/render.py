"""Differentiable stroke rendering.

Sampled trajectories are converted to chains of cubic Bezier segments
(point-tangent pairs map directly to control points), flattened into
short line pieces, and rasterized as a soft ink-coverage image: each
pixel holds the maximum, over all pieces, of a smoothstep falloff of
its distance to the piece.  Every pixel value is a piecewise smooth
function of the control points and radii, so image losses propagate
gradients back into the motor plan.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .model import Trajectory, _F64, _as_t

# Antialiasing band, pixels: coverage falls from 1 at (radius - AA_BAND)
# to 0 at (radius + AA_BAND).
AA_BAND = 1.0

# Line pieces per cubic segment.  Flattening error stays below 0.2 px
# for curvature radii of 4 px and up.
FLATTEN_PIECES = 8

# Lower clamp for stroke radii so width gradients never vanish entirely.
MIN_RADIUS = 0.1

DEFAULT_SCALES = (1, 2, 4, 8)

_TILE = 32  # pixel tile edge for rasterization culling


@dataclass
class RasterImage:
    """Single-channel float image in [0, 1], row-major, y down."""

    width: int
    height: int
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.shape != (self.height, self.width):
            raise ValueError(
                f"data shape {self.data.shape} does not match "
                f"{self.height}x{self.width}"
            )
        if self.data.size and (self.data.min() < 0.0 or self.data.max() > 1.0):
            raise ValueError("pixel values must lie in [0, 1]")

    @classmethod
    def from_array(cls, data: np.ndarray) -> "RasterImage":
        data = np.asarray(data, dtype=float)
        return cls(width=data.shape[1], height=data.shape[0], data=data)


@dataclass
class BezierPath:
    """Chain of cubic segments with per-sample stroke radii.

    segments -- (n, 4, 2) control points in pixel coordinates
    radii    -- (n + 1,) stroke radius at each trajectory sample
    """

    segments: np.ndarray
    radii: np.ndarray

    def __post_init__(self):
        self.segments = np.asarray(self.segments, dtype=float).reshape(-1, 4, 2)
        self.radii = np.asarray(self.radii, dtype=float).reshape(-1)

    def __len__(self) -> int:
        return len(self.segments)


# ---------------------------------------------------------------------------
# Tensor core
# ---------------------------------------------------------------------------

def _radius_t(z, slope, base):
    return torch.clamp(base + slope * z, min=MIN_RADIUS)


def _hermite_controls_t(x: torch.Tensor, v: torch.Tensor, step) -> torch.Tensor:
    """Control points for the cubic between consecutive samples.

    x, v: (K, 2) positions and velocities on a uniform grid with the
    given time step.  A cubic matching both endpoints and endpoint
    tangents has interior control points offset by a third of the
    tangent: [x0, x0 + step/3 v0, x1 - step/3 v1, x1].
    """
    third = step / 3.0
    p0 = x[:-1]
    p1 = x[:-1] + third * v[:-1]
    p2 = x[1:] - third * v[1:]
    p3 = x[1:]
    return torch.stack([p0, p1, p2, p3], dim=1)


_FLAT_S = torch.linspace(0.0, 1.0, FLATTEN_PIECES + 1, dtype=_F64)
_B0 = (1 - _FLAT_S) ** 3
_B1 = 3 * (1 - _FLAT_S) ** 2 * _FLAT_S
_B2 = 3 * (1 - _FLAT_S) * _FLAT_S ** 2
_B3 = _FLAT_S ** 3
_BASIS = torch.stack([_B0, _B1, _B2, _B3], dim=1)  # (pieces+1, 4)


def _flatten_t(ctrl: torch.Tensor, radii: torch.Tensor):
    """Cubics to line pieces with linearly interpolated endpoint radii.

    ctrl: (n, 4, 2), radii: (n + 1,).  Returns piece endpoints a, b of
    shape (n * FLATTEN_PIECES, 2) and their radii ra, rb.
    """
    pts = torch.einsum("sc,ncd->nsd", _BASIS, ctrl)          # (n, s, 2)
    r = radii[:-1, None] * (1.0 - _FLAT_S)[None, :] + radii[1:, None] * _FLAT_S[None, :]
    a = pts[:, :-1, :].reshape(-1, 2)
    b = pts[:, 1:, :].reshape(-1, 2)
    ra = r[:, :-1].reshape(-1)
    rb = r[:, 1:].reshape(-1)
    return a, b, ra, rb


def _smoothstep(u: torch.Tensor) -> torch.Tensor:
    u = torch.clamp(u, 0.0, 1.0)
    return u * u * (3.0 - 2.0 * u)


def _coverage_t(px, py, a, b, ra, rb):
    """Soft coverage of pixel centers against line pieces.

    px, py: (P,) pixel centers.  a, b: (S, 2) piece endpoints with
    radii ra, rb.  Returns (P,) max coverage.
    """
    ab = b - a                                               # (S, 2)
    denom = torch.clamp((ab * ab).sum(-1), min=1e-12)        # (S,)
    apx = px[:, None] - a[None, :, 0]                        # (P, S)
    apy = py[:, None] - a[None, :, 1]
    tproj = torch.clamp((apx * ab[None, :, 0] + apy * ab[None, :, 1]) / denom, 0.0, 1.0)
    cx = apx - tproj * ab[None, :, 0]
    cy = apy - tproj * ab[None, :, 1]
    dist = torch.sqrt(cx * cx + cy * cy + 1e-12)
    r = ra[None, :] * (1.0 - tproj) + rb[None, :] * tproj
    cov = _smoothstep((r + AA_BAND - dist) / (2.0 * AA_BAND))
    return cov.max(dim=1).values


def _raster_t(ctrl: torch.Tensor, radii: torch.Tensor, width: int, height: int) -> torch.Tensor:
    """Rasterize control points to an (height, width) coverage image.

    Pixels are evaluated tile by tile; pieces whose inflated bounding
    box misses a tile contribute exactly zero coverage there, so the
    culling is lossless for values and gradients alike.
    """
    if ctrl.numel() == 0:
        return torch.zeros(height, width, dtype=_F64)
    a, b, ra, rb = _flatten_t(ctrl, radii)
    with torch.no_grad():
        reach = torch.maximum(ra, rb) + AA_BAND
        lo = torch.minimum(a, b) - reach[:, None]
        hi = torch.maximum(a, b) + reach[:, None]
    xs = torch.arange(width, dtype=_F64) + 0.5
    ys = torch.arange(height, dtype=_F64) + 0.5
    rows = []
    for ty in range(0, height, _TILE):
        ty1 = min(ty + _TILE, height)
        row_tiles = []
        for tx in range(0, width, _TILE):
            tx1 = min(tx + _TILE, width)
            with torch.no_grad():
                keep = ((lo[:, 0] <= tx1) & (hi[:, 0] >= tx)
                        & (lo[:, 1] <= ty1) & (hi[:, 1] >= ty))
                idx = torch.nonzero(keep, as_tuple=False).squeeze(1)
            h, w = ty1 - ty, tx1 - tx
            if idx.numel() == 0:
                row_tiles.append(torch.zeros(h, w, dtype=_F64))
                continue
            gy, gx = torch.meshgrid(ys[ty:ty1], xs[tx:tx1], indexing="ij")
            cov = _coverage_t(gx.reshape(-1), gy.reshape(-1),
                              a[idx], b[idx], ra[idx], rb[idx])
            row_tiles.append(cov.reshape(h, w))
        rows.append(torch.cat(row_tiles, dim=1))
    return torch.cat(rows, dim=0)


_KERNEL3 = torch.exp(torch.tensor(
    [[-(i * i + j * j) / 2.0 for j in (-1, 0, 1)] for i in (-1, 0, 1)],
    dtype=_F64))
_KERNEL3 = _KERNEL3 / _KERNEL3.sum()


def _blur3_t(img: torch.Tensor) -> torch.Tensor:
    """3x3 Gaussian (sigma = 1) with reflect padding; preserves constants."""
    x = img[None, None]
    x = torch.nn.functional.pad(x, (1, 1, 1, 1), mode="reflect")
    return torch.nn.functional.conv2d(x, _KERNEL3[None, None])[0, 0]


def _multiscale_t(img: torch.Tensor, target: torch.Tensor, scales) -> torch.Tensor:
    if img.shape != target.shape:
        raise ValueError(f"image shapes differ: {tuple(img.shape)} vs {tuple(target.shape)}")
    h, w = img.shape
    for s in scales:
        if h % s or w % s:
            raise ValueError(f"scale {s} does not divide image dimensions {w}x{h}")
    bi, bt = _blur3_t(img), _blur3_t(target)
    total = img.new_zeros(())
    for s in scales:
        if s == 1:
            di, dt = bi, bt
        else:
            di = torch.nn.functional.avg_pool2d(bi[None, None], s)[0, 0]
            dt = torch.nn.functional.avg_pool2d(bt[None, None], s)[0, 0]
        total = total + torch.mean((di - dt) ** 2)
    return total


# ---------------------------------------------------------------------------
# Public API
# ---------------------------------------------------------------------------

def radius_map(z, k: float, w0: float):
    """Stroke radius from trajectory height: w0 + k * z, floored at
    MIN_RADIUS pixels so the rasterization stays differentiable."""
    if k <= 0:
        raise ValueError("k must be positive")
    if w0 <= 0:
        raise ValueError("w0 must be positive")
    out = _radius_t(_as_t(z), k, w0).numpy()
    return float(out) if np.isscalar(z) else out


def hermite_to_bezier(traj: Trajectory, base_radius: float = 1.5,
                      radius_slope: float = 1.0) -> BezierPath:
    """Convert a uniformly sampled trajectory to a cubic Bezier chain.

    Planar control points come from the sampled positions and
    velocities; per-sample radii come from the height channel through
    radius_map.
    """
    x = _as_t(traj.x[:, :2])
    v = _as_t(traj.v[:, :2])
    ctrl = _hermite_controls_t(x, v, traj.dt)
    radii = _radius_t(_as_t(traj.x[:, 2]), radius_slope, base_radius)
    return BezierPath(segments=ctrl.numpy(), radii=radii.numpy())


def rasterize(path: BezierPath, canvas: tuple[int, int],
              base_radius: float = 1.0) -> RasterImage:
    """Render a Bezier chain to a soft ink-coverage image.

    canvas is (width, height).  When the path carries no radii the
    constant base_radius is used instead.
    """
    width, height = canvas
    if width < 8 or height < 8:
        raise ValueError("canvas must be at least 8x8")
    n = len(path)
    if n == 0:
        return RasterImage(width=width, height=height,
                           data=np.zeros((height, width)))
    if path.radii.size:
        if path.radii.size != n + 1:
            raise ValueError("need one radius per trajectory sample")
        radii = _as_t(path.radii)
    else:
        radii = torch.full((n + 1,), float(base_radius), dtype=_F64)
    if float(radii.min()) <= 0.0:
        raise ValueError("stroke radii must be positive")
    img = _raster_t(_as_t(path.segments), radii, width, height)
    return RasterImage(width=width, height=height, data=img.numpy())


def multiscale_mse(img: RasterImage, target: RasterImage,
                   scales=DEFAULT_SCALES) -> float:
    """Sum of MSEs between blurred, average-pooled copies of both images."""
    return float(_multiscale_t(_as_t(img.data), _as_t(target.data), tuple(scales)))
