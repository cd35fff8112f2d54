"""Robot-feasibility time scaling and two baseline parameterizations.

All three operations preserve path geometry and only reshape timing:
uniform dilation to meet speed/acceleration limits, a time-near-optimal
trapezoidal profile with curvature-capped speed, and a single quintic
minimum-jerk profile in arc length.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Trajectory

RESAMPLE_CELLS = 1000  # arc-length resolution for the baselines


@dataclass
class Limits:
    """Speed and acceleration ceilings, in trajectory units per second."""

    v_max: float
    a_max: float

    def __post_init__(self):
        if self.v_max <= 0 or self.a_max <= 0:
            raise ValueError("limits must be positive")


def limit_resample(traj: Trajectory, lim: Limits) -> Trajectory:
    """Uniformly dilate time until speed and acceleration limits hold.

    Speeds scale with 1/c and accelerations with 1/c^2, so the dilation
    factor is the worst of v_peak/v_max and sqrt(a_peak/a_max); geometry
    is untouched.
    """
    v_peak = float(np.linalg.norm(traj.v, axis=1).max())
    a_peak = float(np.linalg.norm(traj.a, axis=1).max())
    c = max(1.0, v_peak / lim.v_max, np.sqrt(a_peak / lim.a_max))
    if c == 1.0:
        return Trajectory(t=traj.t.copy(), x=traj.x.copy(),
                          v=traj.v.copy(), a=traj.a.copy())
    return Trajectory(t=traj.t * c, x=traj.x.copy(),
                      v=traj.v / c, a=traj.a / (c * c))


# ---------------------------------------------------------------------------
# Shared path machinery
# ---------------------------------------------------------------------------

def _resample_path(path: np.ndarray, cells: int = RESAMPLE_CELLS):
    """Equal arc-length resampling; returns points, cumulative s, length."""
    path = np.asarray(path, dtype=float)
    if path.ndim != 2 or path.shape[1] != 3 or len(path) < 2:
        raise ValueError("path must be an (n, 3) array with n >= 2")
    seg = np.linalg.norm(np.diff(path, axis=0), axis=1)
    s_in = np.concatenate([[0.0], np.cumsum(seg)])
    length = float(s_in[-1])
    if length <= 0:
        raise ValueError("path has zero length")
    s = np.linspace(0.0, length, cells + 1)
    pts = np.column_stack([np.interp(s, s_in, path[:, k]) for k in range(3)])
    return pts, s, length


def _curvature(pts: np.ndarray) -> np.ndarray:
    """Discrete curvature from the circumradius of point triples."""
    a = np.linalg.norm(pts[1:-1] - pts[:-2], axis=1)
    b = np.linalg.norm(pts[2:] - pts[1:-1], axis=1)
    c = np.linalg.norm(pts[2:] - pts[:-2], axis=1)
    cross = np.linalg.norm(np.cross(pts[1:-1] - pts[:-2], pts[2:] - pts[1:-1]), axis=1)
    denom = a * b * c
    kappa = np.zeros(len(pts))
    inner = np.where(denom > 1e-12, 2.0 * cross / np.maximum(denom, 1e-12), 0.0)
    kappa[1:-1] = inner
    kappa[0], kappa[-1] = kappa[1], kappa[-2]
    return kappa


def _tangents(pts: np.ndarray, s: np.ndarray) -> np.ndarray:
    grad = np.gradient(pts, s, axis=0)
    norm = np.linalg.norm(grad, axis=1, keepdims=True)
    return grad / np.maximum(norm, 1e-12)


def _profile_to_trajectory(pts, s, speed, n_out):
    """Timestamps from a speed profile over arc length, then a uniform
    time grid with interpolated positions and finite-difference
    velocities/accelerations."""
    # time across each cell assuming constant acceleration within it
    vmid = 0.5 * (speed[:-1] + speed[1:])
    ds = np.diff(s)
    with np.errstate(divide="ignore"):
        cell_dt = np.where(vmid > 0, ds / np.maximum(vmid, 1e-300), np.inf)
    if not np.all(np.isfinite(cell_dt)):
        raise ValueError("speed profile is zero over a cell of positive length")
    t_of_s = np.concatenate([[0.0], np.cumsum(cell_dt)])
    duration = float(t_of_s[-1])
    t = np.linspace(0.0, duration, n_out + 1)
    s_of_t = np.interp(t, t_of_s, s)
    x = np.column_stack([np.interp(s_of_t, s, pts[:, k]) for k in range(3)])
    sp = np.interp(s_of_t, s, speed)
    tan = _tangents(pts, s)
    tan_t = np.column_stack([np.interp(s_of_t, s, tan[:, k]) for k in range(3)])
    v = sp[:, None] * tan_t
    a = np.gradient(v, t, axis=0)
    return Trajectory(t=t, x=x, v=v, a=a)


# ---------------------------------------------------------------------------
# Baselines
# ---------------------------------------------------------------------------

def totg_lite(path: np.ndarray, lim: Limits, n_out: int = RESAMPLE_CELLS) -> Trajectory:
    """Trapezoidal time-near-optimal profile along a fixed path.

    The pointwise speed cap is the smaller of v_max and the centripetal
    bound sqrt(a_max / curvature); forward and backward passes then
    limit tangential acceleration, starting and ending at rest.
    """
    pts, s, length = _resample_path(path)
    kappa = _curvature(pts)
    with np.errstate(divide="ignore"):
        cap = np.minimum(lim.v_max,
                         np.sqrt(np.where(kappa > 1e-12, lim.a_max / np.maximum(kappa, 1e-12), np.inf)))
    ds = np.diff(s)
    v = cap.copy()
    v[0] = 0.0
    for i in range(len(v) - 1):
        v[i + 1] = min(cap[i + 1], np.sqrt(v[i] ** 2 + 2.0 * lim.a_max * ds[i]))
    v[-1] = 0.0
    for i in range(len(v) - 2, -1, -1):
        v[i] = min(v[i], np.sqrt(v[i + 1] ** 2 + 2.0 * lim.a_max * ds[i]))
    return _profile_to_trajectory(pts, s, v, n_out)


def minjerk_reparam(path: np.ndarray, lim: Limits, n_out: int = RESAMPLE_CELLS) -> Trajectory:
    """Quintic minimum-jerk progress along a fixed path.

    Arc length follows L * (10 tau^3 - 15 tau^4 + 6 tau^5); the duration
    is the smallest satisfying the tangential peak-speed (15/8 L/T) and
    peak-acceleration (10/sqrt(3) L/T^2) limits.  A final uniform
    dilation also enforces the centripetal component on curved paths.
    """
    pts, s, length = _resample_path(path)
    t_speed = 1.875 * length / lim.v_max
    t_accel = np.sqrt(10.0 / np.sqrt(3.0) * length / lim.a_max)
    duration = max(t_speed, t_accel)
    t = np.linspace(0.0, duration, n_out + 1)
    tau = t / duration
    s_of_t = length * (10 * tau ** 3 - 15 * tau ** 4 + 6 * tau ** 5)
    sdot = length / duration * (30 * tau ** 2 - 60 * tau ** 3 + 30 * tau ** 4)
    x = np.column_stack([np.interp(s_of_t, s, pts[:, k]) for k in range(3)])
    tan = _tangents(pts, s)
    tan_t = np.column_stack([np.interp(s_of_t, s, tan[:, k]) for k in range(3)])
    v = sdot[:, None] * tan_t
    a = np.gradient(v, t, axis=0)
    traj = Trajectory(t=t, x=x, v=v, a=a)
    return limit_resample(traj, lim)
