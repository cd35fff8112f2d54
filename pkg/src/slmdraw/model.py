"""Closed-form sigma-lognormal stroke kinematics.

A drawing movement is described by a motor plan: an initial position
followed by a sequence of virtual targets.  Each consecutive pair of
points defines a ballistic stroke whose speed follows a lognormal
bell curve and whose planar shape is a circular arc controlled by a
turning angle.  Position, velocity and acceleration of the full
trajectory are available in closed form as the time superposition of
all strokes, which keeps every quantity differentiable with respect
to the plan parameters.

The numerical core is written with torch tensors (float64) so the
same code path serves both plain evaluation and gradient-based
optimization.  Public functions accept python scalars / numpy arrays
and return numpy values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch

# Floor applied inside logs so the profile is defined (and flat) before the
# stroke activates.  Small enough not to shift the profile visibly, large
# enough for stable 64-bit logs.
SOFTEN_EPS = 1e-6

# Turning angles are kept strictly inside (-pi, pi); the latent
# parameterization in the optimizer maps into this same range.
DELTA_MAX = 0.99 * math.pi

_F64 = torch.float64


def _as_t(x) -> torch.Tensor:
    return torch.as_tensor(x, dtype=_F64)


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass
class VirtualTarget:
    """One aim point of a motor plan with its per-stroke parameters.

    p      -- 3-vector target position (pixels for x, y; height units for z)
    delta  -- turning angle of the stroke arc, radians, in (-pi, pi)
    dt     -- relative activation offset w.r.t. the previous stroke, > 0
    T      -- stroke duration in seconds, > 0
    Ac     -- shape parameter in (0, 1) controlling profile skewness
    """

    p: np.ndarray
    delta: float = 0.0
    dt: float = 1.0
    T: float = 1.0
    Ac: float = 0.1

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        if self.p.shape != (3,):
            raise ValueError("target position must be a 3-vector")
        if not np.all(np.isfinite(self.p)):
            raise ValueError("target position must be finite")
        if not (self.dt > 0.0):
            raise ValueError(f"dt must be strictly positive, got {self.dt}")
        if not (self.T > 0.0):
            raise ValueError(f"T must be strictly positive, got {self.T}")
        if not (0.0 < self.Ac < 1.0):
            raise ValueError(f"Ac must lie in (0, 1), got {self.Ac}")
        if not (-math.pi < self.delta < math.pi):
            raise ValueError(f"delta must lie in (-pi, pi), got {self.delta}")


@dataclass
class MotorPlan:
    """Initial position plus the ordered virtual targets; the optimization
    variable of the whole pipeline."""

    p0: np.ndarray
    strokes: list[VirtualTarget] = field(default_factory=list)

    def __post_init__(self):
        self.p0 = np.asarray(self.p0, dtype=float)
        if self.p0.shape != (3,):
            raise ValueError("p0 must be a 3-vector")
        if not np.all(np.isfinite(self.p0)):
            raise ValueError("p0 must be finite")
        if len(self.strokes) < 1:
            raise ValueError("a motor plan needs at least one stroke")

    @property
    def m(self) -> int:
        return len(self.strokes)

    def positions(self) -> np.ndarray:
        """All m+1 plan points stacked, p0 first."""
        return np.vstack([self.p0] + [s.p for s in self.strokes])

    def displacements(self) -> np.ndarray:
        """Per-stroke displacement vectors (derived, never stored)."""
        pts = self.positions()
        return pts[1:] - pts[:-1]


@dataclass
class StrokeParams:
    """Derived lognormal triple plus geometry for a single stroke."""

    t0: float
    mu: float
    sigma: float
    d: np.ndarray
    delta: float = 0.0

    def __post_init__(self):
        self.d = np.asarray(self.d, dtype=float)
        if self.sigma <= 0.0:
            raise ValueError("sigma must be positive")


@dataclass
class Trajectory:
    """Uniformly sampled kinematics: positions, velocities, accelerations."""

    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.x = np.asarray(self.x, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        self.a = np.asarray(self.a, dtype=float)
        n = len(self.t)
        if not (len(self.x) == len(self.v) == len(self.a) == n):
            raise ValueError("t, x, v, a must have equal length")
        for name in ("t", "x", "v", "a"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"non-finite entries in trajectory field {name}")
        if n >= 2 and np.any(np.diff(self.t) <= 0):
            raise ValueError("time stamps must be strictly increasing")

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])


# ---------------------------------------------------------------------------
# Tensor core.  Everything broadcasts elementwise; the trailing axis of
# vector quantities holds x, y, z components.
# ---------------------------------------------------------------------------

def _soften(x: torch.Tensor) -> torch.Tensor:
    """ReLU floor keeping the log argument >= SOFTEN_EPS."""
    return torch.relu(x - SOFTEN_EPS) + SOFTEN_EPS


def _profile_t(t, t0, mu, sigma) -> torch.Tensor:
    """Lognormal speed magnitude; finite for all t thanks to the floor."""
    u = _soften(t - t0)
    z = (torch.log(u) - mu)
    return torch.exp(-z * z / (2.0 * sigma * sigma)) / (sigma * math.sqrt(2.0 * math.pi) * u)


def _cdf_t(t, t0, mu, sigma) -> torch.Tensor:
    """Fraction of the stroke completed at time t, in [0, 1]."""
    u = _soften(t - t0)
    return 0.5 * (1.0 + torch.special.erf((torch.log(u) - mu) / (sigma * math.sqrt(2.0))))


def _sinc(x: torch.Tensor) -> torch.Tensor:
    """sin(x)/x with the removable singularity handled."""
    return torch.sinc(x / math.pi)


def _velocity_t(t, t0, mu, sigma, delta, dx, dy, dz):
    """Per-stroke velocity components.

    The planar part of the displacement is rotated progressively from
    -delta/2 to +delta/2 as the stroke completes, and scaled by the
    chord-to-arc-length correction 1/sinc(delta/2); the z component is
    untouched by both.
    """
    lam = _profile_t(t, t0, mu, sigma)
    w = _cdf_t(t, t0, mu, sigma)
    theta = delta * (w - 0.5)
    h = 1.0 / _sinc(delta / 2.0)
    c, s = torch.cos(theta), torch.sin(theta)
    vx = lam * h * (c * dx - s * dy)
    vy = lam * h * (s * dx + c * dy)
    vz = lam * dz
    return vx, vy, vz


def _position_t(t, t0, mu, sigma, delta, dx, dy, dz):
    """Per-stroke displacement from the start point, in closed form.

    Algebraically identical to the circular-arc solution but written
    with sinc-style factors so it is numerically stable and smooth
    through delta = 0, where it reduces exactly to w(t) * d.  At
    w = 1 it returns d exactly, whatever the turning angle.
    """
    w = _cdf_t(t, t0, mu, sigma)
    theta = delta * (w - 1.0)
    # g = (delta/2) / tan(delta/2), smooth for |delta| < pi
    g = torch.cos(delta / 2.0) / _sinc(delta / 2.0)
    # B = sin(theta)/(2 tan(delta/2)),  A = (1-cos(theta))/(2 tan(delta/2))
    b = g * (w - 1.0) * _sinc(theta)
    half = _sinc(theta / 2.0)
    a = g * (delta * (w - 1.0) * (w - 1.0) / 2.0) * half * half
    c, s = torch.cos(theta), torch.sin(theta)
    # d/2 + R[theta] d/2 + [[a, b], [-b, a]] @ (J d), with J d = (-dy, dx)
    px = 0.5 * dx + 0.5 * (c * dx - s * dy) + (b * dx - a * dy)
    py = 0.5 * dy + 0.5 * (s * dx + c * dy) + (b * dy + a * dx)
    pz = w * dz
    return px, py, pz


def _acceleration_t(t, t0, mu, sigma, delta, dx, dy, dz):
    """Analytic time derivative of the per-stroke velocity.

    Two terms: the rotation angle advances at rate delta * profile, and
    the profile itself changes at its log-derivative rate.  Both vanish
    on the pre-activation plateau where the softening floor is active.
    """
    u = _soften(t - t0)
    gate = (t - t0 > SOFTEN_EPS).to(_F64)
    lam = _profile_t(t, t0, mu, sigma)
    w = _cdf_t(t, t0, mu, sigma)
    theta = delta * (w - 0.5)
    h = 1.0 / _sinc(delta / 2.0)
    c, s = torch.cos(theta), torch.sin(theta)
    lam_dot = lam * (mu - sigma * sigma - torch.log(u)) / (sigma * sigma * u)
    rot = delta * lam * lam  # angle rate (delta * lam) times lam
    ax = gate * h * (rot * (-s * dx - c * dy) + lam_dot * (c * dx - s * dy))
    ay = gate * h * (rot * (c * dx - s * dy) + lam_dot * (s * dx + c * dy))
    az = gate * lam_dot * dz
    return ax, ay, az


def _timing_t(dt, T, Ac):
    """Map (dt, T, Ac) per stroke to the lognormal triple (t0, mu, sigma).

    sigma follows from the shape parameter, mu from requiring the profile
    to span T seconds at 3-sigma coverage, and the activation times chain
    through the relative offsets, anchored at zero before the first stroke.
    """
    sigma = torch.sqrt(-torch.log1p(-Ac))
    mu = 3.0 * sigma - torch.log(torch.expm1(6.0 * sigma) / T)
    t0 = torch.cumsum(dt * torch.sinh(3.0 * sigma), dim=-1)
    return t0, mu, sigma


def _end_time_t(t0, mu, sigma) -> torch.Tensor:
    return t0[..., -1] + torch.exp(mu[..., -1] + 3.0 * sigma[..., -1])


def _superpose_t(p0, d, delta, t0, mu, sigma, t):
    """Sum the per-stroke kinematics over all m strokes.

    p0: (3,)  d: (m, 3)  stroke params: (m,)  t: (K,)
    Returns x, v, a with shape (K, 3).
    """
    tb = t.unsqueeze(0)                      # (1, K)
    col = lambda q: q.unsqueeze(1)           # (m, 1)
    dx, dy, dz = col(d[:, 0]), col(d[:, 1]), col(d[:, 2])
    args = (tb, col(t0), col(mu), col(sigma), col(delta), dx, dy, dz)
    px, py, pz = _position_t(*args)
    vx, vy, vz = _velocity_t(*args)
    ax, ay, az = _acceleration_t(*args)
    x = torch.stack([px.sum(0), py.sum(0), pz.sum(0)], dim=-1) + p0
    v = torch.stack([vx.sum(0), vy.sum(0), vz.sum(0)], dim=-1)
    a = torch.stack([ax.sum(0), ay.sum(0), az.sum(0)], dim=-1)
    return x, v, a


def _plan_tensors(plan: MotorPlan):
    d = _as_t(plan.displacements())
    delta = _as_t([s.delta for s in plan.strokes])
    dt = _as_t([s.dt for s in plan.strokes])
    T = _as_t([s.T for s in plan.strokes])
    Ac = _as_t([s.Ac for s in plan.strokes])
    return _as_t(plan.p0), d, delta, dt, T, Ac


# ---------------------------------------------------------------------------
# Public API
# ---------------------------------------------------------------------------

def _returning(value: torch.Tensor, scalar_in: bool):
    out = value.numpy()
    return float(out) if scalar_in and out.ndim == 0 else out


def lognormal_profile(t, s: StrokeParams):
    """Speed profile of one stroke at time(s) t, 1/seconds."""
    scalar = np.isscalar(t)
    return _returning(_profile_t(_as_t(t), s.t0, _as_t(s.mu), _as_t(s.sigma)), scalar)


def lognormal_cdf(t, s: StrokeParams):
    """Completed fraction of one stroke at time(s) t, in [0, 1]."""
    scalar = np.isscalar(t)
    return _returning(_cdf_t(_as_t(t), s.t0, _as_t(s.mu), _as_t(s.sigma)), scalar)


def _stroke_eval(fn, t, s: StrokeParams) -> np.ndarray:
    tt = _as_t(t)
    args = (tt, _as_t(s.t0), _as_t(s.mu), _as_t(s.sigma), _as_t(s.delta),
            _as_t(s.d[0]), _as_t(s.d[1]), _as_t(s.d[2]))
    out = torch.stack(torch.broadcast_tensors(*fn(*args)), dim=-1)
    return out.numpy()


def stroke_velocity(t, s: StrokeParams) -> np.ndarray:
    """Velocity vector(s) of one stroke; shape (..., 3)."""
    return _stroke_eval(_velocity_t, t, s)


def stroke_position(t, s: StrokeParams) -> np.ndarray:
    """Displacement vector(s) of one stroke relative to its start; (..., 3)."""
    return _stroke_eval(_position_t, t, s)


def stroke_acceleration(t, s: StrokeParams) -> np.ndarray:
    """Acceleration vector(s) of one stroke, d(velocity)/dt; (..., 3)."""
    return _stroke_eval(_acceleration_t, t, s)


def plan_to_params(plan: MotorPlan) -> list[StrokeParams]:
    """Derive the per-stroke lognormal triples from a motor plan.

    Activation times are strictly increasing because every relative
    offset is positive; the first stroke is offset from time zero.
    """
    _, d, delta, dt, T, Ac = _plan_tensors(plan)
    t0, mu, sigma = _timing_t(dt, T, Ac)
    dn = d.numpy()
    return [
        StrokeParams(t0=float(t0[i]), mu=float(mu[i]), sigma=float(sigma[i]),
                     d=dn[i], delta=float(delta[i]))
        for i in range(plan.m)
    ]


def end_time(params: list[StrokeParams]) -> float:
    """Trajectory end time: last activation plus its 3-sigma profile extent."""
    last = params[-1]
    return float(last.t0 + math.exp(last.mu + 3.0 * last.sigma))


def sample_trajectory(plan: MotorPlan, n: int) -> Trajectory:
    """Sample the superposed kinematics on a uniform grid of n intervals.

    The grid spans [0, T_end]; a sensible default resolution for
    rendering is n = 5 * m.
    """
    if n < 2:
        raise ValueError("need at least 2 sample intervals")
    p0, d, delta, dt, T, Ac = _plan_tensors(plan)
    t0, mu, sigma = _timing_t(dt, T, Ac)
    t_end = _end_time_t(t0, mu, sigma)
    t = torch.linspace(0.0, 1.0, n + 1, dtype=_F64) * t_end
    x, v, a = _superpose_t(p0, d, delta, t0, mu, sigma, t)
    return Trajectory(t=t.numpy(), x=x.numpy(), v=v.numpy(), a=a.numpy())
