"""Compound loss and gradient-based refinement of motor plans.

The loss trades off an image term (by default the multiscale MSE
between the rendered plan and a target image) against a minimum-time
smoothness term: total trajectory duration plus a penalty on uneven
stroke timing.  Constrained parameters are optimized through latent
variables so every intermediate plan stays valid by construction:
offsets through exp, shape through a logistic, turning angles through
a scaled tanh; positions are raw.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import torch

from .model import (DELTA_MAX, MotorPlan, VirtualTarget, _as_t, _end_time_t,
                    _superpose_t, _timing_t, _F64)
from .render import (DEFAULT_SCALES, RasterImage, _hermite_controls_t,
                     _multiscale_t, _radius_t, _raster_t)


@dataclass
class LossConfig:
    """Weights, learning rates and render settings for one optimization.

    lam weighs the smoothness term against the image term and is
    application dependent; w_sigma weighs the timing-variance penalty
    inside the smoothness term.  image_loss may be swapped for any
    callable taking (rendered, target) float64 tensors and returning a
    scalar tensor, which is how external perceptual losses plug in.
    """

    lam: float = 0.01
    w_sigma: float = 50.0
    scales: tuple[int, ...] = DEFAULT_SCALES
    steps: int = 300
    lr_pos: float = 0.5
    lr_delta: float = 0.02
    lr_dt: float = 0.01
    lr_ac: float = 0.01
    samples_per_stroke: int = 5
    base_radius: float = 2.0
    radius_slope: float = 1.0
    variable_width: bool = False
    fit_shape: bool = True
    image_loss: Optional[Callable[[torch.Tensor, torch.Tensor], torch.Tensor]] = None

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if self.w_sigma < 0:
            raise ValueError("w_sigma must be nonnegative")
        if self.steps < 1:
            raise ValueError("steps must be at least 1")


@dataclass
class OptimizationTrace:
    """Per-step loss records, evaluated before each parameter update."""

    total: list[float] = field(default_factory=list)
    smooth: list[float] = field(default_factory=list)
    image: list[float] = field(default_factory=list)
    t_end: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.total)

    def append(self, total, smooth, image, t_end):
        self.total.append(float(total))
        self.smooth.append(float(smooth))
        self.image.append(float(image))
        self.t_end.append(float(t_end))

    def to_csv(self) -> str:
        lines = ["step,total,smooth,image,t_end"]
        for i in range(len(self)):
            lines.append(f"{i},{self.total[i]!r},{self.smooth[i]!r},"
                         f"{self.image[i]!r},{self.t_end[i]!r}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Latent parameterization
# ---------------------------------------------------------------------------

def _latents_from_plan(plan: MotorPlan) -> dict[str, torch.Tensor]:
    pos = _as_t(plan.positions()).clone()
    delta = _as_t([s.delta for s in plan.strokes])
    dt = _as_t([s.dt for s in plan.strokes])
    ac = _as_t([s.Ac for s in plan.strokes])
    u_delta = torch.atanh(torch.clamp(delta / DELTA_MAX, -1 + 1e-12, 1 - 1e-12))
    u_dt = torch.log(dt)
    u_ac = torch.log(ac) - torch.log1p(-ac)
    return {"pos": pos, "u_delta": u_delta, "u_dt": u_dt, "u_ac": u_ac}


def _constrained(lat: dict[str, torch.Tensor]):
    delta = DELTA_MAX * torch.tanh(lat["u_delta"])
    dt = torch.exp(lat["u_dt"])
    ac = torch.sigmoid(lat["u_ac"])
    return delta, dt, ac


def _plan_from_latents(lat: dict[str, torch.Tensor], template: MotorPlan) -> MotorPlan:
    delta, dt, ac = _constrained(lat)
    pos = lat["pos"].detach().numpy()
    delta, dt, ac = delta.detach().numpy(), dt.detach().numpy(), ac.detach().numpy()
    strokes = [
        VirtualTarget(p=pos[i + 1], delta=float(delta[i]), dt=float(dt[i]),
                      T=template.strokes[i].T, Ac=float(ac[i]))
        for i in range(len(template.strokes))
    ]
    return MotorPlan(p0=pos[0], strokes=strokes)


def _forward(lat: dict[str, torch.Tensor], target: torch.Tensor, cfg: LossConfig):
    """Differentiable pipeline: latents -> kinematics -> raster -> loss."""
    delta, dt, ac = _constrained(lat)
    m = delta.shape[0]
    pos = lat["pos"]
    p0 = pos[0]
    d = pos[1:] - pos[:-1]
    T = torch.ones(m, dtype=_F64)
    t0, mu, sigma = _timing_t(dt, T, ac)
    t_end = _end_time_t(t0, mu, sigma)
    n = cfg.samples_per_stroke * m
    t = torch.linspace(0.0, 1.0, n + 1, dtype=_F64) * t_end
    x, v, _ = _superpose_t(p0, d, delta, t0, mu, sigma, t)
    ctrl = _hermite_controls_t(x[:, :2], v[:, :2], t_end / n)
    if cfg.variable_width:
        radii = _radius_t(x[:, 2], cfg.radius_slope, cfg.base_radius)
    else:
        radii = torch.full((n + 1,), float(cfg.base_radius), dtype=_F64)
    height, width = target.shape
    img = _raster_t(ctrl, radii, width, height)
    if cfg.image_loss is not None:
        loss_img = cfg.image_loss(img, target)
    else:
        loss_img = _multiscale_t(img, target, cfg.scales)
    smooth = t_end + cfg.w_sigma * torch.var(dt, correction=0)
    total = cfg.lam * smooth + loss_img
    return total, smooth, loss_img, t_end


# ---------------------------------------------------------------------------
# Public API
# ---------------------------------------------------------------------------

def smoothness_loss(plan: MotorPlan, w_sigma: float = 50.0) -> float:
    """Trajectory end time plus w_sigma times the population variance of
    the relative offsets; rewards overlap and uniform timing."""
    delta, dt, ac = _constrained(_latents_from_plan(plan))
    T = _as_t([s.T for s in plan.strokes])
    t0, mu, sigma = _timing_t(dt, T, ac)
    t_end = _end_time_t(t0, mu, sigma)
    return float(t_end + w_sigma * torch.var(dt, correction=0))


def total_loss(plan: MotorPlan, target: RasterImage, cfg: LossConfig) -> float:
    """Weighted smoothness plus image loss for a plan against a target."""
    lat = _latents_from_plan(plan)
    with torch.no_grad():
        total, _, _, _ = _forward(lat, _as_t(target.data), cfg)
    return float(total)


def optimize(plan0: MotorPlan, target: RasterImage,
             cfg: LossConfig) -> tuple[MotorPlan, OptimizationTrace]:
    """Run Adam on the latent plan parameters against a target image.

    Returns the refined plan (which satisfies all plan invariants by
    construction) and the per-step trace.  Raises RuntimeError with a
    diagnostic if the loss stops being finite.
    """
    lat = _latents_from_plan(plan0)
    for v in lat.values():
        v.requires_grad_(True)
    groups = [
        {"params": [lat["pos"]], "lr": cfg.lr_pos},
        {"params": [lat["u_delta"]], "lr": cfg.lr_delta},
        {"params": [lat["u_dt"]], "lr": cfg.lr_dt},
    ]
    if cfg.fit_shape:
        groups.append({"params": [lat["u_ac"]], "lr": cfg.lr_ac})
    else:
        lat["u_ac"].requires_grad_(False)
    opt = torch.optim.Adam(groups, betas=(0.9, 0.999), eps=1e-8)
    target_t = _as_t(target.data)
    trace = OptimizationTrace()
    for step in range(cfg.steps):
        opt.zero_grad()
        total, smooth, image, t_end = _forward(lat, target_t, cfg)
        if not torch.isfinite(total):
            raise RuntimeError(
                f"loss became non-finite at step {step} "
                f"(smooth={float(smooth)}, image={float(image)})"
            )
        trace.append(total, smooth, image, t_end)
        total.backward()
        opt.step()
    return _plan_from_latents(lat, plan0), trace
