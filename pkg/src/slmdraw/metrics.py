"""Smoothness and kinematic analysis of sampled trajectories.

Jerk is taken as the central difference of the sampled accelerations.
Two smoothness summaries are provided: mean squared jerk (lower is
smoother) and log-dimensionless jerk,

    LDJ = -ln( (T^3 / v_peak^2) * integral of |jerk|^2 dt ),

which is invariant to spatial scaling and uniform time dilation;
higher values mean smoother movement.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import Trajectory

LDJ_FORMULA = "LDJ = -ln((T^3 / v_peak^2) * int |jerk|^2 dt)"


def _interior_jerk(traj: Trajectory) -> tuple[np.ndarray, np.ndarray]:
    """Jerk at interior samples via central differences of acceleration."""
    if len(traj.t) < 4:
        raise ValueError("need at least 4 samples to estimate jerk")
    dt = traj.dt
    j = (traj.a[2:] - traj.a[:-2]) / (2.0 * dt)
    return traj.t[1:-1], j


def msj(traj: Trajectory) -> float:
    """Mean squared jerk magnitude over the interior samples."""
    _, j = _interior_jerk(traj)
    return float(np.mean(np.sum(j * j, axis=1)))


def ldj(traj: Trajectory) -> float:
    """Log-dimensionless jerk; scale and duration invariant, higher is
    smoother."""
    tj, j = _interior_jerk(traj)
    speed = np.linalg.norm(traj.v, axis=1)
    v_peak = float(speed.max())
    if v_peak <= 0:
        raise ValueError("trajectory carries no motion")
    integral = float(np.trapezoid(np.sum(j * j, axis=1), tj))
    duration = traj.duration
    return float(-np.log(duration ** 3 / v_peak ** 2 * integral))


def speed_extrema(traj: Trajectory, prominence_frac: float = 0.01) -> list[tuple[float, str]]:
    """Interior extrema of the speed profile after persistence filtering.

    Raw alternating minima/maxima come from sign changes of the speed
    differences; adjacent pairs whose speed gap is below the prominence
    threshold (a fraction of peak speed) are cancelled, which keeps the
    surviving kinds alternating.
    """
    if len(traj.t) < 3:
        raise ValueError("need at least 3 samples")
    speed = np.linalg.norm(traj.v, axis=1)
    v_peak = float(speed.max())
    if v_peak <= 0:
        return []
    diff = np.diff(speed)
    sign = np.sign(diff)
    # carry the previous slope through flat runs
    for i in range(1, len(sign)):
        if sign[i] == 0:
            sign[i] = sign[i - 1]
    events = []
    for i in range(1, len(sign)):
        if sign[i] != 0 and sign[i - 1] != 0 and sign[i] != sign[i - 1]:
            kind = "max" if sign[i - 1] > 0 else "min"
            events.append((i, kind))
    # persistence pruning on the alternating chain, with the two endpoint
    # speeds as non-removable anchors
    chain = [(0, "anchor")] + events + [(len(speed) - 1, "anchor")]
    threshold = prominence_frac * v_peak
    while len(chain) > 2:
        gaps = [abs(speed[chain[k][0]] - speed[chain[k + 1][0]])
                for k in range(len(chain) - 1)]
        k = int(np.argmin(gaps))
        if gaps[k] >= threshold:
            break
        if chain[k][1] == "anchor":
            del chain[k + 1]
        elif chain[k + 1][1] == "anchor":
            del chain[k]
        else:
            del chain[k:k + 2]
    return [(float(traj.t[i]), kind) for i, kind in chain[1:-1]]


# ---------------------------------------------------------------------------
# Comparison reports
# ---------------------------------------------------------------------------

@dataclass
class MethodRow:
    name: str
    duration: float
    msj: float
    ldj: float


@dataclass
class ComparisonReport:
    """Absolute metrics per named trajectory plus ratios vs a reference.

    Every ratio is oriented so that values above 1 mean the row's
    method outperforms the reference on that column: inverse duration
    (faster), reference-over-method MSJ (smoother), and
    reference-over-method LDJ (smoother; meaningful while both LDJ
    values share the usual negative sign).
    """

    reference: str
    rows: list[MethodRow] = field(default_factory=list)

    def _row(self, name: str) -> MethodRow:
        for row in self.rows:
            if row.name == name:
                return row
        raise KeyError(name)

    def ratios(self, name: str) -> tuple[float, float, float]:
        ref = self._row(self.reference)
        row = self._row(name)
        return (ref.duration / row.duration,
                ref.msj / row.msj if row.msj else np.inf,
                ref.ldj / row.ldj if row.ldj else np.inf)

    def to_text(self) -> str:
        lines = [LDJ_FORMULA,
                 f"reference: {self.reference}",
                 "",
                 f"{'name':<12}{'duration_s':>12}{'msj':>14}{'ldj':>10}"]
        for row in self.rows:
            lines.append(f"{row.name:<12}{row.duration:>12.4f}"
                         f"{row.msj:>14.4g}{row.ldj:>10.4f}")
        lines.append("")
        lines.append(f"{'ratio vs ref':<14}{'dur_inv':>10}{'msj':>10}{'ldj':>10}")
        for row in self.rows:
            if row.name == self.reference:
                continue
            di, mj, lj = self.ratios(row.name)
            lines.append(f"{row.name:<14}{di:>10.4f}{mj:>10.4f}{lj:>10.4f}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        lines = ["name,duration_s,msj,ldj,dur_inv_ratio,msj_ratio,ldj_ratio"]
        for row in self.rows:
            di, mj, lj = self.ratios(row.name)
            lines.append(f"{row.name},{row.duration!r},{row.msj!r},{row.ldj!r},"
                         f"{di!r},{mj!r},{lj!r}")
        return "\n".join(lines) + "\n"


def compare(trajs: dict[str, Trajectory], reference: str) -> ComparisonReport:
    """Duration and smoothness for each named trajectory, with ratio
    rows against the chosen reference."""
    if reference not in trajs:
        raise ValueError(f"unknown reference {reference!r}")
    report = ComparisonReport(reference=reference)
    for name, traj in trajs.items():
        report.rows.append(MethodRow(name=name, duration=traj.duration,
                                     msj=msj(traj), ldj=ldj(traj)))
    return report
