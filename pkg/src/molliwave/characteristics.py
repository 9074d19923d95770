"""Backward characteristic tracing and exact broken-ray geometry.

Characteristics of a smooth speed field are integrated backward in time with
an explicit midpoint scheme; a trace either reaches the initial axis (a
Foot) or, for positive speeds, meets the boundary x = 0 (a BoundaryHit whose
time is located by bisection).

For the piecewise-constant two-speed medium the broken rays are traced
exactly: constant-speed segments, refraction (no reflection) at the interior
interface, and the closed-form bracket around the mollified foot.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Foot",
    "BoundaryHit",
    "CharacteristicTrace",
    "TwoSpeedMedium",
    "Region",
    "TraceError",
    "trace_backward",
    "broken_foot",
    "bracket_bounds",
    "classify_region",
    "gamma_curve",
]


class TraceError(Exception):
    """Characteristic tracing failure."""


@dataclass(frozen=True)
class Foot:
    """Terminal on the initial axis: the trace reached tau = 0 at x."""

    x: float


@dataclass(frozen=True)
class BoundaryHit:
    """Terminal on the boundary axis: the trace met x = 0 at time t0."""

    t0: float


@dataclass(frozen=True)
class CharacteristicTrace:
    """A sampled backward characteristic.

    tau decreases strictly from the origin time; gamma is the traced
    position.  terminal is a Foot or a BoundaryHit.
    """

    origin: tuple
    speed_sign: int
    tau: np.ndarray
    gamma: np.ndarray
    terminal: "Foot | BoundaryHit"

    @property
    def foot(self) -> float:
        if isinstance(self.terminal, Foot):
            return self.terminal.x
        raise TraceError("trace ends on the boundary (t0=%g), not the initial axis"
                         % self.terminal.t0)

    def lipschitz_ratio(self) -> float:
        """max |d gamma / d tau| along the sampled path."""
        dt = np.diff(self.tau)
        dg = np.diff(self.gamma)
        return float(np.max(np.abs(dg / dt)))

    def csv_rows(self):
        return list(zip(self.tau, self.gamma))


def _midpoint_step(speed, x: float, tau: float, h: float) -> float:
    """One backward explicit midpoint step from (x, tau) to tau - h."""
    k1 = float(speed(x, tau))
    xm = x - 0.5 * h * k1
    k2 = float(speed(xm, tau - 0.5 * h))
    if not (math.isfinite(k1) and math.isfinite(k2)):
        raise TraceError("speed evaluation failed near (x=%g, tau=%g)" % (x, tau))
    return x - h * k2


def trace_backward(speed, start, step: float,
                   max_steps: int = 1_000_000) -> CharacteristicTrace:
    """Integrate d gamma / d tau = speed(gamma, tau) backward from start.

    Fixed-step explicit midpoint (second order).  When the path crosses
    x = 0 the step is bisected until the hit time t0 is located within
    step**2; the trace then terminates with BoundaryHit(t0).

    Args:
        speed: smooth evaluator speed(x, t), scalar in and out.
        start: (x, t) with x >= 0, t > 0.
        step: positive step in tau.
        max_steps: safety cap on the number of steps.
    """
    x0, t0 = float(start[0]), float(start[1])
    if step <= 0:
        raise TraceError("step must be > 0, got %r" % (step,))
    if x0 < 0 or t0 < 0:
        raise TraceError("start must lie in the quarter plane, got %r" % (start,))

    sign = 1 if float(speed(x0, t0)) > 0 else -1
    taus = [t0]
    gammas = [x0]
    tau, x = t0, x0
    nsteps = 0
    terminal: Foot | BoundaryHit | None = None
    tol = step * step

    while tau > 0.0:
        nsteps += 1
        if nsteps > max_steps:
            raise TraceError("more than %d steps from start %r" % (max_steps, start))
        h = min(step, tau)
        x_new = _midpoint_step(speed, x, tau, h)
        if x_new <= 0.0 and x > 0.0:
            # bisect the substep length until the path lands on x = 0
            lo, hi = 0.0, h
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                if _midpoint_step(speed, x, tau, mid) <= 0.0:
                    hi = mid
                else:
                    lo = mid
            h_hit = 0.5 * (lo + hi)
            t_hit = tau - h_hit
            taus.append(t_hit)
            gammas.append(0.0)
            terminal = BoundaryHit(t0=t_hit)
            break
        tau -= h
        x = x_new
        taus.append(tau)
        gammas.append(x)
        if tau <= 0.0:
            terminal = Foot(x=x)
            break

    if terminal is None:
        # start already on the initial axis
        terminal = Foot(x=x0) if x0 > 0 or sign < 0 else BoundaryHit(t0=0.0)

    return CharacteristicTrace(origin=(x0, t0), speed_sign=sign,
                               tau=np.array(taus), gamma=np.array(gammas),
                               terminal=terminal)


# ---------------------------------------------------------------------------
# two-speed medium: exact broken rays
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TwoSpeedMedium:
    """Piecewise-constant speed: c_left on (0, interface), c_right beyond."""

    c_left: float
    c_right: float
    interface: float

    def __post_init__(self):
        if self.c_left <= 0 or self.c_right <= 0 or self.interface <= 0:
            raise ValueError("medium constants must all be > 0: %r" % (self,))

    def speed(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x > self.interface, self.c_right, self.c_left)
        if out.ndim == 0:
            return float(out)
        return out


def broken_foot(medium: TwoSpeedMedium, start, direction: int):
    """Exact backward ray through the two-speed medium.

    direction +1 follows speed +c(x) (the ray moves left going backward in
    time); direction -1 follows -c(x) (moves right).  The ray refracts at
    the interface (continuous path, new slope) and, for direction +1 only,
    may meet the boundary x = 0 before time zero.

    Returns Foot(x) or BoundaryHit(t0).
    """
    x, t = float(start[0]), float(start[1])
    if x < 0 or t < 0:
        raise ValueError("start must lie in the quarter plane, got %r" % (start,))
    cl, cr, x0 = medium.c_left, medium.c_right, medium.interface

    if direction == +1:
        if x > x0:
            t_iface = (x - x0) / cr
            if t_iface >= t:
                return Foot(x - cr * t)
            # refract: remaining time at the left speed; closed form
            # -cl*t + (cl/cr)*(x - x0) + x0
            rem = t - t_iface
            x = x0
            t = rem
        # left region at speed cl
        if x - cl * t >= 0.0:
            return Foot(x - cl * t)
        return BoundaryHit(t0=t - x / cl)

    if direction == -1:
        if x < x0:
            t_iface = (x0 - x) / cl
            if t_iface >= t:
                return Foot(x + cl * t)
            return Foot(x0 + cr * (t - t_iface))
        return Foot(x + cr * t)

    raise ValueError("direction must be +1 or -1, got %r" % (direction,))


def bracket_bounds(medium: TwoSpeedMedium, start, eta: float, M: float):
    """Closed-form bracket (x1, x2) around the mollified-ray foot.

    Valid for region-I starts above the interface (typically in the crossing
    fan, where the sharp backward +1 ray meets the interface before time
    zero; in a uniform medium the upper bound degenerates to the straight
    foot), widths smaller than the interface position, and M at least the
    larger speed.  Always returns x1 <= x2 (the gap is 4 * c_left * eta / M).
    """
    x, t = float(start[0]), float(start[1])
    cl, cr, x0 = medium.c_left, medium.c_right, medium.interface
    if eta <= 0 or eta >= x0:
        raise ValueError("eta must lie in (0, interface), got %r" % (eta,))
    if M < max(cl, cr):
        raise ValueError("M must be >= max(c_left, c_right), got %r" % (M,))
    if not (x > x0 and t >= 0 and classify_region(medium, start) is Region.I):
        raise ValueError(
            "start %r must lie in region I above the interface" % (start,))
    x1 = cl * (-2.0 * eta / M - (x0 + eta - x) / cr - t) - eta + x0
    x2 = -cl * (-2.0 * eta / M + (x0 + eta - x) / cr + t) - eta + x0
    return x1, x2


class Region(enum.Enum):
    """Position relative to the forward characteristic from the origin."""

    I = "region I"
    II = "region II"
    ON_GAMMA = "on the curve"


#: points within this distance of the curve count as lying on it
ON_GAMMA_TOL = 1e-12


def gamma_curve(medium: TwoSpeedMedium, t: float) -> float:
    """x-position at time t of the forward +c(x) characteristic from (0, 0)."""
    cl, cr, x0 = medium.c_left, medium.c_right, medium.interface
    t_iface = x0 / cl
    if t <= t_iface:
        return cl * t
    return x0 + cr * (t - t_iface)


def classify_region(medium: TwoSpeedMedium, point) -> Region:
    """Region I (below/right of the origin characteristic), II (above), or on it."""
    x, t = float(point[0]), float(point[1])
    if x < 0 or t < 0:
        raise ValueError("point must lie in the quarter plane, got %r" % (point,))
    gx = gamma_curve(medium, t)
    if abs(x - gx) <= ON_GAMMA_TOL:
        return Region.ON_GAMMA
    return Region.I if x > gx else Region.II
