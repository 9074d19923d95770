"""Two-speed wave transmission and reflection, with its exact solution.

The medium propagates a rightward family u at speed +c(x) and a leftward
family v at speed -c(x), where c jumps from c_left to c_right at an interior
interface.  Initial profiles enter on the positive axis and the boundary
x = 0 couples them through u(0,t) = h(t) v(0,t) + b(t).

With the jump glued by continuity the classical solution is exact broken-ray
transport; the regularized route mollifies the speed at width 1/|log eps|
and solves the smooth system per eps.  Association tests then integrate the
mismatch between the two against interior test functions, which is how weak
convergence of the regularized family is checked numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .characteristics import (
    BoundaryHit,
    Foot,
    Region,
    TwoSpeedMedium,
    bracket_bounds,
    broken_foot,
    classify_region,
    trace_backward,
)
from .embedding import EmbeddingError, embed_linf, log_inverse_law
from .kernels import Kernel, bump, convolve, scale_kernel
from .solver import SolutionField, SystemSpec, solve_mixed

__all__ = [
    "TransmissionProblem",
    "TestFunction",
    "AssociationReport",
    "ConvergenceReport",
    "classical_eval",
    "classical_field",
    "regularized_family",
    "association_test",
    "characteristic_convergence",
    "mollified_speed",
    "tabulated_speed",
]


def _one_t(t):
    return 1.0


def _zero_t(t):
    return 0.0


@dataclass(frozen=True)
class TransmissionProblem:
    """Two-speed transmission problem data.

    u0 and v0 are bounded, continuous-a.e. initial evaluators vanishing near
    the origin; h and b define the boundary identity u(0,t) = h(t) v(0,t) +
    b(t) (defaults h = 1, b = 0, the pure transmission coupling).
    """

    medium: TwoSpeedMedium
    u0: object
    v0: object
    horizon: float
    extent: float
    h: object = _one_t
    b: object = _zero_t

    def __post_init__(self):
        if self.horizon <= 0 or self.extent <= 0:
            raise ValueError("horizon and extent must be > 0")
        if self.medium.interface >= self.extent:
            raise ValueError("interface must lie inside the spatial extent")


def classical_eval(problem: TransmissionProblem, point) -> tuple:
    """Exact (u, v) at a quarter-plane point by broken-ray transport.

    v is always initial data carried along the leftward family.  u is
    initial data in region I; in region II the backward ray meets the
    boundary at its retarded time t0 and picks up h(t0) v(0, t0) + b(t0).
    Points on the dividing curve are evaluated through the region II branch
    (the data compatibility near the corner makes both one-sided limits
    agree there in the problems this artifact targets).
    """
    x, t = float(point[0]), float(point[1])
    m = problem.medium

    vfoot = broken_foot(m, (x, t), -1)
    v = float(np.asarray(problem.v0(np.array([vfoot.x])), dtype=float)[0])

    region = classify_region(m, (x, t))
    if region is Region.I:
        foot = broken_foot(m, (x, t), +1)
        u = float(np.asarray(problem.u0(np.array([foot.x])), dtype=float)[0])
        return u, v

    hit = broken_foot(m, (x, t), +1)
    if isinstance(hit, Foot):
        # on the curve itself the ray lands exactly at the origin
        t0 = 0.0
    else:
        t0 = hit.t0
    v0foot = broken_foot(m, (0.0, t0), -1)
    v_at_boundary = float(np.asarray(problem.v0(np.array([v0foot.x])),
                                     dtype=float)[0])
    u = float(problem.h(t0)) * v_at_boundary + float(problem.b(t0))
    return u, v


def classical_field(problem: TransmissionProblem, x: np.ndarray,
                    t: np.ndarray) -> SolutionField:
    """Sample the classical solution on a grid, packaged as a SolutionField."""
    values = np.empty((len(t), len(x), 2))
    for mi, tm in enumerate(t):
        for j, xj in enumerate(x):
            u, v = classical_eval(problem, (xj, tm))
            values[mi, j, 0] = u
            values[mi, j, 1] = v
    return SolutionField(x=np.asarray(x, dtype=float),
                         t=np.asarray(t, dtype=float), values=values,
                         scheme_metadata={"method": "classical"})


# ---------------------------------------------------------------------------
# regularized solves
# ---------------------------------------------------------------------------


def mollified_speed(medium: TwoSpeedMedium, kernel: Kernel, eta: float):
    """Exact pointwise evaluator of the speed mollified at width eta."""
    sk = scale_kernel(kernel, eta)
    jumps = [medium.interface]

    def ev(x):
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.array([convolve(medium.speed, sk, float(xi), jumps=jumps)
                        for xi in xs])
        return float(out[0]) if np.ndim(x) == 0 else out

    return ev


def tabulated_speed(medium: TwoSpeedMedium, kernel: Kernel, eta: float,
                    extent: float, resolution: int):
    """Dense tabulation of the mollified speed with a fast linear reader.

    The solver evaluates speeds at every node and level, so the exact
    convolution is sampled once on a dense grid (outside the transition
    layer it is exact automatically).  The reader clamps beyond the table.
    """
    xs = np.linspace(0.0, extent, resolution)
    r = kernel.support_radius * eta
    x0 = medium.interface
    vals = np.empty_like(xs)
    outside = (xs <= x0 - r) | (xs >= x0 + r)
    vals[xs <= x0 - r] = medium.c_left
    vals[xs >= x0 + r] = medium.c_right
    ev = mollified_speed(medium, kernel, eta)
    inside = ~outside
    if np.any(inside):
        vals[inside] = ev(xs[inside])

    def reader(x, t=None):
        return np.interp(np.asarray(x, dtype=float), xs, vals)

    return reader


def regularized_family(problem: TransmissionProblem, kernel: Kernel,
                       schedule, nx: int, cfl: float = 0.9,
                       speed_resolution: int | None = None) -> list:
    """Solve the mollified system for every eps in the schedule.

    Per eps the speed is mollified at width 1/|log eps|, the two-component
    system (incoming u at +c, outgoing v at -c) is assembled with the
    problem's boundary coupling, and the marching solver is run.  Returns
    one SolutionField per eps, each carrying eps and the width in its
    metadata.
    """
    eps_list = [float(e) for e in schedule]
    if any(e2 >= e1 for e1, e2 in zip(eps_list, eps_list[1:])):
        raise ValueError("schedule must be strictly decreasing")
    if speed_resolution is None:
        speed_resolution = 8 * nx + 1
    law = log_inverse_law()
    fields = []
    for eps in eps_list:
        eta = law(eps)
        speed = tabulated_speed(problem.medium, kernel, eta,
                                problem.extent, speed_resolution)
        spec = SystemSpec(
            n=2, r=1,
            speeds=[lambda x, t, sp=speed: sp(x),
                    lambda x, t, sp=speed: -sp(x)],
            initial_data=[problem.u0, problem.v0],
            boundary_matrix=[[problem.h]],
            boundary_data=[problem.b],
            horizon=problem.horizon, extent=problem.extent,
        )
        fld = solve_mixed(spec, nx, cfl=cfl)
        fld.epsilon = eps
        fld.scheme_metadata["eta"] = eta
        fields.append(fld)
    return fields


# ---------------------------------------------------------------------------
# association testing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TestFunction:
    """Smooth compactly supported product bump on the open quarter plane."""

    center: tuple
    radii: tuple
    amplitude: float = 1.0

    def __call__(self, x, t):
        cx, ct = self.center
        rx, rt = self.radii
        peak = bump(0.0) ** 2
        return self.amplitude * bump((np.asarray(x, dtype=float) - cx) / rx) \
            * bump((np.asarray(t, dtype=float) - ct) / rt) / peak

    def support(self) -> tuple:
        cx, ct = self.center
        rx, rt = self.radii
        return ((cx - rx, cx + rx), (ct - rt, ct + rt))


@dataclass(frozen=True)
class AssociationReport:
    """Weak-convergence diagnostics of a regularized family.

    integrals[i] is the pairing of (field_i - classical) against the test
    function; the verdict demands a non-increasing |I| sequence (within the
    slack factor per step) whose final value meets the tolerance.
    """

    component: int
    epsilon_schedule: tuple
    integrals: tuple
    tolerance: float
    slack: float
    psi_l1: float
    monotone_ok: bool
    final_ok: bool

    @property
    def verdict(self) -> bool:
        return self.monotone_ok and self.final_ok

    def csv_rows(self):
        return list(zip(self.epsilon_schedule, self.integrals))


def _grid_quad_weights(x: np.ndarray, t: np.ndarray) -> np.ndarray:
    wx = np.full(len(x), x[1] - x[0])
    wx[0] *= 0.5
    wx[-1] *= 0.5
    wt = np.full(len(t), t[1] - t[0])
    wt[0] *= 0.5
    wt[-1] *= 0.5
    return wt[:, None] * wx[None, :]


def association_test(fields, problem: TransmissionProblem, psi: TestFunction,
                     component: int = 0, tol: float | None = None,
                     slack: float = 0.10) -> AssociationReport:
    """Integrate (regularized - classical) against a test function per eps.

    The 2-D quadrature is the composite trapezoid rule on each field's own
    grid.  The default tolerance is 1e-2 times the L1 norm of the test
    function times the sup of the compared component's initial data.

    The verdict passes when |I(eps)| never grows by more than the slack
    factor from one schedule entry to the next and the final |I| meets the
    tolerance.
    """
    (sx0, sx1), (st0, st1) = psi.support()
    if not (0.0 < sx0 and sx1 < problem.extent
            and 0.0 < st0 and st1 < problem.horizon):
        raise ValueError("test function support must be strictly interior "
                         "to the open quarter-plane rectangle")
    for fld in fields:
        if fld.x[-1] < sx1 - 1e-12 or fld.t[-1] < st1 - 1e-12:
            raise ValueError("field grid does not cover the test function support")

    data = problem.u0 if component == 0 else problem.v0
    xs_probe = np.linspace(0.0, problem.extent, 2049)
    data_sup = float(np.max(np.abs(np.asarray(data(xs_probe), dtype=float))))
    if tol is None:
        tol = 1e-2  # scaled below by psi_l1 * data_sup

    integrals = []
    eps_sched = []
    psi_l1 = None
    cache: dict[tuple, np.ndarray] = {}
    for fld in fields:
        key = (len(fld.x), len(fld.t))
        if key not in cache:
            tt, xx = np.meshgrid(fld.t, fld.x, indexing="ij")
            psi_vals = psi(xx, tt)
            w = _grid_quad_weights(fld.x, fld.t)
            classical = classical_field(problem, fld.x, fld.t)
            cache[key] = (psi_vals, w, classical)
        psi_vals, w, classical = cache[key]
        diff = fld.values[:, :, component] - classical.values[:, :, component]
        integrals.append(float(np.sum(w * psi_vals * diff)))
        eps_sched.append(fld.epsilon)
        if psi_l1 is None:
            psi_l1 = float(np.sum(w * np.abs(psi_vals)))

    tol_abs = tol * psi_l1 * data_sup
    mags = [abs(v) for v in integrals]
    monotone_ok = all(m2 <= (1.0 + slack) * m1 + 1e-300
                      for m1, m2 in zip(mags, mags[1:]))
    final_ok = mags[-1] <= tol_abs
    return AssociationReport(
        component=component,
        epsilon_schedule=tuple(eps_sched),
        integrals=tuple(integrals),
        tolerance=tol_abs,
        slack=slack,
        psi_l1=psi_l1,
        monotone_ok=monotone_ok,
        final_ok=final_ok,
    )


# ---------------------------------------------------------------------------
# characteristic convergence
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConvergenceReport:
    """Per-eps trace of the mollified backward ray against the sharp limit.

    Each row records the traced foot, the closed-form bracket (x1, x2), the
    distance to the sharp broken foot, and whether the foot met the bracket
    and the 3-eta error bound.
    """

    start: tuple
    limit_foot: float
    rows: tuple  # (eps, eta, foot, x1, x2, error, contained, within_3eta)

    @property
    def all_within_3eta(self) -> bool:
        return all(r[7] for r in self.rows)

    @property
    def all_contained(self) -> bool:
        return all(r[6] for r in self.rows)

    def csv_rows(self):
        return [(r[0], r[1], r[2], r[3], r[4], r[5]) for r in self.rows]


def characteristic_convergence(problem: TransmissionProblem, kernel: Kernel,
                               start, schedule, margin: float = 0.01,
                               trace_step: float | None = None) -> ConvergenceReport:
    """Trace the mollified backward ray per eps and compare with the bracket.

    The speed is mollified at width 1/|log eps| (exact convolution, no
    tabulation) and traced backward from the start point; the sharp limit is
    the exact broken-ray foot.  Containment in the closed-form bracket and
    the 3-eta error bound are recorded per eps; containment is a diagnostic
    that the crossing-time analysis shows cannot hold against the stated
    upper bracket, so downstream checks should lean on the error bound.
    """
    m = problem.medium
    limit = broken_foot(m, start, +1)
    if isinstance(limit, BoundaryHit):
        raise ValueError("start %r reflects before time zero; convergence "
                         "tracing needs a foot on the initial axis" % (start,))
    law = log_inverse_law()
    M = max(m.c_left, m.c_right) * (1.0 + margin)
    rows = []
    for eps in schedule:
        eta = law(float(eps))
        speed_ev = mollified_speed(m, kernel, eta)
        step = trace_step if trace_step is not None else eta / 4.0
        trace = trace_backward(lambda x, t: speed_ev(x), start, step)
        foot = trace.foot
        x1, x2 = bracket_bounds(m, start, eta, M)
        err = abs(foot - limit.x)
        rows.append((float(eps), eta, foot, x1, x2, err,
                     bool(x1 <= foot <= x2), bool(err <= 3.0 * eta)))
    return ConvergenceReport(start=(float(start[0]), float(start[1])),
                             limit_foot=limit.x, rows=tuple(rows))
