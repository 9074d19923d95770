"""Epsilon-indexed smooth families and empirical growth classification.

Bounded, piecewise-continuous data is turned into a family of smooth
functions by mollification at an epsilon-dependent width.  The width law
1/|log eps| keeps the family uniformly bounded while its x-derivative grows
only like |log eps|; the linear law width = eps is the canonical scaling
under which representatives of the same data differ to high order.

Growth of a family over a compact region is classified empirically by
fitting sampled sup norms against three candidate models (constant,
a*log(1/eps)+b, a*eps^-p) and picking the best by residual, with ties
broken toward the weaker growth class.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .kernels import (
    Kernel,
    convolve,
    convolve_derivative,
    scale_kernel,
)

__all__ = [
    "EpsilonFamily",
    "GrowthClass",
    "GrowthReport",
    "WidthLaw",
    "EmbeddingError",
    "log_inverse_law",
    "linear_law",
    "embed_linf",
    "classify_growth",
    "check_negligible",
    "smooth_cutoff",
    "fd_smoothness_drift",
    "DEFAULT_SCHEDULE",
]

#: default epsilon schedule: two decades, five points
DEFAULT_SCHEDULE = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3)

#: sup norms below this are treated as exactly zero when fitting decay
ZERO_SUP = 1e-13


class EmbeddingError(Exception):
    """Family construction or evaluation failure."""


# ---------------------------------------------------------------------------
# width laws
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WidthLaw:
    """Mollification width as a function of epsilon.

    kind "log_inverse": width = 1/|log eps| (slowly shrinking; derivative
    families grow logarithmically).  kind "linear": width = eps (canonical
    scaling).
    """

    kind: str

    def __call__(self, eps: float) -> float:
        if eps <= 0 or eps >= 1:
            raise EmbeddingError("width laws are defined for eps in (0, 1), got %r" % (eps,))
        if self.kind == "log_inverse":
            return 1.0 / abs(math.log(eps))
        if self.kind == "linear":
            return eps
        raise EmbeddingError("unknown width law %r" % (self.kind,))


def log_inverse_law() -> WidthLaw:
    return WidthLaw("log_inverse")


def linear_law() -> WidthLaw:
    return WidthLaw("linear")


# ---------------------------------------------------------------------------
# families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EpsilonFamily:
    """A family eps -> smooth function, given by a pointwise evaluator.

    domain: ((lo, hi),) for one space variable or ((xlo, xhi), (tlo, thi))
    for quarter-plane families.  The evaluator takes (eps, point...) and must
    be deterministic; families built here are pure functions and safe to
    evaluate from concurrent tasks.

    x_derivative, when present, evaluates the space derivative of the family
    (exact for mollification-backed families: convolution against the kernel
    derivative).
    """

    domain: tuple
    evaluator: Callable
    metadata: dict = field(default_factory=dict)
    x_derivative: "EpsilonFamily | None" = None

    @property
    def ndim(self) -> int:
        return len(self.domain)

    def at(self, eps: float) -> Callable:
        """Freeze eps, returning a plain function of the point."""
        ev = self.evaluator
        return lambda *point: ev(eps, *point)

    def __call__(self, eps: float, *point):
        return self.evaluator(eps, *point)


def smooth_cutoff(zero_radius: float) -> Callable:
    """C-infinity ramp: 0 on [0, z], 1 on [2z, inf), monotone in between.

    Built from the standard bump primitive; with z = 0 the cutoff is
    identically 1.
    """
    z = float(zero_radius)
    if z < 0:
        raise EmbeddingError("zero_radius must be >= 0, got %r" % (zero_radius,))
    if z == 0.0:
        return lambda x: np.ones_like(np.asarray(x, dtype=float))

    def ramp(x):
        u = (np.asarray(x, dtype=float) - z) / z
        out = np.zeros_like(u)
        out[u >= 1.0] = 1.0
        mid = (u > 0.0) & (u < 1.0)
        um = u[mid]
        b = np.exp(-1.0 / um)
        b1 = np.exp(-1.0 / (1.0 - um))
        out[mid] = b / (b + b1)
        return out

    return ramp


def embed_linf(f, kernel: Kernel, law: WidthLaw, zero_radius: float = 0.0,
               jumps=(), domain=(0.0, 4.0),
               quad_subintervals: int = 16) -> EpsilonFamily:
    """Mollify bounded piecewise-continuous data into a smooth family.

    The data is multiplied by a smooth cutoff vanishing on [0, zero_radius]
    (and equal to 1 beyond twice that), extended by zero below x = 0, then
    convolved against the kernel scaled to law(eps).

    For nonnegative kernels (moment order <= 1) the convolution is an
    average, so sup |family| <= sup |f| at every eps.  Sign-changing kernels
    (moment order >= 2) can overshoot near jumps of f and carry no such
    bound.

    Args:
        f: bounded evaluator on the quarter line, vectorized.
        kernel: base mollification kernel.
        law: width law mapping eps to the mollification width.
        zero_radius: radius of the forced-zero neighborhood of 0.
        jumps: jump points of f (quadrature splits there).
        domain: (lo, hi) record stored on the family.

    Returns:
        EpsilonFamily with an exact x_derivative family attached.
    """
    lo, hi = float(domain[0]), float(domain[1])
    if zero_radius < 0 or 2.0 * zero_radius > hi:
        raise EmbeddingError(
            "zero_radius %r outside the domain [%g, %g]" % (zero_radius, lo, hi))
    cut = smooth_cutoff(zero_radius)
    jump_list = sorted(set(float(j) for j in jumps) | {0.0})

    def data(x):
        x = np.asarray(x, dtype=float)
        vals = np.where(x >= 0.0, np.asarray(f(x), dtype=float) * cut(x), 0.0)
        return vals

    def evaluator(eps, x):
        sk = scale_kernel(kernel, law(eps))
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.array([
            convolve(data, sk, float(xi), jumps=jump_list,
                     subintervals=quad_subintervals)
            for xi in xs
        ])
        return out[0] if np.ndim(x) == 0 else out

    def deriv_evaluator(eps, x):
        sk = scale_kernel(kernel, law(eps))
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.array([
            convolve_derivative(data, sk, float(xi), jumps=jump_list,
                                subintervals=quad_subintervals)
            for xi in xs
        ])
        return out[0] if np.ndim(x) == 0 else out

    meta = {
        "construction": "linf_mollification",
        "moment_order": kernel.moment_order,
        "support_radius": kernel.support_radius,
        "width_law": law.kind,
        "zero_radius": zero_radius,
        "jumps": tuple(jump_list),
    }
    deriv = EpsilonFamily(domain=(tuple((lo, hi)),), evaluator=deriv_evaluator,
                          metadata=dict(meta, derivative=True))
    return EpsilonFamily(domain=(tuple((lo, hi)),), evaluator=evaluator,
                         metadata=meta, x_derivative=deriv)


# ---------------------------------------------------------------------------
# growth classification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GrowthClass:
    """Fitted growth class: bounded / log / power / negligible.

    parameter is the log slope, the power exponent, or the negligibility
    order; None for the bounded class.
    """

    kind: str
    parameter: float | None = None

    LABELS = {
        "bounded": "GloballyBounded",
        "log": "LogGrowth",
        "power": "PowerGrowth",
        "negligible": "NegligibleToOrder",
    }

    def __str__(self):
        label = self.LABELS[self.kind]
        if self.parameter is None:
            return label
        if self.kind == "negligible":
            return "%s(%d)" % (label, int(self.parameter))
        return "%s(%.6g)" % (label, self.parameter)


def bounded_class() -> GrowthClass:
    return GrowthClass("bounded")


def log_class(slope: float) -> GrowthClass:
    return GrowthClass("log", float(slope))


def power_class(exponent: float) -> GrowthClass:
    return GrowthClass("power", float(exponent))


def negligible_class(order: int) -> GrowthClass:
    return GrowthClass("negligible", int(order))


@dataclass(frozen=True)
class GrowthReport:
    """Sampled sup norms over a schedule plus the fitted growth class."""

    epsilon_schedule: tuple
    sup_norms: tuple
    fitted_class: GrowthClass
    fit_residual: float
    model_residuals: dict = field(default_factory=dict)

    def csv_rows(self):
        return list(zip(self.epsilon_schedule, self.sup_norms))

    def csv_footer(self) -> str:
        payload = {
            "fitted_class": GrowthClass.LABELS[self.fitted_class.kind],
            "parameter": self.fitted_class.parameter,
            "residual": self.fit_residual,
        }
        return "# fit: " + json.dumps(payload)


def _region_grid(region, resolution: int):
    """Uniform sample grid for a 1-D interval or a 2-D rectangle."""
    if np.ndim(region[0]) == 0:
        lo, hi = region
        return (np.linspace(float(lo), float(hi), resolution),)
    axes = [np.linspace(float(lo), float(hi), resolution) for lo, hi in region]
    mesh = np.meshgrid(*axes, indexing="ij")
    return tuple(m.ravel() for m in mesh)


def _family_sup(fam_eval, eps: float, grid) -> float:
    """Sampled sup of |family| over the grid, with a vectorization fallback."""
    try:
        vals = np.asarray(fam_eval(eps, *grid), dtype=float)
        if vals.shape != grid[0].shape:
            raise TypeError
    except (TypeError, ValueError):
        vals = np.array([fam_eval(eps, *pt) for pt in zip(*grid)], dtype=float)
    if not np.all(np.isfinite(vals)):
        bad = int(np.argmin(np.isfinite(vals)))
        point = tuple(float(g[bad]) for g in grid)
        raise EmbeddingError(
            "non-finite family value at eps=%g, point=%s" % (eps, point))
    return float(np.max(np.abs(vals)))


def _relative_rms(pred: np.ndarray, sups: np.ndarray) -> float:
    scale = max(float(np.sqrt(np.mean(sups ** 2))), 1e-300)
    return float(np.sqrt(np.mean((pred - sups) ** 2)) / scale)


def _fit_models(eps: np.ndarray, sups: np.ndarray):
    """Least-squares fits of the three growth models, residuals in value space."""
    L = np.log(1.0 / eps)
    fits = {}

    const = float(np.mean(sups))
    fits["bounded"] = (const, _relative_rms(np.full_like(sups, const), sups))

    a, b = np.polyfit(L, sups, 1)
    fits["log"] = ((float(a), float(b)), _relative_rms(a * L + b, sups))

    if np.all(sups > 0):
        p, c = np.polyfit(L, np.log(sups), 1)
        pred = np.exp(c + p * L)
        fits["power"] = ((float(p), float(c)), _relative_rms(pred, sups))
    else:
        fits["power"] = ((0.0, 0.0), float("inf"))
    return fits


#: growth classes from weakest to strongest
_WEAKNESS_ORDER = ("bounded", "log", "power")

#: residuals within this relative factor of the best are treated as ties
TIE_FACTOR = 1.10


def _decide_class(fits) -> tuple[GrowthClass, float]:
    best = min(res for _, res in fits.values())
    for kind in _WEAKNESS_ORDER:
        params, res = fits[kind]
        if res <= TIE_FACTOR * best + 1e-300:
            if kind == "bounded":
                return bounded_class(), res
            if kind == "log":
                slope = params[0]
                if slope <= 0:
                    return bounded_class(), res
                return log_class(slope), res
            exponent = params[0]
            if exponent <= 0:
                return bounded_class(), res
            return power_class(exponent), res
    raise AssertionError("unreachable")


def classify_growth(fam: EpsilonFamily, region, schedule=DEFAULT_SCHEDULE,
                    grid_resolution: int = 512) -> GrowthReport:
    """Classify empirical growth of a family over a compact region.

    Sup norms are sampled on a uniform grid (an approximation of the true
    sup; resolution configurable).  The three candidate models are fitted by
    least squares on their natural transforms and compared by relative RMS
    residual in value space; ties within 10 percent go to the weaker class.

    Args:
        fam: the family to classify.
        region: (lo, hi) or ((xlo, xhi), (tlo, thi)) compact region.
        schedule: strictly decreasing positive eps values, at least 4
            spanning at least two decades.
        grid_resolution: sample points per axis.

    Raises:
        EmbeddingError: bad schedule, or non-finite family values (the
            offending eps and point are reported).
    """
    eps = np.asarray(schedule, dtype=float)
    if len(eps) < 4:
        raise EmbeddingError("schedule needs >= 4 entries, got %d" % len(eps))
    if np.any(np.diff(eps) >= 0) or np.any(eps <= 0):
        raise EmbeddingError("schedule must be strictly decreasing and positive")
    if eps[0] / eps[-1] < 99.0:
        raise EmbeddingError("schedule must span at least two decades")

    grid = _region_grid(region, grid_resolution)
    sups = np.array([_family_sup(fam.evaluator, e, grid) for e in eps])

    fits = _fit_models(eps, sups)
    cls, residual = _decide_class(fits)
    return GrowthReport(
        epsilon_schedule=tuple(float(e) for e in eps),
        sup_norms=tuple(float(s) for s in sups),
        fitted_class=cls,
        fit_residual=residual,
        model_residuals={k: v[1] for k, v in fits.items()},
    )


def check_negligible(a: EpsilonFamily, b: EpsilonFamily, region,
                     schedule=DEFAULT_SCHEDULE, q_max: int = 8,
                     grid_resolution: int = 512) -> GrowthReport:
    """Fit the decay order of the difference of two families.

    The difference family is sampled over the region; a decay exponent p in
    sup ~ C * eps^p is fitted in log-log.  Decay of order one or better is
    reported as NegligibleToOrder(floor(p)); otherwise the difference is
    classified like any other family.  Identically vanishing differences
    (all sampled sups below 1e-13) saturate at NegligibleToOrder(q_max).

    The fit residual of a negligible verdict is the log-log RMS.
    """
    if a.domain != b.domain:
        raise EmbeddingError("families do not share a domain: %r vs %r"
                             % (a.domain, b.domain))
    eps = np.asarray(schedule, dtype=float)
    if len(eps) < 4:
        raise EmbeddingError("schedule needs >= 4 entries, got %d" % len(eps))

    def diff_eval(e, *pt):
        return np.asarray(a.evaluator(e, *pt), dtype=float) \
            - np.asarray(b.evaluator(e, *pt), dtype=float)

    grid = _region_grid(region, grid_resolution)
    sups = np.array([_family_sup(diff_eval, e, grid) for e in eps])

    nonzero = sups > ZERO_SUP
    if np.count_nonzero(nonzero) < 2:
        # difference vanishes (or decays below float resolution)
        return GrowthReport(tuple(eps), tuple(sups),
                            negligible_class(q_max), 0.0,
                            {"decay": 0.0})

    le = np.log(eps[nonzero])
    ls = np.log(sups[nonzero])
    p, c = np.polyfit(le, ls, 1)
    loglog_res = float(np.sqrt(np.mean((p * le + c - ls) ** 2)))
    if p >= 1.0:
        return GrowthReport(tuple(eps), tuple(sups),
                            negligible_class(int(math.floor(p))), loglog_res,
                            {"decay": loglog_res, "exponent": float(p)})

    diff_fam = EpsilonFamily(domain=a.domain, evaluator=diff_eval,
                             metadata={"construction": "difference"})
    rep = classify_growth(diff_fam, region, schedule, grid_resolution)
    return GrowthReport(rep.epsilon_schedule, rep.sup_norms, rep.fitted_class,
                        rep.fit_residual,
                        dict(rep.model_residuals, exponent=float(p)))


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------


def fd_smoothness_drift(fn, lo: float, hi: float, samples: int = 9,
                        h: float = 1e-4) -> float:
    """Stability of central-difference derivatives under step refinement.

    Returns the maximum relative drift between derivative estimates at steps
    h and h/2 over sample points; small values indicate a smooth evaluator.
    """
    xs = np.linspace(lo, hi, samples)
    drift = 0.0
    for x in xs:
        d1 = (np.asarray(fn(x + h)) - np.asarray(fn(x - h))) / (2 * h)
        d2 = (np.asarray(fn(x + h / 2)) - np.asarray(fn(x - h / 2))) / h
        scale = max(abs(float(d2)), 1.0)
        drift = max(drift, abs(float(d1) - float(d2)) / scale)
    return drift
