"""Compactly supported mollifier kernels with prescribed vanishing moments.

A kernel here is a smooth even function chi with support [-R, R], unit mass,
and vanishing moments up to a requested order q:

    integral chi = 1,    integral x^k chi = 0  for 1 <= k <= q.

Construction: chi(x) = P(x^2) * rho(x/R) where rho is the standard bump
exp(-1/(1-s^2)) on |s| < 1 and P is an even polynomial whose coefficients
solve the (small) moment system.  Odd moments vanish by symmetry, so only
q // 2 + 1 coefficients are needed.

Kernels are immutable after construction and safe to evaluate concurrently.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Kernel",
    "ScaledKernel",
    "KernelError",
    "build_kernel",
    "scale_kernel",
    "convolve",
    "bump",
    "bump_derivative",
    "gauss_legendre",
    "integrate",
    "integrate_split",
]

#: condition number above which the moment system is reported as ill-conditioned
ILL_CONDITIONED = 1e10

MASS_TOL = 1e-10
MOMENT_TOL = 1e-8


class KernelError(Exception):
    """Kernel construction or evaluation failure."""


def bump(s):
    """Standard bump exp(-1/(1-s^2)) on |s| < 1, zero outside. Vectorized."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    out[inside] = np.exp(-1.0 / (1.0 - si * si))
    if out.ndim == 0:
        return float(out)
    return out


def bump_derivative(s):
    """Derivative of the standard bump; zero outside |s| < 1. Vectorized."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    w = 1.0 - si * si
    out[inside] = np.exp(-1.0 / w) * (-2.0 * si / (w * w))
    if out.ndim == 0:
        return float(out)
    return out


# ---------------------------------------------------------------------------
# quadrature: composite Gauss-Legendre, order 8, one refinement pass
# ---------------------------------------------------------------------------

_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def gauss_legendre(order: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [-1, 1], cached."""
    if order not in _GL_CACHE:
        _GL_CACHE[order] = np.polynomial.legendre.leggauss(order)
    return _GL_CACHE[order]


def integrate(f, a: float, b: float, subintervals: int = 16, order: int = 8) -> float:
    """Composite Gauss-Legendre integral of a vectorized integrand on [a, b]."""
    if b <= a:
        return 0.0
    nodes, weights = gauss_legendre(order)
    edges = np.linspace(a, b, subintervals + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1:] - edges[:-1])
    pts = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    vals = np.asarray(f(pts), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise KernelError("non-finite integrand values on [%g, %g]" % (a, b))
    w = (half[:, None] * weights[None, :]).ravel()
    return float(np.dot(vals, w))


def integrate_split(f, a: float, b: float, cuts=(), subintervals: int = 16,
                    order: int = 8) -> float:
    """Integrate on [a, b] split at interior cut points (one smooth piece each).

    Each piece gets the full composite rule plus one refinement pass; the
    refined value is returned.
    """
    points = [a] + sorted(c for c in cuts if a < c < b) + [b]
    total = 0.0
    for lo, hi in zip(points[:-1], points[1:]):
        coarse = integrate(f, lo, hi, subintervals, order)
        fine = integrate(f, lo, hi, 2 * subintervals, order)
        # one refinement pass: keep the finer value, the coarse one only
        # serves as an error estimate
        del coarse
        total += fine
    return total


# ---------------------------------------------------------------------------
# kernel types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Kernel:
    """Smooth even kernel P(x^2) * bump(x/R) with q vanishing moments.

    Attributes:
        moment_order: number of vanishing moments q (k = 1..q).
        support_radius: R; the kernel is exactly zero for |x| >= R.
        coefficients: even-polynomial coefficients, P(x^2) = sum c_j x^(2j).
        samples_x / samples_chi: uniform tabulation over [-R, R].
        condition_number: condition of the moment system that was solved.
    """

    moment_order: int
    support_radius: float
    coefficients: np.ndarray
    samples_x: np.ndarray = field(repr=False)
    samples_chi: np.ndarray = field(repr=False)
    condition_number: float = 1.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        p = np.zeros_like(x)
        x2 = x * x
        for c in self.coefficients[::-1]:
            p = p * x2 + c
        out = p * bump(x / self.support_radius)
        if out.ndim == 0:
            return float(out)
        return out

    def derivative(self, x):
        """Analytic d chi / dx (smooth, compactly supported)."""
        x = np.asarray(x, dtype=float)
        x2 = x * x
        p = np.zeros_like(x)
        dp = np.zeros_like(x)
        for c in self.coefficients[::-1]:
            dp = dp * x2 + p
            p = p * x2 + c
        # d/dx P(x^2) = 2x P'(x^2)
        r = self.support_radius
        out = 2.0 * x * dp * bump(x / r) + p * bump_derivative(x / r) / r
        if out.ndim == 0:
            return float(out)
        return out

    @property
    def peak(self) -> float:
        """chi(0), the center value (the maximum for nonnegative kernels)."""
        return float(self(0.0))

    @property
    def nonnegative(self) -> bool:
        """True when the tabulated kernel never dips below zero.

        Holds for q <= 1 (plain normalized bump).  Kernels with q >= 2 must
        change sign, so convolution against them is not an averaging and the
        sup-norm bound of mollification does not apply.
        """
        return bool(np.min(self.samples_chi) >= -1e-15)

    def mass(self, subintervals: int = 32) -> float:
        r = self.support_radius
        return integrate_split(self, -r, r, subintervals=subintervals)

    def moment(self, k: int, subintervals: int = 32) -> float:
        r = self.support_radius
        return integrate_split(lambda x: (x ** k) * self(x), -r, r,
                               subintervals=subintervals)


@dataclass(frozen=True)
class ScaledKernel:
    """Kernel rescaled to width s: x -> base(x/s) / s.

    Unit mass is preserved at every scale; the support shrinks linearly.
    """

    base: Kernel
    scale: float

    def __call__(self, x):
        return self.base(np.asarray(x, dtype=float) / self.scale) / self.scale

    def derivative(self, x):
        s = self.scale
        return self.base.derivative(np.asarray(x, dtype=float) / s) / (s * s)

    @property
    def support_radius(self) -> float:
        return self.base.support_radius * self.scale

    @property
    def moment_order(self) -> int:
        return self.base.moment_order

    def mass(self, subintervals: int = 32) -> float:
        r = self.support_radius
        return integrate_split(self, -r, r, subintervals=subintervals)

    def moment(self, k: int, subintervals: int = 32) -> float:
        r = self.support_radius
        return integrate_split(lambda x: (x ** k) * self(x), -r, r,
                               subintervals=subintervals)


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------


def _solve_dense(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Gaussian elimination with partial pivoting for the small moment system."""
    a = a.astype(float).copy()
    b = b.astype(float).copy()
    n = len(b)
    for col in range(n):
        piv = col + int(np.argmax(np.abs(a[col:, col])))
        if abs(a[piv, col]) < 1e-300:
            raise KernelError(
                "moment system is singular; quadrature resolution too coarse, "
                "retry with more subintervals")
        if piv != col:
            a[[col, piv]] = a[[piv, col]]
            b[[col, piv]] = b[[piv, col]]
        for row in range(col + 1, n):
            m = a[row, col] / a[col, col]
            a[row, col:] -= m * a[col, col:]
            b[row] -= m * b[col]
    x = np.zeros(n)
    for row in range(n - 1, -1, -1):
        x[row] = (b[row] - np.dot(a[row, row + 1:], x[row + 1:])) / a[row, row]
    return x


def build_kernel(q: int, support_radius: float, resolution: int = 2049,
                 quad_subintervals: int = 32) -> Kernel:
    """Build an even kernel with unit mass and q vanishing moments.

    Args:
        q: requested moment order, q >= 0.  Odd moments vanish by symmetry,
           so q = 1 yields the same kernel as q = 0.
        support_radius: half-width R of the support, > 0.
        resolution: number of tabulation samples over [-R, R].
        quad_subintervals: base subinterval count of the composite rule used
            for the moment integrals (one refinement pass on top).

    Raises:
        KernelError: on invalid arguments, a singular moment system, or when
            the built kernel misses its mass/moment tolerances.

    Warns:
        UserWarning: when the moment system condition number exceeds 1e10;
            the kernel is still returned with ``condition_number`` set.
    """
    if q < 0:
        raise KernelError("moment order must be >= 0, got %r" % (q,))
    if support_radius <= 0:
        raise KernelError("support radius must be > 0, got %r" % (support_radius,))

    ncoef = q // 2 + 1
    r = support_radius
    # even moments of the raw bump on [-R, R]; M[i, j] multiplies coefficient
    # c_j in the constraint  integral x^(2i) P(x^2) rho(x/R) dx = delta_i0
    needed = {2 * (i + j) for i in range(ncoef) for j in range(ncoef)}
    mom = {
        k: integrate_split(lambda x, k=k: (x ** k) * bump(x / r), -r, r,
                           subintervals=quad_subintervals)
        for k in needed
    }
    a = np.array([[mom[2 * (i + j)] for j in range(ncoef)] for i in range(ncoef)])
    rhs = np.zeros(ncoef)
    rhs[0] = 1.0
    cond = float(np.linalg.cond(a))
    if cond > ILL_CONDITIONED:
        warnings.warn(
            "moment system for q=%d is ill-conditioned (cond=%.3e); "
            "the kernel coefficients may be inaccurate" % (q, cond),
            stacklevel=2)
    coeffs = _solve_dense(a, rhs)

    xs = np.linspace(-r, r, resolution)
    kern = Kernel(moment_order=q, support_radius=r, coefficients=coeffs,
                  samples_x=xs, samples_chi=np.empty(0),
                  condition_number=cond)
    object.__setattr__(kern, "samples_chi", kern(xs))

    mass = kern.mass(quad_subintervals)
    if abs(mass - 1.0) > MASS_TOL:
        raise KernelError(
            "kernel mass off by %.3e (tolerance %.1e); quadrature too coarse"
            % (abs(mass - 1.0), MASS_TOL))
    for k in range(1, q + 1):
        mk = kern.moment(k, quad_subintervals)
        if abs(mk) > MOMENT_TOL:
            raise KernelError(
                "moment %d is %.3e (tolerance %.1e); quadrature too coarse or "
                "system ill-conditioned (cond=%.3e)" % (k, abs(mk), MOMENT_TOL, cond))
    return kern


def scale_kernel(kernel: Kernel, scale: float) -> ScaledKernel:
    """Rescale a kernel to width ``scale`` (mollification width)."""
    if scale <= 0:
        raise KernelError("scale must be > 0, got %r" % (scale,))
    return ScaledKernel(base=kernel, scale=scale)


# ---------------------------------------------------------------------------
# convolution against piecewise-smooth data
# ---------------------------------------------------------------------------


def convolve(f, kernel: "ScaledKernel | Kernel", x: float, jumps=(),
             subintervals: int = 16, order: int = 8) -> float:
    """Evaluate (f * kernel)(x) = integral f(x - y) kernel(y) dy.

    The integration window is the kernel support [-r, r].  The window is
    split at every jump point of f that falls inside it, so each quadrature
    piece sees a smooth integrand.

    Args:
        f: bounded piecewise-smooth evaluator, vectorized over numpy arrays.
        kernel: a ScaledKernel (or unscaled Kernel).
        x: evaluation point.
        jumps: sorted-or-not iterable of jump locations of f.

    Raises:
        KernelError: if f takes non-finite values on the window.
    """
    r = kernel.support_radius
    # y-coordinates where f(x - y) is non-smooth
    cuts = [x - j for j in jumps if -r < x - j < r]

    def integrand(y):
        vals = np.asarray(f(x - y), dtype=float) * kernel(y)
        return vals

    try:
        return integrate_split(integrand, -r, r, cuts=cuts,
                               subintervals=subintervals, order=order)
    except KernelError:
        raise KernelError(
            "f is unbounded or non-finite on the window [%g, %g]"
            % (x - r, x + r))


def convolve_derivative(f, kernel: ScaledKernel, x: float, jumps=(),
                        subintervals: int = 16, order: int = 8) -> float:
    """d/dx of the mollification: integral f(x - y) kernel'(y) dy."""
    r = kernel.support_radius
    cuts = [x - j for j in jumps if -r < x - j < r]

    def integrand(y):
        return np.asarray(f(x - y), dtype=float) * kernel.derivative(y)

    try:
        return integrate_split(integrand, -r, r, cuts=cuts,
                               subintervals=subintervals, order=order)
    except KernelError:
        raise KernelError(
            "f is unbounded or non-finite on the window [%g, %g]"
            % (x - r, x + r))
