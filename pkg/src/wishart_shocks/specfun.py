"""Special functions and semi-infinite quadrature.

Modified Bessel functions of complex argument go through one routine,
:func:`bessel_i_scaled`, which wraps the AMOS implementation shipped with
scipy.  The power series and large-argument expansion below are kept as
independent reference evaluations for the test-suite.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import special

# |Re x| above which exp(|Re x|) overflows a double
OVERFLOW_EXPONENT = 650.0
SERIES_RADIUS = 20.0

_GL_ORDER = 20
_GL_NODES, _GL_WEIGHTS = leggauss(_GL_ORDER)


class QuadratureError(RuntimeError):
    """Requested tolerance not reached; carries the best estimate seen."""

    def __init__(self, message, estimate, error):
        super().__init__(f"{message} (estimate={estimate!r}, error bound={error:.3e})")
        self.estimate = estimate
        self.error = error


def _check_order(order):
    if not order > -1:
        raise ValueError(f"Bessel order must exceed -1, got {order}")


def bessel_i_scaled(order, x):
    """Return ``(mantissa, exponent)`` with ``I_order(x) = mantissa * exp(exponent)``.

    ``exponent`` is ``|Re x|`` so the mantissa stays O(1) for any argument.
    Works elementwise on arrays.
    """
    _check_order(order)
    x = np.asarray(x, dtype=complex)
    return special.ive(order, x), np.abs(x.real)


def bessel_i(order, x):
    """Modified Bessel function of the first kind for complex ``x``.

    Raises OverflowError when ``|Re x|`` is too large to represent the value;
    use :func:`bessel_i_scaled` there.
    """
    mant, expo = bessel_i_scaled(order, x)
    if np.any(expo > OVERFLOW_EXPONENT):
        raise OverflowError("|Re x| > 650: use bessel_i_scaled")
    out = mant * np.exp(expo)
    return out[()] if out.ndim == 0 else out


def log_gamma(x):
    if not x > 0:
        raise ValueError(f"log_gamma needs x > 0, got {x}")
    return math.lgamma(x)


# reference evaluations (test oracles)

def bessel_i_series(order, x, max_terms=400):
    """Ascending power series; principal branch of (x/2)**order."""
    _check_order(order)
    x = complex(x)
    if x == 0:
        return 1.0 + 0j if order == 0 else 0j
    half = x / 2
    term = np.exp(order * np.log(half) - math.lgamma(order + 1))
    q = half * half
    total = term
    for k in range(max_terms):
        term = term * q / ((k + 1) * (k + 1 + order))
        total += term
        if abs(term) < 1e-17 * abs(total):
            break
    return complex(total)


def bessel_i_asymptotic(order, x):
    """Large-|x| expansion including the recessive exp(-x) part.

    Valid for |arg x| <= pi/2 with |x| >~ 15; the sum is truncated at its
    smallest term.
    """
    _check_order(order)
    x = complex(x)
    mu = 4 * order * order
    coeffs = [1.0]
    for k in range(1, 60):
        nxt = coeffs[-1] * (mu - (2 * k - 1) ** 2) / (k * 8)
        if abs(nxt) / abs(x) ** k > abs(coeffs[-1]) / abs(x) ** (k - 1):
            break
        coeffs.append(nxt)
    s_minus = sum(c * (-1) ** k / x**k for k, c in enumerate(coeffs))
    s_plus = sum(c / x**k for k, c in enumerate(coeffs))
    sign = 1 if x.imag >= 0 else -1
    pref = 1 / np.sqrt(2 * np.pi * x)
    recessive = np.exp(sign * 1j * (order + 0.5) * np.pi) * np.exp(-x) * s_plus
    return complex(pref * (np.exp(x) * s_minus + recessive))


# quadrature

@dataclass(frozen=True)
class QuadratureSpec:
    """Controls for :func:`integrate_semiinfinite`.

    The integrand is assumed to decay like ``exp(-decay_hint * u**decay_power
    + growth_hint * u**2)`` at large ``u``.
    """

    rel_tol: float = 1e-12
    abs_tol: float = 1e-15
    max_panels: int = 500
    decay_hint: float = 0.5
    decay_power: float = 4.0
    growth_hint: float = 0.0

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_panels < 1:
            raise ValueError("max_panels must be >= 1")
        if self.decay_hint <= 0:
            raise ValueError("decay_hint must be positive")


@dataclass(frozen=True)
class QuadratureResult:
    value: complex
    error: float
    roundoff: float
    panels: int
    upper: float


def truncation_point(spec: QuadratureSpec, budget=40.0):
    """Smallest U >= 1 with decay_hint*U**p - growth_hint*U**2 >= budget."""
    c, p, g = spec.decay_hint, spec.decay_power, spec.growth_hint

    def excess(u):
        return c * u**p - g * u * u - budget

    lo, hi = 0.0, 1.0
    while excess(hi) < 0:
        lo, hi = hi, 2 * hi
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if excess(mid) < 0:
            lo = mid
        else:
            hi = mid
    return max(hi, 1e-300)


def _gl(f, a, b):
    half = 0.5 * (b - a)
    u = a + half * (_GL_NODES + 1)
    vals = np.asarray(f(u), dtype=complex)
    return half * np.dot(_GL_WEIGHTS, vals), half * np.dot(_GL_WEIGHTS, np.abs(vals))


def _panel(f, a, b):
    coarse, _ = _gl(f, a, b)
    m = 0.5 * (a + b)
    left, la = _gl(f, a, m)
    right, ra = _gl(f, m, b)
    fine = left + right
    return fine, abs(fine - coarse), la + ra


def integrate_semiinfinite(f, spec: QuadratureSpec = QuadratureSpec(), *,
                           upper=None, initial_panels=8, breakpoints=(),
                           rel_noise=None) -> QuadratureResult:
    """Integrate a vectorised ``f`` over [0, inf) by adaptive Gauss-Legendre panels.

    The range is cut at ``upper`` (or at :func:`truncation_point`, extended
    while the sampled tail is not negligible).  Panels are bisected
    worst-first; the returned result is the lowest-error estimate seen.
    ``rel_noise`` is the relative evaluation noise of ``f`` (default 8 eps);
    it sets the round-off floor below which bisection stops.
    """
    if upper is None:
        upper = truncation_point(spec)
        grid = np.linspace(0.0, upper, 257)
        peak = np.max(np.abs(f(grid)))
        for _ in range(60):
            tail = np.max(np.abs(f(np.linspace(0.9 * upper, upper, 9))))
            if tail <= 1e-18 * max(peak, 1e-300):
                break
            upper *= 1.25
            peak = max(peak, tail)

    edges = np.linspace(0.0, upper, initial_panels + 1)
    extra = [b for b in breakpoints if 0.0 < b < upper]
    if extra:
        edges = np.unique(np.concatenate([edges, extra]))
    heap = []
    for a, b in zip(edges[:-1], edges[1:]):
        val, err, absval = _panel(f, a, b)
        heap.append((-err, a, b, val, absval))
    heapq.heapify(heap)
    noise = 8 * np.finfo(float).eps if rel_noise is None else max(rel_noise, 8 * np.finfo(float).eps)

    best = None
    while True:
        total = sum(item[3] for item in heap)
        err_sum = math.fsum(-item[0] for item in heap)
        abs_sum = math.fsum(item[4] for item in heap)
        if best is None or err_sum < best[0]:
            best = (err_sum, total, abs_sum)
        # below the round-off floor further bisection cannot help
        if err_sum <= max(spec.abs_tol, spec.rel_tol * abs(total), noise * abs_sum):
            break
        if len(heap) >= spec.max_panels:
            raise QuadratureError("semi-infinite quadrature did not converge",
                                  complex(best[1]), best[0])
        _, a, b, _, _ = heapq.heappop(heap)
        m = 0.5 * (a + b)
        for lo, hi in ((a, m), (m, b)):
            v, e, av = _panel(f, lo, hi)
            heapq.heappush(heap, (-e, lo, hi, v, av))
    err_sum, total, abs_sum = best
    n_panels = len(heap)
    roundoff = noise * abs_sum
    return QuadratureResult(complex(total), float(err_sum), float(roundoff),
                            n_panels, float(upper))
