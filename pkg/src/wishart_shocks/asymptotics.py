"""Critical-point asymptotics: saddles, the Bessoid function and its limits.

Near (z, tau) = (0, a^2) the rescaled characteristic polynomial approaches

    bessoid(s, t) = s^(-nu/2) int_0^inf u^(nu+1) exp(-u^4/2 + u^2 t) I_nu(2 i u sqrt s) du

with z = N^-3/2 a^2 s and tau = a^2 + N^-1/2 a^2 t.  At nu = -1/2 the Bessel
function is elementary and the integral reduces to the symmetric Pearcey
integral.  All square roots of s are principal.
"""

from __future__ import annotations

import cmath
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import special

from .charpoly import ACPContext, q_integral_scaled
from .diffusion import EnsembleParams
from .specfun import QuadratureSpec, integrate_semiinfinite

MERGE_TOL = 1e-6
DEFAULT_QUAD = QuadratureSpec(rel_tol=1e-12, abs_tol=1e-300, max_panels=2000,
                              decay_hint=0.5, decay_power=4.0)


@dataclass(frozen=True)
class MicroCoordinates:
    s: complex
    t: float
    nu: float = 0.0

    def __post_init__(self):
        if not self.nu > -1:
            raise ValueError("nu must exceed -1")
        object.__setattr__(self, "s", complex(self.s))
        object.__setattr__(self, "t", float(self.t))


@dataclass(frozen=True)
class SaddleSet:
    roots: tuple
    merged: bool
    residual: float


@dataclass(frozen=True)
class BessoidValue:
    value: complex
    error: float


def _check_comparable(s):
    if s == 0 or cmath.phase(s) == 0.0:
        raise ValueError("comparisons need arg s != 0")


# saddle equation

def saddle_coefficients(z, tau, a):
    """y^3 - i sqrt(z) y^2 + (a^2 - tau) y - i sqrt(z) a^2, highest power first."""
    w = 1j * cmath.sqrt(complex(z))
    a2 = a * a
    return np.array([1.0, -w, a2 - tau, -w * a2], dtype=complex)


def saddle_discriminant(z, tau, a):
    c3, c2, c1, c0 = saddle_coefficients(z, tau, a)
    return complex(c2 * c2 * c1 * c1 - 4 * c3 * c1**3 - 4 * c2**3 * c0
                   - 27 * c3 * c3 * c0 * c0 + 18 * c3 * c2 * c1 * c0)


def saddle_points(z, tau, a) -> SaddleSet:
    """The three saddles of the y-integral near the critical point."""
    if not a > 0:
        raise ValueError("a must be positive")
    c = saddle_coefficients(z, tau, a)
    roots = np.roots(c)
    # Newton polish; np.roots is only backward stable
    for _ in range(3):
        p = np.polyval(c, roots)
        dp = np.polyval(np.polyder(c), roots)
        ok = np.abs(dp) > 1e-300
        roots = np.where(ok, roots - p / np.where(ok, dp, 1), roots)
    roots = roots[np.lexsort((roots.imag, roots.real))]
    gaps = [abs(roots[i] - roots[j]) for i in range(3) for j in range(i + 1, 3)]
    resid = float(np.max(np.abs(np.polyval(c, roots))))
    return SaddleSet(tuple(complex(r) for r in roots), max(gaps) <= MERGE_TOL, resid)


# Bessoid and Pearcey

def _bessoid_kernel(nu, s, u, prefactor):
    """s^(-nu/2) I_nu(2 i u sqrt s) (or I_nu alone), evaluated in scaled form."""
    if s == 0:
        if not prefactor:
            return np.full(u.shape, 1.0 + 0j if nu == 0 else 0j)
        return (1j * u) ** nu / special.gamma(nu + 1)
    x = 2j * u * cmath.sqrt(s)
    k = special.ive(nu, x) * np.exp(np.abs(x.real))
    return k * s ** (-nu / 2) if prefactor else k


def _growth(s, t):
    return max(t, 0.0) + 2 * abs(cmath.sqrt(complex(s)).imag)


def bessoid_eval(mc: MicroCoordinates, prefactor=True, spec=DEFAULT_QUAD) -> BessoidValue:
    s, t, nu = mc.s, mc.t, mc.nu
    spec = QuadratureSpec(spec.rel_tol, spec.abs_tol, spec.max_panels, 0.5,
                          4.0, _growth(s, t))

    def f(u):
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            base = u ** (nu + 1) * np.exp(-0.5 * u**4 + u * u * t)
        return np.where(u > 0, base * _bessoid_kernel(nu, s, u, prefactor), 0)

    res = integrate_semiinfinite(f, spec)
    return BessoidValue(res.value, max(res.error, res.roundoff))


def bessoid(mc: MicroCoordinates, prefactor=True, spec=DEFAULT_QUAD):
    """Bessoid function at microscopic coordinates ``mc``.

    With ``prefactor=False`` the s^(-nu/2) in front is dropped; that is the
    normalisation under which nu = -1/2 reproduces :func:`symmetric_pearcey`.
    """
    return bessoid_eval(mc, prefactor, spec).value


def pearcey_integral(s, t, spec=DEFAULT_QUAD):
    """int_0^inf exp(-u^4/2 + u^2 t) cos(2 u sqrt s) du (no prefactor)."""
    s = complex(s)
    r = cmath.sqrt(s)
    spec = QuadratureSpec(spec.rel_tol, spec.abs_tol, spec.max_panels, 0.5, 4.0,
                          _growth(s, t))
    res = integrate_semiinfinite(
        lambda u: np.exp(-0.5 * u**4 + u * u * t) * np.cos(2 * u * r), spec)
    return res.value


def symmetric_pearcey(s, t, spec=DEFAULT_QUAD):
    """(i pi)^(-1/2) s^(-1/4) times :func:`pearcey_integral`."""
    s = complex(s)
    if s == 0:
        raise ValueError("s^(-1/4) is singular at s = 0")
    return (1j * math.pi) ** -0.5 * s**-0.25 * pearcey_integral(s, t, spec)


def canonical_bessoid(x, y, spec=DEFAULT_QUAD):
    """Optical Bessoid of order zero, int_0^inf u exp(i u^4 + i u^2 y) I_0(i u x) du.

    The oscillatory exponent is tamed by rotating the contour to
    u = v exp(i pi/8), where i u^4 = -v^4.
    """
    rot = cmath.exp(1j * math.pi / 8)
    spec = QuadratureSpec(spec.rel_tol, spec.abs_tol, spec.max_panels, 1.0, 4.0,
                          abs(y) + abs(x))

    def f(v):
        u = v * rot
        return rot * u * np.exp(-v**4 + 1j * u * u * y) * special.iv(0, 1j * u * x)

    return integrate_semiinfinite(f, spec).value


# finite N versus the limit

def scaling_map(N, a, mc: MicroCoordinates):
    if N < 1:
        raise ValueError("N must be >= 1")
    a2 = a * a
    return N**-1.5 * a2 * mc.s, a2 + N**-0.5 * a2 * mc.t


def _context(N, a, base: ACPContext):
    nu = base.nu
    params = EnsembleParams(N, N + max(0, int(math.ceil(nu))), a)
    return ACPContext(params, quad=base.quad, nu=nu, max_loss=base.max_loss)


def _log_q(N, a, mc, base):
    """log Q at the rescaled point (complex log, any branch)."""
    ctx = _context(N, a, base)
    z, tau = scaling_map(N, a, mc)
    q = q_integral_scaled(ctx, z, tau)
    return cmath.log(q.mantissa) + q.log_scale


def limit_normalisation(N, a, nu):
    """log of (-a^2)^N N^((nu+1)/2) 2 i^-nu, the factor separating Q from the limit."""
    return (N * (2 * math.log(a) + 1j * math.pi) + 0.5 * (nu + 1) * math.log(N)
            + math.log(2) - 0.5j * math.pi * nu)


def convergence_comparator(N_list, a, mc: MicroCoordinates, ctx: ACPContext,
                           mode="ratio", s_ref=None, workers=None):
    """Relative deviation of rescaled finite-N Q from the Bessoid limit, per N.

    ``mode="absolute"`` divides Q by :func:`limit_normalisation`.
    ``mode="ratio"`` compares Q(s)/Q(s_ref) with bessoid(s)/bessoid(s_ref) at
    each N, so no normalisation enters; ``s_ref`` defaults to s/2.
    """
    if mode not in ("absolute", "ratio"):
        raise ValueError(f"unknown mode {mode!r}")
    if abs(mc.nu - ctx.nu) > 0:
        raise ValueError("mc.nu and ctx.nu differ")
    _check_comparable(mc.s)
    N_list = [int(n) for n in N_list]
    if mode == "ratio":
        s_ref = mc.s / 2 if s_ref is None else complex(s_ref)
        _check_comparable(s_ref)
        ref = MicroCoordinates(s_ref, mc.t, mc.nu)
        target = bessoid(mc) / bessoid(ref)

        def one(N):
            return abs(cmath.exp(_log_q(N, a, mc, ctx) - _log_q(N, a, ref, ctx)) / target - 1)
    else:
        target = bessoid(mc)

        def one(N):
            logq = _log_q(N, a, mc, ctx) - limit_normalisation(N, a, mc.nu)
            return abs(cmath.exp(logq) / target - 1)

    with ThreadPoolExecutor(workers or len(N_list) or 1) as pool:
        devs = list(pool.map(one, N_list))
    return list(zip(N_list, devs))


def convergence_contract(rows, tol=0.05):
    """(strictly decreasing, last deviation <= tol)."""
    devs = [d for _, d in sorted(rows)]
    mono = all(b < a for a, b in zip(devs, devs[1:]))
    return mono, bool(devs and devs[-1] <= tol)
