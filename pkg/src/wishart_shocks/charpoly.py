"""Exact finite-N averaged characteristic polynomial Q(z, tau) = <det(z - L)>.

In macroscopic time Q obeys

    dQ/dtau = -(1/M) z Q'' - ((nu + 1)/M) Q'

and is given for any initial polynomial by the Bessel-kernel integral

    Q(z, tau) = C tau^-1 z^(-nu/2) int_0^inf y^(nu+1) exp(M (z - y^2)/tau)
                I_nu(2 i M y sqrt(z)/tau) Q(-y^2, 0) dy,     C = i^-nu 2M.

The integrand is assembled in log space so the exp(M z / tau) factor and the
growth of I_nu are combined before exponentiation.  For Re sqrt(z) large
compared to sqrt(tau/M) the integral is a cancellation of terms of size
exp(M (Re sqrt z)^2 / tau); the achieved accuracy is checked against the
quadrature round-off and an IllConditionedError is raised when it is lost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .diffusion import EnsembleParams
from .specfun import QuadratureSpec, bessel_i_scaled, integrate_semiinfinite


class IllConditionedError(ArithmeticError):
    pass


@dataclass(frozen=True)
class InitialPolynomial:
    """Monic Q(z, 0) = prod (z - root)^mult."""

    roots: tuple
    multiplicities: tuple

    def __post_init__(self):
        if len(self.roots) != len(self.multiplicities):
            raise ValueError("roots and multiplicities differ in length")
        if any(m < 1 for m in self.multiplicities):
            raise ValueError("multiplicities must be positive")

    @classmethod
    def degenerate(cls, a, N):
        return cls((complex(a * a),), (int(N),))

    @property
    def degree(self):
        return sum(self.multiplicities)

    def is_conjugation_closed(self, tol=1e-12):
        pairs = dict()
        for r, m in zip(self.roots, self.multiplicities):
            pairs[complex(r)] = pairs.get(complex(r), 0) + m
        for r, m in pairs.items():
            match = [v for k, v in pairs.items() if abs(k - r.conjugate()) <= tol]
            if sum(match) != m:
                return False
        return True

    def coefficients(self):
        """Ascending coefficients of the monic polynomial."""
        c = np.array([1.0 + 0j])
        for r, m in zip(self.roots, self.multiplicities):
            for _ in range(m):
                c = np.convolve(c, [-r, 1.0])
        return c

    def log_at(self, x):
        x = np.asarray(x, dtype=complex)
        out = np.zeros_like(x)
        for r, m in zip(self.roots, self.multiplicities):
            out = out + m * np.log(x - r)
        return out

    def __call__(self, x):
        x = np.asarray(x, dtype=complex)
        out = np.ones_like(x)
        for r, m in zip(self.roots, self.multiplicities):
            out = out * (x - r) ** m
        return out


@dataclass(frozen=True)
class ACPContext:
    params: EnsembleParams
    init: InitialPolynomial = None
    quad: QuadratureSpec = field(default_factory=lambda: QuadratureSpec(
        rel_tol=1e-13, abs_tol=1e-300, max_panels=2000, decay_power=2.0))
    nu: float = None
    max_loss: float = 1e-6

    def __post_init__(self):
        if self.init is None:
            object.__setattr__(self, "init",
                               InitialPolynomial.degenerate(self.params.a, self.params.N))
        if self.nu is None:
            object.__setattr__(self, "nu", float(self.params.nu))
        if self.init.degree != self.params.N:
            raise ValueError("initial polynomial degree must equal N")
        if not self.nu > -1:
            raise ValueError("nu must exceed -1")

    @property
    def N(self):
        return self.params.N

    @property
    def M(self):
        return self.params.N + self.nu


@dataclass(frozen=True)
class ScaledACP:
    """Q = mantissa * exp(log_scale); quadrature bookkeeping attached."""

    mantissa: complex
    log_scale: float
    quad_error: float
    roundoff: float

    @property
    def value(self):
        return self.mantissa * math.exp(self.log_scale)

    @property
    def relative_error(self):
        return (self.quad_error + self.roundoff) / max(abs(self.mantissa), 1e-300)


def _log_kernel(nu, M, z, tau, y):
    """log of i^-nu z^(-nu/2) I_nu(2 i M y sqrt(z)/tau), for Im z >= 0."""
    y = np.asarray(y, dtype=float)
    if z == 0:
        with np.errstate(divide="ignore"):
            return nu * np.log(M * y / tau + 0j) - math.lgamma(nu + 1)
    if z.imag == 0 and z.real < 0:
        x = 2 * M * y * math.sqrt(-z.real) / tau
        mant, expo = bessel_i_scaled(nu, x + 0j)
        with np.errstate(divide="ignore"):
            return np.log(mant) + expo - 0.5 * nu * math.log(-z.real)
    w = 2j * M * y * np.sqrt(z) / tau
    mant, expo = bessel_i_scaled(nu, w)
    with np.errstate(divide="ignore"):
        return np.log(mant) + expo - 0.5 * nu * np.log(z) - 0.5j * math.pi * nu


def _log_integrand(ctx, z, tau, y, conj):
    nu, M = ctx.nu, ctx.M
    zk = z.conjugate() if conj else z
    lk = _log_kernel(nu, M, zk, tau, y)
    if conj:
        lk = np.conj(lk)
    with np.errstate(divide="ignore"):
        return ((nu + 1) * np.log(y) + M * (z - y * y) / tau + lk
                + ctx.init.log_at(-y * y))


def _y_range(ctx, z, tau):
    """Truncation point, peak log-magnitude and quadrature breakpoints."""
    M = ctx.M
    width = math.sqrt(tau / M)
    Y = 4 * abs(np.sqrt(z).imag) + width * (8 + 2 * math.sqrt(ctx.N + ctx.nu + 2))
    conj = z.imag < 0
    for _ in range(60):
        y = np.linspace(0.0, Y, 4001)[1:]
        lf = _log_integrand(ctx, z, tau, y, conj).real
        peak = np.max(lf)
        if lf[-1] < peak - 60:
            break
        Y *= 1.5
    # zoom in on the maximum; the peak can be narrower than the scan spacing
    k = int(np.argmax(lf))
    h = Y / 4000
    for _ in range(3):
        yl = np.linspace(max(y[k] - 2 * h, h * 1e-3), y[k] + 2 * h, 401)
        ll = _log_integrand(ctx, z, tau, yl, conj).real
        j = int(np.argmax(ll))
        y_peak, h = yl[j], 4 * h / 400
        y, lf, k = yl, ll, j
        peak = max(peak, ll[j])
    yy = np.linspace(0.0, Y, 4001)[1:]
    ly = _log_integrand(ctx, z, tau, yy, conj).real
    cut = yy[np.flatnonzero(ly > peak - 60)[-1]]
    upper = min(Y, 1.2 * cut + 2 * (Y / 4000))
    breaks = [y_peak + s * width * f for s in (-1, 1) for f in (0.5, 1, 2, 4, 8, 16)]
    return upper, peak, [y_peak] + breaks


def q_integral_scaled(ctx: ACPContext, z, tau) -> ScaledACP:
    if not tau > 0:
        raise ValueError("tau must be positive")
    z = complex(z)
    conj = z.imag < 0
    upper, shift, breaks = _y_range(ctx, z, tau)

    def f(y):
        with np.errstate(under="ignore"):
            return np.exp(_log_integrand(ctx, z, tau, y, conj) - shift)

    # the log-integrand carries terms of size ~M upper^2/tau that cancel
    yp = breaks[0]
    big = ctx.M * (abs(z) + yp * yp + 2 * yp * abs(np.sqrt(z))) / tau
    noise = 2 * np.finfo(float).eps * (1 + big)
    res = integrate_semiinfinite(f, ctx.quad, upper=upper, initial_panels=16,
                                 breakpoints=breaks, rel_noise=noise)
    log_c = math.log(2 * ctx.M / tau)
    return ScaledACP(res.value, shift + log_c, res.error, res.roundoff)


def q_integral(ctx: ACPContext, z, tau):
    """Q(z, tau) from the Bessel-kernel integral representation."""
    s = q_integral_scaled(ctx, z, tau)
    if s.relative_error > ctx.max_loss:
        raise IllConditionedError(
            f"relative accuracy {s.relative_error:.2e} at z={z}, tau={tau}: "
            "cancellation of order exp(M (Re sqrt z)^2 / tau)")
    return complex(s.value)


def conditioning_exponent(ctx: ACPContext, z, tau):
    """M (Re sqrt z)^2 / tau: the size of the cancellation in the integral."""
    return ctx.M * np.sqrt(complex(z)).real ** 2 / tau


def q_real_path(ctx: ACPContext, z, tau):
    """Same integral at real z > 0 with the manifestly real kernel z^(-nu/2) J_nu."""
    if not z > 0:
        raise ValueError("real path needs z > 0")
    nu, M = ctx.nu, ctx.M
    b = 2 * M * math.sqrt(z) / tau
    upper, shift, breaks = _y_range(ctx, complex(z), tau)

    def f(y):
        with np.errstate(divide="ignore", under="ignore"):
            lg = ((nu + 1) * np.log(y) + M * (z - y * y) / tau
                  + ctx.init.log_at(-y * y) - shift)
            return np.exp(lg) * special.jv(nu, b * y) * z ** (-0.5 * nu)

    res = integrate_semiinfinite(f, ctx.quad, upper=upper, initial_panels=16,
                                 breakpoints=breaks)
    return complex(res.value * math.exp(shift + math.log(2 * M / tau)))


def real_kernel_identity_check(ctx: ACPContext, z, tau):
    """|Q_complex - Q_real| at real z > 0."""
    return abs(q_integral(ctx, complex(z), tau) - q_real_path(ctx, z, tau))


# exact polynomial route

def flow_matrix(N, nu, M):
    """Generator A of dc/dtau = A c on ascending coefficients (nilpotent)."""
    A = np.zeros((N + 1, N + 1))
    for k in range(1, N + 1):
        A[k - 1, k] = -k * (k + nu) / M
    return A


def evolve_coefficients(c0, nu, M, tau):
    """exp(tau A) c0, summed exactly (A^(N+1) = 0)."""
    c0 = np.asarray(c0, dtype=complex)
    A = flow_matrix(len(c0) - 1, nu, M) * tau
    out = c0.copy()
    term = c0.copy()
    for k in range(1, len(c0)):
        term = A @ term / k
        out = out + term
    return out


def polynomial_flow(init: InitialPolynomial, nu, M, z, tau):
    c = evolve_coefficients(init.coefficients(), nu, M, tau)
    return np.polynomial.polynomial.polyval(np.asarray(z, dtype=complex), c)


def laguerre_reference(N, nu, z, tau, M=None):
    """Monic time-dependent Laguerre polynomial: the a = 0 solution."""
    if M is None:
        M = N + nu
    c0 = np.zeros(N + 1)
    c0[N] = 1.0
    c = evolve_coefficients(c0, nu, M, tau)
    out = np.polynomial.polynomial.polyval(np.asarray(z, dtype=complex), c)
    return complex(out) if np.ndim(out) == 0 else out


def polynomial_probe(ctx: ACPContext, tau, center=None, radius=None, extra=1):
    """Taylor coefficients of q_integral in z from samples on a circle.

    Returns ascending coefficients of degree N + extra; for an exact
    polynomial the top ``extra`` vanish and coefficient N is the leading one.
    """
    N = ctx.N
    if center is None:
        center = -(1.0 + tau)
    if radius is None:
        radius = 0.5 * abs(center)
    K = N + 1 + extra
    w = np.exp(2j * np.pi * np.arange(K) / K)
    vals = np.array([q_integral(ctx, center + radius * wk, tau) for wk in w])
    shifted = np.fft.fft(vals) / K
    # conj ordering: fft gives sum v_k w_k^-j
    shifted = shifted / radius ** np.arange(K)
    # convert from powers of (z - center) to powers of z
    poly = np.polynomial.Polynomial([0.0])
    base = np.polynomial.Polynomial([-center, 1.0])
    for j, c in enumerate(shifted):
        poly = poly + c * base**j
    return poly.coef


def pde_residual(ctx: ACPContext, z_grid, tau_grid, h_z=0.05, h_tau=0.05,
                 direction=1j, q=None):
    """Max relative residual of the ACP equation by 5-point central differences.

    Derivatives in z are taken along ``direction`` (Q is analytic in z).
    """
    if q is None:
        # accuracy judged on the residual's own scale 1 + |Q|, which stays meaningful at zeros of Q
        def q(zz, tt):
            r = q_integral_scaled(ctx, zz, tt)
            v = r.value
            if r.relative_error * abs(v) > ctx.max_loss * (1 + abs(v)):
                raise IllConditionedError(
                    f"absolute accuracy {r.relative_error * abs(v):.3g} at z={zz!r}, tau={tt!r}")
            return v
    M, nu = ctx.M, ctx.nu
    d = complex(direction) / abs(direction)
    worst = 0.0
    for z in np.atleast_1d(z_grid):
        for tau in np.atleast_1d(tau_grid):
            if tau - 2 * h_tau <= 0:
                raise ValueError("tau grid too close to 0 for the stencil")
            fz = [q(z + k * h_z * d, tau) for k in (-2, -1, 0, 1, 2)]
            ft = [q(z, tau + k * h_tau) for k in (-2, -1, 1, 2)]
            Q = fz[2]
            dz = (fz[0] - 8 * fz[1] + 8 * fz[3] - fz[4]) / (12 * h_z * d)
            dzz = (-fz[0] + 16 * fz[1] - 30 * fz[2] + 16 * fz[3] - fz[4]) / (12 * (h_z * d) ** 2)
            dt = (ft[0] - 8 * ft[1] + 8 * ft[2] - ft[3]) / (12 * h_tau)
            r = abs(dt + z * dzz / M + (nu + 1) * dz / M) / (1 + abs(Q))
            worst = max(worst, r)
    return worst


def chiral_lift(w, tau, ctx: ACPContext):
    """Chiral-ensemble ACP: w^nu Q(w^2, tau)."""
    nu = ctx.nu
    if nu != int(nu) or nu < 0:
        raise ValueError("chiral lift needs integer nu >= 0")
    w = complex(w)
    if tau == 0:
        return w ** int(nu) * complex(ctx.init(w * w))
    return w ** int(nu) * q_integral(ctx, w * w, tau)
