"""Large-N resolvent of the diffusing Wishart ensemble.

The resolvent G(z, tau) is a root of the cubic obtained by clearing
denominators in

    z = 1/G + tau/(1 - r tau G) + a^2/(1 - r tau G)^2 .

The physical root is selected by continuation from a large-|z| anchor where
G ~ 1/z.  Spectral edges follow from the critical points of the
characteristic map z0 -> z, and the density can be rebuilt independently
from the complex characteristics that cross the real axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import optimize


class BranchAmbiguityError(RuntimeError):
    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class ScalingViolation(RuntimeError):
    pass


class CharacteristicsFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class ResolventQuery:
    z: complex
    tau: float
    r: float = 1.0
    a: float = 1.0

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive (use 1/(z - a^2) at tau = 0)")
        if not 0 < self.r <= 1:
            raise ValueError("r must lie in (0, 1]")
        if self.a < 0:
            raise ValueError("a must be nonnegative")


@dataclass(frozen=True)
class BranchCertificate:
    all_roots: tuple
    chosen_index: int
    criterion: str
    path_steps: int


@dataclass
class DensityCurve:
    lambdas: np.ndarray
    rho: np.ndarray
    tau: float
    normalization_defect: float
    clipped: int = 0


@dataclass(frozen=True)
class ShockFront:
    tau: float
    a: float
    z0c_roots: tuple
    edges: tuple
    support: tuple
    critical: bool


@dataclass(frozen=True)
class CharacteristicPoint:
    x: float
    y: float
    tau: float
    lam: float
    eta: float


# cubic for G

def cubic_coefficients(z, tau, r=1.0, a=1.0):
    """Coefficients (c3, c2, c1, c0) of c3 G^3 + c2 G^2 + c1 G + c0 = 0.

    Broadcasts over ``z``; the last axis holds the four coefficients.
    """
    z = np.asarray(z, dtype=complex)
    rt = r * tau
    c3 = rt * rt * z
    c2 = -2 * rt * z - rt * rt + r * tau * tau
    c1 = z + 2 * rt - tau - a * a
    c0 = -np.ones_like(z)
    return np.stack(np.broadcast_arrays(c3, c2, c1, c0), axis=-1)


def implicit_z(G, tau, r=1.0, a=1.0):
    """Right-hand side of the implicit equation: z as a function of G."""
    G = np.asarray(G, dtype=complex)
    d = 1 - r * tau * G
    return 1 / G + tau / d + a * a / (d * d)


_UNIT = np.exp(2j * np.pi * np.arange(3) / 3)


def _cubic_roots(coeffs):
    """Roots of a batch of cubics (..., 4) -> (..., 3), Newton-polished.

    Closed form on the depressed cubic; the polish restores full accuracy
    except at genuinely repeated roots.
    """
    c = coeffs / coeffs[..., :1]
    b, cc, d = c[..., 1:2], c[..., 2:3], c[..., 3:4]
    d0 = b * b - 3 * cc
    d1 = 2 * b**3 - 9 * b * cc + 27 * d
    disc = np.sqrt(d1 * d1 - 4 * d0**3)
    # larger of the two candidates avoids cancellation
    w = np.where(np.abs(d1 + disc) >= np.abs(d1 - disc), d1 + disc, d1 - disc) / 2
    C = w ** (1 / 3) * _UNIT
    with np.errstate(divide="ignore", invalid="ignore"):
        roots = np.where(C != 0, -(b + C + d0 / C) / 3, -b / 3)
    for _ in range(3):
        p = ((roots + b) * roots + cc) * roots + d
        dp = (3 * roots + 2 * b) * roots + cc
        ok = np.abs(dp) > 1e-300
        roots = np.where(ok, roots - p / np.where(ok, dp, 1), roots)
    return roots


def _track(z, tau, r, a, ratio):
    """Continue the physical root down vertical paths ending at each z.

    Returns (G, roots_at_end, chosen_index, ambiguous_mask, steps).
    """
    z = np.asarray(z, dtype=complex)
    sign = np.where(z.imag < 0, -1.0, 1.0)
    top = 1e3 * (1 + np.abs(z) + a * a + tau)
    floor = np.maximum(np.abs(z.imag), 1e-300)
    n_steps = int(np.ceil(np.log(top.max() / floor.min()) / -np.log(ratio))) + 1
    n_steps = min(n_steps, 4000)
    # per-point geometric schedule from top down to |Im z|
    frac = np.linspace(0.0, 1.0, n_steps)
    log_top, log_bot = np.log(top), np.log(floor)
    anchor = z.real + 1j * sign * top
    roots = _cubic_roots(cubic_coefficients(anchor, tau, r, a))
    idx = np.argmin(np.abs(roots - (1 / anchor)[..., None]), axis=-1)
    G = np.take_along_axis(roots, idx[..., None], -1)[..., 0]
    ambiguous = np.zeros(z.shape, dtype=bool)
    for f in frac[1:]:
        h = np.exp(log_top + f * (log_bot - log_top))
        zs = z.real + 1j * sign * h
        if f == 1.0:
            zs = z
        roots = _cubic_roots(cubic_coefficients(zs, tau, r, a))
        d = np.abs(roots - G[..., None])
        order = np.argsort(d, axis=-1)
        idx = order[..., 0]
        d1 = np.take_along_axis(d, order[..., :1], -1)[..., 0]
        d2 = np.take_along_axis(d, order[..., 1:2], -1)[..., 0]
        ambiguous |= d1 > 0.5 * d2
        G = np.take_along_axis(roots, idx[..., None], -1)[..., 0]
    return G, roots, idx, ambiguous, n_steps


def _track_bucketed(z, tau, r, a, ratio):
    """_track on groups of points with similar path length.

    A batch takes as many steps as its longest path needs, so a few points
    hugging the real axis would otherwise slow down every other point.
    """
    flat = z.reshape(-1)
    top = 1e3 * (1 + np.abs(flat) + a * a + tau)
    span = np.log(top / np.maximum(np.abs(flat.imag), 1e-300))
    bucket = np.ceil(span / 10.0).astype(int)
    G = np.empty(flat.shape, dtype=complex)
    amb = np.zeros(flat.shape, dtype=bool)
    for b in np.unique(bucket):
        sel = bucket == b
        G[sel], _, _, amb[sel], _ = _track(flat[sel], tau, r, a, ratio)
    return G.reshape(z.shape), amb.reshape(z.shape)


def resolvent(z, tau, a=1.0, r=1.0):
    """Physical resolvent G(z, tau) for an array of spectral points."""
    z = np.asarray(z, dtype=complex)
    if tau == 0:
        return 1 / (z - a * a)
    G, amb = _track_bucketed(z, tau, r, a, 0.8)
    if np.any(amb):
        flat = np.flatnonzero(amb)
        zz = z.reshape(-1)[flat]
        G2, _, _, amb2, _ = _track(zz, tau, r, a, ratio=0.8 ** 0.125)
        if np.any(amb2):
            raise BranchAmbiguityError(
                f"root tracking failed at z={zz[amb2][0]!r}, tau={tau}")
        G = G.copy().reshape(-1)
        G[flat] = G2
        G = G.reshape(z.shape)
    return G


def solve_G(q: ResolventQuery):
    """Physical root of the cubic at one query point, with its certificate."""
    G, roots, idx, amb, steps = _track(np.array([q.z]), q.tau, q.r, q.a, 0.8)
    if amb[0]:
        G, roots, idx, amb, steps = _track(np.array([q.z]), q.tau, q.r, q.a,
                                           0.8 ** 0.125)
    cert = BranchCertificate(tuple(complex(v) for v in roots[0]), int(idx[0]),
                             "asymptotic-1/z+continuity", steps)
    if amb[0]:
        raise BranchAmbiguityError(f"root collision along path to {q.z!r}", cert)
    g = complex(G[0])
    if q.z.imag > 0 and g.imag > 1e-12 * max(1.0, abs(g)):
        raise BranchAmbiguityError("selected root violates Im G <= 0", cert)
    return g, cert


# density from the cubic

def density_values(lam, tau, a=1.0, r=1.0, eps=1e-9):
    """rho(lambda) = -Im G(lambda + i0)/pi, Richardson-extrapolated in eps."""
    lam = np.asarray(lam, dtype=float)
    eps = np.asarray(eps, dtype=float)
    g1 = resolvent(lam + 1j * eps, tau, a, r)
    g2 = resolvent(lam + 2j * eps, tau, a, r)
    return -(2 * g1.imag - g2.imag) / np.pi


def _support_nodes(lo, hi, n=300, lo_power=2):
    """Nodes/weights on [lo, hi]; v**lo_power clustering at lo, v**2 at hi."""
    v, w = leggauss(n)
    v = 0.5 * (v + 1)
    w = 0.5 * w
    mid = 0.5 * (lo + hi)
    half = mid - lo
    x_lo = lo + half * v**lo_power
    w_lo = half * lo_power * v ** (lo_power - 1) * w
    x_hi = hi - half * v**2
    w_hi = half * 2 * v * w
    return np.concatenate([x_lo, x_hi]), np.concatenate([w_lo, w_hi])


def spectral_moments(tau, a=1.0, r=1.0, n=300, eps=1e-9):
    """(mass, mean) of the density over its support."""
    lo, hi = support(tau, a, r)
    # hard wall (lambda^-1/2 or lambda^-1/3) needs stronger clustering than a sqrt edge
    x, w = _support_nodes(lo, hi, n, lo_power=6 if lo == 0 else 2)
    # nodes crowd the edges; keep the regulator well below the edge distance
    gap = np.minimum(x - lo, hi - x)
    local = np.minimum(eps, np.maximum(1e-4 * gap, 1e-15 * np.maximum(1.0, x)))
    local = np.where(x < 1e-8, np.maximum(1e-4 * x, 1e-300), local)
    rho = np.clip(density_values(x, tau, a, r, local), 0, None)
    return float(w @ rho), float(w @ (x * rho))


def density(tau, a, r, lambda_grid, eps=1e-9) -> DensityCurve:
    if not 1e-10 <= eps <= 1e-6:
        raise ValueError("eps must lie in [1e-10, 1e-6]")
    lam = np.sort(np.asarray(lambda_grid, dtype=float))
    rho = density_values(lam, tau, a, r, eps)
    clipped = int(np.count_nonzero(rho < 0))
    rho = np.clip(rho, 0, None)
    mass, _ = spectral_moments(tau, a, r, eps=eps)
    return DensityCurve(lam, rho, tau, abs(mass - 1), clipped)


# characteristics and shocks

def characteristic_map(z0, tau, r=1.0, a=1.0):
    """Image z of the initial point z0 after time tau (and G = 1/(r tau + z0))."""
    z0 = np.asarray(z0, dtype=complex)
    if np.any(z0 == 0):
        raise ZeroDivisionError("characteristic map is singular at z0 = 0")
    z = (z0 + r * tau) * (1 + tau / z0 + a * a * (tau * r + z0) / (z0 * z0))
    with np.errstate(divide="ignore", invalid="ignore"):
        G = 1 / (r * tau + z0)
    if z.ndim == 0:
        return complex(z), complex(G)
    return z, G


def _real_cubic_roots(p, q):
    """Real roots of x^3 + p x + q = 0 (trigonometric / Cardano)."""
    disc = -(4 * p**3 + 27 * q * q)
    if p == 0 and q == 0:
        return [0.0, 0.0, 0.0]
    if disc >= 0 and p < 0:
        m = 2 * np.sqrt(-p / 3)
        arg = np.clip(3 * q / (p * m), -1.0, 1.0)
        th = np.arccos(arg) / 3
        return sorted(m * np.cos(th - 2 * np.pi * k / 3) for k in range(3))
    s = np.sqrt(q * q / 4 + p**3 / 27)
    return [float(np.cbrt(-q / 2 + s) + np.cbrt(-q / 2 - s))]


def _edge_images(tau, a):
    """Images of the two nonzero critical points at r = 1, in cancellation-free form.

    At r = 1 the map factors as z = (x + tau)^2 (x + a^2) / x^2; for the lower
    point both x + tau and x + a^2 are rationalised so the sign of the edge is
    exact near tau = a^2, where it vanishes to third order.
    """
    a2 = a * a
    sq = np.sqrt(tau * tau + 8 * a2 * tau)
    hi_t, hi_a = 0.5 * (3 * tau + sq), 0.5 * (tau + 2 * a2 + sq)
    if a2 == 0:
        # Marchenko-Pastur: the lower critical point sits at the pole z0 = 0
        return 0.0, hi_t**2 * hi_a / (0.5 * (tau + sq)) ** 2
    x_lo, x_hi = 0.5 * (tau - sq), 0.5 * (tau + sq)
    lo_t = 4 * tau * (tau - a2) / (3 * tau + sq)
    lo_a = 2 * a2 * (a2 - tau) / (tau + 2 * a2 + sq)
    return lo_t**2 * lo_a / x_lo**2, hi_t**2 * hi_a / x_hi**2


def shock_positions(tau, a=1.0, tol=1e-9) -> ShockFront:
    """Spectral edges at r = 1 from z0^3 - z0 tau (2a^2 + tau) - 2 a^2 tau^2 = 0."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    a2 = a * a
    if tau == 0:
        return ShockFront(0.0, a, (0.0, 0.0, 0.0), (a2,), (a2, a2), False)
    roots = _real_cubic_roots(-tau * (2 * a2 + tau), -2 * a2 * tau * tau)
    # one Newton step tightens the trigonometric roots
    polished = []
    for x in roots:
        f = x**3 - x * tau * (2 * a2 + tau) - 2 * a2 * tau * tau
        df = 3 * x * x - tau * (2 * a2 + tau)
        polished.append(x - f / df if abs(df) > 1e-12 else x)
    roots = tuple(sorted(polished))
    lo, hi = _edge_images(tau, a)
    # z0 = -tau is always a root and maps to the wall at 0
    edges = tuple(sorted({0.0, float(lo) + 0.0, float(hi)}))
    return ShockFront(tau, a, roots, edges, (max(0.0, float(lo)), float(hi)),
                      abs(lo) <= tol and abs(tau - a2) <= tol * max(1, a2))


def lower_edge(tau, a=1.0):
    """Image of the lower nontrivial critical point; crosses 0 at tau = a^2 (r = 1)."""
    if tau == 0:
        return a * a
    return float(_edge_images(tau, a)[0])


def critical_preimages(tau, a=1.0, r=1.0):
    """Real roots of dz/dz0 = 0 for general r (polynomial route)."""
    P = np.polynomial.Polynomial([0, 1]) + r * tau
    P = P * np.polynomial.Polynomial([a * a * r * tau, tau + a * a, 1])
    crit = P.deriv() * np.polynomial.Polynomial([0, 1]) - 2 * P
    roots = crit.roots()
    return np.sort(roots[np.abs(roots.imag) < 1e-9].real)


def support(tau, a=1.0, r=1.0):
    """(lower, upper) end of the large-N spectrum."""
    if tau == 0:
        return a * a, a * a
    pre = critical_preimages(tau, a, r)
    scale = max(1.0, a * a, tau)
    keep = [x for x in pre
            if abs(x) > 1e-9 * scale and abs(x + r * tau) > 1e-7 * scale]
    images = sorted(characteristic_map(x, tau, r, a)[0].real for x in keep)
    hi = images[-1]
    # K^dagger K >= 0: a critical value below 0 is not an edge of the physical branch
    lower = [v for v in images[:-1] if v >= 0]
    return (min(lower) if lower else 0.0), hi


def characteristic_point(x, y, tau, a=1.0) -> CharacteristicPoint:
    """Real/imaginary parts of the image, written out explicitly (a = 1 units)."""
    a2 = a * a
    xs, ys, ts = x / a2, y / a2, tau / a2
    R = xs * xs + ys * ys
    lam = (2 * ts * ts * xs * xs / R**2 + ts * (ts * (xs - 1) + 2 * xs) / R
           + 2 * ts + xs + 1)
    Y = 1 - 2 * ts * ts * xs / R**2 - (ts + 2) * ts / R
    return CharacteristicPoint(x, y, tau, lam * a2, ys * Y * a2)


def _crossing_curve(x, tau, branch):
    """Points with Y(x, y) = 0: returns y^2 for given x on one branch (a = 1)."""
    disc = ((tau + 2) * tau) ** 2 + 8 * tau * tau * x
    with np.errstate(invalid="ignore"):
        R = 0.5 * ((tau + 2) * tau + branch * np.sqrt(disc))
    return R - x * x


def _lambda_on_curve(x, y2, tau):
    R = x * x + y2
    return (2 * tau * tau * x * x / R**2 + tau * (tau * (x - 1) + 2 * x) / R
            + 2 * tau + x + 1)


def characteristic_crossings(tau, a, lam, n_scan=4000):
    """Initial points z0 = x + iy (y > 0) whose characteristic hits lam + i0 at tau."""
    a2 = a * a
    ts, ls = tau / a2, lam / a2
    X = 2 + (ts + 2) * ts + ts
    xs = np.linspace(-X, X, n_scan)
    found = []
    for branch in (1, -1):
        y2 = _crossing_curve(xs, ts, branch)
        valid = np.isfinite(y2) & (y2 > 0)
        g = np.where(valid, _lambda_on_curve(xs, np.where(valid, y2, 1), ts) - ls, np.nan)
        for i in range(n_scan - 1):
            if not (valid[i] and valid[i + 1]):
                continue
            if g[i] == 0 or g[i] * g[i + 1] < 0:
                def h(x):
                    return _lambda_on_curve(x, _crossing_curve(x, ts, branch), ts) - ls
                x0 = optimize.brentq(h, xs[i], xs[i + 1], xtol=1e-15, rtol=1e-15)
                y0 = np.sqrt(_crossing_curve(x0, ts, branch))
                found.append((x0 * a2, y0 * a2))
    return found


def characteristics_density(tau, a, lam):
    """Density rebuilt from complex characteristics crossing the real axis."""
    crossings = characteristic_crossings(tau, a, lam)
    if not crossings:
        lo, hi = support(tau, a, 1.0)
        margin = 1e-6 * max(1.0, hi)
        if lo + margin < lam < hi - margin:
            raise CharacteristicsFailure(f"no crossing found inside the support at {lam}")
        return 0.0
    x, y = crossings[0]
    vals = [yy / (np.pi * ((tau + xx) ** 2 + yy * yy)) for xx, yy in crossings]
    if max(vals) - min(vals) > 1e-8 * max(vals):
        raise CharacteristicsFailure(f"inconsistent crossings at lambda={lam}: {crossings}")
    return float(vals[0])


def characteristic_curves(tau_grid, starts, a=1.0, r=1.0):
    """Sample z(tau) along the characteristics launched from each start z0 + a^2."""
    tau_grid = np.asarray(tau_grid, dtype=float)
    out = []
    for z0 in starts:
        z = np.array([characteristic_map(z0, t, r, a)[0] for t in tau_grid])
        out.append(z)
    return np.array(out)


# critical point

@dataclass(frozen=True)
class ExponentProbe:
    slope: float
    max_residual: float
    lambdas: np.ndarray = field(repr=False)
    rho: np.ndarray = field(repr=False)


def critical_exponent_fit(a=1.0, n_points=24, lam_range=(1e-6, 1e-2)):
    if n_points < 8:
        raise ValueError("n_points must be >= 8")
    a2 = a * a
    lam = np.logspace(np.log10(lam_range[0]), np.log10(lam_range[1]), n_points) * a2
    rho = density_values(lam, a2, a, 1.0, eps=1e-10 * a2)
    lx, ly = np.log(lam), np.log(rho)
    slope, icpt = np.polyfit(lx, ly, 1)
    resid = np.max(np.abs(ly - (slope * lx + icpt)))
    return ExponentProbe(float(slope), float(resid), lam, rho)


def critical_exponent_probe(a=1.0, n_points=24, tol=0.02):
    """Log-log slope of rho(lambda, tau = a^2) near the origin; expected -1/3."""
    probe = critical_exponent_fit(a, n_points)
    if abs(probe.slope + 1 / 3) > tol or probe.max_residual > 0.1:
        raise ScalingViolation(f"slope {probe.slope:.4f}, residual {probe.max_residual:.3g}")
    return probe.slope


def resolvent_offset(a=1.0, lam_rel=1e-6):
    """Constant term of G near the critical point.

    G(lambda + i0) = C lambda^{-1/3} + offset + ..., with C on the ray
    exp(-2 pi i/3), so Re G - Im G / sqrt(3) isolates the offset.
    """
    a2 = a * a
    G = resolvent(np.array([lam_rel * a2 + 1e-12j * a2]), a2, a, 1.0)[0]
    return float(G.real - G.imag / np.sqrt(3)), complex(G)


def bin_masses(bin_edges, tau, a=1.0, r=1.0, n=40):
    """Large-N spectral mass in each bin [e_k, e_k+1]."""
    lo, hi = support(tau, a, r)
    xs, ws, owner = [], [], []
    for k, (x0, x1) in enumerate(zip(bin_edges[:-1], bin_edges[1:])):
        u0, u1 = max(x0, lo), min(x1, hi)
        if u1 <= u0:
            continue
        x, w = _support_nodes(u0, u1, n, lo_power=6 if u0 == lo == 0 else 2)
        xs.append(x)
        ws.append(w)
        owner.append(np.full(x.shape, k))
    out = np.zeros(len(bin_edges) - 1)
    if not xs:
        return out
    # one tracking pass for every node of every bin
    x, w, owner = np.concatenate(xs), np.concatenate(ws), np.concatenate(owner)
    gap = np.minimum(x - lo, hi - x)
    local = np.minimum(1e-9, np.maximum(1e-4 * gap, 1e-15 * np.maximum(1.0, x)))
    local = np.where(x < 1e-8, np.maximum(1e-4 * x, 1e-300), local)
    rho = np.clip(density_values(x, tau, a, r, local), 0, None)
    np.add.at(out, owner, w * rho)
    return out
