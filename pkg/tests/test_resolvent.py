import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from wishart_shocks.resolvent import (BranchAmbiguityError, CharacteristicsFailure,
                                      ResolventQuery, ScalingViolation, characteristic_crossings,
                                      characteristic_map, characteristic_point,
                                      characteristics_density, critical_exponent_fit,
                                      critical_exponent_probe, critical_preimages,
                                      cubic_coefficients, density, density_values,
                                      implicit_z, lower_edge, resolvent, resolvent_offset,
                                      shock_positions, solve_G, spectral_moments, support)


def mp_density(lam, tau=1.0):
    """Marchenko-Pastur at r = 1, variance tau."""
    return np.sqrt(np.clip(4 * tau - lam, 0, None)) / (2 * np.pi * tau * np.sqrt(lam))


# cubic

def test_cubic_factors_at_zero_start():
    z, tau = 1.3 + 0.4j, 0.8
    c = cubic_coefficients(z, tau, 1.0, 0.0)
    want = np.polymul([tau * z, -z, 1], [tau, -1])
    np.testing.assert_allclose(c, want, atol=1e-14)


@given(st.complex_numbers(max_magnitude=50, allow_nan=False, allow_infinity=False),
       st.floats(0.05, 3.0), st.floats(0.2, 1.0), st.floats(0.0, 2.0))
def test_roots_back_substitute(z, tau, r, a):
    assume(abs(z) > 1e-3)
    roots = np.roots(cubic_coefficients(z, tau, r, a))
    for g in roots:
        d = 1 - r * tau * g
        assume(abs(d) > 1e-6 and abs(g) > 1e-6)
        # near 1 - r tau G = 0 the map amplifies rounding in G by |g dz/dG|
        slope = abs(-1 / g**2 + r * tau * tau / d**2 + 2 * a * a * r * tau / d**3)
        tol = 1e-9 * (1 + abs(z)) * (1 + abs(g)) ** 3 + 1e-12 * abs(g) * slope
        assert abs(implicit_z(g, tau, r, a) - z) <= tol


@pytest.mark.parametrize("mod", [100.0, 1e3, 1e5])
@pytest.mark.parametrize("arg", [0.3, 1.5, 2.8, -1.0])
def test_large_z(mod, arg):
    z = mod * np.exp(1j * arg)
    g, _ = solve_G(ResolventQuery(z, 1.0, 1.0, 1.0))
    assert abs(z * g - 1) <= 10 / abs(z)


def test_small_time_limit():
    z = 0.4 + 0.7j
    g = resolvent(np.array([z]), 1e-9, 1.3)[0]
    assert abs(g - 1 / (z - 1.69)) < 1e-7
    assert resolvent(z, 0.0, 1.3) == 1 / (z - 1.69)


def test_marchenko_pastur_point():
    g, cert = solve_G(ResolventQuery(2 + 1e-12j, 1.0, 1.0, 0.0))
    want = (2 - np.sqrt(complex(4 - 8))) / 4
    assert abs(g - np.conj(want)) < 1e-9 or abs(g - want) < 1e-9
    assert -g.imag / np.pi == pytest.approx(1 / (2 * np.pi), abs=1e-9)
    # the spurious root 1/(r tau) is present but never chosen
    assert any(abs(r - 1.0) < 1e-9 for r in cert.all_roots)
    assert abs(cert.all_roots[cert.chosen_index] - 1.0) > 0.1


def test_conjugation():
    g, _ = solve_G(ResolventQuery(1 + 0.3j, 0.5, 1.0, 1.0))
    gc, _ = solve_G(ResolventQuery(1 - 0.3j, 0.5, 1.0, 1.0))
    assert abs(gc - np.conj(g)) < 1e-13


def test_certificate():
    g, cert = solve_G(ResolventQuery(3 + 0.01j, 1.0))
    assert len(cert.all_roots) == 3
    assert cert.all_roots[cert.chosen_index] == pytest.approx(g, abs=1e-12)
    assert cert.path_steps > 10
    assert g.imag <= 0


@pytest.mark.parametrize("kw", [dict(z=1j, tau=0.0), dict(z=1j, tau=1.0, r=0.0),
                                dict(z=1j, tau=1.0, r=1.5), dict(z=1j, tau=1.0, a=-1.0)])
def test_query_validation(kw):
    with pytest.raises(ValueError):
        ResolventQuery(**kw)


@given(st.floats(-1.0, 12.0), st.floats(1e-9, 1e-6), st.floats(0.1, 2.0), st.floats(0.0, 1.5))
def test_herglotz_sign(lam, eps, tau, a):
    g = resolvent(np.array([lam + 1j * eps]), tau, a)[0]
    assert g.imag <= 1e-12 * max(1.0, abs(g))


def test_ambiguity_error_carries_certificate():
    err = BranchAmbiguityError("x", certificate="c")
    assert err.certificate == "c"


# density

def test_density_normalised_at_critical_time():
    lo, hi = support(1.0)
    assert (lo, hi) == (0.0, pytest.approx(6.75, abs=1e-12))
    curve = density(1.0, 1.0, 1.0, np.linspace(0.01, 7, 50))
    assert curve.normalization_defect <= 1e-6
    assert np.all(curve.rho >= 0)


def test_density_gap_before_critical_time():
    lo, hi = support(0.1)
    assert lo == pytest.approx(0.3375, abs=1e-12)
    assert hi == pytest.approx(2.16, abs=1e-12)
    assert density_values(0.2, 0.1) == pytest.approx(0.0, abs=1e-6)
    assert density_values(0.5, 0.1) > 0.5


@pytest.mark.xfail(strict=True, reason="lambda = 0.5 lies inside the support [0.3375, 2.16] at tau = 0.1")
def test_density_listed_gap_point():
    assert density_values(0.5, 0.1) == pytest.approx(0.0, abs=1e-6)


def test_marchenko_pastur_pointwise():
    lam = np.linspace(0.1, 3.9, 77)
    np.testing.assert_allclose(density_values(lam, 1.0, 0.0), mp_density(lam), atol=1e-8)


def test_eps_window():
    with pytest.raises(ValueError):
        density(1.0, 1.0, 1.0, [1.0], eps=1e-3)


@pytest.mark.parametrize("a", [1.0, 2.0])
@pytest.mark.parametrize("frac", [0.1, 0.5, 1.0, 2.0])
def test_mass_and_mean(a, frac):
    tau = frac * a * a
    mass, mean = spectral_moments(tau, a)
    assert mass == pytest.approx(1.0, abs=1e-6)
    assert mean == pytest.approx(a * a + tau, abs=1e-6)


@pytest.mark.parametrize("tau", [0.25, 0.5, 2.0])
def test_density_vanishes_at_edges(tau):
    lo, hi = support(tau)
    inside = density_values(np.array([hi - 1e-8, hi - 1e-4, hi - 1e-2]), tau)
    assert inside[0] < inside[1] < inside[2]
    assert inside[0] < 1e-3
    assert density_values(hi + 1e-8, tau) == pytest.approx(0.0, abs=1e-6)
    if lo > 0:
        assert density_values(lo - 1e-8, tau) == pytest.approx(0.0, abs=1e-6)
        assert density_values(lo + 1e-8, tau) < 1e-3


# shocks

def test_edges_at_critical_time():
    front = shock_positions(1.0)
    np.testing.assert_allclose(front.z0c_roots, [-1, -1, 2], atol=1e-7)
    assert front.edges == (0.0, pytest.approx(27 / 4, abs=1e-12))
    assert front.critical


def test_edges_marchenko_pastur():
    front = shock_positions(0.7, 0.0)
    np.testing.assert_allclose(front.z0c_roots, [-0.7, 0.0, 0.7], atol=1e-12)
    assert max(front.edges) == pytest.approx(4 * 0.7, abs=1e-12)


def test_edges_positive_before_critical_time():
    front = shock_positions(0.25)
    assert front.support[0] > 0 and front.support[1] > front.support[0]
    assert not front.critical


@given(st.floats(0.01, 5.0), st.floats(0.1, 3.0))
def test_shock_roots_and_images(tau, a):
    front = shock_positions(tau, a)
    a2 = a * a
    for x in front.z0c_roots:
        scale = max(1.0, abs(x)) ** 3 + tau * (2 * a2 + tau) * max(1, abs(x)) + 2 * a2 * tau**2
        assert abs(x**3 - x * tau * (2 * a2 + tau) - 2 * a2 * tau**2) <= 1e-10 * scale
    images = sorted(characteristic_map(x, tau, 1.0, a)[0].real for x in front.z0c_roots
                    if abs(x) > 1e-12)
    for e in front.edges:
        assert min(abs(e - i) for i in images) <= 1e-9 * max(1.0, abs(e))


@pytest.mark.parametrize("a", [0.5, 1.0, 2.0])
def test_lower_edge_sign_change(a):
    a2 = a * a
    assert lower_edge(a2 * (1 - 1e-7), a) > 0
    assert lower_edge(a2 * (1 + 1e-7), a) < 0
    assert lower_edge(a2, a) == 0


@given(st.floats(0.02, 4.0), st.floats(0.3, 2.0))
def test_general_r_support_matches_closed_form(tau, a):
    lo, hi = support(tau, a, 1.0)
    front = shock_positions(tau, a)
    assert hi == pytest.approx(front.support[1], rel=1e-9)
    assert lo == pytest.approx(front.support[0], abs=1e-8 * max(1, hi))


@pytest.mark.parametrize("r", [0.3, 0.6, 0.9])
def test_rectangular_support_away_from_zero(r):
    lo, hi = support(1.0, 1.0, r)
    mass, _ = spectral_moments(1.0, 1.0, r)
    assert lo > 0
    assert mass == pytest.approx(1.0, abs=1e-6)
    assert len(critical_preimages(1.0, 1.0, r)) >= 2


# characteristics

def test_map_initial_shift():
    z0 = 0.3 - 0.2j
    assert characteristic_map(z0, 0.0, 1.0, 1.4)[0] == pytest.approx(z0 + 1.96)


def test_map_edge_value():
    z, g = characteristic_map(2.0, 1.0)
    assert z == pytest.approx(27 / 4, abs=1e-14)
    assert g == pytest.approx(1 / 3)


def test_map_singular():
    with pytest.raises(ZeroDivisionError):
        characteristic_map(0.0, 1.0)


@given(st.complex_numbers(min_magnitude=0.05, max_magnitude=20, allow_nan=False,
                          allow_infinity=False),
       st.floats(0.0, 3.0), st.floats(0.1, 1.0), st.floats(0.0, 2.0))
def test_map_conjugation(z0, tau, r, a):
    z, _ = characteristic_map(z0, tau, r, a)
    zc, _ = characteristic_map(np.conj(z0), tau, r, a)
    assert abs(zc - np.conj(z)) <= 1e-12 * (1 + abs(z))


@given(st.floats(-5, 5), st.floats(0.01, 5), st.floats(0.05, 3), st.floats(0.3, 2.0))
def test_real_imag_split(x, y, tau, a):
    p = characteristic_point(x, y, tau, a)
    z, _ = characteristic_map(x + 1j * y, tau, 1.0, a)
    assert abs(p.lam - z.real) <= 1e-12 * (1 + abs(z))
    assert abs(p.eta - z.imag) <= 1e-12 * (1 + abs(z))


@pytest.mark.parametrize("tau", [0.5, 1.0, 2.0])
def test_characteristics_agree_with_cubic(tau):
    lo, hi = support(tau)
    for lam in np.linspace(lo, hi, 12)[1:-1]:
        assert characteristics_density(tau, 1.0, lam) == pytest.approx(
            density_values(lam, tau), abs=1e-6)


def test_characteristics_general_a():
    a, tau = 1.7, 0.6 * 1.7**2
    lam = 0.5 * sum(support(tau, a))
    assert characteristics_density(tau, a, lam) == pytest.approx(
        density_values(lam, tau, a), abs=1e-6)


def test_characteristics_outside_support():
    assert characteristics_density(1.0, 1.0, 7.0) == 0.0
    lo, _ = support(0.5)
    assert characteristics_density(0.5, 1.0, lo - 1e-3) == 0.0


def test_crossing_lands_on_target():
    for x, y in characteristic_crossings(1.0, 1.0, 3.0):
        p = characteristic_point(x, y, 1.0)
        assert p.lam == pytest.approx(3.0, abs=1e-12)
        assert abs(p.eta) < 1e-12
        assert y > 0


def test_characteristics_failure_type():
    assert issubclass(CharacteristicsFailure, RuntimeError)


# critical point

@pytest.mark.parametrize("a", [1.0, 2.0])
def test_critical_exponent(a):
    assert critical_exponent_probe(a) == pytest.approx(-1 / 3, abs=0.02)


def test_scaling_violation_raised():
    with pytest.raises(ScalingViolation):
        critical_exponent_probe(1.0, tol=1e-6)


def test_exponent_fit_needs_points():
    with pytest.raises(ValueError):
        critical_exponent_fit(1.0, n_points=4)


@pytest.mark.parametrize("a", [0.7, 1.0, 2.0])
def test_resolvent_offset(a):
    offset, g = resolvent_offset(a)
    assert offset == pytest.approx(2 / (3 * a * a), rel=0.01)
    # the divergent part sits on the ray exp(-2 pi i / 3)
    assert np.angle(g - offset) == pytest.approx(-2 * np.pi / 3, abs=0.01)
