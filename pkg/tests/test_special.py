import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spherefield.special import (FOUR_PI, SphereQuadrature, gaunt3, gaunt_bound, gaunt_general,
                                 gaussian_phi_Phi, harmonic_index, harmonic_matrix, hermite,
                                 hermite_sup_ratio, j_coefficient, legendre_all, legendre_p,
                                 real_spherical_harmonic, wigner3j_000, zonal_gaunt)


def test_legendre_values():
    assert legendre_p(2, 0.5) == pytest.approx(-0.125, abs=1e-15)
    assert legendre_p(0, 0.3) == 1.0
    x = np.linspace(-1, 1, 7)
    table = legendre_all(6, x)
    for ell in range(7):
        assert np.allclose(table[ell], legendre_p(ell, x), atol=1e-14)
    assert np.allclose(table[:, -1], 1.0)


def test_legendre_domain():
    with pytest.raises(ValueError):
        legendre_p(2, 1.5)
    with pytest.raises(ValueError):
        legendre_p(-1, 0.0)


def test_harmonic_values():
    assert real_spherical_harmonic(0, 0, 1.0, 2.0) == pytest.approx(1 / math.sqrt(FOUR_PI))
    assert real_spherical_harmonic(1, 0, 0.0, 0.0) == pytest.approx(math.sqrt(3 / FOUR_PI))
    with pytest.raises(ValueError):
        real_spherical_harmonic(1, 2, 0.0, 0.0)


def test_orthonormal_on_grid():
    ells = [0, 1, 2, 3, 4]
    q = SphereQuadrature.gauss(8)
    th, ph = q.points()
    y = harmonic_matrix(ells, th, ph)
    gram = (y * q.weights()) @ y.T
    assert np.allclose(gram, np.eye(len(harmonic_index(ells))), atol=1e-13)


def test_addition_theorem():
    # sum_m Y_lm(x)^2 = (2l+1)/(4 pi)
    th, ph = np.array([0.3, 1.2, 2.8]), np.array([0.0, 2.0, 5.5])
    y = harmonic_matrix([3], th, ph)
    assert np.allclose(np.sum(y * y, axis=0), 7 / FOUR_PI)


def test_quadrature_weights():
    q = SphereQuadrature.gauss(15)
    assert q.size == 8 * 16
    assert np.sum(q.weights()) == pytest.approx(FOUR_PI, rel=1e-14)
    assert q == SphereQuadrature.gauss(15)
    assert hash(q) == hash(SphereQuadrature.gauss(15))


def test_hermite():
    x = 1.3
    assert hermite(3, x) == pytest.approx(x ** 3 - 3 * x)
    assert hermite(4, x) == pytest.approx(x ** 4 - 6 * x ** 2 + 3)
    assert j_coefficient(2, 0.0) == 0.0
    dens, tail = gaussian_phi_Phi(0.0)
    assert dens == pytest.approx(1 / math.sqrt(2 * math.pi))
    assert tail == 0.5


def test_wigner_known():
    assert wigner3j_000(1, 1, 0) == pytest.approx(-1 / math.sqrt(3))
    assert wigner3j_000(2, 2, 2) == pytest.approx(-math.sqrt(2 / 35))
    assert gaunt3(2, 2, 2) == pytest.approx(0.18022375157286835, rel=1e-13)
    assert gaunt3(1, 1, 2) == pytest.approx(0.25231325220201545, rel=1e-13)
    assert gaunt3(0, 3, 3) == pytest.approx(1 / math.sqrt(FOUR_PI))


def test_gaunt_selection_rules_exact():
    assert gaunt3(1, 1, 1) == 0.0
    assert gaunt3(1, 2, 4) == 0.0
    assert zonal_gaunt((1, 2, 3, 7)) == 0.0
    assert zonal_gaunt((1, 2, 2)) == 0.0


def test_zonal_gaunt_four():
    assert zonal_gaunt((1, 1, 1, 1)) == pytest.approx(0.14323944878270573, rel=1e-13)


@given(st.integers(0, 10), st.integers(0, 10), st.integers(0, 10))
def test_gaunt3_matches_quadrature(a, b, c):
    assert gaunt3(a, b, c) == pytest.approx(zonal_gaunt((a, b, c)), abs=1e-12)


@settings(max_examples=60)
@given(st.lists(st.integers(0, 8), min_size=3, max_size=6))
def test_gaunt_bound_property(ells):
    assert abs(zonal_gaunt(ells)) <= gaunt_bound(ells) * (1 + 1e-12)


def test_gaunt_general_requires_exactness():
    q = SphereQuadrature.gauss(6)
    assert gaunt_general((2, 2, 2), q) == pytest.approx(gaunt3(2, 2, 2))
    with pytest.raises(ValueError):
        gaunt_general((4, 4, 4), q)
    with pytest.raises(ValueError):
        gaunt_general((1, 1), q)


def test_hermite_sup_ratio_bounded():
    vals = [hermite_sup_ratio(q) for q in (1, 5, 12, 25)]
    assert vals[1] == pytest.approx(0.8561945728560563, rel=1e-6)
    assert max(vals) < 1.1
