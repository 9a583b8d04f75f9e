import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from elliptika import specfun as sf

mp.mp.dps = 30


def _f_mp(x):
    k0 = mp.besselk(0, 2)
    return mp.quad(lambda y: mp.exp(-y - 1 / y) / y, [x, x + 1, mp.inf]) / (2 * k0)


@given(st.floats(0.2, 6.0), st.floats(-3.0, 3.0))
def test_bessel_k_matches_mpmath(x, nu_im):
    nu = complex(0.7, nu_im)
    ref = complex(mp.besselk(mp.mpc(nu.real, nu.imag), x))
    assert abs(sf.bessel_k(nu, x) - ref) <= 1e-10 * max(1.0, abs(ref))


def test_bessel_k_even_in_order():
    for nu in (0.3, 1 + 2j, 2.5 - 1j):
        assert sf.bessel_k(nu, 1.3) == sf.bessel_k(-nu, 1.3)


@pytest.mark.parametrize("x", [0.01, 0.3, 1.0, 2.5, 7.0])
def test_big_f_matches_quadrature(x):
    assert abs(sf.big_f(x) - float(_f_mp(x))) < 1e-10


def test_big_f_symmetry():
    # F(x) + F(1/x) = 1 since the density e^{-y-1/y}/y is invariant under y -> 1/y
    xs = np.array([0.05, 0.4, 1.7, 9.0])
    assert np.allclose(sf.big_f(xs) + sf.big_f(1 / xs), 1.0, atol=1e-10)


@pytest.mark.parametrize("u", [0.5, 1.0, 2.0, 1 + 5j, 0.2 - 3j])
def test_f_mellin_matches_bessel_ratio(u):
    ref = complex(mp.besselk(u, 2) / (u * mp.besselk(0, 2)))
    assert abs(sf.big_f_mellin(u) - ref) < 1e-10 * abs(ref)


@pytest.mark.parametrize("u", [0.5, 1.0, 2.5])
def test_f_mellin_matches_real_quadrature(u):
    assert sf.big_f_mellin(u).real == pytest.approx(sf.mellin_quadrature(sf.big_f, u), rel=1e-8)


def test_h0_matches_contour_and_residue_shift():
    ys = np.array([0.05, 0.3, 1.0, 4.0])
    direct = sf.h_contour("H0", ys, abscissa=1.0)
    assert np.allclose(sf.h0(ys), direct, atol=1e-9)
    # moving the contour to Re u = 1.5 changes nothing
    assert np.allclose(sf.h_contour("H0", ys, abscissa=1.5), direct, atol=1e-9)


def test_h1_matches_contour():
    ys = np.array([0.05, 0.3, 1.0, 4.0])
    assert np.allclose(sf.h1(ys), sf.h_contour("H1", ys), atol=1e-9)


def test_h0_small_y_log_law():
    # H0(y) ~ -2 log y + H0_A1 as y -> 0 (double pole 2/u^2 at 0)
    y = 1e-6
    assert sf.h0(y) == pytest.approx(-2 * math.log(y) + sf.H0_A1, abs=1e-3)


def test_phi_family_shapes():
    fam = sf.phi_family(sf.CutoffSpec())
    assert fam.phi0(0.0) == pytest.approx(1.0, abs=1e-12)
    assert fam.phi0(1.0) == 0.0
    assert fam.phi(0.5) == 1.0 and fam.phi(2.5) == 0.0
    xs = np.linspace(0, 1, 50)
    assert np.all(np.diff(fam.phi0(xs)) <= 1e-15)


def test_phi_mellin_matches_quadrature():
    fam = sf.phi_family(sf.CutoffSpec())
    for s in (0.5, 1.0, 3.0):
        assert fam.phi_mellin(s).real == pytest.approx(sf.mellin_quadrature(fam.phi, s, upper=2.0),
                                                       rel=1e-8)


def test_cutoff_validation():
    with pytest.raises(ValueError):
        sf.CutoffSpec(kappa=0.6)
    with pytest.raises(ValueError):
        sf.big_f_mellin(-1.5)
    with pytest.raises(ValueError):
        sf.bessel_k(1.0, 0.0)
