import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from elliptika import oscint as oi
from elliptika.specfun import PHI_F, PHI_H0, PHI_H1


def test_adaptive_gk_polynomial_and_oscillatory():
    v, err = oi.adaptive_gk(lambda x: x**5 + 0j, np.array([0.0, 1.0]), 1e-13)
    assert abs(v - 1 / 6) < 1e-14
    v, err = oi.adaptive_gk(lambda x: np.exp(2j * math.pi * 7.3 * x), np.linspace(0, 1, 9), 1e-12)
    ref = (np.exp(2j * math.pi * 7.3) - 1) / (2j * math.pi * 7.3)
    assert abs(v - ref) < 1e-12


def test_adaptive_gk_endpoint_singularity():
    v, _ = oi.adaptive_gk(lambda x: np.sqrt(x) + 0j, np.array([0.0, 1.0]), 1e-12)
    assert abs(v - 2 / 3) < 1e-10


@pytest.mark.parametrize("phi", [PHI_F, PHI_H1, PHI_H0], ids=lambda p: p.name)
@pytest.mark.parametrize("C,D", [(0.3, 2.0), (1.0, -5.0), (0.1, 12.0)])
def test_substitution_matches_direct(phi, C, D):
    job = oi.FourierJob(C, D, 1.0, "inside", oi.sqrt_profile(), phi, 1e-11)
    sub, _ = oi.fourier_singular(job, substitute=True)
    direct, _ = oi.fourier_singular(job, substitute=False)
    assert abs(sub - direct) < 1e-8


def test_inside_sqrt_matches_mpmath():
    C, D = 0.5, 3.0
    k0 = mp.besselk(0, 2)

    def F(y):
        return mp.quad(lambda t: mp.exp(-t - 1 / t) / t, [y, y + 1, mp.inf]) / (2 * k0)

    mp.mp.dps = 15
    ref = 2 * mp.quad(lambda x: mp.sqrt(1 - x * x) * F(C / mp.sqrt(1 - x * x)) * mp.cos(2 * mp.pi * x * D),
                      mp.linspace(0, 1, 8))
    job = oi.FourierJob(C, D, 1.0, "inside", oi.sqrt_profile(), PHI_F, 1e-12)
    val, _ = oi.fourier_singular(job)
    assert abs(val - complex(ref)) < 1e-9


def test_outside_with_unit_support_is_zero():
    job = oi.FourierJob(0.5, 3.0, 1.0, "outside", oi.sqrt_profile(), PHI_F)
    assert oi.fourier_singular(job) == (0j, 0.0)


def test_even_profile_gives_real_value():
    job = oi.FourierJob(0.7, 4.5, 1.0, "outside", oi.outside_sqrt_profile(), PHI_F, 1e-11)
    val, _ = oi.fourier_singular(job)
    assert abs(val.imag) < 1e-10


@given(st.floats(0.05, 3.0), st.floats(0.0, 40.0))
def test_fourier_grid_against_quad(s, eta_max):
    R = 2.0
    k_max = max(1, int(eta_max / s))
    grid = oi.FourierGrid(s, R, k_max, 0.01)
    I = grid.transform(oi.smooth_bump(grid.x, R))
    for k in (0, k_max // 2, k_max):
        eta = s * k
        ref = quad(lambda x: oi.smooth_bump(np.array([x]), R)[0] * math.cos(2 * math.pi * x * eta),
                   -R, R, limit=400, epsabs=1e-13)[0]
        assert abs(I[k] - ref) < 1e-9


def test_two_sided_matches_one_sided_for_real_even():
    grid = oi.FourierGrid(0.4, 2.0, 30, 0.01)
    g = oi.smooth_bump(grid.x, 2.0)
    pos, neg = grid.transform_two_sided(g)
    one = grid.transform(g)
    assert np.allclose(pos, one, atol=1e-13)
    assert np.allclose(neg, np.conj(one), atol=1e-13)


def test_job_validation():
    with pytest.raises(ValueError):
        oi.FourierJob(0.0, 1.0, 1.0, "inside", oi.sqrt_profile(), PHI_F)
    with pytest.raises(ValueError):
        oi.FourierJob(1.0, 0.0, 1.0, "inside", oi.sqrt_profile(), PHI_F)
    with pytest.raises(ValueError):
        oi.FourierJob(1.0, 1.0, 1.0, "sideways", oi.sqrt_profile(), PHI_F)
    with pytest.raises(ValueError):
        oi.FourierJob(1.0, 1.0, 1.0, "inside", oi.sqrt_profile(), PHI_F, tol=1e-14)
