import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from elliptika import elliptic as el
from elliptika.charsum import CharSumParams, kl_factor

SMALL = el.TruncationPolicy(lf2_ratio=2.0, xi_ratio=16.0, d_max=4.0, xi_floor=4)


@pytest.fixture(scope="module")
def theta():
    return el.make_theta()


@pytest.fixture(scope="module")
def base_report(theta):
    return el.sigma_xi(101, theta, SMALL, threads=1)


# -- profiles ---------------------------------------------------------------

def test_default_expansion_coefficients(theta):
    t1, t2 = theta.pos_expansions
    assert t1.a == 1.0 and t2.a == 0.0
    assert t1.coeffs_plus[0] == pytest.approx(2 * math.sqrt(2), abs=1e-14)
    assert t1.coeffs_plus[1] == pytest.approx(-math.sqrt(2) / 2, abs=1e-14)
    assert t1.coeffs_minus == t1.coeffs_plus


def test_bump_expansion_matches_mpmath(theta):
    _, t2 = theta.pos_expansions
    ref = mp.taylor(lambda z: mp.exp(-1 / (1 - ((1 - z) / 2) ** 2)), 0, 3)
    assert np.allclose(t2.coeffs_plus, [float(c) for c in ref], atol=1e-12)


def test_theta_at_zero(theta):
    assert theta.pos(np.array([0.0]))[0] == pytest.approx(2 * 1.0 + math.exp(-1.0))


def test_custom_profile_finite_difference_expansion():
    th = el.make_theta(g1=lambda x: 1 + 0 * np.asarray(x))
    ref = el.make_theta()
    assert np.allclose(th.pos_expansions[0].coeffs_plus, ref.pos_expansions[0].coeffs_plus,
                       rtol=1e-5, atol=1e-6)


def test_noncompact_g2_rejected():
    with pytest.raises(ValueError):
        el.make_theta(g2=lambda x: np.exp(-np.asarray(x) ** 2))


# -- Sigma(square) and the L-series -----------------------------------------

def test_l_series_m1_is_zeta():
    for u in (1.5, 2.0, 3.7):
        assert el.l_series(u, 1) == pytest.approx(float(mp.zeta(u)), rel=1e-13)


def test_l_series_m4_u2_by_divisor_enumeration():
    ref = float(mp.zeta(2)) * ((1 - 1 / 4) + 2**-3 * (1 - 1 / 4) + 4**-3)
    assert el.l_series(2.0, 4) == pytest.approx(ref, rel=1e-13)


def test_l_series_u3_m6_against_dirichlet_sum():
    # zeta(u) prod_{q | m/f}(1 - q^-u) = sum over l coprime to m/f of l^-u
    mp.mp.dps = 25
    ref = mp.mpf(0)
    for f in (1, 2, 3, 6):
        g = 6 // f
        # l = r + g k with gcd(r, g) = 1: a sum of Hurwitz zeta values
        s = sum(mp.zeta(3, mp.mpf(r) / g) for r in range(1, g + 1) if math.gcd(r, g) == 1) / g**3
        ref += mp.mpf(f) ** (1 - 6) * s
    assert el.l_series(3.0, 6) == pytest.approx(float(ref), rel=1e-10)


def test_l_series_rejects_u_le_1():
    with pytest.raises(ValueError):
        el.l_series(1.0, 4)


def test_sigma_square_vanishes_beyond_support(theta):
    for p in (17, 19, 101, 1999):
        assert el.sigma_square(p, theta) == 0.0


def test_sigma_square_small_primes(theta):
    v3 = el.sigma_square(3, theta)
    assert v3 != 0
    # stable when the l-cut tolerance tightens (longer l range)
    assert el.sigma_square(3, theta, tol=1e-15) == pytest.approx(v3, rel=1e-9)
    v5 = el.sigma_square(5, theta)
    K = abs(v3) / math.log(3) ** 2
    assert abs(v5) <= 2 * K * math.log(5) ** 2


def test_square_bracket_log_squared_growth():
    r = [el.square_bracket(q - 1) / math.log(q) ** 2 for q in (101, 409, 1999)]
    assert max(r) / min(r) < 3


# -- truncation and Kl tables -----------------------------------------------

def test_policy_pairs_and_doubling():
    pol = el.TruncationPolicy()
    pairs = pol.pairs(101)
    assert all(l * f * f <= 32 * math.sqrt(101) for l, f in pairs)
    dl, df = set(pol.doubled("l").pairs(101)), set(pol.doubled("f").pairs(101))
    assert set(pairs) <= dl <= df
    assert pol.doubled("xi").xi_max(101, 3, 1) == 2 * pol.xi_max(101, 3, 1)


def test_policy_validation():
    with pytest.raises(ValueError):
        el.TruncationPolicy(lf2_ratio=0)
    with pytest.raises(ValueError):
        el.TruncationPolicy(tail_tol=2.0)


@pytest.mark.parametrize("l,f,n", [(3, 1, 101), (6, 2, -101), (10, 3, 1999), (7, 1, -13)])
def test_fft_kl_tables_match_closed_forms(l, f, n):
    fft = el.kl_residues(l, f, n, "fft")
    fac = el.kl_residues(l, f, n, "factor")
    assert np.max(np.abs(fft - fac)) < 1e-9
    for xi in (0, 1, 5):
        assert fft[xi] == pytest.approx(kl_factor(CharSumParams(l, f, xi, n)).real, abs=1e-9)


# -- assembly ----------------------------------------------------------------

def test_breakdown_sums_to_total(base_report):
    assert abs(math.fsum(base_report.per_term_breakdown) - base_report.sigma_xi) < 1e-9
    assert base_report.method == "oracle"
    assert base_report.notes == (el.SIGMA0_NOTE,)


def test_matches_xi_complete_reference(theta):
    # few pairs, default xi bounds; the xi-sum is compared against the exact Poisson dual
    pol = el.TruncationPolicy(lf2_ratio=2.0)
    r = el.sigma_xi(101, theta, pol, threads=1, audit=False)
    assert abs(r.sigma_xi - r.xi_complete) < 1e-4 * abs(r.xi_complete)


def test_zero_theta_gives_zero():
    r = el.sigma_xi(101, el.zero_theta(), SMALL, threads=1, audit=False)
    assert r.sigma_xi == 0.0 and r.sigma_square == 0.0


def test_scaling_is_exact(theta, base_report):
    r2 = el.sigma_xi(101, theta.scaled(2.0), SMALL, threads=1)
    assert r2.sigma_xi == pytest.approx(2 * base_report.sigma_xi, rel=1e-12)
    for a, b in zip(r2.per_term_breakdown, base_report.per_term_breakdown):
        assert a == pytest.approx(2 * b, rel=1e-12, abs=1e-300)


def test_additivity(theta, base_report):
    other = el.make_theta(g1=lambda x: np.asarray(x) ** 2, neg=lambda x: 0.5 * el.default_neg(x))
    ra = el.sigma_xi(101, other, SMALL, threads=1, audit=False)
    rs = el.sigma_xi(101, theta + other, SMALL, threads=1, audit=False)
    assert rs.sigma_xi == pytest.approx(base_report.sigma_xi + ra.sigma_xi, rel=1e-9, abs=1e-12)


def test_sigma_square_linear():
    th = el.make_theta()
    assert el.sigma_square(3, th.scaled(3.0)) == pytest.approx(3 * el.sigma_square(3, th), rel=1e-12)


def test_realness_two_sided(theta, base_report):
    r = el.sigma_xi(101, theta, SMALL, threads=1, audit=False, two_sided=True)
    assert abs(r.imag_part) < 1e-6 * abs(r.sigma_xi)
    assert r.sigma_xi == pytest.approx(base_report.sigma_xi, rel=1e-9)


@pytest.mark.parametrize("T", [0.5, 2.0])
def test_region_split_is_bookkeeping(theta, base_report, T):
    r = el.sigma_xi(101, theta, el.TruncationPolicy(**{**SMALL.__dict__, "region_split": T}),
                    threads=1, audit=False)
    assert r.sigma_xi == base_report.sigma_xi
    assert math.isclose(r.region_breakdown["small"] + r.region_breakdown["large"], r.sigma_xi,
                        rel_tol=1e-12)


def test_thread_count_does_not_change_bits(theta, base_report):
    r = el.sigma_xi(101, theta, SMALL, threads=3)
    assert r.sigma_xi == base_report.sigma_xi
    assert r.per_term_breakdown == base_report.per_term_breakdown
    assert r.truncation_audit == base_report.truncation_audit


def test_fifth_term_alternative(theta, base_report):
    r = el.sigma_xi(101, theta, SMALL, fifth="-p", threads=1, audit=False)
    assert r.per_term_breakdown[4] == pytest.approx(base_report.term5_alternative, rel=1e-12)


def test_expansion_method_close_to_oracle(theta, base_report):
    r = el.sigma_xi(101, theta, SMALL, method="expansion", threads=1)
    assert abs(r.sigma_xi - base_report.sigma_xi) < 0.05 * abs(base_report.sigma_xi)


def test_report_roundtrip(base_report):
    d = base_report.to_dict()
    assert el.EllipticReport.from_dict(d) == base_report


def test_bad_inputs(theta):
    with pytest.raises(ValueError):
        el.sigma_xi(100, theta, SMALL)
    with pytest.raises(ValueError):
        el.sigma_xi(101, theta, SMALL, method="magic")
    with pytest.raises(ValueError):
        el.sigma_xi(101, theta, SMALL, fifth="q")


# -- envelopes and scans -----------------------------------------------------

def test_envelope_bound_quarter_law():
    b1 = el.envelope_bound("small", "F", 10**6 + 3, 1, 1, 1)
    b4 = el.envelope_bound("small", "F", 10**6 + 3, 1, 1, 4)
    assert b1 / b4 == pytest.approx(2.0)


def test_envelope_check_large_region(theta):
    rep = el.envelope_check(101, theta, [(20, 1, 1), (20, 1, 2), (40, 1, 1)], "large", N=2)
    assert set(rep.max_ratio) == {"F", "H1", "H0", "negF", "negH0"}
    assert all(np.isfinite(v) for v in rep.max_ratio.values())


def test_fit_slope():
    xs = [10, 100, 1000]
    assert el.fit_slope(xs, [x**0.25 for x in xs]) == pytest.approx(0.25)
    assert el.fit_slope(xs, [0, 0, 0]) == -math.inf


def test_scan_requires_a_decade(theta):
    with pytest.raises(ValueError):
        el.scan([101, 103, 107, 109, 113, 127, 131, 137], theta, SMALL)


def test_scan_csv_is_deterministic(theta):
    primes = [11, 13, 17, 19, 23, 29, 31, 37, 41, 53, 67, 83, 101, 113]
    a = el.scan(primes, theta, SMALL, threads=1).to_csv(timing=False)
    b = el.scan(primes, theta, SMALL, threads=2).to_csv(timing=False)
    assert a == b
    assert a.startswith(el.SCHEMA + "\n# config ")
    header = a.splitlines()[2].split(",")
    assert tuple(header) == el.CSV_COLUMNS
