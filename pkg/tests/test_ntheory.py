import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from elliptika import ntheory as nt


def _trial_prime(n):
    return n >= 2 and all(n % d for d in range(2, math.isqrt(n) + 1))


def _jacobi(D, m):
    # product of Euler criteria over the prime factors of odd m > 0
    out = 1
    for q in range(3, m + 1, 2):
        while m % q == 0:
            m //= q
            r = pow(D % q, (q - 1) // 2, q)
            out *= -1 if r == q - 1 else r
    return out


def test_is_prime_small():
    assert [n for n in range(2000) if nt.is_prime(n)] == [n for n in range(2000) if _trial_prime(n)]


@given(st.integers(min_value=2, max_value=10**10))
def test_is_prime_matches_trial_division(n):
    assert nt.is_prime(n) == _trial_prime(n)


def test_is_prime_carmichael_and_large():
    for n in (561, 1105, 1729, 2465, 3215031751):
        assert not nt.is_prime(n)
    assert nt.is_prime(2**61 - 1) and not nt.is_prime(2**61 + 1)


def test_require_prime_rejects():
    for bad in (1, 4, 100, 2.0):
        with pytest.raises(ValueError):
            nt.require_prime(bad)


@given(st.integers(min_value=1, max_value=10**9))
def test_factorize_roundtrip(n):
    fac = nt.factorize(n)
    assert math.prod(q**k for q, k in fac) == n
    assert all(nt.is_prime(q) for q, _ in fac)


@given(st.integers(min_value=1, max_value=5000))
def test_divisors(n):
    assert nt.divisors(n) == sorted(d for d in range(1, n + 1) if n % d == 0)


@given(st.integers(min_value=1, max_value=10**6), st.sampled_from([2, 3, 5, 7]))
def test_valuation_split(A, q):
    v = nt.valuation_split(A, q)
    assert v.v == nt.valuation(A, q)
    assert v.q_part == q**v.v and v.q_part * v.coprime_part == A
    assert v.coprime_part % q != 0


@given(st.integers(min_value=-500, max_value=500), st.integers(min_value=-60, max_value=60))
def test_kronecker_matches_jacobi(D, m):
    if m > 0 and m % 2 == 1:
        assert nt.kronecker(D, m) == _jacobi(D, m)
    if m == 0:
        assert nt.kronecker(D, 0) == (1 if abs(D) == 1 else 0)


def test_kronecker_at_two_and_minus_one():
    # (D/2) = 0 for even D, 1 for D = +-1 mod 8, -1 for D = +-3 mod 8
    expect = {0: 0, 1: 1, 2: 0, 3: -1, 4: 0, 5: -1, 6: 0, 7: 1}
    for D in range(-40, 40):
        assert nt.kronecker(D, 2) == expect[D % 8]
        assert nt.kronecker(D, -1) == (-1 if D < 0 else 1)


@given(st.sampled_from([2, 3, 5, 7, 11, 13]), st.integers(1, 4), st.integers(-10**4, 10**4))
def test_sqrt_mod_prime_power_exhaustive(q, k, a):
    m = q**k
    got = nt.sqrt_mod_prime_power(a, q, k)
    expect = [x for x in range(m) if (x * x - a) % m == 0]
    assert got == expect


@given(st.integers(-2000, 2000), st.integers(1, 400))
def test_delta_square(a, b):
    expect = int(any((x * x - a) % b == 0 for x in range(b)))
    assert nt.delta_square(a, b) == expect


@pytest.mark.parametrize("q", [3, 5, 7, 11, 13, 101])
def test_gauss_sum_closed_form(q):
    g = nt.gauss_sum(q)
    expect = math.sqrt(q) if q % 4 == 1 else 1j * math.sqrt(q)
    assert abs(g - expect) < 1e-9


@given(st.sampled_from([5, 7, 11, 13, 101]), st.integers(1, 100), st.integers(1, 100))
def test_kloosterman_weil(q, a, b):
    if a % q == 0 or b % q == 0:
        return
    s = nt.kloosterman_s(a, b, q)
    assert abs(s.imag) < 1e-9
    assert abs(s) <= 2 * math.sqrt(q) + 1e-9
    # S(a, b; q) = S(1, ab; q)
    assert abs(s - nt.kloosterman_s(1, a * b, q)) < 1e-9


def test_width_guard():
    with pytest.raises(OverflowError):
        nt.check_width(2**63)
