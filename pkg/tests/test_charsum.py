import cmath
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from elliptika import charsum as cs
from elliptika.ntheory import kronecker


def _kl_loop(l, f, xi, n):
    """Plain-Python definition, independent of the vectorised weights."""
    M = 4 * l * f * f
    total = 0j
    for a in range(M):
        X = a * a - 4 * n
        if X % (f * f):
            continue
        Y = X // (f * f)
        if Y % 4 not in (0, 1):
            continue
        total += kronecker(Y, l) * cmath.exp(2j * math.pi * a * xi / M)
    return total


@given(st.integers(1, 8), st.integers(1, 5), st.integers(-8, 8),
       st.integers(-10, 10).filter(lambda n: n != 0))
def test_bruteforce_matches_loop(l, f, xi, n):
    p = cs.CharSumParams(l, f, xi, n)
    assert abs(cs.kl_bruteforce(p) - _kl_loop(l, f, xi, n)) < 1e-9


@given(st.integers(1, 12), st.integers(1, 8), st.integers(-40, 40),
       st.integers(-30, 30).filter(lambda n: n != 0))
def test_factor_matches_bruteforce(l, f, xi, n):
    p = cs.CharSumParams(l, f, xi, n)
    assert abs(cs.kl_factor(p) - cs.kl_bruteforce(p)) < 1e-9


@given(st.integers(1, 12), st.integers(1, 6), st.integers(-10, 10).filter(lambda n: n != 0))
def test_kl_real_and_even(l, f, n):
    allv = cs.kl_bruteforce_all(l, f, n)
    assert np.max(np.abs(allv.imag)) < 1e-8
    assert np.allclose(allv[1:], allv[1:][::-1], atol=1e-8)


@pytest.mark.parametrize("l,f,n", [(1, 1, 1), (6, 2, -3), (12, 3, 7), (5, 4, 10), (9, 1, -9)])
def test_factor_residues_table(l, f, n):
    tab = cs.kl_factor_residues(l, f, n)
    ref = cs.kl_bruteforce_all(l, f, n).real
    assert np.max(np.abs(tab - ref)) < 1e-9


@pytest.mark.parametrize("q", [3, 5, 7])
def test_local_odd_matches_definition(q):
    for k1 in range(3):
        for k2 in range(2):
            M = q ** (k1 + 2 * k2)
            for n in (1, -1, q, q * q, 2 * q, -q**3):
                for xi in range(0, min(M, 30)):
                    got = cs.kl_local_odd(q, k1, k2, xi, n)
                    assert abs(got - cs.local_sum_definition(q, k1, k2, xi, n)) < 1e-9


def test_bound_gate_never_misses():
    for l in range(1, 9):
        for f in range(1, 5):
            for n in range(-6, 7):
                if n == 0:
                    continue
                allv = cs.kl_bruteforce_all(l, f, n)
                for xi in range(-6, 7):
                    p = cs.CharSumParams(l, f, xi, n)
                    if abs(allv[xi % p.modulus]) > 1e-9:
                        assert cs.bound_gate(p)


def test_bound_constant_four_fails_at_l3():
    # |Kl_{3,1}(xi, n)| = 8 exceeds 4 sqrt(3) log 3 = 7.61 on some cells
    worst = max(abs(cs.kl_bruteforce(cs.CharSumParams(3, 1, xi, n)))
                for xi in range(-8, 9) for n in range(-10, 11) if n)
    assert worst == pytest.approx(8.0)
    p = cs.CharSumParams(3, 1, -4, 2)
    assert abs(cs.kl_bruteforce(p)) == pytest.approx(8.0)
    assert cs.kl_bound(p, 4.0) < 8.0 < cs.kl_bound(p, 4.21)


def test_params_validation():
    with pytest.raises(ValueError):
        cs.CharSumParams(0, 1, 0, 1)
    with pytest.raises(ValueError):
        cs.CharSumParams(1, 1, 0, 0)
    with pytest.raises(cs.BruteForceTooLarge):
        cs.kl_bruteforce(cs.CharSumParams(10**6, 10, 1, 1))
