"""Exact integer kernel: primality, valuations, Kronecker symbols, square roots
modulo prime powers, and the classical Gauss and Kloosterman sums.

Everything here is a pure function of its arguments. Integers are Python ints,
but values that downstream code treats as machine integers are checked against
``INT_LIMIT`` and raise ``OverflowError`` instead of silently growing.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

INT_LIMIT = 2**63

# Deterministic Miller-Rabin witness set, exact for n < 3.3e24 (covers 64 bits).
_MR_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)
_SMALL_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47)


def check_width(value: int, what: str = "value") -> int:
    if abs(value) >= INT_LIMIT:
        raise OverflowError(f"{what}={value} exceeds the 64-bit working range")
    return value


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    for p in _SMALL_PRIMES:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_WITNESSES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def require_prime(q: int, what: str = "q") -> int:
    if not isinstance(q, (int, np.integer)) or not is_prime(int(q)):
        raise ValueError(f"{what}={q!r} is not a prime")
    return int(q)


@lru_cache(maxsize=65536)
def factorize(n: int) -> tuple[tuple[int, int], ...]:
    """Prime factorization of |n| as ((q, k), ...) sorted by q. factorize(1) = ()."""
    n = abs(int(n))
    if n == 0:
        raise ValueError("cannot factor 0")
    check_width(n, "n")
    out = []
    q = 2
    while q * q <= n:
        if n % q == 0:
            k = 0
            while n % q == 0:
                n //= q
                k += 1
            out.append((q, k))
        q += 1 if q == 2 else 2
    if n > 1:
        out.append((n, 1))
    return tuple(out)


def divisors(n: int) -> list[int]:
    divs = [1]
    for q, k in factorize(n):
        divs = [d * q**j for d in divs for j in range(k + 1)]
    return sorted(divs)


@dataclass(frozen=True)
class PrimePower:
    q: int
    k: int

    def __post_init__(self):
        require_prime(self.q)
        if self.k < 0:
            raise ValueError("exponent must be non-negative")
        check_width(self.q**self.k, "q^k")

    @property
    def value(self) -> int:
        return self.q**self.k


@dataclass(frozen=True)
class ValuationSplit:
    v: int
    q_part: int
    coprime_part: int


def valuation(A: int, q: int) -> int:
    if A == 0:
        raise ValueError("valuation of 0 is infinite")
    v = 0
    while A % q == 0:
        A //= q
        v += 1
    return v


def valuation_split(A: int, q: int) -> ValuationSplit:
    """(v_q(A), A_(q), A^(q)) with A = A_(q) * A^(q) and gcd(A^(q), q) = 1."""
    require_prime(q)
    v = valuation(A, q)
    qp = q**v
    return ValuationSplit(v, qp, A // qp)


def radical(alpha: int) -> int:
    if alpha == 0:
        raise ValueError("radical(0) is undefined")
    return math.prod(q for q, _ in factorize(alpha))


def kronecker(D: int, m: int) -> int:
    """Kronecker symbol (D/m), with (D/-1) = sign(D) and (D/0) = [|D| == 1]."""
    D, m = int(D), int(m)
    if m == 0:
        return 1 if abs(D) == 1 else 0
    result = 1
    if m < 0:
        m = -m
        if D < 0:
            result = -result
    # strip the 2-part of m using (D/2) = 0, +1 (D = +-1 mod 8), -1 (D = +-3 mod 8)
    v = 0
    while m % 2 == 0:
        m //= 2
        v += 1
    if v:
        if D % 2 == 0:
            return 0
        if v % 2 == 1 and D % 8 in (3, 5):
            result = -result
    # Jacobi symbol (D/m) for odd m > 0
    a = D % m
    while a:
        while a % 2 == 0:
            a //= 2
            if m % 8 in (3, 5):
                result = -result
        a, m = m, a
        if a % 4 == 3 and m % 4 == 3:
            result = -result
        a %= m
    return result if m == 1 else 0


def legendre_table(q: int) -> np.ndarray:
    """Array t with t[x] = (x/q) for x in range(q), q an odd prime."""
    return _legendre_table(int(q)).copy()


@lru_cache(maxsize=256)
def _legendre_table(q: int) -> np.ndarray:
    t = -np.ones(q, dtype=np.int64)
    t[0] = 0
    t[np.unique((np.arange(1, q, dtype=np.int64) ** 2) % q)] = 1
    return t


def _tonelli_shanks(a: int, q: int) -> int:
    """A square root of a unit a modulo the odd prime q (assumed to be a residue)."""
    a %= q
    if q % 4 == 3:
        return pow(a, (q + 1) // 4, q)
    s, Q = 0, q - 1
    while Q % 2 == 0:
        Q //= 2
        s += 1
    z = 2
    while pow(z, (q - 1) // 2, q) != q - 1:
        z += 1
    M, c, t, R = s, pow(z, Q, q), pow(a, Q, q), pow(a, (Q + 1) // 2, q)
    while t != 1:
        i, t2 = 0, t
        while t2 != 1:
            t2 = t2 * t2 % q
            i += 1
        b = pow(c, 1 << (M - i - 1), q)
        M, c, t, R = i, b * b % q, t * b * b % q, R * b % q
    return R


def _unit_roots(u: int, q: int, m: int) -> list[int]:
    """All roots of x^2 = u (mod q^m) for a unit u, m >= 1."""
    mod = q**m
    u %= mod
    if q == 2:
        if m == 1:
            return [1]
        if m == 2:
            return [1, 3] if u % 4 == 1 else []
        if u % 8 != 1:
            return []
        # lift a root from mod 8 upwards; x -> x + 2^(j-1) fixes the next bit
        x = 1
        for j in range(3, m):
            if (x * x - u) % 2 ** (j + 1):
                x += 2 ** (j - 1)
        half = mod // 2
        return sorted({x % mod, (-x) % mod, (x + half) % mod, (-x + half) % mod})
    if pow(u % q, (q - 1) // 2, q) != 1:
        return []
    x = _tonelli_shanks(u, q)
    # Hensel: x <- x - (x^2 - u) / (2x)
    for j in range(2, m + 1):
        modj = q**j
        x = (x - (x * x - u) * pow(2 * x, -1, modj)) % modj
    return sorted({x % mod, (-x) % mod})


@lru_cache(maxsize=16384)
def _sqrt_mod_cached(a: int, q: int, k: int) -> tuple[int, ...]:
    mod = q**k
    a %= mod
    if a == 0:
        step = q ** ((k + 1) // 2)
        return tuple(range(0, mod, step))
    v = valuation(a, q)
    if v % 2:
        return ()
    h = v // 2
    u = a // q**v
    base = _unit_roots(u, q, k - v)
    if not base:
        return ()
    # y is determined mod q^(k-v); x = q^h y only needs y mod q^(k-h)
    lift = q ** (k - v)
    out = set()
    for y0 in base:
        for t in range(q**h):
            out.add((q**h * (y0 + t * lift)) % mod)
    return tuple(sorted(out))


def sqrt_mod_prime_power(a: int, q: int, k: int) -> list[int]:
    """Sorted list of every x mod q^k with x^2 = a (mod q^k); empty if none."""
    require_prime(q)
    if k < 1:
        raise ValueError("k must be >= 1")
    check_width(q**k, "q^k")
    return list(_sqrt_mod_cached(int(a), int(q), int(k)))


def delta_square(a: int, b: int) -> int:
    """1 if x^2 = a (mod b) is solvable, else 0."""
    if b < 1:
        raise ValueError("modulus must be positive")
    for q, k in factorize(b):
        if not _sqrt_mod_cached(int(a), q, k):
            return 0
    return 1


@lru_cache(maxsize=256)
def _inverses(q: int) -> np.ndarray:
    x = np.arange(1, q, dtype=np.int64)
    return np.array([pow(int(v), -1, q) for v in x], dtype=np.int64)


def kloosterman_s(a: int, b: int, q: int) -> complex:
    """S(a, b; q) = sum over x in F_q^* of e((a x + b / x) / q)."""
    q = require_prime(q)
    x = np.arange(1, q, dtype=np.int64)
    phase = ((a % q) * x + (b % q) * _inverses(q)) % q
    s = np.exp(2j * np.pi * phase / q).sum()
    return complex(s)


def gauss_sum(q: int) -> complex:
    """Quadratic Gauss sum sum_{a mod q} (a/q) e(a/q) for an odd prime q."""
    q = require_prime(q)
    if q == 2:
        raise ValueError("gauss_sum needs an odd prime")
    t = _legendre_table(q)
    a = np.arange(q)
    return complex((t * np.exp(2j * np.pi * a / q)).sum())


def e(x: float) -> complex:
    return cmath.exp(2j * math.pi * x)
