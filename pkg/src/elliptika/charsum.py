"""Generalized Kloosterman sums

    Kl_{l,f}(xi, n) = sum over a mod 4 l f^2 with f^2 | a^2 - 4n and
                      (a^2 - 4n)/f^2 = 0, 1 (mod 4) of
                      ((a^2 - 4n)/f^2 / l) e(a xi / 4 l f^2)

evaluated three ways: the definition (``kl_bruteforce``), a CRT product of
local factors with closed forms at odd primes (``kl_factor``), and an upper
envelope with a divisibility gate (``kl_bound``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ntheory import (
    check_width,
    delta_square,
    factorize,
    kloosterman_s,
    kronecker,
    legendre_table,
    radical,
    require_prime,
    sqrt_mod_prime_power,
    valuation,
)

BRUTE_FORCE_CEILING = 10**8
BOUND_CONSTANT = 4.0


class BruteForceTooLarge(ValueError):
    """Raised when the definitional sum would exceed the summand ceiling."""


@dataclass(frozen=True)
class CharSumParams:
    l: int
    f: int
    xi: int
    n: int
    factors: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.l < 1 or self.f < 1:
            raise ValueError("l and f must be positive")
        if self.n == 0:
            raise ValueError("n must be nonzero")
        check_width(4 * self.l * self.f**2, "4lf^2")
        object.__setattr__(self, "factors", factorize(self.modulus))

    @property
    def modulus(self) -> int:
        return 4 * self.l * self.f**2


@dataclass(frozen=True)
class LocalFactor:
    q: int
    k1: int
    k2: int
    xi_local: int
    value: complex


def _kronecker_array(Y: np.ndarray, l: int) -> np.ndarray:
    """(Y/l) elementwise for an integer array Y and l >= 1."""
    out = np.ones(Y.shape, dtype=np.int64)
    for q, k in factorize(l):
        if q == 2:
            r = Y % 8
            s = np.where((r == 1) | (r == 7), 1, np.where((r == 3) | (r == 5), -1, 0))
        else:
            s = legendre_table(q)[Y % q]
        out *= s if k % 2 else s * s
    return out


def kl_weights(l: int, f: int, n: int) -> np.ndarray:
    """Integer weights w[a], a mod 4lf^2, so that Kl(xi) = sum_a w[a] e(a xi / 4lf^2)."""
    M = 4 * l * f * f
    a = np.arange(M, dtype=np.int64)
    X = a * a - 4 * n
    f2 = f * f
    ok = X % f2 == 0
    Y = X // f2
    ok &= (Y % 4 == 0) | (Y % 4 == 1)
    w = np.where(ok, _kronecker_array(Y, l), 0)
    return w


def kl_bruteforce(p: CharSumParams, ceiling: int = BRUTE_FORCE_CEILING) -> complex:
    M = p.modulus
    if M > ceiling:
        raise BruteForceTooLarge(
            f"4lf^2 = {M} summands exceeds the ceiling {ceiling}; use kl_factor")
    check_width(M * M, "(4lf^2)^2")
    w = kl_weights(p.l, p.f, p.n)
    idx = np.nonzero(w)[0]
    phase = (idx * (p.xi % M)) % M
    return complex((w[idx] * np.exp(2j * np.pi * phase / M)).sum())


def kl_bruteforce_all(l: int, f: int, n: int) -> np.ndarray:
    """Kl_{l,f}(xi, n) for every residue xi mod 4lf^2, via one FFT of the weights."""
    w = kl_weights(l, f, n).astype(float)
    M = w.size
    return np.fft.ifft(w) * M


def local_sum_definition(q: int, k1: int, k2: int, xi: int, n: int) -> complex:
    """Definitional local factor at an odd prime q (modulus q^(k1 + 2 k2))."""
    M = q ** (k1 + 2 * k2)
    a = np.arange(M, dtype=np.int64)
    X = a * a - 4 * n
    ok = X % q ** (2 * k2) == 0
    Y = X // q ** (2 * k2)
    w = np.where(ok, _kronecker_array(Y, q**k1), 0)
    idx = np.nonzero(w)[0]
    return complex((w[idx] * np.exp(2j * np.pi * ((idx * (xi % M)) % M) / M)).sum())


def local_sum_definition_all(q: int, k1: int, k2: int, n: int) -> np.ndarray:
    """local_sum_definition for every xi mod q^(k1 + 2 k2) (one FFT; real by xi -> -xi symmetry)."""
    M = q ** (k1 + 2 * k2)
    a = np.arange(M, dtype=np.int64)
    X = a * a - 4 * n
    ok = X % q ** (2 * k2) == 0
    w = np.where(ok, _kronecker_array(X // q ** (2 * k2), q**k1), 0).astype(float)
    return (np.fft.ifft(w) * M).real


def _vq(x: int, q: int) -> float:
    return math.inf if x == 0 else valuation(x, q)


def _legendre(x: int, q: int) -> int:
    return kronecker(x, q)


def _q_sum(q: int, k1: int, m: int, xi_top: int, exact_top: bool) -> float:
    """sum_{b mod q} chi^k1(b^2 - 4m) e(b xi_top / q) in the two regimes
    q | xi_top (``exact_top`` False) or xi_top a unit."""
    if not exact_top:
        if k1 % 2 == 0:
            return q - (1 + _legendre(4 * m, q))
        return q - 1 if m % q == 0 else -1
    if k1 % 2 == 0:
        roots = sqrt_mod_prime_power(4 * m, q, 1)
        return -sum(math.cos(2 * math.pi * r * xi_top / q) for r in roots)
    inv2 = pow(2, -1, q)
    return kloosterman_s(inv2 * xi_top, 2 * xi_top * m, q).real


def kl_local_odd(q: int, k1: int, k2: int, xi: int, n: int) -> float:
    """Local factor Kl_{q^k1, q^k2}(xi, n) at an odd prime by closed forms."""
    require_prime(q)
    if q == 2:
        raise ValueError("q = 2 has no closed form here; use the brute-force 2-part")
    if k1 < 0 or k2 < 0:
        raise ValueError("exponents must be non-negative")
    if n == 0:
        raise ValueError("n must be nonzero")
    if k1 == 0 and k2 == 0:
        return 1.0
    vxi = _vq(xi, q)
    vn = valuation(n, q)

    if k2 == 0:
        # a = a0 + q a1: the a1-sum is q^(k1-1) [v(xi) >= k1 - 1]
        if vxi < k1 - 1:
            return 0.0
        top = vxi >= k1
        xi_top = 0 if top else xi // q ** (k1 - 1)
        return q ** (k1 - 1) * _q_sum(q, k1, n, xi_top, not top)

    if k1 == 0:
        # sum over the square roots of 4n mod q^(2 k2)
        roots = sqrt_mod_prime_power(4 * n, q, 2 * k2)
        if not roots:
            return 0.0
        M = q ** (2 * k2)
        if vn >= 2 * k2:
            return float(q**k2) if vxi >= k2 else 0.0
        r = vn // 2
        if vxi < r:
            return 0.0
        s = roots[0]
        return 2.0 * q**r * math.cos(2 * math.pi * ((s * xi) % M) / M)

    # k1, k2 >= 1: a = a0 + q^(2k2+1) a1 gives q^(k1-1) [v(xi) >= k1 - 1]
    if not sqrt_mod_prime_power(4 * n, q, 2 * k2):
        return 0.0
    if vxi < k1 - 1:
        return 0.0
    if vn >= 2 * k2:
        # a0 = q^k2 a2; the reduced sum is the k2 = 0 sum at level k1 + k2
        if vxi < k1 + k2 - 1:
            return 0.0
        m = n // q ** (2 * k2)
        top = vxi >= k1 + k2
        xi_top = 0 if top else xi // q ** (k1 + k2 - 1)
        return q ** (k1 + k2 - 1) * _q_sum(q, k1, m, xi_top, not top)

    # v(n) = 2r < 2k2: a0 = q^r b, b = +-s + q^(2k2-2r) t
    r = vn // 2
    if vxi < k1 + r - 1:
        return 0.0
    K = 2 * k2 - 2 * r
    n1 = n // q ** (2 * r)
    s = sqrt_mod_prime_power(4 * n1, q, K + 1)[0]
    M = q ** (k1 + 2 * k2 - r)
    phi = 2 * math.pi * ((s * xi) % M) / M
    scale = q ** (k1 - 1 + r)
    if vxi >= k1 + r:
        return scale * (2 * (q - 1) * math.cos(phi) if k1 % 2 == 0 else 0.0)
    if k1 % 2 == 0:
        return scale * (-2 * math.cos(phi))
    xi3 = xi // q ** (k1 + r - 1)
    chi = _legendre(2 * s * xi3, q)
    if q % 4 == 1:
        return scale * chi * 2 * math.sqrt(q) * math.cos(phi)
    return scale * chi * (-2) * math.sqrt(q) * math.sin(phi)


def kl_local_two(k1: int, k2: int, xi: int, n: int) -> float:
    """2-part local factor by direct summation over a mod 2^(2 + k1 + 2 k2).

    Terms are binned by the exponent j of e(j / M); since {e(j/M): j < M/2} is a
    rational basis of Q(zeta_M), vanishing is decided exactly before rounding.
    """
    M = 2 ** (2 + k1 + 2 * k2)
    a = np.arange(M, dtype=np.int64)
    X = a * a - 4 * n
    f2 = 4**k2
    ok = X % f2 == 0
    Y = X // f2
    ok &= (Y % 4 == 0) | (Y % 4 == 1)
    w = np.where(ok, _kronecker_array(Y, 2**k1), 0)
    coeff = np.bincount((a * (xi % M)) % M, weights=w, minlength=M).astype(np.int64)
    half = M // 2
    c = coeff[:half] - coeff[half:]
    if not c.any():
        return 0.0
    j = np.arange(half)
    return float((c * np.cos(2 * np.pi * j / M)).sum())


def local_factors(p: CharSumParams) -> list[LocalFactor]:
    M = p.modulus
    out = []
    for q, e in p.factors:
        Mq = q**e
        cof = M // Mq
        xi_loc = (pow(cof, -1, Mq) * p.xi) % Mq
        k1 = valuation(p.l, q) if p.l % q == 0 else 0
        k2 = valuation(p.f, q) if p.f % q == 0 else 0
        if q == 2:
            val = kl_local_two(k1, k2, xi_loc, p.n)
        else:
            val = kl_local_odd(q, k1, k2, xi_loc, p.n)
        out.append(LocalFactor(q, k1, k2, xi_loc, complex(val)))
    return out


def kl_factor(p: CharSumParams) -> complex:
    value = 1.0
    for lf in local_factors(p):
        if lf.value == 0:
            return 0j
        value *= lf.value.real
    return complex(value)


def admissible(n: int, f: int) -> bool:
    """True when some a has f^2 | a^2 - 4n with (a^2 - 4n)/f^2 = 0, 1 (mod 4).

    Equals delta(n; f^2) at odd primes; the 2-part is decided over a mod 2^(2 + 2 v_2(f)).
    """
    k2 = valuation(f, 2) if f % 2 == 0 else 0
    f_odd = f >> k2
    if f_odd > 1 and not delta_square(n, f_odd**2):
        return False
    M = 2 ** (2 + 2 * k2)
    a = np.arange(M, dtype=np.int64)
    X = a * a - 4 * n
    ok = X % 4**k2 == 0
    Y = X // 4**k2
    return bool((ok & ((Y % 4 == 0) | (Y % 4 == 1))).any())


def bound_gate(p: CharSumParams) -> bool:
    """Divisibility gate (l sqrt(gcd(n, f^2)) / rad(l)) | xi, plus admissibility of n."""
    if not admissible(p.n, p.f):
        return False
    g = math.gcd(p.n, p.f**2)
    sg = math.isqrt(g)
    if sg * sg != g:
        return False
    return p.xi % (p.l * sg // radical(p.l)) == 0


def kl_bound(p: CharSumParams, constant: float = BOUND_CONSTANT) -> float:
    """Envelope C max(1, log lf^2) sqrt(l gcd(n,f^2)) sqrt(gcd(xi/sqrt(gcd(n,f^2)), l))."""
    if not bound_gate(p):
        return 0.0
    g = math.gcd(p.n, p.f**2)
    sg = math.isqrt(g)
    lf2 = p.l * p.f**2
    return (constant * max(1.0, math.log(lf2)) * math.sqrt(p.l * g)
            * math.sqrt(math.gcd(p.xi // sg, p.l)))


def _local_table(q: int, e: int, k1: int, k2: int, n: int) -> np.ndarray:
    Mq = q**e
    if q == 2:
        return np.array([kl_local_two(k1, k2, r, n) for r in range(Mq)])
    return np.array([kl_local_odd(q, k1, k2, r, n) for r in range(Mq)])


def kl_factor_residues(l: int, f: int, n: int) -> np.ndarray:
    """Kl_{l,f}(xi, n) for xi = 0 .. 4lf^2 - 1 by CRT from tables of local factors."""
    p = CharSumParams(l, f, 1, n)
    M = p.modulus
    xi = np.arange(M, dtype=np.int64)
    out = np.ones(M)
    for q, e in p.factors:
        Mq = q**e
        k1 = valuation(l, q) if l % q == 0 else 0
        k2 = valuation(f, q) if f % q == 0 else 0
        table = _local_table(q, e, k1, k2, n)
        twist = pow(M // Mq, -1, Mq)
        out *= table[(twist * xi) % Mq]
    return out


def local_bound(q: int, k1: int, k2: int, xi: int, n: int,
                constant: float = BOUND_CONSTANT) -> float:
    """kl_bound restricted to one odd prime: l = q^k1, f = q^k2, gate and gcds at q only."""
    require_prime(q)
    l, f = q**k1, q**k2
    g = math.gcd(n, f * f)
    sg = math.isqrt(g)
    if sg * sg != g or (k2 and not delta_square(n, f * f)):
        return 0.0
    if xi % (l * sg // (q if k1 else 1)) != 0:
        return 0.0
    return (constant * max(1.0, math.log(l * f * f)) * math.sqrt(l * g)
            * math.sqrt(math.gcd(xi // sg, l)))
