"""The Poisson-summed elliptic term: Sigma(square), Sigma(xi != 0), scans.

Notation (p an odd prime, (l, f) a lattice pair):
    C = l f^2 / (2 sqrt p),   s = sqrt p / (2 l f^2),   D = -s xi
    theta^pos(x) = 2 sqrt(1 - x^2) g1(x) 1_[-1,1](x) + g2(x),   theta^neg smooth

Sigma(xi != 0) is the sum over (l, f) and xi != 0 of five terms
    1: (sqrt p / 2) (lf^2)^{-3/2} Kl(xi, p)/sqrt l   int theta^pos F(C / sqrt|x^2-1|) e(xD)
    2: (1/4) (lf^2)^{-1/2} Kl(xi, p)/sqrt l          int_{|x|<1} theta^pos / sqrt(1-x^2) H1(..) e(xD)
    3: (1/4) (lf^2)^{-1/2} Kl(xi, p)/sqrt l          int_{|x|>1} theta^pos / sqrt(x^2-1) H0(..) e(xD)
    4: (sqrt p / 2) (lf^2)^{-3/2} Kl(xi, -p)/sqrt l  int theta^neg F(C / sqrt(x^2+1)) e(xD)
    5: (1/4) (lf^2)^{-1/2} Kl(xi, +-p)/sqrt l        int theta^neg / sqrt(x^2+1) H0(..) e(xD)

For each pair the five integrands g_j are sampled once and ``FourierGrid``
returns every Fourier factor ghat_j(s xi) with one FFT. Because each full
xi-sum is a Poisson sum, it also equals the exact finite trace-side sum
    sum_{xi in Z} Kl(xi, n) ghat(s xi) = (2 l f^2 / sqrt p) sum_b w(b) g(b / 2 sqrt p)
(w the integer weights of Kl), which is used as an xi-truncation-free reference.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import zeta

from . import asymp
from .asymp import AsymptoticExpansion, ExpansionRequest
from .charsum import kl_factor_residues, kl_weights
from .ntheory import divisors, factorize, require_prime
from .oscint import FourierGrid, FourierJob, Profile, fourier_singular, smooth_bump
from .specfun import PHI_F, PHI_H0, PHI_H1, big_f, h0, h1

SCHEMA = "# elliptika-schema v1"
SIGMA0_NOTE = "Sigma(0) not evaluated; classified O(1) in terms of the test function"
FIFTH_TERM_CHOICES = ("p", "-p")
METHODS = ("oracle", "expansion")
EXPANSION_ORDER = 3


class AuditFailure(RuntimeError):
    """A doubling audit moved a sum by more than the tolerance."""


# ---------------------------------------------------------------------------
# Profiles
# ---------------------------------------------------------------------------

def _bump_complex(z, radius):
    """exp(-1 / (1 - (z/radius)^2)); analytic continuation used for Cauchy
    Taylor coefficients near z = +-1."""
    w = (np.asarray(z) / radius) ** 2
    return np.exp(-1.0 / (1.0 - w))


def default_g1(x):
    return np.ones(np.shape(x))


def default_g2(x):
    return smooth_bump(x, 2.0)


def default_neg(x):
    return smooth_bump(x, 1.5)


@dataclass(frozen=True)
class ThetaProfile:
    """theta^pos = 2 sqrt|x^2-1| g1 1_[-1,1] + g2 and theta^neg, with edge expansions.

    pos_expansions = (expansion of theta_1 = 2 sqrt(1-x^2) g1, a = 1;
                      expansion of theta_2 = g2, a = 0), both at x = +-1.
    """
    g1: Callable
    g2: Callable
    g2_radius: float
    neg_profile: Callable
    neg_radius: float
    pos_expansions: tuple
    name: str = "custom"
    factor: float = 1.0

    def theta1(self, x):
        x = np.asarray(x, dtype=float)
        inside = np.abs(x) < 1
        out = np.zeros(x.shape)
        xi = x[inside]
        out[inside] = 2 * np.sqrt((1 - xi) * (1 + xi)) * self.g1(xi)
        return self.factor * out

    def theta2(self, x):
        return self.factor * self.g2(np.asarray(x, dtype=float))

    def pos(self, x):
        return self.theta1(x) + self.theta2(x)

    def neg(self, x):
        return self.factor * self.neg_profile(np.asarray(x, dtype=float))

    @property
    def support(self) -> float:
        return max(1.0, self.g2_radius, self.neg_radius)

    def scaled(self, c: float) -> "ThetaProfile":
        """c * theta (exact: every assembled sum is linear in theta)."""
        return replace(self, factor=self.factor * c,
                       pos_expansions=tuple(e.scaled(c) for e in self.pos_expansions),
                       name=f"{c:g}*{self.name}")

    def __add__(self, other: "ThetaProfile") -> "ThetaProfile":
        a, b = self.factor, other.factor

        def g1(x):
            return a * self.g1(x) + b * other.g1(x)

        def g2(x):
            return a * self.g2(x) + b * other.g2(x)

        def neg(x):
            return a * self.neg_profile(x) + b * other.neg_profile(x)
        exps = []
        for e1, e2 in zip(self.pos_expansions, other.pos_expansions):
            n = min(e1.order, e2.order) + 1
            exps.append(replace(e1, coeffs_plus=tuple(np.add(e1.coeffs_plus[:n], e2.coeffs_plus[:n])),
                                coeffs_minus=tuple(np.add(e1.coeffs_minus[:n], e2.coeffs_minus[:n])),
                                remainder_bound=e1.remainder_bound + e2.remainder_bound))
        return ThetaProfile(g1, g2, max(self.g2_radius, other.g2_radius), neg,
                            max(self.neg_radius, other.neg_radius), tuple(exps),
                            f"{self.name}+{other.name}")

    def derived_expansions(self):
        """Expansions of the four singular pieces used by the expansion method:
        theta_1 (a=1), theta_2 (a=0), 2 g1 (a=0), theta_2 / sqrt|x^2-1| (a=-1)."""
        t1, t2 = self.pos_expansions
        return t1, t2, asymp.expansion_shift(t1, -0.5), asymp.expansion_shift(t2, -0.5)


def _check_compact(fn, radius, what):
    probe = np.linspace(radius, radius + 8.0, 2001)
    vals = np.concatenate([fn(probe), fn(-probe)])
    if not np.all(np.isfinite(vals)) or np.any(vals != 0):
        raise ValueError(f"{what} must vanish for |x| >= {radius} (compact support)")


def make_theta(g1: Optional[Callable] = None, g2: Optional[Callable] = None, *,
               g2_radius: float = 2.0, neg: Optional[Callable] = None,
               neg_radius: float = 1.5, order: int = EXPANSION_ORDER) -> ThetaProfile:
    """Build a ThetaProfile. Defaults: g1 = 1, g2 = e^{-1/(1-(x/2)^2)} on |x| < 2,
    theta^neg = e^{-1/(1-(x/1.5)^2)} on |x| < 1.5.

    Edge expansions: theta_1 for g1 = 1 from the binomial series; the default
    bump from a Cauchy integral of its analytic continuation; custom functions
    by Richardson-extrapolated finite differences.
    """
    if not 0 < g2_radius <= 2:
        raise ValueError("g2 support radius must lie in (0, 2]")
    if not neg_radius > 0:
        raise ValueError("neg support radius must be positive")
    custom_g1 = g1 is not None
    custom_g2 = g2 is not None
    g1 = g1 or default_g1
    g2 = g2 or default_g2
    neg = neg or default_neg
    _check_compact(g2, g2_radius, "g2")
    _check_compact(neg, neg_radius, "theta^neg")
    if custom_g1:
        def edge1(x, sg):
            x = np.asarray(x, dtype=float)
            return 2 * np.sqrt(np.abs(x) * (2 - x)) * g1(sg * (1 - x))
        t1 = asymp.expansion_from_edge(edge1, 1.0, order, analytic=False)
    else:
        t1 = asymp.sqrt_expansion(order, scale=2.0)
    if custom_g2:
        def edge2(x, sg):
            return g2(sg * (1 - np.asarray(x, dtype=float)))
        t2 = asymp.expansion_from_edge(edge2, 0.0, order, analytic=False)
    else:
        def edge2(z, sg):
            return _bump_complex(sg * (1 - z), 2.0)
        t2 = asymp.expansion_from_edge(edge2, 0.0, order, analytic=True)
    name = "default" if not (custom_g1 or custom_g2) else "custom"
    return ThetaProfile(g1, g2, g2_radius, neg, neg_radius, (t1, t2), name)


def zero_theta() -> ThetaProfile:
    """theta with g1 = g2 = 0 and theta^neg = 0."""
    def zero(x):
        return np.zeros(np.shape(x))
    th = make_theta(zero, zero, neg=zero)
    return replace(th, name="zero")


# ---------------------------------------------------------------------------
# Sigma(square) and the L-series
# ---------------------------------------------------------------------------

def l_series(u: float, m: int) -> float:
    """zeta(u) sum_{f | m} f^{1-2u} prod_{q | m/f} (1 - q^{-u}), u > 1."""
    if not u > 1:
        raise ValueError("l_series needs u > 1")
    if m < 1:
        raise ValueError("m must be a positive integer")
    total = []
    for f in divisors(m):
        prod = 1.0
        for q, _ in factorize(m // f):
            prod *= 1 - q ** (-u)
        total.append(f ** (1 - 2 * u) * prod)
    return float(zeta(u, 1)) * math.fsum(total)


def _square_weight(x):
    x = np.asarray(x, dtype=float)
    return big_f(x) + x * h0(x)


@lru_cache(maxsize=None)
def _square_cut(tol: float) -> float:
    """x beyond which |F(x) + x H0(x)| stays below tol."""
    xs = np.linspace(0.05, 400.0, 80000)
    above = np.nonzero(np.abs(_square_weight(xs)) >= tol)[0]
    return float(xs[above[-1] + 1]) if above.size else 0.05


def square_bracket(m: int, tol: float = 1e-12) -> float:
    """sum_{f | m} (1/f) sum_{l : gcd(l, m/f) = 1} (1/l) [F(x) + x H0(x)], x = l f^2 / m."""
    cut = _square_cut(tol)
    parts = []
    for f in divisors(m):
        L = int(cut * m / (f * f)) + 1
        l = np.arange(1, L + 1)
        keep = np.gcd(l, m // f) == 1
        l = l[keep]
        x = l * (f * f) / m
        parts.append(math.fsum((_square_weight(x) / l).tolist()) / f)
    return math.fsum(parts)


def sigma_square(p: int, theta: ThetaProfile, tol: float = 1e-12) -> float:
    require_prime(p)
    if p == 2:
        raise ValueError("p must be odd")
    rp = math.sqrt(p)
    xp, xm = (p + 1) / (2 * rp), (p - 1) / (2 * rp)
    pos = float(theta.pos(np.array([xp]))[0] + theta.pos(np.array([-xp]))[0])
    neg = float(theta.neg(np.array([xm]))[0] + theta.neg(np.array([-xm]))[0])
    total = 0.0
    if pos != 0:
        total += pos * square_bracket(p - 1, tol)
    if neg != 0:
        total += neg * square_bracket(p + 1, tol)
    return total


# ---------------------------------------------------------------------------
# Truncation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TruncationPolicy:
    """Which (l, f, xi) enter the assembled sums.

    Pairs: (l / l_mult)(f / f_mult)^2 <= lf2_ratio sqrt p.
    Frequencies: 1 <= |xi| <= xi_mult max(xi_floor, xi_ratio sqrt p / l f^2, d_max / s),
    s = sqrt p / 2 l f^2; the second bound is C^2 |D| <= xi_ratio / 8, the third
    |D| <= d_max (it governs once C is of order 1). Doubling l_max (f_max, xi_max) is
    l_mult = 2 (f_mult = 2, xi_mult = 2). region_split T labels (l, f, xi) as
    small (l f^2 |xi| / sqrt p <= T) or large. tail_tol is relative to |Sigma|.
    """
    lf2_ratio: float = 32.0
    xi_ratio: float = 512.0
    d_max: float = 32.0
    xi_floor: int = 8
    l_mult: int = 1
    f_mult: int = 1
    xi_mult: int = 1
    region_split: float = 1.0
    tail_tol: float = 0.01

    def __post_init__(self):
        if not self.lf2_ratio > 0 or not self.xi_ratio > 0 or self.d_max < 0:
            raise ValueError("truncation ratios must be positive")
        if self.xi_floor < 1 or min(self.l_mult, self.f_mult, self.xi_mult) < 1:
            raise ValueError("xi_floor and multipliers must be positive integers")
        if not self.region_split > 0:
            raise ValueError("region_split must be positive")
        if not 0 < self.tail_tol < 1:
            raise ValueError("tail_tol must lie in (0, 1)")

    def _L(self, p):
        return self.lf2_ratio * math.sqrt(p)

    def includes(self, p: int, l: int, f: int) -> bool:
        return (l / self.l_mult) * (f / self.f_mult) ** 2 <= self._L(p)

    def pairs(self, p: int) -> list:
        L = self._L(p) * self.l_mult * self.f_mult**2
        out = []
        f = 1
        while f * f <= L:
            for l in range(1, int(L / (f * f)) + 1):
                if self.includes(p, l, f):
                    out.append((l, f))
            f += 1
        return out

    def xi_max(self, p: int, l: int, f: int) -> int:
        lf2 = l * f * f
        base = max(self.xi_floor, math.ceil(self.xi_ratio * math.sqrt(p) / lf2),
                   math.ceil(self.d_max * 2 * lf2 / math.sqrt(p)))
        return self.xi_mult * base

    def doubled(self, which: str) -> "TruncationPolicy":
        key = {"l": "l_mult", "f": "f_mult", "xi": "xi_mult"}[which]
        return replace(self, **{key: 2 * getattr(self, key)})

    def bounds(self, p: int) -> dict:
        L = self._L(p)
        return {"l_max": int(L * self.l_mult * self.f_mult**2),
                "f_max": int(math.sqrt(L * self.l_mult) * self.f_mult),
                "xi_max": self.xi_max(p, 1, 1)}


# ---------------------------------------------------------------------------
# Per-pair Fourier factors
# ---------------------------------------------------------------------------

def _phi_eval(fn, y):
    out = np.zeros(y.shape)
    m = np.isfinite(y) & (y > 0)
    if m.any():
        out[m] = fn(y[m])
    return out


def term_integrands(theta: ThetaProfile, C: float) -> list:
    """The five real integrands g_j(x) (term j carries int g_j e(xD) dx)."""
    def with_gap(x):
        gap = (1 - x) * (1 + x)
        with np.errstate(divide="ignore"):
            y = C / np.sqrt(np.abs(gap))
        return gap, y

    def g1(x):
        gap, y = with_gap(x)
        return theta.pos(x) * _phi_eval(big_f, y)

    def g2(x):
        gap, y = with_gap(x)
        out = np.zeros(x.shape)
        m = gap > 0
        out[m] = theta.pos(x[m]) / np.sqrt(gap[m]) * _phi_eval(h1, y[m])
        return out

    def g3(x):
        gap, y = with_gap(x)
        out = np.zeros(x.shape)
        m = gap < 0
        out[m] = theta.pos(x[m]) / np.sqrt(-gap[m]) * _phi_eval(h0, y[m])
        return out

    def g4(x):
        r = np.sqrt(x * x + 1)
        return theta.neg(x) * big_f(C / r)

    def g5(x):
        r = np.sqrt(x * x + 1)
        return theta.neg(x) / r * h0(C / r)
    return [g1, g2, g3, g4, g5]


KL_TABLE_METHODS = ("fft", "factor")


@lru_cache(maxsize=256)
def _weights(l: int, f: int, n: int) -> np.ndarray:
    w = kl_weights(l, f, n).astype(float)
    w.setflags(write=False)
    return w


@lru_cache(maxsize=256)
def kl_residues(l: int, f: int, n: int, method: str = "fft") -> np.ndarray:
    """Kl_{l,f}(xi, n) for xi mod 4 l f^2 (cached, read-only).

    "fft" transforms the integer weights (O(M log M)); "factor" assembles the
    closed-form local factors by CRT, whose Kloosterman/Salie local values cost
    O(q) each, i.e. O(q^2) per table at a large prime q.
    """
    if method == "fft":
        w = _weights(l, f, n)
        arr = np.ascontiguousarray((np.fft.ifft(w) * w.size).real)
    elif method == "factor":
        arr = kl_factor_residues(l, f, n)
    else:
        raise ValueError(f"method must be one of {KL_TABLE_METHODS}")
    arr.setflags(write=False)
    return arr


def term_weights(p: int, l: int, f: int) -> np.ndarray:
    lf2 = l * f * f
    w1 = math.sqrt(p) / 2 * lf2**-1.5 / math.sqrt(l)
    w2 = 0.25 * lf2**-0.5 / math.sqrt(l)
    return np.array([w1, w2, w2, w1, w2])


def term_ns(p: int, fifth: str = "p") -> tuple:
    """n in Kl(xi, n) for terms 1..5 and, last, the alternative fifth term."""
    n5 = p if fifth == "p" else -p
    return (p, p, p, -p, n5, -n5)


@dataclass(frozen=True)
class GridConfig:
    """FFT grid spacing min(C^2, 1) / points_per_scale."""
    points_per_scale: float = 200.0


_CHUNK = 1 << 19  # integrand evaluation block (bounds the temporaries)


def pair_fourier(p: int, l: int, f: int, theta: ThetaProfile, k_max: int,
                 grid: GridConfig = GridConfig(), two_sided: bool = False):
    """(gs, I, I_neg): the integrands and ghat_j(s k), k = 0..k_max (rows j = 0..4);
    I_neg holds ghat_j(-s k) from an independent complex FFT when two_sided."""
    lf2 = l * f * f
    C = lf2 / (2 * math.sqrt(p))
    s = math.sqrt(p) / (2 * lf2)
    R = theta.support
    fg = FourierGrid(s, R, k_max, min(C * C, 1.0) / grid.points_per_scale)
    gs = term_integrands(theta, C)
    supp = np.abs(fg.x) < R
    xs = fg.x[supp]
    # one signal at a time: for small C the grid has millions of points
    I = np.empty((len(gs), k_max + 1), dtype=complex)
    Ineg = np.empty_like(I) if two_sided else None
    v = np.zeros(fg.N)
    idx = np.nonzero(supp)[0]
    for j, g in enumerate(gs):
        for c in range(0, xs.size, _CHUNK):
            v[idx[c:c + _CHUNK]] = g(xs[c:c + _CHUNK])
        if two_sided:
            I[j], Ineg[j] = fg.transform_two_sided(v)
        else:
            I[j] = fg.transform(v)
    return gs, I, Ineg


def dual_sums(p: int, l: int, f: int, gs, ghat0, fifth: str = "p") -> np.ndarray:
    """Unweighted xi-complete sums over xi != 0 (rows as ``term_ns``) from
    sum_xi Kl(xi) ghat(s xi) = (2 l f^2 / sqrt p) sum_b w(b) g(b / 2 sqrt p)."""
    lf2 = l * f * f
    M = 4 * lf2
    rp = math.sqrt(p)
    bmax = int(4 * rp) + 2
    b = np.arange(-bmax, bmax + 1)
    x = b / (2 * rp)
    gvals = [g(x) for g in gs]
    out = []
    for j, n in enumerate(term_ns(p, fifth)):
        jj = min(j, 4)
        w = _weights(l, f, n)[b % M]
        full = (2 * lf2 / rp) * float(np.dot(w, gvals[jj]))
        out.append(full - float(kl_residues(l, f, n)[0]) * ghat0[jj].real)
    return np.array(out)


@dataclass
class PairResult:
    """Weighted per-term sums for one pair (rows as ``term_ns``):
    base (|xi| <= k_base), doubled (|xi| <= k_max), the base split by region,
    the imaginary part (two-sided mode) and the xi-complete reference."""
    l: int
    f: int
    base: np.ndarray
    doubled: np.ndarray
    small: np.ndarray
    imag: np.ndarray
    dual: np.ndarray


def _reduce_pair(p, l, f, W, kls, I, k_base, k_max, split, Ineg=None, klneg=None):
    # within a pair numpy's (deterministic, pairwise) sums; across pairs fsum
    k = np.arange(1, k_max + 1)
    n_small = int(np.count_nonzero(l * f * f * k[:k_base] / math.sqrt(p) <= split))
    rows = [np.zeros(6) for _ in range(4)]
    base, dbl, small, imag = rows
    for j in range(6):
        jj = min(j, 4)
        if Ineg is None:
            c = 2 * W[jj] * kls[j][1:] * I[jj, 1:].real
        else:
            z = W[jj] * (kls[j][1:] * I[jj, 1:] + klneg[j][1:] * Ineg[jj, 1:])
            c = z.real
            imag[j] = z.imag[:k_base].sum()
        small[j] = c[:n_small].sum()
        # independent of the split, so T is pure bookkeeping
        base[j] = c[:k_base].sum()
        dbl[j] = base[j] + c[k_base:].sum()
    return base, dbl, small, imag


def pair_oracle(p: int, l: int, f: int, theta: ThetaProfile, k_base: int,
                k_max: Optional[int] = None, fifth: str = "p", grid: GridConfig = GridConfig(),
                split: float = 1.0, two_sided: bool = False, dual: bool = True,
                kl_method: str = "fft") -> PairResult:
    k_max = k_base if k_max is None else max(k_max, k_base)
    gs, I, Ineg = pair_fourier(p, l, f, theta, k_max, grid, two_sided)
    M = 4 * l * f * f
    k = np.arange(k_max + 1)
    ns = term_ns(p, fifth)
    kls = [kl_residues(l, f, n, kl_method)[k % M] for n in ns]
    klneg = [kl_residues(l, f, n, kl_method)[(-k) % M] for n in ns] if two_sided else None
    W = term_weights(p, l, f)
    base, dbl, small, imag = _reduce_pair(p, l, f, W, kls, I, k_base, k_max, split, Ineg, klneg)
    d = W[[0, 1, 2, 3, 4, 4]] * dual_sums(p, l, f, gs, I[:, 0], fifth) if dual else np.full(6, np.nan)
    return PairResult(l, f, base, dbl, small, imag, d)


# ---------------------------------------------------------------------------
# Expansion method
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExpansionConfig:
    M: int = 2
    d_min: float = 4.0  # |D| below this keeps the oracle value
    tau: float = 1.0
    tau1: float = 1.0
    table_step: float = 0.02  # log|x| spacing of the cached A-transform splines


def pair_expansion_factors(p, l, f, theta: ThetaProfile, ks,
                           cfg: ExpansionConfig = ExpansionConfig()) -> np.ndarray:
    """Fourier factors of terms 1..3 at xi = ks from the edge expansions."""
    lf2 = l * f * f
    C = lf2 / (2 * math.sqrt(p))
    D = -math.sqrt(p) / (2 * lf2) * np.asarray(ks, dtype=float)
    t1, t2, two_g1, t2s = theta.derived_expansions()
    rF = ExpansionRequest(M=cfg.M, tau=cfg.tau, tau1=0.0, table_step=cfg.table_step)
    rH = ExpansionRequest(M=cfg.M, tau=cfg.tau, tau1=cfg.tau1, table_step=cfg.table_step)
    I1 = (asymp.expansion_inside(t1, rF, PHI_F, C, D) + asymp.expansion_inside(t2, rF, PHI_F, C, D)
          + asymp.expansion_outside(t2, rF, PHI_F, C, D))
    I2 = (asymp.expansion_inside(two_g1, rF, PHI_H1, C, D)
          + asymp.expansion_inside(t2s, rF, PHI_H1, C, D))
    I3 = asymp.expansion_outside(t2s, rH, PHI_H0, C, D)
    return np.array([I1, I2, I3])


def pair_expansion(p: int, l: int, f: int, theta: ThetaProfile, k_base: int,
                   k_max: Optional[int] = None, fifth: str = "p", grid: GridConfig = GridConfig(),
                   split: float = 1.0, cfg: ExpansionConfig = ExpansionConfig(),
                   kl_method: str = "fft") -> PairResult:
    """Terms 1..3 from the edge expansions wherever |D| >= d_min, the oracle
    elsewhere; terms 4, 5 (smooth integrands) always from the oracle."""
    k_max = k_base if k_max is None else max(k_max, k_base)
    gs, I, _ = pair_fourier(p, l, f, theta, k_max, grid)
    s = math.sqrt(p) / (2 * l * f * f)
    k = np.arange(k_max + 1)
    use = (k >= 1) & (s * k >= cfg.d_min)
    if use.any():
        I = I.copy()
        I[:3, use] = pair_expansion_factors(p, l, f, theta, k[use], cfg)
    M = 4 * l * f * f
    kls = [kl_residues(l, f, n, kl_method)[k % M] for n in term_ns(p, fifth)]
    W = term_weights(p, l, f)
    base, dbl, small, imag = _reduce_pair(p, l, f, W, kls, I, k_base, k_max, split)
    return PairResult(l, f, base, dbl, small, imag, np.full(6, np.nan))


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------

@dataclass
class EllipticReport:
    p: int
    sigma_square: float
    sigma_xi: float
    per_term_breakdown: tuple
    truncation_audit: dict
    runtime: float
    method: str = "oracle"
    fifth_term: str = "p"
    term5_alternative: float = 0.0
    sigma_xi_alternative: float = 0.0
    imag_part: float = 0.0
    region_breakdown: dict = field(default_factory=dict)
    xi_complete: float = float("nan")
    bounds: dict = field(default_factory=dict)
    n_pairs: int = 0
    flagged: bool = False
    notes: tuple = (SIGMA0_NOTE,)

    @property
    def audit_delta(self) -> float:
        return max(self.truncation_audit.values()) if self.truncation_audit else 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["per_term_breakdown"] = list(self.per_term_breakdown)
        d["notes"] = list(self.notes)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EllipticReport":
        d = dict(d)
        d["per_term_breakdown"] = tuple(d["per_term_breakdown"])
        d["notes"] = tuple(d.get("notes", ()))
        return cls(**d)


def default_threads() -> int:
    env = os.environ.get("ELLIPTIKA_THREADS")
    if env:
        n = int(env)
        if n < 1:
            raise ValueError("ELLIPTIKA_THREADS must be a positive integer")
        return n
    return os.cpu_count() or 1


def _total(results, pairs, attr):
    """Per-row sums over pairs in fixed pair order, exactly rounded."""
    return [math.fsum(float(getattr(results[lf], attr)[j]) for lf in pairs) for j in range(6)]


def sigma_xi(p: int, theta: ThetaProfile, policy: TruncationPolicy = TruncationPolicy(),
             method: str = "oracle", fifth: str = "p", threads: Optional[int] = None,
             grid: GridConfig = GridConfig(), expansion: ExpansionConfig = ExpansionConfig(),
             two_sided: bool = False, audit: bool = True, dual: bool = True,
             kl_method: str = "fft", square_tol: float = 1e-12) -> EllipticReport:
    """Assemble Sigma(xi != 0) (and Sigma(square)) for one prime.

    With ``audit`` every pair of the f-doubled lattice (which contains the
    l-doubled one) is evaluated up to twice its xi bound, and the three
    doubling deltas are reported relative to |Sigma(xi != 0)|.
    """
    t0 = time.perf_counter()
    require_prime(p)
    if p == 2:
        raise ValueError("p must be odd")
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    if fifth not in FIFTH_TERM_CHOICES:
        raise ValueError(f"fifth must be one of {FIFTH_TERM_CHOICES}")
    threads = threads or default_threads()
    lattice = policy.doubled("f").pairs(p) if audit else policy.pairs(p)

    def work(lf):
        l, f = lf
        kb = policy.xi_max(p, l, f)
        km = 2 * kb if audit else kb
        if method == "oracle":
            return pair_oracle(p, l, f, theta, kb, km, fifth, grid, policy.region_split,
                               two_sided, dual, kl_method)
        return pair_expansion(p, l, f, theta, kb, km, fifth, grid, policy.region_split,
                              expansion, kl_method)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            out = list(ex.map(work, lattice))
    else:
        out = [work(lf) for lf in lattice]
    results = dict(zip(lattice, out))

    base_pairs = policy.pairs(p)
    sums = _total(results, base_pairs, "base")
    total = math.fsum(sums[:5])
    deltas = {}
    if audit:
        alt_sets = {"l": policy.doubled("l").pairs(p), "f": lattice}
        for which, prs in alt_sets.items():
            deltas[which] = math.fsum(_total(results, prs, "base")[:5])
        deltas["xi"] = math.fsum(_total(results, base_pairs, "doubled")[:5])
        for which, v in deltas.items():
            d = abs(v - total)
            deltas[which] = d / abs(total) if total else (0.0 if d == 0 else math.inf)
    small = math.fsum(_total(results, base_pairs, "small")[:5])
    xi_complete = math.fsum(_total(results, base_pairs, "dual")[:5]) \
        if (method == "oracle" and dual) else float("nan")
    imag = math.fsum(_total(results, base_pairs, "imag")[:5]) if two_sided else 0.0
    return EllipticReport(
        p=p, sigma_square=sigma_square(p, theta, square_tol), sigma_xi=total,
        per_term_breakdown=tuple(sums[:5]), truncation_audit=deltas,
        runtime=time.perf_counter() - t0, method=method, fifth_term=fifth,
        term5_alternative=sums[5], sigma_xi_alternative=math.fsum(sums[:4] + [sums[5]]),
        imag_part=imag, region_breakdown={"small": small, "large": total - small},
        xi_complete=xi_complete, bounds=policy.bounds(p), n_pairs=len(base_pairs),
        flagged=any(v >= policy.tail_tol for v in deltas.values()))

# ---------------------------------------------------------------------------
# Envelopes
# ---------------------------------------------------------------------------

def _outside_profile(theta, radius):
    def fn(x):
        gap = np.abs((1 - x) * (1 + x))
        with np.errstate(divide="ignore"):
            return np.where(gap > 0, theta.pos(x) / np.sqrt(gap), 0.0)

    def edge(u, sign, outside):
        return theta.pos(sign * (1 + u)) / np.sqrt(u * (2 + u)) if outside else np.zeros(u.shape)
    return Profile(fn, radius, edge, "theta/sqrt(x^2-1)")


def _inside_profiles(theta):
    def pos_edge(u, sign, outside):
        if outside:
            return theta.theta2(sign * (1 + u))
        return 2 * np.sqrt(u * (2 - u)) * theta.g1(sign * (1 - u)) * theta.factor \
            + theta.theta2(sign * (1 - u))

    def over_edge(u, sign, outside):
        return 2 * theta.g1(sign * (1 - u)) * theta.factor \
            + theta.theta2(sign * (1 - u)) / np.sqrt(u * (2 - u))

    def over_fn(x):
        gap = (1 - x) * (1 + x)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(gap > 0, theta.pos(x) / np.sqrt(np.abs(gap)), 0.0)
    R = max(theta.g2_radius, 1.0)
    return (Profile(theta.pos, R, pos_edge, "theta^pos"),
            Profile(over_fn, 1.0, over_edge, "theta^pos/sqrt(1-x^2)"))


def envelope_values(p, l, f, xi, theta, tol=1e-10):
    """The three oracle integrals of the envelope corollaries (H lines carry
    the l f^2 / sqrt p prefactor) and the two theta^neg integrals."""
    lf2 = l * f * f
    C = lf2 / (2 * math.sqrt(p))
    D = -xi * math.sqrt(p) / (2 * lf2)
    pos, over = _inside_profiles(theta)
    outp = _outside_profile(theta, max(theta.g2_radius, 1.0))
    fF = fourier_singular(FourierJob(C, D, 0.0, "inside", pos, PHI_F, tol))[0] + \
        fourier_singular(FourierJob(C, D, 0.0, "outside", pos, PHI_F, tol))[0]
    fH1 = fourier_singular(FourierJob(C, D, 0.0, "inside", over, PHI_H1, tol))[0]
    fH0 = fourier_singular(FourierJob(C, D, 0.0, "outside", outp, PHI_H0, tol))[0]
    negp = Profile(theta.neg, theta.neg_radius, None, "theta^neg")
    nF = fourier_singular(FourierJob(C, D, 0.0, "line_smooth", negp, PHI_F, tol))[0]
    nH0 = fourier_singular(FourierJob(C, D, -1.0, "line_smooth", negp, PHI_H0, tol))[0]
    r = lf2 / math.sqrt(p)
    return {"F": abs(fF), "H1": r * abs(fH1), "H0": r * abs(fH0),
            "negF": abs(nF), "negH0": abs(nH0)}


def envelope_bound(region: str, kind: str, p, l, f, xi, N: int = 2) -> float:
    r = l * f * f / math.sqrt(p)
    xi = abs(xi)
    if region == "small":
        if kind in ("negF", "negH0"):
            return r**2 / xi**2
        base = r**1.5 / math.sqrt(xi)
        return base * (1 + abs(math.log(r * xi))) if kind == "H0" else base
    if region == "large":
        return (1 / (r * xi)) ** N / xi**2
    raise ValueError("region must be small or large")


@dataclass
class EnvelopeReport:
    p: int
    region: str
    N: int
    points: int
    max_ratio: dict
    fitted_K: dict


def envelope_check(p: int, theta: ThetaProfile, grid: Sequence, region: str,
                   N: int = 2, tol: float = 1e-10) -> EnvelopeReport:
    """max |value| / envelope over the (l, f, xi) grid for each envelope;
    the fitted constant is that maximum."""
    worst = {}
    for l, f, xi in grid:
        vals = envelope_values(p, l, f, xi, theta, tol)
        for kind, v in vals.items():
            ratio = v / envelope_bound(region, kind, p, l, f, xi, N)
            worst[kind] = max(worst.get(kind, 0.0), ratio)
    return EnvelopeReport(p, region, N, len(grid), worst, dict(worst))


# ---------------------------------------------------------------------------
# Scans
# ---------------------------------------------------------------------------

CSV_COLUMNS = ("p", "sigma_square", "sigma_xi", "term1", "term2", "term3", "term4",
               "term5", "audit_delta", "seconds")


def fit_slope(xs, ys) -> float:
    """Least-squares slope of log|y| against log x (zeros skipped)."""
    pts = [(math.log(x), math.log(abs(y))) for x, y in zip(xs, ys) if y != 0]
    if len(pts) < 2:
        return -math.inf
    X, Y = np.array(pts).T
    return float(np.polyfit(X, Y, 1)[0])


@dataclass
class ScanReport:
    primes: list
    reports: list
    slope: float
    square_slope: float
    square_nonzero: int
    bracket_ratio: float
    config: dict = field(default_factory=dict)

    def csv_rows(self, timing: bool = True) -> list:
        rows = []
        for r in self.reports:
            rows.append([r.p, repr(r.sigma_square), repr(r.sigma_xi)]
                        + [repr(t) for t in r.per_term_breakdown]
                        + [repr(r.audit_delta), f"{r.runtime:.3f}" if timing else "0"])
        return rows

    def to_csv(self, timing: bool = True) -> str:
        buf = io.StringIO()
        buf.write(SCHEMA + "\n")
        buf.write("# config " + json.dumps(self.config, sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        w.writerows(self.csv_rows(timing))
        buf.write(f"# slope_sigma_xi {self.slope!r}\n")
        buf.write(f"# slope_sigma_square {self.square_slope!r} nonzero={self.square_nonzero}\n")
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"primes": self.primes, "reports": [r.to_dict() for r in self.reports],
                "slope": self.slope, "square_slope": self.square_slope,
                "square_nonzero": self.square_nonzero, "bracket_ratio": self.bracket_ratio,
                "config": self.config}


def scan(primes: Sequence[int], theta: ThetaProfile,
         policy: TruncationPolicy = TruncationPolicy(), method: str = "oracle",
         fifth: str = "p", threads: Optional[int] = None, grid: GridConfig = GridConfig(),
         square_tol: float = 1e-12) -> ScanReport:
    primes = sorted(set(int(q) for q in primes))
    if len(primes) < 8:
        raise ValueError("scan needs at least 8 primes")
    if primes[-1] < 10 * primes[0] * 0.95:
        raise ValueError("scan primes must span about a decade")
    reports = [sigma_xi(q, theta, policy, method, fifth, threads, grid,
                        square_tol=square_tol) for q in primes]
    slope = fit_slope(primes, [r.sigma_xi for r in reports])
    sq = [r.sigma_square for r in reports]
    sq_slope = fit_slope(primes, sq)
    # theta-free content of the O(log^2 p) classification: the double sums
    brackets = [square_bracket(q - 1, square_tol) / math.log(q) ** 2 for q in primes]
    ratio = max(brackets) / min(brackets)
    # thread count deliberately left out: it must not change the output
    config = {"primes": primes, "theta": theta.name, "policy": asdict(policy),
              "method": method, "fifth": fifth, "grid": asdict(grid), "square_tol": square_tol}
    return ScanReport(primes, reports, slope, sq_slope, sum(1 for v in sq if v != 0), ratio,
                      config)
