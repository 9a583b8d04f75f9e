"""Smoothing functions F, H0, H1 with their Mellin transforms, the modified
Bessel function K_nu of complex order, and compactly supported cut-offs.

Conventions:
    F(x)  = (1 / 2K_0(2)) int_x^inf e^{-y - 1/y} dy / y
    F~(u) = K_u(2) / (u K_0(2))
    H0~(u) = sqrt(pi) pi^{-u} Gamma(u/2) F~(u) / Gamma((1-u)/2)
    H1~(u) = sqrt(pi) pi^{-u} Gamma((1+u)/2) F~(u) / Gamma((2-u)/2)
    H(y)  = (1 / 2 pi i) int_(c) H~(u) y^{-u} du
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.special import gamma, rgamma

EULER_GAMMA = 0.5772156649015329


class ContourTailError(RuntimeError):
    """A truncated contour integral has a tail estimate above tolerance."""


# ---------------------------------------------------------------------------
# Bessel K of complex order
# ---------------------------------------------------------------------------

def _bessel_k(nu: complex, x: float, tol: float = 1e-13) -> complex:
    # K_nu(x) = 1/2 int_R exp(-x cosh s - nu s) ds along s = t + i theta, with
    # theta at the height of the saddle sinh s = -nu/x, kept inside |theta| < pi/2
    if nu.real < 0:
        nu = -nu
    sig, y = nu.real, nu.imag
    ay = abs(y)
    delta = 2.0 / ay if ay > 4 / math.pi else math.pi / 2
    cap = math.pi / 2 - delta
    theta = max(-cap, min(cap, (-cmath.asinh(nu / x)).imag))
    c = x * math.cos(theta)

    def logmag(t):
        return -c * math.cosh(t) - sig * t

    tstar = -math.asinh(sig / c)
    top = logmag(tstar)
    lo = hi = tstar
    while logmag(lo) > top - 46:
        lo -= 0.5
    while logmag(hi) > top - 46:
        hi += 0.5
    h = min(0.25, delta / 4)
    prev = None
    while h > 1e-6:
        n = int(math.ceil((hi - lo) / h))
        z = lo + h * np.arange(n + 1) + 1j * theta
        terms = np.exp(-x * np.cosh(z) - nu * z)
        val = 0.5 * h * terms.sum()
        floor = 1e-15 * 0.5 * h * np.abs(terms).sum() * math.sqrt(n)
        if prev is not None and abs(val - prev) <= max(tol * abs(val), floor):
            return complex(val)
        prev = val
        h /= 2
    raise ContourTailError(f"K_nu quadrature did not settle for nu={nu}, x={x}")


@lru_cache(maxsize=1 << 16)
def _bessel_k_cached(nu: complex, x: float) -> complex:
    return _bessel_k(nu, x)


def bessel_k(nu: complex, x: float) -> complex:
    """K_nu(x) for complex order nu and x > 0 (relative accuracy ~1e-12)."""
    x = float(x)
    if not x > 0:
        raise ValueError("bessel_k needs x > 0")
    nu = complex(nu)
    # evenness in nu: canonicalize so that memo keys coincide
    if nu.real < 0 or (nu.real == 0 and nu.imag < 0):
        nu = -nu
    return _bessel_k_cached(nu, x)


K0_2 = bessel_k(0, 2.0).real


# ---------------------------------------------------------------------------
# F and its Mellin transform
# ---------------------------------------------------------------------------

_GL_X, _GL_W = np.polynomial.legendre.leggauss(12)
_S_LO, _S_HI, _S_STEP = -6.75, 6.75, 0.01


def _f_density(s):
    # dF/ds for s = log x, up to the sign
    return np.exp(-2.0 * np.cosh(s)) / (2.0 * K0_2)


def _gl_segment(a, b):
    """int_a^b of the F-density, elementwise over arrays a, b (|b - a| small)."""
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    s = mid[..., None] + half[..., None] * _GL_X
    return half * (_f_density(s) * _GL_W).sum(axis=-1)


@lru_cache(maxsize=1)
def _f_nodes():
    s = np.arange(_S_LO, _S_HI + _S_STEP / 2, _S_STEP)
    pieces = _gl_segment(s[:-1], s[1:])
    tail = np.concatenate([np.cumsum(pieces[::-1])[::-1], [0.0]])
    return s, tail


def big_f(x):
    """F(x) for x >= 0; scalar in, float out, array in, array out."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0):
        raise ValueError("F is defined for x >= 0")
    s_nodes, tail = _f_nodes()
    out = np.empty(xa.shape)
    with np.errstate(divide="ignore"):
        s = np.log(xa)
    low = s <= _S_LO
    high = s >= _S_HI
    mid = ~(low | high)
    out[low] = 1.0
    out[high] = 0.0
    if mid.any():
        sm = s[mid]
        k = np.minimum(np.searchsorted(s_nodes, sm, side="right"), s_nodes.size - 1)
        out[mid] = tail[k] + _gl_segment(sm, s_nodes[k])
    return float(out) if out.ndim == 0 else out


def big_f_prime(x):
    """F'(x) = -e^{-x-1/x} / (2 K_0(2) x)."""
    xa = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        val = np.where(xa > 0, -np.exp(-xa - 1.0 / xa) / (2 * K0_2 * xa), 0.0)
    return float(val) if val.ndim == 0 else val


def _f_mellin(u: complex) -> complex:
    if u == 0:
        raise ZeroDivisionError("F~ has a simple pole at u = 0")
    return bessel_k(u, 2.0) / (u * K0_2)


def big_f_mellin(u: complex) -> complex:
    """F~(u) = K_u(2) / (u K_0(2)), Re u > -1, u != 0."""
    u = complex(u)
    if u.real <= -1:
        raise ValueError("big_f_mellin needs Re u > -1")
    return _f_mellin(u)


def _f_mellin_array(u: np.ndarray) -> np.ndarray:
    flat = np.asarray(u, dtype=complex).ravel()
    return np.array([_f_mellin(complex(v)) for v in flat]).reshape(np.shape(u))


# ---------------------------------------------------------------------------
# H0, H1
# ---------------------------------------------------------------------------

def h0_mellin(u):
    u = np.asarray(u, dtype=complex)
    g = gamma(u / 2) * rgamma((1 - u) / 2) * np.exp(-u * math.log(math.pi))
    return math.sqrt(math.pi) * g * _f_mellin_array(u)


def h1_mellin(u):
    u = np.asarray(u, dtype=complex)
    g = gamma((1 + u) / 2) * rgamma((2 - u) / 2) * np.exp(-u * math.log(math.pi))
    return math.sqrt(math.pi) * g * _f_mellin_array(u)


# Laurent data at u = 0: H0~ = 2/u^2 + H0_A1/u + ..., H1~ = pi/u + ...
H0_A1 = -2.0 * (EULER_GAMMA + math.log(2 * math.pi))


def _h0_residue(logy):
    return H0_A1 - 2.0 * logy, -2.0 * np.ones_like(logy)


def _h1_residue(logy):
    return math.pi * np.ones_like(logy), np.zeros_like(logy)


@dataclass(frozen=True)
class ContourConfig:
    step: float = 0.05
    height: float = 60.0
    right_abscissa: float = 1.0
    left_abscissa: float = -0.5
    tail_tol: float = 1e-14


@dataclass
class _ContourRule:
    """Trapezoid nodes on the upper half of Re u = c with H~ cached at the nodes."""
    c: float
    t: np.ndarray
    w: np.ndarray
    vals: np.ndarray
    tail: float

    def integrate(self, logy: np.ndarray, deriv: bool = False):
        # (1/2pi) int_R H~(c+it) y^{-c-it} dt = (1/pi) Re int_0^inf (...)
        u = self.c + 1j * self.t
        phase = np.exp(-np.outer(logy, u))
        val = (phase * (self.w * self.vals)).sum(axis=1).real / math.pi
        if not deriv:
            return val
        dval = (phase * (self.w * self.vals * -u)).sum(axis=1).real / math.pi
        return val, dval


def _contour_rule(mellin, c: float, cfg: ContourConfig) -> _ContourRule:
    t = np.arange(0.0, cfg.height + cfg.step / 2, cfg.step)
    w = np.full(t.size, cfg.step)
    w[0] = cfg.step / 2
    vals = mellin(c + 1j * t)
    tail = float(abs(vals[-1]) * cfg.step)
    if tail > cfg.tail_tol:
        raise ContourTailError(f"contour tail {tail:.2e} above {cfg.tail_tol:.0e}")
    return _ContourRule(c, t, w, vals, tail)


# beyond Y_ZERO, |H0|, |H1| < 1e-25 (super-polynomial decay) and the value 0 is returned
Y_ZERO = 400.0
_LOGY_LO, _LOGY_HI, _LOGY_STEP = math.log(1e-8), math.log(Y_ZERO), 0.005


class _HTable:
    """Hermite interpolant of H in s = log y, built from exact contour values."""

    def __init__(self, mellin, residue, cfg: ContourConfig = ContourConfig()):
        self.cfg = cfg
        self.residue = residue
        self.right = _contour_rule(mellin, cfg.right_abscissa, cfg)
        self.left = _contour_rule(mellin, cfg.left_abscissa, cfg)
        s = np.arange(_LOGY_LO, _LOGY_HI + _LOGY_STEP / 2, _LOGY_STEP)
        v, dv = self.direct(s, deriv=True)
        self.spline = CubicHermiteSpline(s, v, dv)

    def direct(self, logy: np.ndarray, deriv: bool = False):
        """Contour evaluation: Re u = 1 for y >= 1, Re u = -1/2 plus residue below."""
        logy = np.asarray(logy, dtype=float)
        v = np.empty(logy.shape)
        dv = np.empty(logy.shape)
        big = logy >= 0
        for mask, rule in ((big, self.right), (~big, self.left)):
            if not mask.any():
                continue
            val, dval = rule.integrate(logy[mask], deriv=True)
            if rule is self.left:
                r, dr = self.residue(logy[mask])
                val, dval = val + r, dval + dr
            v[mask], dv[mask] = val, dval
        return (v, dv) if deriv else v

    def __call__(self, y):
        ya = np.asarray(y, dtype=float)
        if np.any(ya <= 0):
            raise ValueError("H0/H1 need y > 0")
        s = np.log(ya)
        inside = (s >= _LOGY_LO) & (s <= _LOGY_HI)
        small = s < _LOGY_LO
        out = np.zeros(s.shape)
        out[inside] = self.spline(s[inside])
        if small.any():
            out[small] = self.direct(s[small])
        return float(out) if out.ndim == 0 else out


@lru_cache(maxsize=None)
def _h0_table() -> _HTable:
    return _HTable(h0_mellin, _h0_residue)


@lru_cache(maxsize=None)
def _h1_table() -> _HTable:
    return _HTable(h1_mellin, _h1_residue)


def h0(y):
    return _h0_table()(y)


def h1(y):
    return _h1_table()(y)


def h_contour(which: str, y, abscissa: float = 1.0, cfg: ContourConfig = ContourConfig()):
    """Direct vertical-contour value of H0 or H1 at Re u = abscissa (> 0), no table."""
    mellin = {"H0": h0_mellin, "H1": h1_mellin}[which]
    rule = _contour_rule(mellin, abscissa, cfg)
    logy = np.log(np.atleast_1d(np.asarray(y, dtype=float)))
    out = rule.integrate(logy)
    return float(out[0]) if np.ndim(y) == 0 else out


# ---------------------------------------------------------------------------
# Mellin-function bundle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MellinFunction:
    name: str
    evaluate: Callable
    mellin: Callable
    pole_order_at_0: int
    residue_at_0: complex
    holomorphy_abscissa: float

    def __call__(self, x):
        return self.evaluate(x)


def _vec(fn):
    def wrapped(u):
        arr = np.asarray(u, dtype=complex)
        out = fn(arr)
        return complex(out) if arr.ndim == 0 else out
    return wrapped


PHI_F = MellinFunction("F", big_f, _vec(_f_mellin_array), 1, 1.0, -math.inf)
PHI_H0 = MellinFunction("H0", h0, _vec(h0_mellin), 2, H0_A1, -2.0)
PHI_H1 = MellinFunction("H1", h1, _vec(h1_mellin), 1, math.pi, -1.0)

MELLIN_FUNCTIONS = {"F": PHI_F, "H0": PHI_H0, "H1": PHI_H1}


def mellin_quadrature(fn: Callable, u: float, upper: float = 80.0) -> float:
    """int_0^inf fn(x) x^{u-1} dx for real u > 0 by quadrature in log x."""
    from scipy.integrate import quad

    def integrand(s):
        return float(fn(math.exp(s))) * math.exp(u * s)

    lo = -40.0 / u
    val, _ = quad(integrand, lo, math.log(upper), limit=400, epsabs=0, epsrel=1e-11)
    return val


# ---------------------------------------------------------------------------
# Cut-off functions
# ---------------------------------------------------------------------------

def _bump_weight(y):
    y = np.asarray(y, dtype=float)
    out = np.zeros(y.shape)
    m = (y > 0) & (y < 1)
    out[m] = np.exp(-1.0 / (1.0 - y[m]) - 1.0 / y[m])
    return out


_CUT_X, _CUT_W = np.polynomial.legendre.leggauss(64)


def _cumulative_bump(upper):
    """int_0^upper of the bump weight, elementwise, upper in [0, 1]."""
    upper = np.clip(np.asarray(upper, dtype=float), 0.0, 1.0)
    # 8 panels of 64-point Gauss-Legendre on [0, upper]
    edges = np.linspace(0.0, 1.0, 9)
    total = np.zeros(upper.shape)
    for a, b in zip(edges[:-1], edges[1:]):
        lo = np.minimum(a * upper, upper)
        hi = b * upper
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        pts = mid[..., None] + half[..., None] * _CUT_X
        total += half * (_bump_weight(pts) * _CUT_W).sum(axis=-1)
    return total


IOTA = 1.0 / float(_cumulative_bump(1.0))


@dataclass(frozen=True)
class CutoffSpec:
    kappa: float = 0.25
    iota: float = field(default=IOTA)

    def __post_init__(self):
        if not 0 < self.kappa < 0.5:
            raise ValueError("kappa must lie in (0, 1/2)")


@dataclass(frozen=True)
class PhiFamily:
    phi0: Callable
    phi: Callable
    phi_kappa: Callable
    phi_mellin: Callable


def phi_family(spec: CutoffSpec) -> PhiFamily:
    iota = spec.iota

    def phi0(x):
        x = np.asarray(x, dtype=float)
        out = np.where(x >= 1, 0.0, iota * _cumulative_bump(1.0 - np.clip(x, 0, 1)))
        return float(out) if out.ndim == 0 else out

    def phi(x):
        x = np.asarray(x, dtype=float)
        out = np.where(x <= 1, 1.0, phi0(np.maximum(x - 1, 0.0)))
        return float(out) if out.ndim == 0 else out

    def phi_kappa(x):
        x = np.asarray(x, dtype=float)
        return phi(np.abs(1 - np.abs(x)) / spec.kappa)

    xs = 1.5 + 0.5 * np.concatenate([(_CUT_X - 1) / 2, (_CUT_X + 1) / 2])
    ws = 0.25 * np.concatenate([_CUT_W, _CUT_W])
    # phi'(x) = -iota w(2 - x) on (1, 2); phi~(s) = -(1/s) int phi'(x) x^s dx
    dphi = -iota * _bump_weight(2.0 - xs)
    logx = np.log(xs)

    def phi_mellin(s):
        s = complex(s)
        if s == 0:
            raise ZeroDivisionError("phi~ has a simple pole at s = 0")
        return complex(-(dphi * ws * np.exp(s * logx)).sum() / s)

    return PhiFamily(phi0, phi, phi_kappa, phi_mellin)
