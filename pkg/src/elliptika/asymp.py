"""Edge expansions of singular profiles, the A-transform

    A^{tau,+-}_{h,m}(Phi)(x) = (1/2 pi i) int_(tau) Phi~(u) c_m^{+-}(u/2)
                               Gamma(m + 1 + (a + u)/2) x^{-u/2} du,

and the expansion sides of the inside / outside Fourier asymptotics

    inside:  sum_{m, +-} e(+-D) A_m^{+-}(-+C^2 D) / (-+D)^{m + 1 + a/2}
    outside: sum_{m, +-} e(+-D) (-1)^m A_m^{+-}(+-C^2 D) / (+-D)^{m + 1 + a/2}

Complex powers of negative reals use arg = pi, i.e. (-r)^s = e^{i pi s} r^s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.special import gamma as _gamma

from .specfun import ContourTailError, MellinFunction

BRANCHES = ("pi", "minus_pi")


def cpow(base, s, branch: str = "pi"):
    """base**s for real base (scalar or array) and complex s, with arg(base < 0) = +-pi."""
    base = np.asarray(base, dtype=float)
    s = np.asarray(s, dtype=complex)
    ang = math.pi if branch == "pi" else -math.pi
    mag = np.abs(base)
    with np.errstate(divide="ignore"):
        logm = np.log(mag)
    phase = np.where(base < 0, ang, 0.0)
    return np.exp(s * (logm + 1j * phase))


def e(x):
    return np.exp(2j * math.pi * np.asarray(x, dtype=float))


def gen_binom(z, j: int):
    """binom(z, j) = z (z-1) ... (z-j+1) / j! for complex z (array-friendly)."""
    z = np.asarray(z, dtype=complex)
    out = np.ones(z.shape, dtype=complex)
    for i in range(j):
        out = out * (z - i) / (i + 1)
    return out


@dataclass(frozen=True)
class AsymptoticExpansion:
    """h(+-(1 - x)) ~ |x|^{a/2} sum_m c_m^{+-} x^m near the edges x = +-1."""
    a: float
    coeffs_plus: tuple
    coeffs_minus: tuple
    kappa: float = 0.25
    remainder_bound: float = float("nan")

    def __post_init__(self):
        if len(self.coeffs_plus) != len(self.coeffs_minus):
            raise ValueError("coefficient lists must have equal length")
        if not 0 < self.kappa < 0.5:
            raise ValueError("kappa must lie in (0, 1/2)")
        object.__setattr__(self, "coeffs_plus", tuple(float(c) for c in self.coeffs_plus))
        object.__setattr__(self, "coeffs_minus", tuple(float(c) for c in self.coeffs_minus))

    @property
    def order(self) -> int:
        return len(self.coeffs_plus) - 1

    def coeffs(self, sign) -> tuple:
        return self.coeffs_plus if _sgn(sign) > 0 else self.coeffs_minus

    def evaluate(self, x, sign, M=None):
        """|x|^{a/2} sum_{m <= M} c_m x^m."""
        x = np.asarray(x, dtype=float)
        c = self.coeffs(sign)[: (self.order if M is None else M) + 1]
        return np.abs(x) ** (self.a / 2) * np.polynomial.polynomial.polyval(x, c)

    def scaled(self, factor: float) -> "AsymptoticExpansion":
        return replace(self, coeffs_plus=tuple(factor * c for c in self.coeffs_plus),
                       coeffs_minus=tuple(factor * c for c in self.coeffs_minus),
                       remainder_bound=abs(factor) * self.remainder_bound)


def _sgn(sign) -> int:
    if sign in ("+", 1, 1.0):
        return 1
    if sign in ("-", -1, -1.0):
        return -1
    raise ValueError(f"sign must be + or -, got {sign!r}")


def expansion_shift(ex: AsymptoticExpansion, delta: float) -> AsymptoticExpansion:
    """Expansion of |2x - x^2|^delta h(+-(1 - x)): exponent a + 2 delta and
    d_m = 2^delta sum_{j+k=m} c_k / (-2)^j binom(delta, j)."""
    def shift(c):
        out = []
        for m in range(len(c)):
            s = sum(c[m - j] / (-2.0) ** j * gen_binom(delta, j).real for j in range(m + 1))
            out.append(2.0 ** delta * s)
        return tuple(out)
    return replace(ex, a=ex.a + 2 * delta, coeffs_plus=shift(ex.coeffs_plus),
                   coeffs_minus=shift(ex.coeffs_minus), remainder_bound=float("nan"))


def c_coeff(ex: AsymptoticExpansion, m: int, u, sign):
    """c_m^{+-}(u/2) = (i/2pi)^{1+m+(u+a)/2} 2^{u/2} sum_{j+k=m} c_k/(-2)^j binom(u/2, j)."""
    if not 0 <= m <= ex.order:
        raise ValueError("m outside the expansion length")
    u = np.asarray(u, dtype=complex)
    c = ex.coeffs(sign)
    s = sum(c[m - j] / (-2.0) ** j * gen_binom(u / 2, j) for j in range(m + 1))
    expo = 1 + m + (u + ex.a) / 2
    # (i/2pi)^expo with arg(i) = pi/2
    pref = np.exp(expo * (1j * math.pi / 2 - math.log(2 * math.pi)))
    out = pref * 2.0 ** (u / 2) * s
    return complex(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ExpansionRequest:
    M: int = 0
    tau: float = 1.0
    tau1: float = 0.0
    sign: str = "+"
    step: float = 0.05
    height: float = 60.0
    branch: str = "pi"
    table_step: float = 0.0  # > 0: spline A over log|x| with this spacing

    def __post_init__(self):
        if self.table_step < 0:
            raise ValueError("table_step must be non-negative")
        if self.M < 0:
            raise ValueError("M must be non-negative")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.tau1 < 0:
            raise ValueError("tau1 must be non-negative")
        _sgn(self.sign)
        if self.branch not in BRANCHES:
            raise ValueError(f"branch must be one of {BRANCHES}")

    def check_tau1(self, phi: MellinFunction):
        if self.tau1 == 0 and phi.pole_order_at_0 > 1:
            raise ValueError("tau1 = 0 needs a Mellin transform with at most a simple pole at 0")


class _Contour:
    """Trapezoid nodes on Re u = tau, |Im u| <= height, Phi~ cached at the nodes."""
    _cache: dict = {}

    @classmethod
    def get(cls, phi: MellinFunction, tau: float, step: float, height: float):
        key = (phi.name, float(tau).hex(), float(step).hex(), float(height).hex())
        rule = cls._cache.get(key)
        if rule is None:
            t = np.arange(-height, height + step / 2, step)
            u = tau + 1j * t
            vals = np.asarray(phi.mellin(u), dtype=complex)
            tail = step * (abs(vals[0]) + abs(vals[-1]))
            if tail > 1e-14:
                raise ContourTailError(f"A-transform contour tail {tail:.1e}")
            rule = (u, vals)
            cls._cache[key] = rule
        return rule


def a_transform(ex: AsymptoticExpansion, m: int, req: ExpansionRequest,
                phi: MellinFunction, x, sign=None):
    """A^{tau, sign}_{h, m}(Phi)(x) for real x != 0 (scalar or array)."""
    sign = req.sign if sign is None else sign
    if not 2 * m + 2 + ex.a > 0:
        raise ValueError("need 2m + 2 + a > 0")
    u, vals = _Contour.get(phi, req.tau, req.step, req.height)
    weight = vals * c_coeff(ex, m, u, sign) * _gamma(m + 1 + (ex.a + u) / 2)
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xa == 0):
        raise ValueError("x must be nonzero")
    # x^{-u/2} on the chosen branch; du = i dt, so (1/2 pi i) du = dt / 2 pi
    logx = np.log(np.abs(xa))[:, None] + 1j * np.where(xa < 0, math.pi if req.branch == "pi" else -math.pi, 0.0)[:, None]
    kern = np.exp(-0.5 * u[None, :] * logx)
    out = (kern * weight[None, :]).sum(axis=1) * req.step / (2 * math.pi)
    return complex(out[0]) if np.ndim(x) == 0 else out


_TABLE_LOGX = (-30.0, 12.0)
_tables: dict = {}


def _a_table(ex, m, req, phi, xsign, sign):
    key = (ex.a, ex.coeffs_plus, ex.coeffs_minus, m, replace(req, M=0, sign="+"), phi.name,
           xsign, sign)
    tab = _tables.get(key)
    if tab is None:
        from scipy.interpolate import CubicSpline
        lo, hi = _TABLE_LOGX
        t = np.arange(lo, hi + req.table_step / 2, req.table_step)
        vals = a_transform(ex, m, replace(req, table_step=0.0), phi, xsign * np.exp(t), sign)
        tab = (CubicSpline(t, vals.real), CubicSpline(t, vals.imag))
        _tables[key] = tab
    return tab


def a_transform_tabulated(ex: AsymptoticExpansion, m: int, req: ExpansionRequest,
                          phi: MellinFunction, x, sign=None):
    """a_transform through a cached cubic spline in log|x| (A is smooth there);
    points outside the table range fall back to the contour sum."""
    sign = req.sign if sign is None else sign
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xa == 0):
        raise ValueError("x must be nonzero")
    out = np.empty(xa.shape, dtype=complex)
    t = np.log(np.abs(xa))
    inside = (t >= _TABLE_LOGX[0]) & (t <= _TABLE_LOGX[1])
    for xs in (1.0, -1.0):
        sel = inside & (np.sign(xa) == xs)
        if sel.any():
            re, im = _a_table(ex, m, req, phi, xs, sign)
            out[sel] = re(t[sel]) + 1j * im(t[sel])
    if (~inside).any():
        out[~inside] = a_transform(ex, m, replace(req, table_step=0.0), phi, xa[~inside], sign)
    return complex(out[0]) if np.ndim(x) == 0 else out


def _expansion_sum(ex, req, phi, C, D, outside: bool):
    Ds = np.atleast_1d(np.asarray(D, dtype=float))
    if np.any(Ds == 0):
        raise ValueError("D must be nonzero")
    if req.M > ex.order:
        raise ValueError("M exceeds the expansion length")
    req.check_tau1(phi)
    total = np.zeros(Ds.shape, dtype=complex)
    for sg in (1, -1):
        for m in range(req.M + 1):
            s = m + 1 + ex.a / 2
            if outside:
                arg, base, extra = sg * C * C * Ds, sg * Ds, (-1) ** m
            else:
                arg, base, extra = -sg * C * C * Ds, -sg * Ds, 1
            A = (a_transform_tabulated if req.table_step > 0 else a_transform)(
                ex, m, req, phi, arg, sign=sg)
            total += extra * e(sg * Ds) * A / cpow(base, s, req.branch)
    return complex(total[0]) if np.ndim(D) == 0 else total


def expansion_inside(ex, req, phi, C, D):
    return _expansion_sum(ex, req, phi, C, D, outside=False)


def expansion_outside(ex, req, phi, C, D):
    return _expansion_sum(ex, req, phi, C, D, outside=True)


def leading_term(ex: AsymptoticExpansion, phi: MellinFunction, C, D):
    """Leading term of the whole-line integral int h Phi(C/sqrt|1-x^2|) e(xD) dx.

    Sum of the m = 0 inside and outside terms with A replaced by its value at 0,
    c_0^{+-,a} = c_0^{+-}(0) Gamma(1 + a/2) Res Phi~:
        sum_{+-} e(+-D) c_0^{+-,a} [(-+D)^{-s} + (+-D)^{-s}],  s = 1 + a/2,
    which vanishes identically when a = 0 mod 4.
    """
    if phi.pole_order_at_0 > 1:
        raise ValueError("leading_term needs Phi~ with at most a simple pole at 0")
    a = ex.a
    if float(a).is_integer() and int(a) % 4 == 0:
        return 0j
    s = 1 + a / 2
    total = 0j
    for sg in (1, -1):
        c0 = c_coeff(ex, 0, 0.0, sg) * math.gamma(s) * phi.residue_at_0
        total += e(sg * D) * c0 * (cpow(-sg * D, -s) + cpow(sg * D, -s))
    return complex(total)


# ---------------------------------------------------------------------------
# Building expansions
# ---------------------------------------------------------------------------

def taylor_cauchy(f: Callable, M: int, radius: float = 0.25, n: int = 128):
    """Taylor coefficients f^(m)(0)/m!, m <= M, of an analytic f via the Cauchy
    integral on |z| = radius (trapezoid rule, exponentially accurate)."""
    z = radius * np.exp(2j * math.pi * np.arange(n) / n)
    vals = f(z)
    coef = np.fft.fft(vals) / n
    return np.array([(coef[m] / radius**m).real for m in range(M + 1)])


def taylor_richardson(f: Callable, M: int, h0: float = 0.05, levels: int = 5):
    """One-sided Taylor coefficients at 0 of a function known on [0, kappa),
    from polynomial fits on shrinking grids combined by Richardson extrapolation."""
    ests = []
    for lvl in range(levels):
        h = h0 / 2**lvl
        x = h * np.arange(1, 2 * M + 6)
        V = np.vander(x, M + 4, increasing=True)
        c, *_ = np.linalg.lstsq(V, f(x), rcond=None)
        ests.append(c[: M + 1])
    ests = np.array(ests)
    # leading error of a degree-(M+3) fit scales like h^{M+4-m}; extrapolate once
    out = []
    for m in range(M + 1):
        p = M + 4 - m
        r = 2.0**p
        out.append((r * ests[-1, m] - ests[-2, m]) / (r - 1))
    return np.array(out)


def fit_remainder(ex: AsymptoticExpansion, edge_fn: Callable, n: int = 1000) -> AsymptoticExpansion:
    """Attach remainder_bound = max |h(+-(1-x)) - expansion| / x^{a/2+M+1} on
    [kappa/8, kappa]; closer to the edge the ratio is rounding noise."""
    x = np.linspace(ex.kappa / 8, ex.kappa, n)
    worst = 0.0
    for sg in (1, -1):
        diff = np.abs(edge_fn(x, sg) - ex.evaluate(x, sg))
        worst = max(worst, float(np.max(diff / x ** (ex.a / 2 + ex.order + 1))))
    return replace(ex, remainder_bound=worst)


def expansion_from_edge(edge_fn: Callable, a: float, M: int, kappa: float = 0.25,
                        analytic: bool = True) -> AsymptoticExpansion:
    """Expansion of h from ``edge_fn(x, sign) = h(sign (1 - x))``.

    The regular factor r(x) = edge_fn(x) / |x|^{a/2} is Taylor-expanded at 0 by a
    Cauchy integral when ``analytic`` (edge_fn must accept complex x, with
    |x|^{a/2} continued as x^{a/2}), else by Richardson-extrapolated fits.
    """
    coeffs = {}
    for sg in (1, -1):
        if analytic:
            def reg(z, sg=sg):
                return edge_fn(z, sg) / z ** (a / 2) if a else edge_fn(z, sg)
            coeffs[sg] = taylor_cauchy(reg, M)
        else:
            def reg(x, sg=sg):
                return edge_fn(x, sg) / np.abs(x) ** (a / 2)
            coeffs[sg] = taylor_richardson(reg, M)
    ex = AsymptoticExpansion(a, tuple(coeffs[1]), tuple(coeffs[-1]), kappa)
    return fit_remainder(ex, lambda x, s: np.real(edge_fn(x, s)))


def sqrt_expansion(M: int, scale: float = 1.0) -> AsymptoticExpansion:
    """h = scale * sqrt(1 - x^2): h(+-(1-x)) = scale sqrt2 |x|^{1/2} (1 - x/2)^{1/2}."""
    c = tuple(scale * math.sqrt(2) * gen_binom(0.5, m).real * (-0.5) ** m for m in range(M + 1))
    ex = AsymptoticExpansion(1.0, c, c)

    def edge(x, s):
        return scale * np.sqrt(np.abs(x) * (2 - x))
    return fit_remainder(ex, edge)


# ---------------------------------------------------------------------------
# Error-law experiment: |oracle - expansion| against D at fixed C^2 D
# ---------------------------------------------------------------------------

ERROR_LAW_CASES = ("inside_sqrt", "inside_one", "outside_sqrt_bump", "outside_bump")


def _bump_c(z, radius=2.0):
    return np.exp(-1.0 / (1.0 - (np.asarray(z) / radius) ** 2))


def error_law_case(kind: str, order: int = 3):
    """(region, Profile, AsymptoticExpansion) for the analytic test profiles:
    sqrt(1-x^2) (a=1) and 1 (a=0) inside; sqrt(x^2-1) bump(x) (a=1) and
    bump(x) (a=0) outside, bump = e^{-1/(1-(x/2)^2)}."""
    from .oscint import Profile, bump_profile, outside_sqrt_profile, sqrt_profile
    if kind == "inside_sqrt":
        return "inside", sqrt_profile(), sqrt_expansion(order)
    if kind == "inside_one":
        one = Profile(lambda x: np.where(np.abs(x) <= 1, 1.0, 0.0), 1.0,
                      lambda u, s, o: np.zeros(u.shape) if o else np.ones(u.shape), "one")
        c = (1.0,) + (0.0,) * order
        return "inside", one, AsymptoticExpansion(0.0, c, c, remainder_bound=0.0)
    if kind == "outside_sqrt_bump":
        def edge(z, s):
            z = np.asarray(z)
            root = np.sqrt(z * (2 - z) + 0j) if np.iscomplexobj(z) else np.sqrt(np.abs(z) * (2 - z))
            return root * _bump_c(s * (1 - z))
        return "outside", outside_sqrt_profile(), expansion_from_edge(edge, 1.0, order)
    if kind == "outside_bump":
        return "outside", bump_profile(), expansion_from_edge(lambda z, s: _bump_c(s * (1 - z)), 0.0, order)
    raise ValueError(f"kind must be one of {ERROR_LAW_CASES}")


@dataclass
class ErrorLawResult:
    kind: str
    a: float
    M: int
    c2d: float
    Ds: list
    errors: list
    slope: float
    target: float


def error_law(kind: str, M: int, c2d: float, Ds: Sequence[float] = (8, 16, 32, 64, 128),
              phi: MellinFunction | None = None, tol: float = 1e-12,
              req: ExpansionRequest | None = None) -> ErrorLawResult:
    """Fit the log-log slope of |oracle - expansion| in D at fixed C^2 D; the
    predicted slope is -(M + 2 + a/2)."""
    from .oscint import FourierJob, fourier_singular
    from .specfun import PHI_F
    phi = phi or PHI_F
    region, prof, ex = error_law_case(kind)
    req = req or ExpansionRequest(M=M, tau=1.0)
    req = replace(req, M=M)
    side = expansion_inside if region == "inside" else expansion_outside
    errs = []
    for D in Ds:
        C = math.sqrt(c2d / D)
        oracle, _ = fourier_singular(FourierJob(C, D, ex.a, region, prof, phi, tol))
        errs.append(abs(oracle - side(ex, req, phi, C, D)))
    slope = float(np.polyfit(np.log(Ds), np.log(errs), 1)[0])
    return ErrorLawResult(kind, ex.a, M, c2d, [float(d) for d in Ds], errs, slope,
                          -(M + 2 + ex.a / 2))
