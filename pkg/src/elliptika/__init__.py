"""Numerics for the Poisson-summed elliptic term of the GL(2) trace formula.

Submodules
----------
ntheory   integer kernel (Kronecker symbol, square roots mod q^k, Gauss/Kloosterman sums)
charsum   generalized Kloosterman sums Kl_{l,f}(xi, n)
specfun   smoothing functions F, H0, H1, Bessel K of complex order, cut-offs
oscint    quadrature oracle for singular oscillatory Fourier integrals
asymp     asymptotic-expansion algebra and the A-transform
elliptic  theta profiles, Sigma(square), Sigma(xi != 0), scans
cli       command-line front end
"""

__version__ = "0.1.0"
