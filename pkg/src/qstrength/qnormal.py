"""q-normal distributions, q-Hermite polynomials, and the conditional density.

The q-normal family interpolates between the semicircle law (q = 0) and the
standard Gaussian (q = 1) while keeping zero mean and unit variance.  The
bivariate extension carries a correlation parameter xi; dividing the bivariate
density by the two marginals leaves a coupling factor h(x, y | xi, q), and the
conditional density f_CqN(x | y; xi, q) = f_qN(x | q) * h(x, y | xi, q) is the
smooth benchmark curve used for strength functions.  All densities are given by
infinite products over powers of q, evaluated here in log space with the
truncation chosen per q so that the dropped tail is below machine precision.

Conventions: the univariate support is (-2/sqrt(1-q), +2/sqrt(1-q)), open at
the endpoints where the density vanishes like a square root; densities are 0
outside and exactly on the boundary.  The q-Hermite polynomials H_n(x|q)
follow the three-term recurrence H_{n+1} = x H_n - [n]_q H_{n-1} with
[n]_q = (1-q^n)/(1-q); at q = 1 they reduce to the probabilists' Hermite
polynomials and the densities to (bivariate) Gaussians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "Support",
    "ConditionalMoments",
    "q_hermite",
    "support",
    "f_qn",
    "h_factor",
    "f_biv_qn",
    "f_cqn",
    "cqn_conditional_moments",
    "cqn_moment_quadrature",
    "verify_cqn_reproducing",
    "QuadratureError",
]

# Truncation control for the infinite products: keep factors until q^k drops
# below _FACTOR_EPS (tail of the log-sum is then ~q^K/(1-q), negligible for
# every q this cap can reach).  Beyond the cap the product cannot converge in
# reasonable time and the density is indistinguishable from the Gaussian limit,
# so evaluation dispatches to the closed form.
_FACTOR_EPS = 1e-16
_MAX_FACTORS = 2_000_000
_CHUNK = 4096


class QuadratureError(RuntimeError):
    """Raised when a quadrature's estimated error exceeds the requested tolerance."""


def _check_q(q: float) -> float:
    q = float(q)
    if not 0.0 <= q <= 1.0 or math.isnan(q):
        raise ValueError(f"q must lie in [0, 1], got {q}")
    return q


def _check_xi(xi: float) -> float:
    xi = float(xi)
    if not abs(xi) < 1.0:
        raise ValueError(f"|xi| must be < 1, got {xi}")
    return xi


def _num_factors(q: float) -> int:
    if q <= 0.0:
        return 1
    n = int(math.ceil(math.log(_FACTOR_EPS) / math.log(q))) + 1
    return min(n, _MAX_FACTORS)


def _gaussian_regime(q: float) -> bool:
    """True when the product form is dropped in favour of the Gaussian limit."""
    if q >= 1.0:
        return True
    if q <= 0.0:
        return False
    return math.log(_FACTOR_EPS) / math.log(q) > _MAX_FACTORS


@lru_cache(maxsize=64)
def _q_powers(q: float) -> np.ndarray:
    """Powers q^0 .. q^K with q^K < _FACTOR_EPS (or the hard cap)."""
    return q ** np.arange(_num_factors(q) + 1)


@dataclass(frozen=True)
class Support:
    """Open interval on which a q-normal density is positive."""

    lo: float
    hi: float

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.hi)

    def contains(self, x) -> np.ndarray | bool:
        """Strict interior test; the density is 0 on the boundary itself."""
        return (np.asarray(x) > self.lo) & (np.asarray(x) < self.hi)


@dataclass(frozen=True)
class ConditionalMoments:
    """Closed-form moments of f_CqN(x | y; xi, q)."""

    mean: float
    variance: float
    gamma1: float
    gamma2: float


def support(q: float) -> Support:
    q = _check_q(q)
    if q == 1.0:
        return Support(-math.inf, math.inf)
    half = 2.0 / math.sqrt(1.0 - q)
    return Support(-half, half)


def q_hermite(n: int, x, q: float):
    """H_n(x | q) by the three-term recurrence; vectorized over x.

    H_0 = 1, H_1 = x, H_{n+1}(x|q) = x H_n(x|q) - [n]_q H_{n-1}(x|q) with the
    q-number [n]_q = (1-q^n)/(1-q) ([n]_1 = n).  q = 1 gives He_n(x).
    """
    if n < 0:
        raise ValueError("polynomial order must be >= 0")
    q = _check_q(q)
    x = np.asarray(x, dtype=float)
    h_prev = np.ones_like(x)
    if n == 0:
        return h_prev if h_prev.ndim else float(h_prev)
    h = x.copy()
    for j in range(1, n):
        qnum = j if q == 1.0 else (1.0 - q**j) / (1.0 - q)
        h, h_prev = x * h - qnum * h_prev, h
    return h if h.ndim else float(h)


def _log_f_qn_interior(x: np.ndarray, q: float) -> np.ndarray:
    """log f_qN at points strictly inside the support (product form, q < 1)."""
    p = _q_powers(q)
    c = 1.0 - q
    x2 = x * x
    # constant part: sqrt(1-q) * prod_{j>=1}(1-q^j) / (2*pi)
    const = 0.5 * math.log(c) + float(np.sum(np.log1p(-p[1:]))) - math.log(2.0 * math.pi)
    out = np.full(x.shape, const) - 0.5 * np.log(4.0 - c * x2)
    for s in range(0, len(p), _CHUNK):
        pc = p[s : s + _CHUNK]
        out += np.sum(np.log((1.0 + pc) ** 2 - c * np.multiply.outer(x2, pc)), axis=-1)
    return out


def f_qn(x, q: float):
    """Univariate q-normal density f_qN(x | q); zero on and outside the support."""
    q = _check_q(q)
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x1 = np.atleast_1d(x)
    if _gaussian_regime(q):
        out = np.exp(-0.5 * x1 * x1) / math.sqrt(2.0 * math.pi)
    else:
        out = np.zeros(x1.shape)
        inside = 4.0 - (1.0 - q) * x1 * x1 > 0.0
        if np.any(inside):
            out[inside] = np.exp(_log_f_qn_interior(x1[inside], q))
    return float(out[0]) if scalar else out.reshape(x.shape)


def _log_h_gauss(x: np.ndarray, y: float, xi: float) -> np.ndarray:
    v = 1.0 - xi * xi
    return -0.5 * math.log(v) - (xi * xi * (x * x + y * y) - 2.0 * xi * x * y) / (2.0 * v)


def h_factor(x, y: float, xi: float, q: float):
    """Bivariate coupling factor h(x, y | xi, q) = f_biv_qN / (f_qN(x) f_qN(y)).

    Symmetric in (x, y); equal to 1 when xi = 0.  Arguments are expected to lie
    within the support of f_qN(.|q); outside it the product factors can lose
    positivity, which raises ValueError.
    """
    q = _check_q(q)
    xi = _check_xi(xi)
    y = float(y)
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x1 = np.atleast_1d(x)
    if xi == 0.0:
        out = np.ones(x1.shape)
    elif _gaussian_regime(q):
        out = np.exp(_log_h_gauss(x1, y, xi))
    else:
        p = _q_powers(q)
        c = 1.0 - q
        log_h = np.zeros(x1.shape)
        for s in range(0, len(p), _CHUNK):
            pc = p[s : s + _CHUNK]
            p2 = pc * pc
            num = 1.0 - xi * xi * pc
            den = (
                (1.0 - xi * xi * p2) ** 2
                - c * xi * np.multiply.outer(x1 * y, pc * (1.0 + xi * xi * p2))
                + c * xi * xi * np.multiply.outer(x1 * x1 + y * y, p2)
            )
            if np.any(den <= 0.0):
                raise ValueError("h_factor undefined: arguments outside the q-normal support")
            log_h += np.sum(np.log(num) - np.log(den), axis=-1)
        out = np.exp(log_h)
    return float(out[0]) if scalar else out.reshape(x.shape)


def f_biv_qn(x, y: float, xi: float, q: float):
    """Bivariate q-normal density f_biv_qN(x, y | xi, q), vectorized over x."""
    return f_qn(x, q) * f_qn(y, q) * _masked_h(x, y, xi, q)


def f_cqn(x, y: float, xi: float, q: float):
    """Conditional q-normal density f_CqN(x | y; xi, q) = f_qN(x|q) h(x, y|xi, q).

    y must lie inside the support of f_qN(.|q).  Normalized to 1 in x; its
    closed-form moments are available via cqn_conditional_moments.
    """
    q = _check_q(q)
    if not _gaussian_regime(q) and not support(q).contains(y):
        raise ValueError(f"conditioning point y={y} outside the q-normal support")
    return f_qn(x, q) * _masked_h(x, y, xi, q)


def _masked_h(x, y: float, xi: float, q: float):
    """h(x, y) where x is inside the support, 0 elsewhere (f_qN is 0 there anyway)."""
    q = _check_q(q)
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x1 = np.atleast_1d(x)
    if _gaussian_regime(q):
        out = np.atleast_1d(h_factor(x1, y, xi, q))
    else:
        out = np.zeros(x1.shape)
        inside = np.asarray(support(q).contains(x1))
        if np.any(inside):
            out[inside] = h_factor(x1[inside], y, xi, q)
    return float(out[0]) if scalar else out.reshape(x.shape)


def cqn_conditional_moments(y: float, xi: float, q: float) -> ConditionalMoments:
    """Closed-form mean, variance, skewness and excess kurtosis of f_CqN(x|y).

    mean = xi*y, variance = 1 - xi^2,
    gamma1 = -xi (1-q) y / sqrt(1 - xi^2),
    gamma2 = (q-1) + [(1-q)^2 xi^2 y^2 + xi^2 (1-q^2)] / (1 - xi^2).
    """
    q = _check_q(q)
    xi = _check_xi(xi)
    y = float(y)
    v = 1.0 - xi * xi
    gamma1 = -xi * (1.0 - q) * y / math.sqrt(v)
    gamma2 = (q - 1.0) + ((1.0 - q) ** 2 * xi * xi * y * y + xi * xi * (1.0 - q * q)) / v
    return ConditionalMoments(mean=xi * y, variance=v, gamma1=gamma1, gamma2=gamma2)


def _quad_cqn(func, y: float, xi: float, q: float, tol: float) -> float:
    from scipy.integrate import quad

    sup = support(q)
    lo, hi = (-np.inf, np.inf) if sup.is_infinite else (sup.lo, sup.hi)
    val, err = quad(
        lambda x: func(x) * f_cqn(x, y, xi, q),
        lo,
        hi,
        epsabs=0.1 * tol,
        epsrel=0.1 * tol,
        limit=400,
    )
    if err > tol:
        raise QuadratureError(f"integral error estimate {err:.3e} exceeds tolerance {tol:.3e}")
    return val


def cqn_moment_quadrature(order: int, y: float, xi: float, q: float, tol: float = 1e-8) -> float:
    """Central moment E[(x - xi*y)^order] of f_CqN by adaptive quadrature.

    Order 0 returns the normalization integral.  Raises QuadratureError when
    the integrator's error estimate exceeds tol.  This is the slow, independent
    cross-check for the closed forms in cqn_conditional_moments.
    """
    if order < 0:
        raise ValueError("moment order must be >= 0")
    q = _check_q(q)
    xi = _check_xi(xi)
    mean = xi * float(y)
    return _quad_cqn(lambda x: (x - mean) ** order, y, xi, q, tol)


def verify_cqn_reproducing(n: int, y: float, xi: float, q: float, tol: float = 1e-8) -> float:
    """Residual |integral(H_n(x|q) f_CqN(x|y)) - xi^n H_n(y|q)|.

    The conditional density reproduces q-Hermite polynomials with eigenvalue
    xi^n; the returned residual is the quadrature-measured violation.
    """
    q = _check_q(q)
    xi = _check_xi(xi)
    lhs = _quad_cqn(lambda x: q_hermite(n, x, q), y, xi, q, tol)
    rhs = xi**n * q_hermite(n, float(y), q)
    return abs(lhs - rhs)
