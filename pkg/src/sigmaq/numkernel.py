"""Probability kernels used throughout the package.

Inverse gamma, Student t, multivariate t and F distributions, each with
log-space densities and cdf-inverting quantiles.  The regularized
incomplete gamma/beta functions are taken from :mod:`scipy.special`
(Cephes); everything layered on top of them lives here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

from .errors import DomainError, NumericError

__all__ = [
    "InverseGammaDist",
    "StudentTDist",
    "MultivariateTDist",
    "log_gamma",
    "student_t_quantile",
    "f_quantile",
]

_QUANTILE_TOL = 1e-13
_MAX_INVERT_ITER = 200


def log_gamma(x: float) -> float:
    """Natural log of the gamma function for ``x > 0``."""
    if not np.isfinite(x) or x <= 0.0:
        raise DomainError(f"log_gamma requires a positive finite argument, got {x!r}")
    return float(special.gammaln(x))


def _invert_cdf(
    cdf: Callable[[float], float],
    pdf: Callable[[float], float],
    p: float,
    lo: float,
    hi: float,
) -> float:
    """Solve ``cdf(x) = p`` on a bracket by bisection with Newton refinement.

    The bracket is expanded geometrically until it straddles ``p``; bisection
    guarantees progress, and a Newton step from the pdf is taken whenever it
    stays inside the current bracket.
    """
    if not 0.0 < p < 1.0:
        raise DomainError(f"quantile requires p in (0, 1), got {p!r}")
    for _ in range(_MAX_INVERT_ITER):
        if cdf(lo) <= p:
            break
        lo = lo - 2.0 * (hi - lo) if lo <= 0.0 else lo / 8.0
    for _ in range(_MAX_INVERT_ITER):
        if cdf(hi) >= p:
            break
        hi = hi + 2.0 * (hi - lo) if hi <= 0.0 else hi * 8.0
    a, b = lo, hi
    x = 0.5 * (a + b)
    for _ in range(_MAX_INVERT_ITER):
        f = cdf(x) - p
        if f > 0.0:
            b = x
        else:
            a = x
        if abs(f) <= _QUANTILE_TOL or (b - a) <= 1e-15 * max(1.0, abs(a), abs(b)):
            return x
        d = pdf(x)
        step_ok = False
        if d > 0.0 and np.isfinite(d):
            x_new = x - f / d
            if a < x_new < b:
                x = x_new
                step_ok = True
        if not step_ok:
            x = 0.5 * (a + b)
    raise NumericError(
        f"cdf inversion did not converge for p={p!r} on bracket [{a!r}, {b!r}]"
    )


@dataclass(frozen=True)
class InverseGammaDist:
    """Inverse gamma distribution with shape ``alpha`` and scale ``beta``.

    The density is ``beta^alpha / Gamma(alpha) * x^-(alpha+1) * exp(-beta/x)``
    for ``x > 0``.  It is the scale-parameter posterior of the Gaussian linear
    model, so ``alpha`` carries half-counts of observations and ``beta`` half
    a sum of squares.
    """

    alpha: float
    beta: float

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and self.alpha > 0.0):
            raise DomainError(f"inverse gamma shape must be positive, got {self.alpha!r}")
        if not (np.isfinite(self.beta) and self.beta > 0.0):
            raise DomainError(f"inverse gamma scale must be positive, got {self.beta!r}")

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0.0):
            raise DomainError("inverse gamma density is defined for x > 0 only")
        out = (
            self.alpha * math.log(self.beta)
            - special.gammaln(self.alpha)
            - (self.alpha + 1.0) * np.log(x)
            - self.beta / x
        )
        return out if out.ndim else float(out)

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0.0):
            raise DomainError("inverse gamma cdf is defined for x > 0 only")
        # P(X <= x) = Q(alpha, beta/x), the regularized upper incomplete gamma.
        out = special.gammaincc(self.alpha, self.beta / x)
        return out if out.ndim else float(out)

    def quantile(self, p: float) -> float:
        mode = self.beta / (self.alpha + 1.0)
        return _invert_cdf(self.cdf, self.pdf, float(p), mode / 8.0, mode * 8.0)

    def mean(self) -> float:
        if self.alpha <= 1.0:
            raise DomainError("inverse gamma mean requires alpha > 1")
        return self.beta / (self.alpha - 1.0)

    def mode(self) -> float:
        return self.beta / (self.alpha + 1.0)


def _std_t_logpdf(z, dof):
    return (
        special.gammaln((dof + 1.0) / 2.0)
        - special.gammaln(dof / 2.0)
        - 0.5 * np.log(dof * np.pi)
        - (dof + 1.0) / 2.0 * np.log1p(z * z / dof)
    )


def _std_t_cdf(z, dof):
    # For z <= 0: F(z) = I_{dof/(dof+z^2)}(dof/2, 1/2) / 2; mirrored above zero.
    z = np.asarray(z, dtype=float)
    tail = 0.5 * special.betainc(dof / 2.0, 0.5, dof / (dof + z * z))
    out = np.where(z <= 0.0, tail, 1.0 - tail)
    return out if out.ndim else float(out)


def _std_t_quantile(dof: float, p: float) -> float:
    if not 0.0 < p < 1.0:
        raise DomainError(f"quantile requires p in (0, 1), got {p!r}")
    if p == 0.5:
        return 0.0
    if p < 0.5:
        return -_std_t_quantile(dof, 1.0 - p)
    cdf = lambda x: _std_t_cdf(x, dof)
    pdf = lambda x: float(np.exp(_std_t_logpdf(x, dof)))
    return _invert_cdf(cdf, pdf, p, 0.0, 2.0)


@dataclass(frozen=True)
class StudentTDist:
    """Student t distribution with location/scale parameters."""

    dof: float
    location: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.dof) and self.dof > 0.0):
            raise DomainError(f"degrees of freedom must be positive, got {self.dof!r}")
        if not (np.isfinite(self.scale) and self.scale > 0.0):
            raise DomainError(f"scale must be positive, got {self.scale!r}")

    def logpdf(self, x):
        z = (np.asarray(x, dtype=float) - self.location) / self.scale
        out = _std_t_logpdf(z, self.dof) - math.log(self.scale)
        return out if out.ndim else float(out)

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def cdf(self, x):
        z = (np.asarray(x, dtype=float) - self.location) / self.scale
        return _std_t_cdf(z, self.dof)

    def quantile(self, p: float) -> float:
        return self.location + self.scale * _std_t_quantile(self.dof, float(p))


def student_t_quantile(dof: float, p: float) -> float:
    """Quantile of the standard Student t distribution.

    Antisymmetric by construction: ``quantile(p) == -quantile(1 - p)``.
    """
    if not (np.isfinite(dof) and dof > 0.0):
        raise DomainError(f"degrees of freedom must be positive, got {dof!r}")
    return _std_t_quantile(float(dof), float(p))


@dataclass(frozen=True)
class MultivariateTDist:
    """Multivariate t distribution with dof, location vector and scale matrix.

    ``scale_matrix`` is the shape matrix of the density, not the covariance
    (the covariance is ``dof/(dof-2)`` times it when the dof exceed two).
    """

    dof: float
    location: np.ndarray
    scale_matrix: np.ndarray

    def __post_init__(self):
        loc = np.atleast_1d(np.asarray(self.location, dtype=float))
        mat = np.atleast_2d(np.asarray(self.scale_matrix, dtype=float))
        object.__setattr__(self, "location", loc)
        object.__setattr__(self, "scale_matrix", mat)
        if not (np.isfinite(self.dof) and self.dof > 0.0):
            raise DomainError(f"degrees of freedom must be positive, got {self.dof!r}")
        k = loc.shape[0]
        if mat.shape != (k, k):
            raise DomainError(
                f"scale matrix shape {mat.shape} does not match dimension {k}"
            )
        try:
            chol = np.linalg.cholesky(mat)
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError(
                "scale matrix must be symmetric positive-definite"
            ) from exc
        object.__setattr__(self, "_chol", chol)

    @property
    def dim(self) -> int:
        return self.location.shape[0]

    def logpdf(self, x) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != self.location.shape:
            raise DomainError(
                f"point of shape {x.shape} does not match dimension {self.dim}"
            )
        k, nu = self.dim, self.dof
        w = np.linalg.solve(self._chol, x - self.location)
        maha = float(w @ w)
        log_det = 2.0 * float(np.sum(np.log(np.diag(self._chol))))
        return float(
            special.gammaln((nu + k) / 2.0)
            - special.gammaln(nu / 2.0)
            - 0.5 * k * math.log(nu * math.pi)
            - 0.5 * log_det
            - (nu + k) / 2.0 * math.log1p(maha / nu)
        )

    def marginal(self, i: int) -> StudentTDist:
        """Scalar t marginal of component ``i`` (same dof, sliced scale)."""
        return StudentTDist(
            dof=self.dof,
            location=float(self.location[i]),
            scale=math.sqrt(float(self.scale_matrix[i, i])),
        )


def _f_cdf(x, d1, d2):
    x = np.asarray(x, dtype=float)
    out = special.betainc(d1 / 2.0, d2 / 2.0, d1 * x / (d1 * x + d2))
    return out if out.ndim else float(out)


def _f_logpdf(x, d1, d2):
    return (
        special.gammaln((d1 + d2) / 2.0)
        - special.gammaln(d1 / 2.0)
        - special.gammaln(d2 / 2.0)
        + (d1 / 2.0) * np.log(d1 / d2)
        + (d1 / 2.0 - 1.0) * np.log(x)
        - (d1 + d2) / 2.0 * np.log1p(d1 * x / d2)
    )


def f_quantile(p: float, d1: float, d2: float) -> float:
    """Quantile of the F distribution with ``(d1, d2)`` degrees of freedom."""
    if not (np.isfinite(d1) and d1 > 0.0 and np.isfinite(d2) and d2 > 0.0):
        raise DomainError(f"F degrees of freedom must be positive, got ({d1!r}, {d2!r})")
    if not 0.0 < p < 1.0:
        raise DomainError(f"quantile requires p in (0, 1), got {p!r}")
    cdf = lambda x: _f_cdf(x, d1, d2)
    pdf = lambda x: float(np.exp(_f_logpdf(x, d1, d2))) if x > 0 else 0.0
    return _invert_cdf(cdf, pdf, float(p), 1e-3, 8.0)
