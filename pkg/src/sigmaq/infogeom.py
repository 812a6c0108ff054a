"""Numeric Fisher information, KL divergence, and the scale-prior exponents
they induce.

Everything is computed from a family's log density alone: parameter
derivatives by central differences, expectations over the data space by
adaptive quadrature.  Exponents of scale priors are read off as log-log
slopes along a ray of scale values, which keeps the machinery generic in
the parameterization (sigma versus sigma squared, with or without a free
location).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad

from .errors import DomainError, NumericError

__all__ = [
    "ParamFamily",
    "InfoMatrix",
    "gaussian_family",
    "fisher_info_numeric",
    "jeffreys_exponent",
    "ali_exponent",
    "kl_divergence",
    "kl_hessian_check",
]

_EPS = float(np.finfo(float).eps)
_H1 = _EPS ** (1.0 / 3.0)   # first derivatives
_H2 = _EPS ** 0.25          # second derivatives
_RAY_SIGMAS = (0.5, 1.0, 2.0, 4.0)
_SHAPE_TOL = 1e-6


@dataclass(frozen=True)
class ParamFamily:
    """A parametric density plus the plumbing the numeric operators need.

    ``log_density(x, params)`` is a scalar log density; ``quadrature_range``
    must cover all but ~1e-10 of the mass at the given parameters;
    ``params_from_scale`` places the family on the scale ray used for
    exponent extraction (locations at zero, scale set from sigma).
    """

    log_density: Callable[[float, np.ndarray], float]
    param_names: tuple
    quadrature_range: Callable[[np.ndarray], tuple]
    params_from_scale: Callable[[float], np.ndarray]
    scale_param: str

    @property
    def dim(self) -> int:
        return len(self.param_names)

    def index(self, name: str) -> int:
        try:
            return self.param_names.index(name)
        except ValueError:
            raise DomainError(
                f"unknown parameter {name!r}; family has {self.param_names}"
            ) from None


@dataclass(frozen=True)
class InfoMatrix:
    """A symmetric information matrix with its evaluation point."""

    matrix: np.ndarray
    params: np.ndarray


def gaussian_family(scale: str = "sigma2", free_location: bool = True) -> ParamFamily:
    """Gaussian family in one of its scale parameterizations.

    ``scale`` picks the parameterization ("sigma" or "sigma2"); without a
    free location the mean is pinned at zero.
    """
    if scale not in ("sigma", "sigma2"):
        raise DomainError(f"scale must be 'sigma' or 'sigma2', got {scale!r}")

    def sigma_of(params):
        s = params[-1]
        return math.sqrt(s) if scale == "sigma2" else s

    if free_location:
        names = ("mu", scale)

        def log_density(x, params):
            mu = params[0]
            sig = sigma_of(params)
            return -0.5 * math.log(2.0 * math.pi * sig * sig) \
                - (x - mu) ** 2 / (2.0 * sig * sig)

        def quadrature_range(params):
            sig = sigma_of(params)
            return (params[0] - 12.0 * sig, params[0] + 12.0 * sig)

        def params_from_scale(s):
            return np.array([0.0, s * s if scale == "sigma2" else s], dtype=float)

    else:
        names = (scale,)

        def log_density(x, params):
            sig = sigma_of(params)
            return -0.5 * math.log(2.0 * math.pi * sig * sig) \
                - x * x / (2.0 * sig * sig)

        def quadrature_range(params):
            sig = sigma_of(params)
            return (-12.0 * sig, 12.0 * sig)

        def params_from_scale(s):
            return np.array([s * s if scale == "sigma2" else s], dtype=float)

    return ParamFamily(
        log_density=log_density,
        param_names=names,
        quadrature_range=quadrature_range,
        params_from_scale=params_from_scale,
        scale_param=scale,
    )


def _step(params: np.ndarray, base: float) -> np.ndarray:
    return base * np.maximum(np.abs(params), 1.0)


def _d1(fam: ParamFamily, x: float, params: np.ndarray, i: int) -> float:
    h = _step(params, _H1)
    e = np.zeros_like(params)
    e[i] = h[i]
    return (fam.log_density(x, params + e) - fam.log_density(x, params - e)) / (2.0 * h[i])


def _d2(fam: ParamFamily, x: float, params: np.ndarray, i: int, j: int) -> float:
    h = _step(params, _H2)
    if i == j:
        e = np.zeros_like(params)
        e[i] = h[i]
        return (fam.log_density(x, params + e) - 2.0 * fam.log_density(x, params)
                + fam.log_density(x, params - e)) / h[i] ** 2
    ei = np.zeros_like(params)
    ej = np.zeros_like(params)
    ei[i] = h[i]
    ej[j] = h[j]
    return (fam.log_density(x, params + ei + ej) - fam.log_density(x, params + ei - ej)
            - fam.log_density(x, params - ei + ej)
            + fam.log_density(x, params - ei - ej)) / (4.0 * h[i] * h[j])


def _expect(fam: ParamFamily, params: np.ndarray, fn: Callable[[float], float]) -> float:
    lo, hi = fam.quadrature_range(params)
    val, err = quad(
        lambda x: math.exp(fam.log_density(x, params)) * fn(x),
        lo, hi, epsabs=1e-13, epsrel=1e-11, limit=300,
    )
    if not np.isfinite(val):
        raise NumericError("expectation quadrature returned a non-finite value")
    return val


def fisher_info_numeric(fam: ParamFamily, params) -> InfoMatrix:
    """Fisher information as the negative expected log-density Hessian.

    The score outer-product form is evaluated alongside as an internal
    consistency check; disagreement beyond 1e-4 relative raises.
    """
    params = np.asarray(params, dtype=float)
    p = fam.dim
    hess = np.zeros((p, p))
    outer = np.zeros((p, p))
    for i in range(p):
        for j in range(i, p):
            hess[i, j] = hess[j, i] = -_expect(
                fam, params, lambda x: _d2(fam, x, params, i, j)
            )
            outer[i, j] = outer[j, i] = _expect(
                fam, params, lambda x: _d1(fam, x, params, i) * _d1(fam, x, params, j)
            )
    scale = max(np.max(np.abs(hess)), np.max(np.abs(outer)), 1e-30)
    rel = np.max(np.abs(hess - outer)) / scale
    if rel > 1e-4:
        raise NumericError(
            f"score-outer-product and expected-Hessian forms disagree "
            f"({rel:.2e} relative)"
        )
    return InfoMatrix(matrix=0.5 * (hess + outer), params=params)


def _fit_ray_slope(log_values: Sequence[float]) -> tuple[float, float]:
    """Exponent q from ``log v = c - q log sigma`` on the standard ray."""
    logs = np.log(np.asarray(_RAY_SIGMAS))
    v = np.asarray(log_values, dtype=float)
    q = -(v[-1] - v[0]) / (logs[-1] - logs[0])
    c = v[0] + q * logs[0]
    residual = float(np.max(np.abs(v - (c - q * logs))))
    return float(q), residual


def jeffreys_exponent(fam: ParamFamily, free_params: Sequence[str] | None = None) -> float:
    """Exponent q of the scale prior ``sqrt(det I) ~ sigma^-q``.

    ``free_params`` selects the submatrix of the information matrix (all
    parameters by default).  The exponent comes from the exact two-point
    slope on the scale ray; a residual above 1e-6 from the four-point fit
    means the determinant is not a pure power and raises.
    """
    names = tuple(free_params) if free_params is not None else fam.param_names
    idx = [fam.index(nm) for nm in names]
    vals = []
    for s in _RAY_SIGMAS:
        params = fam.params_from_scale(s)
        info = fisher_info_numeric(fam, params).matrix
        sub = info[np.ix_(idx, idx)]
        sign, logdet = np.linalg.slogdet(sub)
        if sign <= 0:
            raise NumericError(f"information submatrix not positive definite at sigma={s}")
        vals.append(0.5 * logdet)
    q, residual = _fit_ray_slope(vals)
    if residual > _SHAPE_TOL:
        raise NumericError(
            f"sqrt(det I) is not a pure power of sigma (residual {residual:.2e})"
        )
    return q


def _ali_log_gradient(fam: ParamFamily, params: np.ndarray, target: int) -> float:
    """Component ``target`` of the invariant-prior log gradient.

    For each free parameter j the coupling term is
    ``E[dlnp/dp_j * d2lnp/dp_j dp_t] / E[d2lnp/dp_j^2]`` and the gradient is
    minus their sum; with a single free parameter this is the classical
    ``-E[f1 f2] / E[f2]`` rule.
    """
    total = 0.0
    for j in range(fam.dim):
        num = _expect(
            fam, params, lambda x: _d1(fam, x, params, j) * _d2(fam, x, params, j, target)
        )
        den = _expect(fam, params, lambda x: _d2(fam, x, params, j, j))
        if den == 0.0:
            raise NumericError("degenerate curvature expectation in exponent extraction")
        total += num / den
    return -total


def ali_exponent(fam: ParamFamily, free_param: str | None = None) -> float:
    """Exponent q of the asymptotically locally invariant prior ``~ sigma^-q``.

    ``free_param`` names the scale parameter whose log-gradient is
    integrated (the family's scale parameter by default).  Location
    components of the gradient must vanish along the ray; the scale
    component must behave as ``-q / sigma``, and q is returned after the
    same four-point shape check as the Jeffreys extraction.
    """
    target = fam.index(free_param if free_param is not None else fam.scale_param)
    q_at = []
    for s in _RAY_SIGMAS:
        params = fam.params_from_scale(s)
        for j in range(fam.dim):
            if j == target:
                continue
            g = _ali_log_gradient(fam, params, j)
            if abs(g) > _SHAPE_TOL:
                raise NumericError(
                    f"invariant-prior gradient is not flat in "
                    f"{fam.param_names[j]!r} at sigma={s} (got {g:.2e})"
                )
        g_t = _ali_log_gradient(fam, params, target)
        # chain rule back to sigma along the ray
        hs = _H1 * max(s, 1.0)
        dparam_dsigma = (fam.params_from_scale(s + hs)[target]
                         - fam.params_from_scale(s - hs)[target]) / (2.0 * hs)
        q_at.append(-s * g_t * dparam_dsigma)
    spread = float(np.max(q_at) - np.min(q_at))
    if spread > _SHAPE_TOL:
        raise NumericError(
            f"invariant-prior gradient is not a pure power of sigma "
            f"(exponent spread {spread:.2e})"
        )
    return float(np.mean(q_at))


def kl_divergence(fam: ParamFamily, params_true, params_other) -> float:
    """``KL(p_true || p_other)`` by adaptive quadrature."""
    params_true = np.asarray(params_true, dtype=float)
    params_other = np.asarray(params_other, dtype=float)
    lo1, hi1 = fam.quadrature_range(params_true)
    lo2, hi2 = fam.quadrature_range(params_other)
    lo, hi = min(lo1, lo2), max(hi1, hi2)
    val, err = quad(
        lambda x: math.exp(fam.log_density(x, params_true))
        * (fam.log_density(x, params_true) - fam.log_density(x, params_other)),
        lo, hi, epsabs=1e-14, epsrel=1e-11, limit=300,
    )
    if not np.isfinite(val):
        raise NumericError("KL quadrature diverged")
    return float(val)


def kl_hessian_check(fam: ParamFamily, params) -> tuple[InfoMatrix, InfoMatrix, float]:
    """Hessian of the KL divergence in its second argument versus Fisher.

    Returns the finite-difference KL Hessian at ``params``, the Fisher
    matrix at the same point, and their maximum absolute difference.
    """
    params = np.asarray(params, dtype=float)
    p = fam.dim
    h = _step(params, _H2)
    hess = np.zeros((p, p))
    kl0 = kl_divergence(fam, params, params)
    for i in range(p):
        ei = np.zeros(p)
        ei[i] = h[i]
        for j in range(i, p):
            if i == j:
                val = (kl_divergence(fam, params, params + ei) - 2.0 * kl0
                       + kl_divergence(fam, params, params - ei)) / h[i] ** 2
            else:
                ej = np.zeros(p)
                ej[j] = h[j]
                val = (kl_divergence(fam, params, params + ei + ej)
                       - kl_divergence(fam, params, params + ei - ej)
                       - kl_divergence(fam, params, params - ei + ej)
                       + kl_divergence(fam, params, params - ei - ej)) \
                    / (4.0 * h[i] * h[j])
            hess[i, j] = hess[j, i] = val
    fisher = fisher_info_numeric(fam, params)
    diff = float(np.max(np.abs(hess - fisher.matrix)))
    return InfoMatrix(matrix=hess, params=params), fisher, diff
