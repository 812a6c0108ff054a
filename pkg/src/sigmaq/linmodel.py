"""Regression problem container, ordinary least squares, and the classical
prediction/confidence bands used as the comparison baseline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError, SingularDesignError
from .numkernel import f_quantile, student_t_quantile

__all__ = ["Dataset", "OlsFit", "sse", "ols_fit", "ls_prediction_bounds"]

_RANK_RTOL = 1e-10


@dataclass(frozen=True)
class Dataset:
    """A regression problem instance: n x k design matrix plus n responses.

    Intercepts are not implicit; supply a ones-column when the model has one.
    """

    design: np.ndarray
    response: np.ndarray

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.design, dtype=float))
        y = np.atleast_1d(np.asarray(self.response, dtype=float))
        object.__setattr__(self, "design", x)
        object.__setattr__(self, "response", y)
        if x.ndim != 2:
            raise DimensionError("design must be a 2-d matrix")
        if y.ndim != 1:
            raise DimensionError("response must be a 1-d vector")
        if x.shape[0] != y.shape[0]:
            raise DimensionError(
                f"design has {x.shape[0]} rows but response has {y.shape[0]} entries"
            )
        if x.shape[0] < 1 or x.shape[1] < 1:
            raise DimensionError("dataset needs at least one row and one regressor")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise DomainError("dataset entries must all be finite")

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def k(self) -> int:
        return self.design.shape[1]

    def concat(self, other: "Dataset") -> "Dataset":
        """Row-concatenate two problems over the same regressors."""
        if other.k != self.k:
            raise DimensionError(
                f"cannot concatenate designs with {self.k} and {other.k} columns"
            )
        return Dataset(
            np.vstack([self.design, other.design]),
            np.concatenate([self.response, other.response]),
        )


@dataclass(frozen=True)
class OlsFit:
    """Least-squares estimate with residuals and the materialized Gram inverse."""

    theta_hat: np.ndarray
    residuals: np.ndarray
    sse: float
    gram_inverse: np.ndarray


def sse(data: Dataset, theta) -> float:
    """Sum of squared errors of ``theta`` on ``data``."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.shape != (data.k,):
        raise DimensionError(
            f"theta has shape {theta.shape}, expected ({data.k},)"
        )
    r = data.response - data.design @ theta
    return float(r @ r)


def ols_fit(data: Dataset) -> OlsFit:
    """Least-squares fit by QR factorization.

    The Gram inverse is materialized from the R factor only for the interval
    formulas; the solve itself never forms ``x^T x``.
    """
    x, y = data.design, data.response
    n, k = data.n, data.k
    if n < k:
        raise DomainError(f"need at least as many rows as regressors, got n={n} < k={k}")
    sing = np.linalg.svd(x, compute_uv=False)
    if sing[-1] < _RANK_RTOL * sing[0]:
        raise SingularDesignError(
            f"design is rank deficient (singular value ratio {sing[-1] / sing[0]:.3e})"
        )
    q, r = np.linalg.qr(x)
    theta = np.linalg.solve(r, q.T @ y)
    resid = y - x @ theta
    r_inv = np.linalg.solve(r, np.eye(k))
    gram_inv = r_inv @ r_inv.T
    gram_inv = 0.5 * (gram_inv + gram_inv.T)
    return OlsFit(theta_hat=theta, residuals=resid, sse=float(resid @ resid),
                  gram_inverse=gram_inv)


def _prediction_sd(fit: OlsFit, n: int, k: int, x_new: np.ndarray) -> np.ndarray:
    s2 = fit.sse / (n - k)
    leverage = np.einsum("ij,jk,ik->i", x_new, fit.gram_inverse, x_new)
    return np.sqrt(s2 * (1.0 + leverage))


def ls_prediction_bounds(
    fit: OlsFit,
    data: Dataset,
    x_new,
    gamma: float = 0.05,
    simultaneous: bool = False,
):
    """Classical prediction bounds of level ``1 - gamma`` at new inputs.

    Pointwise bounds use the two-sided t multiplier on the noise-inclusive
    standard error; with ``simultaneous=True`` the multiplier becomes
    ``sqrt(2 * F_{1-gamma}(k, n-k))``, widening the band so that it covers
    the whole regression surface at once.

    Returns ``(center, lower, upper)`` arrays, one entry per row of ``x_new``.
    """
    x_new = np.atleast_2d(np.asarray(x_new, dtype=float))
    n, k = data.n, data.k
    if n <= k:
        raise DomainError(f"prediction bounds need residual dof, got n={n} <= k={k}")
    if not 0.0 < gamma < 1.0:
        raise DomainError(f"gamma must lie in (0, 1), got {gamma!r}")
    if x_new.shape[1] != k:
        raise DimensionError(
            f"x_new has {x_new.shape[1]} columns, design has {k}"
        )
    center = x_new @ fit.theta_hat
    sd = _prediction_sd(fit, n, k, x_new)
    if simultaneous:
        mult = np.sqrt(2.0 * f_quantile(1.0 - gamma, k, n - k))
    else:
        mult = abs(student_t_quantile(n - k, gamma / 2.0))
    return center, center - mult * sd, center + mult * sd
