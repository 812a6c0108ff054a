"""Normal-inverse-gamma conjugate machinery for 1/sigma^q priors.

A prior proportional to ``1/sigma^q`` over the coefficients and the noise
variance of a Gaussian linear model is the limit of a normal-inverse-gamma
(NIG) prior in which the coefficient precision and the inverse-gamma scale
both vanish while the shape is pinned at ``(q - k - 2) / 2``.  Running the
standard conjugate update on that limiting state gives closed-form
posteriors: the variance marginal is inverse gamma, the coefficient marginal
and the predictive are multivariate t.  This module implements both the
proper and the limiting update, the marginals, the predictive, and the
truncated prior density used by the evidence integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegeneratePosteriorError,
    DegenerateScaleError,
    DimensionError,
    DomainError,
    ImproperPosteriorError,
    NumericError,
)
from .linmodel import Dataset, ols_fit
from .numkernel import InverseGammaDist, MultivariateTDist

__all__ = [
    "SigmaPowerPrior",
    "NigParams",
    "PosteriorNig",
    "limiting_nig_from_q",
    "posterior_update",
    "marginal_sigma2",
    "marginal_theta",
    "predictive",
    "prior_log_density",
    "posterior_log_kernel",
]


@dataclass(frozen=True)
class SigmaPowerPrior:
    """A ``1/sigma^q`` prior truncated to the scale interval (sigma_minus, sigma_plus).

    The exponent is real valued so evidence curves can be swept densely in q.
    The truncation only matters for the prior density and evidence integrals;
    the closed-form posterior formulas use the untruncated limit.
    """

    q: float
    sigma_minus: float
    sigma_plus: float

    def __post_init__(self):
        if not (np.isfinite(self.q) and self.q >= 0.0):
            raise DomainError(f"prior exponent must be nonnegative, got {self.q!r}")
        if not (0.0 < self.sigma_minus < self.sigma_plus < math.inf):
            raise DomainError(
                "scale support must satisfy 0 < sigma_minus < sigma_plus < inf, got "
                f"({self.sigma_minus!r}, {self.sigma_plus!r})"
            )

    def log_normalizer(self) -> float:
        """log of ``Z = integral of sigma^-q over (sigma_minus, sigma_plus)``.

        ``Z = ln(sigma_plus) - ln(sigma_minus)`` at q = 1 and
        ``(sigma_plus^(1-q) - sigma_minus^(1-q)) / (1-q)`` otherwise; the
        expm1 form below is continuous through q = 1.
        """
        log_lo, log_hi = math.log(self.sigma_minus), math.log(self.sigma_plus)
        a = 1.0 - self.q
        if a == 0.0:
            return math.log(log_hi - log_lo)
        # Z = exp(a*log_lo) * expm1(a*(log_hi - log_lo)) / a, positive for any q
        return a * log_lo + math.log(math.expm1(a * (log_hi - log_lo)) / a)


@dataclass(frozen=True)
class NigParams:
    """Normal-inverse-gamma parameters, possibly in the limiting state.

    In the limiting state ``beta`` and the coefficient precision are exactly
    zero: ``sigma_matrix`` is ``None``, ``beta == 0`` and only ``alpha``
    (equal to ``(q - k - 2) / 2``) carries information.
    """

    mu: np.ndarray
    sigma_matrix: np.ndarray | None
    alpha: float
    beta: float
    limiting: bool = False

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        object.__setattr__(self, "mu", mu)
        if not np.all(np.isfinite(mu)):
            raise DomainError("prior mean must be finite")
        if self.limiting:
            if self.sigma_matrix is not None or self.beta != 0.0:
                raise DomainError(
                    "limiting NIG state treats beta and the coefficient "
                    "precision as exactly zero"
                )
        else:
            if self.alpha <= 0.0 or self.beta <= 0.0:
                raise DomainError(
                    f"proper NIG needs alpha > 0 and beta > 0, got "
                    f"({self.alpha!r}, {self.beta!r})"
                )
            mat = np.atleast_2d(np.asarray(self.sigma_matrix, dtype=float))
            object.__setattr__(self, "sigma_matrix", mat)
            k = mu.shape[0]
            if mat.shape != (k, k):
                raise DimensionError(
                    f"sigma_matrix shape {mat.shape} does not match dimension {k}"
                )
            np.linalg.cholesky(mat)  # SPD check

    @property
    def k(self) -> int:
        return self.mu.shape[0]


@dataclass(frozen=True)
class PosteriorNig:
    """Updated NIG parameters plus the sum of squared errors that fed them."""

    mu_star: np.ndarray
    sigma_star: np.ndarray
    alpha_star: float
    beta_star: float
    sse: float
    n: int
    k: int


def limiting_nig_from_q(q: float, k: int) -> NigParams:
    """Limiting NIG state whose density collapses to ``1/sigma^q``.

    The NIG kernel is ``(1/sigma^2)^(alpha + k/2 + 1)`` once ``beta`` and the
    coefficient precision vanish, so matching powers of sigma fixes
    ``alpha = (q - k - 2) / 2``.  The mean is annihilated by the vanishing
    precision; it is fixed at zero.
    """
    if not (np.isfinite(q) and q >= 0.0):
        raise DomainError(f"prior exponent must be nonnegative, got {q!r}")
    if k < 1:
        raise DomainError(f"parameter count must be at least 1, got {k!r}")
    return NigParams(
        mu=np.zeros(int(k)),
        sigma_matrix=None,
        alpha=(q - k - 2.0) / 2.0,
        beta=0.0,
        limiting=True,
    )


def posterior_update(prior: NigParams, data: Dataset) -> PosteriorNig:
    """Conjugate update of a (possibly limiting) NIG prior with a dataset.

    Proper prior:
        ``Sigma* = (Sigma^-1 + x^T x)^-1``,
        ``mu*    = Sigma* (Sigma^-1 mu + x^T y)``,
        ``alpha* = alpha + n/2``,
        ``beta*  = beta + (mu^T Sigma^-1 mu + y^T y - mu*^T Sigma*^-1 mu*) / 2``.

    Limiting prior: the same formulas with the vanishing terms dropped, which
    reduces them to ``Sigma* = (x^T x)^-1``, ``mu* = `` the least-squares
    estimate, and ``beta* = SSE/2``.
    """
    if prior.k != data.k:
        raise DimensionError(
            f"prior dimension {prior.k} does not match design columns {data.k}"
        )
    n, k = data.n, data.k
    alpha_star = prior.alpha + n / 2.0

    if prior.limiting:
        if alpha_star <= 0.0:
            q = 2.0 * prior.alpha + k + 2.0
            n_min = math.floor(k + 2.0 - q) + 1
            raise ImproperPosteriorError(
                f"posterior shape alpha* = {alpha_star} is not positive; "
                f"this prior needs at least n = {n_min} observations"
            )
        fit = ols_fit(data)
        if fit.sse <= 0.0 or fit.sse <= 1e-14 * float(data.response @ data.response):
            raise DegeneratePosteriorError(
                "data are fit exactly (SSE = 0); the scale posterior is degenerate"
            )
        return PosteriorNig(
            mu_star=fit.theta_hat,
            sigma_star=fit.gram_inverse,
            alpha_star=alpha_star,
            beta_star=fit.sse / 2.0,
            sse=fit.sse,
            n=n,
            k=k,
        )

    x, y = data.design, data.response
    prec = np.linalg.inv(prior.sigma_matrix)
    prec_star = prec + x.T @ x
    sigma_star = np.linalg.inv(prec_star)
    sigma_star = 0.5 * (sigma_star + sigma_star.T)
    mu_star = np.linalg.solve(prec_star, prec @ prior.mu + x.T @ y)
    beta_star = prior.beta + 0.5 * float(
        prior.mu @ prec @ prior.mu + y @ y - mu_star @ prec_star @ mu_star
    )
    if beta_star <= 0.0:
        raise NumericError(
            f"posterior scale beta* = {beta_star} is not positive; "
            "the update lost precision"
        )
    resid = y - x @ mu_star
    return PosteriorNig(
        mu_star=mu_star,
        sigma_star=sigma_star,
        alpha_star=alpha_star,
        beta_star=beta_star,
        sse=float(resid @ resid),
        n=n,
        k=k,
    )


def _require_proper(post: PosteriorNig):
    if post.alpha_star <= 0.0 or post.beta_star <= 0.0:
        raise DomainError(
            f"posterior is improper (alpha* = {post.alpha_star}, "
            f"beta* = {post.beta_star})"
        )


def marginal_sigma2(post: PosteriorNig) -> InverseGammaDist:
    """Posterior marginal of the noise variance: IG(alpha*, beta*)."""
    _require_proper(post)
    return InverseGammaDist(alpha=post.alpha_star, beta=post.beta_star)


def marginal_theta(post: PosteriorNig) -> MultivariateTDist:
    """Posterior marginal of the coefficients.

    Integrating the variance out of the joint posterior leaves a multivariate
    t with ``2 alpha*`` degrees of freedom, location ``mu*`` and shape matrix
    ``(beta*/alpha*) Sigma*``.
    """
    _require_proper(post)
    return MultivariateTDist(
        dof=2.0 * post.alpha_star,
        location=post.mu_star,
        scale_matrix=(post.beta_star / post.alpha_star) * post.sigma_star,
    )


def predictive(post: PosteriorNig, x_new, include_noise: bool = True) -> MultivariateTDist:
    """Predictive distribution of responses at the rows of ``x_new``.

    With ``include_noise`` the shape matrix is
    ``(beta*/alpha*) (I + x_new Sigma* x_new^T)`` -- the distribution of future
    observations.  Without it the identity term is dropped, giving the
    posterior of the mean response ``x_new theta``.
    """
    _require_proper(post)
    x_new = np.atleast_2d(np.asarray(x_new, dtype=float))
    if x_new.shape[1] != post.k:
        raise DimensionError(
            f"x_new has {x_new.shape[1]} columns, posterior dimension is {post.k}"
        )
    core = x_new @ post.sigma_star @ x_new.T
    if include_noise:
        core = core + np.eye(x_new.shape[0])
    else:
        eig = np.linalg.eigvalsh(0.5 * (core + core.T))
        if eig[0] <= 1e-12 * max(eig[-1], 1.0):
            raise DegenerateScaleError(
                "mean-response scale is rank deficient at these inputs"
            )
    scale = (post.beta_star / post.alpha_star) * 0.5 * (core + core.T)
    return MultivariateTDist(
        dof=2.0 * post.alpha_star,
        location=x_new @ post.mu_star,
        scale_matrix=scale,
    )


def prior_log_density(prior: SigmaPowerPrior, theta, sigma2: float) -> float:
    """Log density of the truncated prior at ``(theta, sigma2)``.

    Flat over the coefficients; ``-q ln(sigma) - ln Z`` inside the scale
    support and ``-inf`` outside it.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if not np.isfinite(sigma2) or sigma2 <= 0.0:
        raise DomainError(f"sigma2 must be positive, got {sigma2!r}")
    sigma = math.sqrt(sigma2)
    if not in_support(prior, sigma):
        return -math.inf
    return -prior.q * math.log(sigma) - prior.log_normalizer()


def in_support(prior: SigmaPowerPrior, sigma: float) -> bool:
    return prior.sigma_minus < sigma < prior.sigma_plus


def posterior_log_kernel(post: PosteriorNig, theta, sigma2: float) -> float:
    """Unnormalized log posterior density of ``(theta, sigma2)``.

    This is the NIG kernel
    ``-(alpha* + k/2 + 1) ln(sigma2) - [beta* + (theta-mu*)^T Sigma*^-1 (theta-mu*)/2] / sigma2``
    and is the target handed to the Metropolis sampler.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.shape != (post.k,):
        raise DimensionError(f"theta has shape {theta.shape}, expected ({post.k},)")
    if sigma2 <= 0.0:
        return -math.inf
    d = theta - post.mu_star
    quad = float(d @ np.linalg.solve(post.sigma_star, d))
    return (
        -(post.alpha_star + post.k / 2.0 + 1.0) * math.log(sigma2)
        - (post.beta_star + 0.5 * quad) / sigma2
    )
