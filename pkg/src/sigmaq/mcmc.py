"""Random-walk Metropolis over ``(theta, sigma2)`` with a log-variance walk.

Used to validate the closed-form posteriors and to push posterior draws
through the predictive for reliability quantiles.  Proposals are
component-wise Gaussian steps in ``(theta, ln sigma2)``; the Jacobian of the
log transform is added to the target so the retained ``sigma2`` samples
follow the requested density exactly.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import polygamma

from .conjugate import PosteriorNig, marginal_sigma2, marginal_theta
from .errors import DimensionError, DomainError, InitializationError
from .numkernel import InverseGammaDist

__all__ = [
    "PRNG_NAME",
    "Chain",
    "metropolis",
    "default_proposal_scales",
    "pilot_proposal_scales",
    "effective_sample_size",
    "validate_against_analytic",
    "ks_distance",
]

# Seedable, platform-independent 64-bit generator; recorded in every report.
PRNG_NAME = "numpy-pcg64"


@dataclass(frozen=True)
class Chain:
    """Retained posterior draws plus the diagnostics of the run."""

    samples: np.ndarray          # (draws - burn_in, d), sigma2 in natural units
    acceptance_rate: float
    seed: int
    burn_in: int
    stuck: bool = False
    prng: str = PRNG_NAME

    def __len__(self) -> int:
        return self.samples.shape[0]

    def to_csv(self, path) -> None:
        """One row per retained draw, columns theta_1..theta_k, sigma2."""
        d = self.samples.shape[1]
        header = [f"theta_{j + 1}" for j in range(d - 1)] + ["sigma2"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in self.samples:
                writer.writerow([format(v, ".17g") for v in row])


def metropolis(
    log_target: Callable[[np.ndarray], float],
    init: Sequence[float],
    proposal_scales: Sequence[float],
    draws: int,
    burn_in: int = 0,
    seed: int = 0,
    log_scale_last: bool = True,
) -> Chain:
    """Random-walk Metropolis with componentwise Gaussian proposals.

    ``log_target`` takes the state in natural coordinates.  With
    ``log_scale_last`` the final coordinate is walked in log space (with the
    Jacobian folded into the acceptance ratio) so a positive scale never has
    to be rejected at the boundary; ``proposal_scales`` are then step sizes
    in ``(theta, ln sigma2)`` units.  ``draws`` counts total iterations, of
    which the first ``burn_in`` are discarded.  Identical seeds give
    identical chains.
    """
    init = np.atleast_1d(np.asarray(init, dtype=float))
    scales = np.atleast_1d(np.asarray(proposal_scales, dtype=float))
    d = init.shape[0]
    if scales.shape != (d,):
        raise DimensionError(
            f"proposal_scales has shape {scales.shape}, expected ({d},)"
        )
    if np.any(scales <= 0.0) or not np.all(np.isfinite(scales)):
        raise DomainError("proposal scales must be positive and finite")
    if not (draws > burn_in >= 0):
        raise DomainError(f"need draws > burn_in >= 0, got ({draws}, {burn_in})")

    def to_walk(state):
        w = state.copy()
        if log_scale_last:
            w[-1] = math.log(w[-1])
        return w

    def to_natural(w):
        s = w.copy()
        if log_scale_last:
            s[-1] = math.exp(s[-1])
        return s

    def walk_target(w):
        v = log_target(to_natural(w))
        if log_scale_last:
            v += w[-1]  # Jacobian of sigma2 = exp(w)
        return v

    if log_scale_last and init[-1] <= 0.0:
        raise InitializationError(
            f"initial scale must be positive, got {init[-1]!r}"
        )
    cur = to_walk(init)
    cur_lp = walk_target(cur)
    if not np.isfinite(cur_lp):
        raise InitializationError(
            "log target is not finite at the initial state"
        )

    rng = np.random.default_rng(np.random.PCG64(seed))
    steps = rng.standard_normal((draws, d)) * scales
    log_unif = np.log(rng.random(draws))

    out = np.empty((draws, d))
    accepted = 0
    stuck_window = 10 * d
    stuck = False
    for i in range(draws):
        prop = cur + steps[i]
        lp = walk_target(prop)
        if lp - cur_lp > log_unif[i]:
            cur = prop
            cur_lp = lp
            accepted += 1
        out[i] = cur
        if i + 1 == stuck_window and accepted == 0:
            stuck = True
            warnings.warn(
                f"no acceptance in the first {stuck_window} proposals; "
                "the proposal scales are likely far too large",
                RuntimeWarning,
                stacklevel=2,
            )
    retained = out[burn_in:]
    if log_scale_last:
        retained = retained.copy()
        retained[:, -1] = np.exp(retained[:, -1])
    return Chain(
        samples=retained,
        acceptance_rate=accepted / draws,
        seed=int(seed),
        burn_in=int(burn_in),
        stuck=stuck,
    )


def default_proposal_scales(post: PosteriorNig) -> np.ndarray:
    """Classical ``2.4 / sqrt(d)`` scaling of the marginal posterior widths.

    Coefficient widths come from the t marginals (scale inflated to a true
    standard deviation when the dof allow), the log-variance width from the
    trigamma variance of ``ln sigma2`` under the inverse gamma marginal.
    """
    nu = 2.0 * post.alpha_star
    var_scale = post.beta_star / post.alpha_star
    infl = nu / (nu - 2.0) if nu > 2.0 else 1.0
    sd_theta = np.sqrt(var_scale * np.diag(post.sigma_star) * infl)
    sd_log_var = math.sqrt(float(polygamma(1, post.alpha_star)))
    return 2.4 / math.sqrt(post.k + 1.0) * np.concatenate([sd_theta, [sd_log_var]])


def pilot_proposal_scales(
    log_target: Callable[[np.ndarray], float],
    init: Sequence[float],
    seed: int = 0,
    pilot_draws: int = 1000,
    log_scale_last: bool = True,
) -> np.ndarray:
    """Proposal scales from a short pilot run when no closed form exists."""
    init = np.atleast_1d(np.asarray(init, dtype=float))
    rough = np.maximum(np.abs(init), 1.0) * 0.1
    if log_scale_last:
        rough[-1] = 0.5
    pilot = metropolis(log_target, init, rough, pilot_draws, burn_in=pilot_draws // 5,
                       seed=seed, log_scale_last=log_scale_last)
    samp = pilot.samples.copy()
    if log_scale_last:
        samp[:, -1] = np.log(samp[:, -1])
    sd = np.std(samp, axis=0, ddof=1)
    sd = np.where(sd > 0, sd, rough)
    return 2.4 / math.sqrt(init.shape[0]) * sd


def effective_sample_size(x: np.ndarray) -> float:
    """ESS by the initial-positive-sequence autocorrelation estimator."""
    x = np.asarray(x, dtype=float)
    m = x.shape[0]
    if m < 4:
        return float(m)
    x = x - x.mean()
    nfft = 1 << (2 * m - 1).bit_length()
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conjugate(f), nfft)[:m].real / m
    if acov[0] <= 0.0:
        return float(m)
    rho = acov / acov[0]
    # sum consecutive pairs until a pair sum turns negative
    tau = 1.0
    for lag in range(1, m - 1, 2):
        pair = rho[lag] + rho[lag + 1]
        if pair < 0.0:
            break
        tau += 2.0 * pair
    return float(max(1.0, m / tau))


def ks_distance(sorted_cdf_values: np.ndarray) -> float:
    """Exact one-sample Kolmogorov-Smirnov statistic from sorted cdf values."""
    u = np.asarray(sorted_cdf_values, dtype=float)
    m = u.shape[0]
    i = np.arange(1, m + 1)
    return float(max(np.max(i / m - u), np.max(u - (i - 1) / m)))


def validate_against_analytic(
    chain: Chain, post: PosteriorNig
) -> tuple[float, list[float]]:
    """KS distances between chain marginals and the closed-form posterior.

    Returns the statistic for the variance marginal against
    ``IG(alpha*, beta*)`` and one statistic per coefficient against its
    scalar-t marginal (standardized by the posterior scale).
    """
    if chain.samples.shape[1] != post.k + 1:
        raise DimensionError(
            f"chain dimension {chain.samples.shape[1]} does not match "
            f"posterior dimension {post.k + 1}"
        )
    ig: InverseGammaDist = marginal_sigma2(post)
    ks_sigma2 = ks_distance(np.sort(ig.cdf(chain.samples[:, -1])))
    theta_marg = marginal_theta(post)
    ks_thetas = []
    for j in range(post.k):
        tj = theta_marg.marginal(j)
        ks_thetas.append(ks_distance(np.sort(tj.cdf(chain.samples[:, j]))))
    return ks_sigma2, ks_thetas
