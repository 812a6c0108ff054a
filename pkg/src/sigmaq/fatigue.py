"""Strain-life fatigue application: log-linear life model, prior comparison
on the low-cycle test data, and design-life quantiles at a prescribed
probability of failure under the Bayesian and least-squares estimators."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .conjugate import (
    PosteriorNig,
    limiting_nig_from_q,
    posterior_log_kernel,
    posterior_update,
    predictive,
)
from .errors import DomainError
from .evidence import PriorComparison, compare_priors
from .linmodel import Dataset
from .mcmc import default_proposal_scales, metropolis
from .numkernel import student_t_quantile

__all__ = [
    "FatigueRecord",
    "StrainLifeFit",
    "records_to_dataset",
    "fit_strain_life",
    "life_at_pof",
    "holdout_performance",
]

MCMC_BURN_IN = 2000


@dataclass(frozen=True)
class FatigueRecord:
    """One strain-controlled test: strain amplitude and cycles to failure."""

    strain_amplitude: float
    cycles: float

    def __post_init__(self):
        if not (np.isfinite(self.strain_amplitude) and self.strain_amplitude > 0.0):
            raise DomainError(
                f"strain amplitude must be positive, got {self.strain_amplitude!r}"
            )
        if not (np.isfinite(self.cycles) and self.cycles > 0.0):
            raise DomainError(f"cycles must be positive, got {self.cycles!r}")


@dataclass(frozen=True)
class StrainLifeFit:
    """Posterior of the log-linear strain-life model ln N = a0 + a1 ln(strain)."""

    posterior: PosteriorNig
    q: float
    holdout: tuple

    @property
    def n(self) -> int:
        return self.posterior.n


def records_to_dataset(records: Sequence[FatigueRecord]) -> Dataset:
    """Design rows ``[1, ln(strain)]`` against responses ``ln(cycles)``."""
    design = np.column_stack([
        np.ones(len(records)),
        np.log([r.strain_amplitude for r in records]),
    ])
    response = np.log([r.cycles for r in records])
    return Dataset(design, response)


def _split_records(records: Sequence[FatigueRecord], holdout: Sequence[int]):
    """Split by 1-based record numbers, as printed in the data table."""
    holdout = tuple(int(i) for i in holdout)
    for i in holdout:
        if not 1 <= i <= len(records):
            raise DomainError(
                f"holdout index {i} outside 1..{len(records)} (indices are 1-based)"
            )
    if len(set(holdout)) != len(holdout):
        raise DomainError(f"holdout indices repeat: {holdout}")
    keep = [r for j, r in enumerate(records, start=1) if j not in holdout]
    held = [records[i - 1] for i in holdout]
    return keep, held


def fit_strain_life(
    records: Sequence[FatigueRecord],
    q: float = 2.0,
    holdout: Sequence[int] = (6,),
) -> StrainLifeFit:
    """Fit the strain-life posterior under a ``1/sigma^q`` prior.

    ``holdout`` lists 1-based record numbers excluded from fitting (the
    reliability study holds out record 6 by default).  At least three
    records at two distinct strain levels must remain.
    """
    keep, _ = _split_records(records, holdout)
    if len(keep) < 3:
        raise DomainError(f"need at least 3 records after holdout, got {len(keep)}")
    data = records_to_dataset(keep)
    post = posterior_update(limiting_nig_from_q(q, data.k), data)
    return StrainLifeFit(posterior=post, q=q, holdout=tuple(int(i) for i in holdout))


def _design_row(strain_amplitude: float) -> np.ndarray:
    if strain_amplitude <= 0.0:
        raise DomainError(f"strain amplitude must be positive, got {strain_amplitude!r}")
    return np.array([1.0, math.log(strain_amplitude)])


def life_at_pof(
    fit: StrainLifeFit,
    strain_amplitude: float,
    pof: float,
    method: str = "bayes",
    draws: int = 0,
    seed: int = 0,
) -> float:
    """Design life (cycles) whose failure probability at this strain is ``pof``.

    ``bayes`` takes the pof-quantile of the predictive distribution of the
    log life: analytically through the scalar-t quantile, or, when
    ``draws > 0``, as the empirical quantile of that many posterior
    predictive draws from a Metropolis run.  ``least_squares`` uses the
    one-sided classical bound ``x theta_hat + t_pof(n-k) * sd_pred``.  The
    fitted range of the test data is roughly strain 1e-4 to 1e-1;
    extrapolation beyond it is the caller's responsibility.
    """
    if not 0.0 < pof < 1.0:
        raise DomainError(f"pof must lie in (0, 1), got {pof!r}")
    x_row = _design_row(strain_amplitude)
    post = fit.posterior

    if method == "least_squares":
        n, k = post.n, post.k
        if n <= k:
            raise DomainError("least-squares bound needs residual dof")
        lev = float(x_row @ post.sigma_star @ x_row)
        sd = math.sqrt(post.sse / (n - k) * (1.0 + lev))
        bound = float(x_row @ post.mu_star) + student_t_quantile(n - k, pof) * sd
        return math.exp(bound)

    if method != "bayes":
        raise DomainError(f"method must be 'bayes' or 'least_squares', got {method!r}")

    if draws <= 0:
        pred = predictive(post, x_row[None, :], include_noise=True).marginal(0)
        return math.exp(pred.quantile(pof))

    target = lambda p: posterior_log_kernel(post, p[:-1], p[-1])
    init = np.concatenate([post.mu_star, [post.beta_star / (post.alpha_star + 1.0)]])
    chain = metropolis(
        target,
        init,
        default_proposal_scales(post),
        draws=draws + MCMC_BURN_IN,
        burn_in=MCMC_BURN_IN,
        seed=seed,
    )
    rng = np.random.default_rng(np.random.PCG64([seed, 0x5EED]))
    mean_pred = chain.samples[:, :-1] @ x_row
    noise = np.sqrt(chain.samples[:, -1]) * rng.standard_normal(len(chain))
    return math.exp(float(np.quantile(mean_pred + noise, pof)))


def holdout_performance(
    records: Sequence[FatigueRecord],
    holdout: Sequence[int],
    q_list: Sequence[float],
    support: tuple[float, float] | None = None,
) -> PriorComparison:
    """Prior comparison with the held-out records as the prediction target."""
    keep, held = _split_records(records, holdout)
    if len(keep) < 3:
        raise DomainError(f"need at least 3 records after holdout, got {len(keep)}")
    data = records_to_dataset(keep)
    future = records_to_dataset(held) if held else None
    return compare_priors(data, future, q_list, support=support)
