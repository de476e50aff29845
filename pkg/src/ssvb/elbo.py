"""Variational objective used as convergence diagnostic and ascent oracle.

The objective is the expected log ratio of the joint posterior to the
factorized variational distribution, with the inclusion rate and error
variance plugged in as point estimates (a hybrid variational-EM
objective). Point-mass components of the prior and the variational
family cancel in the ratio and contribute no differential entropy.

Constant convention: nothing is dropped. The log prior densities of the
two point estimates are folded into the adjacent decomposition terms
(error-variance prior into slab_prior_term, inclusion-rate prior into
bernoulli_term), so absolute values are comparable only within this
implementation; differences are what the monotonicity checks consume.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import betaln, gammaln, xlogy

from .exceptions import DimensionMismatchError
from .model import Hyperparameters, StandardizedDataset, VariationalState

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class ElboValue:
    """Objective value in nats plus its additive breakdown."""

    total: float
    likelihood_term: float
    slab_prior_term: float
    bernoulli_term: float
    entropy_term: float

    @property
    def parts(self) -> dict[str, float]:
        return {
            "likelihood_term": self.likelihood_term,
            "slab_prior_term": self.slab_prior_term,
            "bernoulli_term": self.bernoulli_term,
            "entropy_term": self.entropy_term,
        }


def _inverse_gamma_logpdf(x: float, shape: float, scale: float) -> float:
    return shape * np.log(scale) - gammaln(shape) \
        - (shape + 1.0) * np.log(x) - scale / x


def _beta_logpdf(x: float, a: float, b: float) -> float:
    return (a - 1.0) * np.log(x) + (b - 1.0) * np.log1p(-x) - betaln(a, b)


def bernoulli_entropy(phi: np.ndarray) -> np.ndarray:
    """Elementwise entropy of Bernoulli(phi) in nats."""
    phi = np.asarray(phi, dtype=np.float64)
    return -(xlogy(phi, phi) + xlogy(1.0 - phi, 1.0 - phi))


def compute_elbo(state: VariationalState, data: StandardizedDataset,
                 hp: Hyperparameters) -> ElboValue:
    """Evaluate the objective at the given state.

    Deterministic and pure; the state is evaluated exactly as held by
    the solver, truncated inclusion probabilities included.
    """
    p = data.p
    if state.mu.shape[0] != p:
        raise DimensionMismatchError(
            f"state has {state.mu.shape[0]} coordinates, data has {p}")
    y, X, n = data.y, data.X, data.n
    mu, s2j, phi = state.mu, state.sigma2_j, state.phi
    theta, s2 = state.theta_hat, state.sigma2_hat

    beta_bar = phi * mu
    resid = y - X @ beta_bar
    col_sq = np.einsum("ij,ij->j", X, X)
    var_beta = phi * (mu**2 + s2j) - beta_bar**2
    e_rss = resid @ resid + col_sq @ var_beta

    likelihood = -0.5 * n * (_LOG_2PI + np.log(s2)) - e_rss / (2.0 * s2)

    slab = float(phi @ (-0.5 * (_LOG_2PI + np.log(hp.v1 * s2))
                        - (mu**2 + s2j) / (2.0 * hp.v1 * s2)))
    slab += _inverse_gamma_logpdf(s2, hp.nu / 2.0, hp.nu * hp.lam / 2.0)

    bernoulli = float(np.sum(phi) * np.log(theta)
                      + np.sum(1.0 - phi) * np.log1p(-theta))
    bernoulli += _beta_logpdf(theta, hp.a0, hp.b0)

    entropy = float(np.sum(bernoulli_entropy(phi)))
    entropy += float(phi @ (0.5 * (_LOG_2PI + np.log(s2j) + 1.0)))

    total = likelihood + slab + bernoulli + entropy
    return ElboValue(
        total=float(total),
        likelihood_term=float(likelihood),
        slab_prior_term=float(slab),
        bernoulli_term=float(bernoulli),
        entropy_term=float(entropy),
    )
