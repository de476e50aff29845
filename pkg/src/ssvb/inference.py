"""Post-fit quantities: selection, sparse coefficients, model
probabilities, the entropy stopping measure, and prediction."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import xlogy

from .elbo import bernoulli_entropy
from .exceptions import DimensionMismatchError, RankDeficientRefitWarning
from .model import Hyperparameters, StandardizedDataset, VariationalState


@dataclass
class FitResult:
    """Converged state of a solver run plus derived summaries.

    selected holds the 0-based indices with phi strictly above 0.5 and
    sparse_beta gates the slab means on that set. logits records the raw
    (pre-truncation) inclusion logits from the most recent probability
    update, which the orthogonal-design oracle compares against closed
    forms. woodbury_ranks lists, per iteration, how many coordinates the
    low-rank inverse update touched (empty when that path is off).
    """

    state: VariationalState
    selected: frozenset[int]
    sparse_beta: np.ndarray
    elbo_trace: np.ndarray
    iterations: int
    converged: bool
    wall_time: float
    algorithm: str
    logits: np.ndarray | None = None
    woodbury_ranks: list[int] = field(default_factory=list)
    mu_trace: list[np.ndarray] = field(default_factory=list)


@dataclass(frozen=True)
class ModelIndex:
    """Binary inclusion vector indexing one of the 2^p sub-models."""

    gamma: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gamma)
        if g.ndim != 1 or not np.isin(g, (0, 1)).all():
            raise ValueError("gamma must be a 1-d 0/1 vector")
        object.__setattr__(self, "gamma", g.astype(np.int8))


def selected_set(phi: np.ndarray, cutoff: float = 0.5) -> frozenset[int]:
    """Indices with phi strictly above the cutoff (ties excluded)."""
    if not 0.0 < cutoff < 1.0:
        raise ValueError("cutoff must lie in (0, 1)")
    return frozenset(int(j) for j in np.flatnonzero(np.asarray(phi) > cutoff))


def sparse_beta(state: VariationalState, cutoff: float = 0.5) -> np.ndarray:
    """Slab means gated by phi >= cutoff, zero elsewhere.

    Note the inclusive comparison here versus the strict one in
    selected_set; truncation keeps phi away from 0.5 exactly, so the two
    conventions only differ on a measure-zero boundary.
    """
    return np.where(state.phi >= cutoff, state.mu, 0.0)


def model_probability(gamma: ModelIndex, phi: np.ndarray) -> float:
    """Variational probability of one sub-model, prod over coordinates of
    phi_j^gamma_j (1-phi_j)^(1-gamma_j), accumulated in log space."""
    phi = np.asarray(phi, dtype=np.float64)
    g = gamma.gamma
    if g.shape != phi.shape:
        raise DimensionMismatchError("gamma and phi lengths differ")
    log_q = np.sum(np.where(g == 1, np.log(phi), np.log1p(-phi)))
    return float(np.exp(log_q))


def max_entropy_change(phi_prev: np.ndarray, phi_curr: np.ndarray) -> float:
    """Largest coordinatewise change in Bernoulli entropy, in nats."""
    phi_prev = np.asarray(phi_prev, dtype=np.float64)
    phi_curr = np.asarray(phi_curr, dtype=np.float64)
    if phi_prev.shape != phi_curr.shape:
        raise DimensionMismatchError("phi vectors have different lengths")
    return float(np.max(np.abs(bernoulli_entropy(phi_curr)
                               - bernoulli_entropy(phi_prev))))


def build_fit_result(state: VariationalState, elbo_trace, iterations: int,
                     converged: bool, wall_time: float, algorithm: str,
                     logits: np.ndarray | None = None,
                     woodbury_ranks: list[int] | None = None,
                     mu_trace: list[np.ndarray] | None = None) -> FitResult:
    sel = selected_set(state.phi)
    mask = np.zeros(state.mu.shape[0], dtype=bool)
    if sel:
        mask[list(sel)] = True
    return FitResult(
        state=state,
        selected=sel,
        sparse_beta=np.where(mask, state.mu, 0.0),
        elbo_trace=np.asarray(elbo_trace, dtype=np.float64),
        iterations=iterations,
        converged=converged,
        wall_time=wall_time,
        algorithm=algorithm,
        logits=logits,
        woodbury_ranks=list(woodbury_ranks or []),
        mu_trace=list(mu_trace or []),
    )


def predict_sparse(fit: FitResult, train: StandardizedDataset,
                   X_new: np.ndarray) -> np.ndarray:
    """Prediction from the gated coefficient vector ("S").

    X_new is on the original feature scale; it is standardized with the
    training metadata and the centering is undone on the way out.
    """
    Xs = train.transform_new(X_new)
    return train.y_mean + Xs @ fit.sparse_beta


def predict_two_stage(fit: FitResult, train: StandardizedDataset,
                      X_new: np.ndarray) -> np.ndarray:
    """Prediction from a least-squares refit on the selected set ("TS").

    An empty selection falls back to the intercept-only prediction. A
    rank-deficient refit design is reported via RankDeficientRefitWarning
    and the least-norm solution is used.
    """
    Xs = train.transform_new(X_new)
    sel = sorted(fit.selected)
    if not sel:
        return np.full(Xs.shape[0], train.y_mean)
    Xt = train.X[:, sel]
    coef, _, rank, _ = np.linalg.lstsq(Xt, train.y, rcond=None)
    if rank < len(sel):
        warnings.warn("two-stage refit design is rank deficient; using the "
                      "least-norm solution", RankDeficientRefitWarning)
    return train.y_mean + Xs[:, sel] @ coef


def fit_result_to_dict(fit: FitResult, hp: Hyperparameters,
                       feature_names=None) -> dict:
    """JSON-ready summary document (schema version 1)."""
    p = fit.state.mu.shape[0]
    if feature_names is None:
        feature_names = [f"x{j + 1}" for j in range(p)]
    names = list(feature_names)
    if len(names) != p:
        raise DimensionMismatchError("feature_names length must equal p")
    return {
        "schema": 1,
        "algorithm": fit.algorithm,
        "converged": bool(fit.converged),
        "iterations": int(fit.iterations),
        "theta_hat": float(fit.state.theta_hat),
        "sigma2_hat": float(fit.state.sigma2_hat),
        "v1": float(hp.v1),
        "features": [
            {
                "name": names[j],
                "mu": float(fit.state.mu[j]),
                "sigma2_j": float(fit.state.sigma2_j[j]),
                "phi": float(fit.state.phi[j]),
                "selected": bool(j in fit.selected),
            }
            for j in range(p)
        ],
    }


def fit_result_to_json(fit: FitResult, hp: Hyperparameters,
                       feature_names=None) -> str:
    return json.dumps(fit_result_to_dict(fit, hp, feature_names), indent=2)
