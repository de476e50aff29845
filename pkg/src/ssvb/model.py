"""Regression data model, prior hyperparameters, and standardization.

Both solvers assume the same preprocessing contract: the response is
centered and every design column is centered and rescaled so that its
squared norm equals the sample size n. All container types are treated
as immutable after construction; solver steps return fresh states
instead of mutating shared ones.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConstantColumnError, NonFiniteError

AN_POLICIES = ("fixed_n", "min_nonzero_eigen", "explicit")


@dataclass(frozen=True)
class RawDataset:
    """Response vector and design matrix on their original scales.

    Parameters
    ----------
    y : (n,) array
        Response values.
    X : (n, p) array
        Feature matrix, one column per feature.
    feature_names : tuple of str, optional
        Column labels. Defaults to x1..xp when omitted.
    """

    y: np.ndarray
    X: np.ndarray
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64)
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError("X must be a 2-d array")
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise ValueError("y must be 1-d with one entry per row of X")
        if X.shape[0] < 2 or X.shape[1] < 1:
            raise ValueError("need at least 2 rows and 1 feature")
        if not (np.isfinite(y).all() and np.isfinite(X).all()):
            raise NonFiniteError("dataset contains NaN or Inf entries")
        if self.feature_names is not None:
            names = tuple(self.feature_names)
            if len(names) != X.shape[1]:
                raise ValueError("feature_names length must equal p")
            object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def names(self) -> tuple[str, ...]:
        if self.feature_names is not None:
            return self.feature_names
        return tuple(f"x{j + 1}" for j in range(self.p))


@dataclass(frozen=True)
class StandardizedDataset:
    """Centered/scaled data plus the metadata needed to undo it.

    Columns satisfy sum(X[:, j]) = 0 and ||X[:, j]||^2 = n. A column on
    the original scale maps to the standardized one via
    (x - col_means[j]) * col_scales[j], and a coefficient on the
    standardized scale maps back via beta_orig = beta_std * col_scales.
    """

    y: np.ndarray
    X: np.ndarray
    n: int
    p: int
    y_mean: float
    col_means: np.ndarray
    col_scales: np.ndarray
    feature_names: tuple[str, ...] | None = None

    def names(self) -> tuple[str, ...]:
        if self.feature_names is not None:
            return self.feature_names
        return tuple(f"x{j + 1}" for j in range(self.p))

    def transform_new(self, X_new: np.ndarray) -> np.ndarray:
        """Standardize out-of-sample rows with the training metadata."""
        X_new = np.asarray(X_new, dtype=np.float64)
        if X_new.ndim != 2 or X_new.shape[1] != self.p:
            raise ValueError(f"X_new must have {self.p} columns")
        return (X_new - self.col_means) * self.col_scales


def standardize(raw: RawDataset) -> StandardizedDataset:
    """Center y, then center and rescale each column of X to norm sqrt(n).

    The scale factor is sqrt(n) / ||X_j - mean(X_j)||, which makes
    ||X_j||^2 = n exactly up to floating error. Constant columns are
    rejected rather than dropped so that inclusion probabilities keep
    their one-to-one correspondence with the caller's features.

    Raises
    ------
    ConstantColumnError
        If some column has zero variance.
    """
    n = raw.n
    y_mean = float(raw.y.mean())
    y = raw.y - y_mean
    col_means = raw.X.mean(axis=0)
    Xc = raw.X - col_means
    norms = np.sqrt(np.einsum("ij,ij->j", Xc, Xc))
    # A centered column of exact constants is all zeros up to rounding of
    # the mean; compare against the column's own magnitude.
    ref = np.maximum(np.abs(raw.X).max(axis=0), 1.0)
    bad = np.flatnonzero(norms <= 1e-12 * np.sqrt(n) * ref)
    if bad.size:
        raise ConstantColumnError(int(bad[0]))
    col_scales = np.sqrt(n) / norms
    X = Xc * col_scales
    return StandardizedDataset(
        y=y,
        X=X,
        n=n,
        p=raw.p,
        y_mean=y_mean,
        col_means=col_means,
        col_scales=col_scales,
        feature_names=raw.feature_names,
    )


@dataclass(frozen=True)
class Hyperparameters:
    """Prior settings shared by both solvers.

    v1 is the slab variance scale, (nu, lam) parameterize the
    inverse-gamma prior IG(nu/2, nu*lam/2) on the error variance, and
    (a0, b0) the Beta prior on the inclusion rate. c is the truncation
    bound restricting every inclusion probability to [c, 1 - c], which
    keeps all logits finite (|logit| <= log((1-c)/c), about 6.9 at the
    default c = 1e-3).

    an_policy chooses the scale in the batch posterior-variance update
    sigma_j^2 = sigma2_hat / (a_n + 1/v1):

    - "fixed_n": a_n = n (the default; reproduces the reference
      benchmark tables most closely)
    - "min_nonzero_eigen": a_n is the minimal nonzero eigenvalue of
      X'X, capped at n, widening the posterior variances on
      spectrum-deficient designs
    - "explicit": a_n = an_value
    """

    v1: float = 1.0
    nu: float = 1.0
    lam: float = 1.0
    a0: float = 1.0
    b0: float = 1.0
    c: float = 1e-3
    an_policy: str = "fixed_n"
    an_value: float | None = None

    def __post_init__(self):
        if not self.v1 > 0:
            raise ValueError("v1 must be positive")
        if not (self.nu > 0 and self.lam > 0):
            raise ValueError("nu and lam must be positive")
        if not (self.a0 > 0 and self.b0 > 0):
            raise ValueError("a0 and b0 must be positive")
        if not 0 < self.c < 0.5:
            raise ValueError("c must lie in (0, 0.5)")
        if self.an_policy not in AN_POLICIES:
            raise ValueError(f"an_policy must be one of {AN_POLICIES}")
        if self.an_policy == "explicit":
            if self.an_value is None or not self.an_value > 0:
                raise ValueError("explicit an_policy needs an_value > 0")


@dataclass
class VariationalState:
    """Variational parameters and point estimates carried between updates.

    mu and sigma2_j are the slab means and variances, phi the inclusion
    probabilities (each in [c, 1 - c]), theta_hat and sigma2_hat the
    point estimates of the inclusion rate and error variance. frozen
    marks coordinates whose phi hit a truncation bound and is therefore
    no longer updated.
    """

    mu: np.ndarray
    sigma2_j: np.ndarray
    phi: np.ndarray
    theta_hat: float
    sigma2_hat: float
    frozen: np.ndarray
    iteration: int = 0

    def copy(self) -> "VariationalState":
        return VariationalState(
            mu=self.mu.copy(),
            sigma2_j=self.sigma2_j.copy(),
            phi=self.phi.copy(),
            theta_hat=self.theta_hat,
            sigma2_hat=self.sigma2_hat,
            frozen=self.frozen.copy(),
            iteration=self.iteration,
        )

    def validate(self, hp: Hyperparameters) -> None:
        """Check the state invariants; raises ValueError on violation."""
        p = self.mu.shape[0]
        if not (self.sigma2_j.shape == (p,) and self.phi.shape == (p,)
                and self.frozen.shape == (p,)):
            raise ValueError("state vectors must share one length")
        eps = 1e-12
        if np.any(self.phi < hp.c - eps) or np.any(self.phi > 1 - hp.c + eps):
            raise ValueError("phi outside [c, 1 - c]")
        at_bound = (self.phi <= hp.c + eps) | (self.phi >= 1 - hp.c - eps)
        if np.any(self.frozen & ~at_bound):
            raise ValueError("frozen coordinate away from truncation bound")
        if not self.sigma2_hat > 0 or np.any(self.sigma2_j <= 0):
            raise ValueError("variances must be positive")


def load_csv(path) -> RawDataset:
    """Read a dataset from CSV: header row, response column named 'y'
    first, remaining columns are features. UTF-8, decimal-point floats."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError("empty CSV file") from None
        if len(header) < 2 or header[0].strip() != "y":
            raise ValueError("first CSV column must be named 'y' and at "
                             "least one feature column must follow")
        names = tuple(h.strip() for h in header[1:])
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"line {lineno}: expected {len(header)} "
                                 f"fields, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise ValueError(f"line {lineno}: non-numeric value") from None
    if len(rows) < 2:
        raise ValueError("need at least two data rows")
    data = np.asarray(rows, dtype=np.float64)
    return RawDataset(y=data[:, 0], X=data[:, 1:], feature_names=names)
