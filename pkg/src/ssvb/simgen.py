"""Synthetic-data generators and selection/estimation metrics.

Three benchmark families are provided: a small autocorrelated design
with three signals (example 1), a forty-feature design with two highly
correlated sign-mixed blocks (example 2), and a thousand-feature
small-sample design (example 3, two signal layouts). A noise-augmented
generator builds prediction benchmarks by appending quadratic terms and
shuffled look-alike noise columns to an arbitrary base dataset.

All generators are pure functions of their arguments: the RNG is a
PCG64 generator seeded from the given integer, so identical seeds yield
bit-identical datasets on any platform. Parallel replicates should
derive their streams as default_rng([master_seed, replicate_index]).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ZeroOlsError
from .model import RawDataset

EXAMPLE1_BETA = np.array([3.0, 1.5, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0])
EXAMPLE2_BETA = np.concatenate([[3.0, 3.0, -2.0, 3.0, 3.0, -2.0],
                                np.zeros(34)])
EXAMPLE3_NONZEROS = [3.0] * 3 + [2.0] * 7 + [1.0] * 10


@dataclass(frozen=True)
class SimScenario:
    """Named generator configuration for the benchmark harness."""

    name: str
    n: int
    sigma: float
    seed: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")


@dataclass
class MetricsReport:
    """Per-replicate estimation and selection metrics."""

    me: float
    correct_zeros: int
    incorrect_zeros: int
    selection_mask: np.ndarray
    mspe: float | None = None


def ar1_covariance(p: int, rho: float) -> np.ndarray:
    """Covariance with entries rho ** |i - j| and unit variances."""
    idx = np.arange(p)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def sample_ar1_design(n: int, p: int, rho: float,
                      rng: np.random.Generator) -> np.ndarray:
    """Rows iid N(0, Sigma) with Sigma_ij = rho**|i-j|, generated by the
    first-order recursion in O(n p) instead of a p x p factorization."""
    z = rng.standard_normal((n, p))
    X = np.empty((n, p))
    X[:, 0] = z[:, 0]
    scale = np.sqrt(1.0 - rho * rho)
    for j in range(1, p):
        X[:, j] = rho * X[:, j - 1] + scale * z[:, j]
    return X


def sample_gaussian_design(n: int, sigma_mat: np.ndarray,
                           rng: np.random.Generator) -> np.ndarray:
    """Rows iid N(0, sigma_mat) via the Cholesky factor."""
    L = np.linalg.cholesky(sigma_mat)
    return rng.standard_normal((n, sigma_mat.shape[0])) @ L.T


def gen_example1(n: int, sigma: float, seed):
    """Eight features, Cov = 0.5**|i-j|, beta = (3, 1.5, 0, 0, 2, 0, 0, 0).

    Returns (RawDataset, beta_star, Sigma). Noise sd is sigma.
    """
    if n < 9:
        raise ValueError("n must be at least 9")
    rng = np.random.default_rng(seed)
    sigma_mat = ar1_covariance(8, 0.5)
    X = sample_gaussian_design(n, sigma_mat, rng)
    beta = EXAMPLE1_BETA.copy()
    y = X @ beta + sigma * rng.standard_normal(n)
    return RawDataset(y=y, X=X), beta, sigma_mat


def example2_covariance() -> np.ndarray:
    """Unit variances; features 1-3 pairwise 0.9 correlated, features
    4-6 pairwise 0.9 correlated, everything else independent."""
    sigma_mat = np.eye(40)
    for block in (slice(0, 3), slice(3, 6)):
        sub = sigma_mat[block, block]
        sub[:] = 0.9
        np.fill_diagonal(sub, 1.0)
    return sigma_mat


def gen_example2(n: int, seed):
    """Forty features with two correlated sign-mixed signal blocks.

    beta = (3, 3, -2, 3, 3, -2, 0 x 34), noise sd fixed at 6.
    """
    rng = np.random.default_rng(seed)
    sigma_mat = example2_covariance()
    X = sample_gaussian_design(n, sigma_mat, rng)
    beta = EXAMPLE2_BETA.copy()
    y = X @ beta + 6.0 * rng.standard_normal(n)
    return RawDataset(y=y, X=X), beta, sigma_mat


def gen_example3(variant: str, seed, error_scale: str = "variance"):
    """Thousand features, n = 100, Cov = 0.6**|i-j|.

    Variant "a" has beta = (3, 2, 1, 0, ...). Variant "b" places ten
    1's, seven 2's, and three 3's in the first twenty coordinates in a
    seed-dependent order, zeros elsewhere. The error distribution is
    N(0, 3): read as variance 3 by default, or as sd 3 when error_scale
    is "sd" (the source description is ambiguous between the two).
    """
    if variant not in ("a", "b"):
        raise ValueError("variant must be 'a' or 'b'")
    if error_scale not in ("variance", "sd"):
        raise ValueError("error_scale must be 'variance' or 'sd'")
    n, p = 100, 1000
    rng = np.random.default_rng(seed)
    beta = np.zeros(p)
    if variant == "a":
        beta[:3] = [3.0, 2.0, 1.0]
    else:
        values = np.array(EXAMPLE3_NONZEROS)
        beta[:20] = rng.permutation(values)
    X = sample_ar1_design(n, p, 0.6, rng)
    sd = np.sqrt(3.0) if error_scale == "variance" else 3.0
    y = X @ beta + sd * rng.standard_normal(n)
    return RawDataset(y=y, X=X), beta, ar1_covariance(p, 0.6)


def gen_noise_augmented(base: RawDataset, n_noise: int, batch: int,
                        noise_sd: float, seed,
                        include_quadratic: bool = True) -> RawDataset:
    """Append quadratic terms and shuffled look-alike noise columns.

    With include_quadratic, every square and pairwise product of the
    base features is added first (p + p(p-1)/2 extra columns). Noise
    columns are then built in batches: each batch copies `batch`
    randomly chosen source columns from the augmented "true" set, adds
    N(0, noise_sd^2) entrywise, and permutes all rows of the batch with
    one shared permutation, so each noise column resembles some true
    column marginally while within-batch correlations survive.
    """
    if n_noise < 0 or batch < 1:
        raise ValueError("n_noise must be >= 0 and batch >= 1")
    rng = np.random.default_rng(seed)
    n = base.n
    cols = [base.X]
    names = list(base.names())
    if include_quadratic:
        p0 = base.p
        quads = []
        for i in range(p0):
            quads.append(base.X[:, i] * base.X[:, i])
            names.append(f"{base.names()[i]}^2")
        for i in range(p0):
            for j in range(i + 1, p0):
                quads.append(base.X[:, i] * base.X[:, j])
                names.append(f"{base.names()[i]}*{base.names()[j]}")
        cols.append(np.column_stack(quads))
    true_block = np.column_stack(cols) if len(cols) > 1 else cols[0]
    p_true = true_block.shape[1]

    noise_cols = []
    made = 0
    batch_no = 0
    while made < n_noise:
        take = min(batch, n_noise - made)
        picks = rng.choice(p_true, size=take, replace=False)
        block = true_block[:, picks] + noise_sd * rng.standard_normal(
            (n, take))
        perm = rng.permutation(n)
        noise_cols.append(block[perm, :])
        for k in range(take):
            names.append(f"noise{batch_no * batch + k + 1}")
        made += take
        batch_no += 1
    if noise_cols:
        X = np.column_stack([true_block] + noise_cols)
    else:
        X = true_block
    return RawDataset(y=base.y.copy(), X=X, feature_names=tuple(names))


def model_error(beta_hat: np.ndarray, beta_star: np.ndarray,
                sigma_mat: np.ndarray, sigma2: float) -> float:
    """Quadratic estimation loss (b - b*)' Sigma (b - b*) / sigma^2."""
    d = np.asarray(beta_hat, dtype=np.float64) - np.asarray(beta_star,
                                                            dtype=np.float64)
    return float(d @ sigma_mat @ d) / float(sigma2)


def mrme(me_list, me_ols_list) -> float:
    """Median over paired replicates of me / me_ols, in percent."""
    me = np.asarray(me_list, dtype=np.float64)
    ols = np.asarray(me_ols_list, dtype=np.float64)
    if me.shape != ols.shape:
        raise ValueError("lists must be paired by replicate")
    if np.any(ols == 0.0):
        raise ZeroOlsError("reference model error of zero")
    return float(100.0 * np.median(me / ols))


def selection_counts(selected, s_star, p: int) -> tuple[int, int]:
    """Count correctly excluded noise features and wrongly excluded
    signal features (0-based index sets)."""
    selected = set(selected)
    s_star = set(s_star)
    if not s_star <= set(range(p)):
        raise ValueError("s_star must be a subset of 0..p-1")
    correct = sum(1 for j in range(p)
                  if j not in s_star and j not in selected)
    incorrect = sum(1 for j in s_star if j not in selected)
    return correct, incorrect
