"""Executable checks of the solver's large-sample behavior.

Orthonormal-column designs admit a closed form for the inclusion logits
after a single batch iteration; one_step_logits cross-checks the solver
against it exactly. The two experiment drivers trace how the one-step
separation between signal and noise logits, and the variational
probability assigned to the true sub-model, improve with sample size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .batch import BatchConfig, fit_batch
from .exceptions import MismatchBeyondToleranceError
from .inference import ModelIndex, model_probability
from .model import Hyperparameters, StandardizedDataset, standardize
from . import simgen


@dataclass(frozen=True)
class OrthogonalProbe:
    """One-step test problem on a design with X'X = n I."""

    n: int
    p: int
    beta_star: np.ndarray
    sigma: float = 1.0
    v1: float = 1.0

    def __post_init__(self):
        if not 1 <= self.p <= self.n:
            raise ValueError("need 1 <= p <= n")
        beta = np.asarray(self.beta_star, dtype=np.float64)
        if beta.shape != (self.p,):
            raise ValueError("beta_star must have length p")
        object.__setattr__(self, "beta_star", beta)
        if not (self.sigma > 0 and self.v1 > 0):
            raise ValueError("sigma and v1 must be positive")


def make_orthogonal_design(n: int, p: int,
                           rng: np.random.Generator) -> np.ndarray:
    """Columns orthogonal, mean zero, squared norm n.

    A Gaussian matrix is column-centered, so its column space is
    orthogonal to the constant vector; orthonormalizing and scaling by
    sqrt(n) then yields X'X = n I while keeping zero column means.
    """
    g = rng.standard_normal((n, p))
    g -= g.mean(axis=0)
    q, _ = np.linalg.qr(g)
    X = np.sqrt(n) * q[:, :p]
    gram = X.T @ X
    if not np.allclose(gram, n * np.eye(p), atol=1e-8 * n):
        raise ValueError("orthogonalization failed")
    return X


def probe_dataset(probe: OrthogonalProbe,
                  rng: np.random.Generator) -> StandardizedDataset:
    """Simulate the probe's response on a fresh orthogonal design."""
    X = make_orthogonal_design(probe.n, probe.p, rng)
    y = X @ probe.beta_star + probe.sigma * rng.standard_normal(probe.n)
    y_mean = float(y.mean())
    return StandardizedDataset(
        y=y - y_mean, X=X, n=probe.n, p=probe.p, y_mean=y_mean,
        col_means=np.zeros(probe.p), col_scales=np.ones(probe.p))


def closed_form_one_step_logits(data: StandardizedDataset, sigma2: float,
                                v1: float) -> np.ndarray:
    """Inclusion logits after one batch iteration on an orthogonal design
    with the error variance known and the inclusion rate at 1/2:

    2 logit(phi_j) = -log(v1 n + 1) + (n betahat_j^2 / sigma^2) *
                     n / (n + 1/v1),

    where betahat_j = X_j'y / n is the per-coordinate least-squares
    estimate.
    """
    n = data.n
    beta_hat = data.X.T @ data.y / n
    two_logit = (-np.log(v1 * n + 1.0)
                 + (n * beta_hat**2 / sigma2) * (n / (n + 1.0 / v1)))
    return 0.5 * two_logit


def one_step_logits(probe: OrthogonalProbe, seed,
                    rtol: float = 1e-8) -> np.ndarray:
    """Closed-form one-step logits, cross-checked against the solver.

    Runs a single batch iteration with the error variance pinned at the
    probe's true value and the variance scale a_n = n, and demands
    elementwise agreement with the closed form within rtol. Raises
    MismatchBeyondToleranceError on drift. The seed may be anything
    numpy's default_rng accepts.
    """
    rng = np.random.default_rng(seed)
    data = probe_dataset(probe, rng)
    sigma2 = probe.sigma**2
    expected = closed_form_one_step_logits(data, sigma2, probe.v1)

    hp = Hyperparameters(v1=probe.v1, an_policy="fixed_n")
    cfg = BatchConfig(max_iters=1, use_an_correction=False,
                      fixed_sigma2=sigma2, track_elbo=False)
    fit = fit_batch(data, hp, cfg)
    got = fit.logits
    scale = 1.0 + np.abs(expected)
    err = np.max(np.abs(got - expected) / scale)
    if err > rtol:
        raise MismatchBeyondToleranceError(
            f"solver logits deviate from closed form by {err:.3e}")
    return expected


def default_probe_p(n: int) -> int:
    """Dimension schedule p ~ sqrt(0.32 n) used by the gap experiment."""
    return max(2, int(round(np.sqrt(0.32 * n))))


def default_probe_v1(n: int) -> float:
    """Slab scale schedule v1 = n^2 / 100.

    The one-step separation requires v1 to grow with n once the
    dimension grows too; a quadratic schedule keeps the noise-side
    failure probability decaying while leaving small-sample rows with
    visibly nonzero failure rates.
    """
    return n * n / 100.0


def gap_experiment(n_grid, p_of_n=None, v1_of_n=None, reps: int = 100,
                   seed: int = 0, threshold: float = 2.0,
                   signal_value: float = 1.0):
    """One-step separation failure rates across sample sizes.

    For each n, `reps` orthogonal probes are drawn with p_of_n(n)
    features, the first max(1, p // 8) of them signals of the given
    value, unit noise, and v1_of_n(n). Recorded per n: the empirical
    probabilities that some noise logit exceeds -threshold/2 and that
    some signal logit falls below threshold/2.

    Returns a list of dict rows with keys (n, p, v1, metric, value).
    """
    p_of_n = p_of_n or default_probe_p
    v1_of_n = v1_of_n or default_probe_v1
    rows = []
    for ni, n in enumerate(n_grid):
        p = int(p_of_n(n))
        v1 = float(v1_of_n(n))
        n_signal = max(1, p // 8)
        beta = np.zeros(p)
        beta[:n_signal] = signal_value
        probe = OrthogonalProbe(n=n, p=p, beta_star=beta, sigma=1.0, v1=v1)
        noise_fail = 0
        signal_fail = 0
        for rep in range(reps):
            logits = one_step_logits(probe, _probe_seed(seed, ni, rep))
            if np.max(logits[n_signal:]) > -threshold / 2.0:
                noise_fail += 1
            if np.min(logits[:n_signal]) < threshold / 2.0:
                signal_fail += 1
        rows.append({"n": n, "p": p, "v1": v1,
                     "metric": "noise_exceed_prob",
                     "value": noise_fail / reps})
        rows.append({"n": n, "p": p, "v1": v1,
                     "metric": "signal_below_prob",
                     "value": signal_fail / reps})
    return rows


def _probe_seed(seed: int, block: int, rep: int) -> list[int]:
    """Independent per-replicate seed key."""
    return [seed, block, rep]


def truth_lower_bound(phi: np.ndarray, gamma_star: np.ndarray) -> float:
    """1 - sum of coordinate miss probabilities, a lower bound on the
    probability of the true sub-model."""
    miss = np.where(gamma_star == 1, 1.0 - phi, phi)
    return float(1.0 - np.sum(miss))


def bayesian_consistency_experiment(n_grid, reps: int = 50, seed: int = 0,
                                    sigma: float = 3.0, v1: float = 1.0,
                                    check_bound: bool = True):
    """Median variational probability of the true sub-model versus n.

    Uses the three-signal autocorrelated benchmark truth at the given
    noise level, fit by the batch solver with a fixed v1. For every fit
    the product-form probability is checked against its additive lower
    bound (1 minus the summed miss probabilities), which must hold
    exactly.

    Returns rows (n, p, v1, metric, value) with metrics
    q_truth_median / q_truth_q25 / q_truth_q75.
    """
    hp = Hyperparameters(v1=v1)
    cfg = BatchConfig(track_elbo=False)
    gamma_star = (simgen.EXAMPLE1_BETA != 0).astype(int)
    truth = ModelIndex(gamma=gamma_star)
    rows = []
    for ni, n in enumerate(n_grid):
        q_vals = []
        for rep in range(reps):
            raw, _, _ = simgen.gen_example1(n, sigma,
                                            _probe_seed(seed, ni, rep))
            data = standardize(raw)
            fit = fit_batch(data, hp, cfg)
            q = model_probability(truth, fit.state.phi)
            if check_bound:
                bound = truth_lower_bound(fit.state.phi, gamma_star)
                if q < bound - 1e-12:
                    raise AssertionError(
                        "product probability fell below its additive bound")
            q_vals.append(q)
        q_vals = np.asarray(q_vals)
        for metric, value in (
                ("q_truth_median", float(np.median(q_vals))),
                ("q_truth_q25", float(np.quantile(q_vals, 0.25))),
                ("q_truth_q75", float(np.quantile(q_vals, 0.75)))):
            rows.append({"n": int(n), "p": int(gamma_star.size),
                         "v1": float(v1), "metric": metric, "value": value})
    return rows


def rows_to_csv(rows) -> str:
    """Render experiment rows as (n, p, v1, metric, value) CSV."""
    lines = ["n,p,v1,metric,value"]
    for r in rows:
        lines.append(f"{r['n']},{r['p']},{r['v1']!r},{r['metric']},"
                     f"{r['value']!r}")
    return "\n".join(lines) + "\n"
