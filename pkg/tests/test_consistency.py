"""Orthogonal closed forms and large-sample trend machinery."""

import numpy as np
import pytest

import ssvb
from ssvb.consistency import (OrthogonalProbe, closed_form_one_step_logits,
                              probe_dataset, rows_to_csv)


class TestOrthogonalDesign:
    def test_gram_is_n_identity(self, rng):
        for n, p in ((30, 5), (128, 16), (301, 12)):
            X = ssvb.make_orthogonal_design(n, p, rng)
            gram = X.T @ X
            assert np.max(np.abs(gram - n * np.eye(p))) < 1e-8 * n
            assert np.max(np.abs(X.mean(axis=0))) < 1e-12

    def test_probe_validation(self):
        with pytest.raises(ValueError):
            OrthogonalProbe(n=5, p=9, beta_star=np.zeros(9))
        with pytest.raises(ValueError):
            OrthogonalProbe(n=9, p=2, beta_star=np.zeros(3))


class TestOneStepLogits:
    def test_null_signal_exact_penalty(self):
        # zero coefficients and zero noise leave only the penalty term:
        # with v1 n = e^2 - 1 the doubled logit equals exactly -2
        n = 64
        v1 = (np.e**2 - 1.0) / n
        probe = OrthogonalProbe(n=n, p=4, beta_star=np.zeros(4),
                                sigma=1.0, v1=v1)
        rng = np.random.default_rng(0)
        data = probe_dataset(probe, rng)
        data = ssvb.StandardizedDataset(
            y=np.zeros(n), X=data.X, n=n, p=4, y_mean=0.0,
            col_means=np.zeros(4), col_scales=np.ones(4))
        logits = closed_form_one_step_logits(data, 1.0, v1)
        np.testing.assert_allclose(2 * logits, np.full(4, -2.0), atol=1e-10)

    def test_noiseless_signal_dominates(self):
        n = 400
        probe = OrthogonalProbe(n=n, p=3,
                                beta_star=np.array([1.0, 0.0, 0.0]),
                                sigma=1.0, v1=1.0)
        rng = np.random.default_rng(1)
        X = ssvb.make_orthogonal_design(n, 3, rng)
        y = X @ probe.beta_star
        data = ssvb.StandardizedDataset(
            y=y - y.mean(), X=X, n=n, p=3, y_mean=float(y.mean()),
            col_means=np.zeros(3), col_scales=np.ones(3))
        logits = closed_form_one_step_logits(data, 1.0, 1.0)
        lead = 0.5 * n * (n / (n + 1.0))
        assert logits[0] > 0
        assert abs(2 * logits[0] - (-np.log(n + 1.0) + 2 * lead)) < 1e-6
        assert logits[1] < 0 and logits[2] < 0

    def test_solver_matches_closed_form(self):
        rng = np.random.default_rng(3)
        for k in range(5):
            n = int(rng.integers(50, 300))
            p = int(rng.integers(2, min(20, n // 4)))
            beta = np.zeros(p)
            beta[: max(1, p // 4)] = rng.uniform(0.5, 2.0, max(1, p // 4))
            probe = OrthogonalProbe(n=n, p=p, beta_star=beta,
                                    sigma=float(rng.uniform(0.5, 2.0)),
                                    v1=float(rng.uniform(0.2, 5.0)))
            ssvb.one_step_logits(probe, [3, k])  # raises on mismatch


class TestGapExperiment:
    def test_small_sample_failure_rates_nonzero(self):
        # trend anchor: with a small sample and no slab growth the
        # one-step separation fails at a visible rate
        rows = ssvb.gap_experiment([50], v1_of_n=lambda n: 1.0, reps=40,
                                   seed=1)
        by_metric = {r["metric"]: r["value"] for r in rows}
        assert by_metric["noise_exceed_prob"] > 0.0

    def test_rows_shape_and_csv(self):
        rows = ssvb.gap_experiment([50, 100], reps=5, seed=0)
        assert len(rows) == 4
        text = rows_to_csv(rows)
        lines = text.strip().split("\n")
        assert lines[0] == "n,p,v1,metric,value"
        assert len(lines) == 5


class TestBayesianConsistency:
    def test_rows_and_bound(self):
        rows = ssvb.bayesian_consistency_experiment(
            [80, 160], reps=6, seed=2, sigma=3.0, v1=1.0)
        medians = [r["value"] for r in rows
                   if r["metric"] == "q_truth_median"]
        assert len(medians) == 2
        assert all(0.0 <= m <= 1.0 for m in medians)

    def test_degenerate_single_signal(self):
        # one strong coordinate: the truth probability approaches 1
        rng = np.random.default_rng(4)
        n = 400
        X = ssvb.make_orthogonal_design(n, 1, rng)
        y = 3.0 * X[:, 0] + rng.standard_normal(n)
        data = ssvb.StandardizedDataset(
            y=y - y.mean(), X=X, n=n, p=1, y_mean=float(y.mean()),
            col_means=np.zeros(1), col_scales=np.ones(1))
        fit = ssvb.fit_batch(data, ssvb.Hyperparameters(v1=1.0))
        q = ssvb.model_probability(
            ssvb.ModelIndex(np.array([1])), fit.state.phi)
        assert q > 0.99
