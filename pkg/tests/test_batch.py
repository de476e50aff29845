"""Batch solver: mean solve, Woodbury path, variance scale, freezing."""

import numpy as np
import pytest
from scipy.linalg import eigh
from scipy.special import expit

import ssvb
from ssvb.batch import BatchConfig, compute_a_n, init_woodbury_cache, resolve_a_n
from ssvb.exceptions import AllZeroSpectrumError


def _state(p, mu=None, phi=None, theta=0.5, sigma2=1.0, sigma2_j=None):
    return ssvb.VariationalState(
        mu=np.zeros(p) if mu is None else np.asarray(mu, dtype=float),
        sigma2_j=(np.full(p, 0.05) if sigma2_j is None
                  else np.asarray(sigma2_j, dtype=float)),
        phi=np.full(p, 0.5) if phi is None else np.asarray(phi, dtype=float),
        theta_hat=theta, sigma2_hat=sigma2,
        frozen=np.zeros(p, dtype=bool))


def _random_data(rng, n, p):
    raw = ssvb.RawDataset(y=rng.standard_normal(n),
                          X=rng.standard_normal((n, p)))
    return ssvb.standardize(raw)


class TestUpdateMuBatch:
    def test_all_in_is_ridge(self, rng):
        # phi = 1 exactly reduces the system to X'X + (1/v1) I
        data = _random_data(rng, 40, 6)
        hp = ssvb.Hyperparameters(v1=2.0)
        state = _state(6, phi=np.ones(6))
        out = ssvb.update_mu_batch(state, data, hp)
        G = data.X.T @ data.X
        want = np.linalg.solve(G + np.eye(6) / hp.v1, data.X.T @ data.y)
        np.testing.assert_allclose(out.mu, want, rtol=1e-10)

    def test_orthogonal_diagonal_system(self):
        rng = np.random.default_rng(3)
        n, p = 60, 4
        X = ssvb.make_orthogonal_design(n, p, rng)
        y = rng.standard_normal(n)
        y -= y.mean()
        data = ssvb.StandardizedDataset(
            y=y, X=X, n=n, p=p, y_mean=0.0,
            col_means=np.zeros(p), col_scales=np.ones(p))
        hp = ssvb.Hyperparameters(v1=1.0)
        out = ssvb.update_mu_batch(_state(p, phi=np.ones(p)), data, hp)
        want = X.T @ y / (n + 1.0)
        np.testing.assert_allclose(out.mu, want, rtol=1e-8, atol=1e-12)

    def test_weighted_form_oracle(self, rng):
        # explicit inverse of the phi-weighted normal equations
        data = _random_data(rng, 15, 7)
        hp = ssvb.Hyperparameters(v1=0.8)
        phi = rng.uniform(0.05, 0.95, 7)
        state = _state(7, phi=phi)
        out = ssvb.update_mu_batch(state, data, hp)
        G = data.X.T @ data.X
        Phi = np.diag(phi)
        delta = 15 * Phi @ (np.eye(7) - Phi)
        A = Phi @ G @ Phi + delta + Phi / hp.v1
        want = np.linalg.inv(A) @ (Phi @ data.X.T @ data.y)
        np.testing.assert_allclose(out.mu, want, rtol=1e-8, atol=1e-8)

    def test_least_norm_limit(self, rng):
        # v1 -> infinity approximated by 1e12 recovers least squares on a
        # full-rank design
        data = _random_data(rng, 50, 6)
        hp = ssvb.Hyperparameters(v1=1e12)
        out = ssvb.update_mu_batch(_state(6, phi=np.ones(6)), data, hp)
        want = np.linalg.lstsq(data.X, data.y, rcond=None)[0]
        np.testing.assert_allclose(out.mu, want, atol=1e-4)


class TestWoodbury:
    def test_no_change_reuses_inverse(self, rng):
        data = _random_data(rng, 30, 8)
        hp = ssvb.Hyperparameters()
        phi = rng.uniform(0.2, 0.9, 8)
        state = _state(8, phi=phi)
        cache = init_woodbury_cache(phi, data, hp)
        out, cache2 = ssvb.update_mu_woodbury(state, cache, data, hp)
        assert cache2 is cache
        direct = ssvb.update_mu_batch(state, data, hp)
        np.testing.assert_allclose(out.mu, direct.mu, rtol=1e-10)

    def test_single_coordinate_change(self, rng):
        data = _random_data(rng, 25, 10)
        hp = ssvb.Hyperparameters(v1=1.3)
        phi0 = rng.uniform(0.3, 0.8, 10)
        cache = init_woodbury_cache(phi0, data, hp)
        phi1 = phi0.copy()
        phi1[4] = 0.05
        state = _state(10, phi=phi1)
        out, cache2 = ssvb.update_mu_woodbury(state, cache, data, hp)
        direct = ssvb.update_mu_batch(state, data, hp)
        np.testing.assert_allclose(out.mu, direct.mu, rtol=1e-10, atol=1e-10)
        np.testing.assert_allclose(cache2.last_phi, phi1)

    def test_repeated_updates_track_direct(self, rng):
        data = _random_data(rng, 40, 12)
        hp = ssvb.Hyperparameters()
        phi = rng.uniform(0.4, 0.9, 12)
        cache = init_woodbury_cache(phi, data, hp)
        for step in range(6):
            changed = rng.choice(12, size=3, replace=False)
            phi = phi.copy()
            phi[changed] = rng.uniform(0.01, 0.99, 3)
            state = _state(12, phi=phi)
            state, cache = ssvb.update_mu_woodbury(state, cache, data, hp)
            direct = ssvb.update_mu_batch(_state(12, phi=phi), data, hp)
            np.testing.assert_allclose(state.mu, direct.mu, rtol=1e-8,
                                       atol=1e-10)

    def test_full_fit_matches_direct(self, rng):
        for seed in range(4):
            local = np.random.default_rng(seed)
            n = int(local.integers(25, 90))
            p = int(local.integers(5, 40))
            data = _random_data(local, n, p)
            hp = ssvb.Hyperparameters()
            fa = ssvb.fit_batch(data, hp, BatchConfig(track_mu=True,
                                                      track_elbo=False))
            fb = ssvb.fit_batch(data, hp, BatchConfig(track_mu=True,
                                                      track_elbo=False,
                                                      woodbury=True))
            assert len(fa.mu_trace) == len(fb.mu_trace)
            for ma, mb in zip(fa.mu_trace, fb.mu_trace):
                assert np.max(np.abs(ma - mb) / (1 + np.abs(ma))) < 1e-6
            assert len(fb.woodbury_ranks) == fb.iterations


class TestVarianceScale:
    def test_direct_substitution(self):
        rng = np.random.default_rng(1)
        data = _random_data(rng, 100, 5)
        hp = ssvb.Hyperparameters(v1=1.0)
        out = ssvb.update_sigma_j_batch(_state(5, sigma2=1.0), data, hp,
                                        a_n=100.0)
        np.testing.assert_allclose(out.sigma2_j, np.full(5, 1.0 / 101.0))

    def test_no_correction_matches_componentwise_form(self, rng):
        data = _random_data(rng, 45, 4)
        hp = ssvb.Hyperparameters(v1=2.0)
        a_n = resolve_a_n(data, hp, use_correction=False)
        out = ssvb.update_sigma_j_batch(_state(4, sigma2=1.7), data, hp, a_n)
        want = 1.7 / (45 + 0.5)
        np.testing.assert_allclose(out.sigma2_j, np.full(4, want))

    def test_orthogonal_policies_coincide(self):
        rng = np.random.default_rng(9)
        n, p = 64, 8
        X = ssvb.make_orthogonal_design(n, p, rng)
        data = ssvb.StandardizedDataset(
            y=rng.standard_normal(n), X=X, n=n, p=p, y_mean=0.0,
            col_means=np.zeros(p), col_scales=np.ones(p))
        assert abs(compute_a_n(data) - n) < 1e-6 * n

    def test_a_n_requires_positive(self, rng):
        data = _random_data(rng, 20, 3)
        with pytest.raises(ValueError):
            ssvb.update_sigma_j_batch(_state(3), data,
                                      ssvb.Hyperparameters(), a_n=0.0)


class TestComputeAn:
    def test_duplicated_column_skips_zero(self, rng):
        base = rng.standard_normal((30, 3))
        X = np.column_stack([base, base[:, 0]])
        data = ssvb.standardize(ssvb.RawDataset(y=rng.standard_normal(30),
                                                X=X))
        a_n = compute_a_n(data)
        assert a_n > 1e-6

    def test_example1_against_dense_eigensolver(self):
        raw, _, _ = ssvb.gen_example1(60, 1.0, 11)
        data = ssvb.standardize(raw)
        a_n = compute_a_n(data)
        evals = eigh(data.X.T @ data.X, eigvals_only=True)
        want = min(v for v in evals if v > 1e-8 * evals[-1])
        assert abs(a_n - want) < 1e-6 * abs(want)

    def test_zero_design(self):
        data = ssvb.StandardizedDataset(
            y=np.zeros(4), X=np.zeros((4, 2)), n=4, p=2, y_mean=0.0,
            col_means=np.zeros(2), col_scales=np.ones(2))
        with pytest.raises(AllZeroSpectrumError):
            compute_a_n(data)

    def test_eigen_policy_caps_at_n(self):
        raw, _, _ = ssvb.gen_example3("a", 0)
        data = ssvb.standardize(raw)
        hp = ssvb.Hyperparameters(an_policy="min_nonzero_eigen")
        assert compute_a_n(data) > data.n
        assert resolve_a_n(data, hp) == data.n


class TestUpdatePhiBatch:
    def test_zero_mean_logit_value(self):
        hp = ssvb.Hyperparameters(v1=1.0)
        a_n = 100.0
        sigma2 = 1.0
        s2j = sigma2 / (a_n + 1.0)
        state = _state(3, mu=np.zeros(3), sigma2_j=np.full(3, s2j),
                       theta=0.5, sigma2=sigma2)
        out = ssvb.update_phi_batch(state, hp)
        want = expit(-0.5 * np.log(hp.v1 * a_n + 1.0))
        np.testing.assert_allclose(out.phi, np.full(3, want), rtol=1e-12)

    def test_extreme_logit_freezes(self):
        hp = ssvb.Hyperparameters(c=1e-3)
        # mu = 0 with tiny variance ratio drives the logit to -20
        s2j = np.exp(-40.0)
        state = _state(2, mu=np.zeros(2), sigma2_j=np.full(2, s2j),
                       theta=0.5, sigma2=1.0)
        out = ssvb.update_phi_batch(state, hp)
        assert np.all(out.phi == hp.c)
        assert np.all(out.frozen)
        # later updates leave frozen coordinates alone even if mu moves
        out.mu[:] = 50.0
        again = ssvb.update_phi_batch(out, hp)
        assert np.all(again.phi == hp.c)

    def test_frozen_never_changes_across_fit(self):
        raw, _, _ = ssvb.gen_example1(60, 1.0, 3)
        data = ssvb.standardize(raw)
        hp = ssvb.Hyperparameters(v1=1.0)
        # track phi trajectories manually
        from ssvb.batch import (update_mu_batch, update_phi_batch,
                                update_sigma2_batch, update_sigma_j_batch)
        from ssvb.model import VariationalState
        p = data.p
        state = VariationalState(
            mu=np.zeros(p), sigma2_j=np.full(p, 1.0 / 61),
            phi=np.full(p, 1 - hp.c), theta_hat=0.5,
            sigma2_hat=float(np.var(data.y)),
            frozen=np.zeros(p, dtype=bool))
        frozen_values = {}
        for _ in range(40):
            state = update_mu_batch(state, data, hp)
            state = update_sigma_j_batch(state, data, hp, float(data.n))
            state = update_phi_batch(state, hp)
            state = ssvb.update_theta(state, hp)
            state = update_sigma2_batch(state, data, hp)
            for j in np.flatnonzero(state.frozen):
                if j in frozen_values:
                    assert state.phi[j] == frozen_values[j]
                else:
                    frozen_values[j] = state.phi[j]


class TestUpdateSigma2Batch:
    def test_all_spike_limit(self, rng):
        hp = ssvb.Hyperparameters(nu=2.0, lam=1.0)
        data = _random_data(rng, 30, 5)
        state = _state(5, mu=np.zeros(5), phi=[hp.c] * 5,
                       sigma2_j=np.full(5, 1e-12))
        out = ssvb.update_sigma2_batch(state, data, hp)
        want = (data.y @ data.y + 2.0) / (30 + 2 + 2)
        assert abs(out.sigma2_hat - want) < 30 * hp.c * want

    def test_naive_summation_oracle(self, rng):
        hp = ssvb.Hyperparameters(v1=0.6, nu=1.1, lam=1.7)
        data = _random_data(rng, 30, 6)
        state = _state(6, mu=rng.standard_normal(6),
                       phi=rng.uniform(0.1, 0.9, 6),
                       sigma2_j=rng.uniform(0.01, 0.2, 6))
        out = ssvb.update_sigma2_batch(state, data, hp,
                                       extra_slab_term=True,
                                       denominator="product")
        n, shrink = 30, 1.0 / hp.v1
        resid = data.y - data.X @ (state.phi * state.mu)
        num = float(resid @ resid)
        for j in range(6):
            num += ((n * (1 - state.phi[j]) + shrink)
                    * state.phi[j] * state.mu[j] ** 2)
            num += (n + shrink) * state.phi[j] * state.sigma2_j[j]
            num += shrink * state.phi[j] * (state.mu[j] ** 2
                                            + state.sigma2_j[j])
        num += hp.nu * hp.lam
        den = n + float(np.prod(state.phi)) + hp.nu + 2.0
        assert abs(out.sigma2_hat - num / den) < 1e-10 * (num / den)

    def test_dropping_extra_term_matches_componentwise(self, rng):
        hp = ssvb.Hyperparameters(v1=0.9)
        data = _random_data(rng, 25, 4)
        state = _state(4, mu=rng.standard_normal(4),
                       phi=rng.uniform(0.2, 0.8, 4),
                       sigma2_j=rng.uniform(0.01, 0.1, 4))
        a = ssvb.update_sigma2_batch(state, data, hp, extra_slab_term=False,
                                     denominator="product")
        b = ssvb.update_sigma2_map(state, data, hp, denominator="product")
        assert abs(a.sigma2_hat - b.sigma2_hat) < 1e-14


class TestFitBatch:
    def test_noiseless_orthogonal_one_step_bounds(self):
        # noiseless orthogonal data gives exactly zero noise logits up to
        # the -0.5 log(v1 n + 1) penalty, so the first update pins every
        # coordinate at a truncation bound once v1 n is large enough for
        # the penalty to clear logit(1/c); the second iteration then sees
        # no entropy change and stops.
        rng = np.random.default_rng(4)
        n, p = 200, 6
        X = ssvb.make_orthogonal_design(n, p, rng)
        beta = np.array([2.0, -1.5, 1.3, 0.0, 0.0, 0.0])
        y = X @ beta
        data = ssvb.StandardizedDataset(
            y=y - y.mean(), X=X, n=n, p=p, y_mean=float(y.mean()),
            col_means=np.zeros(p), col_scales=np.ones(p))
        hp = ssvb.Hyperparameters(v1=1e4)
        assert 0.5 * np.log(hp.v1 * n + 1) > np.log((1 - hp.c) / hp.c)
        fit = ssvb.fit_batch(data, hp, BatchConfig(track_elbo=False))
        assert fit.iterations <= 2
        assert fit.converged
        assert np.all(fit.state.phi[:3] == 1 - hp.c)
        assert np.all(fit.state.phi[3:] == hp.c)
        assert np.all(fit.state.frozen)

    def test_selects_example1_truth(self, example1_data):
        data, _, _ = example1_data
        fit = ssvb.fit_batch(data, ssvb.Hyperparameters(v1=1.0))
        assert fit.selected == frozenset({0, 1, 4})
        assert fit.converged

    def test_update_orders_both_converge(self, example1_data):
        data, _, _ = example1_data
        hp = ssvb.Hyperparameters(v1=1.0)
        for order in ("mu_first", "variance_first"):
            fit = ssvb.fit_batch(data, hp, BatchConfig(
                update_order=order, track_elbo=False))
            assert fit.converged
            assert fit.selected == frozenset({0, 1, 4})

    def test_fixed_sigma2_is_pinned(self, example1_data):
        data, _, _ = example1_data
        fit = ssvb.fit_batch(data, ssvb.Hyperparameters(v1=1.0),
                             BatchConfig(fixed_sigma2=1.23,
                                         track_elbo=False))
        assert fit.state.sigma2_hat == 1.23

    def test_bit_identical_reruns(self, example1_data):
        data, _, _ = example1_data
        hp = ssvb.Hyperparameters(v1=0.5)
        a = ssvb.fit_batch(data, hp)
        b = ssvb.fit_batch(data, hp)
        assert np.array_equal(a.state.mu, b.state.mu)
        assert np.array_equal(a.state.phi, b.state.phi)
        assert np.array_equal(a.elbo_trace, b.elbo_trace)

    def test_permutation_equivariance(self):
        raw, _, _ = ssvb.gen_example1(200, 1.0, 3)
        data = ssvb.standardize(raw)
        hp = ssvb.Hyperparameters(v1=1.0)
        cfg = BatchConfig(entropy_tol=1e-10, max_iters=500,
                          track_elbo=False)
        fit = ssvb.fit_batch(data, hp, cfg)
        rng = np.random.default_rng(0)
        perm = rng.permutation(8)
        data_p = ssvb.StandardizedDataset(
            y=data.y, X=data.X[:, perm], n=data.n, p=8,
            y_mean=data.y_mean, col_means=data.col_means[perm],
            col_scales=data.col_scales[perm])
        fit_p = ssvb.fit_batch(data_p, hp, cfg)
        np.testing.assert_allclose(fit_p.state.phi, fit.state.phi[perm],
                                   atol=1e-8)
        np.testing.assert_allclose(fit_p.state.mu, fit.state.mu[perm],
                                   atol=1e-8)
