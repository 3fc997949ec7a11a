import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from ncvaic.errors import ConditioningError, DomainError
from ncvaic.glm import (BERNOULLI, GAUSSIAN, POISSON, Dataset, conditional_score, get_family,
                        log_likelihood, observed_information, partition_information, score)

from conftest import FAMILIES, central_diff, random_dataset


def d(y, X):
    return Dataset(np.array(y, dtype=float), np.array(X, dtype=float))


class TestFamily:
    @pytest.mark.parametrize("fam", FAMILIES, ids=lambda f: f.kind)
    def test_derivatives_of_cumulant(self, fam):
        theta = np.linspace(-4, 4, 41)
        h = 1e-5
        da = (fam.cumulant(theta + h) - fam.cumulant(theta - h)) / (2 * h)
        dm = (fam.mean(theta + h) - fam.mean(theta - h)) / (2 * h)
        np.testing.assert_allclose(fam.mean(theta), da, rtol=1e-6, atol=1e-6)
        np.testing.assert_allclose(fam.variance(theta), dm, rtol=1e-6, atol=1e-6)
        assert np.all(fam.variance(theta) > 0)

    def test_lookup(self):
        assert get_family("gaussian") is GAUSSIAN
        assert get_family("bernoulli_logit") is BERNOULLI
        with pytest.raises(ValueError):
            get_family("gamma")


class TestDataset:
    def test_invariants(self):
        with pytest.raises(ValueError):
            Dataset(np.array([1.0, np.nan]), np.ones((2, 1)))
        with pytest.raises(ValueError):
            Dataset(np.array([1.0]), np.ones((2, 1)))
        with pytest.raises(ValueError):
            Dataset(np.array([1.0]), np.array([[2e6]]))
        Dataset(np.array([1.0]), np.array([[2e6]]), x_max=1e7)

    def test_response_validation(self):
        with pytest.raises(DomainError):
            d([0.5], [[1]]).validate_for(BERNOULLI)
        with pytest.raises(DomainError):
            d([1.5], [[1]]).validate_for(POISSON)
        d([2.0], [[1]]).validate_for(POISSON)


class TestLogLikelihood:
    def test_gaussian_base_measure(self):
        assert log_likelihood([0.0], d([0], [[1]]), GAUSSIAN) == pytest.approx(-0.9189385, abs=1e-7)

    def test_bernoulli(self):
        assert log_likelihood([0.0], d([1], [[1]]), BERNOULLI) == pytest.approx(-math.log(2), abs=1e-12)

    def test_poisson_against_scipy(self):
        data = d([1, 2], [[1], [1]])
        expected = (0.5 - math.exp(0.5)) + (1.0 - math.exp(0.5) - math.log(2))
        ref = stats.poisson.logpmf([1, 2], math.exp(0.5)).sum()
        assert expected == pytest.approx(ref, abs=1e-12)
        assert log_likelihood([0.5], data, POISSON) == pytest.approx(expected, abs=1e-12)

    def test_gaussian_against_scipy(self, rng):
        data, beta = random_dataset(rng, GAUSSIAN)
        ref = stats.norm.logpdf(data.y, loc=data.X @ beta).sum()
        assert log_likelihood(beta, data, GAUSSIAN) == pytest.approx(ref, rel=1e-12)

    def test_domain_error_not_nan(self):
        with pytest.raises(DomainError):
            log_likelihood([800.0], d([1], [[1]]), POISSON)
        with pytest.raises(DomainError):
            score([np.inf], d([1], [[1]]), GAUSSIAN)


class TestScore:
    def test_examples(self):
        np.testing.assert_allclose(score([0, 0], d([1, 1], np.eye(2)), GAUSSIAN), [1, 1])
        np.testing.assert_allclose(score([0], d([1], [[2]]), BERNOULLI), [1.0])

    @pytest.mark.parametrize("fam", FAMILIES, ids=lambda f: f.kind)
    def test_zero_at_mle(self, fam, rng):
        from ncvaic.solver import newton_mle

        data, _ = random_dataset(rng, fam, n=200)
        beta = newton_mle(data, fam)
        assert np.max(np.abs(score(beta, data, fam))) < 1e-8


class TestInformation:
    def test_examples(self):
        np.testing.assert_allclose(observed_information([3, -1], d([0, 0], np.eye(2)), GAUSSIAN),
                                   0.5 * np.eye(2))
        np.testing.assert_allclose(observed_information([0], d([1], [[1]]), BERNOULLI), [[0.25]])
        np.testing.assert_allclose(observed_information([0.1], d([1], [[2]]), POISSON),
                                   [[4 * math.exp(0.2)]], rtol=1e-14)


@pytest.mark.parametrize("fam", FAMILIES, ids=lambda f: f.kind)
def test_concavity(fam, rng):
    data, _ = random_dataset(rng, fam)
    for _ in range(50):
        b1, b2 = rng.normal(size=(2, data.p))
        t = rng.uniform(0.01, 0.99)
        lhs = log_likelihood(t * b1 + (1 - t) * b2, data, fam)
        rhs = t * log_likelihood(b1, data, fam) + (1 - t) * log_likelihood(b2, data, fam)
        assert lhs >= rhs - 1e-10


class TestPartition:
    def test_identity(self):
        blocks = partition_information(np.eye(4), [2, 3])
        np.testing.assert_array_equal(blocks.J_cond, np.eye(2))
        assert blocks.inactive == (0, 1)

    def test_two_by_two(self):
        blocks = partition_information([[2, 1], [1, 2]], [1])
        np.testing.assert_allclose(blocks.J_cond, [[1.5]])

    def test_edge_sets(self):
        J = np.array([[2.0, 1.0], [1.0, 2.0]])
        assert partition_information(J, [0, 1]).J_cond.shape == (0, 0)
        np.testing.assert_array_equal(partition_information(J, []).J_cond, J)

    def test_singular_block(self):
        J = np.array([[1.0, 0, 0], [0, 1, 1], [0, 1, 1]])
        with pytest.raises(ConditioningError) as info:
            partition_information(J, [1, 2])
        assert info.value.rcond is not None and info.value.rcond < 1e-12

    def test_random_psd_dual_route(self, rng):
        A = rng.normal(size=(6, 9))
        J = A @ A.T
        blocks = partition_information(J, [0, 1, 2])
        # Independent route: the (1,1) block of J^-1 is the inverse Schur complement.
        inv = np.linalg.inv(J)
        np.testing.assert_allclose(blocks.J_cond, np.linalg.inv(inv[3:, 3:]), atol=1e-10, rtol=0)
        assert np.min(np.linalg.eigvalsh(blocks.J_cond)) >= -1e-12

    @settings(max_examples=50, deadline=None)
    @given(st.integers(min_value=2, max_value=7), st.integers(min_value=0, max_value=2**31 - 1))
    def test_schur_identity(self, p, seed):
        r = np.random.default_rng(seed)
        A = r.normal(size=(p, p + 2))
        J = A @ A.T + 0.1 * np.eye(p)
        k = int(r.integers(1, p))
        active = sorted(r.choice(p, size=k, replace=False).tolist())
        blocks = partition_information(J, active)
        inact = list(blocks.inactive)
        ref = np.linalg.inv(np.linalg.inv(J)[np.ix_(inact, inact)])
        scale = np.max(np.abs(J))
        np.testing.assert_allclose(blocks.J_cond, ref, atol=1e-9 * scale, rtol=0)


class TestConditionalScore:
    def test_identity(self):
        blocks = partition_information(np.eye(3), [2])
        np.testing.assert_array_equal(conditional_score([1.0, -2.0, 5.0], blocks), [1.0, -2.0])

    def test_hand(self):
        blocks = partition_information([[2, 1], [1, 2]], [1])
        np.testing.assert_allclose(conditional_score([1.0, 1.0], blocks), [0.5])

    def test_dense_dual_route(self, rng):
        A = rng.normal(size=(5, 7))
        J = A @ A.T
        s = rng.normal(size=5)
        blocks = partition_information(J, [1, 4])
        i, a = [0, 2, 3], [1, 4]
        ref = s[i] - J[np.ix_(i, a)] @ np.linalg.inv(J[np.ix_(a, a)]) @ s[a]
        np.testing.assert_allclose(conditional_score(s, blocks), ref, atol=1e-10, rtol=0)
        S = rng.normal(size=(4, 5))
        batch = conditional_score(S, blocks)
        for k in range(4):
            np.testing.assert_allclose(batch[k], conditional_score(S[k], blocks), atol=1e-12)


def test_gradient_and_hessian_consistency():
    # Shortened version; the full 100-instance sweep lives in the acceptance module.
    r = np.random.default_rng(5)
    for fam in FAMILIES:
        for _ in range(10):
            data, beta = random_dataset(r, fam)
            g = score(beta, data, fam)
            fd = central_diff(lambda b: log_likelihood(b, data, fam), beta)
            assert np.max(np.abs(g - fd)) / (1 + np.max(np.abs(g))) < 1e-5
            Jfd = central_diff(lambda b: score(b, data, fam), beta) / (-data.n)
            assert np.max(np.abs(observed_information(beta, data, fam) - Jfd)) < 1e-4
