"""Low-rank-plus-diagonal Gaussian vs dense oracles.

The implementation computes densities through the Woodbury identity and
determinant lemma; the oracle here rebuilds the dense covariance and uses
a Cholesky factorisation, so the two routes are independent.
"""

import math

import numpy as np
import pytest
import scipy.linalg

import marllab.diffmath as dm
from marllab.distributions import (
    CovarianceError,
    DiagonalGaussian,
    LowRankGaussian,
    diag_log_prob_graph,
    diag_log_prob_np,
    lowrank_entropy_graph,
    lowrank_entropy_np,
    lowrank_log_prob_graph,
    lowrank_log_prob_np,
    sample_graph,
)

LOG_2PI = math.log(2 * math.pi)


def dense_log_prob_oracle(dist: LowRankGaussian, x: np.ndarray) -> float:
    cov = dist.dense_covariance()
    chol = scipy.linalg.cho_factor(cov, lower=True)
    d = np.asarray(x, dtype=np.float64) - dist.mean
    quad = d @ scipy.linalg.cho_solve(chol, d)
    logdet = 2.0 * np.sum(np.log(np.diag(chol[0])))
    return float(-0.5 * (dist.dim * LOG_2PI + logdet + quad))


def dense_entropy_oracle(dist: LowRankGaussian) -> float:
    sign, logdet = np.linalg.slogdet(dist.dense_covariance())
    assert sign > 0
    return float(0.5 * (dist.dim * (LOG_2PI + 1.0) + logdet))


def random_dist(rng, nd, m, jitter=1e-6) -> LowRankGaussian:
    return LowRankGaussian(rng.normal(size=nd),
                           rng.uniform(0.3, 2.0, nd),
                           rng.normal(size=(nd, m)), jitter)


# -- worked examples ---------------------------------------------------------

def test_standard_normal_at_mean():
    d = LowRankGaussian(np.zeros(2), np.ones(2), np.zeros((2, 1)), 0.0)
    assert d.log_prob(np.zeros(2)) == pytest.approx(-math.log(2 * math.pi))


def test_coupled_log_prob_at_mean():
    d = LowRankGaussian(np.zeros(2), np.ones(2), np.array([[1.0], [1.0]]), 0.0)
    # |Sigma| = 3 for [[2,1],[1,2]]
    assert d.log_prob(np.zeros(2)) == pytest.approx(-0.5 * math.log((2 * math.pi) ** 2 * 3))


def test_entropy_examples():
    d = LowRankGaussian(np.zeros(2), np.ones(2), np.zeros((2, 1)), 0.0)
    assert d.entropy() == pytest.approx(math.log(2 * math.pi * math.e))
    d2 = LowRankGaussian(np.zeros(2), np.ones(2), np.array([[1.0], [1.0]]), 0.0)
    assert d2.entropy() == pytest.approx(math.log(2 * math.pi * math.e)
                                         + 0.5 * math.log(3.0))


def test_entropy_std_doubling_adds_nd_log2():
    rng = np.random.default_rng(0)
    nd = 5
    std = rng.uniform(0.5, 1.5, nd)
    zero = np.zeros((nd, 1))
    base = LowRankGaussian(np.zeros(nd), std, zero, 0.0).entropy()
    doubled = LowRankGaussian(np.zeros(nd), 2 * std, zero, 0.0).entropy()
    assert doubled - base == pytest.approx(nd * math.log(2.0))


def test_sample_reparameterisation():
    d = LowRankGaussian(np.zeros(2), np.ones(2), np.array([[1.0], [1.0]]), 0.0)
    out = d.sample(np.array([1.0, -1.0]), np.array([2.0]))
    assert out == pytest.approx([3.0, 1.0])
    assert d.sample(np.zeros(2), np.zeros(1)) == pytest.approx([0.0, 0.0])


def test_zero_factor_reduces_to_individual_noise():
    rng = np.random.default_rng(1)
    mean = rng.normal(size=3)
    d = LowRankGaussian(mean, np.ones(3), np.zeros((3, 2)), 0.0)
    eps = rng.normal(size=3)
    assert d.sample(eps, np.zeros(2)) == pytest.approx(mean + eps)


def test_dense_covariance_formula():
    d = LowRankGaussian(np.zeros(2), np.ones(2), np.array([[1.0], [1.0]]), 0.0)
    assert np.allclose(d.dense_covariance(), [[2.0, 1.0], [1.0, 2.0]])
    d2 = LowRankGaussian(np.zeros(2), np.ones(2), np.zeros((2, 1)), 1e-6)
    assert np.allclose(d2.dense_covariance(), np.eye(2) * (1.0 + 1e-6))


def test_log_prob_decreases_along_eigenvector():
    rng = np.random.default_rng(2)
    d = random_dist(rng, 4, 2)
    vals, vecs = np.linalg.eigh(d.dense_covariance())
    v = vecs[:, 0]
    lps = [d.log_prob(d.mean + t * v) for t in (0.0, 0.5, 1.5, 4.0, 9.0)]
    assert all(b < a for a, b in zip(lps, lps[1:]))


# -- oracle agreement --------------------------------------------------------

def test_log_prob_and_entropy_match_dense_oracle_1000_cases():
    rng = np.random.default_rng(42)
    for _ in range(1000):
        nd = int(rng.integers(1, 9))
        m = int(rng.integers(1, min(3, nd) + 1))
        d = random_dist(rng, nd, m, jitter=float(rng.choice([0.0, 1e-6, 1e-3])))
        x = d.mean + rng.normal(size=nd) * 2.0
        got = d.log_prob(x)
        ref = dense_log_prob_oracle(d, x)
        assert abs(got - ref) / (abs(ref) + 1e-12) < 1e-8
        gh = d.entropy()
        rh = dense_entropy_oracle(d)
        assert abs(gh - rh) / (abs(rh) + 1e-12) < 1e-8


def test_empirical_covariance_of_samples():
    # bounded regime matching the artifact: factor entries in [-1, 1]
    rng = np.random.default_rng(3)
    d = LowRankGaussian(rng.normal(size=4), rng.uniform(0.3, 1.2, 4),
                        rng.uniform(-1.0, 1.0, (4, 2)), 1e-6)
    n = 100_000
    eps_n = rng.standard_normal((n, 4))
    eps_m = rng.standard_normal((n, 2))
    samples = d.mean + d.diag_std * eps_n + eps_m @ d.factor.T
    emp = np.cov(samples.T, bias=True)
    assert np.abs(emp - d.dense_covariance()).max() < 0.05


def test_independence_limit_matches_diagonal_sum():
    rng = np.random.default_rng(4)
    nd = 5
    mean = rng.normal(size=nd)
    std = rng.uniform(0.4, 1.6, nd)
    d = LowRankGaussian(mean, std, np.zeros((nd, 2)), 0.0)
    x = rng.normal(size=nd)
    per_dim = sum(DiagonalGaussian(mean[i:i + 1], std[i:i + 1]).log_prob(x[i:i + 1])
                  for i in range(nd))
    assert d.log_prob(x) == pytest.approx(per_dim, rel=1e-12)


def test_non_pd_covariance_raises():
    d = LowRankGaussian(np.zeros(2), np.array([1.0, 0.0]), np.zeros((2, 1)), 0.0)
    with pytest.raises(CovarianceError):
        d.log_prob(np.zeros(2))
    with pytest.raises(CovarianceError):
        d.entropy()
    with pytest.raises(CovarianceError):
        DiagonalGaussian(np.zeros(2), np.array([1.0, -1.0]))


def test_batched_numpy_paths_match_class():
    rng = np.random.default_rng(5)
    B, nd, m = 16, 6, 3
    mean = rng.normal(size=(B, nd))
    std = rng.uniform(0.3, 2.0, (B, nd))
    factor = rng.normal(size=(B, nd, m))
    x = rng.normal(size=(B, nd))
    got = lowrank_log_prob_np(mean, std, factor, 1e-6, x)
    ref = [LowRankGaussian(mean[i], std[i], factor[i], 1e-6).log_prob(x[i])
           for i in range(B)]
    assert np.allclose(got, ref, rtol=1e-10)
    goth = lowrank_entropy_np(std, factor, 1e-6)
    refh = [LowRankGaussian(mean[i], std[i], factor[i], 1e-6).entropy()
            for i in range(B)]
    assert np.allclose(goth, refh, rtol=1e-10)
    gd = diag_log_prob_np(mean, std, x)
    refd = [DiagonalGaussian(mean[i], std[i]).log_prob(x[i]) for i in range(B)]
    assert np.allclose(gd, refd, rtol=1e-10)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_graph_paths_match_class_and_gradients(m):
    rng = np.random.default_rng(10 + m)
    B, nd = 5, 4
    mean = rng.normal(size=(B, nd))
    std = rng.uniform(0.4, 1.8, (B, nd))
    factor = rng.normal(size=(B, nd, m))
    x = rng.normal(size=(B, nd))
    jit = 1e-6
    mt, st, Lt = dm.param(mean), dm.param(std), dm.param(factor)

    lp = lowrank_log_prob_graph(mt, st, Lt, jit, dm.const(x))
    ref = [LowRankGaussian(mean[i], std[i], factor[i], jit).log_prob(x[i])
           for i in range(B)]
    assert np.allclose(lp.data, ref, atol=1e-4)
    ent = lowrank_entropy_graph(st, Lt, jit)
    refh = [LowRankGaussian(mean[i], std[i], factor[i], jit).entropy()
            for i in range(B)]
    assert np.allclose(ent.data, refh, atol=1e-4)

    def f_lp():
        return dm.tmean(lowrank_log_prob_graph(mt, st, Lt, jit, dm.const(x)))

    def f_ent():
        return dm.tmean(lowrank_entropy_graph(st, Lt, jit))

    assert dm.finite_difference_check(f_lp, [mt, st, Lt], h=1e-4) < 1e-3
    assert dm.finite_difference_check(f_ent, [st, Lt], h=1e-4) < 1e-3


def test_graph_sample_and_diag_log_prob():
    rng = np.random.default_rng(8)
    B, nd = 4, 3
    mean = rng.normal(size=(B, nd))
    std = rng.uniform(0.5, 1.5, (B, nd))
    x = rng.normal(size=(B, nd))
    mt, st = dm.param(mean), dm.param(std)
    lp = diag_log_prob_graph(mt, st, dm.const(x))
    ref = diag_log_prob_np(mean, std, x)
    assert np.allclose(lp.data, ref, atol=1e-5)
    eps_n = rng.standard_normal((B, nd)).astype(np.float32)
    u = sample_graph(mt, st, None, eps_n, None)
    assert np.allclose(u.data, mean + std * eps_n, atol=1e-5)

    def f():
        return dm.tmean(diag_log_prob_graph(mt, st, dm.const(x)))

    assert dm.finite_difference_check(f, [mt, st], h=1e-3) < 1e-3


def test_factor_rank_cap_on_graph_path():
    rng = np.random.default_rng(9)
    B, nd, m = 2, 6, 4
    mt = dm.param(rng.normal(size=(B, nd)))
    st = dm.param(rng.uniform(0.5, 1.0, (B, nd)))
    Lt = dm.param(rng.normal(size=(B, nd, m)))
    with pytest.raises(NotImplementedError):
        lowrank_log_prob_graph(mt, st, Lt, 0.0, dm.const(rng.normal(size=(B, nd))))
