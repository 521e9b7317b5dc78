"""Joint action distributions: diagonal and low-rank-plus-diagonal Gaussians.

The joint policy's covariance is diag(std^2) + F F^T + jitter*I where F is
the state-conditioned coupling factor (nd x m, m << nd).  Densities and
entropies are computed through the Woodbury identity and the matrix
determinant lemma, so cost is O(nd * m^2) instead of O(nd^3):

    inv(S) = inv(A) - inv(A) F inv(C) F^T inv(A),   A = diag(std^2) + jitter*I
    det(S) = det(A) * det(C),                       C = I_m + F^T inv(A) F

Three routes share that algebra: a float64 single-distribution API used by
evaluation and tests, a vectorised float32 batch path for bootstrap
targets, and a differentiable path built from diffmath primitives for the
policy loss (capacitance solved in closed form, m <= 3).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import diffmath as dm
from .diffmath import Tensor

LOG_2PI = math.log(2.0 * math.pi)

MAX_GRAPH_FACTOR_RANK = 3


class CovarianceError(ValueError):
    """Covariance is not positive definite (or cannot be certified cheaply)."""


@dataclass
class DiagonalGaussian:
    """Independent Gaussian with strictly positive per-dimension stddev."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self) -> None:
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)
        if self.mean.shape != self.std.shape:
            raise ValueError("mean/std length mismatch")
        if np.any(self.std <= 0.0):
            raise CovarianceError("stddev must be strictly positive")

    def sample(self, eps: np.ndarray) -> np.ndarray:
        eps = np.asarray(eps, dtype=np.float64)
        if eps.shape != self.mean.shape:
            raise ValueError("noise length mismatch")
        return self.mean + self.std * eps

    def log_prob(self, x: np.ndarray) -> float:
        z = (np.asarray(x, dtype=np.float64) - self.mean) / self.std
        return float(-0.5 * np.sum(z * z) - np.sum(np.log(self.std))
                     - 0.5 * self.mean.size * LOG_2PI)

    def entropy(self) -> float:
        return float(0.5 * self.mean.size * (LOG_2PI + 1.0)
                     + np.sum(np.log(self.std)))


@dataclass
class LowRankGaussian:
    """Joint Gaussian with covariance diag(diag_std^2) + factor factor^T + jitter*I."""

    mean: np.ndarray
    diag_std: np.ndarray
    factor: np.ndarray
    jitter: float = 0.0

    def __post_init__(self) -> None:
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.diag_std = np.asarray(self.diag_std, dtype=np.float64)
        self.factor = np.asarray(self.factor, dtype=np.float64)
        nd = self.mean.size
        if self.diag_std.shape != (nd,):
            raise ValueError("diag_std length mismatch")
        if self.factor.ndim != 2 or self.factor.shape[0] != nd:
            raise ValueError(f"factor must be ({nd}, m)")
        if self.factor.shape[1] > nd:
            raise ValueError("factor rank m must not exceed nd")
        if self.jitter < 0.0:
            raise CovarianceError("jitter must be nonnegative")

    @property
    def dim(self) -> int:
        return self.mean.size

    @property
    def rank(self) -> int:
        return self.factor.shape[1]

    def _diag_a(self) -> np.ndarray:
        a = self.diag_std * self.diag_std + self.jitter
        if np.any(a <= 0.0):
            raise CovarianceError(
                "covariance not positive definite: zero diagonal with jitter=0")
        return a

    def sample(self, eps_individual: np.ndarray, eps_collab: np.ndarray) -> np.ndarray:
        eps_n = np.asarray(eps_individual, dtype=np.float64)
        eps_m = np.asarray(eps_collab, dtype=np.float64)
        if eps_n.shape != (self.dim,):
            raise ValueError("individual noise length mismatch")
        if eps_m.shape != (self.rank,):
            raise ValueError("collaborative noise length mismatch")
        return self.mean + self.diag_std * eps_n + self.factor @ eps_m

    def log_prob(self, x: np.ndarray) -> float:
        a = self._diag_a()
        d = np.asarray(x, dtype=np.float64) - self.mean
        w = d / a
        g = self.factor / a[:, None]
        cap = np.eye(self.rank) + self.factor.T @ g
        y = self.factor.T @ w
        sign, logdet_cap = np.linalg.slogdet(cap)
        if sign <= 0.0:
            raise CovarianceError("capacitance matrix not positive definite")
        quad = d @ w - y @ np.linalg.solve(cap, y)
        logdet = np.sum(np.log(a)) + logdet_cap
        return float(-0.5 * (self.dim * LOG_2PI + logdet + quad))

    def entropy(self) -> float:
        a = self._diag_a()
        g = self.factor / a[:, None]
        cap = np.eye(self.rank) + self.factor.T @ g
        sign, logdet_cap = np.linalg.slogdet(cap)
        if sign <= 0.0:
            raise CovarianceError("capacitance matrix not positive definite")
        logdet = np.sum(np.log(a)) + logdet_cap
        return float(0.5 * (self.dim * (LOG_2PI + 1.0) + logdet))

    def dense_covariance(self) -> np.ndarray:
        """Explicit nd x nd covariance; test oracle only."""
        nd = self.dim
        return (np.diag(self.diag_std * self.diag_std)
                + self.factor @ self.factor.T
                + self.jitter * np.eye(nd))


# ---------------------------------------------------------------------------
# batched numpy path (no gradients): bootstrap targets, diagnostics


def lowrank_log_prob_np(mean, std, factor, jitter: float, x) -> np.ndarray:
    """Per-row log density; mean/std/x are (B, nd), factor is (B, nd, m)."""
    mean = np.asarray(mean)
    a = std * std + jitter                      # (B, nd)
    if np.any(a <= 0.0):
        raise CovarianceError("covariance not positive definite in batch")
    d = x - mean
    w = d / a
    g = factor / a[:, :, None]                  # (B, nd, m)
    m = factor.shape[-1]
    cap = np.eye(m, dtype=factor.dtype) + np.einsum("bnj,bnk->bjk", factor, g)
    y = np.einsum("bnj,bn->bj", factor, w)
    sign, logdet_cap = np.linalg.slogdet(cap)
    if np.any(sign <= 0.0):
        raise CovarianceError("capacitance matrix not positive definite in batch")
    z = np.linalg.solve(cap, y[..., None])[..., 0]
    quad = np.sum(d * w, axis=1) - np.sum(y * z, axis=1)
    logdet = np.sum(np.log(a), axis=1) + logdet_cap
    nd = mean.shape[1]
    return (-0.5 * (nd * LOG_2PI + logdet + quad)).astype(mean.dtype)


def lowrank_entropy_np(std, factor, jitter: float) -> np.ndarray:
    a = std * std + jitter
    g = factor / a[:, :, None]
    m = factor.shape[-1]
    cap = np.eye(m, dtype=factor.dtype) + np.einsum("bnj,bnk->bjk", factor, g)
    sign, logdet_cap = np.linalg.slogdet(cap)
    if np.any(sign <= 0.0):
        raise CovarianceError("capacitance matrix not positive definite in batch")
    logdet = np.sum(np.log(a), axis=1) + logdet_cap
    nd = std.shape[1]
    return (0.5 * (nd * (LOG_2PI + 1.0) + logdet)).astype(std.dtype)


def diag_log_prob_np(mean, std, x) -> np.ndarray:
    z = (x - mean) / std
    nd = mean.shape[1]
    return (-0.5 * np.sum(z * z, axis=1) - np.sum(np.log(std), axis=1)
            - 0.5 * nd * LOG_2PI).astype(mean.dtype)


# ---------------------------------------------------------------------------
# differentiable path (diffmath graphs over batches)


def sample_graph(mean: Tensor, std: Tensor, factor: Tensor | None,
                 eps_n: np.ndarray, eps_m: np.ndarray | None) -> Tensor:
    """Reparameterised joint sample mean + std*eps_n + factor@eps_m, (B, nd)."""
    u = dm.add(mean, dm.mul(std, dm.const(eps_n)))
    if factor is not None:
        if eps_m is None:
            raise ValueError("collaborative noise required when factor is present")
        coupled = dm.matmul(factor, dm.const(eps_m[:, :, None]))  # (B, nd, 1)
        u = dm.add(u, dm.reshape(coupled, u.shape))
    return u


def _capacitance_quad_logdet(cc: dict, y: list, m: int):
    """Solve quad = y^T C^-1 y and logdet C in closed form for m <= 3.

    cc[(j, k)] are the (B,)-shaped capacitance entries (symmetric); the
    determinant is >= 1 because C = I + PSD, so log/reciprocal are safe.
    """
    if m == 1:
        det = cc[0, 0]
        inv_det = dm.reciprocal_pos(det)
        quad = dm.mul(dm.mul(y[0], y[0]), inv_det)
    elif m == 2:
        det = dm.add(dm.mul(cc[0, 0], cc[1, 1]),
                     dm.mul(dm.mul(cc[0, 1], cc[0, 1]), -1.0))
        inv_det = dm.reciprocal_pos(det)
        num = dm.add(
            dm.add(dm.mul(cc[1, 1], dm.mul(y[0], y[0])),
                   dm.mul(cc[0, 0], dm.mul(y[1], y[1]))),
            dm.mul(dm.mul(cc[0, 1], dm.mul(y[0], y[1])), -2.0))
        quad = dm.mul(num, inv_det)
    elif m == 3:
        # adjugate entries of the symmetric 3x3 capacitance
        a, b, c = cc[0, 0], cc[0, 1], cc[0, 2]
        d, e, f = cc[1, 1], cc[1, 2], cc[2, 2]
        m00 = dm.add(dm.mul(d, f), dm.mul(dm.mul(e, e), -1.0))
        m11 = dm.add(dm.mul(a, f), dm.mul(dm.mul(c, c), -1.0))
        m22 = dm.add(dm.mul(a, d), dm.mul(dm.mul(b, b), -1.0))
        m01 = dm.add(dm.mul(dm.mul(b, f), -1.0), dm.mul(c, e))
        m02 = dm.add(dm.mul(b, e), dm.mul(dm.mul(c, d), -1.0))
        m12 = dm.add(dm.mul(dm.mul(a, e), -1.0), dm.mul(b, c))
        det = dm.add(dm.add(dm.mul(a, m00), dm.mul(b, m01)), dm.mul(c, m02))
        inv_det = dm.reciprocal_pos(det)
        num = dm.add(
            dm.add(dm.add(dm.mul(m00, dm.mul(y[0], y[0])),
                          dm.mul(m11, dm.mul(y[1], y[1]))),
                   dm.mul(m22, dm.mul(y[2], y[2]))),
            dm.mul(dm.add(dm.add(dm.mul(m01, dm.mul(y[0], y[1])),
                                 dm.mul(m02, dm.mul(y[0], y[2]))),
                          dm.mul(m12, dm.mul(y[1], y[2]))), 2.0))
        quad = dm.mul(num, inv_det)
    else:
        raise NotImplementedError(
            f"differentiable path supports factor rank <= {MAX_GRAPH_FACTOR_RANK}")
    return quad, dm.log_(det)


def lowrank_log_prob_graph(mean: Tensor, std: Tensor, factor: Tensor | None,
                           jitter: float, x: Tensor) -> Tensor:
    """Differentiable per-row log density, shape (B,)."""
    nd = mean.shape[1]
    var = dm.add(dm.mul(std, std), jitter)
    inv_a = dm.reciprocal_pos(var)
    d = dm.add(x, dm.mul(mean, -1.0))
    w = dm.mul(d, inv_a)
    quad0 = dm.tsum(dm.mul(d, w), axis=1)
    logdet_a = dm.tsum(dm.log_(var), axis=1)
    if factor is None:
        quad = quad0
        logdet = logdet_a
    else:
        m = factor.shape[2]
        if m > MAX_GRAPH_FACTOR_RANK:
            raise NotImplementedError(
                f"differentiable path supports factor rank <= {MAX_GRAPH_FACTOR_RANK}")
        cols = [dm.tslice(factor, (slice(None), slice(None), j)) for j in range(m)]
        gcols = [dm.mul(col, inv_a) for col in cols]
        y = [dm.tsum(dm.mul(cols[j], w), axis=1) for j in range(m)]
        cc = {}
        for j in range(m):
            for k in range(j, m):
                dot = dm.tsum(dm.mul(cols[j], gcols[k]), axis=1)
                cc[j, k] = dm.add(dot, 1.0) if j == k else dot
        quad_corr, logdet_cap = _capacitance_quad_logdet(cc, y, m)
        quad = dm.add(quad0, dm.mul(quad_corr, -1.0))
        logdet = dm.add(logdet_a, logdet_cap)
    return dm.mul(dm.add(dm.add(logdet, quad), nd * LOG_2PI), -0.5)


def lowrank_entropy_graph(std: Tensor, factor: Tensor | None,
                          jitter: float) -> Tensor:
    """Differentiable per-row entropy, shape (B,)."""
    nd = std.shape[1]
    var = dm.add(dm.mul(std, std), jitter)
    logdet = dm.tsum(dm.log_(var), axis=1)
    if factor is not None:
        m = factor.shape[2]
        if m > MAX_GRAPH_FACTOR_RANK:
            raise NotImplementedError(
                f"differentiable path supports factor rank <= {MAX_GRAPH_FACTOR_RANK}")
        inv_a = dm.reciprocal_pos(var)
        cols = [dm.tslice(factor, (slice(None), slice(None), j)) for j in range(m)]
        gcols = [dm.mul(col, inv_a) for col in cols]
        cc = {}
        for j in range(m):
            for k in range(j, m):
                dot = dm.tsum(dm.mul(cols[j], gcols[k]), axis=1)
                cc[j, k] = dm.add(dot, 1.0) if j == k else dot
        zeros = [dm.mul(cc[0, 0], 0.0)] * m
        _, logdet_cap = _capacitance_quad_logdet(cc, zeros, m)
        logdet = dm.add(logdet, logdet_cap)
    return dm.mul(dm.add(logdet, nd * (LOG_2PI + 1.0)), 0.5)


def diag_log_prob_graph(mean: Tensor, std: Tensor, x: Tensor) -> Tensor:
    """Differentiable independent-Gaussian log density, shape (B,)."""
    nd = mean.shape[1]
    inv_std = dm.reciprocal_pos(std)
    z = dm.mul(dm.add(x, dm.mul(mean, -1.0)), inv_std)
    quad = dm.tsum(dm.mul(z, z), axis=1)
    logdet = dm.mul(dm.tsum(dm.log_(std), axis=1), 2.0)
    return dm.mul(dm.add(dm.add(quad, logdet), nd * LOG_2PI), -0.5)
