"""Ranking parameters, pairwise concordance weights, and the smoothed
concordance measure D with its gradient.

All pair sums run over vectorized n x n arrays; the n^2 x p difference
operator is never materialized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .data_model import ExternalRanks, StandardizedDesign
from .errors import DegenerateWeights, DimensionMismatch

SPEARMAN = "spearman"
KENDALL = "kendall"


@dataclass(frozen=True)
class ConcordanceSpec:
    """Choice of association measure and smoothing for the rank penalty."""

    measure: str = SPEARMAN
    marginalized: bool = False
    nu: float = 0.1
    samples: int = 20          # marginalization sample count S
    seed: int = 0

    def __post_init__(self):
        if self.measure not in (SPEARMAN, KENDALL):
            raise ValueError(f"unknown measure {self.measure!r}")
        if not self.nu > 0:
            raise ValueError("nu must be positive")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")


@dataclass(frozen=True)
class PairWeights:
    """Fixed nonnegative pairwise weights w_ij for the concordance sum.

    For marginalized measures, ``tables`` holds the S sampled design tables
    and each pair term is weighted by w_ij / S.
    """

    w: np.ndarray                           # (n, n), nonnegative
    measure: str
    tables: tuple[np.ndarray, ...] | None = None

    @property
    def n(self):
        return self.w.shape[0]

    @property
    def total(self):
        return float(self.w.sum())

    def literal(self, ranks: ExternalRanks) -> np.ndarray:
        """Paper-literal weights (diagnostic only): the Kendall form admits
        negative entries and the marginalized Spearman form a sign flip."""
        n = ranks.n
        if self.measure == KENDALL:
            r = ranks.r
            return (2.0 * (r[:, None] > r[None, :]) - 1.0) / (n * (n - 1))
        return ranks.r[:, None] / (4.0 * n * n) * np.ones((1, n))


def _linear_predictor(x, beta):
    if isinstance(x, StandardizedDesign):
        x = x.x
    beta = np.asarray(beta, dtype=float)
    if x.shape[1] != beta.shape[0]:
        raise DimensionMismatch(f"design has {x.shape[1]} columns, beta has {beta.shape[0]}")
    if not np.all(np.isfinite(beta)):
        raise ValueError("beta contains non-finite values")
    return np.asarray(x) @ beta


def exact_rank_params(x, beta) -> np.ndarray:
    """Exact ranking parameters: psi_i = #{j : (x_i - x_j)' beta >= 0}.

    The diagonal term is included, so psi_i >= 1; beta = 0 gives psi_i = n.
    """
    eta = _linear_predictor(x, beta)
    return (eta[:, None] >= eta[None, :]).sum(axis=1).astype(np.int64)


def smooth_rank_params(x, beta, nu) -> np.ndarray:
    """Smoothed ranking parameters with the logistic kernel of scale nu.

    The diagonal contributes exactly 1/2, so each value lies in (0, n).
    """
    if not nu > 0:
        raise ValueError("nu must be positive")
    eta = _linear_predictor(x, beta)
    u = (eta[:, None] - eta[None, :]) / nu
    return expit(u).sum(axis=1)


def pair_weights(ranks: ExternalRanks, measure: str) -> PairWeights:
    """Pairwise weights for the chosen association measure.

    Spearman: w_ij = r_i / (4 n^2), constant in j. Kendall: the nonnegative
    convention w_ij = 2 I(r_i > r_j) / (n (n - 1)), which differs from the
    signed form only by a beta-independent additive constant in D and keeps
    every weight valid for the quasi-probability construction.
    """
    n = ranks.n
    r = ranks.r.astype(float)
    if measure == SPEARMAN:
        w = np.repeat(r[:, None] / (4.0 * n * n), n, axis=1)
    elif measure == KENDALL:
        w = 2.0 * (r[:, None] > r[None, :]) / (n * (n - 1.0))
    else:
        raise ValueError(f"unknown measure {measure!r}")
    return PairWeights(w=w, measure=measure)


def _tables_for(weights: PairWeights, x):
    if isinstance(x, StandardizedDesign):
        x = x.x
    x = np.asarray(x, dtype=float)
    if weights.tables is not None:
        return weights.tables
    return (x,)


def concordance_value(x, beta, nu, weights: PairWeights) -> float:
    """D = sum_ij w_ij g_nu((x_i - x_j)' beta), averaged over sampled tables
    for marginalized weights."""
    if weights.total <= 0.0:
        raise DegenerateWeights("all pairwise weights are zero")
    tables = _tables_for(weights, x)
    total = 0.0
    for xs in tables:
        eta = _linear_predictor(xs, beta)
        u = (eta[:, None] - eta[None, :]) / nu
        total += float(np.sum(weights.w * expit(u)))
    return total / len(tables)


def concordance_gradient(x, beta, nu, weights: PairWeights) -> np.ndarray:
    """Gradient of D with respect to beta."""
    if weights.total <= 0.0:
        raise DegenerateWeights("all pairwise weights are zero")
    tables = _tables_for(weights, x)
    p = np.asarray(beta).shape[0]
    grad = np.zeros(p)
    for xs in tables:
        xs = np.asarray(xs, dtype=float)
        eta = _linear_predictor(xs, beta)
        u = (eta[:, None] - eta[None, :]) / nu
        s = expit(u)
        m = weights.w * s * (1.0 - s)          # w_ij * logistic density at u_ij
        grad += (xs.T @ (m.sum(axis=1) - m.sum(axis=0))) / nu
    return grad / len(tables)


@dataclass(frozen=True)
class MarginalSampler:
    """Gaussian conditional sampler for novel covariates given conventional
    ones, with frozen draws for a deterministic marginalized objective."""

    sigma_bz: np.ndarray                    # (p - q, q) cross-covariance
    cond_cov: np.ndarray                    # (p - q, p - q), eigenvalue-clamped
    samples: int
    seed: int
    tables: tuple[np.ndarray, ...]          # S design tables [Z | B^(s)]


def build_marginal_sampler(z, b, samples, seed) -> MarginalSampler:
    """Estimate b | z ~ N(Sigma_bz z, I - Sigma_bz Sigma_bz') from standardized
    blocks and draw S reproducible design tables.

    The plug-in conditional covariance is symmetrized and its eigenvalues are
    clamped at zero so the sampler stays well-defined when it is indefinite.
    """
    z = np.asarray(z, dtype=float)
    b = np.asarray(b, dtype=float)
    if z.ndim != 2 or b.ndim != 2 or z.shape[0] != b.shape[0]:
        raise DimensionMismatch("z and b must be 2-d with equal row counts")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    n = z.shape[0]
    d = b.shape[1]
    sigma_bz = (b.T @ z) / n
    cond = np.eye(d) - sigma_bz @ sigma_bz.T
    cond = 0.5 * (cond + cond.T)
    evals, evecs = np.linalg.eigh(cond)
    evals = np.clip(evals, 0.0, None)
    root = evecs * np.sqrt(evals)           # cond^{1/2} factor
    cond_clamped = (evecs * evals) @ evecs.T

    rng = np.random.default_rng(seed)
    mean = z @ sigma_bz.T
    tables = []
    for _ in range(samples):
        eps = rng.standard_normal((n, d))
        tables.append(np.hstack([z, mean + eps @ root.T]))
    return MarginalSampler(
        sigma_bz=sigma_bz,
        cond_cov=cond_clamped,
        samples=samples,
        seed=seed,
        tables=tuple(tables),
    )


def marginalized_weights(base: PairWeights, sampler: MarginalSampler) -> PairWeights:
    """Attach the sampler's frozen design tables to a weight set."""
    return PairWeights(w=base.w, measure=base.measure, tables=sampler.tables)
