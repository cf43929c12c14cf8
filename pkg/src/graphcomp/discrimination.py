"""Decide whether a graph's edges are homophily- or heterophily-prone.

The test compares cosine similarities of connected node pairs with those of
uniformly sampled pairs using the two-sample Kolmogorov-Smirnov statistic.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .exceptions import ValidationError
from .graph import Graph
from .validation import check_fitted, check_graph

HOMOPHILY_PRONE = "homophily-prone"
HETEROPHILY_PRONE = "heterophily-prone"
VERDICTS = (HOMOPHILY_PRONE, HETEROPHILY_PRONE)


@dataclass(frozen=True)
class Csd:
    values: np.ndarray
    source: str  # "connected" | "random"

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class DiscriminationReport:
    ks_samples: list
    ks_mean: float
    threshold: float
    verdict: str

    def to_dict(self) -> dict:
        return asdict(self)


def cosine_similarity(x_i, x_j) -> float:
    x_i = np.asarray(x_i, dtype=np.float64)
    x_j = np.asarray(x_j, dtype=np.float64)
    if x_i.shape != x_j.shape:
        raise ValidationError(f"feature length mismatch: {x_i.shape} vs {x_j.shape}")
    ni, nj = np.linalg.norm(x_i), np.linalg.norm(x_j)
    if ni == 0.0 or nj == 0.0:
        return 0.0
    return float(np.clip(x_i @ x_j / (ni * nj), -1.0, 1.0))


def pair_cosines(x: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Vectorized cosine similarity for the pairs ``(rows[k], cols[k])``; zero-norm rows give 0."""
    norms = np.linalg.norm(x, axis=1)
    safe = np.where(norms == 0.0, 1.0, norms)
    xn = x / safe[:, None]
    vals = np.einsum("ij,ij->i", xn[rows], xn[cols])
    return np.clip(vals, -1.0, 1.0)


#: cosine keys are rounded to this many decimals before ranking so that
#: mathematically tied similarities tie exactly and fall back to node id order
TIE_DECIMALS = 12


def tie_key(sim):
    return np.round(np.asarray(sim, dtype=np.float64), TIE_DECIMALS)


def connected_csd(g: Graph) -> Csd:
    if g.n_edges == 0:
        raise ValidationError("graph has no edges")
    return Csd(pair_cosines(g.features, g.edges[:, 0], g.edges[:, 1]), "connected")


def sample_pairs(n_nodes: int, n_pairs: int, seed: int):
    """Uniform ordered pairs ``(i, j)`` with ``i != j``, drawn with replacement."""
    if n_nodes < 2:
        raise ValidationError("need at least two nodes to sample pairs")
    rng = np.random.default_rng(seed)
    i = rng.integers(0, n_nodes, size=n_pairs)
    j = rng.integers(0, n_nodes - 1, size=n_pairs)
    j = j + (j >= i)
    return i, j


def random_csd(g: Graph, seed: int) -> Csd:
    i, j = sample_pairs(g.n_nodes, g.n_edges, seed)
    return Csd(pair_cosines(g.features, i, j), "random")


def ks_statistic(d1, d2) -> float:
    """Two-sample KS statistic: sup over x of |F1(x) - F2(x)| for the empirical CDFs."""
    a = np.sort(np.asarray(getattr(d1, "values", d1), dtype=np.float64))
    b = np.sort(np.asarray(getattr(d2, "values", d2), dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise ValidationError("KS statistic needs two nonempty samples")
    pooled = np.concatenate([a, b])
    fa = np.searchsorted(a, pooled, side="right") / a.size
    fb = np.searchsorted(b, pooled, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def discriminate(g: Graph, n_resamples: int = 10, threshold: float = 0.2, seed: int = 0) -> DiscriminationReport:
    if n_resamples < 1:
        raise ValidationError("n_resamples must be >= 1")
    d1 = connected_csd(g)
    ks = [ks_statistic(d1, random_csd(g, seed + r)) for r in range(n_resamples)]
    ks_mean = float(np.mean(ks))
    verdict = HOMOPHILY_PRONE if ks_mean > threshold else HETEROPHILY_PRONE
    return DiscriminationReport(ks_samples=ks, ks_mean=ks_mean, threshold=float(threshold), verdict=verdict)


class GraphDiscriminator(BaseEstimator):
    """Estimator wrapper around :func:`discriminate`.

    After ``fit(g)``, ``verdict_`` holds the decision and ``report_`` the full
    :class:`DiscriminationReport`.
    """

    def __init__(self, n_resamples=10, threshold=0.2, random_state=0):
        self.n_resamples = n_resamples
        self.threshold = threshold
        self.random_state = random_state

    def fit(self, g, y=None):
        check_graph(g, min_edges=1)
        self.report_ = discriminate(g, self.n_resamples, self.threshold, int(self.random_state))
        self.ks_mean_ = self.report_.ks_mean
        self.verdict_ = self.report_.verdict
        return self

    def predict(self, g):
        check_fitted(self, "report_")
        check_graph(g, min_edges=1)
        return discriminate(g, self.n_resamples, self.threshold, int(self.random_state)).verdict
