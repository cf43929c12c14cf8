"""Complemented graph convolution over a homophily half and a heterophily half.

Each layer propagates with ``M = αI + βÂo − γÂt − δÂtÂo`` (applied as chained
sparse products, the product matrix is never built) followed by a weight
matrix; hidden layers use ReLU and the last layer returns logits.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .discrimination import HOMOPHILY_PRONE
from .exceptions import NumericalError, ValidationError
from .graph import Graph, NormalizedAdjacency, edges_to_adjacency, normalize_adjacency, spmm
from .nn import Adam, accuracy, cross_entropy, softmax, xavier_uniform
from .validation import check_fitted

COEF_RANGE = (0.0, 5.0)
COEFS = ("alpha", "beta", "gamma", "delta")


@dataclass(frozen=True)
class ComplementedGraph:
    a_o: NormalizedAdjacency
    a_t: NormalizedAdjacency
    features: np.ndarray
    labels: np.ndarray
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        n = self.features.shape[0]
        if self.a_o.n_nodes != n or self.a_t.n_nodes != n:
            raise ValidationError("a_o, a_t and features must agree on the node count")
        if self.labels is not None and len(self.labels) != n:
            raise ValidationError("label vector length must equal the node count")
        parts = [np.asarray(s) for s in (self.train, self.val, self.test)]
        allidx = np.concatenate(parts)
        if len(np.unique(allidx)) != len(allidx):
            raise ValidationError("train/val/test splits overlap")
        if allidx.size and (allidx.min() < 0 or allidx.max() >= n):
            raise ValidationError("split contains an out-of-range node id")
        if self.labels is not None and len(allidx) != n:
            raise ValidationError("train/val/test splits must cover every labeled node")

    @property
    def n_nodes(self) -> int:
        return self.features.shape[0]

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1


def assemble_complemented_graph(g: Graph, complement_edges, verdict: str, split) -> ComplementedGraph:
    """Place the original topology and the synthesized half into the homophily /
    heterophily slots according to the discrimination verdict.

    Both halves are normalized separately, without self-loops.
    """
    edges = getattr(complement_edges, "edges", complement_edges)
    orig = normalize_adjacency(g)
    synth = normalize_adjacency(edges_to_adjacency(edges, g.n_nodes))
    if verdict == HOMOPHILY_PRONE:
        a_o = replace(orig, origin="homophily-half")
        a_t = replace(synth, origin="heterophily-half")
    else:
        a_o = replace(synth, origin="homophily-half")
        a_t = replace(orig, origin="heterophily-half")
    train, val, test = (np.asarray(s, dtype=np.int64) for s in split)
    return ComplementedGraph(a_o, a_t, g.features, g.labels, train, val, test)


@dataclass
class CgcParams:
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    delta: float = 1.0
    learnable: bool = False
    layer_weights: list = field(default_factory=list)
    layers: int = 2
    hidden_dim: int = 64

    def __post_init__(self):
        lo, hi = COEF_RANGE
        for name in COEFS:
            v = getattr(self, name)
            if not lo <= v <= hi:
                raise ValidationError(f"{name}={v} outside [{lo}, {hi}]")
        if self.layers < 1:
            raise ValidationError("layers must be >= 1")
        if self.layer_weights and len(self.layer_weights) != self.layers:
            raise ValidationError("number of weight matrices must equal layers")
        for a, b in zip(self.layer_weights[:-1], self.layer_weights[1:]):
            if a.shape[1] != b.shape[0]:
                raise ValidationError("layer weight dims do not chain")

    @classmethod
    def init(cls, n_features: int, n_classes: int, layers: int = 2, hidden_dim: int = 64, seed: int = 0,
             alpha=1.0, beta=1.0, gamma=1.0, delta=1.0, learnable=False) -> "CgcParams":
        rng = np.random.default_rng(seed)
        dims = [n_features] + [hidden_dim] * (layers - 1) + [n_classes]
        ws = [xavier_uniform(rng, a, b) for a, b in zip(dims[:-1], dims[1:])]
        return cls(alpha, beta, gamma, delta, learnable, ws, layers, hidden_dim)

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([self.alpha, self.beta, self.gamma, self.delta], dtype=np.float64)

    def with_coefficients(self, c) -> "CgcParams":
        return replace(self, alpha=float(c[0]), beta=float(c[1]), gamma=float(c[2]), delta=float(c[3]),
                       layer_weights=[w.copy() for w in self.layer_weights])

    def to_dict(self, include_weights: bool = True) -> dict:
        d = {name: float(getattr(self, name)) for name in COEFS}
        d.update(learnable=self.learnable, layers=self.layers, hidden_dim=self.hidden_dim)
        if include_weights:
            d["layer_weights"] = [w.tolist() for w in self.layer_weights]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CgcParams":
        try:
            ws = [np.asarray(w, dtype=np.float64) for w in d.get("layer_weights", [])]
            return cls(float(d["alpha"]), float(d["beta"]), float(d["gamma"]), float(d["delta"]),
                       bool(d["learnable"]), ws, int(d["layers"]), int(d["hidden_dim"]))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed CGC parameter document: {exc}") from exc


class CgcOperator:
    """``M = αI + βÂo − γÂt − δÂtÂo`` as a linear operator."""

    def __init__(self, a_o, a_t, alpha, beta, gamma, delta):
        self.a_o = getattr(a_o, "matrix", a_o)
        self.a_t = getattr(a_t, "matrix", a_t)
        self.alpha, self.beta, self.gamma, self.delta = alpha, beta, gamma, delta

    def terms(self, h):
        """``(ÂoH, ÂtH, Ât(ÂoH))``."""
        ao_h = spmm(self.a_o, h)
        return ao_h, spmm(self.a_t, h), spmm(self.a_t, ao_h)

    def combine(self, h, ao_h, at_h, ato_h):
        return self.alpha * h + self.beta * ao_h - self.gamma * at_h - self.delta * ato_h

    def __matmul__(self, h):
        return self.combine(h, *self.terms(h))

    def rmatmul_t(self, g):
        """``Mᵀ G``; both halves are symmetric so ``(ÂtÂo)ᵀ = ÂoÂt``."""
        at_g = spmm(self.a_t, g)
        return (self.alpha * g + self.beta * spmm(self.a_o, g) - self.gamma * at_g
                - self.delta * spmm(self.a_o, at_g))

    def dense(self) -> np.ndarray:
        n = self.a_o.shape[0]
        return self @ np.eye(n)


def cgc_operator(cg: ComplementedGraph, p: CgcParams) -> CgcOperator:
    return CgcOperator(cg.a_o, cg.a_t, p.alpha, p.beta, p.gamma, p.delta)


def _forward(cg, p: CgcParams, rng=None, dropout: float = 0.0):
    op = cgc_operator(cg, p)
    h = np.asarray(cg.features, dtype=np.float64)
    cache = []
    last = len(p.layer_weights) - 1
    for l, w in enumerate(p.layer_weights):
        if h.shape[1] != w.shape[0]:
            raise ValidationError(f"layer {l}: input width {h.shape[1]} does not match weight {w.shape}")
        mask = None
        if rng is not None and dropout > 0:
            mask = (rng.random(h.shape) >= dropout) / (1.0 - dropout)
            h = h * mask
        terms = op.terms(h)
        prop = op.combine(h, *terms)
        z = prop @ w
        cache.append((h, terms, prop, z, mask))
        h = z if l == last else np.maximum(z, 0.0)
    return h, cache, op


def cgc_forward(cg: ComplementedGraph, p: CgcParams) -> np.ndarray:
    """Logits ``N×C``."""
    return _forward(cg, p)[0]


def cgc_loss_and_grad(cg: ComplementedGraph, p: CgcParams, idx=None, rng=None, dropout: float = 0.0):
    """Mean cross-entropy on ``idx`` (default: train split) with gradients for each
    layer weight and for the four coefficients."""
    idx = cg.train if idx is None else np.asarray(idx)
    logits, cache, op = _forward(cg, p, rng, dropout)
    loss, dz = cross_entropy(logits, cg.labels, idx)
    gw = [None] * len(cache)
    gc = np.zeros(4)
    for l in range(len(cache) - 1, -1, -1):
        h, (ao_h, at_h, ato_h), prop, z, mask = cache[l]
        if l < len(cache) - 1:
            dz = dz * (z > 0)
        gw[l] = prop.T @ dz
        dprop = dz @ p.layer_weights[l].T
        gc += [np.sum(dprop * h), np.sum(dprop * ao_h), -np.sum(dprop * at_h), -np.sum(dprop * ato_h)]
        if l:
            dz = op.rmatmul_t(dprop)
            if mask is not None:
                dz = dz * mask
    return loss, gw, gc


@dataclass
class TrainReport:
    epoch_losses: list
    best_val_accuracy: float
    test_accuracy: float
    final_params: CgcParams
    best_epoch: int = 0

    def to_dict(self, include_weights: bool = False) -> dict:
        return {
            "epoch_losses": [float(v) for v in self.epoch_losses],
            "best_val_accuracy": float(self.best_val_accuracy),
            "test_accuracy": float(self.test_accuracy),
            "best_epoch": int(self.best_epoch),
            "final_params": self.final_params.to_dict(include_weights),
        }


def _copy_params(p: CgcParams, weights, coefs) -> CgcParams:
    return replace(p, alpha=float(coefs[0]), beta=float(coefs[1]), gamma=float(coefs[2]),
                   delta=float(coefs[3]), layer_weights=[w.copy() for w in weights])


def train_cgc(cg: ComplementedGraph, p0: CgcParams, epochs: int = 200, lr: float = 0.01, seed: int = 0,
              dropout: float = 0.0, weight_decay: float = 0.0) -> TrainReport:
    """Full-batch Adam on the train split; keeps the parameters with the best
    validation accuracy (earliest on ties) and reports their test accuracy."""
    for name, s in (("train", cg.train), ("val", cg.val), ("test", cg.test)):
        if len(s) == 0:
            raise ValidationError(f"{name} split is empty")
    if cg.labels is None:
        raise ValidationError("labels are required")
    if not p0.layer_weights:
        raise ValidationError("layer weights are not initialized")
    rng = np.random.default_rng(seed)
    weights = [w.copy() for w in p0.layer_weights]
    coefs = p0.coefficients.copy()
    params = weights + ([coefs] if p0.learnable else [])
    opt = Adam(params, lr=lr)
    lo, hi = COEF_RANGE

    def current():
        return _copy_params(p0, weights, coefs)

    best = current()
    best_val = accuracy(cgc_forward(cg, best), cg.labels, cg.val)
    best_epoch = 0
    losses = []
    for epoch in range(1, epochs + 1):
        loss, gw, gc = cgc_loss_and_grad(cg, current(), rng=rng, dropout=dropout)
        if not np.isfinite(loss):
            raise NumericalError(f"CGC training loss became non-finite at epoch {epoch}")
        losses.append(loss)
        if weight_decay:
            gw = [g + weight_decay * w for g, w in zip(gw, weights)]
        opt.step(gw + ([gc] if p0.learnable else []))
        if p0.learnable:
            np.clip(coefs, lo, hi, out=coefs)
        cur = current()
        val = accuracy(cgc_forward(cg, cur), cg.labels, cg.val)
        if val > best_val:
            best, best_val, best_epoch = cur, val, epoch
    test = accuracy(cgc_forward(cg, best), cg.labels, cg.test)
    return TrainReport(losses, best_val, test, best, best_epoch)


def objective_value(cg: ComplementedGraph, h, combined_sign: float = -1.0) -> float:
    """``tr(Hᵀ(3I − Âo + Ât + s·ÂtÂo)H)`` with ``s = combined_sign``.

    The default ``s = -1`` is the objective as usually printed. Its three-part
    split (:func:`decompose_objective`) carries ``+ÂtÂo`` instead, so the parts
    sum to this value only for ``s = +1``.
    """
    h = _check_h(cg, h)
    ao_h = spmm(cg.a_o, h)
    at_h = spmm(cg.a_t, h)
    ato_h = spmm(cg.a_t, ao_h)
    return float(3.0 * np.sum(h * h) - np.sum(h * ao_h) + np.sum(h * at_h) + combined_sign * np.sum(h * ato_h))


def decompose_objective(cg: ComplementedGraph, h):
    """``(tr(Hᵀ(I−Âo)H), tr(Hᵀ(I+Ât)H), tr(Hᵀ(I+ÂtÂo)H))``."""
    h = _check_h(cg, h)
    sq = float(np.sum(h * h))
    ao_h = spmm(cg.a_o, h)
    o_o = sq - float(np.sum(h * ao_h))
    o_t = sq + float(np.sum(h * spmm(cg.a_t, h)))
    o_c = sq + float(np.sum(h * spmm(cg.a_t, ao_h)))
    return o_o, o_t, o_c


def _check_h(cg, h):
    h = np.asarray(h, dtype=np.float64)
    if h.ndim == 1:
        h = h[:, None]
    if h.shape[0] != cg.n_nodes:
        raise ValidationError(f"H must have {cg.n_nodes} rows, got {h.shape[0]}")
    return h


def save_checkpoint(p: CgcParams, seed: int, epochs: int) -> str:
    doc = p.to_dict(include_weights=True)
    doc["metadata"] = {"seed": int(seed), "epochs": int(epochs)}
    return json.dumps(doc)


def load_checkpoint(s: str) -> CgcParams:
    return CgcParams.from_dict(json.loads(s))


def _check_cg(cg):
    if not isinstance(cg, ComplementedGraph):
        raise ValidationError(f"expected a ComplementedGraph, got {type(cg).__name__}")


class CGCClassifier(BaseEstimator, ClassifierMixin):
    """Node classifier over a :class:`ComplementedGraph`.

    ``fit(cg)`` trains on ``cg.train`` with model selection on ``cg.val``;
    ``predict(cg)`` returns a class for every node.
    """

    def __init__(self, alpha=1.0, beta=1.0, gamma=1.0, delta=1.0, learnable=False, layers=2,
                 hidden_dim=64, epochs=200, lr=0.01, dropout=0.0, weight_decay=0.0, random_state=0):
        self.alpha = alpha
        self.beta = beta
        self.gamma = gamma
        self.delta = delta
        self.learnable = learnable
        self.layers = layers
        self.hidden_dim = hidden_dim
        self.epochs = epochs
        self.lr = lr
        self.dropout = dropout
        self.weight_decay = weight_decay
        self.random_state = random_state

    def fit(self, cg: ComplementedGraph, y=None):
        _check_cg(cg)
        seed = int(self.random_state)
        p0 = CgcParams.init(cg.features.shape[1], cg.n_classes, self.layers, self.hidden_dim, seed,
                            self.alpha, self.beta, self.gamma, self.delta, self.learnable)
        self.report_ = train_cgc(cg, p0, self.epochs, self.lr, seed, self.dropout, self.weight_decay)
        self.params_ = self.report_.final_params
        self.classes_ = np.arange(cg.n_classes)
        return self

    def decision_function(self, cg):
        check_fitted(self, "params_")
        _check_cg(cg)
        if cg.features.shape[1] != self.params_.layer_weights[0].shape[0]:
            raise ValidationError("feature dimension differs from the one seen in fit")
        return cgc_forward(cg, self.params_)

    def predict_proba(self, cg):
        return softmax(self.decision_function(cg), axis=1)

    def predict(self, cg):
        return np.argmax(self.decision_function(cg), axis=1)

    def score(self, cg, y=None, split: Optional[str] = "test"):
        idx = np.arange(cg.n_nodes) if split is None else getattr(cg, split)
        y = cg.labels if y is None else np.asarray(y)
        return float(np.mean(self.predict(cg)[idx] == y[idx]))
