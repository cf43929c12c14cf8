"""Run configuration and the end-to-end discriminate → complement → train pipeline."""
from __future__ import annotations

import json
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np

from .bench import homophily_ratio
from .cgc import COEF_RANGE, CgcParams, assemble_complemented_graph, train_cgc
from .complementation import (
    BackboneConfig,
    ComplementEdges,
    PairSamplingConfig,
    pretrain_backbone,
    synthesize_topology,
    train_complement_model,
)
from .discrimination import HOMOPHILY_PRONE, discriminate
from .exceptions import GraphCompError, ValidationError
from .graph import Graph
from .io import load_dataset, split_nodes

# seed_stage = root_seed ^ STAGE_SEEDS[stage]
STAGE_SEEDS = {
    "split": 0x01,
    "discriminate": 0x02,
    "backbone": 0x03,
    "complement": 0x04,
    "cgc": 0x05,
}


def stage_seed(root: int, stage: str) -> int:
    return int(root) ^ STAGE_SEEDS[stage]


@dataclass
class DiscriminationConfig:
    n_resamples: int = 10
    threshold: float = 0.2


@dataclass
class BackboneSection:
    kind: str = "gcn-1layer"
    hidden_dim: int = 64
    epochs: int = 200
    learning_rate: float = 0.01


@dataclass
class ComplementConfig:
    K: int = 5
    K_homo: int = 5
    K_heter: int = 5
    epochs: int = 200
    lr: float = 0.01
    hidden_dim: int = 64
    embedding_dim: int = 64
    max_pos_pairs: Optional[int] = None
    max_neg_pairs: Optional[int] = None
    candidate_pool: Optional[int] = None
    backbone: BackboneSection = field(default_factory=BackboneSection)


@dataclass
class CgcConfig:
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    delta: float = 1.0
    learnable: bool = False
    layers: int = 2
    hidden: int = 64
    epochs: int = 200
    lr: float = 0.01
    dropout: float = 0.0
    weight_decay: float = 0.0


@dataclass
class RunConfig:
    seed: int = 0
    split_ratios: tuple = (0.6, 0.2, 0.2)
    discrimination: DiscriminationConfig = field(default_factory=DiscriminationConfig)
    complement: ComplementConfig = field(default_factory=ComplementConfig)
    cgc: CgcConfig = field(default_factory=CgcConfig)

    def __post_init__(self):
        self.split_ratios = tuple(float(r) for r in self.split_ratios)
        if len(self.split_ratios) != 3 or abs(sum(self.split_ratios) - 1.0) > 1e-9:
            raise ValidationError("split_ratios must be three numbers summing to 1")
        counts = {
            "discrimination.n_resamples": self.discrimination.n_resamples,
            "complement.K": self.complement.K,
            "complement.K_homo": self.complement.K_homo,
            "complement.K_heter": self.complement.K_heter,
            "complement.hidden_dim": self.complement.hidden_dim,
            "complement.embedding_dim": self.complement.embedding_dim,
            "complement.backbone.hidden_dim": self.complement.backbone.hidden_dim,
            "cgc.layers": self.cgc.layers,
            "cgc.hidden": self.cgc.hidden,
        }
        for name, v in counts.items():
            if int(v) < 1:
                raise ValidationError(f"{name} must be positive")
        lo, hi = COEF_RANGE
        for name in ("alpha", "beta", "gamma", "delta"):
            v = float(getattr(self.cgc, name))
            if not lo <= v <= hi:
                raise ValidationError(f"cgc.{name}={v} outside [{lo}, {hi}]")
        rates = {"complement.lr": self.complement.lr, "cgc.lr": self.cgc.lr,
                 "complement.backbone.learning_rate": self.complement.backbone.learning_rate}
        for name, v in rates.items():
            if not float(v) > 0:
                raise ValidationError(f"{name} must be > 0")
        if not 0.0 <= float(self.cgc.dropout) < 1.0:
            raise ValidationError("cgc.dropout must lie in [0, 1)")
        if not 0.0 < float(self.discrimination.threshold) < 1.0:
            raise ValidationError("discrimination.threshold must lie in (0, 1)")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["split_ratios"] = list(self.split_ratios)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        return _build(cls, d, "")

    @classmethod
    def from_json(cls, s: str) -> "RunConfig":
        try:
            return cls.from_dict(json.loads(s))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config is not valid JSON: {exc}") from exc

    def with_seed(self, seed: int) -> "RunConfig":
        d = self.to_dict()
        d["seed"] = int(seed)
        return RunConfig.from_dict(d)


_NESTED = {
    (RunConfig, "discrimination"): DiscriminationConfig,
    (RunConfig, "complement"): ComplementConfig,
    (RunConfig, "cgc"): CgcConfig,
    (ComplementConfig, "backbone"): BackboneSection,
}


def _build(cls, d, prefix):
    if not isinstance(d, dict):
        raise ValidationError(f"config section {prefix or '<root>'} must be an object")
    names = {f.name for f in fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise ValidationError(f"unknown config key(s) {sorted(prefix + k for k in unknown)}")
    kwargs = {}
    for k, v in d.items():
        sub = _NESTED.get((cls, k))
        kwargs[k] = _build(sub, v, f"{prefix}{k}.") if sub else v
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ValidationError(f"bad config section {prefix or '<root>'}: {exc}") from exc


@contextmanager
def _stage(name: str):
    try:
        yield
    except GraphCompError as exc:
        raise type(exc)(f"stage '{name}': {exc}") from exc


def run_complement_stage(g: Graph, cfg: RunConfig, train, verdict: str):
    """Backbone, complement model and edge synthesis. Returns ``(model, edges)``."""
    cc = cfg.complement
    with _stage("backbone"):
        bb = BackboneConfig(cc.backbone.kind, cc.backbone.hidden_dim, cc.backbone.epochs,
                            cc.backbone.learning_rate, stage_seed(cfg.seed, "backbone"))
        z_gnn = pretrain_backbone(g, bb, train)
    with _stage("complement"):
        seed = stage_seed(cfg.seed, "complement")
        sampling = PairSamplingConfig(cc.max_pos_pairs, cc.max_neg_pairs, cc.candidate_pool, seed)
        model = train_complement_model(g, z_gnn, train, cc.K, sampling, cc.epochs, cc.lr, seed,
                                       cc.hidden_dim, cc.embedding_dim)
        k = cc.K_heter if verdict == HOMOPHILY_PRONE else cc.K_homo
        edges = synthesize_topology(model, z_gnn, verdict, k, exclude=g)
    return model, edges


def run_cgc_stage(g: Graph, cfg: RunConfig, edges: ComplementEdges, verdict: str, split):
    with _stage("cgc"):
        cg = assemble_complemented_graph(g, edges, verdict, split)
        c = cfg.cgc
        seed = stage_seed(cfg.seed, "cgc")
        p0 = CgcParams.init(g.n_features, g.n_classes, c.layers, c.hidden, seed,
                            c.alpha, c.beta, c.gamma, c.delta, c.learnable)
        return train_cgc(cg, p0, c.epochs, c.lr, seed, c.dropout, c.weight_decay)


def complement_summary(edges: ComplementEdges, labels) -> dict:
    d = {"kind": edges.kind, "k_per_node": edges.k_per_node, "n_edges": edges.n_edges}
    d["homophily"] = homophily_ratio(edges.edges, labels).to_dict() if edges.n_edges and labels is not None else None
    return d


def pipeline(config: RunConfig, dataset) -> dict:
    """Full run on a dataset directory, :class:`~graphcomp.io.DatasetOnDisk` or :class:`Graph`."""
    with _stage("load"):
        g = dataset if isinstance(dataset, Graph) else load_dataset(dataset)
        if g.labels is None:
            raise ValidationError("pipeline needs node labels")
    with _stage("split"):
        split = split_nodes(g, config.split_ratios, stage_seed(config.seed, "split"))
    with _stage("discriminate"):
        dc = config.discrimination
        disc = discriminate(g, dc.n_resamples, dc.threshold, stage_seed(config.seed, "discriminate"))
    _, edges = run_complement_stage(g, config, split[0], disc.verdict)
    report = run_cgc_stage(g, config, edges, disc.verdict, split)
    return {
        "config": config.to_dict(),
        "graph": {"n_nodes": g.n_nodes, "n_edges": g.n_edges, "n_features": g.n_features,
                  "n_classes": g.n_classes},
        "split_sizes": [int(len(s)) for s in split],
        "discrimination": disc.to_dict(),
        "verdict": disc.verdict,
        "complement": complement_summary(edges, g.labels),
        "train": report.to_dict(),
    }


def dumps_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
