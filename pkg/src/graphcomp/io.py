"""Plain-text dataset files and node splits.

A dataset directory holds ``edges.txt`` (two whitespace-separated 0-indexed
ids per line, ``#`` comments), ``features.csv`` (one row of floats per node, no
header) and optionally ``labels.txt`` (one integer class id per line).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .exceptions import ValidationError
from .graph import Graph, canonical_edges

log = logging.getLogger(__name__)

EDGES_FILE = "edges.txt"
FEATURES_FILE = "features.csv"
LABELS_FILE = "labels.txt"


@dataclass(frozen=True)
class DatasetOnDisk:
    edges_path: Path
    features_path: Path
    labels_path: Optional[Path] = None

    @classmethod
    def from_dir(cls, root) -> "DatasetOnDisk":
        root = Path(root)
        labels = root / LABELS_FILE
        return cls(root / EDGES_FILE, root / FEATURES_FILE, labels if labels.exists() else None)


def _strip_comment(line: str) -> str:
    return line.split("#", 1)[0].strip()


def read_edges(path):
    """Parse an edge file; returns ``(edges (m, 2) int64, n_self_loops)`` with
    self-loops removed but duplicates kept."""
    rows = []
    loops = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            body = _strip_comment(line)
            if not body:
                continue
            parts = body.split()
            if len(parts) != 2:
                raise ValidationError(f"{path}:{lineno}: expected two node ids, got {body!r}")
            try:
                i, j = int(parts[0], 10), int(parts[1], 10)
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: node ids must be base-10 integers") from None
            if i < 0 or j < 0:
                raise ValidationError(f"{path}:{lineno}: negative node id")
            if i == j:
                loops += 1
                continue
            rows.append((i, j))
    return np.array(rows, dtype=np.int64).reshape(-1, 2), loops


def read_features(path) -> np.ndarray:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            body = line.strip()
            if not body:
                continue
            try:
                rows.append([float(c) for c in body.split(",")])
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: unparseable feature value") from None
            if len(rows[-1]) != len(rows[0]):
                raise ValidationError(f"{path}:{lineno}: expected {len(rows[0])} columns, got {len(rows[-1])}")
    if not rows:
        raise ValidationError(f"{path}: no feature rows")
    return np.array(rows, dtype=np.float64)


def read_labels(path) -> np.ndarray:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            body = line.strip()
            if not body:
                continue
            try:
                out.append(int(body, 10))
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: label must be an integer") from None
    return np.array(out, dtype=np.int64)


def load_dataset(d) -> Graph:
    if not isinstance(d, DatasetOnDisk):
        d = DatasetOnDisk.from_dir(d)
    for p in (d.edges_path, d.features_path):
        if not Path(p).exists():
            raise ValidationError(f"missing dataset file {p}")
    edges, loops = read_edges(d.edges_path)
    if loops:
        log.warning("dropped %d self-loop(s) from %s", loops, d.edges_path)
    x = read_features(d.features_path)
    n = x.shape[0]
    if len(edges) and edges.max() >= n:
        raise ValidationError(f"edge endpoint {int(edges.max())} out of range for {n} feature rows")
    labels = None
    if d.labels_path is not None:
        labels = read_labels(d.labels_path)
        if len(labels) != n:
            raise ValidationError(f"{len(labels)} labels for {n} feature rows")
    return Graph.build(n, edges, x, labels)


def save_dataset(g: Graph, root) -> DatasetOnDisk:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    with open(root / EDGES_FILE, "w", encoding="utf-8") as fh:
        for i, j in canonical_edges(g.edges):
            fh.write(f"{i} {j}\n")
    with open(root / FEATURES_FILE, "w", encoding="utf-8") as fh:
        for row in g.features:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    if g.labels is not None:
        with open(root / LABELS_FILE, "w", encoding="utf-8") as fh:
            fh.writelines(f"{int(v)}\n" for v in g.labels)
    else:
        # a stale labels file would otherwise be picked up on the next load
        (root / LABELS_FILE).unlink(missing_ok=True)
    return DatasetOnDisk.from_dir(root)


def split_nodes(g, ratios=(0.6, 0.2, 0.2), seed: int = 0):
    """Uniform random train/val/test partition of the labeled nodes.

    Train and val sizes are floored; the remainder goes to test.
    """
    n = g if isinstance(g, (int, np.integer)) else g.n_nodes
    if not isinstance(g, (int, np.integer)) and g.labels is None:
        raise ValidationError("split requires labels")
    r = tuple(float(v) for v in ratios)
    if len(r) != 3 or min(r) < 0 or abs(sum(r) - 1.0) > 1e-9:
        raise ValidationError(f"split ratios must be three non-negative numbers summing to 1, got {ratios}")
    n_train = math.floor(r[0] * n + 1e-9)
    n_val = math.floor(r[1] * n + 1e-9)
    if n_train < 1 or n_val < 1 or n - n_train - n_val < 1:
        raise ValidationError(f"{n} nodes are too few for nonempty splits with ratios {ratios}")
    perm = np.random.default_rng(seed).permutation(n)
    return (np.sort(perm[:n_train]), np.sort(perm[n_train:n_train + n_val]), np.sort(perm[n_train + n_val:]))
