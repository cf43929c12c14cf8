"""Input checks shared by the estimators."""
from __future__ import annotations

import numpy as np
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_is_fitted

from .exceptions import ValidationError
from .graph import Graph


def check_graph(g, require_labels: bool = False, min_edges: int = 0) -> Graph:
    """Return ``g`` if it is a usable :class:`Graph`, else raise ValidationError."""
    if not isinstance(g, Graph):
        raise ValidationError(f"expected a Graph, got {type(g).__name__}")
    if require_labels and g.labels is None:
        raise ValidationError("graph has no labels")
    if g.n_edges < min_edges:
        raise ValidationError(f"graph needs at least {min_edges} edge(s), has {g.n_edges}")
    return g


def check_node_index(idx, n_nodes: int, name: str = "index", allow_empty: bool = False) -> np.ndarray:
    """Sorted unique int64 node ids, all in ``[0, n_nodes)``.

    Boolean masks of length ``n_nodes`` are accepted too.
    """
    a = np.asarray(idx)
    if a.dtype == bool:
        if a.shape != (n_nodes,):
            raise ValidationError(f"{name} mask has shape {a.shape}, expected ({n_nodes},)")
        a = np.flatnonzero(a)
    a = a.reshape(-1)
    if a.size and not np.issubdtype(a.dtype, np.integer):
        if not np.all(np.mod(a, 1) == 0):
            raise ValidationError(f"{name} must hold integer node ids")
    a = np.unique(a.astype(np.int64))
    if a.size == 0 and not allow_empty:
        raise ValidationError(f"{name} is empty")
    if a.size and (a[0] < 0 or a[-1] >= n_nodes):
        raise ValidationError(f"{name} has ids outside [0, {n_nodes})")
    return a


def check_fitted(est, attrs) -> None:
    """:func:`sklearn.utils.validation.check_is_fitted` raising our ValidationError."""
    try:
        check_is_fitted(est, attrs)
    except NotFittedError as exc:
        raise ValidationError(str(exc)) from exc
