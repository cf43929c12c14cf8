import numpy as np
import pytest
from hypothesis import settings

from graphcomp.cgc import ComplementedGraph
from graphcomp.graph import Graph, normalize_adjacency

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


def random_edges(rng, n, p):
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(len(iu)) < p
    return np.stack([iu[keep], ju[keep]], axis=1)


def random_graph(rng, n, p=0.3, d=4, n_classes=2):
    x = rng.standard_normal((n, d))
    y = rng.integers(0, n_classes, size=n)
    y[:n_classes] = np.arange(n_classes)
    return Graph.build(n, random_edges(rng, n, p), x, y)


def random_cg(rng, n, p_o=0.25, p_t=0.25, d=3, n_classes=2):
    """Complemented graph on random halves with a 50/25/25 split."""
    a_o = normalize_adjacency(Graph.build(n, random_edges(rng, n, p_o), np.zeros((n, 1))), origin="homophily-half")
    a_t = normalize_adjacency(Graph.build(n, random_edges(rng, n, p_t), np.zeros((n, 1))), origin="heterophily-half")
    x = rng.standard_normal((n, d))
    y = rng.integers(0, n_classes, size=n)
    perm = rng.permutation(n)
    a, b = max(1, n // 2), max(2, 3 * n // 4)
    return ComplementedGraph(a_o, a_t, x, y, np.sort(perm[:a]), np.sort(perm[a:b]), np.sort(perm[b:]))


def central_diff(f, x, step=1e-5):
    """Central finite-difference gradient of scalar ``f()`` w.r.t. array ``x`` (perturbed in place)."""
    g = np.zeros_like(x, dtype=np.float64)
    flat, gflat = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + step
        fp = f()
        flat[i] = old - step
        fm = f()
        flat[i] = old
        gflat[i] = (fp - fm) / (2 * step)
    return g


def rel_err(analytic, numeric):
    a, b = np.ravel(analytic), np.ravel(numeric)
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    return 0.0 if scale < 1e-12 else float(np.linalg.norm(a - b) / scale)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
