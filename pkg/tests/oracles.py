"""Slow, obviously-correct reference implementations used by the tests."""
import numpy as np


def ks_bruteforce(d1, d2):
    """Evaluate both empirical CDFs at every pooled point by direct counting."""
    d1, d2 = list(map(float, d1)), list(map(float, d2))
    best = 0.0
    for x in d1 + d2:
        f1 = sum(1 for v in d1 if v <= x) / len(d1)
        f2 = sum(1 for v in d2 if v <= x) / len(d2)
        best = max(best, abs(f1 - f2))
    return best


def cosine(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    na, nb = np.sqrt(a @ a), np.sqrt(b @ b)
    return 0.0 if na == 0 or nb == 0 else float(a @ b / (na * nb))


def tied_cosine(a, b):
    """Cosine rounded to 12 decimals, so equal-in-exact-arithmetic values compare equal."""
    return float(np.round(cosine(a, b), 12))


def ranking_list_bruteforce(target, x, labels, train, K):
    """Members by exhaustive sort of (−cosine, id) over each class block."""
    cands = [int(c) for c in train if c != target]
    key = {c: (-tied_cosine(x[target], x[c]), c) for c in cands}
    intra = sorted((c for c in cands if labels[c] == labels[target]), key=key.get)
    inter = sorted((c for c in cands if labels[c] != labels[target]), key=key.get)
    return intra[:K] + inter[len(inter) - min(K, len(inter)):]


def dense_cgc_matrix(a_o, a_t, alpha, beta, gamma, delta):
    n = a_o.shape[0]
    return alpha * np.eye(n) + beta * a_o - gamma * a_t - delta * (a_t @ a_o)


def dense_cgc_forward(x, a_o, a_t, coefs, weights):
    m = dense_cgc_matrix(a_o, a_t, *coefs)
    h = x
    for i, w in enumerate(weights):
        h = m @ h @ w
        if i < len(weights) - 1:
            h = np.maximum(h, 0)
    return h


def homophily_count(edges, labels):
    same = sum(1 for i, j in edges if labels[i] == labels[j])
    return same / len(edges)


def ks_pooled_matrix(d1, d2):
    """O(n^2) pooled-CDF comparison via a dense indicator matrix."""
    d1, d2 = np.asarray(d1, float), np.asarray(d2, float)
    pooled = np.concatenate([d1, d2])
    f1 = (d1[None, :] <= pooled[:, None]).mean(axis=1)
    f2 = (d2[None, :] <= pooled[:, None]).mean(axis=1)
    return float(np.max(np.abs(f1 - f2)))
