"""Dense spectral checks for small graphs: filter kernels, the low/high-pass
equivalence of the CGC propagation, and the eigenvalue range of ``I + ÂtÂo``."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .exceptions import ValidationError
from .graph import DENSE_EIG_CAP, NormalizedAdjacency, dense_eig_sym


@dataclass(frozen=True)
class SpectralFilter:
    """Affine filter ``F(λ) = intercept + slope·λ`` on Laplacian eigenvalues."""

    kind: str
    intercept: float
    slope: float

    def apply(self, lam):
        return self.intercept + self.slope * np.asarray(lam, dtype=np.float64)

    __call__ = apply


LOW_PASS = SpectralFilter("low-pass", 1.0, -1.0)
HIGH_PASS = SpectralFilter("high-pass", -1.0, 1.0)
FILTERS = {f.kind: f for f in (LOW_PASS, HIGH_PASS)}


def _dense(a, cap):
    m = a.matrix if isinstance(a, NormalizedAdjacency) else a
    m = m.toarray() if sp.issparse(m) else np.asarray(m, dtype=np.float64)
    if m.shape[0] > cap:
        raise ValidationError(f"matrix side {m.shape[0]} exceeds dense cap {cap}")
    return m


def filter_kernel(a_hat, f: SpectralFilter, cap: int = DENSE_EIG_CAP) -> np.ndarray:
    """Convolution kernel ``U diag(F(λ)) Uᵀ`` of the filter on ``L = I − Â``.

    Symmetric ``Â`` uses the orthogonal eigendecomposition. A non-symmetric
    ``Â`` (the product of two halves) uses the real Schur form ``L = Q T Qᵀ``;
    for an affine filter ``F(L) = Q F(T) Qᵀ`` holds exactly.
    """
    if isinstance(f, str):
        f = FILTERS[f]
    a = _dense(a_hat, cap)
    n = a.shape[0]
    lap = np.eye(n) - a
    if np.max(np.abs(a - a.T), initial=0.0) <= 1e-10:
        w, u = dense_eig_sym(lap, cap)
        return (u * f.apply(w)) @ u.T
    t, q = scipy.linalg.schur(lap, output="real")
    return q @ (f.intercept * np.eye(n) + f.slope * t) @ q.T


@dataclass(frozen=True)
class Prop1Report:
    passed: bool
    max_deviation: float
    tolerance: float

    def to_dict(self):
        return asdict(self)


def verify_proposition1(cg, h=None, seed: int = 0, tol: float = 1e-8, cap: int = DENSE_EIG_CAP) -> Prop1Report:
    """Compare ``(Âo − Ât − ÂtÂo)H`` with ``(K_low(Âo) + K_high(Ât) + K_high(ÂtÂo))H``."""
    a_o = _dense(cg.a_o, cap)
    a_t = _dense(cg.a_t, cap)
    a_to = a_t @ a_o
    if h is None:
        h = np.random.default_rng(seed).standard_normal((a_o.shape[0], 3))
    h = np.asarray(h, dtype=np.float64)
    spatial = (a_o - a_t - a_to) @ h
    spectral = (filter_kernel(a_o, LOW_PASS, cap) + filter_kernel(a_t, HIGH_PASS, cap)
                + filter_kernel(a_to, HIGH_PASS, cap)) @ h
    dev = float(np.max(np.abs(spatial - spectral), initial=0.0))
    return Prop1Report(dev < tol, dev, tol)


@dataclass(frozen=True)
class EigReport:
    min_eig: float
    max_eig: float
    matrix_tag: str
    spectral_radius: float
    product_spectral_radius: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "tag": self.matrix_tag,
            "min_eig": self.min_eig,
            "max_eig": self.max_eig,
            "spectral_radius": self.spectral_radius,
            "product_spectral_radius": self.product_spectral_radius,
            "pass": self.passed,
        }


def psd_check(cg, tol: float = 1e-8, cap: int = DENSE_EIG_CAP, tag: str = "I + At Ao") -> EigReport:
    """Eigenvalue range of the symmetric part of ``M = I + ÂtÂo``.

    Also reports the spectral radius of ``M`` and of ``ÂtÂo`` from the general
    (possibly complex) eigenvalues.
    """
    a_o = _dense(cg.a_o, cap)
    a_t = _dense(cg.a_t, cap)
    prod = a_t @ a_o
    m = np.eye(a_o.shape[0]) + prod
    w = np.linalg.eigvalsh(0.5 * (m + m.T))
    rho_m = float(np.max(np.abs(np.linalg.eigvals(m))))
    rho_p = float(np.max(np.abs(np.linalg.eigvals(prod))))
    return EigReport(float(w[0]), float(w[-1]), tag, rho_m, rho_p, bool(w[0] >= -tol))


def operator_norm(a, cap: int = DENSE_EIG_CAP) -> float:
    """Largest singular value."""
    m = _dense(a, cap)
    return float(np.linalg.norm(m, 2)) if m.size else 0.0


def eig_range(a_hat, cap: int = DENSE_EIG_CAP):
    w, _ = dense_eig_sym(_dense(a_hat, cap), cap)
    return float(w[0]), float(w[-1])
