"""Symmetric eigendecomposition, graph Fourier transform and smoothness measures."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .graph import Graph

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


class EigenConvergenceError(ArithmeticError):
    def __init__(self, residual: float, sweeps: int):
        super().__init__(f"Jacobi did not converge after {sweeps} sweeps; "
                         f"off-diagonal norm {residual:.3e}")
        self.residual = residual


class DegenerateSignalError(ValueError):
    """The filtered signal vanishes, so its direction is undefined."""


class FilterEffect(str, enum.Enum):
    SMOOTHS = "Smooths"
    AMPLIFIES = "Amplifies"
    INDETERMINATE = "Indeterminate"


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """``S = u @ diag(lam) @ u.T`` with ``lam`` ascending."""

    u: np.ndarray
    lam: np.ndarray

    @property
    def n(self) -> int:
        return self.lam.shape[0]

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.lam) @ self.u.T


@dataclass(frozen=True)
class PolyFilter:
    """``g(x) = sum_j coeffs[j] * x**j``."""

    coeffs: tuple

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coeffs)
        if not coeffs:
            raise ValueError("a polynomial filter needs at least one coefficient")
        object.__setattr__(self, "coeffs", coeffs)

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        out = np.zeros_like(x)
        for c in reversed(self.coeffs):
            out = out * x + c
        return out

    def of_matrix(self, s: np.ndarray) -> np.ndarray:
        """Evaluate ``g(S)`` by Horner's rule on the matrix itself (no eigenbasis)."""
        n = s.shape[0]
        out = np.zeros((n, n))
        for c in reversed(self.coeffs):
            out = out @ s + c * np.eye(n)
        return out

    def scaled(self, factor: float) -> "PolyFilter":
        return PolyFilter(tuple(factor * c for c in self.coeffs))


def _check_symmetric(s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {s.shape}")
    if not np.all(np.isfinite(s)):
        raise ValueError("matrix has non-finite entries")
    tol = 1e-12 * np.maximum(1.0, np.abs(s))
    if np.any(np.abs(s - s.T) > tol):
        raise ValueError("matrix is not symmetric")
    return s


def eigendecompose(s: np.ndarray, tol: float = JACOBI_TOL,
                   max_sweeps: int = JACOBI_MAX_SWEEPS) -> SpectralDecomposition:
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Sweeps over pairs ``(p, q)`` in row-major order until the largest
    off-diagonal magnitude is at most ``tol * max(1, max|S|)``. Each column's
    largest-magnitude entry is made nonnegative (lowest row wins ties).
    """
    a = _check_symmetric(s).copy()
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    v = np.eye(n)
    threshold = tol * max(1.0, float(np.abs(a).max()) if n else 1.0)

    def off_max():
        if n < 2:
            return 0.0
        return float(np.abs(a[np.triu_indices(n, 1)]).max())

    sweeps = 0
    while off_max() > threshold:
        if sweeps >= max_sweeps:
            off = a - np.diag(np.diag(a))
            raise EigenConvergenceError(float(np.linalg.norm(off)), sweeps)
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, tau) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                sn = t * c
                col_p = a[:, p].copy()
                col_q = a[:, q]
                a[:, p] = c * col_p - sn * col_q
                a[:, q] = sn * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :]
                a[p, :] = c * row_p - sn * row_q
                a[q, :] = sn * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q]
                v[:, p] = c * vp - sn * vq
                v[:, q] = sn * vp + c * vq
        sweeps += 1

    lam = np.diag(a).copy()
    order = np.argsort(lam, kind="stable")
    lam = lam[order]
    v = v[:, order]
    for j in range(n):
        i = int(np.argmax(np.abs(v[:, j])))
        if v[i, j] < 0:
            v[:, j] = -v[:, j]
    lam.setflags(write=False)
    v.setflags(write=False)
    return SpectralDecomposition(v, lam)


def _as_signal(dec: SpectralDecomposition, f) -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    if f.shape != (dec.n,):
        raise ValueError(f"signal has shape {f.shape}, expected ({dec.n},)")
    return f


def gft(dec: SpectralDecomposition, f) -> np.ndarray:
    return dec.u.T @ _as_signal(dec, f)


def inverse_gft(dec: SpectralDecomposition, f_hat) -> np.ndarray:
    return dec.u @ _as_signal(dec, f_hat)


def smoothness_quadratic(g: Graph, f) -> float:
    """``(1/2) sum_ij W_ij (f_i - f_j)^2`` evaluated over the edge list."""
    f = np.asarray(f, dtype=np.float64)
    if f.shape != (g.n,):
        raise ValueError(f"signal has shape {f.shape}, expected ({g.n},)")
    total = 0.0
    for u, v, w in g.edges:
        diff = f[u] - f[v]
        total += w * diff * diff
    return total


def smoothness_spectral(dec: SpectralDecomposition, f) -> float:
    """Weighted frequency-domain norm ``sum_i f_hat_i^2 lam_i``."""
    f_hat = gft(dec, f)
    return float(np.sum(f_hat * f_hat * dec.lam))


def poly_filter_apply(p: PolyFilter, dec: SpectralDecomposition, f) -> np.ndarray:
    f_hat = gft(dec, f)
    return dec.u @ (p(dec.lam) * f_hat)


def classify_filter(p: PolyFilter, lam: Sequence[float]) -> FilterEffect:
    gains = np.abs(p(np.asarray(lam, dtype=np.float64)))
    if np.all(gains < 1.0):
        return FilterEffect.SMOOTHS
    if np.all(gains > 1.0):
        return FilterEffect.AMPLIFIES
    return FilterEffect.INDETERMINATE


def direct_cosine(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise DegenerateSignalError("cosine of a zero vector is undefined")
    return float(a @ b / (na * nb))


def cos_to_eigvec(s: np.ndarray, dec: SpectralDecomposition, p: PolyFilter, f, i: int,
                  atol: float = 1e-12) -> float:
    """Closed-form cosine between ``S f`` and eigenvector ``i`` when ``S = U g(Lam) U^T``."""
    f = _as_signal(dec, f)
    sf_norm = np.linalg.norm(np.asarray(s) @ f)
    gains = p(dec.lam)
    f_hat = dec.u.T @ f
    den = math.sqrt(float(np.sum(f_hat * f_hat * gains * gains)))
    if sf_norm <= atol * max(1.0, float(np.linalg.norm(f))) or den == 0.0:
        raise DegenerateSignalError("S f vanishes; cosine undefined")
    return float(f_hat[i] * gains[i] / den)
