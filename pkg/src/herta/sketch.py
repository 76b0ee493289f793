"""Randomized sketching primitives and spectral-approximation certificates.

Conventions:
- fwht applies the orthonormal Walsh-Hadamard transform (1/sqrt(n)) H_n along
  axis 0, zero-padding to the next power of two, so it is an involution.
- Row subsampling is i.i.d. with replacement; a row drawn with probability p
  is scaled by sqrt(1/(s*p)), which makes the subsampled Gram matrix an
  unbiased estimate of the full one.
- Approximation certificates are generalized eigenvalues of the pencil
  (approx, truth): containment in [1-eps, 1+eps] is the certified relation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import BadDistribution, BadParams, DimensionMismatch, NotPositiveDefinite


def _next_pow2(n: int) -> int:
    if n <= 1:
        return 1
    return 1 << (n - 1).bit_length()


def fwht(x: np.ndarray) -> np.ndarray:
    """Orthonormal Walsh-Hadamard transform along axis 0.

    Input of length n is zero-padded to n_pad = next power of two; the result
    has n_pad rows and satisfies fwht(fwht(x))[:n] == x. Works on 1-D vectors
    and 2-D column blocks.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2):
        raise DimensionMismatch(f"expected 1-D or 2-D input, got ndim={x.ndim}")
    squeeze = x.ndim == 1
    if squeeze:
        x = x[:, None]
    n, cols = x.shape
    n_pad = _next_pow2(n)
    out = np.zeros((n_pad, cols), dtype=np.float64)
    out[:n] = x
    h = 1
    while h < n_pad:
        # butterfly: pair rows i and i+h inside each block of 2h rows
        out = out.reshape(-1, 2, h, cols)
        a = out[:, 0].copy()
        out[:, 0] += out[:, 1]
        out[:, 1] = a - out[:, 1]
        out = out.reshape(n_pad, cols)
        h *= 2
    out /= np.sqrt(n_pad)
    return out[:, 0] if squeeze else out


def gaussian_sketch(k: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """k x n matrix with i.i.d. N(0, 1/k) entries (norm-preserving in
    expectation)."""
    if k < 1 or n < 1:
        raise BadParams(f"sketch dims must be >= 1, got ({k}, {n})")
    return rng.normal(0.0, 1.0 / np.sqrt(k), size=(k, n))


def subsample_rows(
    mat: np.ndarray,
    s: int,
    probs: np.ndarray | None,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Draw s rows i.i.d. from `mat` (uniform when probs is None), scaling row
    k by sqrt(1/(s*p_k)) so E[out^T out] = mat^T mat.

    Returns (sampled rows, drawn indices).
    """
    mat = np.asarray(mat, dtype=np.float64)
    m = mat.shape[0]
    if s < 1:
        raise BadParams(f"s must be >= 1, got {s}")
    if probs is None:
        p = np.full(m, 1.0 / m)
    else:
        p = np.asarray(probs, dtype=np.float64)
        if p.shape != (m,):
            raise BadDistribution(f"probs shape {p.shape} != ({m},)")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise BadDistribution("probs must be finite and nonnegative")
        if abs(p.sum() - 1.0) > 1e-9:
            raise BadDistribution(f"probs sum to {p.sum():.12f}, not 1")
        p = p / p.sum()
    idx = rng.choice(m, size=s, replace=True, p=p)
    scale = np.sqrt(1.0 / (s * p[idx]))
    return mat[idx] * scale[:, None], idx


def srht(
    q: np.ndarray,
    s: int,
    rng: np.random.Generator,
    exhaustive: bool = False,
) -> np.ndarray:
    """Subsampled randomized Hadamard transform of the rows of q (n x d).

    Computes fwht(R q) for a random Rademacher sign diagonal R, then keeps s
    uniformly drawn rows scaled by sqrt(n_pad/s). With exhaustive=True every
    padded row is kept once at unit scale, in which case the output Gram
    equals q^T q exactly (the transform is orthogonal).
    """
    q = np.asarray(q, dtype=np.float64)
    if q.ndim != 2:
        raise DimensionMismatch(f"expected 2-D q, got ndim={q.ndim}")
    n = q.shape[0]
    signs = rng.choice((-1.0, 1.0), size=n)
    mixed = fwht(signs[:, None] * q)
    if exhaustive:
        return mixed
    out, _ = subsample_rows(mixed, s, None, rng)
    return out


def spd_inverse_sqrt(p: np.ndarray, sym_tol: float = 1e-10, pd_tol: float = 1e-12) -> np.ndarray:
    """P^{-1/2} of a symmetric positive definite matrix via eigendecomposition.

    Raises NotPositiveDefinite when asymmetry exceeds sym_tol (relative to
    ||P||) or the smallest eigenvalue is <= pd_tol * ||P||.
    """
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise DimensionMismatch(f"expected square matrix, got {p.shape}")
    scale = max(np.abs(p).max(), 1.0)
    if np.abs(p - p.T).max() > sym_tol * scale:
        raise NotPositiveDefinite("matrix is not symmetric")
    vals, vecs = np.linalg.eigh(0.5 * (p + p.T))
    if vals[0] <= pd_tol * max(vals[-1], 0.0) or vals[0] <= 0:
        raise NotPositiveDefinite(f"smallest eigenvalue {vals[0]:.3e} not positive")
    return (vecs / np.sqrt(vals)) @ vecs.T


@dataclass
class SketchReport:
    """Two-sided spectral comparison of an approximation against a reference.

    psi_forward  = || ref^{-1/2} approx ref^{-1/2} ||_2
    psi_backward = || approx^{-1/2} ref approx^{-1/2} ||_2
    eig_min/eig_max bound the pencil (approx, ref); both psi values equal 1
    exactly when approx == ref.
    """

    psi_forward: float
    psi_backward: float
    eig_min: float
    eig_max: float
    passed: bool | None = None

    def check_approx(self, eps: float) -> bool:
        """All pencil eigenvalues within [1-eps, 1+eps]."""
        return self.eig_min >= 1.0 - eps and self.eig_max <= 1.0 + eps


def psi_approx(ref: np.ndarray, approx: np.ndarray, eps: float | None = None) -> SketchReport:
    """Generalized-eigenvalue comparison of (approx, ref), both symmetric PD."""
    ref = np.asarray(ref, dtype=np.float64)
    approx = np.asarray(approx, dtype=np.float64)
    if ref.shape != approx.shape:
        raise DimensionMismatch(f"shape mismatch {ref.shape} vs {approx.shape}")
    vals = scipy.linalg.eigh(
        0.5 * (approx + approx.T), 0.5 * (ref + ref.T), eigvals_only=True
    )
    eig_min, eig_max = float(vals[0]), float(vals[-1])
    if eig_min <= 0:
        raise NotPositiveDefinite(f"pencil eigenvalue {eig_min:.3e} not positive")
    report = SketchReport(
        psi_forward=eig_max,
        psi_backward=1.0 / eig_min,
        eig_min=eig_min,
        eig_max=eig_max,
    )
    if eps is not None:
        report.passed = report.check_approx(eps)
    return report
