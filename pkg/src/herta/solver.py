"""Conjugate-gradient solver with an energy-norm accuracy contract.

The contract for solve(u) at rate eps is

    || v - H^{-1} u ||_H <= eps * || H^{-1} u ||_H,

which is unobservable directly. With kappa an upper bound on cond(H) the
standard bounds || r ||_{H^{-1}}^2 <= ||r||^2 / sigma_min and
|| u ||_{H^{-1}}^2 >= ||u||^2 / sigma_max turn the 2-norm relative residual
into a sufficient stopping rule:

    || H v - u || / || u || <= eps / sqrt(kappa)   =>   contract holds.

Jacobi (diagonal) preconditioning; CG keeps the energy-norm error
non-increasing, so tightening eps never worsens the returned solution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import BadParams, DimensionMismatch, NoConvergence, NotPositiveDefinite


@dataclass
class SolveStats:
    iterations: int
    rel_residual: float


class SolverHandle:
    """Validated operator + solve policy (rate, condition hint, iteration cap).

    Parameters
    ----------
    mat : sparse symmetric positive definite matrix.
    eps : accuracy rate in (0, 1), the Definition-style energy-norm bound.
    cond_hint : upper bound on cond(mat). When omitted it is derived from
        Gershgorin discs, which requires row diagonal dominance; callers that
        know the spectrum (e.g. I + lam*L with sigma_min = 1) should pass it.
    max_iter : defaults to ceil(10*sqrt(cond_hint)*ln(1/eps)) + 100.
    """

    def __init__(
        self,
        mat: sp.spmatrix,
        eps: float,
        cond_hint: float | None = None,
        max_iter: int | None = None,
    ):
        if not 0.0 < eps < 1.0:
            raise BadParams(f"eps must be in (0, 1), got {eps}")
        mat = sp.csr_matrix(mat)
        if mat.shape[0] != mat.shape[1]:
            raise DimensionMismatch(f"matrix not square: {mat.shape}")
        scale = max(np.abs(mat.data).max() if mat.nnz else 0.0, 1.0)
        asym = abs(mat - mat.T)
        if asym.nnz and asym.max() > 1e-10 * scale:
            raise NotPositiveDefinite("matrix is not symmetric")
        diag = mat.diagonal()
        if np.any(diag <= 0):
            raise NotPositiveDefinite("matrix has a non-positive diagonal entry")
        if cond_hint is None:
            absrow = np.abs(mat).sum(axis=1).A1
            off = absrow - np.abs(diag)
            lo = float(np.min(diag - off))
            if lo <= 0:
                raise BadParams(
                    "Gershgorin lower bound not positive; pass cond_hint explicitly"
                )
            cond_hint = float(np.max(diag + off)) / lo
        if cond_hint < 1.0:
            raise BadParams(f"cond_hint must be >= 1, got {cond_hint}")
        if max_iter is None:
            max_iter = int(math.ceil(10.0 * math.sqrt(cond_hint) * math.log(1.0 / eps))) + 100
        self.mat = mat
        self.n = mat.shape[0]
        self.eps = float(eps)
        self.cond_hint = float(cond_hint)
        self.max_iter = int(max_iter)
        self._inv_diag = 1.0 / diag

    def solve(self, u: np.ndarray) -> tuple[np.ndarray, SolveStats]:
        """Jacobi-preconditioned CG run to the residual surrogate."""
        u = np.asarray(u, dtype=np.float64)
        if u.shape != (self.n,):
            raise DimensionMismatch(f"rhs shape {u.shape} != ({self.n},)")
        unorm = float(np.linalg.norm(u))
        if unorm == 0.0:
            return np.zeros(self.n), SolveStats(0, 0.0)
        tol = self.eps / math.sqrt(self.cond_hint) * unorm
        x = np.zeros(self.n)
        r = u.copy()
        z = self._inv_diag * r
        p = z.copy()
        rz = float(r @ z)
        for it in range(1, self.max_iter + 1):
            hp = self.mat @ p
            php = float(p @ hp)
            if php <= 0.0:
                raise NoConvergence("CG breakdown (non-positive curvature)", iterations=it)
            alpha = rz / php
            x += alpha * p
            r -= alpha * hp
            rnorm = float(np.linalg.norm(r))
            if rnorm <= tol:
                return x, SolveStats(it, rnorm / unorm)
            z = self._inv_diag * r
            rz_new = float(r @ z)
            p = z + (rz_new / rz) * p
            rz = rz_new
        raise NoConvergence(
            f"no convergence in {self.max_iter} iterations "
            f"(rel residual {rnorm / unorm:.3e}, tol {tol / unorm:.3e})",
            iterations=self.max_iter,
        )

    def solve_multi(self, rhs: np.ndarray) -> tuple[np.ndarray, list[SolveStats]]:
        """Column-by-column solve; columns are independent."""
        rhs = np.asarray(rhs, dtype=np.float64)
        if rhs.ndim != 2 or rhs.shape[0] != self.n:
            raise DimensionMismatch(f"rhs shape {rhs.shape} != ({self.n}, c)")
        out = np.empty_like(rhs)
        stats = []
        for j in range(rhs.shape[1]):
            out[:, j], st = self.solve(rhs[:, j])
            stats.append(st)
        return out, stats


def sdd_solve(
    mat: sp.spmatrix,
    u: np.ndarray,
    eps: float,
    cond_hint: float | None = None,
    max_iter: int | None = None,
) -> tuple[np.ndarray, SolveStats]:
    """One-shot solve; see SolverHandle."""
    return SolverHandle(mat, eps, cond_hint=cond_hint, max_iter=max_iter).solve(u)


def sdd_solve_multi(
    mat: sp.spmatrix,
    rhs: np.ndarray,
    eps: float,
    cond_hint: float | None = None,
    max_iter: int | None = None,
) -> tuple[np.ndarray, list[SolveStats]]:
    """One-shot multi-column solve; see SolverHandle."""
    return SolverHandle(mat, eps, cond_hint=cond_hint, max_iter=max_iter).solve_multi(rhs)
