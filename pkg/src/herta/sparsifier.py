"""Spectral sparsification of regularized normalized Laplacians.

Importance weights are lam-regularized leverage scores of the normalized
incidence rows,

    l_i = b_i^T (L + lam^{-1} I)^{-1} b_i,

whose exact sum is the effective dimension
n_lam = tr[L (L + lam^{-1} I)^{-1}]. Scores are estimated without forming the
inverse: two Gaussian sketches are pushed through the CG solver, giving
k-dimensional projections whose squared norms estimate each l_i. Sampling
rows i.i.d. proportional to the estimates with scale sqrt(1/(s*p_i)) yields
L_tilde = B_tilde^T B_tilde with E[L_tilde] = L and, for
s >= C * n_lam * log(n) / eps^2, the two-sided guarantee

    (1 - eps)(L + lam^{-1} I)  <=  L_tilde + lam^{-1} I  <=  (1 + eps)(L + lam^{-1} I)

with high probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import BadParams, DegenerateScores, NonPositiveLambda, TooLargeForDense
from .graph import GraphData, normalized_incidence, normalized_laplacian
from .sketch import SketchReport, gaussian_sketch, psi_approx
from .solver import SolverHandle

# accuracy rate for the two score-estimation solves; budgeted so that the
# solver and JL distortions compose to at most a factor-2 score error
SCORE_SOLVE_RATE = 2.0 ** 0.25 - 1.0

DENSE_CERT_CAP = 2000


@dataclass
class SparsifyConfig:
    """Knobs for score estimation and row sampling.

    eps is the spectral error target, valid in (0, 1/2]. sample_constant is
    the oversampling constant C in s = ceil(C * n_lam * ln(n) / eps^2).
    k_jl defaults to ceil(C * ln m), the sketch dimension for score
    estimation.
    """

    lam: float = 1.0
    eps: float = 0.25
    sample_constant: float = 8.0
    k_jl: int | None = None

    def __post_init__(self):
        if not self.lam > 0:
            raise NonPositiveLambda(f"lam must be > 0, got {self.lam}")
        if not 0.0 < self.eps <= 0.5:
            raise BadParams(f"eps must be in (0, 1/2], got {self.eps}")
        if not self.sample_constant > 0:
            raise BadParams(f"sample_constant must be > 0, got {self.sample_constant}")
        if self.k_jl is not None and self.k_jl < 1:
            raise BadParams(f"k_jl must be >= 1, got {self.k_jl}")


@dataclass
class LeverageScores:
    """Per-edge score estimates and their sum."""

    scores: np.ndarray
    total: float

    @property
    def m(self) -> int:
        return int(self.scores.shape[0])


@dataclass
class SparsifyResult:
    """Sampled Laplacian plus the bookkeeping the CLI and tests report."""

    lap_tilde: sp.csr_matrix
    edge_weights: np.ndarray  # accumulated multiplier per original edge row
    scores: LeverageScores
    n_lambda_estimate: float
    samples: int

    @property
    def kept_edges(self) -> int:
        return int(np.count_nonzero(self.edge_weights))


def ridge_leverage_scores(
    g: GraphData,
    cfg: SparsifyConfig,
    rng: np.random.Generator,
) -> LeverageScores:
    """Estimate lam-regularized leverage scores of every incidence row.

    Solves (L + lam^{-1} I) against two Gaussian sketches at rate
    SCORE_SOLVE_RATE and reads each score off as a sum of two squared sketch
    norms. All estimates are positive almost surely; a zero total on a graph
    with edges raises DegenerateScores.
    """
    lap = normalized_laplacian(g)
    inc = normalized_incidence(g)
    m, n = inc.shape
    if m == 0:
        return LeverageScores(scores=np.zeros(0), total=0.0)
    k = cfg.k_jl if cfg.k_jl is not None else max(
        1, math.ceil(cfg.sample_constant * math.log(max(m, 2)))
    )
    reg = (lap + (1.0 / cfg.lam) * sp.identity(n, format="csr")).tocsr()
    # sigma(reg) in [1/lam, 1/lam + 2] => cond <= 1 + 2 lam
    handle = SolverHandle(reg, SCORE_SOLVE_RATE, cond_hint=1.0 + 2.0 * cfg.lam)
    pi_edges = gaussian_sketch(k, m, rng)
    pi_nodes = gaussian_sketch(k, n, rng)
    sketched_inc, _ = handle.solve_multi((inc.T @ pi_edges.T))  # (n, k)
    sketched_eye, _ = handle.solve_multi(pi_nodes.T)  # (n, k)
    proj_inc = inc @ sketched_inc  # column j = B (L+I/lam)^{-1} (B^T pi_j)
    proj_eye = inc @ sketched_eye
    scores = np.einsum("ij,ij->i", proj_inc, proj_inc)
    scores += np.einsum("ij,ij->i", proj_eye, proj_eye) / cfg.lam
    total = float(scores.sum())
    if total <= 0.0:
        raise DegenerateScores(f"score mass {total} on a graph with {m} edges")
    return LeverageScores(scores=scores, total=total)


def effective_dim(scores: LeverageScores, n: int) -> float:
    """Effective-dimension estimate: the score total clamped to [0, n]."""
    return float(min(max(scores.total, 0.0), float(n)))


def sparsify(
    g: GraphData,
    cfg: SparsifyConfig,
    rng: np.random.Generator,
    scores: LeverageScores | None = None,
) -> SparsifyResult:
    """Sample a spectral approximation of the normalized Laplacian of g.

    Draws s = ceil(C * max(n_lam_hat, 1) * ln(n) / eps^2) incidence rows
    i.i.d. proportional to the leverage-score estimates and accumulates
    L_tilde = sum_draws (1/(s p_i)) b_i b_i^T. An edgeless graph yields the
    zero matrix.
    """
    inc = normalized_incidence(g)
    m, n = inc.shape
    if scores is None:
        scores = ridge_leverage_scores(g, cfg, rng)
    if m == 0:
        return SparsifyResult(
            lap_tilde=sp.csr_matrix((n, n)),
            edge_weights=np.zeros(0),
            scores=scores,
            n_lambda_estimate=0.0,
            samples=0,
        )
    n_lam_hat = effective_dim(scores, n)
    s = max(
        1,
        math.ceil(
            cfg.sample_constant * max(n_lam_hat, 1.0) * math.log(max(n, 2)) / cfg.eps**2
        ),
    )
    probs = scores.scores / scores.total
    draws = rng.choice(m, size=s, replace=True, p=probs)
    counts = np.bincount(draws, minlength=m).astype(np.float64)
    weights = counts / (s * probs)
    kept = np.nonzero(counts)[0]
    inc_kept = inc[kept]
    lap_tilde = (inc_kept.T @ sp.diags(weights[kept]) @ inc_kept).tocsr()
    lap_tilde.sum_duplicates()
    return SparsifyResult(
        lap_tilde=lap_tilde,
        edge_weights=weights,
        scores=scores,
        n_lambda_estimate=n_lam_hat,
        samples=s,
    )


def pencil_certificate(
    lap: sp.spmatrix,
    lap_tilde: sp.spmatrix,
    lam: float,
    eps: float | None = None,
) -> SketchReport:
    """Dense certificate: generalized eigenvalues of the regularized pencil
    (L_tilde + lam^{-1} I, L + lam^{-1} I). Desk-scale only."""
    n = lap.shape[0]
    if n > DENSE_CERT_CAP:
        raise TooLargeForDense(f"n={n} exceeds dense certificate cap {DENSE_CERT_CAP}")
    if not lam > 0:
        raise NonPositiveLambda(f"lam must be > 0, got {lam}")
    shift = (1.0 / lam) * np.eye(n)
    ref = np.asarray(sp.csr_matrix(lap).todense()) + shift
    approx = np.asarray(sp.csr_matrix(lap_tilde).todense()) + shift
    return psi_approx(ref, approx, eps=eps)
