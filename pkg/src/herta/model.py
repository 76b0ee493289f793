"""The linear unfolded model and its losses.

The model output is the energy minimizer Z*(W) = (I + lam L)^{-1} X W, the
fixed point of the unfolded iteration Z <- Z - alpha((I + lam L) Z - X W).
Training minimizes either

    mse:  1/2 || Z*(W) - Y ||_F^2   (optionally over a node mask), or
    ce :  sum_u [ -z_u[k_u] + logsumexp(z_u) ]  for one-hot rows Y_u = e_{k_u}.

With H = I + lam L and yhat_i = H y_i, the per-class mse objective is
l_i(w) = 1/2 || H^{-1}(X w - yhat_i) ||^2 with gradient
X^T H^{-2} (X w - yhat_i); the CE gradient is X^T H^{-1}(softmax(Z) - Y).
Dense helpers (Cholesky of H) back the test oracles and are capped at
desk scale.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import DimensionMismatch, NotOneHot, TooLargeForDense
from .graph import GraphData, normalized_laplacian, regularized_operator
from .solver import SolverHandle

DENSE_ORACLE_CAP = 2000


@dataclass
class ModelSpec:
    """Graph + features + targets + regularization weight.

    train_mask restricts the loss to a node subset (forward passes still use
    the whole graph). Column-rank deficiency of X or Y only warns: training
    still runs, the minimizer is just not unique.
    """

    graph: GraphData
    lam: float
    x: np.ndarray
    y: np.ndarray
    train_mask: np.ndarray | None = None

    lap: sp.csr_matrix = field(init=False, repr=False)
    op: sp.csr_matrix = field(init=False, repr=False)  # H = I + lam * L
    _dense_factor: tuple | None = field(init=False, default=None, repr=False)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.y.ndim == 1:
            self.y = self.y[:, None]
        n = self.graph.n
        if self.x.ndim != 2 or self.x.shape[0] != n:
            raise DimensionMismatch(f"x shape {self.x.shape} != ({n}, d)")
        if self.y.shape[0] != n:
            raise DimensionMismatch(f"y shape {self.y.shape} != ({n}, c)")
        if self.train_mask is not None:
            self.train_mask = np.asarray(self.train_mask, dtype=bool)
            if self.train_mask.shape != (n,):
                raise DimensionMismatch(f"train_mask shape {self.train_mask.shape} != ({n},)")
        self.lap = normalized_laplacian(self.graph)
        self.op = regularized_operator(self.lap, self.lam)
        if np.linalg.matrix_rank(self.x) < min(self.x.shape):
            warnings.warn("feature matrix is column-rank deficient", stacklevel=2)

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def d(self) -> int:
        return int(self.x.shape[1])

    @property
    def c(self) -> int:
        return int(self.y.shape[1])

    @property
    def cond_hint(self) -> float:
        return 1.0 + 2.0 * self.lam

    def solver(self, eps: float) -> SolverHandle:
        return SolverHandle(self.op, eps, cond_hint=self.cond_hint)

    def mask_vector(self) -> np.ndarray:
        """0/1 diagonal of the node mask (all ones when unset)."""
        if self.train_mask is None:
            return np.ones(self.n)
        return self.train_mask.astype(np.float64)

    def dense_solve(self, rhs: np.ndarray) -> np.ndarray:
        """Exact H^{-1} rhs via a cached Cholesky factor. Test-scale only."""
        if self.n > DENSE_ORACLE_CAP:
            raise TooLargeForDense(f"n={self.n} exceeds dense cap {DENSE_ORACLE_CAP}")
        if self._dense_factor is None:
            h = np.asarray(self.op.todense())
            self._dense_factor = scipy.linalg.cho_factor(h)
        return scipy.linalg.cho_solve(self._dense_factor, np.asarray(rhs, dtype=np.float64))


@dataclass
class SubProblem:
    """One target column with its exactly-lifted right-hand side
    yhat = H y (a sparse matrix-vector product, no solve involved)."""

    index: int
    y: np.ndarray
    yhat: np.ndarray


def make_subproblems(spec: ModelSpec) -> list[SubProblem]:
    return [
        SubProblem(index=i, y=spec.y[:, i].copy(), yhat=spec.op @ spec.y[:, i])
        for i in range(spec.c)
    ]


def forward_exact(spec: ModelSpec, w: np.ndarray, eps: float = 1e-10) -> np.ndarray:
    """Z = H^{-1} X W, one contract-rate solve per output column."""
    w = np.asarray(w, dtype=np.float64)
    if w.shape[0] != spec.d:
        raise DimensionMismatch(f"w shape {w.shape} incompatible with d={spec.d}")
    rhs = spec.x @ (w if w.ndim == 2 else w[:, None])
    out, _ = spec.solver(eps).solve_multi(rhs)
    return out if w.ndim == 2 else out[:, 0]


def unfold_forward(spec: ModelSpec, w: np.ndarray, alpha: float, steps: int) -> np.ndarray:
    """Truncated unfolding: `steps` gradient-descent passes on the smoothing
    energy, Z <- Z - alpha (H Z - X W) from Z = 0.

    Converges to forward_exact as steps -> inf for alpha in
    (0, 2/(1 + 2 lam)); the region is documented, not enforced.
    """
    w = np.asarray(w, dtype=np.float64)
    rhs = spec.x @ (w if w.ndim == 2 else w[:, None])
    z = np.zeros_like(rhs)
    for _ in range(steps):
        z -= alpha * (spec.op @ z - rhs)
    return z if w.ndim == 2 else z[:, 0]


def mse_loss(z: np.ndarray, y: np.ndarray, mask: np.ndarray | None = None) -> float:
    """1/2 squared Frobenius distance, optionally restricted to masked rows."""
    z = np.asarray(z, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if z.shape != y.shape:
        raise DimensionMismatch(f"shape mismatch {z.shape} vs {y.shape}")
    diff = z - y
    if mask is not None:
        diff = diff[np.asarray(mask, dtype=bool)]
    return 0.5 * float(np.sum(diff * diff))


def mse_objective(spec: ModelSpec, w: np.ndarray, eps: float | None = None) -> float:
    """Training loss at W: exact (dense) when eps is None, solver-evaluated
    at rate eps otherwise."""
    w = np.asarray(w, dtype=np.float64)
    rhs = spec.x @ w
    z = spec.dense_solve(rhs) if eps is None else spec.solver(eps).solve_multi(rhs)[0]
    return mse_loss(z, spec.y, mask=spec.train_mask)


def sub_loss(spec: ModelSpec, sub: SubProblem, w: np.ndarray, eps: float) -> float:
    """Per-class objective 1/2 || M H^{-1}(X w - yhat) ||^2 via one solve.

    The solver contributes at most ~3*eps relative error to the value.
    """
    u = spec.x @ np.asarray(w, dtype=np.float64) - sub.yhat
    v, _ = spec.solver(eps).solve(u)
    v = v * spec.mask_vector()
    return 0.5 * float(v @ v)


def exact_gradient(spec: ModelSpec, sub: SubProblem, w: np.ndarray) -> np.ndarray:
    """Dense-oracle gradient X^T H^{-1} M H^{-1} (X w - yhat)."""
    u = spec.x @ np.asarray(w, dtype=np.float64) - sub.yhat
    inner = spec.dense_solve(u) * spec.mask_vector()
    return spec.x.T @ spec.dense_solve(inner)


def _check_one_hot(y: np.ndarray) -> np.ndarray:
    onehot = np.asarray(y, dtype=np.float64)
    if (
        onehot.ndim != 2
        or not np.all((onehot == 0.0) | (onehot == 1.0))
        or not np.all(onehot.sum(axis=1) == 1.0)
    ):
        raise NotOneHot("cross-entropy targets must be one-hot rows")
    return onehot


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def ce_loss_and_grad(
    spec: ModelSpec, w: np.ndarray, eps: float | None = None
) -> tuple[float, np.ndarray]:
    """Cross-entropy over rows of Z = H^{-1} X W with one-hot targets.

    loss = sum_u in mask [ logsumexp(z_u) - z_u . y_u ]
    grad = X^T H^{-1} (softmax(Z) - Y)  (masked rows only)

    Two multi-column solves per call (forward + adjoint); eps=None runs both
    through the dense factor.
    """
    onehot = _check_one_hot(spec.y)
    w = np.asarray(w, dtype=np.float64)
    rhs = spec.x @ w
    if eps is None:
        z = spec.dense_solve(rhs)
    else:
        z, _ = spec.solver(eps).solve_multi(rhs)
    shifted = z - z.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1)) + z.max(axis=1)
    per_node = lse - np.sum(z * onehot, axis=1)
    mask = spec.mask_vector()
    loss = float(per_node @ mask)
    residual = (_softmax_rows(z) - onehot) * mask[:, None]
    if eps is None:
        back = spec.dense_solve(residual)
    else:
        back, _ = spec.solver(eps).solve_multi(residual)
    return loss, spec.x.T @ back


def ce_objective(spec: ModelSpec, w: np.ndarray, eps: float | None = None) -> float:
    return ce_loss_and_grad(spec, w, eps=eps)[0]


def ce_hessian_action(
    spec: ModelSpec,
    w: np.ndarray,
    class_idx: int,
    v: np.ndarray,
    weights: np.ndarray | None = None,
) -> np.ndarray:
    """Dense-oracle action of the per-class CE Hessian on v:

        X^T H^{-1} diag(s_i - s_i^2) H^{-1} X v,  s_i = softmax(Z)[:, i].

    `weights` overrides the softmax-derived diagonal (all-ones gives the mse
    Hessian X^T H^{-2} X).
    """
    _check_one_hot(spec.y)
    if weights is None:
        z = spec.dense_solve(spec.x @ np.asarray(w, dtype=np.float64))
        s = _softmax_rows(z)[:, class_idx]
        weights = s - s * s
    weights = np.asarray(weights, dtype=np.float64) * spec.mask_vector()
    inner = spec.dense_solve(spec.x @ np.asarray(v, dtype=np.float64))
    return spec.x.T @ spec.dense_solve(weights * inner)


def feature_condition(x: np.ndarray) -> float:
    """cond(X): dense SVD at desk scale (d <= 64, n <= 5000), else 30 rounds
    of power iteration on X^T X for the top end and inverse-free Rayleigh
    bounds for the bottom."""
    x = np.asarray(x, dtype=np.float64)
    n, d = x.shape
    if d <= 64 and n <= 5000:
        svals = np.linalg.svd(x, compute_uv=False)
        if svals[-1] <= 0:
            return np.inf
        return float(svals[0] / svals[-1])
    gram = x.T @ x
    rng = np.random.default_rng(0)
    v = rng.normal(size=d)
    for _ in range(30):
        v = gram @ v
        v /= np.linalg.norm(v)
    hi = float(v @ (gram @ v))
    # smallest eigenvalue via power iteration on (hi*I - gram)
    w = rng.normal(size=d)
    for _ in range(30):
        w = hi * w - gram @ w
        w /= np.linalg.norm(w)
    lo = hi - float(w @ (hi * w - gram @ w))
    if lo <= 0:
        return np.inf
    return float(np.sqrt(hi / lo))
