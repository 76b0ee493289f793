"""Per-class gradient descent with approximate solves (the unpreconditioned
reference trainer).

The per-class objective l_i(w) = 1/2 || H^{-1}(X w - yhat_i) ||^2 has gradient
X^T H^{-2} (X w - yhat_i); each step replaces the two H^{-1} applications with
a contract solver at rate mu (Jacobi-CG by default, or the plain inner
gradient-descent solver below). With

    mu  = min( sqrt(target_eps) / (50 cond(X) lam_eff^2), 1 ),
    gamma = 25 * target_eps^{-1/2} * cond(X) * lam_eff^2 * mu   (<= 1/2),
    eta = (1 - gamma) / ((1 + gamma)^2 * L),

descent is monotone and the iterate reaches (1 + target_eps) * optimum in
O(cond(X^T H^{-2} X) log(1/target_eps)) steps; the iteration count inherits
the full cond(X)^2 dependence that the preconditioned trainer removes.
lam_eff = max(lam, 1) throughout the surrogates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import BadParams, NoConvergence
from .model import (
    DENSE_ORACLE_CAP,
    ModelSpec,
    SubProblem,
    ce_loss_and_grad,
    ce_objective,
    feature_condition,
    make_subproblems,
    mse_objective,
)
from .trace import LossTrace, Timer


def lam_eff(lam: float) -> float:
    return max(float(lam), 1.0)


def auto_mu(target_eps: float, cond_x: float, lam: float) -> float:
    """Solver rate keeping the relative gradient error below 1/2."""
    return min(math.sqrt(target_eps) / (50.0 * cond_x * lam_eff(lam) ** 2), 1.0)


def gamma_bound(mu: float, target_eps: float, cond_x: float, lam: float) -> float:
    """Worst-case relative gradient error induced by solver rate mu."""
    return 25.0 * cond_x * lam_eff(lam) ** 2 * mu / math.sqrt(target_eps)


def inner_gd_solve(
    op: sp.spmatrix,
    lam: float,
    u: np.ndarray,
    eps: float,
    max_iter: int | None = None,
) -> tuple[np.ndarray, int]:
    """Plain gradient descent on 1/2||Hv - u||^2 with the spectral surrogates
    sigma_max(H) <= 3 lam_eff, sigma_min(H) >= 1.

    Step 1/(9 lam_eff^2) contracts the residual: ||H v_t - u||^2 <=
    (1 - (9 lam_eff^2)^{-1})^t ||u||^2, so the stop rule
    ||Hv - u|| <= eps/sqrt(3 lam_eff) ||u|| (which certifies the energy-norm
    contract at rate eps) is reached within

        T = log(3 lam_eff / eps^2) / -log(1 - (9 lam_eff^2)^{-1}) + 1

    iterations; that bound is the default cap.
    """
    if not 0.0 < eps < 1.0:
        raise BadParams(f"eps must be in (0, 1), got {eps}")
    le = lam_eff(lam)
    smooth = 9.0 * le * le
    step = 1.0 / smooth
    if max_iter is None:
        max_iter = inner_gd_bound(lam, eps)
    u = np.asarray(u, dtype=np.float64)
    unorm = float(np.linalg.norm(u))
    if unorm == 0.0:
        return np.zeros_like(u), 0
    tol = eps / math.sqrt(3.0 * le) * unorm
    v = np.zeros_like(u)
    for it in range(1, max_iter + 1):
        r = op @ v - u
        if float(np.linalg.norm(r)) <= tol:
            return v, it - 1
        v -= step * (op @ r)
    r = op @ v - u
    if float(np.linalg.norm(r)) <= tol:
        return v, max_iter
    raise NoConvergence(
        f"inner GD: no convergence in {max_iter} iterations", iterations=max_iter
    )


def inner_gd_bound(lam: float, eps: float) -> int:
    """The iteration bound the solver above provably meets."""
    le = lam_eff(lam)
    rate = -math.log(1.0 - 1.0 / (9.0 * le * le))
    return int(math.ceil(math.log(3.0 * le / eps**2) / rate + 1.0))


def approx_gradient(
    spec: ModelSpec,
    sub: SubProblem,
    w: np.ndarray,
    solve: Callable[[np.ndarray], np.ndarray],
) -> np.ndarray:
    """X^T S(M S(X w - yhat)) where S is any contract solver for H.

    Equals the exact gradient when S is an exact inverse; with S at rate mu
    the relative error is bounded by gamma_bound(mu, ...).
    """
    u = spec.x @ np.asarray(w, dtype=np.float64) - sub.yhat
    inner = solve(u) * spec.mask_vector()
    return spec.x.T @ solve(inner)


@dataclass
class BaselineConfig:
    lam: float = 1.0
    target_eps: float = 1e-3
    loss_kind: str = "mse"  # "mse" | "ce"
    mu: float | None = None  # None -> auto_mu
    eta: float | None = None  # None -> descent-lemma step from estimated L
    max_outer: int = 20000
    use_cg_inner: bool = True  # False -> inner_gd_solve per application

    def __post_init__(self):
        if self.loss_kind not in ("mse", "ce"):
            raise BadParams(f"loss_kind must be mse or ce, got {self.loss_kind}")
        if not self.target_eps > 0:
            raise BadParams(f"target_eps must be > 0, got {self.target_eps}")


@dataclass
class TrainResult:
    weights: np.ndarray
    trace: LossTrace
    iterations: int
    converged: bool
    mu: float
    eta: float
    cond_x: float


def hessian_norm_estimate(
    spec: ModelSpec,
    transform: np.ndarray | None = None,
    rounds: int = 20,
) -> float:
    """Largest eigenvalue of (P' X)^T H^{-1} M H^{-1} (X P') by power
    iteration with near-exact solves; 5% headroom so a short run cannot
    underestimate and destabilize the step size."""
    d = spec.d
    rng = np.random.default_rng(0)
    v = rng.normal(size=d)
    v /= np.linalg.norm(v)
    handle = spec.solver(1e-12)
    mask = spec.mask_vector()
    ray = 1.0
    for _ in range(rounds):
        t = v if transform is None else transform @ v
        z, _ = handle.solve(spec.x @ t)
        z, _ = handle.solve(mask * z)
        hv = spec.x.T @ z
        if transform is not None:
            hv = transform @ hv
        ray = float(v @ hv)
        nrm = np.linalg.norm(hv)
        if nrm == 0.0:
            return 0.0
        v = hv / nrm
    return 1.05 * max(ray, np.finfo(float).tiny)


def default_loss_fn(spec: ModelSpec, loss_kind: str) -> Callable[[np.ndarray], float]:
    """True-objective evaluator for traces: dense at desk scale, a tight
    solver beyond it."""
    eps = None if spec.n <= DENSE_ORACLE_CAP else 1e-9
    if loss_kind == "ce":
        return lambda w: ce_objective(spec, w, eps=eps)
    return lambda w: mse_objective(spec, w, eps=eps)


def stop_threshold(target_eps: float, lstar: float | None) -> float | None:
    """Loss level that counts as converged.

    Multiplicative (1 + eps) * lstar against a positive optimum; an exactly
    feasible instance (lstar == 0) falls back to the absolute level eps, since
    the multiplicative target is unreachable in floats.
    """
    if lstar is None:
        return None
    return (1.0 + target_eps) * lstar if lstar > 0 else target_eps


def train_baseline(
    spec: ModelSpec,
    cfg: BaselineConfig,
    lstar: float | None = None,
    loss_fn: Callable[[np.ndarray], float] | None = None,
    timer: Timer | None = None,
) -> TrainResult:
    """Lockstep GD over all class columns.

    Stops once loss_fn(W) clears stop_threshold (when lstar is given),
    otherwise runs max_outer iterations; converged=False means the cap hit
    first. The trace records the loss at iteration 0 and after every step.
    """
    if cfg.lam != spec.lam:
        raise BadParams(f"cfg.lam={cfg.lam} != spec.lam={spec.lam}")
    timer = timer or Timer(enabled=False)
    loss_fn = loss_fn or default_loss_fn(spec, cfg.loss_kind)
    cond_x = feature_condition(spec.x)
    mu = cfg.mu if cfg.mu is not None else auto_mu(cfg.target_eps, cond_x, cfg.lam)
    gamma = min(gamma_bound(mu, cfg.target_eps, cond_x, cfg.lam), 0.5)
    if cfg.eta is None:
        smooth = hessian_norm_estimate(spec)
        if cfg.loss_kind == "ce":
            smooth *= 0.25  # softmax curvature weights s - s^2 <= 1/4
        eta = (1.0 - gamma) / ((1.0 + gamma) ** 2 * smooth)
    else:
        eta = cfg.eta

    if cfg.use_cg_inner:
        handle = spec.solver(mu)
        solve = lambda u: handle.solve(u)[0]
    else:
        solve = lambda u: inner_gd_solve(spec.op, cfg.lam, u, mu)[0]

    weights = np.zeros((spec.d, spec.c))
    subs = make_subproblems(spec)
    threshold = stop_threshold(cfg.target_eps, lstar)
    trace = LossTrace()
    loss = loss_fn(weights)
    trace.append(0, timer.elapsed_ns(), loss)
    converged = threshold is not None and loss <= threshold
    it = 0
    while not converged and it < cfg.max_outer:
        it += 1
        if cfg.loss_kind == "ce":
            _, grad = ce_loss_and_grad(spec, weights, eps=mu)
            weights = weights - eta * grad
        else:
            for sub in subs:
                g = approx_gradient(spec, sub, weights[:, sub.index], solve)
                weights[:, sub.index] -= eta * g
        loss = loss_fn(weights)
        trace.append(it, timer.elapsed_ns(), loss)
        converged = threshold is not None and loss <= threshold
    return TrainResult(
        weights=weights,
        trace=trace,
        iterations=it,
        converged=bool(converged),
        mu=mu,
        eta=eta,
        cond_x=cond_x,
    )
