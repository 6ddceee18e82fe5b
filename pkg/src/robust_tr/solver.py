"""Auto-weighted robust TR decomposition by scaled steepest descent.

Each outer iteration sweeps the cores ``k = 1..N``. For one core the
half-quadratic weights are refreshed from the current residual, the
Gram-preconditioned gradient is formed, and an exact line search sets the
step. :func:`run_block_solver` is shared with the sketched solver, which
only swaps the data each block sees.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Sequence

import numpy as np
import scipy.linalg

from . import data
from .gram import GramCache, gram_via_chain
from .hq import KernelPolicy, correntropy_objective, hq_weight
from .tensor import ShapeError, as_mask, as_tensor, unfold_shifted
from .tr import (
    core_fold_2,
    core_unfold_2,
    random_cores,
    subchain_except,
    subchain_unfold,
    tr_reconstruct,
    validate_cores,
)

log = logging.getLogger(__name__)

#: How many times the regularizer may be raised tenfold after a failed solve.
MAX_LAMBDA_RAISES = 3


@dataclass
class SolverConfig:
    ranks: Sequence[int]
    lam: float = 1e-10
    kernel: KernelPolicy = field(default_factory=KernelPolicy)
    max_iter: int = 30
    tol: float = 1e-3
    seed: int = 0
    init_scale: float = 1.0
    sample_param: int | None = None
    variant: str = "sawrtrd"
    track_objective: bool = True

    def __post_init__(self):
        self.ranks = tuple(int(r) for r in self.ranks)
        if self.lam < 0:
            raise ValueError(f"lambda must be nonnegative, got {self.lam}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be at least 1, got {self.max_iter}")
        if not self.tol > 0:
            raise ValueError(f"tolerance must be positive, got {self.tol}")
        if self.init_scale < 0:
            raise ValueError("init_scale must be nonnegative")
        if self.sample_param is not None and self.sample_param < 1:
            raise ValueError(f"sample parameter must be at least 1, got {self.sample_param}")


@dataclass
class IterationRecord:
    iteration: int
    objective: float
    residual: float
    sigma: float
    steps: list
    e: float
    ms: float
    psnr: float = math.nan
    sample_sizes: list = field(default_factory=list)


@dataclass
class SolverTrace:
    """Per-iteration history of a solve."""

    label: str
    records: list = field(default_factory=list)
    initial_objective: float = math.nan
    converged: bool = False
    lam: float = 0.0

    def __len__(self) -> int:
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)


class BlockData(NamedTuple):
    """What one block update sees: shifted unfoldings and the subchain rows."""

    X: np.ndarray  # (I_k, m) data columns
    P: np.ndarray | None  # (I_k, m) 0/1 float mask, None when all observed
    Zneq: np.ndarray  # (m, r_k r_{k+1}) subchain unfolding rows
    sizes: tuple  # per-mode sample sizes


def init_cores(shape: Sequence[int], ranks: Sequence[int], seed=0, init_scale: float = 1.0) -> list[np.ndarray]:
    """Random Gaussian starting cores, deterministic in ``seed``."""
    return random_cores(shape, ranks, seed, init_scale)


def gradient_block(X, P, W, cores, k: int) -> np.ndarray:
    """Descent direction ``(W * P * (X_[k] - Z_k(2) Zneq^T)) @ Zneq`` for core ``k``.

    This is the negative gradient of ``0.5 * ||sqrt(W) * P * (X - R)||_F^2``
    with respect to ``Z_k(2)``. ``W=None`` means unit weights.
    """
    X = as_tensor(X)
    P = as_mask(P, X.shape)
    Zneq = subchain_unfold(subchain_except(cores, k))
    Xk = unfold_shifted(X, k)
    WP = unfold_shifted(P, k).astype(np.float64)
    if W is not None:
        if np.shape(W) != X.shape:
            raise ShapeError(f"weight shape {np.shape(W)} does not match {X.shape}")
        WP = WP * unfold_shifted(np.asarray(W, dtype=np.float64), k)
    Zk = core_unfold_2(cores[k])
    if Zk.shape[0] != Xk.shape[0] or Zneq.shape[0] != Xk.shape[1]:
        raise ShapeError(f"cores {[Z.shape for Z in cores]} do not match tensor {X.shape}")
    return (WP * (Xk - Zk @ Zneq.T)) @ Zneq


def scaled_gradient(d: np.ndarray, G: np.ndarray, lam: float) -> np.ndarray:
    """Preconditioned direction ``d @ inv(G + lam I)`` via a Cholesky solve.

    Raises :class:`numpy.linalg.LinAlgError` if ``G + lam I`` is not
    numerically positive definite. Inputs are not checked for NaN; the
    solver checks the updated core instead.
    """
    A = G + lam * np.eye(G.shape[0])
    c = scipy.linalg.cho_factor(A, lower=True, check_finite=False)
    return scipy.linalg.cho_solve(c, d.T, check_finite=False).T


def line_search_step(d: np.ndarray, h: np.ndarray, WP: np.ndarray, Zneq: np.ndarray) -> float | None:
    """Exact minimizing step along ``h`` for the weighted quadratic.

    ``WP`` is the elementwise product of weights and mask in unfolded form.
    Returns ``None`` when the direction is invisible under the mask
    (zero denominator), in which case the block is skipped.
    """
    Y = h @ Zneq.T
    denom = float(np.sum(WP * Y * Y))
    if not denom > 0.0:
        return None
    return float(np.sum(d * h)) / denom


def _full_block_source(X: np.ndarray, P: np.ndarray):
    Xs = [np.ascontiguousarray(unfold_shifted(X, k), dtype=np.float64) for k in range(X.ndim)]
    if P.all():
        Ps = [None] * X.ndim
    else:
        Ps = [np.ascontiguousarray(unfold_shifted(P, k), dtype=np.float64) for k in range(X.ndim)]

    def source(cores, k, t):
        Zneq = np.ascontiguousarray(subchain_unfold(subchain_except(cores, k)))
        return BlockData(Xs[k], Ps[k], Zneq, X.shape)

    return source


def _stop_matrix(cores, cache: GramCache) -> np.ndarray:
    ZN = core_unfold_2(cores[-1])
    return ZN @ gram_via_chain(cache, len(cores) - 1) @ ZN.T


def _check_inputs(X, P, config: SolverConfig, init):
    X = as_tensor(X)
    P = as_mask(P, X.shape)
    if not np.all(np.isfinite(X[P])):
        raise ValueError("observed entries must be finite")
    if not P.any():
        raise ValueError("the observation mask has no observed entry")
    if len(config.ranks) != X.ndim:
        raise ShapeError(f"{len(config.ranks)} ranks given for a {X.ndim}-way tensor")
    if init is None:
        cores = init_cores(X.shape, config.ranks, config.seed, config.init_scale)
    else:
        cores = [np.array(Z, dtype=np.float64) for Z in validate_cores(init)]
        if tuple(Z.shape[1] for Z in cores) != X.shape:
            raise ShapeError("initial cores do not match the tensor shape")
    return X, P, cores


def _block_width(E, P, policy: KernelPolicy) -> float:
    # adapt_kernel_width without re-validating the mask
    if policy.mode == "fixed":
        return float(policy.sigma)
    e = E if P is None else E[P > 0]
    if e.size == 0:
        raise ValueError("kernel width needs at least one observed entry")
    return max(policy.sigma_min, policy.theta * math.sqrt(float(np.vdot(e, e)) / e.size))


def policy_per_block(policy: KernelPolicy, sketched: bool) -> bool:
    """Whether an adaptive width is refreshed at every block."""
    if policy.update == "auto":
        return sketched
    return policy.update == "block"


def run_block_solver(
    X,
    P,
    config: SolverConfig,
    block_source: Callable | None = None,
    *,
    precond: str = "global",
    label: str = "awrtrd",
    init=None,
    truth=None,
) -> tuple[list[np.ndarray], SolverTrace]:
    """Cyclic block scaled-steepest-descent loop shared by all solvers.

    ``block_source(cores, k, t)`` returns the :class:`BlockData` used to
    update core ``k`` in iteration ``t``; ``None`` means the full tensor.
    ``precond`` is ``"global"`` (full-core Gram via the cache),
    ``"local"`` (Gram of the sampled rows) or ``"none"``.
    """
    if precond not in ("global", "local", "none"):
        raise ValueError(f"unknown preconditioner {precond!r}")
    X, P, cores = _check_inputs(X, P, config, init)
    per_block = policy_per_block(config.kernel, sketched=block_source is not None)
    if block_source is None:
        block_source = _full_block_source(X, P)
    N = X.ndim
    policy = config.kernel
    lam = config.lam
    cache = GramCache(cores)
    trace = SolverTrace(label=label)
    sigma = math.inf if policy.infinite else (policy.sigma if policy.mode == "fixed" else math.nan)

    def objective_and_residual(cores, sigma):
        E = X - tr_reconstruct(cores)
        if math.isinf(sigma) or math.isnan(sigma):
            return math.nan, float(np.linalg.norm(E[P]))
        e = E[P]
        w = hq_weight(e, sigma)
        return correntropy_objective(E, P, sigma), float(np.sqrt(np.sum(w * e * e)))

    if config.track_objective and policy.mode == "fixed":
        trace.initial_objective = objective_and_residual(cores, sigma)[0]

    D_prev = _stop_matrix(cores, cache)
    for t in range(config.max_iter):
        t0 = time.perf_counter()
        steps, sizes = [], []
        for k in range(N):
            blk = block_source(cores, k, t)
            sizes.append(tuple(blk.sizes))
            Zk = core_unfold_2(cores[k])
            E = blk.X - Zk @ blk.Zneq.T
            if not policy.infinite and (per_block or k == 0):
                sigma = _block_width(E, blk.P, policy)
            if policy.infinite:
                WP = np.ones_like(E) if blk.P is None else blk.P
            else:
                WP = hq_weight(E, sigma)
                if blk.P is not None:
                    WP = WP * blk.P
            d = (WP * E) @ blk.Zneq
            if precond == "none":
                h = d
            else:
                G = gram_via_chain(cache, k) if precond == "global" else blk.Zneq.T @ blk.Zneq
                for attempt in range(MAX_LAMBDA_RAISES + 1):
                    try:
                        h = scaled_gradient(d, G, lam)
                        break
                    except np.linalg.LinAlgError:
                        if attempt == MAX_LAMBDA_RAISES:
                            raise
                        lam = max(lam * 10.0, 1e-12)
                        log.warning("preconditioner not positive definite; lambda raised to %g", lam)
            eta = line_search_step(d, h, WP, blk.Zneq) if np.any(d) else None
            if eta is None:
                steps.append(0.0)
                continue
            if eta < 0:
                raise FloatingPointError(f"negative step {eta} at iteration {t}, block {k}")
            Znew = core_fold_2(Zk + eta * h, cores[k].shape)
            if not np.all(np.isfinite(Znew)):
                raise FloatingPointError(f"non-finite core {k} at iteration {t} (step {eta})")
            cores[k] = Znew
            cache.refresh(k, Znew)
            steps.append(eta)

        D = _stop_matrix(cores, cache)
        nD = float(np.linalg.norm(D))
        diff = float(np.linalg.norm(D - D_prev))
        e = 0.0 if diff == 0.0 else (diff / nD if nD > 0 else math.inf)
        D_prev = D
        ms = (time.perf_counter() - t0) * 1e3

        objective, residual = (math.nan, math.nan)
        if config.track_objective:
            objective, residual = objective_and_residual(cores, sigma)
        rec = IterationRecord(t + 1, objective, residual, float(sigma), steps, e, ms, sample_sizes=sizes)
        if truth is not None:
            rec.psnr = data.psnr(truth, tr_reconstruct(cores))
        trace.records.append(rec)
        if e < config.tol:
            trace.converged = True
            break
    trace.lam = lam
    return cores, trace


def awrtrd(X, P, config: SolverConfig, *, init=None, truth=None):
    """Full-data auto-weighted robust TR decomposition.

    Returns the fitted cores and a :class:`SolverTrace`.
    """
    return run_block_solver(X, P, config, label="awrtrd", init=init, truth=truth)


def unweighted_solve(X, P, config: SolverConfig, *, init=None, truth=None):
    """Masked least-squares TR fit: :func:`awrtrd` with unit weights."""
    cfg = replace(config, kernel=KernelPolicy(mode="inf"))
    return run_block_solver(X, P, cfg, label="unweighted", init=init, truth=truth)
