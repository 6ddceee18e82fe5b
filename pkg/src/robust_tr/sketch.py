"""Randomized subtensor sketching and the scalable solver.

Each block update draws per-mode index sets, keeps the active mode whole,
and works on the sampled subtensor together with the matching lateral
slices of every core. The Gram preconditioner still comes from the full
cores through the FGMC cache.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .solver import BlockData, SolverConfig, gradient_block, run_block_solver
from .tensor import ShapeError, as_mask, as_tensor, unfold_shifted
from .tr import subchain_except, subchain_unfold

VARIANTS = ("sawrtrd", "unscaled-gradient", "local-scaled-term", "uniform-row-sampling")
VARIANT_ALIASES = {
    "unscaled": "unscaled-gradient",
    "local-gram": "local-scaled-term",
    "row-uniform": "uniform-row-sampling",
}


@dataclass(frozen=True)
class SketchPlan:
    """Sorted per-mode index sets; mode ``k`` is the active (unsampled) one."""

    indices: tuple
    k: int

    @property
    def sizes(self) -> tuple:
        return tuple(len(ix) for ix in self.indices)

    @property
    def is_full(self) -> bool:
        return all(len(ix) == ix[-1] + 1 for ix in self.indices)


def sample_size(J: int, free_modes: int) -> int:
    """Smallest integer ``s`` with ``s ** free_modes >= J``."""
    if J < 1:
        raise ValueError(f"sample parameter must be at least 1, got {J}")
    if free_modes <= 0:
        return 1
    s = max(1, int(math.floor(J ** (1.0 / free_modes))) - 1)
    while s**free_modes < J:
        s += 1
    return s


def plan_rng(seed: int) -> np.random.Generator:
    """Counter-based (Philox) stream that feeds every plan of one run."""
    return np.random.Generator(np.random.Philox(key=seed))


def make_sketch_plan(shape: Sequence[int], k: int, J: int | None, seed=0) -> SketchPlan:
    """Draw uniform index sets without replacement.

    Mode ``k`` keeps all ``I_k`` indices; every other mode gets
    ``min(I_j, s)`` indices with ``s = ceil(J ** (1 / (N - 1)))``.
    ``J=None`` yields the full plan.
    """
    shape = tuple(int(s) for s in shape)
    N = len(shape)
    if not 0 <= k < N:
        raise IndexError(f"mode index {k} out of range for {N} modes")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    s = None if J is None else sample_size(J, N - 1)
    return SketchPlan(_draw_indices(shape, k, s, rng), k)


def _draw_indices(shape, k, s, rng) -> tuple:
    return tuple(
        np.arange(I) if j == k or s is None or s >= I else np.sort(rng.permutation(I)[:s])
        for j, I in enumerate(shape)
    )


def _check_plan(shape, plan: SketchPlan) -> None:
    if len(plan.indices) != len(shape):
        raise ShapeError(f"plan has {len(plan.indices)} modes, tensor has {len(shape)}")
    for ix, I in zip(plan.indices, shape):
        if len(ix) == 0 or ix.min() < 0 or ix.max() >= I:
            raise IndexError(f"plan indices out of range for shape {tuple(shape)}")


def _gather(X: np.ndarray, indices) -> np.ndarray:
    for axis, ix in enumerate(indices):
        if len(ix) != X.shape[axis]:
            X = np.take(X, ix, axis=axis)
    return X


def sample_subtensor(X, P, plan: SketchPlan):
    """Gather ``X`` and ``P`` along every mode; returns ``(X_I, P_I)``.

    ``P=None`` (everything observed) passes through as ``None``.
    """
    X = np.asarray(X)
    _check_plan(X.shape, plan)
    P_I = None if P is None else _gather(np.asarray(P), plan.indices)
    return _gather(X, plan.indices), P_I


def sample_cores(cores, plan: SketchPlan) -> list[np.ndarray]:
    """Lateral slices of each core selected by the plan."""
    _check_plan([Z.shape[1] for Z in cores], plan)
    return [Z[:, ix, :] for Z, ix in zip(cores, plan.indices)]


def sampled_gradient(X_I, P_I, W_I, sampled, k: int) -> np.ndarray:
    """Descent direction of the block evaluated on a sketch."""
    if len(sampled[k][0, :, 0]) != np.shape(X_I)[k]:
        raise ShapeError("the active mode must be complete in the sketch")
    return gradient_block(X_I, P_I, W_I, sampled, k)


def _unfolded(A, k):
    return None if A is None else np.ascontiguousarray(unfold_shifted(A, k), dtype=np.float64)


def shifted_columns(shape: Sequence[int], k: int, indices) -> np.ndarray:
    """Columns of the shifted mode-``k`` unfolding selected by a plan.

    ``X_[k][:, shifted_columns(...)]`` equals the shifted unfolding of the
    gathered subtensor, column order included.
    """
    N = len(shape)
    order = [(k + 1 + i) % N for i in range(N - 1)]
    cols = np.asarray(indices[order[0]], dtype=np.intp)
    stride = shape[order[0]]
    for j in order[1:]:
        cols = np.add.outer(indices[j] * stride, cols).ravel()
        stride *= shape[j]
    return cols


def _sketch_source(X, P, J, seed):
    rng = plan_rng(seed)
    Xs = [_unfolded(X, k) for k in range(X.ndim)]
    Ps = None if P.all() else [_unfolded(P, k) for k in range(X.ndim)]
    s = None if J is None else sample_size(J, X.ndim - 1)

    def source(cores, k, t):
        indices = _draw_indices(X.shape, k, s, rng)
        sizes = tuple(len(ix) for ix in indices)
        if sizes == X.shape:
            X_k, P_k, sampled = Xs[k], None if Ps is None else Ps[k], cores
        else:
            cols = shifted_columns(X.shape, k, indices)
            X_k = Xs[k][:, cols]
            P_k = None if Ps is None else Ps[k][:, cols]
            sampled = [Z if len(ix) == Z.shape[1] else Z[:, ix, :] for Z, ix in zip(cores, indices)]
        Zneq = subchain_unfold(subchain_except(sampled, k))
        return BlockData(X_k, P_k, np.ascontiguousarray(Zneq), sizes)

    return source


def subchain_rows(cores, k: int, cols: np.ndarray) -> np.ndarray:
    """Selected rows of ``Z^{!=k}_[2]`` built from per-row slice products."""
    N = len(cores)
    order = [(k + 1 + j) % N for j in range(N - 1)]
    dims = [cores[j].shape[1] for j in order]
    multi = np.unravel_index(cols, dims, order="F")
    M = np.transpose(cores[order[0]][:, multi[0], :], (1, 0, 2))
    for j, ix in zip(order[1:], multi[1:]):
        M = M @ np.transpose(cores[j][:, ix, :], (1, 0, 2))
    return M.reshape(len(cols), -1)


def _row_source(X, P, J, seed):
    rng = plan_rng(seed)
    s = None if J is None else sample_size(J, X.ndim - 1)
    Xs = [unfold_shifted(X, k) for k in range(X.ndim)]
    Ps = None if P.all() else [unfold_shifted(P, k).astype(np.float64) for k in range(X.ndim)]

    def source(cores, k, t):
        sizes = tuple(I if j == k or s is None else min(I, s) for j, I in enumerate(X.shape))
        m = int(np.prod([s for j, s in enumerate(sizes) if j != k]))
        total = Xs[k].shape[1]
        cols = np.arange(total) if m >= total else np.sort(rng.permutation(total)[:m])
        return BlockData(
            np.ascontiguousarray(Xs[k][:, cols]),
            None if Ps is None else np.ascontiguousarray(Ps[k][:, cols]),
            np.ascontiguousarray(subchain_rows(cores, k, cols)),
            sizes,
        )

    return source


def _prepare(X, P):
    X = as_tensor(X)
    return X, as_mask(P, X.shape)


def sawrtrd(X, P, config: SolverConfig, *, init=None, truth=None):
    """Scalable auto-weighted robust TR decomposition.

    Block updates use sketches of size set by ``config.sample_param``; with
    ``sample_param=None`` (or one large enough) every plan is full and the
    run reproduces :func:`robust_tr.solver.awrtrd` exactly.
    """
    X, P = _prepare(X, P)
    source = _sketch_source(X, P, config.sample_param, config.seed)
    return run_block_solver(X, P, config, source, label="sawrtrd", init=init, truth=truth)


def canonical_variant(variant: str) -> str:
    name = VARIANT_ALIASES.get(variant, variant)
    if name not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; choose from {VARIANTS + tuple(VARIANT_ALIASES)}")
    return name


def ablation_variant(X, P, config: SolverConfig, variant: str, *, init=None, truth=None):
    """Run one ablation arm at the sample budget of ``config.sample_param``.

    ``unscaled-gradient`` drops the Gram preconditioner, ``local-scaled-term``
    preconditions with the Gram of the sampled cores, and
    ``uniform-row-sampling`` draws the same number of subchain rows
    uniformly instead of sketching a subtensor.
    """
    name = canonical_variant(variant)
    X, P = _prepare(X, P)
    J, seed = config.sample_param, config.seed
    if name == "sawrtrd":
        return sawrtrd(X, P, config, init=init, truth=truth)
    if name == "uniform-row-sampling":
        source, precond = _row_source(X, P, J, seed), "global"
    else:
        source = _sketch_source(X, P, J, seed)
        precond = "none" if name == "unscaled-gradient" else "local"
    return run_block_solver(X, P, config, source, precond=precond, label=name, init=init, truth=truth)


def solve(X, P, config: SolverConfig, *, init=None, truth=None):
    """Dispatch on ``config.variant``; the default is :func:`sawrtrd`."""
    return ablation_variant(X, P, config, config.variant, init=init, truth=truth)
