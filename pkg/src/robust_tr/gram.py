"""Fast Gram matrix computation (FGMC) for TR subchains.

The Gram matrix of ``Z^{!=k}_[2]`` is assembled from small per-core matrices
``Q_j = sum_m kron(Z_j(m), Z_j(m))`` chained around the ring, so the
subchain itself is never materialized. Cost is linear in the tensor order.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .tensor import ShapeError
from .tr import subchain_except, subchain_unfold, validate_cores

#: Largest number of float64 entries an explicit or chained product may hold.
DEFAULT_MEMORY_BUDGET = 2**24


class GramBudgetError(MemoryError):
    """Raised when a Gram computation would exceed the configured budget."""


class StaleCacheError(RuntimeError):
    """Raised when a chain product is requested over a dirty cache entry."""


def core_q_matrix(Z: np.ndarray) -> np.ndarray:
    """Per-core chain factor of shape ``(r_k**2, r_{k+1}**2)``.

    Row ``a * r_k + a'`` and column ``i * r_{k+1} + j`` hold
    ``(Z[:, :, i] @ Z[:, :, j].T)[a, a']``, i.e. the sum over lateral slices
    of ``kron(Z(m), Z(m))``.
    """
    r0, _, r1 = Z.shape
    return np.einsum("ami,bmj->abij", Z, Z).reshape(r0 * r0, r1 * r1)


def _phi(P: np.ndarray, r_next: int, r_k: int) -> np.ndarray:
    # P[(b, b'), (a, a')] -> G[a + b*r_k, a' + b'*r_k]
    P4 = P.reshape(r_next, r_next, r_k, r_k)
    G4 = np.transpose(P4, (2, 0, 3, 1))  # (a, b, a', b')
    return G4.reshape(r_k * r_next, r_k * r_next, order="F")


class GramCache:
    """Per-core ``Q`` matrices plus dirty flags.

    Refreshing core ``k`` recomputes only ``Q_k``; every other entry keeps
    its identity so readers can rely on it between refreshes.
    """

    def __init__(self, cores: Sequence[np.ndarray], memory_budget: int = DEFAULT_MEMORY_BUDGET):
        cores = validate_cores(cores)
        self.memory_budget = memory_budget
        self.core_shapes = [Z.shape for Z in cores]
        for Z in cores:
            self._check_budget(Z.shape[0] ** 2 * Z.shape[2] ** 2)
        self.q = [core_q_matrix(Z) for Z in cores]
        self.dirty = [False] * len(cores)

    def __len__(self) -> int:
        return len(self.q)

    def _check_budget(self, entries: int) -> None:
        if entries > self.memory_budget:
            raise GramBudgetError(
                f"Gram computation needs {entries} entries, budget is {self.memory_budget}"
            )

    def mark_dirty(self, k: int) -> None:
        self.dirty[k] = True

    def refresh(self, k: int, Z: np.ndarray) -> "GramCache":
        """Recompute ``Q_k`` from ``Z``; the core shape must not change."""
        if Z.shape != self.core_shapes[k]:
            raise ShapeError(
                f"core {k} changed shape {self.core_shapes[k]} -> {Z.shape}; rebuild the cache"
            )
        self.q[k] = core_q_matrix(Z)
        self.dirty[k] = False
        return self

    def chain(self, k: int) -> np.ndarray:
        """Ordered product ``Q_{k+1} ... Q_N Q_1 ... Q_{k-1}``, left to right."""
        N = len(self.q)
        order = [(k + 1 + j) % N for j in range(N - 1)]
        stale = [j for j in order if self.dirty[j]]
        if stale:
            raise StaleCacheError(f"cache entries {stale} are stale")
        out = self.q[order[0]]
        for j in order[1:]:
            out = out @ self.q[j]
        return out


def gram_via_chain(cache: GramCache, k: int) -> np.ndarray:
    """Gram matrix ``(Z^{!=k}_[2]).T @ Z^{!=k}_[2]`` from the cached chain."""
    N = len(cache)
    if not 0 <= k < N:
        raise IndexError(f"mode index {k} out of range for {N} cores")
    r_k = cache.core_shapes[k][0]
    r_next = cache.core_shapes[k][2]
    cache._check_budget((r_k * r_next) ** 2)
    return _phi(cache.chain(k), r_next, r_k)


def gram_explicit(cores: Sequence[np.ndarray], k: int, memory_budget: int = DEFAULT_MEMORY_BUDGET) -> np.ndarray:
    """Reference Gram matrix obtained by materializing the subchain unfolding."""
    cores = validate_cores(cores)
    rows = int(np.prod([Z.shape[1] for j, Z in enumerate(cores) if j != k]))
    cols = cores[k].shape[0] * cores[k].shape[2]
    if rows * cols > memory_budget:
        raise GramBudgetError(
            f"explicit subchain needs {rows} x {cols} entries, budget is {memory_budget}"
        )
    S = subchain_unfold(subchain_except(cores, k))
    return S.T @ S
