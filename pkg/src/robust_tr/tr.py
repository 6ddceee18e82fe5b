"""Tensor-ring (TR) format algebra.

A TR model is a list of third-order cores ``Z_k`` of shape
``(r_k, I_k, r_{k+1})`` with ``r_{N+1} = r_1``. Lateral slices ``Z_k[:, i, :]``
multiply around the ring and the trace of the product gives one entry.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .tensor import ShapeError



def validate_cores(cores: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Check ring-consistent ranks and return the cores as float64 arrays."""
    cores = [np.asarray(Z, dtype=np.float64) for Z in cores]
    if len(cores) < 2:
        raise ShapeError("a TR model needs at least two cores")
    for k, Z in enumerate(cores):
        if Z.ndim != 3:
            raise ShapeError(f"core {k} must be 3-way, got shape {Z.shape}")
        if min(Z.shape) < 1:
            raise ShapeError(f"core {k} has an empty mode: {Z.shape}")
        nxt = cores[(k + 1) % len(cores)]
        if Z.shape[2] != nxt.shape[0]:
            raise ShapeError(
                f"rank mismatch between core {k} {Z.shape} and core "
                f"{(k + 1) % len(cores)} {nxt.shape}"
            )
    return cores


def tr_ranks(cores: Sequence[np.ndarray]) -> tuple[int, ...]:
    return tuple(Z.shape[0] for Z in cores)


def tr_shape(cores: Sequence[np.ndarray]) -> tuple[int, ...]:
    return tuple(Z.shape[1] for Z in cores)


def tr_entry(cores: Sequence[np.ndarray], index: Sequence[int]) -> float:
    """Entry ``Tr(Z_1(i_1) Z_2(i_2) ... Z_N(i_N))``."""
    if len(index) != len(cores):
        raise IndexError(f"index has {len(index)} components, model has {len(cores)} modes")
    prod = None
    for Z, i in zip(cores, index):
        if not 0 <= i < Z.shape[1]:
            raise IndexError(f"index {tuple(index)} out of range for shape {tr_shape(cores)}")
        prod = Z[:, i, :] if prod is None else prod @ Z[:, i, :]
    return float(np.trace(prod))


def merge_cores(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Merge two adjacent cores.

    The slice at combined index ``ia + ib * I_a`` is ``A(ia) @ B(ib)``.
    """
    if A.shape[2] != B.shape[0]:
        raise ShapeError(f"inner ranks differ: {A.shape} x {B.shape}")
    ra, Ia, rb = A.shape
    Ib, rc = B.shape[1], B.shape[2]
    merged = (A.reshape(ra * Ia, rb) @ B.reshape(rb, Ib * rc)).reshape(ra, Ia, Ib, rc)
    return merged.transpose(0, 2, 1, 3).reshape(ra, Ib * Ia, rc)


def _merge_chain(cores: Sequence[np.ndarray]) -> np.ndarray:
    out = cores[0]
    for Z in cores[1:]:
        out = merge_cores(out, Z)
    return out


def subchain_prefix(cores: Sequence[np.ndarray], c: int) -> np.ndarray:
    """Merge the first ``c`` cores into ``Z^{<=c}`` of shape ``(r_1, I_1...I_c, r_{c+1})``."""
    if not 1 <= c <= len(cores):
        raise IndexError(f"prefix length {c} out of range 1..{len(cores)}")
    return _merge_chain(cores[:c])


def subchain_except(cores: Sequence[np.ndarray], k: int) -> np.ndarray:
    """Merge every core except ``k`` (0-based) in cyclic order ``k+1, ..., k-1``.

    Result has shape ``(r_{k+1}, prod_{j != k} I_j, r_k)`` with ``i_{k+1}``
    varying fastest along the middle mode.
    """
    N = len(cores)
    if not 0 <= k < N:
        raise IndexError(f"mode index {k} out of range for {N} cores")
    order = [(k + 1 + j) % N for j in range(N - 1)]
    return _merge_chain([cores[j] for j in order])


def core_unfold_2(Z: np.ndarray) -> np.ndarray:
    """Classical mode-2 unfolding ``Z_(2)`` of shape ``(I, r_k * r_{k+1})``.

    Column ``a + b * r_k`` holds ``Z[a, :, b]``.
    """
    return Z.transpose(1, 0, 2).reshape(Z.shape[1], -1, order="F")


def core_fold_2(M: np.ndarray, core_shape: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`core_unfold_2`."""
    r0, I, r1 = core_shape
    if M.shape != (I, r0 * r1):
        raise ShapeError(f"matrix {M.shape} does not fold to core shape {tuple(core_shape)}")
    return M.reshape(I, r0, r1, order="F").transpose(1, 0, 2)


def subchain_unfold(S: np.ndarray) -> np.ndarray:
    """Shifted mode-2 unfolding ``S_[2]`` of a subchain ``(r_{k+1}, J, r_k)``.

    Row ``j``, column ``a + b * r_k`` holds ``S[b, j, a]``, which makes
    ``X_[k] = Z_k(2) @ S_[2].T``.
    """
    return np.transpose(S, (1, 2, 0)).reshape(S.shape[1], -1, order="F")


def tr_reconstruct(cores: Sequence[np.ndarray]) -> np.ndarray:
    """Full tensor represented by ``cores``, built by sequential merging."""
    full = _merge_chain(cores)
    diag = np.einsum("aja->j", full)
    return diag.reshape(tr_shape(cores), order="F")


def unfold_via_cores(cores: Sequence[np.ndarray], k: int) -> np.ndarray:
    """Right-hand side of the ring unfolding identity: ``Z_k(2) @ (Z^{!=k}_[2]).T``."""
    return core_unfold_2(cores[k]) @ subchain_unfold(subchain_except(cores, k)).T


def random_cores(shape: Sequence[int], ranks: Sequence[int], rng, scale: float = 1.0) -> list[np.ndarray]:
    """Gaussian cores with entry std ``scale / sqrt(r_k * r_{k+1})``."""
    if len(shape) != len(ranks):
        raise ShapeError(f"{len(shape)} modes but {len(ranks)} ranks")
    if len(shape) < 2:
        raise ShapeError("a TR model needs at least two cores")
    if min(ranks) < 1 or min(shape) < 1:
        raise ShapeError(f"ranks and mode sizes must be positive: {ranks}, {shape}")
    rng = np.random.default_rng(rng)
    N = len(shape)
    cores = []
    for k in range(N):
        r0, r1 = int(ranks[k]), int(ranks[(k + 1) % N])
        std = scale / np.sqrt(r0 * r1)
        cores.append(rng.standard_normal((r0, int(shape[k]), r1)) * std)
    return cores
