"""Dense tensor helpers: unfoldings, folding, masking and norms.

Tensors are plain :class:`numpy.ndarray` objects indexed ``X[i1, ..., iN]``.
Whenever a tensor is flattened (unfoldings, file payloads) the linear order
is pinned to mode-1-fastest, i.e. Fortran order, independently of how the
array happens to be stored in memory.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np


class ShapeError(ValueError):
    """Raised when tensor, mask or matrix dimensions do not agree."""


def as_tensor(X, *, min_ndim: int = 2) -> np.ndarray:
    """Validate ``X`` as a dense real tensor and return it as float64."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim < min_ndim:
        raise ShapeError(f"tensor needs at least {min_ndim} modes, got {X.ndim}")
    if X.size == 0:
        raise ShapeError(f"tensor has a zero-sized mode: {X.shape}")
    return X


def as_mask(P, shape: Sequence[int] | None = None) -> np.ndarray:
    """Validate ``P`` as a boolean observation mask (True = observed).

    ``P=None`` with a known ``shape`` means every entry is observed.
    """
    if P is None:
        if shape is None:
            raise ValueError("P=None needs an explicit shape")
        return np.ones(tuple(shape), dtype=bool)
    P = np.asarray(P)
    if P.dtype != np.bool_:
        if not np.all((P == 0) | (P == 1)):
            raise ValueError("mask entries must be 0/1 or boolean")
        P = P.astype(bool)
    if shape is not None and tuple(P.shape) != tuple(shape):
        raise ShapeError(f"mask shape {P.shape} does not match tensor shape {tuple(shape)}")
    return P


def _check_mode(n: int, ndim: int) -> None:
    if not 0 <= n < ndim:
        raise IndexError(f"mode index {n} out of range for a {ndim}-way tensor")


def _shifted_axes(n: int, ndim: int) -> list[int]:
    # (n, n+1, ..., N-1, 0, ..., n-1)
    return [n] + list(range(n + 1, ndim)) + list(range(n))


def unfold_classical(X: np.ndarray, n: int) -> np.ndarray:
    """Classical mode-``n`` unfolding ``X_(n)`` (modes are 0-based).

    Row index is ``i_n``; the column index runs over the remaining modes in
    natural order with the lowest mode varying fastest.
    """
    X = np.asarray(X)
    _check_mode(n, X.ndim)
    return np.moveaxis(X, n, 0).reshape(X.shape[n], -1, order="F")


def fold_classical(M: np.ndarray, n: int, shape: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`unfold_classical`."""
    shape = tuple(int(s) for s in shape)
    _check_mode(n, len(shape))
    M = np.asarray(M)
    rest = shape[:n] + shape[n + 1:]
    if M.shape != (shape[n], int(np.prod(rest))):
        raise ShapeError(f"matrix {M.shape} cannot be folded to {shape} along mode {n}")
    return np.moveaxis(M.reshape((shape[n],) + rest, order="F"), 0, n)


def unfold_shifted(X: np.ndarray, n: int) -> np.ndarray:
    """Cyclically shifted mode-``n`` unfolding ``X_[n]`` (modes are 0-based).

    Columns are ordered by ``(i_{n+1}, ..., i_N, i_1, ..., i_{n-1})`` with
    ``i_{n+1}`` varying fastest. For ``n = 0`` this coincides with the
    classical unfolding.
    """
    X = np.asarray(X)
    _check_mode(n, X.ndim)
    axes = _shifted_axes(n, X.ndim)
    return np.transpose(X, axes).reshape(X.shape[n], -1, order="F")


def fold_shifted(M: np.ndarray, n: int, shape: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`unfold_shifted`."""
    shape = tuple(int(s) for s in shape)
    _check_mode(n, len(shape))
    M = np.asarray(M)
    axes = _shifted_axes(n, len(shape))
    permuted = tuple(shape[a] for a in axes)
    if M.shape != (shape[n], int(np.prod(permuted[1:]))):
        raise ShapeError(f"matrix {M.shape} cannot be folded to {shape} along mode {n}")
    return np.transpose(M.reshape(permuted, order="F"), np.argsort(axes))


def masked_weighted_residual(X, R, P, W=None) -> np.ndarray:
    """Return ``sqrt(W) * P * (X - R)``; unobserved entries are exactly zero.

    ``W=None`` stands for unit weights.
    """
    X = np.asarray(X, dtype=np.float64)
    R = np.asarray(R, dtype=np.float64)
    if X.shape != R.shape:
        raise ShapeError(f"tensor shapes differ: {X.shape} vs {R.shape}")
    P = as_mask(P, X.shape)
    out = X - R
    if W is not None:
        W = np.asarray(W, dtype=np.float64)
        if W.shape != X.shape:
            raise ShapeError(f"weight shape {W.shape} does not match {X.shape}")
        out = np.sqrt(W) * out
    return np.where(P, out, 0.0)


def frobenius_norm(X) -> float:
    """Frobenius norm, the square root of the sum of squared entries."""
    X = np.asarray(X, dtype=np.float64)
    return float(np.sqrt(np.sum(X * X)))
