"""Correntropy objective, half-quadratic weights and kernel-width policy."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tensor import ShapeError, as_mask


@dataclass(frozen=True)
class KernelPolicy:
    """How the Gaussian kernel width ``sigma`` is chosen.

    ``mode="fixed"`` always returns ``sigma``. ``mode="adaptive"`` returns
    ``max(sigma_min, theta * rms)`` where ``rms`` is taken over observed
    residuals. ``mode="inf"`` means an infinite width, i.e. unit weights and
    plain least squares.

    ``update`` says when an adaptive width is recomputed: once per outer
    iteration, once per block, or ``"auto"`` (per iteration for the
    full-data solver, per sampled block for the sketched ones).
    """

    mode: str = "adaptive"
    sigma: float = 1.0
    theta: float = 1.0
    sigma_min: float = 1e-3
    update: str = "auto"

    def __post_init__(self):
        if self.mode not in ("fixed", "adaptive", "inf"):
            raise ValueError(f"unknown kernel mode {self.mode!r}")
        if self.update not in ("auto", "iteration", "block"):
            raise ValueError(f"unknown kernel update schedule {self.update!r}")
        if self.sigma <= 0 or self.theta <= 0 or self.sigma_min <= 0:
            raise ValueError("sigma, theta and sigma_min must be positive")

    @property
    def infinite(self) -> bool:
        return self.mode == "inf"

    @classmethod
    def parse(cls, text: str) -> "KernelPolicy":
        """Parse the CLI form ``fixed:SIGMA``, ``adaptive:THETA`` or ``inf``."""
        name, _, arg = text.partition(":")
        if name == "inf":
            return cls(mode="inf")
        if name == "fixed":
            return cls(mode="fixed", sigma=float(arg))
        if name == "adaptive":
            return cls(mode="adaptive", theta=float(arg) if arg else 1.0)
        raise ValueError(f"bad kernel spec {text!r}; expected fixed:S, adaptive:T or inf")

    def to_text(self) -> str:
        if self.mode == "inf":
            return "inf"
        if self.mode == "fixed":
            return f"fixed:{self.sigma!r}"
        return f"adaptive:{self.theta!r}"


def correntropy_objective(E, P, sigma: float) -> float:
    """Sum over observed entries of ``sigma**2 * exp(-e**2 / (2 sigma**2))``.

    Larger is better; it is maximized at zero residual.
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    E = np.asarray(E, dtype=np.float64)
    P = as_mask(P, E.shape)
    e = E[P]
    return float(sigma**2 * np.sum(np.exp(-(e * e) / (2.0 * sigma**2))))


def hq_weight(e, sigma: float):
    """Half-quadratic weight ``exp(-e**2 / (2 sigma**2))``.

    ``sigma=math.inf`` gives unit weights. Works on scalars and arrays.
    """
    if math.isinf(sigma):
        return np.ones_like(e, dtype=np.float64) if np.ndim(e) else 1.0
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    e = np.asarray(e, dtype=np.float64)
    w = np.exp(-(e * e) / (2.0 * sigma * sigma))
    return w if w.ndim else float(w)


def update_weights(W, E, P, sigma: float) -> np.ndarray:
    """New weight tensor computed from residuals ``E`` for every entry.

    Unobserved entries get a weight too; downstream masking discards them.
    ``W`` is only used for its shape.
    """
    E = np.asarray(E, dtype=np.float64)
    if np.shape(W) != E.shape:
        raise ShapeError(f"weight shape {np.shape(W)} does not match residual shape {E.shape}")
    as_mask(P, E.shape)
    return np.asarray(hq_weight(E, sigma), dtype=np.float64).reshape(E.shape)


def adapt_kernel_width(E, P, policy: KernelPolicy) -> float:
    """Kernel width for the current residuals under ``policy``.

    Returns ``math.inf`` for the infinite policy.
    """
    E = np.asarray(E, dtype=np.float64)
    P = as_mask(P, E.shape)
    if not P.any():
        raise ValueError("kernel width needs at least one observed entry")
    if policy.mode == "inf":
        return math.inf
    if policy.mode == "fixed":
        return float(policy.sigma)
    e = E[P]
    rms = float(np.sqrt(np.mean(e * e)))
    return max(policy.sigma_min, policy.theta * rms)
