"""Synthetic TR instances, noise and observation models, and PSNR."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .tensor import ShapeError, as_mask
from .tr import random_cores, tr_reconstruct

#: PSNR reported when the reconstruction is exact.
PSNR_CAP = 99.0


class SynthInstance(NamedTuple):
    """Ground truth ``tensor = scale * reconstruct(cores) + offset``."""

    tensor: np.ndarray
    cores: list
    scale: float
    offset: float


def synth_tr_tensor(shape: Sequence[int], ranks: Sequence[int], seed=0, *, rescale: bool = True) -> SynthInstance:
    """Draw Gaussian TR cores and reconstruct them.

    With ``rescale`` the tensor is mapped affinely onto ``[0, 1]``; the map
    is recorded in the result. Without it the tensor is exactly TR
    representable with the requested ranks.
    """
    cores = random_cores(shape, ranks, seed)
    X = tr_reconstruct(cores)
    scale, offset = 1.0, 0.0
    if rescale:
        lo, hi = float(X.min()), float(X.max())
        if hi > lo:
            scale = 1.0 / (hi - lo)
            offset = -lo * scale
            X = np.clip(X * scale + offset, 0.0, 1.0)
    return SynthInstance(X, cores, scale, offset)


@dataclass(frozen=True)
class NoiseSpec:
    """Additive Gaussian-mixture noise or salt-and-pepper replacement.

    ``gmm``: each entry gets noise from ``weight * N(0, var1) +
    (1 - weight) * N(0, var2)`` (variances, not standard deviations).
    ``sp``: each entry is replaced by ``low`` or ``high`` with probability ``p``.
    """

    kind: str = "sp"
    weight: float = 0.8
    var1: float = 1e-3
    var2: float = 0.5
    p: float = 0.2
    low: float = 0.0
    high: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("gmm", "sp", "none"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if not 0.0 <= self.weight <= 1.0:
            raise ValueError(f"mixture weight must lie in [0, 1], got {self.weight}")
        if self.var1 < 0 or self.var2 < 0:
            raise ValueError("mixture variances must be nonnegative")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"corruption probability must lie in [0, 1], got {self.p}")

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> "NoiseSpec":
        """Parse ``gmm:pi,v1,v2``, ``gmm``, ``sp:p``, ``sp`` or ``none``."""
        name, _, arg = text.partition(":")
        vals = [float(v) for v in arg.split(",")] if arg else []
        if name == "none":
            return cls(kind="none", seed=seed)
        if name == "sp":
            if len(vals) > 1:
                raise ValueError(f"sp takes one parameter, got {text!r}")
            return cls(kind="sp", p=vals[0] if vals else 0.2, seed=seed)
        if name == "gmm":
            if vals and len(vals) != 3:
                raise ValueError(f"gmm takes pi,v1,v2, got {text!r}")
            if vals:
                return cls(kind="gmm", weight=vals[0], var1=vals[1], var2=vals[2], seed=seed)
            return cls(kind="gmm", seed=seed)
        raise ValueError(f"bad noise spec {text!r}")

    def to_text(self) -> str:
        if self.kind == "none":
            return "none"
        if self.kind == "sp":
            return f"sp:{self.p!r}"
        return f"gmm:{self.weight!r},{self.var1!r},{self.var2!r}"

    def to_dict(self) -> dict:
        return asdict(self)


def add_gmm_noise(X, spec: NoiseSpec) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    rng = np.random.default_rng(spec.seed)
    first = rng.random(X.shape) < spec.weight
    std = np.where(first, math.sqrt(spec.var1), math.sqrt(spec.var2))
    return X + rng.standard_normal(X.shape) * std


def add_salt_pepper(X, spec: NoiseSpec) -> np.ndarray:
    """Replace each entry by ``low`` or ``high`` (equal odds) with probability ``p``."""
    X = np.asarray(X, dtype=np.float64)
    rng = np.random.default_rng(spec.seed)
    hit = rng.random(X.shape) < spec.p
    salt = rng.random(X.shape) < 0.5
    return np.where(hit, np.where(salt, spec.high, spec.low), X)


def add_noise(X, spec: NoiseSpec) -> np.ndarray:
    if spec.kind == "gmm":
        return add_gmm_noise(X, spec)
    if spec.kind == "sp":
        return add_salt_pepper(X, spec)
    return np.array(X, dtype=np.float64)


def random_mask(shape: Sequence[int], rate: float, seed=0) -> np.ndarray:
    """Boolean mask with exactly ``floor(rate * size)`` observed entries."""
    if not 0.0 < rate <= 1.0:
        raise ValueError(f"observation rate must lie in (0, 1], got {rate}")
    shape = tuple(int(s) for s in shape)
    size = int(np.prod(shape))
    count = int(math.floor(rate * size))
    mask = np.zeros(size, dtype=bool)
    if count == size:
        mask[:] = True
    else:
        rng = np.random.default_rng(seed)
        mask[rng.choice(size, size=count, replace=False)] = True
    return mask.reshape(shape, order="F")


def psnr(X_true, X_hat, peak: float = 1.0, *, mask=None, return_exact: bool = False):
    """Peak signal-to-noise ratio in dB over all entries (or ``mask`` entries).

    An exact match returns :data:`PSNR_CAP`; ``return_exact=True`` also
    returns a flag telling whether that happened.
    """
    if not peak > 0:
        raise ValueError(f"peak must be positive, got {peak}")
    X_true = np.asarray(X_true, dtype=np.float64)
    X_hat = np.asarray(X_hat, dtype=np.float64)
    if X_true.shape != X_hat.shape:
        raise ShapeError(f"shapes differ: {X_true.shape} vs {X_hat.shape}")
    diff = X_true - X_hat
    if mask is not None:
        diff = diff[as_mask(mask, X_true.shape)]
    mse = float(np.mean(diff * diff))
    exact = mse == 0.0
    value = PSNR_CAP if exact else 10.0 * math.log10(peak * peak / mse)
    return (value, exact) if return_exact else value


def relative_error(X_true, X_hat, mask=None) -> float:
    """``||X_hat - X_true|| / ||X_true||``, optionally over ``mask`` entries only."""
    X_true = np.asarray(X_true, dtype=np.float64)
    diff = np.asarray(X_hat, dtype=np.float64) - X_true
    if mask is not None:
        m = as_mask(mask, X_true.shape)
        diff, X_true = diff[m], X_true[m]
    return float(np.linalg.norm(diff) / np.linalg.norm(X_true))
