import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from robust_tr.hq import (
    KernelPolicy,
    adapt_kernel_width,
    correntropy_objective,
    hq_weight,
    update_weights,
)
from robust_tr.tensor import ShapeError


def test_objective_zero_residual():
    P = np.zeros((3, 4), bool)
    P[:2, :3] = True
    assert correntropy_objective(np.zeros((3, 4)), P, 0.5) == pytest.approx(0.25 * 6)


def test_objective_single_entry_at_sigma():
    E = np.zeros((2, 2))
    E[1, 0] = 0.7
    P = np.zeros((2, 2), bool)
    P[1, 0] = True
    assert correntropy_objective(E, P, 0.7) == pytest.approx(0.49 * math.exp(-0.5))


def test_objective_decreases_with_residual():
    P = np.ones((1, 2), bool)
    vals = [correntropy_objective(np.array([[0.0, e]]), P, 1.0) for e in (0.0, 0.5, 1.0, 3.0)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_objective_rejects_nonpositive_sigma():
    with pytest.raises(ValueError):
        correntropy_objective(np.zeros((2, 2)), np.ones((2, 2), bool), 0.0)


def test_weight_values():
    assert hq_weight(0.0, 0.3) == 1.0
    assert hq_weight(1.0, 1.0) == pytest.approx(math.exp(-0.5))
    assert hq_weight(123.0, math.inf) == 1.0
    np.testing.assert_array_equal(hq_weight(np.array([1.0, -5.0]), math.inf), [1.0, 1.0])


@given(st.floats(-1e3, 1e3), st.floats(1e-3, 1e3))
def test_weight_range(e, sigma):
    w = hq_weight(e, sigma)
    assert 0.0 <= w <= 1.0
    if e == 0.0:
        assert w == 1.0
    elif 1e-6 < abs(e) / sigma < 30:
        assert 0.0 < w < 1.0


def test_update_weights(rng):
    E = rng.standard_normal((3, 4, 2))
    P = rng.random(E.shape) < 0.5
    W = update_weights(np.ones(E.shape), E, P, 0.8)
    for idx in [(0, 0, 0), (2, 3, 1), (1, 2, 0)]:
        assert W[idx] == pytest.approx(hq_weight(E[idx], 0.8))
    np.testing.assert_array_equal(update_weights(W, np.zeros(E.shape), P, 0.8), np.ones(E.shape))
    W2 = update_weights(W, E, P, 1.6)
    assert np.all(W2[E != 0] > W[E != 0])
    with pytest.raises(ShapeError):
        update_weights(np.ones((2, 2)), E, P, 1.0)


def test_adaptive_width():
    P = np.ones((2, 3), bool)
    pol = KernelPolicy(mode="adaptive", theta=1.0, sigma_min=1e-3)
    assert adapt_kernel_width(np.zeros((2, 3)), P, pol) == 1e-3
    assert adapt_kernel_width(np.full((2, 3), 0.4), P, pol) == pytest.approx(0.4)
    assert adapt_kernel_width(np.full((2, 3), -0.4), P, pol) == pytest.approx(0.4)
    E = np.array([[0.1, -0.3, 0.2], [0.5, 0.0, -0.2]])
    assert adapt_kernel_width(3 * E, P, pol) == pytest.approx(3 * adapt_kernel_width(E, P, pol))


def test_adaptive_width_ignores_unobserved():
    E = np.array([[0.2, 100.0]])
    P = np.array([[True, False]])
    assert adapt_kernel_width(E, P, KernelPolicy()) == pytest.approx(0.2)


def test_fixed_and_infinite_width():
    E, P = np.ones((2, 2)), np.ones((2, 2), bool)
    assert adapt_kernel_width(E, P, KernelPolicy(mode="fixed", sigma=0.3)) == 0.3
    assert math.isinf(adapt_kernel_width(E, P, KernelPolicy(mode="inf")))
    with pytest.raises(ValueError):
        adapt_kernel_width(E, np.zeros((2, 2), bool), KernelPolicy())


@pytest.mark.parametrize("text, mode", [("fixed:0.2", "fixed"), ("adaptive:0.5", "adaptive"), ("inf", "inf")])
def test_policy_parse_round_trip(text, mode):
    pol = KernelPolicy.parse(text)
    assert pol.mode == mode
    assert KernelPolicy.parse(pol.to_text()) == pol


def test_policy_rejects_bad_values():
    with pytest.raises(ValueError):
        KernelPolicy(mode="cauchy")
    with pytest.raises(ValueError):
        KernelPolicy(sigma=-1.0)
    with pytest.raises(ValueError):
        KernelPolicy.parse("huber:1")


def test_block_width_matches_public_rule():
    from robust_tr.solver import _block_width

    rng = np.random.default_rng(3)
    E = rng.standard_normal((5, 7))
    P = rng.random((5, 7)) < 0.5
    for policy in (KernelPolicy(), KernelPolicy(theta=0.3), KernelPolicy(mode="fixed", sigma=0.2)):
        assert _block_width(E, P.astype(float), policy) == pytest.approx(adapt_kernel_width(E, P, policy))
        assert _block_width(E, None, policy) == pytest.approx(
            adapt_kernel_width(E, np.ones(E.shape, bool), policy))


def test_width_schedule_resolution():
    from robust_tr.solver import policy_per_block

    assert KernelPolicy().update == "auto"
    assert policy_per_block(KernelPolicy(), sketched=True)
    assert not policy_per_block(KernelPolicy(), sketched=False)
    assert policy_per_block(KernelPolicy(update="block"), sketched=False)
    assert not policy_per_block(KernelPolicy(update="iteration"), sketched=True)
    with pytest.raises(ValueError):
        KernelPolicy(update="sometimes")
