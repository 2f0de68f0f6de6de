"""Finite-difference verification of tape gradients.

Run in 64-bit mode: central differences with eps=1e-5 resolve gradients to
well below the 1e-4 relative tolerance the checks assert.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from .tensor import Parameter, Tape, Tensor


def finite_difference_check(
    loss_fn: Callable[[], Tensor],
    params: Sequence[Parameter],
    eps: float = 1e-5,
    max_coords_per_tensor: int = 64,
    rng: Optional[np.random.Generator] = None,
    floor: float = 1e-3,
) -> float:
    """Max relative error between tape gradients and central differences.

    ``loss_fn`` rebuilds the forward pass from current parameter values and
    must be deterministic. Coordinates are subsampled on tensors larger than
    ``max_coords_per_tensor``. The denominator is floored at ``floor``:
    central differences on an O(1) loss carry ~1e-9 cancellation noise at
    eps=1e-5, so errors on near-zero gradient coordinates are measured
    against the floor rather than the coordinate itself.
    """
    saved = [p.grad for p in params]
    for p in params:
        p.grad = None
    with Tape() as tape:
        loss = loss_fn()
        tape.backward(loss, params=params)
    analytic = [p.grad.copy() for p in params]
    for p, g in zip(params, saved):
        p.grad = g

    if rng is None:
        rng = np.random.default_rng(0)
    max_rel = 0.0
    for p, an in zip(params, analytic):
        flat = p.data.reshape(-1)
        an_flat = an.reshape(-1)
        k = flat.size
        if k <= max_coords_per_tensor:
            coords = range(k)
        else:
            coords = sorted(rng.choice(k, size=max_coords_per_tensor, replace=False))
        for i in coords:
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = loss_fn().item()
            flat[i] = orig - eps
            f_minus = loss_fn().item()
            flat[i] = orig
            fd = (f_plus - f_minus) / (2.0 * eps)
            scale = max(abs(fd), abs(an_flat[i]), floor)
            max_rel = max(max_rel, abs(fd - an_flat[i]) / scale)
    return max_rel
