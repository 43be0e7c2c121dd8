"""Gradient-descent warm start producing a well-placed initial point.

The tuned estimator plans assume the starting point satisfies
|grad U(x0)|^2 <= alpha_u * d (so the initial transient is of the generic
order the burn-in tau kills).  This module runs plain constant-step gradient
descent until that criterion holds.
"""

from __future__ import annotations

import warnings
from typing import NamedTuple

import numpy as np

from .model import Potential

__all__ = ["WarmStartResult", "warm_start"]


class WarmStartResult(NamedTuple):
    """Outcome of the descent: final point, iterations used, |grad U|^2."""

    x0: np.ndarray
    iters_used: int
    grad_norm_sq: float


def warm_start(
    potential: Potential,
    x_init: np.ndarray,
    step: float | None = None,
    max_iters: int = 10_000,
) -> WarmStartResult:
    """Run x <- x - step * grad U(x) until |grad U(x)|^2 <= alpha_u * d.

    The stopping threshold is checked before the first update, so a point
    already in the target region is returned unchanged with iters_used = 0.
    On a quadratic potential the iterates are exactly
    x_k = (1 - step)^k * x_init; for any potential with step <= 1/l_u each
    iteration does not increase U.

    Args:
        potential: Potential with valid constants.
        x_init: Starting point, shape (dim,).
        step: Descent step; must lie in (0, 2/l_u).  Default 1/l_u.
        max_iters: Iteration budget (>= 1).

    Returns:
        WarmStartResult(x0, iters_used, grad_norm_sq).  Success means
        grad_norm_sq <= alpha_u * dim; on budget exhaustion a warning is
        emitted and the last iterate is returned (the caller may proceed,
        losing the tuned constants' guarantees).
    """
    potential._check_constants()
    if step is None:
        step = 1.0 / potential.l_u
    if not 0.0 < step < 2.0 / potential.l_u:
        raise ValueError(
            f"step must lie in (0, 2/l_u) = (0, {2.0 / potential.l_u}), got {step}")
    if max_iters < 1:
        raise ValueError(f"max_iters must be >= 1, got {max_iters}")
    x = np.array(x_init, dtype=float)
    if x.shape != (potential.dim,):
        raise ValueError(
            f"x_init must have shape ({potential.dim},), got {x.shape}")

    threshold = potential.alpha_u * potential.dim
    iters = 0
    g = potential.grad(x)
    gsq = float(np.dot(g, g))
    while gsq > threshold and iters < max_iters:
        x = x - step * g
        iters += 1
        g = potential.grad(x)
        gsq = float(np.dot(g, g))
    if gsq > threshold:
        warnings.warn(
            f"warm start did not reach |grad U|^2 <= {threshold} within "
            f"{max_iters} iterations (final value {gsq}); proceeding anyway",
            RuntimeWarning,
        )
    return WarmStartResult(x0=x, iters_used=iters, grad_norm_sq=gsq)
