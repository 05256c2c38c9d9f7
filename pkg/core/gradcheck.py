#!/usr/bin/env python3
"""
Central finite-difference check of hand-written backward rules
"""

import logging

import numpy as np

from core.matrix import make_rng
from errors import ContractError

logger = logging.getLogger(__name__)


def relative_error(analytic, numeric):
    """|a - n| / max(|a|, |n|, 1e-8)"""
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)


def grad_check(closure, params, eps=1e-5, n_coords=200, seed=0):
    """Compare analytic gradients against central differences

    `closure(backward)` evaluates the scalar loss; with backward=True it must
    also accumulate gradients into `params`. At most `n_coords` coordinates are
    sampled (all of them when fewer exist). Returns the max relative error.
    """
    for p in params:
        p.zero_grad()
    loss = closure(True)
    analytic = [p.grad.copy() for p in params]
    if closure(False) != loss:
        raise ContractError("closure is not deterministic: two forward passes differ")

    coords = [(k, idx) for k, p in enumerate(params) for idx in np.ndindex(p.shape)]
    if len(coords) > n_coords:
        rng = make_rng(seed)
        picked = rng.choice(len(coords), size=n_coords, replace=False)
        coords = [coords[i] for i in sorted(picked)]

    worst = 0.0
    for k, idx in coords:
        value = params[k].value
        original = value[idx]
        value[idx] = original + eps
        plus = closure(False)
        value[idx] = original - eps
        minus = closure(False)
        value[idx] = original
        numeric = (plus - minus) / (2.0 * eps)
        worst = max(worst, relative_error(analytic[k][idx], numeric))

    logger.debug(f"grad_check: {len(coords)} coordinates, max relative error {worst:.3e}")
    return worst
