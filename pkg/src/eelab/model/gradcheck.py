"""Central-difference gradient verification."""

from __future__ import annotations

import numpy as np

from ..substrate import RngStream
from .network import PARAM_NAMES, PolicyParams


def pick_coords(params: PolicyParams, n: int, rng: RngStream) -> list[tuple[str, int]]:
    """n coordinates sampled across all parameter arrays, weighted by size."""
    sizes = np.array([getattr(params, name).size for name in PARAM_NAMES], dtype=float)
    probs = sizes / sizes.sum()
    gen = rng.child("coords").generator
    coords = []
    for _ in range(n):
        name = PARAM_NAMES[int(gen.choice(len(PARAM_NAMES), p=probs))]
        coords.append((name, int(gen.integers(0, getattr(params, name).size))))
    return coords


def grad_check(loss_fn, params: PolicyParams, analytic: dict[str, np.ndarray],
               coords: list[tuple[str, int]], h: float = 1e-4,
               denom_floor: float = 1e-4) -> float:
    """Max relative error of analytic vs central-difference derivatives.

    loss_fn maps PolicyParams to a scalar; it must be deterministic.  The
    denominator floor keeps float cancellation noise on near-zero
    coordinates from dominating the relative error; a genuinely wrong
    gradient still shows up at O(gradient magnitude / floor).
    """
    worst = 0.0
    probe = params.copy()
    for name, idx in coords:
        arr = getattr(probe, name)
        original = arr.flat[idx]
        arr.flat[idx] = original + h
        up = loss_fn(probe)
        arr.flat[idx] = original - h
        down = loss_fn(probe)
        arr.flat[idx] = original
        numeric = (up - down) / (2.0 * h)
        exact = analytic[name].flat[idx]
        denom = max(abs(numeric), abs(exact), denom_floor)
        worst = max(worst, abs(numeric - exact) / denom)
    return worst
