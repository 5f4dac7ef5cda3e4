"""Chart sample points: tensor grids and a low-discrepancy sequence."""

from __future__ import annotations

import numpy as np
from scipy.stats import qmc

from .immersion import ImmersionSpec

__all__ = ["STENCIL_REACH", "grid_points", "halton_points"]

# nested finite differences reach this many steps away from a centre
STENCIL_REACH = 2


def grid_points(imm: ImmersionSpec, counts, h: float = 1e-3) -> np.ndarray:
    """Tensor grid of shape ``(prod(counts), m)`` kept one stencil reach inside the box."""
    counts = tuple(int(k) for k in counts)
    if len(counts) != imm.m:
        raise ValueError(f"grid has {len(counts)} axes, chart dimension is {imm.m}")
    if any(k < 3 for k in counts):
        raise ValueError(f"grid counts must be at least 3 per axis, got {counts}")
    w = STENCIL_REACH * h * (1.0 + 1e-9)
    axes = []
    for k, (lo, hi) in zip(counts, imm.domain):
        if hi - lo <= 2 * w:
            raise ValueError(f"chart interval [{lo}, {hi}] is narrower than the stencil margin")
        axes.append(np.linspace(lo + w, hi - w, k))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([a.ravel() for a in mesh], axis=-1)


def halton_points(imm: ImmersionSpec, n: int = 64, margin: float = 0.05) -> np.ndarray:
    """Deterministic Halton points inside the chart box, away from its faces."""
    sampler = qmc.Halton(d=imm.m, scramble=False)
    sampler.fast_forward(1)  # the first Halton point is the origin corner
    unit = sampler.random(n)
    lo, hi = imm.lower, imm.upper
    span = hi - lo
    return lo + margin * span + (1.0 - 2.0 * margin) * span * unit
