"""Central finite differences over chart coordinates.

Field functions take chart points of shape ``(..., m)`` and return arrays of
shape ``(...,) + out``; derivatives are returned with the derivative axes
inserted right after the batch axes.  Because batch axes are carried
through, these helpers nest: differentiating a field that is itself defined
by finite differences just evaluates a larger stencil.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

Field = Callable[[np.ndarray], np.ndarray]


def _offsets(m: int, h: float) -> np.ndarray:
    return h * np.eye(m)


def gradient(f: Field, u: np.ndarray, h: float) -> np.ndarray:
    """``d_a f`` with second-order central differences; shape ``batch + (m,) + out``."""
    u = np.asarray(u, dtype=float)
    m = u.shape[-1]
    e = _offsets(m, h).reshape((m,) + (1,) * (u.ndim - 1) + (m,))
    vals = f(np.concatenate([u[None] + e, u[None] - e], axis=0))
    d = (vals[:m] - vals[m:]) / (2.0 * h)
    return np.moveaxis(d, 0, u.ndim - 1)


def hessian(f: Field, u: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Value, gradient and Hessian of ``f`` from one compact stencil.

    Diagonal second derivatives use the three-point formula, mixed ones the
    four-point cross.  Returns arrays of shape ``batch + out``,
    ``batch + (m,) + out`` and ``batch + (m, m) + out``.
    """
    u = np.asarray(u, dtype=float)
    m = u.shape[-1]
    shifts = [np.zeros(m)]
    for a in range(m):
        for s in (1.0, -1.0):
            d = np.zeros(m)
            d[a] = s * h
            shifts.append(d)
    pairs = [(a, b) for a in range(m) for b in range(a + 1, m)]
    for a, b in pairs:
        for sa, sb in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
            d = np.zeros(m)
            d[a], d[b] = sa * h, sb * h
            shifts.append(d)
    S = np.array(shifts).reshape((len(shifts),) + (1,) * (u.ndim - 1) + (m,))
    vals = f(u[None] + S)
    f0 = vals[0]
    plus = vals[1 : 2 * m + 1 : 2]
    minus = vals[2 : 2 * m + 1 : 2]
    grad = (plus - minus) / (2.0 * h)
    hess = np.empty((m, m) + f0.shape, dtype=float)
    for a in range(m):
        hess[a, a] = (plus[a] - 2.0 * f0 + minus[a]) / (h * h)
    base = 2 * m + 1
    for k, (a, b) in enumerate(pairs):
        pp, pm, mp, mm = vals[base + 4 * k : base + 4 * k + 4]
        hess[a, b] = ((pp - pm) - (mp - mm)) / (4.0 * h * h)
        hess[b, a] = hess[a, b]
    nb = u.ndim - 1
    return (
        f0,
        np.moveaxis(grad, 0, nb),
        np.moveaxis(hess, (0, 1), (nb, nb + 1)),
    )


def richardson(coarse, fine, order: int = 2):
    """Eliminate the leading ``h**order`` error term from results at ``h`` and ``h/2``."""
    w = 2.0**order
    return (w * np.asarray(fine) - np.asarray(coarse)) / (w - 1.0)


def observed_order(err_coarse: float, err_fine: float, ratio: float = 2.0) -> float:
    """``log(err(h) / err(h/ratio)) / log(ratio)``; ``nan`` when undefined."""
    if not (err_coarse > 0 and err_fine > 0):
        return math.nan
    return math.log(err_coarse / err_fine) / math.log(ratio)
