"""Input checks shared by the estimator layer and the command line."""

from __future__ import annotations

import numpy as np

from .catalog import CatalogEntry, from_id
from .immersion import ImmersionSpec

__all__ = ["check_immersion", "check_chart_points", "check_step"]


def check_immersion(source) -> ImmersionSpec:
    """Accept an ImmersionSpec, a CatalogEntry or a catalog id string."""
    if isinstance(source, ImmersionSpec):
        return source
    if isinstance(source, CatalogEntry):
        return source.spec
    if isinstance(source, str):
        return from_id(source).spec
    raise TypeError(f"expected an ImmersionSpec, CatalogEntry or catalog id, got {type(source).__name__}")


def check_chart_points(X, imm: ImmersionSpec) -> np.ndarray:
    """A finite ``(n_points, m)`` float array lying in the chart box."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2:
        raise ValueError(f"chart points must be a 2-D array, got shape {X.shape}")
    if X.shape[0] == 0:
        raise ValueError("no chart points given")
    if X.shape[1] != imm.m:
        raise ValueError(f"chart points have {X.shape[1]} coordinates, chart dimension is {imm.m}")
    if not np.all(np.isfinite(X)):
        raise ValueError("chart points must be finite")
    imm.check_inside(X)
    return X


def check_step(h) -> float:
    h = float(h)
    if not (np.isfinite(h) and h > 0):
        raise ValueError(f"finite-difference step must be positive, got {h}")
    return h
