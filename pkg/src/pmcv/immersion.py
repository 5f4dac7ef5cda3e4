"""Chart-parametrized maps into S^n(c) x R."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .ambient import AmbientSpace
from .exprdsl import ExpressionAST, Jet2, eval_constant, eval_jet2, parse_dsl

__all__ = ["ImmersionSpec", "OutOfDomainError"]


class OutOfDomainError(ValueError):
    """A chart point (or a finite-difference stencil) left the chart box."""


@dataclass(frozen=True)
class ImmersionSpec:
    """An immersion ``U -> S^n(c) x R`` given by expressions over a chart box.

    ``n`` is inferred from the number of outputs (``N = n + 2``).
    """

    ast: ExpressionAST
    c: float
    params: Mapping[str, float] = field(default_factory=dict)
    domain: tuple[tuple[float, float], ...] | None = None
    name: str = "immersion"

    def __post_init__(self):
        params = {k: float(v) for k, v in dict(self.params).items()}
        params.setdefault("c", float(self.c))
        object.__setattr__(self, "params", params)
        if self.domain is None:
            if self.ast.domain is None:
                raise ValueError("immersion needs a chart domain")
            dom = tuple(
                (eval_constant(lo, params), eval_constant(hi, params)) for lo, hi in self.ast.domain
            )
            object.__setattr__(self, "domain", dom)
        else:
            object.__setattr__(self, "domain", tuple((float(a), float(b)) for a, b in self.domain))
        if len(self.domain) != self.ast.m:
            raise ValueError(f"domain has {len(self.domain)} axes, chart dimension is {self.ast.m}")
        for lo, hi in self.domain:
            if not lo < hi:
                raise ValueError(f"empty chart interval [{lo}, {hi}]")
        # validates n >= 2 and c > 0
        AmbientSpace(self.ast.N - 2, float(self.c))

    @classmethod
    def from_dsl(cls, text: str, c: float, params: Mapping[str, float] | None = None, name: str = "dsl"):
        return cls(parse_dsl(text), c, dict(params or {}), None, name)

    @property
    def m(self) -> int:
        return self.ast.m

    @property
    def n(self) -> int:
        return self.ast.N - 2

    @property
    def ambient(self) -> AmbientSpace:
        return AmbientSpace(self.n, float(self.c))

    @property
    def lower(self) -> np.ndarray:
        return np.array([d[0] for d in self.domain])

    @property
    def upper(self) -> np.ndarray:
        return np.array([d[1] for d in self.domain])

    def check_inside(self, u) -> None:
        u = np.asarray(u, dtype=float)
        # small slack so that stencils touching the boundary are accepted
        slack = 1e-12 * np.maximum(1.0, np.abs(self.upper - self.lower))
        bad = np.any((u < self.lower - slack) | (u > self.upper + slack), axis=-1)
        if np.any(bad):
            idx = np.unravel_index(int(np.flatnonzero(bad)[0]), bad.shape)
            raise OutOfDomainError(
                f"chart point {u[idx].tolist()} outside the chart box {list(self.domain)}"
            )

    def jet(self, u) -> Jet2:
        """Second-order jet at chart points of shape ``(..., m)``."""
        u = np.asarray(u, dtype=float)
        self.check_inside(u)
        lead = u.shape[:-1]
        flat = u.reshape(-1, self.m)
        j = eval_jet2(self.ast, flat, self.params)
        N, m = self.ast.N, self.m
        return Jet2(
            j.value.reshape(lead + (N,)),
            j.grad.reshape(lead + (N, m)),
            j.hess.reshape(lead + (N, m, m)),
        )

    def points(self, u) -> np.ndarray:
        return self.jet(u).value

    def with_params(self, **updates) -> "ImmersionSpec":
        params = dict(self.params)
        params.update(updates)
        return ImmersionSpec(self.ast, self.c, params, self.domain, self.name)
