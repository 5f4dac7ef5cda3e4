"""Scalar inequalities and classification predicates for biharmonic pmc submanifolds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .biharmonic import PROPER, biharmonic_residuals, classify_point
from .extrinsic import extrinsic_data
from .immersion import ImmersionSpec

__all__ = [
    "OkumuraResult",
    "Predicate",
    "Spread",
    "ClassificationReport",
    "CertificationError",
    "okumura_factor",
    "okumura_eval",
    "okumura_monte_carlo",
    "okumura_maximize",
    "gap_constant",
    "bo_band",
    "classification_report",
]

TRACELESS_RTOL = 1e-12
EQUALITY_RTOL = 1e-10


class CertificationError(ValueError):
    """The grid is not certified pmc and proper-biharmonic."""


def okumura_factor(m: int) -> float:
    return (m - 2) / math.sqrt(m * (m - 1))


@dataclass(frozen=True)
class OkumuraResult:
    """``sum a_i^3`` against ``+-((m-2)/sqrt(m(m-1))) b^3``.

    ``slack_upper = bound - sum_cubes`` and ``slack_lower = sum_cubes + bound``;
    ``equality`` is ``"upper"``, ``"lower"``, ``"both"`` or ``None``.
    """

    sum_cubes: float
    bound: float
    slack_upper: float
    slack_lower: float
    equality: str | None

    @property
    def equality_case_flag(self) -> bool:
        return self.equality is not None


def okumura_eval(a) -> OkumuraResult:
    a = np.asarray(a, dtype=float).ravel()
    m = a.size
    if m < 2:
        raise ValueError("need at least two numbers")
    b = float(np.linalg.norm(a))
    if abs(float(np.sum(a))) > TRACELESS_RTOL * max(b, np.finfo(float).tiny):
        raise ValueError(f"input is not traceless: sum = {float(np.sum(a)):.3e}")
    s = float(np.sum(a**3))
    bound = okumura_factor(m) * b**3
    up, lo = bound - s, s + bound
    tol = EQUALITY_RTOL * b**3
    eq_up, eq_lo = up <= tol, lo <= tol
    eq = "both" if eq_up and eq_lo else "upper" if eq_up else "lower" if eq_lo else None
    return OkumuraResult(s, bound, up, lo, eq)


def _traceless_unit(rng: np.random.Generator, size: int, m: int) -> np.ndarray:
    a = rng.standard_normal((size, m))
    a -= a.mean(axis=1, keepdims=True)
    return a / np.linalg.norm(a, axis=1, keepdims=True)


def okumura_monte_carlo(m: int, samples: int = 10**6, seed: int = 0, chunk: int = 250_000) -> float:
    """Largest ``|sum a_i^3| - bound`` over random traceless unit vectors.

    Draws come from a counter-based Philox stream; chunk ``k`` starts at a
    fixed offset, so sharded runs reproduce the sequential result.
    """
    worst = -math.inf
    bound = okumura_factor(m)
    for k, start in enumerate(range(0, samples, chunk)):
        bitgen = np.random.Philox(key=seed).jumped(k)
        a = _traceless_unit(np.random.Generator(bitgen), min(chunk, samples - start), m)
        worst = max(worst, float(np.max(np.abs(np.sum(a**3, axis=1))) - bound))
    return worst


def okumura_maximize(m: int, starts: int = 200, seed: int = 0, iters: int = 2000, step: float = 0.1):
    """Projected gradient ascent of ``sum a_i^3`` on the traceless unit sphere.

    Returns ``(best_value, maximizer)``.
    """
    rng = np.random.Generator(np.random.Philox(key=seed))
    a = _traceless_unit(rng, starts, m)
    for _ in range(iters):
        g = 3.0 * a**2
        g -= g.mean(axis=1, keepdims=True)
        g -= np.sum(g * a, axis=1, keepdims=True) * a
        a = a + step * g
        a -= a.mean(axis=1, keepdims=True)
        a /= np.linalg.norm(a, axis=1, keepdims=True)
    vals = np.sum(a**3, axis=1)
    k = int(np.argmax(vals))
    return float(vals[k]), a[k]


def gap_constant(m: int) -> float:
    """``C(m) = ((m-1)(m^2+4) + (m-2) sqrt((m-1)(m-2)(m^2+m+2))) / (2 m^3)``."""
    if int(m) != m or m < 2:
        raise ValueError(f"gap constant needs an integer m >= 2, got {m}")
    m = int(m)
    root = math.sqrt((m - 1) * (m - 2) * (m * m + m + 2))
    return ((m - 1) * (m * m + 4) + (m - 2) * root) / (2 * m**3)


def bo_band(H_norm: float, c: float, m: int, tol: float = 1e-8) -> tuple[bool, float]:
    """Membership of ``|H|`` in ``(0, ((m-2)/m) sqrt(c)] U {sqrt(c)}`` and its signed margin."""
    top = (m - 2) / m * math.sqrt(c)
    interval = min(H_norm, top - H_norm)
    point = -abs(H_norm - math.sqrt(c))
    margin = max(interval, point)
    return margin >= -tol and H_norm > tol, margin


@dataclass(frozen=True)
class Spread:
    min: float
    median: float
    max: float

    @classmethod
    def of(cls, x) -> "Spread":
        x = np.asarray(x, dtype=float).ravel()
        return cls(float(np.min(x)), float(np.median(x)), float(np.max(x)))

    def as_dict(self) -> dict:
        return {"min": self.min, "median": self.median, "max": self.max}


@dataclass(frozen=True)
class Predicate:
    """A named test with its numeric value, threshold and signed worst-case margin.

    ``verdict`` is ``"true"``, ``"false"`` or ``"n/a"``; a positive margin
    means the statement holds with room to spare.
    """

    name: str
    value: float
    threshold: float
    margin: float
    verdict: str

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "threshold": self.threshold,
            "margin": self.margin,
            "verdict": self.verdict,
        }


def _pred(name, value, threshold, margin, tol, applicable=True) -> Predicate:
    if not applicable:
        return Predicate(name, float(value), float(threshold), float(margin), "n/a")
    return Predicate(name, float(value), float(threshold), float(margin), "true" if margin >= -tol else "false")


@dataclass(frozen=True)
class ClassificationReport:
    m: int
    c: float
    H_norm_sq: Spread
    sigma_norm_sq: Spread
    T_norm_sq: Spread
    predicates: list = field(default_factory=list)
    equality_links: list = field(default_factory=list)

    def predicate(self, name: str) -> Predicate:
        for p in self.predicates:
            if p.name == name:
                return p
        raise KeyError(name)

    @property
    def consistent(self) -> bool:
        bounds_hold = all(self.predicate(k).verdict == "true" for k in ("H_sq_le_c", "sigma_sq_ge_c_m_minus_1"))
        links_hold = all(link["consistent"] for link in self.equality_links)
        return bounds_hold and links_hold

    def as_dict(self) -> dict:
        return {
            "m": self.m,
            "c": self.c,
            "H_norm_sq": self.H_norm_sq.as_dict(),
            "sigma_norm_sq": self.sigma_norm_sq.as_dict(),
            "T_norm_sq": self.T_norm_sq.as_dict(),
            "predicates": [p.as_dict() for p in self.predicates],
            "equality_links": list(self.equality_links),
        }


def classification_report(
    imm: ImmersionSpec,
    grid,
    tol: float = 1e-8,
    h: float = 1e-3,
    certify: bool = True,
    gap_conclusion: bool = False,
) -> ClassificationReport:
    """Aggregate the scalar invariants over ``grid`` and evaluate the predicates.

    Margins are worst cases over the grid.  ``gap_conclusion`` also checks that
    a point above the gap threshold is minimal in a small hypersphere, which
    is only meaningful for complete examples such as the catalog entries.
    """
    u = np.asarray(grid, dtype=float)
    ext = extrinsic_data(imm, u)
    if certify:
        res = biharmonic_residuals(imm, u, h, with_bitension=False, ext=ext)
        if not np.all(res.pmc):
            raise CertificationError("mean curvature is not parallel on the grid")
        verdict = classify_point(res, tol=tol, route="pmc").verdict
        if np.any(verdict != PROPER):
            raise CertificationError("grid is not proper biharmonic at every point")
    m, c = imm.m, float(imm.c)
    H2, S2, T2 = ext.H_norm_sq, ext.sigma_norm_sq, ext.T_norm_sq
    pu = ext.pseudo_umbilical_defect()
    Cm = gap_constant(m)
    preds = [
        _pred("H_sq_le_c", np.max(H2), c, c - np.max(H2), tol),
        _pred("sigma_sq_ge_c_m_minus_1", np.min(S2), c * (m - 1), np.min(S2) - c * (m - 1), tol),
        _pred("H_sq_gt_gap", np.min(H2), c * Cm, np.min(H2) - c * Cm, 0.0),
        _pred("pseudo_umbilical", np.max(pu), tol, tol - np.max(pu), 0.0),
        _pred("cylinder", np.max(np.abs(np.sqrt(T2) - 1.0)), tol, tol - np.max(np.abs(np.sqrt(T2) - 1.0)), 0.0),
    ]
    in_sphere = bool(np.max(np.sqrt(T2)) <= tol)
    Hn = np.sqrt(H2)
    margins = [bo_band(float(x), c, m, tol)[1] for x in Hn.ravel()]
    worst = min(margins)
    top = (m - 2) / m * math.sqrt(c)
    preds.append(_pred("bo_band", float(np.max(Hn)), top, worst, tol, applicable=in_sphere and m > 2))
    if gap_conclusion:
        above = preds[2].verdict == "true"
        # minimal in a small hypersphere: |H|^2 = c, T = 0, pseudo-umbilical
        dev = max(float(np.max(np.abs(H2 - c))), float(np.max(np.sqrt(T2))), float(np.max(pu)))
        preds.append(_pred("gap_conclusion", dev, tol, tol - dev, 0.0, applicable=above))

    def holds(name):
        return preds_by[name].verdict == "true"

    preds_by = {p.name: p for p in preds}
    sigma_eq = abs(float(np.max(S2)) - c * (m - 1)) <= tol * max(1.0, c * m)
    H_eq = abs(float(np.min(H2)) - c) <= tol * max(1.0, c)
    links = [
        {
            "name": "sigma_equality_iff_cylinder",
            "lhs": sigma_eq,
            "rhs": holds("cylinder"),
            "consistent": sigma_eq == holds("cylinder"),
        },
        {
            "name": "H_equality_iff_pseudo_umbilical_in_sphere",
            "lhs": H_eq,
            "rhs": holds("pseudo_umbilical") and in_sphere,
            "consistent": H_eq == (holds("pseudo_umbilical") and in_sphere),
        },
    ]
    return ClassificationReport(m, c, Spread.of(H2), Spread.of(S2), Spread.of(T2), preds, links)
