"""Residuals of tensor identities for submanifolds of S^n(c) x R.

Each check evaluates both sides at the finite-difference steps ``h`` and
``h/2`` so that the observed convergence order can be reported.  The
second derivatives of scalar fields are taken with the Laplace-Beltrami
operator ``g^ij (d_i d_j f - Gamma^k_ij d_k f)``, with the metric and
Christoffel symbols from exact jets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import fd
from .biharmonic import PROPER, biharmonic_residuals, classify_point
from .extrinsic import (
    ExtrinsicData,
    Selector,
    _field_fn,
    covariant_dA,
    extrinsic_data,
    intrinsic_curvature,
    normal_connection,
    normal_field,
)
from .immersion import ImmersionSpec
from .sampling import halton_points

__all__ = [
    "IdentityResidual",
    "HypothesisError",
    "NOISE_FLOOR",
    "sample_points",
    "laplace_beltrami",
    "shape_operator_of",
    "simons_terms",
    "simons_residual",
    "weitzenbock_residual",
    "codazzi_residual",
    "deltaT_residual",
    "flatness_relation",
]

PARALLEL_TOL = 1e-6
TRACE_TOL = 1e-8
PSEUDO_UMBILICAL_TOL = 1e-6
# residuals below this are roundoff, not truncation error
NOISE_FLOOR = 1e-8
ROUNDOFF_FACTOR = 256.0


class HypothesisError(ValueError):
    """The identity was requested where its hypotheses do not hold."""


@dataclass(frozen=True)
class IdentityResidual:
    """Both sides of an identity at each chart point.

    ``residual`` is taken at step ``h``; ``residual_fine`` at ``h/2`` (absent
    for purely algebraic identities).  ``order`` is computed from the
    worst-case residuals at the two steps.
    """

    name: str
    u: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    residual: np.ndarray
    h: float | None = None
    residual_fine: np.ndarray | None = None
    noise_floor: float = NOISE_FLOOR

    @property
    def worst(self) -> float:
        return float(np.max(self.residual))

    @property
    def worst_fine(self) -> float | None:
        return None if self.residual_fine is None else float(np.max(self.residual_fine))

    @property
    def order(self) -> float:
        if self.residual_fine is None:
            return math.nan
        return fd.observed_order(self.worst, self.worst_fine)

    def converges(self, min_order: float = 1.5, floor: float | None = None) -> bool:
        """Truncation error shrinks at ``min_order``, or both steps sit at the noise floor."""
        if self.residual_fine is None:
            return True
        floor = self.noise_floor if floor is None else floor
        if self.worst <= floor and self.worst_fine <= floor:
            return True
        o = self.order
        return not math.isnan(o) and o >= min_order


def _roundoff_floor(scale, h: float, derivs: int) -> float:
    """Cancellation error of a finite-difference derivative of order ``derivs`` at step ``h/2``."""
    eps = np.finfo(float).eps
    return max(NOISE_FLOOR, ROUNDOFF_FACTOR * eps * (1.0 + float(scale)) / (0.5 * h) ** derivs)


def sample_points(imm: ImmersionSpec, n: int = 64) -> np.ndarray:
    """The default identity sample: ``n`` Halton points of the chart box."""
    return halton_points(imm, n)


def laplace_beltrami(f, u, h: float, ext: ExtrinsicData) -> np.ndarray:
    _, grad, hess = fd.hessian(f, u, h)
    G = ext.christoffels
    ginv = np.linalg.inv(ext.metric_chart)
    return np.einsum("...ij,...ij->...", ginv, hess - np.einsum("...kij,...k->...ij", G, grad))


def _stencil(u, h):
    """The points touched by ``fd.hessian`` around each centre."""
    m = u.shape[-1]
    shifts = [np.zeros(m)]
    for a in range(m):
        for s in (1.0, -1.0):
            d = np.zeros(m)
            d[a] = s * h
            shifts.append(d)
        for b in range(a + 1, m):
            for sa, sb in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                d = np.zeros(m)
                d[a], d[b] = sa * h, sb * h
                shifts.append(d)
    S = np.array(shifts).reshape((len(shifts),) + (1,) * (u.ndim - 1) + (m,))
    return u[None] + S


def shape_operator_of(ext: ExtrinsicData, V: np.ndarray) -> np.ndarray:
    """``A_V = sum_alpha <V, nu_alpha> A_alpha`` in the tangent frame."""
    coef = np.einsum("...n,...na->...a", V, ext.normal_frame)
    return np.einsum("...a,...aij->...ij", coef, ext.shape_ops)


def _v_field(imm, selector, ref):
    def fn(pts):
        ext = extrinsic_data(imm, pts)
        V = normal_field(ext, selector, ref)
        return ext, V, shape_operator_of(ext, V)

    return fn


def _require_parallel(imm, u, selector, h, ext):
    nV = normal_connection(imm, u, selector, h, True, ext)
    defect = np.sqrt(np.sum(nV**2, axis=(-2, -1)))
    worst = float(np.max(defect))
    if worst > PARALLEL_TOL:
        raise HypothesisError(
            f"normal field {selector!r} is not parallel (max |nabla^perp V| = {worst:.3e} > {PARALLEL_TOL:g})"
        )


def simons_terms(ext: ExtrinsicData, V: np.ndarray) -> dict:
    """Algebraic pieces of the Simons-type formula for a normal field ``V``.

    ``c_block`` multiplies the ambient curvature and ``alpha_sum`` runs over
    the numeric normal frame; the sum is independent of that frame.
    """
    m, c = ext.m, ext.c
    A = shape_operator_of(ext, V)
    trA = np.trace(A, axis1=-2, axis2=-1)
    normA2 = np.sum(A**2, axis=(-2, -1))
    T = ext.T
    AT = np.einsum("...ij,...j->...i", A, T)
    VN = np.einsum("...n,...na,...a->...", V, ext.normal_frame, ext.N)
    HN = np.einsum("...a,...a->...", ext.H_coef, ext.N)
    trANAV = np.einsum("...ij,...ji->...", ext.A_N, A)
    block = (
        (m - ext.T_norm_sq) * normA2
        - 2 * m * np.sum(AT**2, axis=-1)
        + 3 * trA * np.einsum("...i,...i->...", AT, T)
        + m * trANAV * VN
        - trA**2
        - m * trA * HN * VN
    )
    Aa = ext.shape_ops
    tr_a = np.trace(Aa, axis1=-2, axis2=-1)
    A2 = np.einsum("...ij,...jk->...ik", A, A)
    tr_A2Aa = np.einsum("...ij,...aji->...a", A2, Aa)
    tr_AAa = np.einsum("...ij,...aji->...a", A, Aa)
    alpha = np.sum(tr_a * tr_A2Aa - tr_AAa**2, axis=-1)
    return {"A": A, "trace_A": trA, "norm_A_sq": normA2, "c_block": c * block, "alpha_sum": alpha}


def simons_residual(
    imm: ImmersionSpec, u, selector: Selector = "H", h: float = 1e-3, check: bool = True
) -> IdentityResidual:
    """``1/2 Delta |A_V|^2`` against the curvature and shape-operator expression.

    Requires ``V`` parallel in the normal bundle with constant ``trace A_V``.
    """
    u = np.asarray(u, dtype=float)
    ext = extrinsic_data(imm, u)
    ref = None if selector == "H" else ext.normal_frame
    vfield = _v_field(imm, selector, ref)
    _, _, A_st = vfield(_stencil(u, h))
    floor = _roundoff_floor(np.max(np.sum(A_st**2, axis=(-2, -1))), h, 2)
    if check:
        _require_parallel(imm, u, selector, h, ext)
        tr = np.trace(A_st, axis1=-2, axis2=-1)
        spread = float(np.max(np.max(tr, axis=0) - np.min(tr, axis=0)))
        if spread > TRACE_TOL:
            raise HypothesisError(f"trace A_V varies by {spread:.3e} across the stencil (> {TRACE_TOL:g})")

    def normA2(pts):
        return np.sum(vfield(pts)[2] ** 2, axis=(-2, -1))

    terms = simons_terms(ext, normal_field(ext, selector))
    algebraic = terms["c_block"] + terms["alpha_sum"]
    out = []
    for step in (h, h / 2.0):
        lhs = 0.5 * laplace_beltrami(normA2, u, step, ext)
        dA = covariant_dA(imm, u, selector, step, richardson=False, check_parallel=False)
        rhs = dA.nablaA_norm_sq + algebraic
        out.append((lhs, rhs))
    (lhs, rhs), (lhs2, rhs2) = out
    return IdentityResidual("simons", u, lhs, rhs, np.abs(lhs - rhs), h, np.abs(lhs2 - rhs2), floor)


def _chart_nabla_b(imm, selector, ref, h):
    """First covariant derivative ``nabla_c b_ab`` of the chart second fundamental form."""
    bfield = _field_fn(imm, selector, ref, "sff")

    def nb(pts):
        b = bfield(pts)
        db = fd.gradient(bfield, pts, h)
        G = extrinsic_data(imm, pts).christoffels
        return db - np.einsum("...kca,...kb->...cab", G, b) - np.einsum("...kcb,...ak->...cab", G, b)

    return bfield, nb


def weitzenbock_residual(imm: ImmersionSpec, u, selector: Selector = "H", h: float = 1e-3) -> IdentityResidual:
    """``1/2 Delta |A_V|^2`` against ``|nabla A_V|^2 + <trace nabla^2 A_V, A_V>``.

    The right side differentiates the chart tensor ``b_ab`` twice; this is
    a general identity and needs no hypothesis on ``V``.
    """
    u = np.asarray(u, dtype=float)
    ext = extrinsic_data(imm, u)
    ref = None if selector == "H" else ext.normal_frame
    ginv = np.linalg.inv(ext.metric_chart)
    G = ext.christoffels
    out = []
    for step in (h, h / 2.0):
        bfield, nb = _chart_nabla_b(imm, selector, ref, step)

        def normA2(pts, bfield=bfield):
            gi = np.linalg.inv(extrinsic_data(imm, pts).metric_chart)
            b = bfield(pts)
            return np.einsum("...ac,...bd,...ab,...cd->...", gi, gi, b, b)

        lhs = 0.5 * laplace_beltrami(normA2, u, step, ext)
        b = bfield(u)
        first = nb(u)
        d2 = fd.gradient(nb, u, step)  # [..., d, c, a, b]
        second = (
            d2
            - np.einsum("...kdc,...kab->...dcab", G, first)
            - np.einsum("...kda,...ckb->...dcab", G, first)
            - np.einsum("...kdb,...cak->...dcab", G, first)
        )
        rough = np.einsum("...dc,...dcab->...ab", ginv, second)
        inner = np.einsum("...ac,...bd,...ab,...cd->...", ginv, ginv, rough, b)
        grad_sq = np.einsum("...ce,...af,...bg,...cab,...efg->...", ginv, ginv, ginv, first, first)
        out.append((lhs, grad_sq + inner))
    (lhs, rhs), (lhs2, rhs2) = out
    scale = np.max(np.abs(_field_fn(imm, selector, ref, "sff")(_stencil(u, h)))) ** 2
    floor = _roundoff_floor(scale, h, 2)
    return IdentityResidual("weitzenbock", u, lhs, rhs, np.abs(lhs - rhs), h, np.abs(lhs2 - rhs2), floor)


def codazzi_residual(
    imm: ImmersionSpec,
    u,
    i: int | None = None,
    j: int | None = None,
    selector: Selector = "H",
    h: float = 1e-3,
    check: bool = True,
) -> IdentityResidual:
    """``(nabla_i A_V) E_j - (nabla_j A_V) E_i`` against ``c <V,N> (T_j E_i - T_i E_j)``.

    With ``i`` and ``j`` left as ``None`` the worst frame pair is reported.
    """
    u = np.asarray(u, dtype=float)
    ext = extrinsic_data(imm, u)
    ref = None if selector == "H" else ext.normal_frame
    m = ext.m
    if check:
        _require_parallel(imm, u, selector, h, ext)
    pairs = [(a, b) for a in range(m) for b in range(m) if a < b] if i is None else [(i, j)]
    for a, b in pairs:
        if not (0 <= a < m and 0 <= b < m):
            raise ValueError(f"frame indices ({a}, {b}) out of range for m = {m}")
    V = normal_field(ext, selector)
    VN = np.einsum("...n,...na,...a->...", V, ext.normal_frame, ext.N)
    T = ext.T
    eye = np.eye(m)
    results = []
    for step in (h, h / 2.0):
        nA = covariant_dA(imm, u, selector, step, richardson=False, check_parallel=False).nablaA
        lhs_all, rhs_all, res_all = [], [], []
        for a, b in pairs:
            lhs = nA[..., a, b, :] - nA[..., b, a, :]
            rhs = ext.c * VN[..., None] * (T[..., b, None] * eye[a] - T[..., a, None] * eye[b])
            lhs_all.append(lhs)
            rhs_all.append(rhs)
            res_all.append(np.linalg.norm(lhs - rhs, axis=-1))
        k = np.argmax(np.stack(res_all), axis=0)
        pick = lambda arrs: np.take_along_axis(np.stack(arrs), k[None, ..., None], 0)[0]  # noqa: E731
        results.append((pick(lhs_all), pick(rhs_all), np.max(np.stack(res_all), axis=0)))
    (lhs, rhs, res), (_, _, res2) = results
    scale = np.max(np.abs(_field_fn(imm, selector, ref, "sff")(u)))
    return IdentityResidual("codazzi", u, lhs, rhs, res, h, res2, _roundoff_floor(scale, h, 1))


def deltaT_residual(imm: ImmersionSpec, u, h: float = 1e-3, check: bool = True) -> IdentityResidual:
    """``1/2 Delta |T|^2`` against ``|A_N|^2 + K |T|^2 + 2 T(<H, N>)`` on pmc surfaces."""
    if imm.m != 2:
        raise ValueError(f"the |T|^2 identity is stated for surfaces, got m = {imm.m}")
    u = np.asarray(u, dtype=float)
    ext = extrinsic_data(imm, u)
    if check:
        try:
            _require_parallel(imm, u, "H", h, ext)
        except HypothesisError as exc:
            raise HypothesisError(f"surface is not pmc: {exc}") from None

    def T_sq(pts):
        return extrinsic_data(imm, pts).T_norm_sq

    def HN(pts):
        return extrinsic_data(imm, pts).H_dot_xi

    K = intrinsic_curvature(imm, u, ext).K
    base = np.sum(ext.A_N**2, axis=(-2, -1)) + K * ext.T_norm_sq
    T_chart = np.einsum("...ai,...i->...a", ext.chart_to_frame, ext.T)
    out = []
    for step in (h, h / 2.0):
        lhs = 0.5 * laplace_beltrami(T_sq, u, step, ext)
        dHN = fd.gradient(HN, u, step)
        rhs = base + 2.0 * np.einsum("...a,...a->...", T_chart, dHN)
        out.append((lhs, rhs))
    (lhs, rhs), (lhs2, rhs2) = out
    floor = _roundoff_floor(1.0 + np.max(np.abs(ext.H_dot_xi)), h, 2)
    return IdentityResidual("deltaT", u, lhs, rhs, np.abs(lhs - rhs), h, np.abs(lhs2 - rhs2), floor)


def flatness_relation(imm: ImmersionSpec, u, h: float = 1e-3, check: bool = True) -> IdentityResidual:
    """``|4|H|^2 - c|T|^2|`` for proper-biharmonic, non-pseudo-umbilical pmc surfaces."""
    if imm.m != 2:
        raise ValueError(f"the flatness relation is stated for surfaces, got m = {imm.m}")
    u = np.asarray(u, dtype=float)
    ext = extrinsic_data(imm, u)
    if check:
        res = biharmonic_residuals(imm, u, h, with_bitension=False, ext=ext)
        if not np.all(res.pmc):
            raise HypothesisError("surface is not pmc")
        verdict = classify_point(res, route="pmc").verdict
        if np.any(verdict != PROPER):
            raise HypothesisError("surface is not proper biharmonic at every point")
        if np.any(ext.pseudo_umbilical_defect() <= PSEUDO_UMBILICAL_TOL):
            raise HypothesisError("the relation needs a non-pseudo-umbilical surface")
    lhs = 4.0 * ext.H_norm_sq
    rhs = ext.c * ext.T_norm_sq
    return IdentityResidual("flatness", u, lhs, rhs, np.abs(lhs - rhs), None, None)
