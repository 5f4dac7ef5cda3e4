"""Tension, bitension and the biharmonicity conditions for pmc submanifolds.

Sign convention: the rough Laplacian is the trace of the second covariant
differential, ``Delta = trace(nabla nabla - nabla_nabla)``, and the bitension
field is ``tau_2 = Delta tau - trace R(d psi, tau) d psi``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fd
from .ambient import curvature_barR, tangent_project
from .extrinsic import ExtrinsicData, extrinsic_data, normal_connection
from .immersion import ImmersionSpec

__all__ = [
    "BiharmonicResiduals",
    "PmcPreconditionError",
    "Classification",
    "HARMONIC",
    "PROPER",
    "NEITHER",
    "INCONCLUSIVE",
    "tension_field",
    "tension_and_bitension",
    "pmc_bih_conditions",
    "biharmonic_residuals",
    "classify_point",
]

HARMONIC = "harmonic"
PROPER = "proper_biharmonic"
NEITHER = "neither"
INCONCLUSIVE = "inconclusive"

ALGEBRAIC_TOL = 1e-8
FD_TOL = 5e-3
PMC_TOL = 1e-6
NOISE_FLOOR = 1e-8


class PmcPreconditionError(ValueError):
    """The algebraic conditions only characterize biharmonicity for pmc submanifolds."""


def _chart_geometry(imm: ImmersionSpec, pts):
    jet = imm.jet(pts)
    D, Hs = jet.grad, jet.hess
    g = np.einsum("...na,...nb->...ab", D, D)
    ginv = np.linalg.inv(g)
    gamma = np.einsum("...kc,...nc,...nij->...kij", ginv, D, Hs)
    return jet, ginv, gamma


def tension_field(imm: ImmersionSpec, pts) -> np.ndarray:
    """``tau = trace nabla d psi`` from jets: ``g^ab (psi_ab - Gamma^k_ab psi_k)`` made tangent."""
    jet, ginv, gamma = _chart_geometry(imm, pts)
    acc = jet.hess - np.einsum("...kab,...nk->...nab", gamma, jet.grad)
    lap = np.einsum("...ab,...nab->...n", ginv, acc)
    return tangent_project(imm.ambient, jet.value, lap, check=False)


def _rough_laplacian(imm: ImmersionSpec, field, u, h):
    """``g^ab (nabla_a nabla_b W - Gamma^k_ab nabla_k W)`` for an ambient vector field W."""
    space = imm.ambient

    def nabla_field(pts):
        dW = fd.gradient(field, pts, h)  # (..., m, N)
        value = imm.points(pts)
        return tangent_project(space, value[..., None, :], dW, check=False)

    jet, ginv, gamma = _chart_geometry(imm, u)
    first = nabla_field(u)  # (..., m, N)
    d_first = fd.gradient(nabla_field, u, h)  # (..., a, b, N)
    second = tangent_project(space, jet.value[..., None, None, :], d_first, check=False)
    second = second - np.einsum("...kab,...kn->...abn", gamma, first)
    return np.einsum("...ab,...abn->...n", ginv, second)


def _bitension(imm: ImmersionSpec, u, h):
    tau_fn = lambda pts: tension_field(imm, pts)  # noqa: E731
    lap = _rough_laplacian(imm, tau_fn, u, h)
    jet, ginv, _ = _chart_geometry(imm, u)
    tau = tension_field(imm, u)
    D = jet.grad
    p = jet.value
    # trace R(d psi, tau) d psi = g^ab R(psi_a, tau) psi_b
    X = np.moveaxis(D, -1, -2)  # (..., m, N)
    R = curvature_barR(
        imm.ambient,
        p[..., None, None, :],
        X[..., :, None, :],
        tau[..., None, None, :],
        X[..., None, :, :],
        check=False,
    )
    curv = np.einsum("...ab,...abn->...n", ginv, R)
    return lap - curv, tau


@dataclass(frozen=True)
class BiharmonicResiduals:
    """Biharmonicity diagnostics at a batch of chart points.

    ``bitension`` is the finite-difference bitension at step ``h`` and
    ``bitension_fine`` at ``h/2``.  ``pmc_cond[..., k]`` are, in order,
    ``<H, xi>``, ``|A_H|^2 - c(m - |T|^2)|H|^2`` and the largest
    ``|trace(A_H A_U)|`` over unit normals ``U`` orthogonal to ``H``.
    ``normal_residual`` / ``tangent_residual`` are the two lines of the
    biharmonic system with the pmc simplification (every ``nabla^perp H``
    term dropped), so they are meaningful where ``pmc`` holds.
    """

    tau: np.ndarray
    tau_from_H: np.ndarray
    bitension: np.ndarray | None
    bitension_fine: np.ndarray | None
    normal_residual: np.ndarray
    tangent_residual: np.ndarray
    pmc_cond: np.ndarray
    pmc_defect: np.ndarray | None
    energy_density: np.ndarray
    bienergy_density: np.ndarray
    h: float

    @property
    def tau_norm(self) -> np.ndarray:
        return np.linalg.norm(self.tau, axis=-1)

    @property
    def bitension_norm(self) -> np.ndarray:
        return np.linalg.norm(self.bitension, axis=-1)

    @property
    def bitension_fine_norm(self) -> np.ndarray:
        return np.linalg.norm(self.bitension_fine, axis=-1)

    @property
    def bitension_order(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.log2(self.bitension_norm / self.bitension_fine_norm)

    @property
    def fd_unstable(self) -> np.ndarray:
        diff = np.linalg.norm(self.bitension - self.bitension_fine, axis=-1)
        return diff > 10.0 * self.bitension_fine_norm + NOISE_FLOOR

    @property
    def pmc(self) -> np.ndarray:
        if self.pmc_defect is None:
            return np.ones(self.tau.shape[:-1], dtype=bool)
        return self.pmc_defect <= PMC_TOL

    @property
    def pmc_residual(self) -> np.ndarray:
        return np.max(np.abs(self.pmc_cond), axis=-1)


def tension_and_bitension(imm: ImmersionSpec, u, h: float = 1e-3) -> BiharmonicResiduals:
    """Tension and finite-difference bitension at ``h`` and ``h/2``; no pmc data."""
    return biharmonic_residuals(imm, u, h, with_pmc=False)


def _pmc_conditions(ext: ExtrinsicData) -> np.ndarray:
    m = ext.m
    cond1 = ext.H_dot_xi
    cond2 = ext.A_H_norm_sq - ext.c * (m - ext.T_norm_sq) * ext.H_norm_sq
    # w_alpha = trace(A_H A_alpha); its component orthogonal to H is the
    # worst trace(A_H A_U) over unit U perpendicular to H
    w = np.einsum("...ij,...aij->...a", ext.A_H, ext.shape_ops)
    Hn = ext.H_norm
    safe = np.where(Hn > 0, Hn, 1.0)
    hhat = ext.H_coef / safe[..., None]
    w_perp = w - np.einsum("...a,...a->...", w, hhat)[..., None] * hhat
    cond3 = np.where(Hn > 0, np.linalg.norm(w_perp, axis=-1), 0.0)
    return np.stack([cond1, cond2, cond3], axis=-1)


def _bih_lines(ext: ExtrinsicData, imm: ImmersionSpec):
    E = np.moveaxis(ext.tangent_frame, -1, -2)  # (..., m, N)
    H = ext.H
    R = curvature_barR(imm.ambient, ext.point[..., None, :], E, H[..., None, :], E, check=False)
    trR = R.sum(axis=-2)
    nu = ext.normal_frame
    trR_perp = np.einsum("...na,...ma,...m->...n", nu, nu, trR)
    trR_top = trR - trR_perp
    tr_sigma = np.einsum("...ij,...aij,...na->...n", ext.A_H, ext.shape_ops, nu)
    return tr_sigma + trR_perp, 2.0 * trR_top


def pmc_bih_conditions(imm: ImmersionSpec, u, h: float = 1e-3, check_pmc: bool = True) -> BiharmonicResiduals:
    """The algebraic pmc biharmonicity conditions; raises if ``H`` is not parallel."""
    res = biharmonic_residuals(imm, u, h, with_bitension=False, with_pmc=check_pmc)
    if check_pmc and not np.all(res.pmc):
        worst = float(np.max(res.pmc_defect))
        raise PmcPreconditionError(
            f"mean curvature is not parallel (max |nabla^perp H| = {worst:.3e} > {PMC_TOL:g})"
        )
    return res


def biharmonic_residuals(
    imm: ImmersionSpec,
    u,
    h: float = 1e-3,
    with_bitension: bool = True,
    with_pmc: bool = True,
    ext: ExtrinsicData | None = None,
) -> BiharmonicResiduals:
    u = np.asarray(u, dtype=float)
    ext = extrinsic_data(imm, u) if ext is None else ext
    tau = tension_field(imm, u)
    bit = bit_fine = None
    if with_bitension:
        bit, _ = _bitension(imm, u, h)
        bit_fine, _ = _bitension(imm, u, h / 2.0)
    defect = None
    if with_pmc:
        nH = normal_connection(imm, u, "H", h, True, ext)
        defect = np.sqrt(np.sum(nH**2, axis=(-2, -1)))
    line1, line2 = _bih_lines(ext, imm)
    g = ext.metric_chart
    e = 0.5 * np.einsum("...ab,...ab->...", np.linalg.inv(g), g)
    return BiharmonicResiduals(
        tau=tau,
        tau_from_H=ext.tau,
        bitension=bit,
        bitension_fine=bit_fine,
        normal_residual=line1,
        tangent_residual=line2,
        pmc_cond=_pmc_conditions(ext),
        pmc_defect=defect,
        energy_density=e,
        bienergy_density=0.5 * np.sum(tau**2, axis=-1),
        h=h,
    )


@dataclass(frozen=True)
class Classification:
    """Per-point verdicts and the route that produced each one."""

    verdict: np.ndarray
    route: np.ndarray
    residual: np.ndarray

    def counts(self) -> dict:
        labels, n = np.unique(self.verdict, return_counts=True)
        return {str(k): int(v) for k, v in zip(labels, n)}


def _fd_verdict(res: BiharmonicResiduals, fd_tol: float) -> tuple[np.ndarray, np.ndarray]:
    coarse = res.bitension_norm
    fine = res.bitension_fine_norm
    converging = (fine <= 0.5 * coarse) | (coarse <= NOISE_FLOOR)
    small = coarse <= fd_tol
    big = (coarse > fd_tol) & (fine > fd_tol)
    ok = small & converging
    out = np.where(ok, "biharmonic", np.where(big, "not", INCONCLUSIVE))
    return out, coarse


def classify_point(
    res: BiharmonicResiduals,
    tol: float = ALGEBRAIC_TOL,
    fd_tol: float = FD_TOL,
    route: str = "auto",
) -> Classification:
    """Harmonic, proper-biharmonic or neither, per point.

    ``route="auto"`` uses the algebraic pmc conditions wherever ``H`` is
    parallel and the refined bitension elsewhere; ``"pmc"`` and ``"tau2"``
    force one route.  The bitension route requires the residual to halve
    under step refinement, otherwise the verdict is ``inconclusive``.
    """
    if route not in ("auto", "pmc", "tau2"):
        raise ValueError(f"unknown route {route!r}")
    shape = res.tau.shape[:-1]
    harmonic = res.tau_norm <= tol
    use_pmc = np.broadcast_to(res.pmc if route == "auto" else route == "pmc", shape)
    if route == "pmc" and not np.all(res.pmc):
        raise PmcPreconditionError("pmc route requested at points where H is not parallel")
    if res.bitension is None and not np.all(use_pmc):
        raise ValueError("bitension route needs residuals computed with with_bitension=True")

    verdict = np.full(shape, NEITHER, dtype=object)
    residual = np.zeros(shape)
    alg = res.pmc_residual
    alg_ok = alg <= tol
    residual = np.where(use_pmc, alg, residual)
    verdict = np.where(use_pmc & alg_ok, PROPER, verdict)
    if res.bitension is not None:
        fdv, coarse = _fd_verdict(res, fd_tol)
        residual = np.where(use_pmc, residual, coarse)
        verdict = np.where(~use_pmc & (fdv == "biharmonic"), PROPER, verdict)
        verdict = np.where(~use_pmc & (fdv == INCONCLUSIVE), INCONCLUSIVE, verdict)
    verdict = np.where(harmonic, HARMONIC, verdict)
    routes = np.where(use_pmc, "pmc", "tau2")
    return Classification(verdict.astype(str), routes.astype(str), residual)
