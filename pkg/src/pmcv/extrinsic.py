"""Frames, second fundamental form and covariant derivatives of an immersion.

All quantities are computed pointwise from exact second-order jets, batched
over chart points.  The only finite differences are those needed for
third-order data: the normal derivative of ``H`` and the covariant
derivative of a shape operator.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import fd
from .immersion import ImmersionSpec

__all__ = [
    "ExtrinsicData",
    "DerivativePacket",
    "IntrinsicCurvature",
    "NotAnImmersionError",
    "FrameCompletionError",
    "NormalFieldWarning",
    "extrinsic_data",
    "normal_field",
    "normal_connection",
    "normal_connection_H",
    "covariant_dA",
    "intrinsic_curvature",
    "gaussian_curvature_from_metric",
]

RANK_RTOL = 1e-8
COMPLETION_TOL = 1e-8
ASYMMETRY_FAIL = 1e-6
PARALLEL_TOL = 1e-6

Selector = Union[str, int]


class NotAnImmersionError(ValueError):
    """The chart differential is rank deficient at some point."""


class FrameCompletionError(RuntimeError):
    pass


class NormalFieldWarning(UserWarning):
    """The chosen normal field is not parallel in the normal bundle."""


def _gram_schmidt(D: np.ndarray) -> np.ndarray:
    """Orthonormalize the columns of ``D (L, N, k)`` in order, two passes."""
    E = np.zeros_like(D)
    for k in range(D.shape[-1]):
        v = D[:, :, k].copy()
        for _ in range(2):
            if k:
                v -= np.einsum("lnj,lj->ln", E[:, :, :k], np.einsum("lnj,ln->lj", E[:, :, :k], v))
        E[:, :, k] = v / np.linalg.norm(v, axis=1, keepdims=True)
    return E


@dataclass(frozen=True)
class ExtrinsicData:
    """Extrinsic geometry at a batch of chart points.

    Shapes use ``...`` for the batch axes, ``N = n + 2`` for the ambient
    Euclidean dimension and ``q = n + 1 - m`` for the codimension:

    ``point (..., N)``; ``tangent_frame (..., N, m)`` whose columns are
    ``E_1..E_m``; ``chart_to_frame (..., m, m)`` with
    ``E_i = sum_a Q[a, i] d_a psi``; ``normal_frame (..., N, q)``;
    ``shape_ops (..., q, m, m)``; ``H (..., N)`` and its normal-frame
    coefficients ``H_coef (..., q)``; ``T (..., m)`` and ``N (..., q)`` the
    frame coefficients of the tangent and normal parts of ``xi``;
    ``metric_chart (..., m, m)``; ``christoffels (..., m, m, m)`` indexed
    ``[k, i, j]`` for ``Gamma^k_ij``.
    """

    u: np.ndarray
    c: float
    point: np.ndarray
    tangent_frame: np.ndarray
    chart_to_frame: np.ndarray
    normal_frame: np.ndarray
    shape_ops: np.ndarray
    H: np.ndarray
    H_coef: np.ndarray
    T: np.ndarray
    N: np.ndarray
    metric_chart: np.ndarray
    christoffels: np.ndarray
    asymmetry: np.ndarray
    chart_hessian: np.ndarray

    @property
    def m(self) -> int:
        return self.tangent_frame.shape[-1]

    @property
    def q(self) -> int:
        return self.normal_frame.shape[-1]

    @property
    def sff(self) -> np.ndarray:
        """``sigma(E_i, E_j)`` as ambient vectors, shape ``(..., m, m, N)``."""
        return np.einsum("...aij,...na->...ijn", self.shape_ops, self.normal_frame)

    @property
    def H_norm_sq(self) -> np.ndarray:
        return np.sum(self.H_coef**2, axis=-1)

    @property
    def H_norm(self) -> np.ndarray:
        return np.sqrt(self.H_norm_sq)

    @property
    def sigma_norm_sq(self) -> np.ndarray:
        return np.sum(self.shape_ops**2, axis=(-3, -2, -1))

    @property
    def T_norm_sq(self) -> np.ndarray:
        return np.sum(self.T**2, axis=-1)

    @property
    def T_norm(self) -> np.ndarray:
        return np.sqrt(self.T_norm_sq)

    @property
    def N_norm_sq(self) -> np.ndarray:
        return np.sum(self.N**2, axis=-1)

    @property
    def A_H(self) -> np.ndarray:
        return np.einsum("...a,...aij->...ij", self.H_coef, self.shape_ops)

    @property
    def A_N(self) -> np.ndarray:
        return np.einsum("...a,...aij->...ij", self.N, self.shape_ops)

    @property
    def A_H_norm_sq(self) -> np.ndarray:
        return np.sum(self.A_H**2, axis=(-2, -1))

    @property
    def H_dot_xi(self) -> np.ndarray:
        return self.H[..., -1]

    @property
    def tau(self) -> np.ndarray:
        return self.m * self.H

    def pseudo_umbilical_defect(self) -> np.ndarray:
        """``|A_H - |H|^2 id|``, zero exactly when H is an umbilical direction."""
        eye = np.eye(self.m)
        return np.linalg.norm(self.A_H - self.H_norm_sq[..., None, None] * eye, axis=(-2, -1))

    def shape_op(self, selector: Selector) -> np.ndarray:
        if selector == "H":
            return self.A_H
        return self.shape_ops[..., int(selector), :, :]

    def tangent_vector(self, coef: np.ndarray) -> np.ndarray:
        return np.einsum("...ni,...i->...n", self.tangent_frame, coef)

    def health(self) -> dict:
        """Worst-case violations of the frame and definition invariants."""
        E, nu = self.tangent_frame, self.normal_frame
        eye_m, eye_q = np.eye(self.m), np.eye(self.q)
        x = self.point[..., :-1]
        xhat = x / np.linalg.norm(x, axis=-1, keepdims=True)
        trace_AH = np.trace(self.A_H, axis1=-2, axis2=-1)
        return {
            "tangent_orthonormality": float(np.max(np.abs(np.einsum("...ni,...nj->...ij", E, E) - eye_m))),
            "normal_orthonormality": float(np.max(np.abs(np.einsum("...na,...nb->...ab", nu, nu) - eye_q), initial=0.0)),
            "tangent_normal": float(np.max(np.abs(np.einsum("...ni,...na->...ia", E, nu)), initial=0.0)),
            "radial": float(
                max(
                    np.max(np.abs(np.einsum("...ni,...n->...i", E[..., :-1, :], xhat))),
                    np.max(np.abs(np.einsum("...na,...n->...a", nu[..., :-1, :], xhat)), initial=0.0),
                )
            ),
            "trace_A_H": float(np.max(np.abs(trace_AH - self.m * self.H_norm_sq))),
            "xi_unit": float(np.max(np.abs(self.T_norm_sq + self.N_norm_sq - 1.0))),
            "asymmetry": float(np.max(self.asymmetry)),
        }


def _complete_normal(E: np.ndarray, point: np.ndarray, q: int) -> np.ndarray:
    """Normal frame from projected ambient basis vectors, largest residual first.

    Each slot takes the basis vector ``e_k`` whose component orthogonal to
    the radial direction, the tangent frame and the slots already filled is
    longest, so the frame is always built from well-conditioned vectors.
    """
    L, N, _ = E.shape
    x = point[:, :-1]
    xhat = np.zeros((L, N))
    xhat[:, :-1] = x / np.linalg.norm(x, axis=1, keepdims=True)
    nu = np.zeros((L, N, q))
    rows = np.arange(L)
    for slot in range(q):
        # candidates V[l, :, k] = e_k minus its radial, tangent and filled-normal parts
        V = np.broadcast_to(np.eye(N), (L, N, N)).copy()
        for _ in range(2):
            V -= np.einsum("ln,lk->lnk", xhat, np.einsum("ln,lnk->lk", xhat, V))
            V -= np.einsum("lni,lik->lnk", E, np.einsum("lni,lnk->lik", E, V))
            if slot:
                F = nu[:, :, :slot]
                V -= np.einsum("lna,lak->lnk", F, np.einsum("lna,lnk->lak", F, V))
        norms = np.linalg.norm(V, axis=1)
        k = np.argmax(norms, axis=1)
        best = norms[rows, k]
        if np.any(best < COMPLETION_TOL):
            bad = int(np.flatnonzero(best < COMPLETION_TOL)[0])
            raise FrameCompletionError(f"could not complete the normal frame at point {bad}")
        nu[:, :, slot] = V[rows, :, k] / best[:, None]
    return nu


def extrinsic_data(
    immersion: ImmersionSpec,
    u,
    tangent_mixing: np.ndarray | None = None,
    normal_mixing: np.ndarray | None = None,
) -> ExtrinsicData:
    """Extrinsic geometry at chart points ``u`` of shape ``(..., m)``.

    ``tangent_mixing`` (an ``m x m`` orthogonal matrix) re-mixes the chart
    directions before Gram-Schmidt and ``normal_mixing`` (``q x q``)
    rotates the completed normal frame; both exist for gauge tests.
    """
    u = np.asarray(u, dtype=float)
    lead = u.shape[:-1]
    m, n = immersion.m, immersion.n
    q = n + 1 - m
    if q < 1:
        raise ValueError(f"chart dimension m={m} must be at most n={n}")
    jet = immersion.jet(u)
    N = n + 2
    value = jet.value.reshape(-1, N)
    D = jet.grad.reshape(-1, N, m)
    Hs = jet.hess.reshape(-1, N, m, m)

    s = np.linalg.svd(D, compute_uv=False)
    bad = s[:, -1] < RANK_RTOL * s[:, 0]
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise NotAnImmersionError(
            f"rank-deficient differential at chart point {u.reshape(-1, m)[k].tolist()} "
            f"(singular values {s[k].tolist()})"
        )

    Dm = D if tangent_mixing is None else D @ np.asarray(tangent_mixing, dtype=float)
    E = _gram_schmidt(Dm)
    R = np.einsum("lni,lnj->lij", E, Dm)
    Q = np.linalg.inv(np.triu(R))
    if tangent_mixing is not None:
        Q = np.asarray(tangent_mixing, dtype=float) @ Q

    nu = _complete_normal(E, value, q)
    if normal_mixing is not None:
        nu = nu @ np.asarray(normal_mixing, dtype=float)

    hess_frame = np.einsum("lnab,lai,lbj->lnij", Hs, Q, Q)
    A = np.einsum("lna,lnij->laij", nu, hess_frame)
    asym = np.max(np.abs(A - np.swapaxes(A, -1, -2)), axis=(1, 2, 3))
    A = 0.5 * (A + np.swapaxes(A, -1, -2))
    H_coef = np.trace(A, axis1=-2, axis2=-1) / m
    H = np.einsum("lna,la->ln", nu, H_coef)

    g = np.einsum("lna,lnb->lab", D, D)
    ginv = np.linalg.inv(g)
    gamma = np.einsum("lkc,lnc,lnij->lkij", ginv, D, Hs)

    def shaped(a):
        return a.reshape(lead + a.shape[1:])

    return ExtrinsicData(
        u=u,
        c=float(immersion.c),
        point=shaped(value),
        tangent_frame=shaped(E),
        chart_to_frame=shaped(Q),
        normal_frame=shaped(nu),
        shape_ops=shaped(A),
        H=shaped(H),
        H_coef=shaped(H_coef),
        T=shaped(E[:, -1, :]),
        N=shaped(nu[:, -1, :]),
        metric_chart=shaped(g),
        christoffels=shaped(gamma),
        asymmetry=asym.reshape(lead),
        chart_hessian=jet.hess,
    )


# ---------------------------------------------------------------------------
# Normal fields and their derivatives
# ---------------------------------------------------------------------------


def _transported_frame(ext: ExtrinsicData, ref: np.ndarray) -> np.ndarray:
    """Project a reference normal frame onto the local normal spaces, then orthonormalize."""
    nu = ext.normal_frame
    ref = np.broadcast_to(ref, nu.shape)
    proj = np.einsum("...na,...ma,...mb->...nb", nu, nu, ref)
    lead = proj.shape[:-2]
    out = _gram_schmidt(proj.reshape((-1,) + proj.shape[-2:]))
    return out.reshape(lead + out.shape[-2:])


def normal_field(ext: ExtrinsicData, selector: Selector, ref: np.ndarray | None = None) -> np.ndarray:
    """Vector values of the normal field named by ``selector``.

    ``"H"`` is the mean curvature vector.  An integer picks a normal frame
    index; with ``ref`` (the frame at the stencil centres) the frame is
    transported smoothly instead of being recompleted, so that the field is
    differentiable across a stencil.
    """
    if selector == "H":
        return ext.H
    alpha = int(selector)
    if not 0 <= alpha < ext.q:
        raise ValueError(f"normal index {alpha} out of range for codimension {ext.q}")
    frame = ext.normal_frame if ref is None else _transported_frame(ext, ref)
    return frame[..., alpha]


def _field_fn(immersion, selector, ref, what):
    def f(pts):
        ext = extrinsic_data(immersion, pts)
        V = normal_field(ext, selector, ref)
        if what == "vector":
            return V
        # chart components b_ab = <V, d_a d_b psi> of the second fundamental form
        return np.einsum("...n,...nab->...ab", V, ext.chart_hessian)

    return f


def _derivative(f, u, h, use_richardson):
    coarse = fd.gradient(f, u, h)
    if not use_richardson:
        return coarse
    return fd.richardson(coarse, fd.gradient(f, u, h / 2.0))


@dataclass(frozen=True)
class DerivativePacket:
    """Third-order derivative data at a batch of chart points.

    ``nablaPerpH (..., m, N)`` holds the vectors ``nabla^perp_{E_i} H`` and
    ``nablaA (..., m, m, m)`` the matrices ``(nabla_{E_i} A_V)_{jk}``.
    """

    nablaPerpH: np.ndarray | None
    nablaA: np.ndarray | None
    fd_step: float
    richardson: bool
    selector: Selector | None = None
    parallel_defect: np.ndarray | None = None

    @property
    def nablaPerpH_norm(self) -> np.ndarray:
        return np.sqrt(np.sum(self.nablaPerpH**2, axis=(-2, -1)))

    @property
    def nablaA_norm_sq(self) -> np.ndarray:
        return np.sum(self.nablaA**2, axis=(-3, -2, -1))


def normal_connection(
    immersion: ImmersionSpec,
    u,
    selector: Selector = "H",
    h: float = 1e-3,
    richardson: bool = True,
    ext: ExtrinsicData | None = None,
) -> np.ndarray:
    """``nabla^perp_{E_i} V`` as ambient vectors, shape ``(..., m, N)``."""
    u = np.asarray(u, dtype=float)
    ext = extrinsic_data(immersion, u) if ext is None else ext
    ref = None if selector == "H" else ext.normal_frame
    dV = _derivative(_field_fn(immersion, selector, ref, "vector"), u, h, richardson)
    dV_frame = np.einsum("...ai,...an->...in", ext.chart_to_frame, dV)
    nu = ext.normal_frame
    coef = np.einsum("...na,...in->...ia", nu, dV_frame)
    return np.einsum("...na,...ia->...in", nu, coef)


def normal_connection_H(
    immersion: ImmersionSpec, u, h: float = 1e-3, richardson: bool = True
) -> DerivativePacket:
    """Normal covariant derivative of the mean curvature vector."""
    nH = normal_connection(immersion, u, "H", h, richardson)
    return DerivativePacket(nH, None, h, richardson, "H")


def covariant_dA(
    immersion: ImmersionSpec,
    u,
    selector: Selector = "H",
    h: float = 1e-3,
    richardson: bool = True,
    check_parallel: bool = True,
) -> DerivativePacket:
    """Covariant derivative of the shape operator of a normal field.

    Differentiates the chart components ``b_ab = <V, d_a d_b psi>`` and applies
    the Christoffel corrections of a (0,2) tensor before moving to the
    orthonormal frame.  A non-parallel ``V`` is flagged with a warning.
    """
    u = np.asarray(u, dtype=float)
    ext = extrinsic_data(immersion, u)
    ref = None if selector == "H" else ext.normal_frame
    bfield = _field_fn(immersion, selector, ref, "sff")
    b = bfield(u)
    db = _derivative(bfield, u, h, richardson)
    G = ext.christoffels
    nb = db - np.einsum("...kca,...kb->...cab", G, b) - np.einsum("...kcb,...ak->...cab", G, b)
    Q = ext.chart_to_frame
    nablaA = np.einsum("...ci,...aj,...bk,...cab->...ijk", Q, Q, Q, nb)
    defect = None
    if check_parallel:
        nV = normal_connection(immersion, u, selector, h, richardson, ext)
        defect = np.sqrt(np.sum(nV**2, axis=(-2, -1)))
        if np.any(defect > PARALLEL_TOL):
            warnings.warn(
                f"normal field {selector!r} is not parallel (max |nabla^perp V| = {np.max(defect):.2e})",
                NormalFieldWarning,
                stacklevel=2,
            )
    return DerivativePacket(None, nablaA, h, richardson, selector, defect)


# ---------------------------------------------------------------------------
# Intrinsic curvature
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IntrinsicCurvature:
    """``riemann[a, b, c, d] = <R(E_a, E_b) E_c, E_d>`` in the tangent frame."""

    riemann: np.ndarray
    ricci: np.ndarray
    sectional: np.ndarray
    K: np.ndarray | None


def curvature_tensor(ext: ExtrinsicData) -> np.ndarray:
    """Curvature of the induced metric from the Gauss equation, frame components."""
    m = ext.m
    d = np.eye(m)
    T = ext.T
    TT = T[..., :, None] * T[..., None, :]
    dd_ad_bc = np.einsum("ad,bc->abcd", d, d)
    dd_ac_bd = np.einsum("ac,bd->abcd", d, d)
    ambient_part = (
        dd_ad_bc
        - dd_ac_bd
        - np.einsum("...bc,ad->...abcd", TT, d)
        + np.einsum("...ac,bd->...abcd", TT, d)
        + np.einsum("ac,...bd->...abcd", d, TT)
        - np.einsum("bc,...ad->...abcd", d, TT)
    )
    A = ext.shape_ops
    sff_part = np.einsum("...xbc,...xad->...abcd", A, A) - np.einsum("...xac,...xbd->...abcd", A, A)
    return ext.c * ambient_part + sff_part


def intrinsic_curvature(immersion: ImmersionSpec, u, ext: ExtrinsicData | None = None) -> IntrinsicCurvature:
    ext = extrinsic_data(immersion, u) if ext is None else ext
    R = curvature_tensor(ext)
    ricci = np.einsum("...ijki->...jk", R)
    sectional = np.einsum("...abba->...ab", R)
    K = R[..., 0, 1, 1, 0] if ext.m == 2 else None
    return IntrinsicCurvature(R, ricci, sectional, K)


def gaussian_curvature_from_metric(immersion: ImmersionSpec, u, h: float = 1e-3) -> np.ndarray:
    """Gaussian curvature of a surface from its chart metric alone.

    Christoffel symbols come from exact jets; only their first derivatives
    are finite differences.
    """
    if immersion.m != 2:
        raise ValueError("Gaussian curvature needs a surface (m = 2)")
    u = np.asarray(u, dtype=float)

    def gamma(pts):
        return extrinsic_data(immersion, pts).christoffels

    ext = extrinsic_data(immersion, u)
    G = ext.christoffels
    dG = fd.gradient(gamma, u, h)  # [..., e, k, i, j] = d_e Gamma^k_ij
    # R^a_{bcd} = d_c G^a_db - d_d G^a_cb + G^a_ce G^e_db - G^a_de G^e_cb
    Rup = (
        np.einsum("...cadb->...abcd", dG)
        - np.einsum("...dacb->...abcd", dG)
        + np.einsum("...ace,...edb->...abcd", G, G)
        - np.einsum("...ade,...ecb->...abcd", G, G)
    )
    g = ext.metric_chart
    R1212 = np.einsum("...a,...a->...", g[..., 0, :], Rup[..., :, 1, 0, 1])
    return R1212 / np.linalg.det(g)
