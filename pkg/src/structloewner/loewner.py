"""Loewner pencils and the two-term (K = 2) structured realization."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _linalg
from .data import InterpolationData, conjugate_closure_sort, real_transform
from .errors import (
    ConditioningWarning,
    DegenerateDataError,
    DenominatorError,
    MissingThetaError,
    NotClosedError,
    RealityError,
    RegularityError,
    SizeMismatchError,
    StructureError,
    TransformSingularError,
)
from .structure import AffineStructure, BasisFunction, StructuredRealization

__all__ = [
    "LoewnerPencil",
    "build_loewner_pencil",
    "loewner_realization",
    "transform_data_k2",
    "k2_realization",
    "k2_direct_matrices",
    "sylvester_residuals_k2",
    "STATE_SPACE",
]

LOEWNER_TOL = 1e-12
NEAR_TOL = 1e-8
REAL_TOL = 1e-10

STATE_SPACE = AffineStructure((BasisFunction.monomial(1), BasisFunction.monomial(0, -1.0)))


@dataclass(frozen=True, eq=False)
class LoewnerPencil:
    """``L`` and ``Ls`` plus ``F`` (rows ``f_i^T``, n x m) and ``G`` (columns ``g_j``, p x n)."""

    L: np.ndarray
    Ls: np.ndarray
    F: np.ndarray
    G: np.ndarray

    @property
    def n(self):
        return self.L.shape[0]


def _coinciding_mask(data: InterpolationData):
    return data.mu[:, None] == data.sigma[None, :]


def build_loewner_pencil(data: InterpolationData, coinciding=None) -> LoewnerPencil:
    """Divided-difference matrices of ``data``.

    Parameters
    ----------
    coinciding
        Boolean ``(nl, nr)`` mask of entries treated as coinciding.  Defaults
        to exact equality ``mu_i == sigma_j``.  Only diagonal entries may
        coincide; they need ``theta_i``.
    """
    mu, sigma = data.mu, data.sigma
    mask = _coinciding_mask(data) if coinciding is None else np.asarray(coinciding, dtype=bool)
    FR = data.f @ data.r.T          # f_i^T r_j
    LG = data.ell @ data.g.T        # ell_i^T g_j
    D = mu[:, None] - sigma[None, :]
    off = ~mask
    scale = np.maximum(1.0, np.maximum(np.abs(mu)[:, None], np.abs(sigma)[None, :]))
    near = off & (np.abs(D) <= NEAR_TOL * scale)
    if np.any(near):
        idx = list(zip(*np.nonzero(near)))
        warnings.warn(
            f"left/right points nearly coincide at entries {idx[:5]}; divided differences lose accuracy",
            ConditioningWarning,
            stacklevel=2,
        )
    if np.any(off & (D == 0)):
        raise DenominatorError("zero denominator at an entry not marked as coinciding")
    L = np.empty(D.shape, complex)
    Ls = np.empty(D.shape, complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        L[off] = (FR[off] - LG[off]) / D[off]
        Ls[off] = ((mu[:, None] * FR - sigma[None, :] * LG)[off]) / D[off]
    for i, j in zip(*np.nonzero(mask)):
        if i != j:
            raise MissingThetaError(
                f"left point {i} equals right point {j}; coinciding points must share an index"
            )
        if i not in data.theta:
            raise MissingThetaError(f"no derivative datum theta_{i} for coinciding point {mu[i]}")
        th = data.theta[i]
        L[i, i] = th
        Ls[i, i] = FR[i, i] + mu[i] * th
    return LoewnerPencil(L, Ls, np.array(data.f), np.array(data.g).T)


def _truncate_pencil(R: StructuredRealization, tol, stacklevel=3):
    n = R.n
    U, rh, V, rv = _linalg.pencil_bases(R.A, tol)
    r = min(rh, rv)
    if r == 0:
        raise DegenerateDataError("the pencil is numerically zero; the data carries no information")
    if r == n:
        return R
    if rh != rv:
        warnings.warn(
            f"row rank {rh} and column rank {rv} of the pencil differ; truncating to {r}",
            ConditioningWarning,
            stacklevel=stacklevel,
        )
    return R.compress(U[:, :r], V[:, :r])


def _check_regular(R: StructuredRealization, points):
    for s in points:
        _, rc = _linalg.lu_rcond(R.kernel(s))
        if not rc >= _linalg.RCOND_MIN:
            raise RegularityError(f"the realized K(s) is singular at driving frequency {s} (rcond {rc:.2e})")


def _realify(R: StructuredRealization, TF, TG):
    Rt = R.transformed(TF, TG)
    lvl = Rt.imag_level()
    if lvl > REAL_TOL:
        raise RealityError(f"transformed realization keeps imaginary parts of relative size {lvl:.2e}")
    return Rt.as_real()


def _prepare_real(data, make_real):
    """Sort ``data`` into conjugate pairs when a real realization is wanted."""
    if make_real is False:
        return data, None
    sd, closed, _ = conjugate_closure_sort(data)
    if not closed:
        if make_real:
            raise NotClosedError("a real realization needs data closed under conjugation")
        return data, None
    T = real_transform(sd)
    return sd, T


def loewner_realization(
    data: InterpolationData,
    tol: float = LOEWNER_TOL,
    make_real: Optional[bool] = False,
    truncate: bool = True,
) -> StructuredRealization:
    """Classical Loewner realization with structure ``(s, -1)``.

    ``A_1 = -L``, ``A_2 = -Ls``, ``B = F^T``, ``C = G`` so that
    ``H(s) = G (Ls - s L)^{-1} F^T``.  A rank deficient pencil is compressed
    by a short SVD with relative threshold ``tol``.
    """
    data.n
    data, T = _prepare_real(data, make_real)
    P = build_loewner_pencil(data)
    R = StructuredRealization(STATE_SPACE, np.stack([-P.L, -P.Ls]), P.F, P.G)
    if T is not None:
        R = _realify(R, T.T_F, T.T_G)
    if truncate:
        R = _truncate_pencil(R, tol)
    _check_regular(R, np.concatenate([data.mu, data.sigma]))
    return R


def _h2_check(structure, pts, label):
    h1 = structure.basis[0](pts)
    h2 = structure.basis[1](pts)
    bad = np.abs(h2) <= 1e-14 * np.maximum(1.0, np.abs(h1))
    if np.any(bad):
        raise TransformSingularError([complex(z) for z in np.atleast_1d(pts)[np.atleast_1d(bad)]])
    return np.atleast_1d(h1), np.atleast_1d(h2)


def transform_data_k2(data: InterpolationData, structure: AffineStructure) -> InterpolationData:
    """Map data for ``h_1 A_1 + h_2 A_2`` to data for the standard Loewner pencil.

    Left triples become ``(h1/h2 (mu), ell / h2(mu), f)``, right triples
    ``(h1/h2 (sigma), r / h2(sigma), g)`` and coinciding derivative data
    ``(h2 theta + h2' ell^T g) / (h1' h2 - h2' h1)`` at ``mu_i``.
    """
    if structure.K != 2:
        raise StructureError(f"the two-term transform needs K = 2, got K = {structure.K}")
    mu, sigma = data.mu, data.sigma
    h1m, h2m = _h2_check(structure, mu, "left")
    h1s, h2s = _h2_check(structure, sigma, "right")
    theta = {}
    for i, th in data.theta.items():
        z = mu[i]
        b1, b2 = structure.basis
        h1, h2, d1, d2 = b1(z), b2(z), b1.deriv(z), b2.deriv(z)
        den = d1 * h2 - d2 * h1
        if abs(den) <= 1e-14 * max(1.0, abs(d1 * h2), abs(d2 * h1)):
            raise DenominatorError(f"h1' h2 - h2' h1 vanishes at coinciding point {z}")
        lg = complex(data.ell[i] @ data.g[i])
        theta[i] = (h2 * th + d2 * lg) / den
    return InterpolationData(
        h1m / h2m, data.ell / h2m[:, None], data.f,
        h1s / h2s, data.r / h2s[:, None], data.g,
        theta, None, None,
    )


def k2_direct_matrices(data: InterpolationData, structure: AffineStructure):
    """``(A_1, A_2)`` from the entrywise closed form (no data transform)."""
    b1, b2 = structure.basis
    mu, sigma = data.mu, data.sigma
    h1m, h2m, h1s, h2s = b1(mu), b2(mu), b1(sigma), b2(sigma)
    h1m, h2m, h1s, h2s = map(np.atleast_1d, (h1m, h2m, h1s, h2s))
    FR = data.f @ data.r.T
    LG = data.ell @ data.g.T
    mask = _coinciding_mask(data)
    with np.errstate(divide="ignore", invalid="ignore"):
        d1 = h2m[:, None] * h1s[None, :] - h1m[:, None] * h2s[None, :]
        A1 = (h2m[:, None] * FR - LG * h2s[None, :]) / d1
        A2 = (h1m[:, None] * FR - LG * h1s[None, :]) / (-d1)
    for i in zip(*np.nonzero(mask)):
        i = i[0]
        z = mu[i]
        th = data.theta[i]
        h1, h2, dh1, dh2 = b1(z), b2(z), b1.deriv(z), b2.deriv(z)
        lg = LG[i, i]
        A1[i, i] = (h2 * th + dh2 * lg) / (dh2 * h1 - dh1 * h2)
        A2[i, i] = (h1 * th + dh1 * lg) / (dh1 * h2 - dh2 * h1)
    return A1, A2


def sylvester_residuals_k2(R: StructuredRealization, data: InterpolationData):
    """Relative residuals of the two decoupled Sylvester-like equations.

    Only meaningful for realizations expressed in the data coordinates
    (``B = F^T``, ``C = G``) and before any truncation.
    """
    b1, b2 = R.structure.basis
    h1M, h2M = np.diag(b1(data.mu)), np.diag(b2(data.mu))
    h1S, h2S = np.diag(b1(data.sigma)), np.diag(b2(data.sigma))
    FR = data.f @ data.r.T
    LG = data.ell @ data.g.T
    A1, A2 = R.A
    r1 = h2M @ A1 @ h1S - h1M @ A1 @ h2S - (h2M @ FR - LG @ h2S)
    r2 = h1M @ A2 @ h2S - h2M @ A2 @ h1S - (h1M @ FR - LG @ h1S)
    s1 = 1.0 + np.abs(h2M @ FR).max() + np.abs(LG @ h2S).max()
    s2 = 1.0 + np.abs(h1M @ FR).max() + np.abs(LG @ h1S).max()
    return float(np.abs(r1).max() / s1), float(np.abs(r2).max() / s2)


def k2_realization(
    data: InterpolationData,
    structure: AffineStructure,
    make_real: Optional[bool] = False,
    tol: float = LOEWNER_TOL,
    truncate: bool = True,
    check: bool = True,
) -> StructuredRealization:
    """Structured realization for ``K(s) = h_1(s) A_1 + h_2(s) A_2``.

    The data is transformed so that the standard Loewner pencil of the
    transformed data gives ``A_1 = -L``, ``A_2 = Ls``, ``B = F^T`` and
    ``C = G``.  With ``make_real`` the conjugate-closed data is sorted into
    pairs and the result is rotated to real arithmetic before truncation.
    """
    if structure.K != 2:
        raise StructureError(f"the two-term realization needs K = 2, got K = {structure.K}")
    data.n
    data, T = _prepare_real(data, make_real)
    td = transform_data_k2(data, structure)
    P = build_loewner_pencil(td, coinciding=_coinciding_mask(data))
    A = np.stack([-P.L, P.Ls])
    if check:
        D1, D2 = k2_direct_matrices(data, structure)
        dev = max(np.abs(A[0] - D1).max() / (1 + np.abs(D1).max()), np.abs(A[1] - D2).max() / (1 + np.abs(D2).max()))
        if dev > 1e-12:
            warnings.warn(
                f"transformed-data and entrywise formulas differ by {dev:.1e}", ConditioningWarning, stacklevel=2
            )
    R = StructuredRealization(structure, A, P.F, P.G)
    if T is not None:
        R = _realify(R, T.T_F, T.T_G)
    if truncate:
        R = _truncate_pencil(R, tol)
    _check_regular(R, np.concatenate([data.mu, data.sigma]))
    return R
