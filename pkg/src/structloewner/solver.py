"""Realizations with three or more basis functions.

The free parameters left after interpolating the base data are fixed either
by additional interpolation points (extra groups of samples) or by
derivative data.  Both lead to block equations

    sum_k X_k A_k = Y        (left conditions)
    sum_k A_k Z_k = U        (right conditions)

which are solved jointly for ``A_1, ..., A_K``, either through the dense
Kronecker system or, when every ``X_k``, ``Z_k`` is diagonal, entry by entry.
"""

from __future__ import annotations

import contextlib
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _linalg
from .data import (
    CONJ_TOL,
    GroupedData,
    InterpolationData,
    SampleGroup,
    _count_pairs,
    conjugate_closure_sort,
    pair_block_transform,
    partition_groups,
)
from .errors import (
    ConditioningWarning,
    DataError,
    HaarViolationError,
    MissingHermiteDataError,
    NotClosedError,
    OverlapError,
    RankError,
    RankMismatchError,
    RealityError,
    SingularSystemError,
    SingularSystemWarning,
    SizeMismatchError,
    StructLoewnerError,
    StructureError,
    ZeroSampleError,
)
from .loewner import k2_realization
from .structure import AffineStructure, StructuredRealization

__all__ = [
    "PMatrixSet",
    "AssembledSystem",
    "Equation",
    "choose_p_siso",
    "choose_p_mimo",
    "assemble_system",
    "solve_equations",
    "solve_additional_points",
    "solve_hermite",
    "rank_truncate",
    "interpolation_residuals",
    "grouped_residuals",
    "realize",
]

TRUNC_TOL = 1e-10
HAAR_TOL = 1e-13
REAL_TOL = 1e-10
RESIDUAL_TOL = 1e-8


# --- P matrices -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PMatrixSet:
    """Choice of ``P_{F,q}``, ``P_{G,q}`` (and derivative companions) with the implied ``B``, ``C``.

    ``PF[q]`` is ``P_{F,q}`` itself (so ``F_q^T = PF[q].T @ B``) and
    ``PG[q]`` is ``P_{G,q}`` (so ``G_q = C @ PG[q]``).  ``TF``/``TG`` hold the
    per-group block transforms when the set was built for a real
    realization.
    """

    PF: tuple
    PG: tuple
    B: np.ndarray
    C: np.ndarray
    PFd: Optional[np.ndarray] = None
    PGd: Optional[np.ndarray] = None
    kind: str = "siso"
    TF: Optional[tuple] = None
    TG: Optional[tuple] = None

    @property
    def is_real(self):
        return self.TF is not None


def _siso_check(groups: GroupedData):
    if groups.m != 1 or groups.p != 1:
        raise DataError("the diagonal P choice needs SISO data (m = p = 1)")


def choose_p_siso(groups: GroupedData, make_real: bool = False) -> PMatrixSet:
    """``P_{F,q} = diag(F_q)``, ``P_{G,q} = diag(G_q)``, ``B`` and ``C`` all ones.

    With ``make_real`` every group on a side must have the same conjugate
    pair layout; the shared block transforms are recorded.
    """
    _siso_check(groups)
    n = groups.n
    PF, PG = [], []
    for side, gs, out in (("left", groups.left_groups, PF), ("right", groups.right_groups, PG)):
        for g in gs:
            v = g.vals[:, 0]
            scale = np.abs(v).max(initial=0)
            bad = np.nonzero(np.abs(v) <= 1e-14 * scale if scale > 0 else np.ones(n, bool))[0]
            if bad.size:
                raise ZeroSampleError(complex(g.points[bad[0]]))
            out.append(np.diag(v))
    PFd = PGd = None
    L0, R0 = groups.left_groups[0], groups.right_groups[0]
    if L0.dvals is not None:
        PFd = np.diag(L0.dvals[:, 0])
    if R0.dvals is not None:
        PGd = np.diag(R0.dvals[:, 0])
    TF = TG = None
    if make_real:
        TF, TG = _shared_transforms(groups)
    return PMatrixSet(tuple(PF), tuple(PG), np.ones((n, 1)), np.ones((1, n)), PFd, PGd, "siso", TF, TG)


def _group_transform(g: SampleGroup):
    k = _count_pairs(g.points)
    if k is None:
        raise NotClosedError("group is not sorted into conjugate pairs followed by real points")
    for a in range(k):
        i = 2 * a
        for arr in (g.dirs, g.vals) + ((g.dvals,) if g.dvals is not None else ()):
            if np.abs(arr[i + 1] - np.conj(arr[i])).max() > CONJ_TOL * max(1.0, np.abs(arr[i]).max()):
                raise NotClosedError("group samples are not closed under conjugation")
    return pair_block_transform(k, g.n - 2 * k)


def _shared_transforms(groups):
    out = []
    for gs in (groups.left_groups, groups.right_groups):
        Ts = [_group_transform(g) for g in gs]
        if any(T.shape != Ts[0].shape or not np.array_equal(T, Ts[0]) for T in Ts):
            raise NotClosedError("groups on one side have different conjugate pair layouts")
        out.append(tuple(Ts))
    return out


def _real_complement(T, v):
    """Columns ``T Y`` with ``Y`` real orthonormal and orthogonal to the real block ``T^* v``."""
    w = (np.conj(T).T @ v).real
    Y = _linalg.orth_complement(w)
    return T @ Y


def choose_p_mimo(groups: GroupedData, make_real: bool = False) -> PMatrixSet:
    """``P_{F,q}^T = [F_q^T, *]``, ``P_{G,q} = [G_q; *]`` with orthonormal completions.

    ``B = [I_m; 0]`` and ``C = [I_p, 0]``.  For a real realization the
    completions are rotated by the group's block transform so that
    ``T^* P_{F,q}^T`` and ``P_{G,q} T`` are real.
    """
    n, m, p = groups.n, groups.m, groups.p
    if m > n or p > n:
        raise RankError(f"need m, p <= n; got m={m}, p={p}, n={n}")
    PF, PG, TF, TG = [], [], [], []
    for g in groups.left_groups:
        Ft = g.vals  # n x m
        if _linalg.numerical_rank(np.linalg.svd(Ft, compute_uv=False), 1e-12) < m:
            raise RankError("a left value block is column-rank deficient")
        if make_real:
            T = _group_transform(g)
            TF.append(T)
            comp = _real_complement(T, Ft)
        else:
            comp = _linalg.orth_complement(Ft)
        PF.append(np.concatenate([Ft, comp], axis=1).T)
    for g in groups.right_groups:
        Gq = g.vals.T  # p x n
        if _linalg.numerical_rank(np.linalg.svd(Gq, compute_uv=False), 1e-12) < p:
            raise RankError("a right value block is row-rank deficient")
        if make_real:
            T = _group_transform(g)
            TG.append(T)
            # rows orthogonal to the real row space of G T, rotated back
            Yr = _linalg.orth_complement((Gq @ T).real.T).T
            comp = Yr @ np.conj(T).T
        else:
            comp = _linalg.orth_complement(Gq.conj().T).conj().T
        PG.append(np.concatenate([Gq, comp], axis=0))
    L0, R0 = groups.left_groups[0], groups.right_groups[0]
    PFd = PGd = None
    if L0.dvals is not None:
        PFd = np.concatenate([L0.dvals, np.zeros((n, n - m))], axis=1).T
    if R0.dvals is not None:
        PGd = np.concatenate([R0.dvals.T, np.zeros((n - p, n))], axis=0)
    B = np.eye(n, m)
    C = np.eye(p, n)
    return PMatrixSet(
        tuple(PF), tuple(PG), B, C, PFd, PGd, "mimo",
        tuple(TF) if make_real else None, tuple(TG) if make_real else None,
    )


# --- equations and the linear system -------------------------------------------------


@dataclass(frozen=True, eq=False)
class Equation:
    """One block condition: ``sum_k X[k] A_k = rhs`` (left) or ``sum_k A_k X[k] = rhs`` (right)."""

    side: str
    X: np.ndarray  # (K, n, n)
    rhs: np.ndarray  # (n, n)
    label: str = ""
    group: int = 0


def _diag(v):
    return np.diag(np.asarray(v, dtype=complex))


def additional_point_equations(groups: GroupedData, structure: AffineStructure, P: PMatrixSet):
    eqs = []
    for q, g in enumerate(groups.left_groups):
        h = structure.values(g.points)  # (K, n)
        X = np.stack([_diag(h[k]) @ P.PF[q].T for k in range(structure.K)])
        eqs.append(Equation("left", X, g.dirs @ P.C, f"left group {q}", q))
    for q, g in enumerate(groups.right_groups):
        h = structure.values(g.points)
        X = np.stack([P.PG[q] @ _diag(h[k]) for k in range(structure.K)])
        eqs.append(Equation("right", X, P.B @ g.dirs.T, f"right group {q}", q))
    return eqs


def hermite_equations(groups: GroupedData, structure: AffineStructure, P: PMatrixSet, side: str):
    L, R = groups.left_groups[0], groups.right_groups[0]
    n, K = groups.n, structure.K
    eqs = additional_point_equations(groups, structure, P)
    if side in ("left", "both"):
        h, dh = structure.values(L.points), structure.derivs(L.points)
        X = np.stack([_diag(h[k]) @ P.PFd.T + _diag(dh[k]) @ P.PF[0].T for k in range(K)])
        eqs.append(Equation("left", X, np.zeros((n, n), complex), "left derivative"))
    if side in ("right", "both"):
        h, dh = structure.values(R.points), structure.derivs(R.points)
        X = np.stack([P.PGd @ _diag(h[k]) + P.PG[0] @ _diag(dh[k]) for k in range(K)])
        eqs.append(Equation("right", X, np.zeros((n, n), complex), "right derivative"))
    return eqs


@dataclass(frozen=True, eq=False)
class AssembledSystem:
    """Dense ``A_sys alpha = beta`` with ``alpha = [vec(A_1); ...; vec(A_K)]`` (column-major vec).

    ``layout[k]`` is the slice of ``alpha`` holding ``vec(A_k)``; ``rows``
    lists the equation label of each block row.
    """

    A_sys: np.ndarray
    beta: np.ndarray
    layout: tuple
    rows: tuple
    n: int
    K: int

    def unpack(self, alpha):
        n = self.n
        return np.stack([alpha[s].reshape(n, n, order="F") for s in self.layout])

    def residual(self, alpha):
        r = self.A_sys @ alpha - self.beta
        return float(np.linalg.norm(r) / (1.0 + np.linalg.norm(self.beta)))


def assemble_system(equations: Sequence[Equation], K: int, n: int) -> AssembledSystem:
    """Kronecker form: left ``(I kron X_k)``, right ``(Z_k^T kron I)``."""
    I = np.eye(n)
    blocks, beta = [], []
    for e in equations:
        if e.side == "left":
            row = [np.kron(I, e.X[k]) for k in range(K)]
        else:
            row = [np.kron(e.X[k].T, I) for k in range(K)]
        blocks.append(row)
        beta.append(e.rhs.reshape(-1, order="F"))
    dtype = np.result_type(*[e.X.dtype for e in equations], *[e.rhs.dtype for e in equations])
    A = np.block(blocks).astype(dtype)
    b = np.concatenate(beta).astype(dtype)
    layout = tuple(slice(k * n * n, (k + 1) * n * n) for k in range(K))
    return AssembledSystem(A, b, layout, tuple(e.label for e in equations), n, K)


def _is_diagonal(X):
    n = X.shape[-1]
    off = X.copy()
    idx = np.arange(n)
    off[..., idx, idx] = 0
    return not np.any(off)


def _solve_entrywise(equations, K, n):
    """Per-entry ``K x K`` systems when every coefficient matrix is diagonal."""
    E = len(equations)
    M = np.empty((n, n, E, K), complex)
    rhs = np.empty((n, n, E), complex)
    for e, eq in enumerate(equations):
        d = np.diagonal(eq.X, axis1=1, axis2=2)  # (K, n)
        if eq.side == "left":
            M[:, :, e, :] = d.T[:, None, :]
        else:
            M[:, :, e, :] = d.T[None, :, :]
        rhs[:, :, e] = eq.rhs
    # row equilibration does not change the solution
    rs = np.abs(M).max(axis=3)
    rs[rs == 0] = 1.0
    M = M / rs[..., None]
    rhs = rhs / rs
    sv = np.linalg.svd(M, compute_uv=False)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(sv[..., 0] > 0, sv[..., -1] / sv[..., 0], 0.0)
    if np.any(~(ratio >= HAAR_TOL)):
        i, j = np.unravel_index(np.argmin(np.nan_to_num(ratio, nan=-1.0)), ratio.shape)
        raise HaarViolationError((int(i), int(j)), float(ratio[i, j]))
    a = np.linalg.solve(M, rhs[..., None])[..., 0]  # (n, n, K)
    return np.moveaxis(a, 2, 0)


def _solve_dense(system: AssembledSystem):
    A, b = system.A_sys, system.beta
    fac, rcond = _linalg.lu_rcond(A)
    if rcond >= _linalg.RCOND_MIN:
        alpha = _linalg.lu_solve(fac, b)
        return alpha, system.residual(alpha)
    alpha, *_ , sv = np.linalg.lstsq(A, b, rcond=None)
    res = system.residual(alpha)
    smin = float(sv[-1]) if sv.size else 0.0
    if res > RESIDUAL_TOL:
        raise SingularSystemError(
            f"the coefficient system is singular (rcond {rcond:.2e}) and least squares leaves residual {res:.2e}",
            smin,
            res,
        )
    warnings.warn(
        f"the coefficient system is numerically singular (rcond {rcond:.2e}, sigma_min {smin:.2e});"
        f" least-squares solution with residual {res:.2e} used",
        SingularSystemWarning,
        stacklevel=3,
    )
    return alpha, res


def solve_equations(equations, K, n, fast=True, real=False):
    """Solve the block conditions for ``(A_1, ..., A_K)``.

    ``fast`` allows the entrywise path when all coefficients are diagonal.
    ``real`` casts the (already real) coefficients to real arithmetic.
    """
    if real:
        lvl = max(_linalg.relative_imag(e.X, e.rhs) for e in equations)
        if lvl > REAL_TOL:
            raise RealityError(f"transformed conditions keep imaginary parts of relative size {lvl:.2e}")
        equations = [Equation(e.side, e.X.real, e.rhs.real, e.label) for e in equations]
    if len(equations) != K:
        raise SizeMismatchError(f"{len(equations)} block conditions for K = {K}")
    if fast and not real and all(_is_diagonal(e.X) for e in equations):
        return _solve_entrywise(equations, K, n)
    system = assemble_system(equations, K, n)
    alpha, _ = _solve_dense(system)
    return system.unpack(alpha)


def _transform_equations(equations, TFs, TGs):
    """Left-multiply left conditions by ``T_{F,q}^*``, right-multiply right ones by ``T_{G,q}``."""
    out = []
    for e in equations:
        if e.side == "left":
            Th = np.conj(TFs[e.group]).T
            out.append(Equation("left", np.einsum("ij,kjl->kil", Th, e.X), Th @ e.rhs, e.label, e.group))
        else:
            T = TGs[e.group]
            out.append(Equation("right", np.einsum("kij,jl->kil", e.X, T), e.rhs @ T, e.label, e.group))
    return out


def _realization_from_equations(equations, structure, P: PMatrixSet, n, fast=True):
    K = structure.K
    if P.is_real and P.kind == "mimo":
        # derivative conditions share the base group's transform
        eqs = _transform_equations(equations, P.TF, P.TG)
        A = solve_equations(eqs, K, n, fast=False, real=True)
        return StructuredRealization(structure, A, P.B, P.C, is_real=True)
    A = solve_equations(equations, K, n, fast=fast)
    R = StructuredRealization(structure, A, P.B, P.C)
    if P.is_real:
        Rt = R.transformed(P.TF[0], P.TG[0])
        lvl = Rt.imag_level()
        if lvl > REAL_TOL:
            raise RealityError(f"transformed realization keeps imaginary parts of relative size {lvl:.2e}")
        R = Rt.as_real()
    return R


# --- residuals ------------------------------------------------------------------


def _rel(a, b):
    return float(np.linalg.norm(a - b) / (1.0 + np.linalg.norm(b)))


def interpolation_residuals(R: StructuredRealization, data: InterpolationData) -> dict:
    """Largest relative residuals ``|lhs - rhs| / (1 + |rhs|)`` per condition type."""
    out = {"left": 0.0, "right": 0.0}
    for i, s in enumerate(data.mu):
        out["left"] = max(out["left"], _rel(data.ell[i] @ R.transfer(s), data.f[i]))
    for j, s in enumerate(data.sigma):
        out["right"] = max(out["right"], _rel(R.transfer(s) @ data.r[j], data.g[j]))
    if data.theta:
        out["bitangential"] = max(
            _rel(data.ell[i] @ R.transfer_deriv(data.mu[i]) @ data.r[i], np.asarray(th)) for i, th in data.theta.items()
        )
    if data.fprime is not None:
        out["left_hermite"] = max(
            _rel(data.ell[i] @ R.transfer_deriv(s), data.fprime[i]) for i, s in enumerate(data.mu)
        )
    if data.gprime is not None:
        out["right_hermite"] = max(
            _rel(R.transfer_deriv(s) @ data.r[j], data.gprime[j]) for j, s in enumerate(data.sigma)
        )
    return out


def grouped_residuals(R: StructuredRealization, groups: GroupedData) -> dict:
    """Residuals over every group's samples (and base derivative data)."""
    out = {"left": 0.0, "right": 0.0}
    for g in groups.left_groups:
        for i, s in enumerate(g.points):
            out["left"] = max(out["left"], _rel(g.dirs[i] @ R.transfer(s), g.vals[i]))
    for g in groups.right_groups:
        for j, s in enumerate(g.points):
            out["right"] = max(out["right"], _rel(R.transfer(s) @ g.dirs[j], g.vals[j]))
    L, Rg = groups.left_groups[0], groups.right_groups[0]
    if L.dvals is not None:
        out["left_hermite"] = max(_rel(L.dirs[i] @ R.transfer_deriv(s), L.dvals[i]) for i, s in enumerate(L.points))
    if Rg.dvals is not None:
        out["right_hermite"] = max(_rel(R.transfer_deriv(s) @ Rg.dirs[j], Rg.dvals[j]) for j, s in enumerate(Rg.points))
    return out


def _post_check(R, groups, hermite=False, stacklevel=3):
    try:
        res = grouped_residuals(R, groups)
    except StructLoewnerError as exc:
        warnings.warn(f"interpolation check failed: {exc}", ConditioningWarning, stacklevel=stacklevel)
        return None
    worst = max(v for k, v in res.items() if "hermite" not in k)
    dworst = max([v for k, v in res.items() if "hermite" in k], default=0.0)
    if worst > RESIDUAL_TOL or dworst > 10 * RESIDUAL_TOL:
        warnings.warn(
            f"realization misses the data: residuals {res}", ConditioningWarning, stacklevel=stacklevel
        )
    return res


# --- solvers ---------------------------------------------------------------------


def _check_groups(groups: GroupedData, structure: AffineStructure):
    if groups.QF + groups.QG != structure.K:
        raise StructureError(
            f"Q_F + Q_G = {groups.QF} + {groups.QG} does not match K = {structure.K}"
        )
    lp = np.concatenate([g.points for g in groups.left_groups])
    rp = np.concatenate([g.points for g in groups.right_groups])
    if np.any(lp[:, None] == rp[None, :]):
        raise OverlapError("left and right point sets must be disjoint")


def solve_additional_points(
    groups: GroupedData,
    structure: AffineStructure,
    P: Optional[PMatrixSet] = None,
    fast: bool = True,
    check: bool = True,
) -> StructuredRealization:
    """Interpolate every group of samples with an order-``n`` realization.

    Parameters
    ----------
    groups
        ``Q_F`` left and ``Q_G`` right groups with ``Q_F + Q_G = K``.
    P
        P-matrix choice; defaults to :func:`choose_p_siso` for SISO data and
        :func:`choose_p_mimo` otherwise.
    fast
        Use the entrywise ``K x K`` systems when the P matrices are diagonal.
    """
    _check_groups(groups, structure)
    if P is None:
        P = choose_p_siso(groups) if groups.m == groups.p == 1 else choose_p_mimo(groups)
    eqs = additional_point_equations(groups, structure, P)
    R = _realization_from_equations(eqs, structure, P, groups.n, fast)
    if check:
        _post_check(R, groups)
    return R


def solve_hermite(
    data,
    structure: AffineStructure,
    P: Optional[PMatrixSet] = None,
    side: Optional[str] = None,
    fast: bool = True,
    check: bool = True,
) -> StructuredRealization:
    """Interpolate values and first derivatives.

    ``side`` is ``"both"`` for ``K = 4`` and ``"left"`` (default) or
    ``"right"`` for ``K = 3``.
    """
    K = structure.K
    if side is None:
        side = "both" if K == 4 else "left"
    need = {"both": 4, "left": 3, "right": 3}
    if side not in need:
        raise DataError(f"unknown Hermite side {side!r}")
    if need[side] != K:
        raise StructureError(f"Hermite side {side!r} needs K = {need[side]}, got K = {K}")
    if isinstance(data, GroupedData):
        groups = data
    else:
        groups = _hermite_groups(data, side)
    L, Rg = groups.left_groups[0], groups.right_groups[0]
    if side in ("left", "both") and L.dvals is None:
        raise MissingHermiteDataError("left derivative data (fprime) missing")
    if side in ("right", "both") and Rg.dvals is None:
        raise MissingHermiteDataError("right derivative data (gprime) missing")
    if groups.QF != 1 or groups.QG != 1:
        raise StructureError("Hermite realizations use one group per side")
    lp, rp = L.points, Rg.points
    if np.any(lp[:, None] == rp[None, :]):
        raise OverlapError("left and right point sets must be disjoint")
    if P is None:
        P = choose_p_siso(groups) if groups.m == groups.p == 1 else choose_p_mimo(groups)
    if side in ("left", "both") and P.PFd is None or side in ("right", "both") and P.PGd is None:
        raise MissingHermiteDataError("P set lacks the derivative companions")
    eqs = hermite_equations(groups, structure, P, side)
    R = _realization_from_equations(eqs, structure, P, groups.n, fast)
    if check:
        _post_check(R, _drop_unused(groups, side), hermite=True)
    return R


def _drop_unused(groups, side):
    L, R = groups.left_groups[0], groups.right_groups[0]
    if side == "left":
        R = SampleGroup(R.points, R.dirs, R.vals, None)
    elif side == "right":
        L = SampleGroup(L.points, L.dirs, L.vals, None)
    return GroupedData((L,), (R,), groups.closed)


def _hermite_groups(data: InterpolationData, side):
    data.n
    fp = data.fprime if side in ("left", "both") else None
    gp = data.gprime if side in ("right", "both") else None
    L = SampleGroup(data.mu, data.ell, data.f, fp)
    R = SampleGroup(data.sigma, data.r, data.g, gp)
    return GroupedData((L,), (R,))


# --- truncation ---------------------------------------------------------------------


def _probe_points(points, n_random, seed):
    pts = [] if points is None else [complex(z) for z in np.ravel(points)]
    scale = max([1.0] + [abs(z) for z in pts])
    rng = np.random.default_rng(seed)
    z = scale * (rng.uniform(0.2, 1.2, n_random) + 1j * rng.uniform(-1.0, 1.0, n_random))
    return pts, list(z)


def rank_truncate(
    R: StructuredRealization,
    tol: float = TRUNC_TOL,
    points=None,
    n_random: int = 5,
    seed: int = 0,
) -> StructuredRealization:
    """Remove the common null spaces of all ``A_k``.

    The row rank of ``[A_1 ... A_K]``, the column rank of the stacked
    matrices and the rank of ``K(s)`` at ``points`` plus ``n_random`` random
    probes must agree; then ``W_1^* A_k V_1``, ``W_1^* B``, ``C V_1`` is
    returned.  A full-rank set is returned unchanged.

    Raises
    ------
    RankMismatchError
        If the ranks disagree.
    """
    n = R.n
    U, rh, V, rv = _linalg.pencil_bases(R.A, tol)
    drive, rand = _probe_points(points, n_random, seed)
    ranks = []
    for s in drive + rand:
        sv = np.linalg.svd(R.kernel(s), compute_uv=False)
        ranks.append(_linalg.numerical_rank(sv, tol))
    if rh != rv or any(k != rh for k in ranks):
        raise RankMismatchError(
            f"rank condition fails: row rank {rh}, column rank {rv}, K(s) probe ranks {sorted(set(ranks))}"
        )
    if rh == n:
        return R
    return R.compress(U[:, :rh], V[:, :rv])


# --- orchestration ---------------------------------------------------------------------


@contextlib.contextmanager
def _stage(name):
    try:
        yield
    except StructLoewnerError as exc:
        if exc.stage is None:
            exc.stage = name
        raise


def _default_q(data, K):
    qf = int(round(K * data.nl / (data.nl + data.nr)))
    return min(max(qf, 1), K - 1)


def realize(
    data: InterpolationData,
    structure: AffineStructure,
    method: str = "auto",
    make_real: Optional[bool] = None,
    qf: Optional[int] = None,
    qg: Optional[int] = None,
    tol: float = TRUNC_TOL,
    hermite_side: Optional[str] = None,
    group_order: str = "given",
    truncate: bool = True,
) -> StructuredRealization:
    """Structured realization from a pool of samples.

    Parameters
    ----------
    method
        ``"auto"``, ``"k2"``, ``"additional"`` or ``"hermite"``.  ``auto``
        takes the two-term path for ``K = 2``, the Hermite path when
        derivative data is present and additional points otherwise.
    make_real
        ``None`` makes a real realization whenever the data is closed under
        conjugation.
    qf, qg
        Number of left/right groups for additional points.
    tol
        Relative rank threshold of the final truncation step.
    """
    K = structure.K
    if method not in ("auto", "k2", "additional", "hermite"):
        raise DataError(f"unknown method {method!r}")
    with _stage("preprocess"):
        if make_real is not False:
            sd, closed, _ = conjugate_closure_sort(data)
            if make_real and not closed:
                raise NotClosedError("a real realization needs data closed under conjugation")
            real = closed
        else:
            real = False
        if method == "auto":
            if K == 2:
                method = "k2"
            elif data.fprime is not None or data.gprime is not None:
                method = "hermite"
            else:
                method = "additional"
        if method == "k2" and K != 2:
            raise StructureError(f"the two-term path needs K = 2, got K = {K}")

    if method == "k2":
        with _stage("k2"):
            return k2_realization(data, structure, make_real=real)

    if method == "hermite":
        with _stage("hermite"):
            side = hermite_side or ("both" if K == 4 else "left")
            d = sd if real else data
            groups = _hermite_groups(d, side)
            if real:
                groups = _sort_groups(groups)
            P = _choose_p(groups, real)
            R = solve_hermite(groups, structure, P, side=side, check=False)
            checked = _drop_unused(groups, side)
            herm = True
            pts = np.concatenate([d.mu, d.sigma])
    else:
        with _stage("partition"):
            if qf is None and qg is None:
                qf = _default_q(data, K)
            if qf is None:
                qf = K - qg
            if qg is None:
                qg = K - qf
            groups = partition_groups(data, qf, qg, order=group_order, closed=real)
        with _stage("additional"):
            P = _choose_p(groups, real)
            R = solve_additional_points(groups, structure, P, check=False)
            checked, herm = groups, False
            pts = np.concatenate([data.mu, data.sigma])
    if truncate:
        with _stage("truncate"):
            try:
                R = rank_truncate(R, tol, points=pts)
            except RankMismatchError as exc:
                R = _fallback_truncate(R, tol, checked, herm, exc)
    # checked after truncation: redundant states can make K(s) singular everywhere
    _post_check(R, checked, hermite=herm)
    return R


def _fallback_truncate(R, tol, groups, hermite, exc):
    """Compress to the smaller of the row and column ranks if the data still fit."""
    U, rh, V, rv = _linalg.pencil_bases(R.A, tol)
    r = min(rh, rv)
    if 0 < r < R.n:
        Rt = R.compress(U[:, :r], V[:, :r])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConditioningWarning)
            res = _post_check(Rt, groups, hermite)
        if res is not None:
            worst = max(v for k, v in res.items() if "hermite" not in k)
            dworst = max([v for k, v in res.items() if "hermite" in k], default=0.0)
            if worst <= RESIDUAL_TOL and dworst <= 10 * RESIDUAL_TOL:
                warnings.warn(f"{exc}; compressed to order {r}, data still matched", ConditioningWarning, stacklevel=3)
                return Rt
    warnings.warn(f"truncation skipped: {exc}", ConditioningWarning, stacklevel=3)
    return R


def _sort_groups(groups):
    out = []
    for gs, side in ((groups.left_groups, "left"), (groups.right_groups, "right")):
        sg = []
        for g in gs:
            perm = _pair_perm(g.points)
            if perm is None:
                raise NotClosedError(f"{side} samples are not closed under conjugation")
            sg.append(SampleGroup(g.points[perm], g.dirs[perm], g.vals[perm], None if g.dvals is None else g.dvals[perm]))
        out.append(tuple(sg))
    return GroupedData(out[0], out[1], True)


def _pair_perm(pts):
    from .data import _pair_order_points

    units = _pair_order_points(pts, CONJ_TOL)
    if units is None:
        return None
    return [k for u in units if len(u) == 2 for k in u] + [u[0] for u in units if len(u) == 1]


def _choose_p(groups, real):
    if groups.m == groups.p == 1:
        if not real:
            return choose_p_siso(groups)
        try:
            return choose_p_siso(groups, make_real=True)
        except NotClosedError:
            # layouts differ between groups: per-group transforms need the orthogonal completion
            return choose_p_mimo(groups, make_real=True)
    return choose_p_mimo(groups, make_real=real)
