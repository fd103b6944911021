import warnings
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

RCOND_MIN = 1e-14
# below this equilibrated rcond, solves get extended-precision refinement
REFINE_RCOND = 1e-6
REFINE_STEPS = 3
EXTENDED = np.finfo(np.longdouble).eps < np.finfo(np.float64).eps


class Factor(NamedTuple):
    """LU of ``diag(r) M diag(c)`` with power-of-two scalings ``r``, ``c``."""

    lu: np.ndarray
    piv: np.ndarray
    r: np.ndarray
    c: np.ndarray


def _pow2(x):
    # nearest power of two, so scaling is exact
    return np.exp2(np.round(np.log2(x)))


def equilibrate(M):
    """Row then column scalings making every row and column max-abs close to one."""
    a = np.abs(M)
    rmax = a.max(axis=1)
    rmax[rmax == 0] = 1.0
    r = _pow2(1.0 / rmax)
    cmax = (a * r[:, None]).max(axis=0)
    cmax[cmax == 0] = 1.0
    c = _pow2(1.0 / cmax)
    return r, c


def lu_rcond(M):
    """Equilibrated LU factorization of ``M`` and a LAPACK estimate of its reciprocal condition.

    The estimate refers to the equilibrated matrix, which is what governs
    the accuracy of solves through :func:`lu_solve`.
    """
    M = np.asarray(M)
    if not np.all(np.isfinite(M)):
        return None, 0.0
    r, c = equilibrate(M)
    Ms = M * r[:, None] * c[None, :]
    with np.errstate(all="ignore"):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            lu, piv = sla.lu_factor(Ms, check_finite=False)
    fac = Factor(lu, piv, r, c)
    if not np.all(np.isfinite(lu)) or np.any(np.diag(lu) == 0):
        return fac, 0.0
    gecon, = lapack.get_lapack_funcs(("gecon",), (lu,))
    rcond, info = gecon(lu, np.linalg.norm(Ms, 1), norm="1")
    return fac, float(rcond)


def lu_solve(fac: Factor, b, trans: int = 0):
    """Solve ``M x = b`` (``trans=0``) or ``M^T x = b`` (``trans=1``) from :func:`lu_rcond`."""
    b = np.asarray(b)
    sh = (slice(None),) + (None,) * (b.ndim - 1)
    if trans:
        y = sla.lu_solve((fac.lu, fac.piv), b * fac.c[sh], trans=1, check_finite=False)
        return y * fac.r[sh]
    y = sla.lu_solve((fac.lu, fac.piv), b * fac.r[sh], check_finite=False)
    return y * fac.c[sh]


def refine(M_ext, fac: Factor, b, x, steps: int = REFINE_STEPS):
    """Iterative refinement of ``M x = b`` with residuals in extended precision.

    ``M_ext`` is the matrix in ``clongdouble``; corrections reuse ``fac``.
    Returns the refined solution in ``clongdouble``.
    """
    b_ext = np.asarray(b).astype(np.clongdouble)
    x_ext = np.asarray(x).astype(np.clongdouble)
    for _ in range(steps):
        r = b_ext - M_ext @ x_ext
        x_ext = x_ext + lu_solve(fac, r.astype(complex)).astype(np.clongdouble)
    return x_ext


def numerical_rank(s, tol):
    """Number of singular values above ``tol * s[0]``."""
    s = np.asarray(s)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.count_nonzero(s > tol * s[0]))


def orth_complement(X):
    """Orthonormal basis (columns) of the orthogonal complement of range(X)."""
    X = np.atleast_2d(X)
    n = X.shape[0]
    if X.shape[1] == 0:
        return np.eye(n, dtype=X.dtype)
    U, s, _ = np.linalg.svd(X, full_matrices=True)
    r = numerical_rank(s, 1e-12)
    return U[:, r:]


def pencil_bases(A, tol):
    """Left/right singular bases of ``[A_1 ... A_K]`` and ``[A_1; ...; A_K]``.

    Returns ``(U, r_h, V, r_v)`` with the columns of ``U`` (resp. ``V``)
    ordered by decreasing singular value and ``r_h``/``r_v`` the numerical
    ranks at relative threshold ``tol``.
    """
    A = np.asarray(A)
    K, n, _ = A.shape
    Hz = np.concatenate(list(A), axis=1)
    Vt = np.concatenate(list(A), axis=0)
    U, sh, _ = np.linalg.svd(Hz, full_matrices=False)
    _, sv, Vh = np.linalg.svd(Vt, full_matrices=False)
    return U, numerical_rank(sh, tol), Vh.conj().T, numerical_rank(sv, tol)


def relative_imag(*mats):
    scale = 1.0 + max(float(np.max(np.abs(x), initial=0)) for x in mats)
    return max(float(np.max(np.abs(np.imag(x)), initial=0)) for x in mats) / scale
