"""Tangential interpolation data: sampling, validation, conjugate closure and grouping."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg as sla

from .errors import (
    ClosureError,
    DataError,
    DuplicatePointError,
    NotClosedError,
    OracleError,
    OverlapError,
    SizeMismatchError,
)

__all__ = [
    "InterpolationData",
    "Finding",
    "RealTransform",
    "SampleGroup",
    "GroupedData",
    "tangential_sample",
    "check_compatibility",
    "conjugate_closure_sort",
    "real_transform",
    "pair_block_transform",
    "partition_groups",
    "CONJ_TOL",
]

CONJ_TOL = 1e-12
COMPAT_TOL = 1e-10
FD_STEP = 1e-6


def _as_vectors(x, n, d, name):
    a = np.asarray(x, dtype=complex)
    if a.ndim == 1 and d == 1 and a.shape[0] == n:
        a = a[:, None]
    if a.shape != (n, d):
        raise DataError(f"{name} must have shape ({n}, {d}), got {a.shape}")
    return a


@dataclass(frozen=True, eq=False)
class InterpolationData:
    """Left and right tangential samples.

    Parameters
    ----------
    mu : (nl,) complex
        Left points.
    ell : (nl, p)
        Left directions, ``f_i^T = ell_i^T H(mu_i)``.
    f : (nl, m)
        Left values.
    sigma : (nr,) complex
        Right points.
    r : (nr, m)
        Right directions, ``g_i = H(sigma_i) r_i``.
    g : (nr, p)
        Right values.
    theta : dict
        ``{i: ell_i^T H'(mu_i) r_i}`` for indices with ``mu_i == sigma_i``.
    fprime, gprime : optional
        Left derivative values ``ell_i^T H'(mu_i)`` (nl, m) and right
        derivative values ``H'(sigma_i) r_i`` (nr, p).
    """

    mu: np.ndarray
    ell: np.ndarray
    f: np.ndarray
    sigma: np.ndarray
    r: np.ndarray
    g: np.ndarray
    theta: dict = field(default_factory=dict)
    fprime: Optional[np.ndarray] = None
    gprime: Optional[np.ndarray] = None

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=complex))
        sigma = np.atleast_1d(np.asarray(self.sigma, dtype=complex))
        nl, nr = mu.shape[0], sigma.shape[0]
        f = np.asarray(self.f, dtype=complex)
        g = np.asarray(self.g, dtype=complex)
        m = 1 if f.ndim < 2 else f.shape[1]
        p = 1 if g.ndim < 2 else g.shape[1]
        vals = {
            "mu": mu,
            "sigma": sigma,
            "ell": _as_vectors(self.ell, nl, p, "ell"),
            "f": _as_vectors(f, nl, m, "f"),
            "r": _as_vectors(self.r, nr, m, "r"),
            "g": _as_vectors(g, nr, p, "g"),
            "theta": {int(k): complex(v) for k, v in dict(self.theta).items()},
        }
        if self.fprime is not None:
            vals["fprime"] = _as_vectors(self.fprime, nl, m, "fprime")
        if self.gprime is not None:
            vals["gprime"] = _as_vectors(self.gprime, nr, p, "gprime")
        for k, v in vals.items():
            if isinstance(v, np.ndarray):
                v.setflags(write=False)
            object.__setattr__(self, k, v)

    @property
    def m(self):
        return self.f.shape[1]

    @property
    def p(self):
        return self.g.shape[1]

    @property
    def nl(self):
        return self.mu.shape[0]

    @property
    def nr(self):
        return self.sigma.shape[0]

    @property
    def n(self):
        if self.nl != self.nr:
            raise SizeMismatchError(f"left ({self.nl}) and right ({self.nr}) sides differ in size")
        return self.nl

    @property
    def is_siso(self):
        return self.m == 1 and self.p == 1

    def coinciding(self):
        """Indices ``i`` with ``mu_i == sigma_i`` (exact equality)."""
        k = min(self.nl, self.nr)
        return [i for i in range(k) if self.mu[i] == self.sigma[i]]

    # matrix views in the usual notation
    @property
    def Ft(self):
        """Rows ``f_i^T``, shape (nl, m)."""
        return self.f

    @property
    def Lt(self):
        return self.ell

    @property
    def R(self):
        """Columns ``r_j``, shape (m, nr)."""
        return self.r.T

    @property
    def G(self):
        """Columns ``g_j``, shape (p, nr)."""
        return self.g.T

    def scaled(self, c):
        """All sample values multiplied by ``c``."""
        return replace(
            self,
            f=c * self.f,
            g=c * self.g,
            theta={k: c * v for k, v in self.theta.items()},
            fprime=None if self.fprime is None else c * self.fprime,
            gprime=None if self.gprime is None else c * self.gprime,
        )

    def subset(self, left=None, right=None):
        """Data restricted to the given left/right index lists."""
        left = list(range(self.nl)) if left is None else list(left)
        right = list(range(self.nr)) if right is None else list(right)
        theta = {}
        for a, i in enumerate(left):
            if i in self.theta and a < len(right) and right[a] == i:
                theta[a] = self.theta[i]
        return InterpolationData(
            self.mu[left], self.ell[left], self.f[left],
            self.sigma[right], self.r[right], self.g[right],
            theta,
            None if self.fprime is None else self.fprime[left],
            None if self.gprime is None else self.gprime[right],
        )

    # serialization
    def to_dict(self):
        def pair(z):
            return [float(np.real(z)), float(np.imag(z))]

        def vec(v):
            return [pair(z) for z in v]

        d = {
            "m": self.m,
            "p": self.p,
            "left": [{"mu": pair(self.mu[i]), "ell": vec(self.ell[i]), "f": vec(self.f[i])} for i in range(self.nl)],
            "right": [{"sigma": pair(self.sigma[i]), "r": vec(self.r[i]), "g": vec(self.g[i])} for i in range(self.nr)],
            "theta": [{"i": int(i), "val": pair(v)} for i, v in sorted(self.theta.items())],
        }
        if self.fprime is not None:
            d["fprime"] = [vec(v) for v in self.fprime]
        if self.gprime is not None:
            d["gprime"] = [vec(v) for v in self.gprime]
        return d

    @classmethod
    def from_dict(cls, d):
        def c(z):
            return complex(z[0], z[1])

        def vec(v):
            return [c(z) for z in v]

        try:
            m, p = int(d["m"]), int(d["p"])
            left, right = d["left"], d["right"]
            mu = [c(e["mu"]) for e in left]
            sigma = [c(e["sigma"]) for e in right]
            ell = np.array([vec(e["ell"]) for e in left], dtype=complex).reshape(len(left), p)
            f = np.array([vec(e["f"]) for e in left], dtype=complex).reshape(len(left), m)
            r = np.array([vec(e["r"]) for e in right], dtype=complex).reshape(len(right), m)
            g = np.array([vec(e["g"]) for e in right], dtype=complex).reshape(len(right), p)
            theta = {int(e["i"]): c(e["val"]) for e in d.get("theta", [])}
            fp = d.get("fprime")
            gp = d.get("gprime")
            fp = None if fp is None else np.array([vec(v) for v in fp], dtype=complex).reshape(len(left), m)
            gp = None if gp is None else np.array([vec(v) for v in gp], dtype=complex).reshape(len(right), p)
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise DataError(f"malformed data JSON: {exc}") from exc
        return cls(mu, ell, f, sigma, r, g, theta, fp, gp)

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def to_csv(self):
        """Rows ``side, re(s), im(s), (re, im) of each vector entry``."""
        buf = io.StringIO()
        w = csv.writer(buf)
        m, p = self.m, self.p
        head = ["side", "re_s", "im_s"]
        head += [f"{part}_dir{k}" for k in range(max(m, p)) for part in ("re", "im")]
        head += [f"{part}_val{k}" for k in range(max(m, p)) for part in ("re", "im")]
        w.writerow(head)

        def flat(v, width):
            out = []
            for k in range(width):
                z = v[k] if k < len(v) else 0j
                out += [repr(float(z.real)), repr(float(z.imag))]
            return out

        width = max(m, p)
        for i in range(self.nl):
            z = self.mu[i]
            w.writerow(["left", repr(z.real), repr(z.imag)] + flat(self.ell[i], width) + flat(self.f[i], width))
        for i in range(self.nr):
            z = self.sigma[i]
            w.writerow(["right", repr(z.real), repr(z.imag)] + flat(self.r[i], width) + flat(self.g[i], width))
        return buf.getvalue()


# --- sampling --------------------------------------------------------------


def _call(oracle, s):
    try:
        H = np.asarray(oracle(s), dtype=complex)
    except DataError:
        raise
    except Exception as exc:
        raise OracleError(s, exc) from exc
    if H.ndim == 0:
        H = H.reshape(1, 1)
    if not np.all(np.isfinite(H)):
        raise OracleError(s, ValueError("non-finite value"))
    return H


def _call_deriv(oracle, s, fd_step=FD_STEP):
    d = getattr(oracle, "deriv", None)
    if d is not None:
        try:
            D = np.asarray(d(s), dtype=complex)
        except Exception as exc:
            raise OracleError(s, exc) from exc
        return D.reshape(1, 1) if D.ndim == 0 else D
    h = fd_step * max(1.0, abs(s))
    return (_call(oracle, s + h) - _call(oracle, s - h)) / (2 * h)


def _check_distinct(pts, side):
    pts = np.asarray(pts)
    for i in range(len(pts)):
        for j in range(i):
            if pts[i] == pts[j]:
                raise DuplicatePointError(f"{side} points {j} and {i} coincide at {pts[i]}")


def tangential_sample(
    oracle: Callable,
    mu: Sequence[complex],
    sigma: Sequence[complex],
    ell=None,
    r=None,
    hermite=False,
    bitangential=True,
    fd_step: float = FD_STEP,
) -> InterpolationData:
    """Sample ``oracle`` tangentially at left points ``mu`` and right points ``sigma``.

    Parameters
    ----------
    oracle
        Callable ``s -> H(s)``; a ``deriv`` attribute, when present, is used
        for derivative data, otherwise a central difference is taken.
    ell, r
        Directions, shape ``(nl, p)`` and ``(nr, m)``; default all ones.
    hermite
        ``False``, ``True``/``"both"``, ``"left"`` or ``"right"``.
    bitangential
        Record ``theta_i = ell_i^T H'(mu_i) r_i`` where ``mu_i == sigma_i``.
    """
    mu = np.atleast_1d(np.asarray(mu, dtype=complex))
    sigma = np.atleast_1d(np.asarray(sigma, dtype=complex))
    _check_distinct(mu, "left")
    _check_distinct(sigma, "right")
    Hmu = [_call(oracle, s) for s in mu]
    Hsig = [_call(oracle, s) for s in sigma]
    shapes = {H.shape for H in Hmu + Hsig}
    if len(shapes) != 1:
        raise OracleError(None, ValueError(f"inconsistent output shapes {shapes}"))
    p, m = shapes.pop()
    ell = np.ones((len(mu), p), complex) if ell is None else _as_vectors(ell, len(mu), p, "ell")
    r = np.ones((len(sigma), m), complex) if r is None else _as_vectors(r, len(sigma), m, "r")
    f = np.array([ell[i] @ Hmu[i] for i in range(len(mu))]).reshape(len(mu), m)
    g = np.array([Hsig[i] @ r[i] for i in range(len(sigma))]).reshape(len(sigma), p)

    side = {False: "", None: "", True: "both"}.get(hermite, hermite)
    if side not in ("", "left", "right", "both"):
        raise DataError(f"unknown hermite option {hermite!r}")
    dcache = {}

    def D(s):
        if s not in dcache:
            dcache[s] = _call_deriv(oracle, s, fd_step)
        return dcache[s]

    fprime = gprime = None
    if side in ("left", "both"):
        fprime = np.array([ell[i] @ D(s) for i, s in enumerate(mu)]).reshape(len(mu), m)
    if side in ("right", "both"):
        gprime = np.array([D(s) @ r[i] for i, s in enumerate(sigma)]).reshape(len(sigma), p)
    theta = {}
    if bitangential:
        for i in range(min(len(mu), len(sigma))):
            if mu[i] == sigma[i]:
                theta[i] = complex(ell[i] @ D(mu[i]) @ r[i])
    return InterpolationData(mu, ell, f, sigma, r, g, theta, fprime, gprime)


# --- validation -------------------------------------------------------------


@dataclass(frozen=True)
class Finding:
    kind: str
    index: tuple
    message: str


def check_compatibility(data: InterpolationData, tol: float = COMPAT_TOL) -> list:
    """List of problems in ``data``; empty means valid."""
    out = []
    for side, pts in (("left", data.mu), ("right", data.sigma)):
        for i in range(len(pts)):
            for j in range(i):
                if pts[i] == pts[j]:
                    out.append(Finding("duplicate", (side, j, i), f"{side} points {j} and {i} coincide"))
    for i in data.coinciding():
        a = complex(data.f[i] @ data.r[i])
        b = complex(data.ell[i] @ data.g[i])
        if abs(a - b) > tol * max(1.0, abs(a), abs(b)):
            out.append(Finding("compatibility", (i,), f"f^T r = {a} but ell^T g = {b} at index {i}"))
        if i not in data.theta:
            out.append(Finding("missing_theta", (i,), f"no derivative datum at coinciding index {i}"))
    for i in data.theta:
        if i >= min(data.nl, data.nr) or data.mu[i] != data.sigma[i]:
            out.append(Finding("stray_theta", (i,), f"theta given at index {i} where points differ"))
    return out


# --- conjugate closure ------------------------------------------------------


def _close(a, b, tol=CONJ_TOL):
    a, b = np.asarray(a), np.asarray(b)
    scale = max(1.0, float(np.max(np.abs(a), initial=0)), float(np.max(np.abs(b), initial=0)))
    return bool(np.all(np.abs(a - b) <= tol * scale))


def _pair_order(pts, dirs, vals, tol=CONJ_TOL):
    """Permutation putting conjugate pairs first; the earlier point of each pair leads."""
    n = len(pts)
    used = [False] * n
    pairs, reals = [], []
    for i in range(n):
        if used[i]:
            continue
        z = pts[i]
        if abs(z.imag) <= tol * max(1.0, abs(z)):
            if not (_close(dirs[i], np.conj(dirs[i]), tol) and _close(vals[i], np.conj(vals[i]), tol)):
                return None
            used[i] = True
            reals.append(i)
            continue
        match = None
        for j in range(i + 1, n):
            if not used[j] and _close(pts[j], np.conj(z), tol):
                if _close(dirs[j], np.conj(dirs[i]), tol) and _close(vals[j], np.conj(vals[i]), tol):
                    match = j
                    break
        if match is None:
            return None
        used[i] = used[match] = True
        pairs.append((i, match))
    order = [k for pr in pairs for k in pr] + reals
    return order, len(pairs)


def conjugate_closure_sort(data: InterpolationData):
    """Reorder both sides into conjugate pairs followed by real points.

    Returns
    -------
    (sorted_data, closed, (left_pairs, right_pairs))
        When the data is not closed, ``data`` is returned unchanged.
    """
    lo = _pair_order(data.mu, data.ell, data.f)
    ro = _pair_order(data.sigma, data.r, data.g)
    if lo is None or ro is None:
        return data, False, (0, 0)
    lperm, lp = lo
    rperm, rp = ro
    for perm, pts, dv, side in ((lperm, data.mu, data.fprime, "f"), (rperm, data.sigma, data.gprime, "g")):
        if dv is not None:
            # derivative data must be closed too
            for k in range(0, 2 * (lp if side == "f" else rp), 2):
                if not _close(dv[perm[k + 1]], np.conj(dv[perm[k]])):
                    return data, False, (0, 0)
    # theta follows the coinciding pair, remapped by point value
    new_mu = data.mu[lperm]
    new_sigma = data.sigma[rperm]
    theta = {}
    for i, v in data.theta.items():
        a = lperm.index(i)
        if a < len(rperm) and new_sigma[a] == new_mu[a]:
            theta[a] = v
        else:
            raise ClosureError(
                "conjugate sorting separates a coinciding left/right pair; order both sides identically"
            )
    sorted_data = InterpolationData(
        new_mu, data.ell[lperm], data.f[lperm],
        new_sigma, data.r[rperm], data.g[rperm],
        theta,
        None if data.fprime is None else data.fprime[lperm],
        None if data.gprime is None else data.gprime[rperm],
    )
    return sorted_data, True, (lp, rp)


_PAIR = np.array([[1.0, -1.0j], [1.0, 1.0j]]) / np.sqrt(2.0)


def pair_block_transform(npairs: int, nreal: int) -> np.ndarray:
    """``blkdiag((1/sqrt2)[[1,-i],[1,i]], ..., 1, ...)``."""
    return sla.block_diag(*([_PAIR] * npairs + [np.ones((1, 1))] * nreal)).astype(complex) if npairs + nreal else np.zeros((0, 0), complex)


def _count_pairs(pts, tol=CONJ_TOL):
    """Number of leading conjugate pairs if ``pts`` is already sorted, else None."""
    n = len(pts)
    k = 0
    while k + 1 < n and abs(pts[k].imag) > tol * max(1.0, abs(pts[k])):
        if not _close(pts[k + 1], np.conj(pts[k]), tol):
            return None
        k += 2
    for z in pts[k:]:
        if abs(z.imag) > tol * max(1.0, abs(z)):
            return None
    return k // 2


@dataclass(frozen=True, eq=False)
class RealTransform:
    T_F: np.ndarray
    T_G: np.ndarray


def real_transform(data: InterpolationData) -> RealTransform:
    """Block transforms making the sorted data real.

    Raises
    ------
    NotClosedError
        If either side is not laid out as conjugate pairs followed by reals.
    """
    lp = _count_pairs(data.mu)
    rp = _count_pairs(data.sigma)
    if lp is None or rp is None:
        raise NotClosedError("data is not sorted into closed conjugate pairs; call conjugate_closure_sort first")
    for k in range(lp):
        i = 2 * k
        if not (_close(data.ell[i + 1], np.conj(data.ell[i])) and _close(data.f[i + 1], np.conj(data.f[i]))):
            raise NotClosedError(f"left pair {k} directions/values are not conjugate")
    for k in range(rp):
        i = 2 * k
        if not (_close(data.r[i + 1], np.conj(data.r[i])) and _close(data.g[i + 1], np.conj(data.g[i]))):
            raise NotClosedError(f"right pair {k} directions/values are not conjugate")
    return RealTransform(
        pair_block_transform(lp, data.nl - 2 * lp),
        pair_block_transform(rp, data.nr - 2 * rp),
    )


# --- grouping ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SampleGroup:
    """One group of ``n`` samples on one side.

    ``dirs`` are the directions (``ell`` or ``r``), ``vals`` the values
    (``f`` or ``g``) and ``dvals`` optional derivative values.
    """

    points: np.ndarray
    dirs: np.ndarray
    vals: np.ndarray
    dvals: Optional[np.ndarray] = None

    @property
    def n(self):
        return self.points.shape[0]


@dataclass(frozen=True, eq=False)
class GroupedData:
    left_groups: tuple
    right_groups: tuple
    closed: bool = False

    @property
    def QF(self):
        return len(self.left_groups)

    @property
    def QG(self):
        return len(self.right_groups)

    @property
    def n(self):
        return self.left_groups[0].n

    @property
    def m(self):
        return self.left_groups[0].vals.shape[1]

    @property
    def p(self):
        return self.right_groups[0].vals.shape[1]

    def base(self) -> InterpolationData:
        L, R = self.left_groups[0], self.right_groups[0]
        return InterpolationData(L.points, L.dirs, L.vals, R.points, R.dirs, R.vals, {}, L.dvals, R.dvals)


def _units(pts, tol=CONJ_TOL):
    """Split indices into conjugate-pair units and single units."""
    order = _pair_order_points(pts, tol)
    if order is None:
        return None
    return order


def _pair_order_points(pts, tol):
    n = len(pts)
    used = [False] * n
    units = []
    for i in range(n):
        if used[i]:
            continue
        z = pts[i]
        used[i] = True
        if abs(z.imag) <= tol * max(1.0, abs(z)):
            units.append((i,))
            continue
        for j in range(n):
            if not used[j] and _close(pts[j], np.conj(z), tol):
                used[j] = True
                units.append((i, j))
                break
        else:
            return None
    return units


def _split(pts, dirs, vals, dvals, Q, n, order, closed, side):
    N = len(pts)
    if N != Q * n:
        raise SizeMismatchError(f"{side} pool holds {N} samples, need Q*n = {Q}*{n} = {Q * n}")
    if order == "given" and not closed:
        idx = [list(range(q * n, (q + 1) * n)) for q in range(Q)]
    else:
        if closed:
            units = _units(pts)
            if units is None:
                raise ClosureError(f"{side} pool is not closed under conjugation")
        else:
            units = [(i,) for i in range(N)]
        if order == "given":
            seq = units
        elif order == "round_robin":
            seq = sorted(units, key=lambda u: (abs(pts[u[0]]), -pts[u[0]].imag))
        else:
            raise DataError(f"unknown grouping order {order!r}")
        idx = [[] for _ in range(Q)]
        if order == "given":
            q = 0
            for u in seq:
                while q < Q and len(idx[q]) + len(u) > n:
                    q += 1
                if q == Q:
                    raise ClosureError(f"{side} pool cannot be split into closed groups of size {n}")
                idx[q].extend(u)
        else:
            q = 0
            pending = list(seq)
            while pending:
                placed = False
                for t in range(Q):
                    qq = (q + t) % Q
                    if len(idx[qq]) + len(pending[0]) <= n:
                        idx[qq].extend(pending.pop(0))
                        q = (qq + 1) % Q
                        placed = True
                        break
                if not placed:
                    raise ClosureError(f"{side} pool cannot be split into closed groups of size {n}")
        if any(len(g) != n for g in idx):
            raise ClosureError(f"{side} pool cannot be split into closed groups of size {n}")
        if closed:
            # pairs first, reals last within each group
            idx = [
                [k for k in g if abs(pts[k].imag) > CONJ_TOL * max(1.0, abs(pts[k]))]
                + [k for k in g if abs(pts[k].imag) <= CONJ_TOL * max(1.0, abs(pts[k]))]
                for g in idx
            ]
    groups = []
    for g in idx:
        groups.append(SampleGroup(pts[g], dirs[g], vals[g], None if dvals is None else dvals[g]))
    return tuple(groups)


def partition_groups(
    data: InterpolationData,
    QF: int,
    QG: int,
    n: Optional[int] = None,
    order: str = "given",
    closed: bool = False,
) -> GroupedData:
    """Split a pool of samples into ``QF`` left and ``QG`` right groups of size ``n``.

    Parameters
    ----------
    data
        Pool; the first ``n`` samples on each side become group 1 in
        ``"given"`` order.
    order
        ``"given"`` keeps pool order, ``"round_robin"`` deals samples sorted
        by ``|s|`` over the groups so each group spans the band.
    closed
        Require each group to be closed under conjugation.
    """
    if QF < 1 or QG < 1:
        raise SizeMismatchError("need at least one group on each side")
    if n is None:
        if data.nl % QF or data.nr % QG or data.nl // QF != data.nr // QG:
            raise SizeMismatchError(
                f"pools of {data.nl} left and {data.nr} right samples do not split into {QF}+{QG} equal groups"
            )
        n = data.nl // QF
    overlap = set(np.round(data.mu, 14).tolist()) & set(np.round(data.sigma, 14).tolist())
    if overlap:
        raise OverlapError(f"left and right point sets intersect at {sorted(overlap, key=abs)}")
    lg = _split(data.mu, data.ell, data.f, data.fprime, QF, n, order, closed, "left")
    rg = _split(data.sigma, data.r, data.g, data.gprime, QG, n, order, closed, "right")
    return GroupedData(lg, rg, closed)
