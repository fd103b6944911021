"""Structure-preserving interpolatory projection of explicit models."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import _linalg
from .errors import SingularKernel, StructureError
from .structure import StructuredRealization

__all__ = ["FullModel", "ProjectionBases", "projection_bases", "project"]


class FullModel(StructuredRealization):
    """Explicit ``(A_1, ..., A_K, B, C)``; a realization with a JSON ``"N"`` field."""

    @property
    def N(self):
        return self.n

    def to_dict(self):
        d = super().to_dict()
        d["N"] = self.n
        return d

    @classmethod
    def from_dict(cls, d):
        R = StructuredRealization.from_dict(d)
        if "N" in d and int(d["N"]) != R.n:
            raise StructureError(f"N = {d['N']} disagrees with matrix size {R.n}")
        return cls(R.structure, R.A, R.B, R.C, R.is_real)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class ProjectionBases:
    """``W`` columns solve ``K(mu_i)^T w = C^T ell_i``; ``V`` columns solve ``K(sigma_j) v = B r_j``."""

    W: np.ndarray
    V: np.ndarray


def _lu(model, s):
    fac, rc = _linalg.lu_rcond(model.kernel(s))
    if not rc >= _linalg.RCOND_MIN:
        raise SingularKernel(complex(s), rc)
    return fac


def projection_bases(model: StructuredRealization, mu, sigma, ell=None, r=None) -> ProjectionBases:
    """Bases that make the projected model interpolate at ``mu`` and ``sigma``.

    Directions default to all ones.  Plain transposes are used throughout
    (no conjugation), matching ``A_k -> W^T A_k V``.
    """
    mu = np.atleast_1d(np.asarray(mu, complex))
    sigma = np.atleast_1d(np.asarray(sigma, complex))
    p, m = model.p, model.m
    ell = np.ones((len(mu), p)) if ell is None else np.asarray(ell, complex).reshape(len(mu), p)
    r = np.ones((len(sigma), m)) if r is None else np.asarray(r, complex).reshape(len(sigma), m)
    N = model.n
    W = np.empty((N, len(mu)), complex)
    V = np.empty((N, len(sigma)), complex)
    Ct, B = model.C.T.astype(complex), model.B.astype(complex)
    for i, s in enumerate(mu):
        # trans=1 solves with K^T
        W[:, i] = _linalg.lu_solve(_lu(model, s), Ct @ ell[i], trans=1)
    for j, s in enumerate(sigma):
        V[:, j] = _linalg.lu_solve(_lu(model, s), B @ r[j])
    return ProjectionBases(W, V)


def project(model: StructuredRealization, bases: ProjectionBases) -> StructuredRealization:
    """``(W^T A_k V, W^T B, C V)`` with the model's structure."""
    W, V = bases.W, bases.V
    if W.shape[0] != model.n or V.shape[0] != model.n:
        raise StructureError("bases do not match the model dimension")
    Wt = W.T
    A = np.einsum("ij,kjl,lm->kim", Wt, model.A, V)
    return StructuredRealization(model.structure, A, Wt @ model.B, model.C @ V)
