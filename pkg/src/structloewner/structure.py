"""Affine structures ``K(s) = sum_k h_k(s) A_k`` and structured realizations.

The scalar functions ``h_k`` come from a closed family (monomials, delays,
their products and ``1/s``) so that derivatives are exact and every structure
can be written back to text.
"""

from __future__ import annotations

import enum
import functools
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _linalg
from .errors import (
    DomainError,
    IndependenceError,
    ParseError,
    SingularKernel,
    StructureError,
)

__all__ = [
    "Kind",
    "BasisFunction",
    "AffineStructure",
    "StructuredRealization",
    "eval_basis",
    "deriv_basis",
    "eval_kernel",
    "eval_transfer",
    "eval_transfer_deriv",
    "parse_structure",
    "format_structure",
    "complex_to_json",
    "complex_from_json",
]

REAL_TOL = 1e-10


class Kind(str, enum.Enum):
    MONOMIAL = "monomial"
    EXPONENTIAL = "exponential"
    MONOMIAL_EXPONENTIAL = "monomial_exponential"
    RECIPROCAL = "reciprocal"


@dataclass(frozen=True)
class BasisFunction:
    """One scalar function of the family, including its signed scale.

    ============================  ==========================
    kind                          value
    ============================  ==========================
    ``MONOMIAL(p)``               ``scale * s**p``
    ``EXPONENTIAL(tau)``          ``scale * exp(-tau*s)``
    ``MONOMIAL_EXPONENTIAL``      ``scale * s**p * exp(-tau*s)``
    ``RECIPROCAL``                ``scale / s``
    ============================  ==========================
    """

    kind: Kind
    power: int = 0
    tau: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.scale == 0 or not math.isfinite(self.scale):
            raise StructureError("basis function scale must be finite and nonzero")
        if self.power < 0:
            raise StructureError("use Kind.RECIPROCAL for s^-1; negative powers are not supported")
        if not math.isfinite(self.tau):
            raise StructureError("delay must be finite")

    @classmethod
    def monomial(cls, power, scale=1.0):
        return cls(Kind.MONOMIAL, power=int(power), scale=float(scale))

    @classmethod
    def exponential(cls, tau, scale=1.0):
        return cls(Kind.EXPONENTIAL, tau=float(tau), scale=float(scale))

    @classmethod
    def monomial_exponential(cls, power, tau, scale=1.0):
        return cls(Kind.MONOMIAL_EXPONENTIAL, power=int(power), tau=float(tau), scale=float(scale))

    @classmethod
    def reciprocal(cls, scale=1.0):
        return cls(Kind.RECIPROCAL, scale=float(scale))

    def _check_domain(self, s):
        if self.kind is Kind.RECIPROCAL and np.any(s == 0):
            raise DomainError("1/s is undefined at s = 0")

    def __call__(self, s):
        s = np.asarray(s, dtype=complex)
        self._check_domain(s)
        k = self.kind
        if k is Kind.MONOMIAL:
            v = s**self.power if self.power else np.ones_like(s)
        elif k is Kind.EXPONENTIAL:
            v = np.exp(-self.tau * s)
        elif k is Kind.MONOMIAL_EXPONENTIAL:
            v = s**self.power * np.exp(-self.tau * s)
        else:
            v = 1.0 / s
        v = self.scale * v
        return v[()] if v.ndim == 0 else v

    def deriv(self, s):
        s = np.asarray(s, dtype=complex)
        self._check_domain(s)
        k, p, tau = self.kind, self.power, self.tau
        if k is Kind.MONOMIAL:
            v = p * s ** (p - 1) if p else np.zeros_like(s)
        elif k is Kind.EXPONENTIAL:
            v = -tau * np.exp(-tau * s)
        elif k is Kind.MONOMIAL_EXPONENTIAL:
            dp = p * s ** (p - 1) if p else np.zeros_like(s)
            v = (dp - tau * s**p) * np.exp(-tau * s)
        else:
            v = -1.0 / s**2
        v = self.scale * v
        return v[()] if v.ndim == 0 else v

    def to_text(self):
        k = self.kind
        factors = []
        if k in (Kind.MONOMIAL, Kind.MONOMIAL_EXPONENTIAL) and self.power:
            factors.append("s" if self.power == 1 else f"s^{self.power}")
        if k is Kind.RECIPROCAL:
            factors.append("s^-1")
        if k in (Kind.EXPONENTIAL, Kind.MONOMIAL_EXPONENTIAL):
            factors.append(f"exp({_fmt(-self.tau)}*s)")
        body = "*".join(factors)
        if not body:
            return _fmt(self.scale)
        if self.scale == 1:
            return body
        if self.scale == -1:
            return "-" + body
        return f"{_fmt(self.scale)}*{body}"


def _fmt(x):
    x = float(x)
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def eval_basis(f: BasisFunction, s):
    return f(s)


def deriv_basis(f: BasisFunction, s):
    return f.deriv(s)


_PROBE_RNG_SEED = 20240611


@dataclass(frozen=True)
class AffineStructure:
    """Ordered family ``(h_1, ..., h_K)`` with ``K >= 2``.

    Linear independence is probed numerically on a generalized Vandermonde
    matrix at ``K`` pseudo-random points of the right half plane.
    """

    basis: tuple

    def __post_init__(self):
        basis = tuple(self.basis)
        object.__setattr__(self, "basis", basis)
        if len(basis) < 2:
            raise StructureError("an affine structure needs at least two basis functions")
        rng = np.random.default_rng(_PROBE_RNG_SEED)
        K = len(basis)
        z = rng.uniform(0.2, 1.2, K) + 1j * rng.uniform(-1.0, 1.0, K)
        V = np.column_stack([h(z) for h in basis])
        V = V / np.linalg.norm(V, axis=0)
        sv = np.linalg.svd(V, compute_uv=False)
        if sv[-1] < 1e-10 * sv[0]:
            raise IndependenceError(
                f"basis functions {format_structure(self)!r} are numerically linearly dependent"
            )

    @property
    def K(self):
        return len(self.basis)

    def values(self, s):
        """Array of shape ``(K,) + shape(s)`` with ``h_k(s)``."""
        return np.array([h(s) for h in self.basis])

    def derivs(self, s):
        return np.array([h.deriv(s) for h in self.basis])

    def __str__(self):
        return format_structure(self)


def format_structure(structure: AffineStructure) -> str:
    return ",".join(h.to_text() for h in structure.basis)


# --- parser --------------------------------------------------------------


class _Parser:
    def __init__(self, text):
        self.text = text
        self.i = 0

    def offset(self, i=None):
        i = self.i if i is None else i
        return len(self.text[:i].encode("utf-8"))

    def skip(self):
        while self.i < len(self.text) and self.text[self.i].isspace():
            self.i += 1

    def peek(self):
        self.skip()
        return self.text[self.i] if self.i < len(self.text) else ""

    def expect(self, tok):
        self.skip()
        if not self.text.startswith(tok, self.i):
            raise ParseError(f"unexpected {self._found()}", self.offset(), {repr(tok)})
        self.i += len(tok)

    def _found(self):
        if self.i >= len(self.text):
            return "end of input"
        return repr(self.text[self.i])

    def number(self):
        self.skip()
        j = self.i
        t = self.text
        while j < len(t) and (t[j].isdigit() or t[j] == "."):
            j += 1
        if j < len(t) and t[j] in "eE" and j > self.i:
            k = j + 1
            if k < len(t) and t[k] in "+-":
                k += 1
            if k < len(t) and t[k].isdigit():
                j = k
                while j < len(t) and t[j].isdigit():
                    j += 1
        lit = t[self.i:j]
        try:
            val = float(lit)
        except ValueError:
            raise ParseError(f"unexpected {self._found()}", self.offset(), {"number"}) from None
        self.i = j
        return val

    def sign(self):
        c = self.peek()
        if c in "+-":
            self.i += 1
            return -1.0 if c == "-" else 1.0
        return 1.0

    def factor(self):
        """Returns (power, tau) contribution."""
        c = self.peek()
        if c == "s":
            self.i += 1
            if self.peek() == "^":
                self.i += 1
                neg = self.sign() < 0
                start = self.offset()
                self.skip()
                j = self.i
                while j < len(self.text) and self.text[j].isdigit():
                    j += 1
                if j == self.i:
                    raise ParseError(f"unexpected {self._found()}", start, {"integer"})
                p = int(self.text[self.i:j])
                self.i = j
                return (-p if neg else p), 0.0
            return 1, 0.0
        if self.text.startswith("exp(", self.i):
            self.i += 4
            sg = self.sign()
            coef = 1.0
            if self.peek() != "s":
                coef = self.number()
                self.expect("*")
            self.expect("s")
            self.expect(")")
            return 0, -sg * coef
        raise ParseError(f"unexpected {self._found()}", self.offset(), {"'s'", "'exp('", "number"})

    def term(self):
        start = self.i
        sg = self.sign()
        c = self.peek()
        coef = 1.0
        power, tau = 0, 0.0
        has_factor = False
        if c.isdigit() or c == ".":
            coef = self.number()
            if self.peek() == "*":
                self.i += 1
                p, t = self.factor()
                power, tau, has_factor = power + p, tau + t, True
        else:
            p, t = self.factor()
            power, tau, has_factor = power + p, tau + t, True
        while has_factor and self.peek() == "*":
            self.i += 1
            p, t = self.factor()
            power, tau = power + p, tau + t
        scale = sg * coef
        if scale == 0:
            raise ParseError("zero coefficient", self.offset(start), {"nonzero coefficient"})
        if power == -1 and tau == 0:
            return BasisFunction.reciprocal(scale)
        if power < 0:
            raise ParseError(
                "only s^-1 without a delay factor is supported as a negative power",
                self.offset(start),
                {"'s'", "'s^-1'", "'exp('"},
            )
        if tau == 0:
            return BasisFunction.monomial(power, scale)
        if power == 0:
            return BasisFunction.exponential(tau, scale)
        return BasisFunction.monomial_exponential(power, tau, scale)


def parse_structure(text: str) -> AffineStructure:
    """Parse a comma separated list of terms, e.g. ``"s,-1,-exp(-1*s)"``.

    >>> str(parse_structure("s^2, s, 1"))
    's^2,s,1'
    """
    p = _Parser(text)
    terms = [p.term()]
    while True:
        c = p.peek()
        if c == "":
            break
        if c != ",":
            raise ParseError(f"unexpected {p._found()}", p.offset(), {"','", "'*'", "end of input"})
        p.i += 1
        terms.append(p.term())
    return AffineStructure(tuple(terms))


# --- JSON helpers --------------------------------------------------------


def complex_to_json(a):
    """Nested lists with complex numbers written as ``[re, im]`` pairs."""
    a = np.asarray(a, dtype=complex)
    pairs = np.stack([a.real, a.imag], axis=-1)
    return pairs.tolist()


def complex_from_json(obj):
    arr = np.asarray(obj, dtype=float)
    if arr.shape[-1] != 2:
        raise ValueError("complex JSON values must be [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


# --- realizations ---------------------------------------------------------


def _readonly(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class StructuredRealization:
    """``H(s) = C (sum_k h_k(s) A_k)^{-1} B``.

    Parameters
    ----------
    structure
        The affine structure.
    A
        ``K`` square matrices of size ``n``, as a sequence or an array of
        shape ``(K, n, n)``.
    B, C
        Input ``(n, m)`` and output ``(p, n)`` matrices.  One dimensional
        arrays are read as a column ``B`` and a row ``C``.
    is_real
        Whether all matrices are real.  Checked against the entries.
    """

    structure: AffineStructure
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    is_real: bool = False

    def __post_init__(self):
        A = np.asarray(self.A)
        if A.ndim == 2 and self.structure.K == 1:
            A = A[None]
        B = np.asarray(self.B)
        C = np.asarray(self.C)
        if B.ndim == 1:
            B = B[:, None]
        if C.ndim == 1:
            C = C[None, :]
        if A.ndim != 3 or A.shape[1] != A.shape[2]:
            raise StructureError(f"A must hold square matrices, got shape {A.shape}")
        if A.shape[0] != self.structure.K:
            raise StructureError(f"{A.shape[0]} matrices given for K={self.structure.K}")
        n = A.shape[1]
        if B.shape[0] != n or C.shape[1] != n:
            raise StructureError(f"B {B.shape} / C {C.shape} inconsistent with n={n}")
        if self.is_real:
            scale = 1.0 + max(np.abs(A).max(initial=0), np.abs(B).max(initial=0), np.abs(C).max(initial=0))
            imag = max(np.abs(np.imag(x)).max(initial=0) for x in (A, B, C))
            if imag > REAL_TOL * scale:
                raise StructureError(f"is_real set but imaginary parts reach {imag:.3e}")
            dtype = float
            A, B, C = A.real, B.real, C.real
        else:
            dtype = complex
        object.__setattr__(self, "A", _readonly(A, dtype))
        object.__setattr__(self, "B", _readonly(B, dtype))
        object.__setattr__(self, "C", _readonly(C, dtype))

    @property
    def K(self):
        return self.A.shape[0]

    @property
    def n(self):
        return self.A.shape[1]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def p(self):
        return self.C.shape[0]

    def kernel(self, s):
        h = self.structure.values(complex(s))
        return np.tensordot(h, self.A, axes=1)

    def kernel_deriv(self, s):
        h = self.structure.derivs(complex(s))
        return np.tensordot(h, self.A, axes=1)

    def _factor(self, s):
        Ks = self.kernel(s)
        fac, rcond = _linalg.lu_rcond(Ks)
        if not rcond >= _linalg.RCOND_MIN:
            raise SingularKernel(complex(s), rcond)
        return fac, rcond

    @functools.cached_property
    def _A_ext(self):
        return self.A.astype(np.clongdouble)

    def _kernel_ext(self, h):
        return np.tensordot(np.asarray(h, np.clongdouble), self._A_ext, axes=1)

    def _needs_refinement(self, rcond):
        return rcond < _linalg.REFINE_RCOND and _linalg.EXTENDED

    def transfer(self, s):
        fac, rcond = self._factor(s)
        B = self.B.astype(complex)
        X = _linalg.lu_solve(fac, B)
        if self._needs_refinement(rcond):
            Ke = self._kernel_ext(self.structure.values(complex(s)))
            Xe = _linalg.refine(Ke, fac, B, X)
            return (self.C.astype(np.clongdouble) @ Xe).astype(complex)
        return self.C @ X

    def transfer_deriv(self, s):
        fac, rcond = self._factor(s)
        B = self.B.astype(complex)
        X = _linalg.lu_solve(fac, B)
        if self._needs_refinement(rcond):
            # -C K^{-1} K' K^{-1} B with both solves refined
            s = complex(s)
            Ke = self._kernel_ext(self.structure.values(s))
            dKe = self._kernel_ext(self.structure.derivs(s))
            Xe = _linalg.refine(Ke, fac, B, X)
            rhs = dKe @ Xe
            Y = _linalg.lu_solve(fac, rhs.astype(complex))
            Ye = _linalg.refine(Ke, fac, rhs, Y)
            return (-self.C.astype(np.clongdouble) @ Ye).astype(complex)
        Y = _linalg.lu_solve(fac, self.kernel_deriv(s) @ X)
        return -self.C @ Y

    __call__ = transfer
    deriv = transfer_deriv

    def transformed(self, TL, TR):
        """Change of coordinates ``(TL^* A_k TR, TL^* B, C TR)``."""
        TLh = np.conj(TL).T
        return StructuredRealization(
            self.structure,
            np.einsum("ij,kjl,lm->kim", TLh, self.A, TR),
            TLh @ self.B,
            self.C @ TR,
        )

    def compress(self, W1, V1, is_real=None):
        """Petrov-Galerkin compression ``W1^* A_k V1``."""
        R = self.transformed(W1, V1)
        if is_real is None:
            is_real = self.is_real
        return R.as_real() if is_real else R

    def imag_level(self):
        """Largest imaginary magnitude relative to ``1 + max |entry|``."""
        mats = (self.A, self.B, self.C)
        scale = 1.0 + max(np.abs(x).max(initial=0) for x in mats)
        return max(np.abs(np.imag(x)).max(initial=0) for x in mats) / scale

    def as_real(self):
        """Same realization flagged real; raises if imaginary parts are not negligible."""
        return StructuredRealization(self.structure, self.A, self.B, self.C, is_real=True)

    # serialization
    def to_dict(self):
        return {
            "structure": [h.to_text() for h in self.structure.basis],
            "A": [complex_to_json(a) for a in self.A],
            "B": complex_to_json(self.B),
            "C": complex_to_json(self.C),
            "n": self.n,
            "m": self.m,
            "p": self.p,
            "is_real": bool(self.is_real),
        }

    @classmethod
    def from_dict(cls, d):
        structure = parse_structure(",".join(d["structure"]))
        n, m, p = d.get("n"), d.get("m"), d.get("p")
        A = np.array([complex_from_json(a) for a in d["A"]]).reshape(structure.K, n, n) if n is not None else np.array([complex_from_json(a) for a in d["A"]])
        B = complex_from_json(d["B"])
        C = complex_from_json(d["C"])
        if n is not None:
            B = B.reshape(n, m)
            C = C.reshape(p, n)
        return cls(structure, A, B, C, is_real=bool(d.get("is_real", False)))

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def eval_kernel(R: StructuredRealization, s):
    return R.kernel(s)


def eval_transfer(R: StructuredRealization, s):
    return R.transfer(s)


def eval_transfer_deriv(R: StructuredRealization, s):
    return R.transfer_deriv(s)
