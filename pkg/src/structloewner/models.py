"""Benchmark systems and closed-form transfer functions."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DataError
from .projection import FullModel
from .structure import AffineStructure, BasisFunction, parse_structure

__all__ = [
    "AnalyticOracle",
    "delay_toeplitz_model",
    "acoustic_duct",
    "heated_rod_model",
    "beam_model",
    "beam_element_matrices",
    "toy_delay",
    "first_order",
    "MODEL_NAMES",
    "build_named_model",
]

DELAY_STRUCTURE = "s,-1,-exp(-1*s)"


@dataclass(frozen=True, eq=False)
class AnalyticOracle:
    """Closed-form ``s -> H(s)`` with optional derivative.

    ``singularities`` lists known poles (informational).
    """

    func: Callable
    derivative: Optional[Callable] = None
    singularities: tuple = ()
    name: str = ""

    def __call__(self, s):
        return complex(self.func(complex(s)))

    @property
    def deriv(self):
        if self.derivative is None:
            return None
        return lambda s: complex(self.derivative(complex(s)))


def _delay_structure(tau=1.0):
    return AffineStructure(
        (
            BasisFunction.monomial(1),
            BasisFunction.monomial(0, -1.0),
            BasisFunction.exponential(tau, -1.0),
        )
    )


def _toeplitz_T(N):
    T = np.zeros((N, N))
    i = np.arange(N - 1)
    T[i, i + 1] = 1.0
    T[i + 1, i] = 1.0
    T[0, 0] = T[-1, -1] = 1.0
    return T


def delay_toeplitz_model(N: int = 500, nu: float = 5.0, zeta: float = 0.01, tau: float = 1.0) -> FullModel:
    """Delay system ``s A_1 - A_2 - exp(-tau s) A_3``.

    ``A_1 = nu I + T``, ``A_2 = (1/tau)(1/zeta + 1)(T - nu I)``,
    ``A_3 = (1/tau)(1/zeta - 1)(T - nu I)`` with ``T`` tridiagonal ones plus
    ones at both corners of the diagonal; ``B`` has ones in its first two
    entries and ``C = B^T``.
    """
    if N < 2:
        raise DataError("N must be at least 2")
    if zeta == 0:
        raise DataError("zeta must be nonzero")
    if not tau > 0:
        raise DataError("tau must be positive")
    T = _toeplitz_T(N)
    I = np.eye(N)
    A1 = nu * I + T
    A2 = (1.0 / tau) * (1.0 / zeta + 1.0) * (T - nu * I)
    A3 = (1.0 / tau) * (1.0 / zeta - 1.0) * (T - nu * I)
    B = np.zeros((N, 1))
    B[:2] = 1.0
    return FullModel(_delay_structure(tau), np.stack([A1, A2, A3]), B, B.T.copy(), is_real=True)


def acoustic_duct(L: float = 1.0, xi0: float = 0.5, c: float = 1.0, rho0: float = 1.0):
    """Pressure at ``xi0`` in a duct driven at one end.

    Returns
    -------
    (oracle, model)
        ``oracle`` evaluates ``rho0 sinh((L - xi0) s / c) / cosh(L s / c)``;
        ``model`` is an exact order-4 realization with structure
        ``(1, exp(-tau1 s), exp(-tau2 s))``, ``tau1 = xi0/c``,
        ``tau2 = (2L - xi0)/c``.
    """
    if not (0 < xi0 < L) or not c > 0:
        raise DataError("need 0 < xi0 < L and c > 0")
    a = (L - xi0) / c
    b = L / c

    def H(s):
        return rho0 * np.sinh(a * s) / np.cosh(b * s)

    def dH(s):
        ch = np.cosh(b * s)
        return rho0 * (a * np.cosh(a * s) * ch - b * np.sinh(a * s) * np.sinh(b * s)) / ch**2

    poles = tuple(1j * np.pi * (k + 0.5) / b for k in range(-8, 8))
    oracle = AnalyticOracle(H, dH, poles, "acoustic duct")

    tau1, tau2 = xi0 / c, (2 * L - xi0) / c
    structure = AffineStructure(
        (BasisFunction.monomial(0), BasisFunction.exponential(tau1), BasisFunction.exponential(tau2))
    )
    A1 = np.eye(4)
    A1[3, 1] = 1.0
    A2 = np.zeros((4, 4))
    A2[1, 2] = -1.0
    A2[3, 0] = -1.0
    A3 = np.zeros((4, 4))
    A3[2, 3] = -1.0
    # +1 here; with -1 the realization would give (x + x^3)/(1 + x^4), x = exp(-tau1 s)
    A3[3, 0] = 1.0
    Bv = np.zeros((4, 1))
    Bv[0] = 1.0
    Cv = np.zeros((1, 4))
    Cv[0, 3] = rho0
    model = FullModel(structure, np.stack([A1, A2, A3]), Bv, Cv, is_real=True)
    return oracle, model


def heated_rod_model(N: int = 100) -> FullModel:
    """Finite-difference heated rod with delayed feedback.

    ``x' = (L_N + A_{1,N}) x + A_{2,N} x(t - 1) + B u``, ``y = C x`` with
    ``A_{1,N} = diag(-2 sin xi_i)``, ``A_{2,N} = diag(2 sin xi_i)``, ``B`` all
    ones and ``C = B^T / |B|``.
    """
    if N < 3:
        raise DataError("N must be at least 3")
    h = np.pi / (N + 1)
    xi = h * np.arange(1, N + 1)
    Lap = (np.diag(-2.0 * np.ones(N)) + np.diag(np.ones(N - 1), 1) + np.diag(np.ones(N - 1), -1)) / h**2
    A1N = np.diag(-2.0 * np.sin(xi))
    A2N = np.diag(2.0 * np.sin(xi))
    B = np.ones((N, 1))
    C = B.T / np.linalg.norm(B)
    return FullModel(_delay_structure(1.0), np.stack([np.eye(N), Lap + A1N, A2N]), B, C, is_real=True)


def beam_element_matrices(le: float):
    """Cubic Hermite element mass and stiffness for unit density and bending stiffness.

    DOF order ``(w_1, theta_1, w_2, theta_2)``.
    """
    l = le
    M = (l / 420.0) * np.array(
        [
            [156, 22 * l, 54, -13 * l],
            [22 * l, 4 * l * l, 13 * l, -3 * l * l],
            [54, 13 * l, 156, -22 * l],
            [-13 * l, -3 * l * l, -22 * l, 4 * l * l],
        ]
    )
    S = (1.0 / l**3) * np.array(
        [
            [12, 6 * l, -12, 6 * l],
            [6 * l, 4 * l * l, -6 * l, 2 * l * l],
            [-12, -6 * l, 12, -6 * l],
            [6 * l, 2 * l * l, -6 * l, 4 * l * l],
        ]
    )
    return M, S


def beam_model(num_elements: int = 200, alpha1: float = 0.05, alpha2: float = 0.05) -> FullModel:
    """Cantilevered unit beam, ``s^2 M + s (alpha1 M + alpha2 S) + S``.

    The left end is clamped; states are ``(w, theta)`` per free node, so
    ``N = 2 * num_elements``.  Input on the first translational DOF, output
    from the tip translational DOF.
    """
    if num_elements < 2:
        raise DataError("need at least two elements")
    ne = int(num_elements)
    le = 1.0 / ne
    Me, Se = beam_element_matrices(le)
    nd = 2 * (ne + 1)
    M = np.zeros((nd, nd))
    S = np.zeros((nd, nd))
    for e in range(ne):
        idx = slice(2 * e, 2 * e + 4)
        M[idx, idx] += Me
        S[idx, idx] += Se
    M, S = M[2:, 2:], S[2:, 2:]
    N = 2 * ne
    B = np.zeros((N, 1))
    B[0] = 1.0
    C = np.zeros((1, N))
    C[0, N - 2] = 1.0
    structure = parse_structure("s^2,s,1")
    return FullModel(structure, np.stack([M, alpha1 * M + alpha2 * S, S]), B, C, is_real=True)


def toy_delay(a1: float = 1.0, a2: float = -2.0, a3: float = 0.5, b: float = 1.0, c: float = 1.0):
    """Scalar delay system ``H(s) = cb / (s a1 - a2 - exp(-s) a3)``.

    Returns ``(model, oracle)``.
    """
    if b * c == 0:
        raise DataError("need bc != 0")

    def H(s):
        return c * b / (s * a1 - a2 - np.exp(-s) * a3)

    def dH(s):
        return -c * b * (a1 + np.exp(-s) * a3) / (s * a1 - a2 - np.exp(-s) * a3) ** 2

    model = FullModel(_delay_structure(1.0), np.array([[[a1]], [[a2]], [[a3]]]), [[b]], [[c]], is_real=True)
    return model, AnalyticOracle(H, dH, (), "toy delay")


def first_order(a: float = 1.0):
    """``H(s) = 1/(s + a)`` as a state-space model with structure ``(s, -1)``."""
    structure = AffineStructure((BasisFunction.monomial(1), BasisFunction.monomial(0, -1.0)))
    model = FullModel(structure, np.array([[[1.0]], [[-a]]]), [[1.0]], [[1.0]], is_real=True)
    oracle = AnalyticOracle(lambda s: 1.0 / (s + a), lambda s: -1.0 / (s + a) ** 2, (-a,), "first order")
    return model, oracle


MODEL_NAMES = ("delay", "rod", "duct", "beam", "toy")


def build_named_model(name: str, **params):
    """``(oracle, model_or_None, structure)`` for a benchmark name."""
    if name == "delay":
        m = delay_toeplitz_model(**params)
        return m, m, m.structure
    if name == "rod":
        m = heated_rod_model(**params)
        return m, m, m.structure
    if name == "duct":
        o, m = acoustic_duct(**params)
        return o, m, m.structure
    if name == "beam":
        m = beam_model(**params)
        return m, m, m.structure
    if name == "toy":
        m, o = toy_delay(**params)
        return o, m, m.structure
    raise DataError(f"unknown model {name!r}; choose from {', '.join(MODEL_NAMES)}")
