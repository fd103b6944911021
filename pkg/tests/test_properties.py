"""Property tests for the stated invariants."""

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from structloewner import (
    DataError,
    FrequencyGrid,
    FullModel,
    NumericalError,
    StructuredRealization,
    check_compatibility,
    conjugate_closure_sort,
    error_metrics,
    eval_kernel,
    eval_transfer,
    eval_transfer_deriv,
    k2_realization,
    parse_structure,
    partition_groups,
    rank_truncate,
    real_transform,
    realize,
    solve_additional_points,
    tangential_sample,
)

STRUCTURES = ["s,-1", "s,-1,-exp(-1*s)", "s^2,s,1", "s^2,s,1,exp(-1*s)", "1,exp(-s),exp(-1.5*s)", "s,1,s*exp(-0.5*s)"]
seeds = st.integers(0, 2**32 - 1)
structures = st.sampled_from(STRUCTURES)


def rand_model(structure, N, seed, m=1, p=1):
    rng = np.random.default_rng(seed)
    S = parse_structure(structure)
    A = rng.normal(size=(S.K, N, N))
    A[0] += 3 * np.eye(N)
    return FullModel(S, A, rng.normal(size=(N, m)), rng.normal(size=(p, N)), is_real=True)


def rand_points(rng, k):
    return rng.uniform(0.3, 2.0, size=k) + 1j * rng.uniform(-3, 3, size=k)


# independent scalar forms of each basis
CLOSED = {
    "s,-1": lambda s: (s, -1),
    "s,-1,-exp(-1*s)": lambda s: (s, -1, -np.exp(-s)),
    "s^2,s,1": lambda s: (s * s, s, 1),
    "s^2,s,1,exp(-1*s)": lambda s: (s * s, s, 1, np.exp(-s)),
    "1,exp(-s),exp(-1.5*s)": lambda s: (1, np.exp(-s), np.exp(-1.5 * s)),
    "s,1,s*exp(-0.5*s)": lambda s: (s, 1, s * np.exp(-0.5 * s)),
}


def scalar_closed_form(structure, a, b, c, s):
    return c * b / sum(ak * h for ak, h in zip(a, CLOSED[structure](s)))


@given(structures, seeds)
def test_transfer_matches_scalar_closed_form(structure, seed):
    rng = np.random.default_rng(seed)
    M = rand_model(structure, 1, seed)
    s = complex(*rng.uniform(0.2, 3, size=2))
    a = M.A[:, 0, 0]
    try:
        H = eval_transfer(M, s)[0, 0]
    except NumericalError:
        assume(False)
    ref = scalar_closed_form(structure, a, M.B[0, 0], M.C[0, 0], s)
    assert abs(H - ref) <= 1e-12 * abs(ref)


@given(structures, seeds, st.integers(0, 3))
def test_kernel_linear_in_each_coefficient(structure, seed, k):
    M = rand_model(structure, 4, seed)
    assume(k < M.K)
    s = complex(*np.random.default_rng(seed + 1).uniform(0.2, 3, size=2))
    A2 = M.A.copy()
    A2[k] *= 2
    M2 = StructuredRealization(M.structure, A2, M.B, M.C)
    contrib = M.structure.values(s)[k] * M.A[k]
    np.testing.assert_allclose(eval_kernel(M2, s), eval_kernel(M, s) + contrib, rtol=1e-14, atol=1e-13)


@given(structures, seeds)
def test_derivative_matches_central_difference(structure, seed):
    M = rand_model(structure, 3, seed)
    rng = np.random.default_rng(seed)
    for s in rand_points(rng, 20):
        h = 1e-6 * max(1.0, abs(s))
        try:
            fd = (eval_transfer(M, s + h) - eval_transfer(M, s - h)) / (2 * h)
            d = eval_transfer_deriv(M, s)
        except NumericalError:
            continue
        assume(np.linalg.cond(eval_kernel(M, s)) < 1e6)
        assert np.abs(d - fd).max() <= 1e-5 * max(np.abs(d).max(), 1e-3)


@given(structures, seeds)
def test_sampling_is_compatible(structure, seed):
    M = rand_model(structure, 3, seed)
    rng = np.random.default_rng(seed)
    mu = rand_points(rng, 3)
    d = tangential_sample(M, np.concatenate([mu, [mu[0]]])[:3], np.concatenate([[mu[0]], rand_points(rng, 2)]))
    assert check_compatibility(d) == []


@given(seeds, st.integers(1, 3), st.integers(0, 2))
def test_real_transform_unitary_and_idempotent(seed, pairs, reals):
    rng = np.random.default_rng(seed)
    M = rand_model("s,-1", 3, seed)
    z = rand_points(rng, pairs)
    pts = np.concatenate([np.ravel([[w, np.conj(w)] for w in z]), rng.uniform(0.5, 2, size=reals)])
    pts = rng.permutation(pts)
    d = tangential_sample(M, pts, pts + 5.0)
    s1, closed, _ = conjugate_closure_sort(d)
    assert closed
    s2, _, _ = conjugate_closure_sort(s1)
    np.testing.assert_array_equal(s2.mu, s1.mu)
    np.testing.assert_array_equal(s2.f, s1.f)
    T = real_transform(s1)
    for X in (T.T_F, T.T_G):
        np.testing.assert_allclose(X.conj().T @ X, np.eye(len(X)), atol=1e-12)
        Dm = X.conj().T @ np.diag(s1.mu if X is T.T_F else s1.sigma) @ X
        assert np.abs(Dm.imag).max() <= 1e-10 * np.abs(Dm).max()


@given(seeds, st.integers(1, 3), st.integers(1, 3), st.integers(1, 3))
def test_partition_preserves_samples(seed, QF, QG, n):
    rng = np.random.default_rng(seed)
    M = rand_model("s,-1", 2, seed)
    d = tangential_sample(M, rand_points(rng, QF * n), rand_points(rng, QG * n) + 3)
    gd = partition_groups(d, QF, QG, order="round_robin")
    key = lambda z: (z.real, z.imag)
    ms = lambda xs: sorted((complex(x) for x in xs), key=key)
    assert ms(x for g in gd.left_groups for x in g.points) == ms(d.mu)
    assert ms(x for g in gd.right_groups for x in g.points) == ms(d.sigma)
    assert ms(v for g in gd.left_groups for v in g.vals.ravel()) == ms(d.f.ravel())


def _residual_ok(R, d, tol):
    for i, s in enumerate(d.mu):
        assert np.linalg.norm(d.ell[i] @ eval_transfer(R, s) - d.f[i]) <= tol * (1 + np.linalg.norm(d.f[i]))
    for j, s in enumerate(d.sigma):
        assert np.linalg.norm(eval_transfer(R, s) @ d.r[j] - d.g[j]) <= tol * (1 + np.linalg.norm(d.g[j]))


@given(st.sampled_from(STRUCTURES[1:]), seeds)
def test_solver_interpolates(structure, seed):
    M = rand_model(structure, 4, seed)
    K = M.K
    n = 3
    qf = K // 2
    rng = np.random.default_rng(seed)
    pts = rand_points(rng, K * n)
    d = tangential_sample(M, pts[: qf * n], pts[qf * n:])
    try:
        R = realize(d, M.structure, method="additional", qf=qf, qg=K - qf, truncate=False)
    except NumericalError:
        assume(False)
    _residual_ok(R, d, 1e-8)


@given(st.sampled_from(STRUCTURES[1:]), seeds)
def test_fast_and_dense_paths_agree(structure, seed):
    M = rand_model(structure, 3, seed)
    K = M.K
    n = int(np.random.default_rng(seed).integers(1, 5))
    rng = np.random.default_rng(seed + 7)
    pts = rand_points(rng, K * n)
    qf = K // 2
    gd = partition_groups(tangential_sample(M, pts[: qf * n], pts[qf * n:]), qf, K - qf)
    try:
        A = solve_additional_points(gd, M.structure, fast=True, check=False)
        B = solve_additional_points(gd, M.structure, fast=False, check=False)
    except NumericalError:
        assume(False)
    assume(np.abs(B.A).max() < 1e6)
    assert np.abs(A.A - B.A).max() <= 1e-10 * np.abs(B.A).max() * 10 ** min(n, 3)


@given(st.sampled_from(["s,-1", "s,-1,-exp(-1*s)", "s^2,s,1"]), seeds, st.complex_numbers(min_magnitude=0.1, max_magnitude=10))
def test_scaling_equivariance(structure, seed, c):
    M = rand_model(structure, 2, seed)
    K = M.K
    rng = np.random.default_rng(seed)
    pts = rand_points(rng, 2 * K)
    d = tangential_sample(M, pts[:2], pts[2:])
    kw = dict(method="additional", qf=1, qg=K - 1) if K > 2 else dict(method="k2")
    try:
        R1 = realize(d, M.structure, truncate=False, **kw)
        R2 = realize(d.scaled(c), M.structure, truncate=False, **kw)
    except NumericalError:
        assume(False)
    for s in rand_points(np.random.default_rng(seed + 3), 10):
        H1, H2 = eval_transfer(R1, s), eval_transfer(R2, s)
        assert np.abs(H2 - c * H1).max() <= 1e-8 * max(1.0, np.abs(c * H1).max())


@given(seeds)
def test_truncation_preserves_transfer(seed):
    rng = np.random.default_rng(seed)
    M = rand_model("s,-1,-exp(-1*s)", 2, seed)
    pts = rand_points(rng, 15)
    gd = partition_groups(tangential_sample(M, pts[:5], pts[5:]), 1, 2)
    try:
        R = solve_additional_points(gd, M.structure, check=False)
        T = rank_truncate(R)
    except NumericalError:
        assume(False)
    for s in FrequencyGrid.log(0.1, 10, 100).points:
        try:
            ref = eval_transfer(R, s)
        except NumericalError:
            continue
        assert np.abs(eval_transfer(T, s) - ref).max() <= 1e-8 * max(1.0, np.abs(ref).max())


@given(seeds)
def test_k2_real_variant_matches_complex(seed):
    rng = np.random.default_rng(seed)
    # one conjugate pair per side keeps the pencil well conditioned
    M = rand_model("s^2,-1", 2, seed)
    z = rand_points(rng, 2)
    mu = np.array([z[0], np.conj(z[0])])
    sigma = np.array([z[1], np.conj(z[1])])
    d = tangential_sample(M, mu, sigma)
    try:
        Rc = k2_realization(d, M.structure, truncate=False)
        Rr = k2_realization(d, M.structure, make_real=True, truncate=False)
    except NumericalError:
        assume(False)
    assert Rr.imag_level() <= 1e-10
    # test points in the sampled region, away from poles near the imaginary axis
    for s in rand_points(np.random.default_rng(seed + 1), 20):
        ref = eval_transfer(Rc, s)
        assert np.abs(eval_transfer(Rr, s) - ref).max() <= 1e-8 * max(1.0, np.abs(ref).max())


@given(seeds, st.floats(-1, 1))
def test_error_metrics_symmetric(seed, shift):
    A = rand_model("s,-1", 3, seed)
    B = rand_model("s,-1", 3, seed + 1)
    g = FrequencyGrid.log(0.1, 10, 25)
    r1, r2 = error_metrics(A, B, g), error_metrics(B, A, g)
    np.testing.assert_array_equal(r1.abs_error, r2.abs_error)
    r0 = error_metrics(A, A, g)
    assert r0.max_abs == 0.0
