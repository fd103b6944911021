import numpy as np
import pytest

from structloewner import (
    FullModel,
    StructureError,
    first_order,
    interpolation_residuals,
    k2_realization,
    parse_structure,
    partition_groups,
    project,
    projection_bases,
    solve_additional_points,
    tangential_sample,
)


def random_k2(N=30, seed=0, structure="s,-1"):
    rng = np.random.default_rng(seed)
    A1 = np.eye(N) + 0.1 * rng.normal(size=(N, N))
    A2 = -np.diag(rng.uniform(0.5, 5, N)) + 0.1 * rng.normal(size=(N, N))
    return FullModel(parse_structure(structure), [A1, A2], rng.normal(size=(N, 1)), rng.normal(size=(1, N)), is_real=True)


def test_first_order_basis():
    model, _ = first_order(1.0)
    P = projection_bases(model, [2.0], [1.0])
    assert P.V[0, 0] == pytest.approx(0.5)
    assert P.W[0, 0] == pytest.approx(1 / 3)


def test_bases_solve_defining_equations():
    M = random_k2(12, seed=1)
    mu, sigma = [0.5j, 1.0, 2.0 + 1j], [1.5j, -0.7j, 3.0]
    P = projection_bases(M, mu, sigma)
    for j, s in enumerate(sigma):
        assert np.abs(M.kernel(s) @ P.V[:, j] - M.B[:, 0]).max() <= 1e-10
    for i, s in enumerate(mu):
        assert np.abs(M.kernel(s).T @ P.W[:, i] - M.C[0]).max() <= 1e-10


def test_square_bases_reproduce_model():
    M = random_k2(4, seed=2)
    rng = np.random.default_rng(0)
    mu = rng.normal(size=4) + 1j * rng.normal(size=4)
    sigma = rng.normal(size=4) + 1j * rng.normal(size=4)
    P = projection_bases(M, mu, sigma)
    assert np.linalg.matrix_rank(P.V) == 4
    Rp = project(M, P)
    for s in 1j * np.logspace(-1, 1, 30):
        assert abs(Rp(s)[0, 0] - M(s)[0, 0]) <= 1e-9 * abs(M(s)[0, 0])


def test_projected_matrices_equal_data_driven_k2():
    M = random_k2(30, seed=3)
    rng = np.random.default_rng(1)
    mu = rng.uniform(0.1, 2, 4) + 1j * rng.uniform(-3, 3, 4)
    sigma = rng.uniform(0.1, 2, 4) + 1j * rng.uniform(-3, 3, 4)
    Rp = project(M, projection_bases(M, mu, sigma))
    Rd = k2_realization(tangential_sample(M, mu, sigma), M.structure, truncate=False)
    for k in range(2):
        assert np.abs(Rp.A[k] - Rd.A[k]).max() <= 1e-9 * np.abs(Rd.A[k]).max()


def test_projection_interpolates_and_diagonal_identity():
    S = "s,-1,-exp(-1*s)"
    rng = np.random.default_rng(4)
    N = 15
    A = rng.normal(size=(3, N, N)) * 0.2
    A[0] += np.eye(N)
    A[1] -= 2 * np.eye(N)
    M = FullModel(parse_structure(S), A, rng.normal(size=(N, 1)), rng.normal(size=(1, N)), is_real=True)
    pts = [0.5j, 1.0 + 0.2j, 2.0]
    sigma = [0.5j, 3.0, -1j]
    d = tangential_sample(M, pts, sigma)
    assert d.theta and 0 in d.theta
    Rp = project(M, projection_bases(M, pts, sigma))
    assert max(interpolation_residuals(Rp, d).values()) <= 1e-8
    dh = M.structure.derivs(pts[0])
    lhs = sum(dh[k] * Rp.A[k][0, 0] for k in range(3))
    assert abs(lhs + d.theta[0]) <= 1e-8 * (1 + abs(d.theta[0]))


def test_k3_counterexample_not_a_projection():
    A = np.stack([np.diag([1.0, 2.0]), np.eye(2), np.eye(2)])
    b = np.ones((2, 1))
    M = FullModel(parse_structure("s,-1,-exp(-1*s)"), A, b, b.T, is_real=True)
    d = tangential_sample(M, [0.0], [1.0, -1.0])
    R = solve_additional_points(partition_groups(d, 1, 2), M.structure)
    # frozen from a 30-digit mpmath solve of the same 3x3 system
    np.testing.assert_allclose(R.A.ravel(), [-0.7327762019952693, -0.3490003985966821, 1.349000398596682], rtol=1e-12)
    assert abs(R.A[1, 0, 0] - R.A[2, 0, 0]) > 1e-3


def test_full_model_json():
    M = random_k2(3)
    text = M.to_json()
    assert '"N": 3' in text
    M2 = FullModel.from_json(text)
    np.testing.assert_array_equal(M2.A, M.A)
    assert M2.N == 3
    bad = text.replace('"N": 3', '"N": 4')
    with pytest.raises(StructureError):
        FullModel.from_json(bad)


def test_project_dimension_check():
    M = random_k2(5)
    P = projection_bases(random_k2(4), [1.0], [2.0])
    with pytest.raises(StructureError):
        project(M, P)
