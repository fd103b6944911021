import numpy as np
import pytest

from structloewner import (
    DataError,
    acoustic_duct,
    beam_element_matrices,
    beam_model,
    build_named_model,
    delay_toeplitz_model,
    heated_rod_model,
    parse_structure,
    partition_groups,
    realize,
    tangential_sample,
    toy_delay,
)


def test_delay_small_assembly():
    M = delay_toeplitz_model(N=2, nu=5.0)
    np.testing.assert_array_equal(M.A[0], [[6.0, 1.0], [1.0, 6.0]])
    np.testing.assert_array_equal(M.B[:, 0], [1.0, 1.0])
    np.testing.assert_array_equal(M.C, M.B.T)


def test_delay_benchmark_size_and_structure():
    M = delay_toeplitz_model()
    assert M.N == 500
    assert M.structure == parse_structure("s,-1,-exp(-1*s)")
    assert M.B[:, 0].tolist()[:3] == [1.0, 1.0, 0.0]


def test_delay_shared_factor():
    z = 0.01
    M = delay_toeplitz_model(N=30, zeta=z)
    np.testing.assert_allclose(M.A[1] * (1 / z - 1), M.A[2] * (1 / z + 1), rtol=1e-15, atol=0)
    np.testing.assert_allclose(M.A[2], (1 / z - 1) / (1 / z + 1) * M.A[1], rtol=1e-14)


def test_delay_parameter_checks():
    for kw in ({"N": 1}, {"zeta": 0.0}, {"tau": 0.0}):
        with pytest.raises(DataError):
            delay_toeplitz_model(**kw)


def test_duct_oracle_and_model_agree():
    H, M = acoustic_duct()
    assert H(0) == 0
    assert M(0)[0, 0] == 0
    for s in 1j * np.linspace(0.1, 10, 50):
        assert abs(M(s)[0, 0] - H(s)) <= 1e-12 * abs(H(s))
    assert abs(H(20.0)) <= 1e-4


def test_duct_derivative():
    H, _ = acoustic_duct()
    s, h = 0.7j, 1e-6
    fd = (H(s + h) - H(s - h)) / (2 * h)
    assert abs(H.deriv(s) - fd) <= 1e-8 * abs(fd)


def test_duct_parameter_checks():
    with pytest.raises(DataError):
        acoustic_duct(L=1.0, xi0=1.5)


def test_rod_stencil_and_output():
    N = 100
    M = heated_rod_model(N)
    h = np.pi / (N + 1)
    xi = h * np.arange(1, N + 1)
    Lap = M.A[1] + np.diag(2 * np.sin(xi))
    np.testing.assert_allclose(Lap[10, 9:12], np.array([1.0, -2.0, 1.0]) / h**2, rtol=1e-13)
    np.testing.assert_allclose(M.A[2], np.diag(2 * np.sin(xi)))
    assert (M.C @ M.B)[0, 0] == pytest.approx(np.sqrt(N), rel=1e-14)
    with pytest.raises(DataError):
        heated_rod_model(2)


def _hermite_oracle_matrices(le):
    # Gauss-Legendre integration of the cubic Hermite shape functions
    x, w = np.polynomial.legendre.leggauss(6)
    xi = (x + 1) / 2
    w = w / 2
    N = np.stack([1 - 3 * xi**2 + 2 * xi**3, le * (xi - 2 * xi**2 + xi**3), 3 * xi**2 - 2 * xi**3, le * (-(xi**2) + xi**3)])
    d2 = np.stack([-6 + 12 * xi, le * (-4 + 6 * xi), 6 - 12 * xi, le * (-2 + 6 * xi)]) / le**2
    M = le * (N * w) @ N.T
    S = le * (d2 * w) @ d2.T
    return M, S


@pytest.mark.parametrize("le", [1.0, 0.2, 1 / 200])
def test_beam_element_matrices(le):
    Me, Se = beam_element_matrices(le)
    Mo, So = _hermite_oracle_matrices(le)
    np.testing.assert_allclose(Me, Mo, rtol=1e-12, atol=1e-15 * np.abs(Mo).max())
    np.testing.assert_allclose(Se, So, rtol=1e-12, atol=1e-12 * np.abs(So).max())


def test_beam_model_properties():
    M = beam_model()
    assert M.N == 400
    Ms, Ss = M.A[0], M.A[2]
    assert np.linalg.eigvalsh(Ms).min() > 0
    assert np.linalg.eigvalsh(Ss).min() > 0
    np.testing.assert_allclose(M.A[1], 0.05 * Ms + 0.05 * Ss)
    assert M.B[0, 0] == 1 and M.C[0, M.N - 2] == 1
    with pytest.raises(DataError):
        beam_model(1)


def test_toy_values():
    model, H = toy_delay(1.0, -2.0, 0.5, 1.0, 1.0)
    assert H(0) == pytest.approx(2 / 3, rel=1e-15)
    assert model(0)[0, 0] == pytest.approx(2 / 3, rel=1e-15)
    with pytest.raises(DataError):
        toy_delay(b=0.0)
    s, h = 0.4 + 0.3j, 1e-6
    fd = (H(s + h) - H(s - h)) / (2 * h)
    assert abs(H.deriv(s) - fd) <= 1e-6 * abs(fd)


def test_toy_recovered_exactly():
    model, H = toy_delay(1.5, -1.0, 0.4, 2.0, 0.5)
    d = tangential_sample(H, [0.3 + 1j, 0.3 - 1j], [0.5 + 2j, 0.5 - 2j, 1.0 + 3j, 1.0 - 3j])
    R = realize(d, model.structure, qf=1, qg=2)
    assert R.n == 1
    for s in 1j * np.logspace(-1, 1, 40):
        assert abs(R(s)[0, 0] - H(s)) <= 1e-9 * abs(H(s))


@pytest.mark.xfail(strict=True, reason="order-4 duct recovery from n=16 samples is not attainable; see the decisions ledger")
def test_duct_recovered_after_truncation():
    H, M = acoustic_duct()
    from structloewner.harness import experiment_data

    d = experiment_data(H, 16, (0.1, 10), "additional")
    R = realize(d, M.structure, qf=1, qg=2)
    assert R.n == 4
    for s in 1j * np.logspace(-1, 1, 50):
        assert abs(R(s)[0, 0] - H(s)) <= 1e-8 * max(1, abs(H(s)))


def test_named_models():
    for name in ("delay", "rod", "duct", "beam", "toy"):
        oracle, model, structure = build_named_model(name)
        assert structure.K >= 2
    with pytest.raises(DataError):
        build_named_model("pendulum")


def test_beam_transfer_accuracy():
    # frozen from a 40-digit mpmath LU solve of the same kernel
    ref = 0.00020734410583605283966 - 0.000034224675491761329212j
    M = beam_model(60)
    assert abs(M(2j)[0, 0] - ref) <= 1e-10 * abs(ref)
