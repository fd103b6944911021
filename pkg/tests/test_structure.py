import json

import numpy as np
import pytest

from structloewner import (
    AffineStructure,
    BasisFunction,
    DomainError,
    IndependenceError,
    Kind,
    ParseError,
    SingularKernel,
    StructuredRealization,
    StructureError,
    acoustic_duct,
    deriv_basis,
    eval_basis,
    eval_kernel,
    eval_transfer,
    eval_transfer_deriv,
    format_structure,
    parse_structure,
)

S_M1 = AffineStructure((BasisFunction.monomial(1), BasisFunction.monomial(0, -1.0)))


def test_eval_basis_examples():
    assert eval_basis(BasisFunction.monomial(1), 2j) == 2j
    assert eval_basis(BasisFunction.exponential(1.0, -1.0), 0) == -1
    assert eval_basis(BasisFunction.monomial_exponential(1, 1.0), 1.0) == pytest.approx(0.36787944117144233, rel=1e-15)
    assert eval_basis(BasisFunction.reciprocal(2.0), 4.0) == pytest.approx(0.5)


def test_deriv_basis_examples():
    assert deriv_basis(BasisFunction.monomial(0), 1.7 + 2j) == 0
    assert deriv_basis(BasisFunction.exponential(1.0), 0) == -1
    assert deriv_basis(BasisFunction.monomial(2), 3.0) == 6
    # (p s^(p-1) - tau s^p) e^(-tau s) at p=1, tau=2, s=1
    assert deriv_basis(BasisFunction.monomial_exponential(1, 2.0), 1.0) == pytest.approx(-np.exp(-2.0))
    assert deriv_basis(BasisFunction.reciprocal(), 2.0) == pytest.approx(-0.25)


def test_reciprocal_domain():
    with pytest.raises(DomainError):
        eval_basis(BasisFunction.reciprocal(), 0)
    with pytest.raises(DomainError):
        deriv_basis(BasisFunction.reciprocal(), 0)


def test_basis_validation():
    with pytest.raises(StructureError):
        BasisFunction.monomial(1, 0.0)
    with pytest.raises(StructureError):
        BasisFunction.monomial(-1)


def test_structure_needs_two_terms():
    with pytest.raises(StructureError):
        AffineStructure((BasisFunction.monomial(1),))


def test_eval_kernel_examples():
    R = StructuredRealization(S_M1, [np.eye(2), np.eye(2)], np.ones((2, 1)), np.ones((1, 2)))
    np.testing.assert_array_equal(eval_kernel(R, 3.0), 2 * np.eye(2))
    toy = StructuredRealization(parse_structure("s,-1,-exp(-1*s)"), [[[1.0]], [[-2.0]], [[0.5]]], [[1.0]], [[1.0]])
    assert eval_kernel(toy, 0)[0, 0] == pytest.approx(1.5)
    Z = StructuredRealization(S_M1, np.zeros((2, 3, 3)), np.ones((3, 1)), np.ones((1, 3)))
    np.testing.assert_array_equal(eval_kernel(Z, 1.3), np.zeros((3, 3)))


def test_eval_transfer_examples():
    toy = StructuredRealization(parse_structure("s,-1,-exp(-1*s)"), [[[1.0]], [[-2.0]], [[0.5]]], [[1.0]], [[1.0]])
    assert eval_transfer(toy, 0)[0, 0] == pytest.approx(2 / 3, rel=1e-14)
    _, duct = acoustic_duct()
    assert abs(eval_transfer(duct, 0)[0, 0]) < 1e-15
    fo = StructuredRealization(S_M1, [[[1.0]], [[-1.0]]], [[1.0]], [[1.0]])
    assert eval_transfer(fo, 1.0)[0, 0] == pytest.approx(0.5, rel=1e-15)


def test_eval_transfer_deriv_examples():
    fo = StructuredRealization(S_M1, [[[1.0]], [[-1.0]]], [[1.0]], [[1.0]])
    assert eval_transfer_deriv(fo, 1.0)[0, 0] == pytest.approx(-0.25, rel=1e-14)
    toy = StructuredRealization(parse_structure("s,-1,-exp(-1*s)"), [[[1.0]], [[-2.0]], [[0.5]]], [[1.0]], [[1.0]])
    s, h = 0.3j, 1e-6
    fd = (toy(s + h) - toy(s - h)) / (2 * h)
    assert abs(toy.deriv(s)[0, 0] - fd[0, 0]) <= 1e-6 * abs(fd[0, 0])
    # constant kernel: derivative vanishes
    c = StructuredRealization(S_M1, [[[0.0]], [[-3.0]]], [[1.0]], [[1.0]])
    assert c.deriv(2.0)[0, 0] == 0


def test_singular_kernel():
    R = StructuredRealization(S_M1, [[[1.0]], [[-1.0]]], [[1.0]], [[1.0]])
    with pytest.raises(SingularKernel) as exc:
        R(-1.0)
    assert exc.value.s == -1.0


def test_parse_examples():
    S = parse_structure("s,-1,-exp(-1*s)")
    b = S.basis
    assert b[0] == BasisFunction.monomial(1)
    assert b[1] == BasisFunction.monomial(0, -1.0)
    assert b[2] == BasisFunction.exponential(1.0, -1.0)
    S2 = parse_structure("s^2, s, 1")
    assert [f.power for f in S2.basis] == [2, 1, 0]
    assert all(f.kind == Kind.MONOMIAL for f in S2.basis)
    with pytest.raises(IndependenceError):
        parse_structure("s,s")


def test_exp_shorthand():
    # exp(s) is read as exp(1*s), i.e. tau = -1
    assert parse_structure("s,exp(s)").basis[1].tau == -1.0


def test_parse_more_forms():
    S = parse_structure("2.5*s*exp(-0.5*s), s^-1, 1")
    f = S.basis[0]
    assert f.kind == Kind.MONOMIAL_EXPONENTIAL and f.power == 1 and f.tau == 0.5 and f.scale == 2.5
    assert S.basis[1].kind == Kind.RECIPROCAL
    assert parse_structure(" s ,  - 1 ").K == 2


@pytest.mark.parametrize(
    "text, offset",
    [("s,,1", 2), ("s,exp(*s)", 6), ("s,exp(-1*t)", 9), ("s^x", 2), ("s, 1 )", 5), ("", 0)],
)
def test_parse_errors_report_offset(text, offset):
    with pytest.raises(ParseError) as exc:
        parse_structure(text)
    assert exc.value.offset == offset
    assert exc.value.expected


def test_format_roundtrip():
    for text in ["s,-1,-exp(-1*s)", "s^2,s,1", "1,exp(-0.5*s),exp(-1.5*s)", "s,1,s^-1"]:
        S = parse_structure(text)
        assert parse_structure(format_structure(S)) == S


def test_realization_shape_checks():
    with pytest.raises(StructureError):
        StructuredRealization(S_M1, np.zeros((3, 2, 2)), np.ones((2, 1)), np.ones((1, 2)))
    with pytest.raises(StructureError):
        StructuredRealization(S_M1, np.zeros((2, 2, 2)), np.ones((3, 1)), np.ones((1, 2)))
    with pytest.raises(StructureError):
        StructuredRealization(S_M1, np.zeros((2, 2, 2)) + 1j, np.ones((2, 1)), np.ones((1, 2)), is_real=True)


def test_realization_is_immutable():
    R = StructuredRealization(S_M1, np.zeros((2, 2, 2)), np.ones((2, 1)), np.ones((1, 2)))
    with pytest.raises(ValueError):
        R.A[0, 0, 0] = 1.0


def test_json_roundtrip():
    rng = np.random.default_rng(1)
    A = rng.normal(size=(3, 2, 2)) + 1j * rng.normal(size=(3, 2, 2))
    R = StructuredRealization(parse_structure("s,-1,-exp(-1*s)"), A, rng.normal(size=(2, 1)), rng.normal(size=(1, 2)))
    d = json.loads(R.to_json())
    assert set(d) >= {"structure", "A", "B", "C", "n", "m", "p", "is_real"}
    R2 = StructuredRealization.from_json(R.to_json())
    np.testing.assert_array_equal(R2.A, R.A)
    np.testing.assert_array_equal(R2.B, R.B)
    assert R2.structure == R.structure
