import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from kae.errors import ShapeError, SpecError, ValidationError
from kae.kernels import (
    ScalarKernelSpec,
    delta_matrix,
    gram,
    gram_induced,
    gram_induced_eval,
    kernel_eval,
    kernel_grad1,
    median_gamma,
    validate_gram,
)

G = ScalarKernelSpec.gaussian
P = ScalarKernelSpec.polynomial
finite = st.floats(-3, 3, allow_nan=False)


def test_spec_validation():
    with pytest.raises(SpecError):
        G(0.0)
    with pytest.raises(SpecError):
        P(a=0.0)
    with pytest.raises(SpecError):
        P(c=0)
    lin = ScalarKernelSpec.linear()
    assert (lin.a, lin.b, lin.c) == (1.0, 0.0, 1)
    for spec in (G(0.7), P(2.0, 1.0, 3), lin):
        assert ScalarKernelSpec.from_dict(spec.to_dict()) == spec


def test_eval_examples():
    assert kernel_eval(G(1.0), [0.3, -2], [0.3, -2]) == 1.0
    assert kernel_eval(G(0.5), [0, 0], [1, 1]) == pytest.approx(np.exp(-1.0), abs=1e-15)
    assert kernel_eval(P(1, 0, 2), [1, 2], [2, 1]) == 16.0


def test_eval_shape_mismatch():
    with pytest.raises(ShapeError):
        kernel_eval(G(1.0), [1, 2], [1, 2, 3])
    with pytest.raises(ShapeError):
        gram(G(1.0), np.ones((2, 2)), np.ones((2, 3)))


def test_grad1_examples():
    np.testing.assert_array_equal(kernel_grad1(G(1.0), [0.4, 1.0], [0.4, 1.0]), [0.0, 0.0])
    np.testing.assert_allclose(kernel_grad1(P(1, 0, 2), [1, 2], [2, 1]), [16, 8])
    np.testing.assert_allclose(kernel_grad1(G(0.5), [1, 1], [0, 0]), -np.exp(-1.0) * np.ones(2), atol=1e-15)


@pytest.mark.parametrize("spec", [G(0.8), P(0.7, 1.0, 3), ScalarKernelSpec.linear()])
def test_grad1_matches_central_differences(spec, rng):
    h = 1e-5
    for _ in range(20):
        x, y = rng.standard_normal((2, 3))
        fd = np.array([
            (kernel_eval(spec, x + h * e, y) - kernel_eval(spec, x - h * e, y)) / (2 * h)
            for e in np.eye(3)
        ])
        g = kernel_grad1(spec, x, y)
        assert np.linalg.norm(g - fd) <= 1e-6 * max(np.linalg.norm(fd), 1e-8)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (2, 3), elements=finite), st.sampled_from([G(0.3), P(1.5, -0.5, 2)]))
def test_symmetry(xy, spec):
    assert kernel_eval(spec, xy[0], xy[1]) == kernel_eval(spec, xy[1], xy[0])


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (1, 4), elements=finite))
def test_gaussian_self_is_one(x):
    assert kernel_eval(G(2.5), x[0], x[0]) == 1.0


def test_gram_examples(backend):
    X = np.random.default_rng(0).standard_normal((6, 3))
    np.testing.assert_array_equal(np.diag(gram(G(1.3), X)), np.ones(6))
    np.testing.assert_array_equal(gram(ScalarKernelSpec.linear(), np.eye(2)), np.eye(2))
    assert gram(P(1, 1, 1), [[1.0]], [[2.0]]).tolist() == [[3.0]]


def test_gram_matches_pairwise_eval(rng):
    X, Y = rng.standard_normal((5, 2)), rng.standard_normal((4, 2))
    for spec in (G(0.6), P(0.5, 1.0, 3)):
        loop = np.array([[kernel_eval(spec, x, y) for y in Y] for x in X])
        np.testing.assert_allclose(gram(spec, X, Y), loop, rtol=1e-13, atol=1e-15)


def test_gaussian_gram_is_valid(rng):
    X = rng.standard_normal((30, 4))
    validate_gram(gram(G(0.4), X))


def test_delta_examples():
    np.testing.assert_array_equal(delta_matrix(G(1.0), np.array([[0.2, 0.5]]), 0), np.zeros((1, 2)))
    D = delta_matrix(G(0.5), np.array([[0.0, 0.0], [1.0, 1.0]]), 0)
    np.testing.assert_allclose(D, [[0, 0], [np.exp(-1), np.exp(-1)]], atol=1e-15)
    with pytest.raises(IndexError):
        delta_matrix(G(1.0), np.zeros((2, 2)), 2)


@pytest.mark.parametrize("spec", [G(0.9), P(0.5, 1.0, 2), P(-0.7, 0.3, 3)])
def test_delta_rows_are_grad1(spec, rng):
    X = rng.standard_normal((5, 3))
    for i in range(5):
        D = delta_matrix(spec, X, i)
        for k in range(5):
            np.testing.assert_allclose(D[k], kernel_grad1(spec, X[i], X[k]), rtol=1e-12, atol=1e-15)


def test_gram_induced_examples():
    assert gram_induced_eval(G(1.0), 1.0, 1.0, 1.0) == 1.0
    assert gram_induced_eval(G(1.0), 1.0, 0.0, 1.0) == pytest.approx(np.exp(-2.0), abs=1e-16)
    # round-off negative squared distances are clamped
    assert gram_induced_eval(G(1.0), 1.0, 1.0 + 1e-15, 1.0) == 1.0


def test_gram_induced_matches_explicit(rng):
    X, Y = rng.standard_normal((6, 3)), rng.standard_normal((4, 3))
    for spec in (G(0.7), P(0.5, 1.0, 3), ScalarKernelSpec.linear()):
        induced = gram_induced(spec, X @ Y.T, np.sum(X**2, 1), np.sum(Y**2, 1))
        np.testing.assert_allclose(induced, gram(spec, X, Y), rtol=1e-12, atol=1e-12)


def test_validate_gram_errors():
    with pytest.raises(ValidationError, match="square"):
        validate_gram(np.ones((3, 4)))
    with pytest.raises(ValidationError, match="symmetric"):
        validate_gram(np.array([[1.0, 0.5], [0.4, 1.0]]))
    with pytest.raises(ValidationError, match="negative diagonal"):
        validate_gram(np.array([[-1.0, 0.0], [0.0, 1.0]]))
    with pytest.raises(ValidationError, match="semidefinite"):
        validate_gram(np.array([[1.0, 2.0], [2.0, 1.0]]))
    validate_gram(np.array([[1.0, 2.0], [2.0, 1.0]]), psd=False)


def test_median_gamma():
    X = np.array([[0.0], [1.0], [3.0]])
    # pairwise distances 1, 2, 3 -> median 2
    assert median_gamma(X) == pytest.approx(1.0 / 8.0)
