import numpy as np
import pytest

from kae.gradcheck import FD_STEP, gradient_error, jacobian_error, random_instance, relative_error
from kae.gradients import (
    JacobianTable,
    fd_gradient,
    full_gradient,
    grad_distortion,
    grad_norm_cross,
    grad_norm_own,
    jacobians,
)
from kae.errors import ConsistencyError
from kae.kernels import ScalarKernelSpec, gram
from kae.layers import LayerSpec, ModelState, coeff_inner, layer_norm_sq

G = ScalarKernelSpec.gaussian
LIN = ScalarKernelSpec.linear()


@pytest.mark.parametrize("seed", range(4))
def test_gradient_and_jacobian_match_fd(seed, backend):
    state = random_instance(seed, 6, 3, "mixed", 0.1)
    assert gradient_error(state, backend=backend) <= 1e-5
    assert jacobian_error(state, backend=backend) <= 1e-5


def test_backends_agree(rng):
    state = random_instance(3, 7, 3, "mixed", 0.1)
    a = jacobians(state, backend="python")
    try:
        b = jacobians(state, backend="cython")
    except ImportError:
        pytest.skip("compiled core not built")
    for key in a.blocks:
        np.testing.assert_allclose(a[key], b[key], rtol=1e-12, atol=1e-14)


def test_own_jacobian_linear_orthonormal():
    X = np.eye(3)
    state = ModelState([LayerSpec(LIN, 2)], [np.ones((3, 2))], inputs=X)
    jt = jacobians(state)
    for i in range(3):
        for i0 in range(3):
            np.testing.assert_array_equal(jt.entry(i, 1, 1, i0), float(i == i0) * np.eye(2))


def test_higher_jacobians_vanish_with_zero_coefficients(rng):
    layers = [LayerSpec(G(0.5), 2), LayerSpec(G(0.5), 3)]
    state = ModelState(layers, [rng.standard_normal((4, 2)), np.zeros((4, 3))], inputs=rng.standard_normal((4, 2)))
    jt = jacobians(state)
    assert np.all(jt[(2, 1)] == 0)


def test_stale_state_rejected(rng):
    state = random_instance(0, 4, 2)
    state.set_coeffs(1, state.coeffs[0] * 2)
    with pytest.raises(ConsistencyError):
        jacobians(state)


def test_op_count_is_quadratic_in_n_and_layers():
    for n, L in ((4, 2), (6, 3)):
        state = random_instance(1, n, L)
        jt = jacobians(state)
        assert isinstance(jt, JacobianTable)
        assert jt.op_count == n * n * L * (L + 1) // 2


def test_distortion_gradient_examples(rng):
    x = np.array([[0.4, -1.2]])
    perfect = ModelState([LayerSpec(G(1.0), 2)], [x.copy()], inputs=x)
    assert np.all(grad_distortion(perfect, jacobians(perfect))[0] == 0)
    layers = [LayerSpec(G(1.0), 2), LayerSpec(G(1.0), 2)]
    zero = ModelState(layers, [np.zeros((3, 2))] * 2, inputs=rng.standard_normal((3, 2)))
    g = grad_distortion(zero, jacobians(zero))
    assert np.all(g[0] == 0)
    assert np.all(full_gradient(zero)[0] == 0)


def test_own_norm_gradient():
    layer = LayerSpec(G(1.0), 1)
    assert np.all(grad_norm_own(layer, np.zeros((2, 1)), np.eye(2)) == 0)
    assert grad_norm_own(layer, [[3.0]], np.array([[1.0]])).tolist() == [[6.0]]


def test_own_norm_gradient_fd(rng):
    layer = LayerSpec(G(1.0), 2, a_diag=[0.5, 1.5])
    K = gram(G(0.3), rng.standard_normal((5, 2)))
    phi = rng.standard_normal((5, 2))
    h = 1e-5
    fd = np.zeros_like(phi)
    for idx in np.ndindex(phi.shape):
        e = np.zeros_like(phi)
        e[idx] = h
        fd[idx] = (layer_norm_sq(layer, phi + e, K) - layer_norm_sq(layer, phi - e, K)) / (2 * h)
    assert relative_error(grad_norm_own(layer, phi, K), fd) <= 1e-6


def test_cross_norm_gradient(rng):
    state = random_instance(5, 5, 2, "gaussian", 0.0)
    jt = jacobians(state)
    assert grad_norm_cross(state, 1, jt) == []
    assert np.all(grad_norm_cross(state, 2, jt, nl=np.zeros((5, 5)))[0] == 0)

    def norm2(s):
        return layer_norm_sq(s.layers[1], s.coeffs[1], s.grams[1])

    fd = fd_gradient(state, objective=norm2)[0]
    assert relative_error(grad_norm_cross(state, 2, jt)[0], fd) <= 1e-5


def test_cross_norm_gradient_identical_supports():
    X = np.ones((3, 2))
    layers = [LayerSpec(G(1.0), 2), LayerSpec(G(1.0), 2)]
    state = ModelState(layers, [np.ones((3, 2)), np.ones((3, 2))], inputs=X)
    assert np.all(grad_norm_cross(state, 2, jacobians(state))[0] == 0)


def test_zero_lambda_gradient_is_distortion_gradient():
    state = random_instance(2, 5, 3, "mixed", 0.0)
    jt = jacobians(state)
    for a, b in zip(full_gradient(state, jt=jt), grad_distortion(state, jt)):
        np.testing.assert_array_equal(a, b)


def test_fd_is_exact_on_quadratic_fixture(rng):
    # one linear layer: the objective is quadratic in the coefficients
    X = rng.standard_normal((4, 2))
    state = ModelState([LayerSpec(LIN, 2, 0.1)], [rng.standard_normal((4, 2))], inputs=X)
    assert relative_error(fd_gradient(state)[0], full_gradient(state)[0]) <= 1e-9


def test_fd_convergence_order():
    state = random_instance(7, 4, 2, "gaussian", 0.1)
    exact = full_gradient(state)
    e1 = max(relative_error(a, f) for a, f in zip(exact, fd_gradient(state, step=1e-2)))
    e2 = max(relative_error(a, f) for a, f in zip(exact, fd_gradient(state, step=5e-3)))
    assert 3.0 < e1 / e2 < 5.0


def test_perfect_reconstruction_zero_gradient():
    x = np.array([[0.4, -1.2]])
    perfect = ModelState([LayerSpec(G(1.0), 2)], [x.copy()], inputs=x)
    assert np.max(np.abs(full_gradient(perfect)[0])) <= 1e-10


def test_fd_step_must_be_positive():
    with pytest.raises(ValueError):
        fd_gradient(random_instance(0, 4, 2), step=0.0)


def test_fd_step_constant():
    assert FD_STEP == 1e-5
