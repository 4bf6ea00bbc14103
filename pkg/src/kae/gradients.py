"""Analytic gradients of the KAE objective with respect to representer coefficients.

The derivative of ``x_i^(l)`` with respect to ``phi_{l0, i0}`` is built by a
recurrence over layers. Each block of the table holds all samples at once:
``jt[l, l0][i, :, i0, :]`` is the ``d_l x d_l0`` Jacobian. The base case
``l == l0`` is ``K_l[i, i0] A_l``; a higher layer combines the chain rule
through ``x_i^(l-1)`` with the motion of the layer's own support points.
"""

import numpy as np

from kae import _backend
from kae.errors import ShapeError
from kae.kernels import grad1_pairs
from kae.layers import coeff_inner, objective_finite


class JacobianTable:
    """Jacobian blocks keyed by ``(l, l0)`` with ``l >= l0`` (1-based layers).

    ``grad_pairs[l]`` caches ``G_l[i, k] = grad_1 k_l(x_i^(l-1), x_k^(l-1))``
    for every layer whose input is explicit. ``op_count`` counts the
    ``(i, i0)`` Jacobian entries produced, one small matrix product each.
    """

    def __init__(self, n):
        self.n = n
        self.blocks = {}
        self.grad_pairs = {}
        self.op_count = 0

    def __getitem__(self, key):
        return self.blocks[key]

    def __contains__(self, key):
        return key in self.blocks

    def entry(self, i, l, l0, i0):
        """The ``d_l x d_l0`` matrix d x_i^(l) / d phi_{l0, i0} (0-based samples)."""
        return self.blocks[(l, l0)][i, :, i0, :]


def own_jacobian(layer, gram_l):
    n = gram_l.shape[0]
    d = layer.dim
    block = np.zeros((n, d, n, d))
    idx = np.arange(d)
    block[:, idx, :, idx] = gram_l[None, :, :] * layer.a_diag[:, None, None]
    return block


def jacobians(state, upto=None, backend=None):
    """Build every Jacobian block ``(l, l0)`` with ``l0 <= l <= upto``.

    Raises
    ------
    ConsistencyError
        If the state's caches are stale.
    """
    state.check_fresh()
    L = state.depth if upto is None else upto
    n = state.n
    jt = JacobianTable(n)
    for l in range(2, L + 1):
        layer = state.layers[l - 1]
        jt.grad_pairs[l] = grad1_pairs(layer.kernel, state.reps[l - 1], state.grams[l - 1])
    for l0 in range(1, L + 1):
        jt.blocks[(l0, l0)] = own_jacobian(state.layers[l0 - 1], state.grams[l0 - 1])
        jt.op_count += n * n
        for l in range(l0 + 1, L + 1):
            jt.blocks[(l, l0)] = _backend.jacobian_step(
                jt.blocks[(l - 1, l0)],
                jt.grad_pairs[l],
                state.coeffs[l - 1],
                state.layers[l - 1].a_diag,
                backend=backend,
            )
            jt.op_count += n * n
    return jt


def _contract(weights, block):
    # sum_i weights[i] . block[i, :, i0, :] for every i0
    return np.tensordot(weights, block, axes=([0, 1], [0, 1]))


def grad_distortion(state, jt, inputs=None):
    """Gradient of the mean squared reconstruction error, one matrix per layer."""
    x = state.inputs if inputs is None else np.asarray(inputs, dtype=np.float64)
    L = state.depth
    r = x - state.reps[L]
    if r.shape != state.reps[L].shape:
        raise ShapeError("targets do not match the output layer")
    return [(-2.0 / state.n) * _contract(r, jt[(L, l0)]) for l0 in range(1, L + 1)]


def grad_norm_own(layer, phi, gram_l):
    """``2 K_l Phi_l A_l``: gradient of ``|f_l|^2`` with respect to ``Phi_l``."""
    phi = np.asarray(phi, dtype=np.float64)
    if gram_l.shape != (phi.shape[0], phi.shape[0]):
        raise ShapeError("Gram matrix does not match the coefficients")
    return 2.0 * gram_l @ phi * layer.a_diag


def grad_norm_cross(state, l, jt, nl=None):
    """Gradients of ``|f_l|^2`` with respect to ``Phi_l0`` for every ``l0 < l``.

    The layer's norm depends on upstream coefficients only through its
    kernel matrix. ``nl`` overrides ``N_l``; the implicit last layer of a
    K2AE passes its kernel-trick ``N_L`` here.

    Returns
    -------
    list of ndarray
        ``l - 1`` matrices, entry ``l0 - 1`` being the gradient for ``Phi_l0``.
    """
    if l < 2:
        return []
    if nl is None:
        nl = coeff_inner(state.layers[l - 1], state.coeffs[l - 1])
    return cross_gradients(nl, jt.grad_pairs[l], jt, l - 1)


def cross_gradients(nl, G, jt, below):
    """``2 sum_{i,k} N[i,k] grad_1 k(x_i, x_k)^T Jac x_i^(below)`` for each upstream layer."""
    H = np.einsum("ik,ikp->ip", nl, G)
    return [2.0 * _contract(H, jt[(below, l0)]) for l0 in range(1, below + 1)]


def full_gradient(state, inputs=None, jt=None, backend=None):
    """Gradient of :func:`kae.layers.objective_finite`'s total, per layer."""
    state.check_fresh()
    if jt is None:
        jt = jacobians(state, backend=backend)
    grads = grad_distortion(state, jt, inputs)
    for l, layer in enumerate(state.layers, start=1):
        if layer.lam != 0.0:
            grads[l - 1] = grads[l - 1] + layer.lam * grad_norm_own(layer, state.coeffs[l - 1], state.grams[l - 1])
            for l0, g in enumerate(grad_norm_cross(state, l, jt), start=1):
                grads[l0 - 1] = grads[l0 - 1] + layer.lam * g
    return grads


def _total(state):
    return objective_finite(state)[0]


def fd_gradient(state, inputs=None, step=1e-5, objective=None):
    """Central finite differences of ``objective`` over every coefficient.

    ``objective(state) -> float`` defaults to the total finite objective
    (with ``inputs`` as targets when given). Caches are rebuilt for every
    probe; ``state`` itself is left untouched.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    if objective is None:
        if inputs is None:
            objective = _total
        else:
            targets = np.asarray(inputs, dtype=np.float64)

            def objective(s):
                return objective_finite(s, targets)[0]

    probe = state.copy()
    grads = []
    for l in range(1, state.depth + 1):
        base = state.coeffs[l - 1]
        g = np.zeros_like(base)
        for idx in np.ndindex(base.shape):
            values = []
            for sign in (1.0, -1.0):
                phi = base.copy()
                phi[idx] += sign * step
                probe.set_coeffs(l, phi)
                probe.refresh()
                values.append(objective(probe))
            g[idx] = (values[0] - values[1]) / (2.0 * step)
        probe.set_coeffs(l, base)
        probe.refresh()
        grads.append(g)
    return grads


def fd_jacobians(state, step=1e-5):
    """Finite-difference Jacobian table of the training representations."""
    probe = state.copy()
    n, L = state.n, state.depth
    blocks = {}
    for l0 in range(1, L + 1):
        base = state.coeffs[l0 - 1]
        d0 = base.shape[1]
        for l in range(l0, L + 1):
            blocks[(l, l0)] = np.zeros((n, state.layers[l - 1].dim, n, d0))
        for i0 in range(n):
            for q in range(d0):
                outs = []
                for sign in (1.0, -1.0):
                    phi = base.copy()
                    phi[i0, q] += sign * step
                    probe.set_coeffs(l0, phi)
                    probe.refresh()
                    outs.append([probe.reps[l].copy() for l in range(l0, L + 1)])
                for l, plus, minus in zip(range(l0, L + 1), *outs):
                    blocks[(l, l0)][:, :, i0, q] = (plus - minus) / (2.0 * step)
        probe.set_coeffs(l0, base)
        probe.refresh()
    return blocks
