"""Pure numpy versions of the compiled kernels in ``_core.pyx``."""

import numpy as np


def sq_dists(X, Y):
    diff = X[:, None, :] - Y[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def jacobian_step(J_prev, G, phi, a_diag, nthreads=0):
    """One step of the Jacobian recurrence.

    ``J_prev[i, p, j, q]`` is d x_i^(l-1)[p] / d phi_{l0, j}[q],
    ``G[i, k] = grad_1 k_l(x_i^(l-1), x_k^(l-1))``. Returns the layer-l block

        out[i] = A_l (Phi_l^T G[i] J_prev[i] + sum_k phi_k (G[k, i] . J_prev[k]))
    """
    n, dp, m, d0 = J_prev.shape
    Jr = J_prev.reshape(n, dp, m * d0)
    M = np.einsum("ka,ikp->iap", phi, G)
    own = M @ Jr
    V = G @ Jr
    support = np.tensordot(phi, V, axes=([0], [0])).transpose(1, 0, 2)
    out = (own + support) * a_diag[None, :, None]
    return out.reshape(n, phi.shape[1], m, d0)
