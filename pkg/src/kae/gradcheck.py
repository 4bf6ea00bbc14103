"""Seeded random instances and finite-difference comparisons of the gradients."""

import itertools

import numpy as np

from kae.gradients import fd_gradient, fd_jacobians, full_gradient, jacobians
from kae.kernels import ScalarKernelSpec
from kae.layers import LayerSpec, ModelState

FD_STEP = 1e-5
ABS_FLOOR = 1e-8


def relative_error(analytic, reference, floor=ABS_FLOOR):
    """``|a - r| / max(|r|, floor)`` in the Frobenius norm."""
    a = np.asarray(analytic, dtype=np.float64)
    r = np.asarray(reference, dtype=np.float64)
    return float(np.linalg.norm(a - r) / max(np.linalg.norm(r), floor))


def _kernel(rng, family):
    if family == "mixed":
        family = ("gaussian", "polynomial")[rng.integers(2)]
    if family == "gaussian":
        return ScalarKernelSpec.gaussian(float(rng.uniform(0.3, 1.0)))
    return ScalarKernelSpec.polynomial(a=float(rng.uniform(0.3, 0.8)), b=1.0, c=int(rng.integers(2, 4)))


def random_instance(seed, n, depth, family="gaussian", lam=0.0, max_dim=5):
    """A random explicit KAE with its representations computed.

    Layer dimensions are drawn in ``1..max_dim``; the output dimension equals
    the input dimension. ``a_diag`` is drawn away from the identity so the
    operator part is exercised.
    """
    rng = np.random.default_rng(seed)
    d0 = int(rng.integers(1, max_dim + 1))
    dims = [int(rng.integers(1, max_dim + 1)) for _ in range(depth - 1)] + [d0]
    X = rng.standard_normal((n, d0)) / np.sqrt(d0)
    layers = [
        LayerSpec(_kernel(rng, family), d, lam, a_diag=rng.uniform(0.5, 1.5, d)) for d in dims
    ]
    coeffs = [rng.standard_normal((n, d)) / n for d in dims]
    return ModelState(layers, coeffs, inputs=X)


def grid(seed=0):
    """Parameters of the standard oracle grid: ``(seed, n, depth, family, lam)``."""
    cases = itertools.product((4, 8), (2, 3), ("gaussian", "polynomial", "mixed"), (0.0, 0.1))
    for k, (n, depth, family, lam) in enumerate(cases):
        yield seed + k, n, depth, family, lam


def gradient_error(state, step=FD_STEP, backend=None):
    """Largest per-layer relative error of :func:`full_gradient` against finite differences."""
    analytic = full_gradient(state, backend=backend)
    numeric = fd_gradient(state, step=step)
    return max(relative_error(a, f) for a, f in zip(analytic, numeric))


def jacobian_error(state, step=FD_STEP, backend=None):
    """Largest per-block relative error of the Jacobian table against finite differences."""
    jt = jacobians(state, backend=backend)
    numeric = fd_jacobians(state, step=step)
    return max(relative_error(jt[key], block) for key, block in numeric.items())


def run_grid(seed=0, backend=None, jacobian=True):
    """Evaluate the whole grid; rows ``(params, gradient_error, jacobian_error)``."""
    rows = []
    for params in grid(seed):
        state = random_instance(*params)
        g = gradient_error(state, backend=backend)
        j = jacobian_error(state, backend=backend) if jacobian else None
        rows.append((params, g, j))
    return rows
