"""Independent reference implementations used by several test modules."""

import numpy as np

from kae.gradients import full_gradient
from kae.kernels import gram
from kae.layers import LayerSpec, ModelState, forward_all, objective_finite


class ExplicitAlternating:
    """Alternating GD / kernel ridge regression on explicit vectors.

    The input space is R^d with ``K_in = X X^T``. The last layer's
    coefficients are formed explicitly, ``Phi_L = (K_L + n lam I)^-1 X``,
    and the inner gradient is the explicit-model gradient with ``Phi_L``
    held fixed.
    """

    def __init__(self, X, layers, coeffs):
        self.X = np.asarray(X, dtype=np.float64)
        *self.inner_layers, last = layers
        d = self.X.shape[1]
        self.last = LayerSpec(last.kernel, d, last.lam)
        self.coeffs = [c.copy() for c in coeffs]
        self._solve_last()

    def _solve_last(self):
        inner = ModelState(self.inner_layers, self.coeffs, inputs=self.X)
        n = self.X.shape[0]
        K = gram(self.last.kernel, inner.reps[-1])
        phi_last = np.linalg.solve(K + n * self.last.lam * np.eye(n), self.X)
        self.model = ModelState(self.inner_layers + [self.last], self.coeffs + [phi_last], inputs=self.X)

    def objective(self):
        return objective_finite(self.model)

    def step(self, gamma):
        grads = full_gradient(self.model)[:-1]
        self.coeffs = [c - gamma * g for c, g in zip(self.coeffs, grads)]
        self._solve_last()

    def encode(self, X_new, upto):
        return forward_all(self.model, X_new, upto=upto)[-1]

    def residuals(self, X_new):
        out = forward_all(self.model, X_new)[-1]
        return np.sum((X_new - out) ** 2, axis=1)
