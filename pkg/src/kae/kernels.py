"""Scalar kernels used inside decomposable operator-valued kernels.

Every kernel kind provides three things: evaluation, the gradient with
respect to its first argument, and the matrix of those gradients against a
support set (``delta_matrix``). The gradient machinery in
:mod:`kae.gradients` only touches kernels through these functions, so a new
kind needs exactly these three pieces.
"""

from dataclasses import dataclass

import numpy as np

from kae import _backend
from kae.errors import ShapeError, SpecError, ValidationError

KINDS = ("gaussian", "polynomial", "linear")


@dataclass(frozen=True)
class ScalarKernelSpec:
    """Parameterized scalar kernel.

    Parameters
    ----------
    kind : {'gaussian', 'polynomial', 'linear'}
    gamma : float
        Gaussian bandwidth, ``k(x, y) = exp(-gamma * |x - y|^2)``.
    a, b, c : float, float, int
        Polynomial parameters, ``k(x, y) = (a <x, y> + b) ** c``.
        ``linear`` is the polynomial with ``a=1, b=0, c=1``.
    """

    kind: str
    gamma: float = 1.0
    a: float = 1.0
    b: float = 0.0
    c: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpecError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "gaussian":
            if not (np.isfinite(self.gamma) and self.gamma > 0):
                raise SpecError("gaussian kernel requires gamma > 0")
        elif self.kind == "polynomial":
            if int(self.c) != self.c or self.c < 1:
                raise SpecError("polynomial kernel requires an integer degree c >= 1")
            if self.a == 0:
                raise SpecError("polynomial kernel requires a != 0")
            object.__setattr__(self, "c", int(self.c))
        else:
            object.__setattr__(self, "a", 1.0)
            object.__setattr__(self, "b", 0.0)
            object.__setattr__(self, "c", 1)

    @classmethod
    def gaussian(cls, gamma):
        return cls("gaussian", gamma=float(gamma))

    @classmethod
    def polynomial(cls, a=1.0, b=0.0, c=2):
        return cls("polynomial", a=float(a), b=float(b), c=c)

    @classmethod
    def linear(cls):
        return cls("linear")

    @property
    def is_gaussian(self):
        return self.kind == "gaussian"

    def to_dict(self):
        if self.kind == "gaussian":
            return {"kind": "gaussian", "gamma": self.gamma}
        if self.kind == "polynomial":
            return {"kind": "polynomial", "a": self.a, "b": self.b, "c": self.c}
        return {"kind": "linear"}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def _vec(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError(f"expected a vector, got shape {x.shape}")
    return x


def _pair(x, y):
    x, y = _vec(x), _vec(y)
    if x.shape != y.shape:
        raise ShapeError(f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
    return x, y


def _mat(X, name="X"):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {X.shape}")
    return X


def kernel_eval(spec, x, y):
    """Evaluate ``k(x, y)`` for two vectors."""
    x, y = _pair(x, y)
    if spec.kind == "gaussian":
        d = x - y
        return float(np.exp(-spec.gamma * np.dot(d, d)))
    return float((spec.a * np.dot(x, y) + spec.b) ** spec.c)


def kernel_grad1(spec, x, y):
    """Gradient of ``k(x, y)`` with respect to ``x``."""
    x, y = _pair(x, y)
    if spec.kind == "gaussian":
        d = x - y
        return -2.0 * spec.gamma * np.exp(-spec.gamma * np.dot(d, d)) * d
    base = spec.a * np.dot(x, y) + spec.b
    return spec.c * spec.a * base ** (spec.c - 1) * y


def gram(spec, X, Y=None):
    """Kernel matrix with entry ``(i, j) = k(X[i], Y[j])``."""
    X = _mat(X)
    Y = X if Y is None else _mat(Y, "Y")
    if X.shape[1] != Y.shape[1]:
        raise ShapeError(f"column mismatch: {X.shape[1]} vs {Y.shape[1]}")
    if spec.kind == "gaussian":
        return np.exp(-spec.gamma * _backend.sq_dists(X, Y))
    return (spec.a * (X @ Y.T) + spec.b) ** spec.c


def grad1_pairs(spec, X, K=None):
    """All first-argument gradients over a support set.

    Returns an ``(n, n, d)`` array ``G`` with ``G[i, j] = grad_1 k(X[i], X[j])``,
    so ``G[i]`` is the delta matrix of point ``i``. ``K`` may pass the
    already computed kernel matrix of ``X``.
    """
    X = _mat(X)
    if spec.kind == "gaussian":
        if K is None:
            K = gram(spec, X)
        diff = X[:, None, :] - X[None, :, :]
        return (-2.0 * spec.gamma) * K[:, :, None] * diff
    base = spec.a * (X @ X.T) + spec.b
    scale = spec.c * spec.a * base ** (spec.c - 1)
    return scale[:, :, None] * X[None, :, :]


def delta_matrix(spec, X_prev, i):
    """Rows ``grad_1 k(X_prev[i], X_prev[j])`` for every support point ``j``.

    ``i`` is a 0-based row index. The polynomial form uses
    ``c a (a G + b)^(c-1)`` termwise rather than a fractional power of the
    kernel matrix, which stays defined for negative entries.
    """
    X_prev = _mat(X_prev, "X_prev")
    n = X_prev.shape[0]
    if not 0 <= i < n:
        raise IndexError(f"index {i} out of range for {n} points")
    xi = X_prev[i]
    if spec.kind == "gaussian":
        diff = xi[None, :] - X_prev
        k_row = np.exp(-spec.gamma * np.sum(diff * diff, axis=1))
        return -2.0 * spec.gamma * k_row[:, None] * diff
    base = spec.a * (X_prev @ xi) + spec.b
    return (spec.c * spec.a * base ** (spec.c - 1))[:, None] * X_prev


def gram_induced_eval(spec, k_xx, k_xy, k_yy):
    """Kernel value between two feature-space points known only by inner products."""
    if k_xx < 0 or k_yy < 0:
        raise ValidationError("self inner products must be non-negative")
    if spec.kind == "gaussian":
        return float(np.exp(-spec.gamma * max(0.0, k_xx - 2.0 * k_xy + k_yy)))
    return float((spec.a * k_xy + spec.b) ** spec.c)


def gram_induced(spec, k_xy, k_xx, k_yy):
    """Vectorized :func:`gram_induced_eval`.

    ``k_xy`` is an ``(m, n)`` inner-product table between two samples, with
    ``k_xx`` (length ``m``) and ``k_yy`` (length ``n``) their squared norms.
    """
    k_xy = _mat(k_xy, "k_xy")
    k_xx = np.asarray(k_xx, dtype=np.float64).reshape(-1)
    k_yy = np.asarray(k_yy, dtype=np.float64).reshape(-1)
    if k_xy.shape != (k_xx.shape[0], k_yy.shape[0]):
        raise ShapeError(
            f"inner products {k_xy.shape} do not match norms ({k_xx.shape[0]}, {k_yy.shape[0]})"
        )
    if spec.kind == "gaussian":
        sq = k_xx[:, None] - 2.0 * k_xy + k_yy[None, :]
        return np.exp(-spec.gamma * np.maximum(sq, 0.0))
    return (spec.a * k_xy + spec.b) ** spec.c


def validate_gram(K, psd=True):
    """Check the structural invariants of an input Gram table; return it as float64."""
    K = np.asarray(K, dtype=np.float64)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValidationError(f"Gram matrix must be square, got shape {K.shape}")
    if not np.all(np.isfinite(K)):
        raise ValidationError("Gram matrix has non-finite entries")
    tol = 1e-12 * np.maximum(1.0, np.abs(K))
    if np.any(np.abs(K - K.T) > tol):
        raise ValidationError("Gram matrix is not symmetric")
    if np.any(np.diag(K) < 0):
        raise ValidationError("Gram matrix has a negative diagonal entry")
    if psd and K.shape[0] > 0:
        w = np.linalg.eigvalsh(0.5 * (K + K.T))
        if w[0] < -1e-8 * max(w[-1], 0.0):
            raise ValidationError(
                f"Gram matrix is not positive semidefinite (smallest eigenvalue {w[0]:.3e})"
            )
    return K


def median_gamma(X):
    """Bandwidth ``1 / (2 median^2)`` over pairwise distances of the rows of ``X``."""
    X = _mat(X)
    return _median_gamma_from_sq(_backend.sq_dists(X, X))


def median_gamma_from_gram(K):
    """Same heuristic with distances induced by an inner-product table."""
    K = np.asarray(K, dtype=np.float64)
    d = np.diag(K)
    return _median_gamma_from_sq(np.maximum(d[:, None] - 2.0 * K + d[None, :], 0.0))


def _median_gamma_from_sq(sq):
    n = sq.shape[0]
    iu = np.triu_indices(n, k=1)
    dist = np.sqrt(sq[iu])
    if dist.size == 0:
        raise ValidationError("median bandwidth needs at least two points")
    med = float(np.median(dist))
    if med <= 0:
        raise ValidationError("median pairwise distance is zero; cannot set a bandwidth")
    return 1.0 / (2.0 * med * med)
